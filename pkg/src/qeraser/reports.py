"""Report documents: JSON artifacts whose verdicts are self-contained.

A report carries the config echo, histograms, visibility fits, and
comparison results, plus a verdict list.  Every verdict stores the observed
number, the comparison operator, and the threshold, so a reader (or a test)
can recompute pass/fail from the document alone.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .analysis import ComparisonReport, FringeFit, GatedHistogram

REPORT_SCHEMA = "qeraser-report/1"


def verdict(name: str, observed, op: str, threshold) -> dict:
    """One pass/fail entry; `op` is '<=', '>=', '==', or 'within'."""
    if isinstance(threshold, tuple):
        threshold = list(threshold)  # keep the in-memory document JSON-stable
    return {"name": name, "observed": observed, "op": op,
            "threshold": threshold, "passed": evaluate_verdict(observed, op, threshold)}


def evaluate_verdict(observed, op: str, threshold) -> bool:
    if op == "<=":
        return bool(observed <= threshold)
    if op == ">=":
        return bool(observed >= threshold)
    if op == "==":
        return bool(observed == threshold)
    if op == "within":
        lo, hi = threshold
        return bool(lo <= observed <= hi)
    raise ValueError(f"unknown verdict operator {op!r}")


def recompute_verdicts(report: dict) -> list[bool]:
    """Re-derive every verdict from the numbers stored in the document."""
    return [evaluate_verdict(v["observed"], v["op"], v["threshold"])
            for v in report["verdicts"]]


def histogram_payload(h: GatedHistogram) -> dict:
    return {
        "gate": h.gate_name,
        "bin_edges": [float(x) for x in h.bin_edges],
        "counts": [int(c) for c in h.counts],
        "total_events": int(h.total_events),
    }


def fit_payload(f: FringeFit) -> dict:
    return {
        "visibility": f.visibility,
        "phase_rad": f.phase,
        "amplitude": f.amplitude,
        "se_visibility": f.se_visibility,
        "se_phase": f.se_phase,
        "reduced_chi2": f.reduced_chi2,
        "n_counts": f.n_counts,
    }


def build_report(preset: str, config_echo: dict, histograms: dict[str, GatedHistogram],
                 fits: dict[str, FringeFit], comparisons: dict[str, ComparisonReport],
                 verdicts: list[dict], extra: dict | None = None) -> dict:
    report = {
        "schema": REPORT_SCHEMA,
        "preset": preset,
        "config": config_echo,
        "histograms": {k: histogram_payload(h) for k, h in histograms.items()},
        "fits": {k: fit_payload(f) for k, f in fits.items()},
        "comparisons": {k: c.to_dict() for k, c in comparisons.items()},
        "verdicts": verdicts,
        "passed": all(v["passed"] for v in verdicts),
    }
    if extra:
        report.update(extra)
    return report


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def write_histogram_csv(h: GatedHistogram, path) -> None:
    lines = ["bin_lo,bin_hi,count"]
    lines += [f"{lo:.9g},{hi:.9g},{int(c)}"
              for lo, hi, c in zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_histogram_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (bin_edges, counts) from a histogram CSV."""
    lines = Path(path).read_text().strip().split("\n")
    if lines[0] != "bin_lo,bin_hi,count":
        raise ValueError(f"{path}: unexpected histogram CSV header")
    rows = [ln.split(",") for ln in lines[1:]]
    lo = np.array([r[0] for r in rows], dtype=float)
    hi = np.array([r[1] for r in rows], dtype=float)
    counts = np.array([r[2] for r in rows], dtype=np.int64)
    return np.concatenate([lo, hi[-1:]]), counts
