"""Timestamped biphoton events and software coincidence counting.

Generates a seeded run with the eraser in, pairs signal and idler clicks by
timing alone (8 ns offset, 1 ns window), and shows that the gated
subpopulations carry full-contrast fringes while their sum is the fringe-free
record D0 sees on its own.
"""
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from qeraser import (
    ALWAYS_IN,
    ApparatusConfig,
    CoincidenceWindow,
    IdlerDetector,
    RunConfig,
    fit_fringes,
    gate_coincidences,
    histogram,
    phase_shift_estimate,
    run_experiment,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

cfg = ApparatusConfig(beam_splitter_in=True)
run = RunConfig(apparatus=cfg, n_pairs=300_000, seed=7, policy=ALWAYS_IN)
log = run_experiment(run)
print(f"generated {len(log)} pairs; first event: {log[0]}")

matches = gate_coincidences(log, CoincidenceWindow(expected_offset_ns=8.0, half_width_ns=1.0))
print(f"coincidence counter matched {len(matches)} pairs, "
      f"{matches.mismatched_pair_count(log)} mismatches, "
      f"{len(matches.unmatched_signals)} unmatched signals")

h1 = histogram(log, IdlerDetector.D1)
h2 = histogram(log, IdlerDetector.D2)
hu = histogram(log)
f1, f2 = fit_fringes(h1), fit_fringes(h2)
print(f"D1-gated visibility: {f1.visibility:.4f} +- {f1.se_visibility:.4f}")
print(f"D2-gated visibility: {f2.visibility:.4f} +- {f2.se_visibility:.4f}")
print(f"phase shift between gates: {abs(phase_shift_estimate(h1, h2)):.4f} periods")
print("gated sum equals ungated bin-for-bin:",
      bool(np.array_equal(h1.counts + h2.counts, hu.counts)))

fig, ax = plt.subplots(figsize=(9, 4.5))
centers = hu.centers
ax.step(centers, h1.counts, where="mid", label=f"D1-gated (V={f1.visibility:.3f})")
ax.step(centers, h2.counts, where="mid", label=f"D2-gated (V={f2.visibility:.3f})")
ax.step(centers, hu.counts, "k", where="mid", alpha=0.5, label="ungated = sum")
ax.set_xlabel("u (fringe periods)")
ax.set_ylabel("counts")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "gated_histograms.png", dpi=120)
print(f"wrote {OUT / 'gated_histograms.png'}")
