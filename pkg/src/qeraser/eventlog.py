"""Event-log text format: one line per pair, checksum footer, checkpoints.

The format is deliberately plain so logs diff cleanly and survive casual
inspection::

    pair_id,t_signal_ns,u_signal,bs_in,idler_detector,t_idler_ns
    0,1169.217,-0.733931324,1,D2,1177.217
    ...
    #sha256=<hex of every byte above>

Timestamps are fixed-point nanoseconds with 3 decimals (the native picosecond
grid), coordinates carry 9 significant digits, and unresolved fields are
``?``.  Phase-1 (deferred choice) logs additionally carry a
``#checkpoint={...}`` footer line with the run parameters and the pristine
idler-stream state; the checksum line always comes last and covers everything
before it.  All formatting is fixed, so identical runs serialize to identical
bytes.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json

import numpy as np
from numpy.random import Generator, Philox

from .apparatus import ApparatusConfig
from . import engine

HEADER = "pair_id,t_signal_ns,u_signal,bs_in,idler_detector,t_idler_ns"
CHECKPOINT_FORMAT = "qeraser-checkpoint"
CHECKPOINT_VERSION = 1

class LogFormatError(ValueError):
    """Event-log file is malformed, corrupted, or fails its checksum."""


class CheckpointError(LogFormatError):
    """Checkpoint footer missing, malformed, or of an unsupported version."""


def _fmt_t(ps: int) -> str:
    return f"{ps // 1000}.{ps % 1000:03d}"


def _record_lines(log: engine.EventLog) -> list[str]:
    # Hot path for multi-million-event logs: go through plain Python lists
    # and vectorized text columns, not numpy scalars.
    bs_txt = np.choose(log.bs_code + 1, ["?", "0", "1"]).tolist()
    det_txt = np.choose(log.det_code, ["?", "D1", "D2"]).tolist()
    lines = []
    append = lines.append
    for pid, tps, u, bs, det, tips in zip(
            log.pair_id.tolist(), log.t_signal_ps.tolist(), log.u_signal.tolist(),
            bs_txt, det_txt, log.t_idler_ps.tolist()):
        qs, rs = divmod(tps, 1000)
        if det == "?":
            append(f"{pid},{qs}.{rs:03d},{u:.9g},{bs},?,?")
        else:
            qi, ri = divmod(tips, 1000)
            append(f"{pid},{qs}.{rs:03d},{u:.9g},{bs},{det},{qi}.{ri:03d}")
    return lines


def signal_column_text(log: engine.EventLog) -> str:
    """The signal-only columns (pair_id, t_signal, u_signal) as text.

    This is the byte-level object the no-signaling checks compare: it must
    be identical across runs that differ only in the beam-splitter choice.
    """
    return "\n".join(
        f"{pid},{tps // 1000}.{tps % 1000:03d},{u:.9g}"
        for pid, tps, u in zip(log.pair_id.tolist(), log.t_signal_ps.tolist(),
                               log.u_signal.tolist())) + "\n"


def serialize_event_log(log: engine.EventLog, checkpoint: dict | None = None) -> bytes:
    body_lines = [HEADER, *_record_lines(log)]
    if checkpoint is not None:
        body_lines.append("#checkpoint=" + json.dumps(checkpoint, sort_keys=True,
                                                      separators=(",", ":")))
    body = ("\n".join(body_lines) + "\n").encode()
    digest = hashlib.sha256(body).hexdigest()
    return body + f"#sha256={digest}\n".encode()


def write_event_log(log: engine.EventLog, path, checkpoint: dict | None = None) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(serialize_event_log(log, checkpoint))
    except OSError as exc:
        raise OSError(f"cannot persist event log to {path}: {exc}") from exc


def read_event_log(path, apparatus: ApparatusConfig | None = None,
                   require_checkpoint: bool = False) -> tuple[engine.EventLog, dict | None]:
    """Read and fully re-validate a persisted event log.

    The apparatus comes from the checkpoint footer when present; plain logs
    need it passed in (the format stores only event data).  Checksum, column
    shape, pair-id ordering, and the cross-field pending rules are all
    enforced before the log is returned.
    """
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise LogFormatError(f"cannot read event log {path}: {exc}") from exc

    text = raw.decode("utf-8", errors="strict")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[-1].startswith("#sha256="):
        raise LogFormatError(f"{path}: missing checksum line")
    claimed = lines.pop().removeprefix("#sha256=")
    body_len = len(raw) - len(f"#sha256={claimed}\n".encode())
    actual = hashlib.sha256(raw[:body_len]).hexdigest()
    if actual != claimed:
        raise LogFormatError(f"{path}: checksum mismatch (file corrupted?)")

    checkpoint = None
    if lines and lines[-1].startswith("#checkpoint="):
        try:
            checkpoint = json.loads(lines.pop().removeprefix("#checkpoint="))
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: unparseable checkpoint footer") from exc
        if checkpoint.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path}: unknown checkpoint format {checkpoint.get('format')!r}")
        if checkpoint.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"{path}: checkpoint version {checkpoint.get('version')!r} "
                f"not supported (expected {CHECKPOINT_VERSION})")
    if require_checkpoint and checkpoint is None:
        raise CheckpointError(f"{path}: not a phase-1 checkpoint (footer missing)")

    if not lines or lines[0] != HEADER:
        raise LogFormatError(f"{path}: bad or missing header line")
    records = lines[1:]

    if checkpoint is not None:
        apparatus = _apparatus_from_checkpoint(checkpoint)
    if apparatus is None:
        raise ValueError("apparatus required to interpret a plain event log")

    try:
        # One flat split beats per-line parsing by an order of magnitude.
        fields = "\n".join(records).replace("\n", ",").split(",") if records else []
        if len(fields) % 6:
            raise LogFormatError(f"{path}: expected 6 columns per record")
        cols = [fields[i::6] for i in range(6)]
        pair_id = np.array(cols[0], dtype=np.int64)
        t_signal_ps = _parse_t(np.asarray(cols[1]))
        u_signal = np.array(cols[2], dtype=np.float64)
        bs_code = _map_symbols(np.asarray(cols[3]), {"?": -1, "0": 0, "1": 1}, "bs_in").astype(np.int8)
        det_code = _map_symbols(np.asarray(cols[4]), {"?": 0, "D1": 1, "D2": 2},
                                "idler_detector").astype(np.int8)
        t_idler_col = np.asarray(cols[5])
        pending = t_idler_col == "?"
        t_idler_ps = _parse_t(np.where(pending, "0", t_idler_col))
        t_idler_ps[pending] = engine.T_PENDING
    except (ValueError, KeyError) as exc:
        if isinstance(exc, LogFormatError):
            raise
        raise LogFormatError(f"{path}: malformed record ({exc})") from exc

    log = engine.EventLog(apparatus=apparatus, pair_id=pair_id, t_signal_ps=t_signal_ps,
                          u_signal=u_signal, bs_code=bs_code, det_code=det_code,
                          t_idler_ps=t_idler_ps)
    try:
        log.validate()
    except ValueError as exc:
        raise LogFormatError(f"{path}: invariant violation ({exc})") from exc
    if checkpoint is None and np.any(det_code == engine.DET_PENDING):
        raise LogFormatError(f"{path}: pending fields outside a phase-1 checkpoint")
    return log, checkpoint


def _parse_t(col: np.ndarray) -> np.ndarray:
    # Fixed-point ns -> integer ps.  Values are exact integers in ps, far
    # below 2**53, so the float round trip is lossless.
    ns = col.astype(np.float64)
    return np.rint(ns * 1000.0).astype(np.int64)


def _map_symbols(col: np.ndarray, mapping: dict[str, int], name: str) -> np.ndarray:
    out = np.full(len(col), -128, dtype=np.int16)
    for text, code in mapping.items():
        out[col == text] = code
    if np.any(out == -128):
        bad = col[out == -128][0]
        raise LogFormatError(f"invalid {name} value {bad!r}")
    return out


def _state_to_json(state: dict) -> dict:
    def conv(x):
        if isinstance(x, np.ndarray):
            return [int(v) for v in x]
        if isinstance(x, dict):
            return {k: conv(v) for k, v in x.items()}
        return int(x) if isinstance(x, (np.integer,)) else x
    return conv(state)


def _state_from_json(state: dict) -> dict:
    out = dict(state)
    inner = dict(out["state"])
    inner["counter"] = np.array(inner["counter"], dtype=np.uint64)
    inner["key"] = np.array(inner["key"], dtype=np.uint64)
    out["state"] = inner
    out["buffer"] = np.array(out["buffer"], dtype=np.uint64)
    return out


def make_checkpoint(run: engine.RunConfig, idler_gen: Generator) -> dict:
    """Footer payload for a phase-1 log: run parameters + idler stream state."""
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "seed": int(run.seed),
        "n_pairs": int(run.n_pairs),
        "interarrival_mean_ns": float(run.interarrival_mean_ns),
        "apparatus": dataclasses.asdict(run.apparatus),
        "idler_stream": _state_to_json(idler_gen.bit_generator.state),
    }


def _apparatus_from_checkpoint(checkpoint: dict) -> ApparatusConfig:
    try:
        return ApparatusConfig(**checkpoint["apparatus"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint apparatus block invalid: {exc}") from exc


def run_from_checkpoint(checkpoint: dict) -> engine.RunConfig:
    try:
        return engine.RunConfig(
            apparatus=_apparatus_from_checkpoint(checkpoint),
            n_pairs=checkpoint["n_pairs"],
            seed=checkpoint["seed"],
            interarrival_mean_ns=checkpoint["interarrival_mean_ns"],
            policy=engine.DEFERRED,
        )
    except KeyError as exc:
        raise CheckpointError(f"checkpoint missing field {exc}") from exc


def restore_stream(checkpoint: dict) -> Generator:
    try:
        bg = Philox()
        bg.state = _state_from_json(checkpoint["idler_stream"])
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointError(f"checkpoint idler stream state invalid: {exc}") from exc
    return Generator(bg)
