"""Seeded generation of timestamped biphoton detection events.

Three independent Philox streams are derived from one 64-bit seed: pair
interarrival times, signal screen coordinates, and idler outcomes.  Philox is
counter-based, so draws are identical across platforms and any contiguous
block of events can be regenerated in isolation.  Crucially the signal
streams never depend on the beam-splitter policy: the policy is consulted
only after each signal timestamp exists, and only the idler stream feeds the
detector draw.  That factorization is legitimate because the D0 marginal is
provably independent of the idler-arm routing, and it is what makes a
delayed (even deferred-to-a-later-process) choice implementable without any
retroaction on recorded signals.

Timestamps are integer picoseconds, matching the event-log text precision,
so ``t_idler - t_signal`` equals the idler delay exactly in every resolved
event.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from numpy.random import Generator, Philox

from .apparatus import ApparatusConfig, IdlerDetector
from .sampling import SamplerTable, detector_one_probability, marginal_sampler

# Stream tags: second word of the 128-bit Philox key (first word is the seed).
TIME_STREAM = 0x54494D45      # "TIME"
SIGNAL_STREAM = 0x5349474E    # "SIGN"
IDLER_STREAM = 0x49444C52     # "IDLR"

# Column codes for unresolved fields.
BS_UNDECIDED = np.int8(-1)
BS_OUT = np.int8(0)
BS_IN = np.int8(1)
DET_PENDING = np.int8(0)
DET_D1 = np.int8(1)
DET_D2 = np.int8(2)
T_PENDING = np.int64(-1)

_MASK64 = (1 << 64) - 1
# Philox4x64 emits 4 words per counter tick; advance() counts ticks.
_PHILOX_BLOCK = 4


class PolicyDeferredError(RuntimeError):
    """Operation requires a decided beam-splitter policy."""


class DelayedChoicePolicy:
    """Per-event beam-splitter rule.

    Rules see only (pair_id, t_signal); the interface never exposes the
    signal coordinate, so a position-reading policy cannot be written.
    """

    deferred = False

    def resolve(self, pair_ids: np.ndarray, t_signal_ns: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class _AlwaysIn(DelayedChoicePolicy):
    def resolve(self, pair_ids, t_signal_ns):
        return np.ones(len(pair_ids), dtype=bool)

    def __repr__(self):
        return "ALWAYS_IN"


class _AlwaysOut(DelayedChoicePolicy):
    def resolve(self, pair_ids, t_signal_ns):
        return np.zeros(len(pair_ids), dtype=bool)

    def __repr__(self):
        return "ALWAYS_OUT"


class PerEvent(DelayedChoicePolicy):
    """Insert the beam splitter when rule(pair_id, t_signal_ns) is true."""

    def __init__(self, rule: Callable[[int, float], bool]):
        self.rule = rule

    def resolve(self, pair_ids, t_signal_ns):
        return np.fromiter(
            (bool(self.rule(int(p), float(t))) for p, t in zip(pair_ids, t_signal_ns)),
            dtype=bool, count=len(pair_ids))

    def __repr__(self):
        return f"PerEvent({self.rule!r})"


class _Deferred(DelayedChoicePolicy):
    """Choice supplied externally between the signal and idler phases."""

    deferred = True

    def resolve(self, pair_ids, t_signal_ns):
        raise PolicyDeferredError("beam-splitter choice is deferred; run the idler phase")

    def __repr__(self):
        return "DEFERRED"


ALWAYS_IN = _AlwaysIn()
ALWAYS_OUT = _AlwaysOut()
DEFERRED = _Deferred()


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run: apparatus, size, seed, policy."""

    apparatus: ApparatusConfig
    n_pairs: int
    seed: int
    interarrival_mean_ns: float = 1000.0
    policy: DelayedChoicePolicy = ALWAYS_OUT

    def __post_init__(self) -> None:
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if not self.interarrival_mean_ns > self.apparatus.idler_delay_ns:
            raise ValueError("interarrival mean must exceed the idler delay")


@dataclass(frozen=True)
class BiphotonEvent:
    """One entangled pair as recorded: signal first, idler 8 ns later."""

    pair_id: int
    t_signal_ps: int
    u_signal: float
    bs_in: bool | None
    idler_detector: IdlerDetector | None
    t_idler_ps: int | None

    @property
    def t_signal_ns(self) -> float:
        return self.t_signal_ps / 1000.0

    @property
    def t_idler_ns(self) -> float | None:
        return None if self.t_idler_ps is None else self.t_idler_ps / 1000.0


@dataclass
class EventLog:
    """Columnar store of events; indexing yields BiphotonEvent views."""

    apparatus: ApparatusConfig
    pair_id: np.ndarray       # int64, strictly increasing
    t_signal_ps: np.ndarray   # int64, nondecreasing
    u_signal: np.ndarray      # float64 in [-U, U]
    bs_code: np.ndarray       # int8: BS_OUT / BS_IN / BS_UNDECIDED
    det_code: np.ndarray      # int8: DET_D1 / DET_D2 / DET_PENDING
    t_idler_ps: np.ndarray    # int64, T_PENDING when unresolved

    def __len__(self) -> int:
        return len(self.pair_id)

    def __getitem__(self, i: int) -> BiphotonEvent:
        bs = None if self.bs_code[i] == BS_UNDECIDED else bool(self.bs_code[i])
        det = (None if self.det_code[i] == DET_PENDING
               else (IdlerDetector.D1 if self.det_code[i] == DET_D1 else IdlerDetector.D2))
        t_id = None if self.t_idler_ps[i] == T_PENDING else int(self.t_idler_ps[i])
        return BiphotonEvent(int(self.pair_id[i]), int(self.t_signal_ps[i]),
                             float(self.u_signal[i]), bs, det, t_id)

    def __iter__(self) -> Iterator[BiphotonEvent]:
        return (self[i] for i in range(len(self)))

    @property
    def resolved(self) -> bool:
        return bool(np.all(self.det_code != DET_PENDING))

    @property
    def t_signal_ns(self) -> np.ndarray:
        return self.t_signal_ps / 1000.0

    def validate(self) -> None:
        """Check the structural invariants every log must satisfy."""
        if np.any(np.diff(self.pair_id) <= 0):
            raise ValueError("pair_id must be strictly increasing")
        if np.any(np.diff(self.t_signal_ps) < 0):
            raise ValueError("t_signal must be nondecreasing")
        if np.any(np.abs(self.u_signal) > self.apparatus.detector_range):
            raise ValueError("u_signal outside detector range")
        pending_det = self.det_code == DET_PENDING
        undecided = self.bs_code == BS_UNDECIDED
        if np.any(undecided & ~pending_det):
            raise ValueError("resolved detector with undecided beam splitter")
        resolved = ~pending_det
        delay_ps = _delay_ps(self.apparatus)
        if np.any(self.t_idler_ps[resolved] - self.t_signal_ps[resolved] != delay_ps):
            raise ValueError("resolved events must have t_idler = t_signal + idler delay")
        if np.any(self.t_idler_ps[pending_det] != T_PENDING):
            raise ValueError("pending events must not carry an idler timestamp")


def _delay_ps(apparatus: ApparatusConfig) -> np.int64:
    return np.int64(round(apparatus.idler_delay_ns * 1000.0))


def _stream_key(seed: int, tag: int) -> np.ndarray:
    return np.array([seed & _MASK64, tag & _MASK64], dtype=np.uint64)


def stream(seed: int, tag: int, skip: int = 0) -> Generator:
    """Generator for one derived substream, optionally skipping draws.

    ``skip`` must be a multiple of 4 (Philox4x64 block size); each double
    consumes exactly one 64-bit word, so advance(skip/4) positions the
    counter as if ``skip`` draws had been taken.
    """
    bg = Philox(key=_stream_key(seed, tag))
    if skip:
        if skip % _PHILOX_BLOCK:
            raise ValueError("stream skip must be a multiple of 4")
        bg.advance(skip // _PHILOX_BLOCK)
    return Generator(bg)


def _uniforms(seed: int, tag: int, n: int, chunk_size: int | None = None) -> np.ndarray:
    """n uniform doubles from a substream, optionally in independent chunks.

    Chunked output is byte-identical to the one-shot draw: each chunk starts
    at a block-aligned counter offset, so partitions of the pair-id range can
    be generated in any order (or in parallel) and merged.
    """
    if chunk_size is None:
        return stream(seed, tag).random(n)
    chunk_size = max(_PHILOX_BLOCK, (chunk_size + _PHILOX_BLOCK - 1) // _PHILOX_BLOCK * _PHILOX_BLOCK)
    parts = []
    for start in range(0, n, chunk_size):
        count = min(chunk_size, n - start)
        parts.append(stream(seed, tag, skip=start).random(count))
    return np.concatenate(parts)


def _interarrival_ps(v: np.ndarray, mean_ns: float) -> np.ndarray:
    # Inverse-CDF exponential: one uniform per draw, no rejection, so the
    # stream position is a pure function of the event index.
    dt_ns = -mean_ns * np.log1p(-v)
    return np.rint(dt_ns * 1000.0).astype(np.int64)


def _signal_columns(run: RunConfig, sampler: SamplerTable | None,
                    chunk_size: int | None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if sampler is None:
        sampler = marginal_sampler(run.apparatus)
    vt = _uniforms(run.seed, TIME_STREAM, run.n_pairs, chunk_size)
    vs = _uniforms(run.seed, SIGNAL_STREAM, run.n_pairs, chunk_size)
    t_signal_ps = np.cumsum(_interarrival_ps(vt, run.interarrival_mean_ns))
    u_signal = sampler.inverse(vs)
    pair_id = np.arange(run.n_pairs, dtype=np.int64)
    return pair_id, t_signal_ps, u_signal


def run_experiment(run: RunConfig, sampler: SamplerTable | None = None,
                   chunk_size: int | None = None) -> EventLog:
    """Generate a fully resolved event log.

    The policy may consult each signal timestamp (the choice happens "after"
    the signal exists) but never the signal coordinate.  Logs are a pure
    function of (run, policy outcome): rerunning with the same seed gives
    byte-identical serialized events.
    """
    if run.policy.deferred:
        raise PolicyDeferredError("deferred policy: use run_signal_phase / run_idler_phase")
    pair_id, t_signal_ps, u_signal = _signal_columns(run, sampler, chunk_size)
    bs = run.policy.resolve(pair_id, t_signal_ps / 1000.0)
    vi = _uniforms(run.seed, IDLER_STREAM, run.n_pairs, chunk_size)
    p1 = detector_one_probability(u_signal, bs, run.apparatus)
    det = np.where(vi < p1, DET_D1, DET_D2).astype(np.int8)
    return EventLog(
        apparatus=run.apparatus,
        pair_id=pair_id,
        t_signal_ps=t_signal_ps,
        u_signal=u_signal,
        bs_code=bs.astype(np.int8),
        det_code=det,
        t_idler_ps=t_signal_ps + _delay_ps(run.apparatus),
    )


def run_signal_phase(run: RunConfig, path) -> EventLog:
    """Phase 1 of a deferred-choice run: generate and persist signals only.

    The partial log carries every D0 detection (its ungated histogram is
    already final) plus a checkpoint footer holding the untouched idler
    stream state, so phase 2 can resolve idlers later with either choice.
    """
    from . import eventlog

    if not run.policy.deferred:
        raise PolicyDeferredError("run_signal_phase requires the DEFERRED policy")
    pair_id, t_signal_ps, u_signal = _signal_columns(run, None, None)
    n = run.n_pairs
    log = EventLog(
        apparatus=run.apparatus,
        pair_id=pair_id,
        t_signal_ps=t_signal_ps,
        u_signal=u_signal,
        bs_code=np.full(n, BS_UNDECIDED, dtype=np.int8),
        det_code=np.full(n, DET_PENDING, dtype=np.int8),
        t_idler_ps=np.full(n, T_PENDING, dtype=np.int64),
    )
    checkpoint = eventlog.make_checkpoint(run, stream(run.seed, IDLER_STREAM))
    eventlog.write_event_log(log, path, checkpoint=checkpoint)
    return log


def run_idler_phase(path, choice: bool, out_path=None) -> EventLog:
    """Phase 2: resolve a persisted phase-1 log with the supplied choice.

    Signal columns are taken verbatim from the checkpoint file, so they are
    byte-identical to phase 1 no matter which choice is made here.
    """
    from . import eventlog

    log, checkpoint = eventlog.read_event_log(path, require_checkpoint=True)
    run = eventlog.run_from_checkpoint(checkpoint)
    gen = eventlog.restore_stream(checkpoint)
    n = len(log)
    vi = gen.random(n)
    p1 = detector_one_probability(log.u_signal, bool(choice), run.apparatus)
    det = np.where(vi < p1, DET_D1, DET_D2).astype(np.int8)
    resolved = EventLog(
        apparatus=run.apparatus,
        pair_id=log.pair_id,
        t_signal_ps=log.t_signal_ps,
        u_signal=log.u_signal,
        bs_code=np.full(n, BS_IN if choice else BS_OUT, dtype=np.int8),
        det_code=det,
        t_idler_ps=log.t_signal_ps + _delay_ps(run.apparatus),
    )
    if out_path is not None:
        eventlog.write_event_log(resolved, out_path)
    return resolved
