"""Live delayed-choice service: streaming events over a local TCP socket.

The protocol is line-delimited JSON (UTF-8, one message per ``\\n``).  On
connect the server sends a hello with the protocol version, run parameters,
and bin edges.  Clients may then send commands::

    {"cmd": "subscribe"}          -> join the resolved-event broadcast
    {"cmd": "set_bs", "value": true|false}
    {"cmd": "snapshot"}           -> current histograms and counters
    {"cmd": "overlay"}            -> analytic curves for the panels
    {"cmd": "start"} / {"cmd": "pause"} / {"cmd": "reset", "seed": 123}
    {"cmd": "status"}

Signals are generated ahead of idler resolution into a small buffer (the
8 ns lag stretched to human time), so a SET_BS arriving between generation
and resolution genuinely is a delayed choice: it changes how already-recorded
signals' partners get routed, and provably never what the signal screen
shows.  One engine thread owns the simulation and serializes every command
relative to event resolution; the order is recorded in the choice log.
"""
from __future__ import annotations

import dataclasses
import json
import queue
import socket
import threading
import time
from collections import deque

import numpy as np

from .apparatus import ApparatusConfig, IdlerDetector
from .amplitudes import conditional_density, normalized_marginal, detector_probability
from .engine import IDLER_STREAM, SIGNAL_STREAM, TIME_STREAM, stream
from .sampling import detector_one_probability, marginal_sampler

PROTOCOL = "qeraser/1"
PROTOCOL_VERSION = 1


class _Client:
    _ids = 0

    def __init__(self, sock: socket.socket):
        _Client._ids += 1
        self.id = _Client._ids
        self.sock = sock
        self.outbox: queue.Queue = queue.Queue(maxsize=100_000)
        self.subscribed = False
        self.alive = True

    def send(self, msg: dict) -> None:
        if not self.alive:
            return
        try:
            self.outbox.put_nowait(msg)
        except queue.Full:
            self.alive = False


class EraserService:
    """One simulation, many observers, one totally ordered command queue."""

    def __init__(self, apparatus: ApparatusConfig | None = None, n_pairs: int = 100_000,
                 seed: int = 7, rate: float = 100.0, lookahead: int = 8, bins: int = 128,
                 interarrival_mean_ns: float = 1000.0, bs_in: bool = False,
                 host: str = "127.0.0.1", port: int = 0):
        self.apparatus = apparatus or ApparatusConfig()
        self.n_pairs = int(n_pairs)
        self.rate = float(rate)
        self.lookahead = max(1, int(lookahead))
        self.bins = int(bins)
        self.interarrival_mean_ns = float(interarrival_mean_ns)
        self.host = host
        self._requested_port = port
        self.port: int | None = None

        self._sampler = marginal_sampler(self.apparatus)
        self._edges = np.linspace(-self.apparatus.detector_range,
                                  self.apparatus.detector_range, self.bins + 1)
        self._delay_ps = int(round(self.apparatus.idler_delay_ns * 1000))
        self._initial_bs = bool(bs_in)
        self._init_sim(int(seed))

        self._queue: queue.Queue = queue.Queue()
        self._clients: dict[int, _Client] = {}
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []

    # -- simulation state (engine thread only, after start) ----------------

    def _init_sim(self, seed: int) -> None:
        self.seed = seed
        self._rng_time = stream(seed, TIME_STREAM)
        self._rng_signal = stream(seed, SIGNAL_STREAM)
        self._rng_idler = stream(seed, IDLER_STREAM)
        self._t_ps = 0
        self._n_generated = 0
        self._n_resolved = 0
        self._pending: deque[tuple[int, int, float]] = deque()
        self._bs_in = self._initial_bs
        self._choice_log: list[dict] = []
        self._counts = {k: np.zeros(self.bins, dtype=np.int64) for k in ("ungated", "d1", "d2")}
        self._running = False

    @property
    def finished(self) -> bool:
        return self._n_resolved >= self.n_pairs

    def _generate_ahead(self) -> None:
        while (len(self._pending) < self.lookahead
               and self._n_generated < self.n_pairs):
            dt_ns = -self.interarrival_mean_ns * np.log1p(-self._rng_time.random())
            self._t_ps += int(np.rint(dt_ns * 1000.0))
            u = float(self._sampler.inverse(self._rng_signal.random()))
            self._pending.append((self._n_generated, self._t_ps, u))
            self._n_generated += 1

    def _resolve_one(self) -> dict | None:
        self._generate_ahead()
        if not self._pending:
            return None
        pair_id, t_ps, u = self._pending.popleft()
        p1 = detector_one_probability(u, self._bs_in, self.apparatus)
        det = "D1" if self._rng_idler.random() < p1 else "D2"
        self._n_resolved += 1
        b = min(np.searchsorted(self._edges, u, side="right") - 1, self.bins - 1)
        if 0 <= b < self.bins:
            self._counts["ungated"][b] += 1
            self._counts["d1" if det == "D1" else "d2"][b] += 1
        return {
            "type": "event", "pair_id": pair_id, "t_signal_ns": t_ps / 1000.0,
            "u": u, "bs_in": self._bs_in, "detector": det,
            "t_idler_ns": (t_ps + self._delay_ps) / 1000.0,
        }

    # -- messages -----------------------------------------------------------

    def _hello(self) -> dict:
        return {
            "type": "hello", "protocol": PROTOCOL, "version": PROTOCOL_VERSION,
            "run": {
                "seed": self.seed, "n_pairs": self.n_pairs, "rate": self.rate,
                "lookahead": self.lookahead, "bins": self.bins,
                "bs_in": self._bs_in,
                "interarrival_mean_ns": self.interarrival_mean_ns,
                "apparatus": dataclasses.asdict(self.apparatus),
            },
            "bin_edges": [float(x) for x in self._edges],
        }

    def _snapshot(self) -> dict:
        return {
            "type": "snapshot",
            "events": self._n_resolved,
            "generated": self._n_generated,
            "bs_in": self._bs_in,
            "running": self._running,
            "finished": self.finished,
            "counts": {k: v.tolist() for k, v in self._counts.items()},
            "choice_log": list(self._choice_log),
        }

    def _overlay(self) -> dict:
        from .analysis import GatedHistogram, _bin_averaged_columns

        centers = 0.5 * (self._edges[:-1] + self._edges[1:])
        basis = _bin_averaged_columns(GatedHistogram(
            bin_edges=self._edges, counts=np.zeros(self.bins, dtype=np.int64),
            gate=None, total_events=0, apparatus=self.apparatus))
        out = {"type": "overlay", "centers": centers.tolist(),
               "marginal": normalized_marginal(centers, self.apparatus).tolist(),
               "fit_basis": {"env": basis[:, 0].tolist(),
                             "env_sin": basis[:, 1].tolist(),
                             "env_cos": basis[:, 2].tolist()},
               "conditionals": {}, "detector_probability": {}}
        for flag, tag in ((True, "bs_in"), (False, "bs_out")):
            cfg = dataclasses.replace(self.apparatus, beam_splitter_in=flag)
            out["conditionals"][tag] = {
                "d1": conditional_density(centers, IdlerDetector.D1, cfg).tolist(),
                "d2": conditional_density(centers, IdlerDetector.D2, cfg).tolist(),
            }
            out["detector_probability"][tag] = {
                "d1": detector_probability(IdlerDetector.D1, cfg),
                "d2": detector_probability(IdlerDetector.D2, cfg),
            }
        return out

    def _status(self) -> dict:
        return {"type": "status", "running": self._running, "finished": self.finished,
                "events": self._n_resolved, "bs_in": self._bs_in, "seed": self.seed}

    # -- engine thread --------------------------------------------------------

    def _handle_command(self, client: _Client, msg: dict) -> None:
        cmd = msg.get("cmd")
        if cmd == "subscribe":
            client.subscribed = True
            client.send({"type": "ack", "cmd": "subscribe"})
        elif cmd == "set_bs":
            value = msg.get("value")
            if not isinstance(value, bool):
                client.send({"type": "error", "message": "set_bs needs boolean 'value'"})
                return
            changed = value != self._bs_in
            self._bs_in = value
            entry = {"applied_from_event": self._n_resolved, "value": value,
                     "changed": changed}
            self._choice_log.append(entry)
            client.send({"type": "ack", "cmd": "set_bs", "value": value,
                         "applied_from_event": self._n_resolved, "changed": changed})
        elif cmd == "snapshot":
            client.send(self._snapshot())
        elif cmd == "overlay":
            client.send(self._overlay())
        elif cmd == "start":
            if not self.finished:
                self._running = True
            client.send({"type": "ack", "cmd": "start"})
            self._broadcast(self._status())
        elif cmd == "pause":
            self._running = False
            client.send({"type": "ack", "cmd": "pause"})
            self._broadcast(self._status())
        elif cmd == "reset":
            seed = msg.get("seed", self.seed)
            if not isinstance(seed, int):
                client.send({"type": "error", "message": "reset 'seed' must be an integer"})
                return
            self._init_sim(seed)
            client.send({"type": "ack", "cmd": "reset", "seed": seed})
            self._broadcast(self._status())
        elif cmd == "status":
            client.send(self._status())
        else:
            client.send({"type": "error", "message": f"unknown command {cmd!r}"})

    def _broadcast(self, msg: dict) -> None:
        with self._clients_lock:
            targets = [c for c in self._clients.values() if c.subscribed and c.alive]
        for c in targets:
            c.send(msg)

    def _engine_loop(self) -> None:
        period = 1.0 / self.rate if self.rate > 0 else 0.0
        next_due = time.monotonic()
        while not self._stop.is_set():
            timeout = 0.05
            if self._running:
                timeout = max(0.0, next_due - time.monotonic()) if period else 0.0
            try:
                client, msg = self._queue.get(timeout=timeout)
            except queue.Empty:
                pass
            else:
                self._handle_command(client, msg)
                continue  # drain queued commands before emitting further events
            if self._running and not self.finished:
                now = time.monotonic()
                if period == 0.0:
                    for _ in range(256):
                        if self.finished or not self._running:
                            break
                        ev = self._resolve_one()
                        if ev:
                            self._broadcast(ev)
                elif now >= next_due:
                    ev = self._resolve_one()
                    if ev:
                        self._broadcast(ev)
                    next_due = max(next_due + period, now - 5 * period)
                if self.finished:
                    self._running = False
                    self._broadcast(self._status())

    # -- socket plumbing ------------------------------------------------------

    def _client_reader(self, client: _Client) -> None:
        try:
            fh = client.sock.makefile("r", encoding="utf-8", newline="\n")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                    if not isinstance(msg, dict):
                        raise ValueError("not an object")
                except ValueError:
                    client.send({"type": "error", "message": "malformed command line"})
                    continue
                self._queue.put((client, msg))
        except OSError:
            pass
        finally:
            client.alive = False
            with self._clients_lock:
                self._clients.pop(client.id, None)

    def _client_writer(self, client: _Client) -> None:
        try:
            while client.alive and not self._stop.is_set():
                try:
                    msg = client.outbox.get(timeout=0.1)
                except queue.Empty:
                    continue
                client.sock.sendall((json.dumps(msg) + "\n").encode())
        except OSError:
            client.alive = False
        finally:
            try:
                client.sock.close()
            except OSError:
                pass

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stop.is_set():
            try:
                sock, _ = self._listener.accept()
            except OSError:
                break
            client = _Client(sock)
            with self._clients_lock:
                self._clients[client.id] = client
            client.send(self._hello())
            for target, name in ((self._client_reader, "reader"), (self._client_writer, "writer")):
                t = threading.Thread(target=target, args=(client,),
                                     name=f"qeraser-{name}-{client.id}", daemon=True)
                t.start()
                self._threads.append(t)

    def start(self) -> int:
        """Bind, spin up the engine and acceptor, return the bound port."""
        self._listener = socket.create_server((self.host, self._requested_port))
        self.port = self._listener.getsockname()[1]
        for target, name in ((self._engine_loop, "engine"), (self._accept_loop, "accept")):
            t = threading.Thread(target=target, name=f"qeraser-{name}", daemon=True)
            t.start()
            self._threads.append(t)
        return self.port

    def stop(self) -> None:
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        for t in self._threads:
            t.join(timeout=2.0)

    def wait(self) -> None:
        """Block until stopped (for CLI use)."""
        self._stop.wait()
