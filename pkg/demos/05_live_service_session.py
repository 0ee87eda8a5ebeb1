"""A scripted session against the live event service.

Starts the TCP service in-process, subscribes, toggles the beam splitter
mid-run like the delayed chooser in the thought experiment, and checks that
the ungated histogram trajectory is exactly what an untouched run would have
produced.  The same protocol drives the browser console in frontend/.
"""
import json
import socket

import numpy as np

from qeraser import ALWAYS_OUT, ApparatusConfig, RunConfig, run_experiment
from qeraser.service import EraserService

service = EraserService(n_pairs=3000, seed=99, rate=0, lookahead=8, bins=64)
port = service.start()
print(f"service listening on 127.0.0.1:{port}")

sock = socket.create_connection(("127.0.0.1", port))
lines = sock.makefile("r", encoding="utf-8")
send = lambda **m: sock.sendall((json.dumps(m) + "\n").encode())

hello = json.loads(lines.readline())
print(f"hello: {hello['protocol']} v{hello['version']}, "
      f"{hello['run']['n_pairs']} pairs at seed {hello['run']['seed']}")

send(cmd="subscribe")
send(cmd="start")

events, toggles = [], [1000, 2000]
while True:
    msg = json.loads(lines.readline())
    if msg["type"] == "event":
        events.append(msg)
        if toggles and len(events) == toggles[0]:
            send(cmd="set_bs", value=len(toggles) % 2 == 0)
            toggles.pop(0)
    elif msg["type"] == "ack" and msg.get("cmd") == "set_bs":
        print(f"  toggle acknowledged: bs_in={msg['value']} "
              f"from event {msg['applied_from_event']}")
    elif msg["type"] == "status" and msg.get("finished"):
        break

send(cmd="snapshot")
while True:
    msg = json.loads(lines.readline())
    if msg["type"] == "snapshot":
        snap = msg
        break

print(f"run finished: {snap['events']} events, "
      f"choice log: {[(c['applied_from_event'], c['value']) for c in snap['choice_log']]}")

reference = run_experiment(RunConfig(apparatus=ApparatusConfig(), n_pairs=3000,
                                     seed=99, policy=ALWAYS_OUT))
ref_counts, _ = np.histogram(reference.u_signal, bins=np.array(hello["bin_edges"]))
same = np.array_equal(np.array(snap["counts"]["ungated"]), ref_counts)
print(f"ungated histogram identical to an untouched same-seed run: {same}")

sock.close()
service.stop()
