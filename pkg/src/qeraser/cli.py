"""Command-line entry points.

Exit codes: 0 all verdicts pass, 1 verdict failure, 2 usage error.

    qeraser run --preset fig3 --pairs 1000000 --seed 7 --out-dir out/
    qeraser nosignal --pairs 1000000 --seed 7
    qeraser redsox-phase1 --pairs 1000000 --seed 7 --out-dir out/
    qeraser redsox-phase2 --choice yes --out-dir out/
    qeraser serve --port 7878 --rate 100 --pairs 100000 --seed 7

The output root defaults to $QERASER_OUT_DIR, then ./qeraser-out.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .apparatus import ApparatusConfig
from .presets import (
    ExperimentPreset,
    PresetOptions,
    default_out_dir,
    run_preset,
    run_redsox_phase1,
    run_redsox_phase2,
)
from .service import EraserService


def _add_geometry_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda-nm", type=float, default=702.0, help="source wavelength (nm)")
    p.add_argument("--slit-sep-um", type=float, default=300.0, help="slit separation d (um)")
    p.add_argument("--slit-width-um", type=float, default=60.0, help="slit width a (um)")
    p.add_argument("--distance-m", type=float, default=2.0, help="slits-to-screen distance L (m)")
    p.add_argument("--envelope-offset", type=float, default=0.0,
                   help="per-slit envelope center shift (fringe units)")
    p.add_argument("--range", type=float, default=5.0, dest="u_range",
                   help="detector half-range U (fringe units)")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pairs", type=int, default=1_000_000, help="number of biphoton pairs")
    p.add_argument("--seed", type=int, default=7, help="64-bit run seed")
    p.add_argument("--bins", type=int, default=128, help="histogram bins over [-U, U]")
    p.add_argument("--out-dir", type=Path, default=None,
                   help="artifact directory (default $QERASER_OUT_DIR or ./qeraser-out)")
    _add_geometry_flags(p)


def _apparatus(args: argparse.Namespace, parser: argparse.ArgumentParser) -> ApparatusConfig:
    try:
        return ApparatusConfig(
            wavelength_nm=args.lambda_nm,
            slit_separation_um=args.slit_sep_um,
            slit_width_um=args.slit_width_um,
            screen_distance_m=args.distance_m,
            envelope_offset=args.envelope_offset,
            detector_range=args.u_range,
        )
    except ValueError as exc:
        parser.error(str(exc))


def _options(args: argparse.Namespace, parser: argparse.ArgumentParser,
             subdir: str) -> PresetOptions:
    if args.pairs < 1:
        parser.error("--pairs must be >= 1")
    out = args.out_dir if args.out_dir is not None else default_out_dir() / subdir
    try:
        return PresetOptions(n_pairs=args.pairs, seed=args.seed, bins=args.bins,
                             apparatus=_apparatus(args, parser), out_dir=Path(out))
    except ValueError as exc:
        parser.error(str(exc))


def _finish(report: dict) -> int:
    summary = {v["name"]: ("PASS" if v["passed"] else "FAIL") for v in report["verdicts"]}
    for name, state in summary.items():
        print(f"  [{state}] {name}")
    if report["passed"]:
        print("all verdicts passed")
        return 0
    print("verdict failure; see report artifacts above", file=sys.stderr)
    return 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="qeraser",
                                     description="delayed-choice quantum eraser simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one canned configuration end to end")
    p_run.add_argument("--preset", required=True,
                       choices=[p.value for p in ExperimentPreset if p.value != "redsox"])
    _add_run_flags(p_run)

    p_nosig = sub.add_parser("nosignal", help="paired-choice runs proving the D0 record is blind")
    _add_run_flags(p_nosig)

    p_ph1 = sub.add_parser("redsox-phase1", help="generate and persist signals; defer the choice")
    _add_run_flags(p_ph1)

    p_ph2 = sub.add_parser("redsox-phase2", help="resolve a deferred run with a choice")
    p_ph2.add_argument("--choice", required=True, choices=["yes", "no"],
                       help="insert the beam splitter?")
    p_ph2.add_argument("--checkpoint", type=Path, default=None,
                       help="phase-1 checkpoint (default <out-dir>/phase1_checkpoint.log)")
    p_ph2.add_argument("--bins", type=int, default=128)
    p_ph2.add_argument("--out-dir", type=Path, default=None)

    p_serve = sub.add_parser("serve", help="live event stream with a toggleable beam splitter")
    p_serve.add_argument("--port", type=int, default=7878, help="TCP port (0 for ephemeral)")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--rate", type=float, default=100.0,
                         help="resolved events per second (0 = unpaced)")
    p_serve.add_argument("--lookahead", type=int, default=8,
                         help="signals generated ahead of idler resolution")
    p_serve.add_argument("--pairs", type=int, default=100_000)
    p_serve.add_argument("--seed", type=int, default=7)
    p_serve.add_argument("--bins", type=int, default=128)
    p_serve.add_argument("--bs-in", action="store_true",
                         help="start with the beam splitter inserted")
    _add_geometry_flags(p_serve)

    args = parser.parse_args(argv)

    if args.command == "run":
        preset = ExperimentPreset(args.preset)
        opts = _options(args, parser, preset.value)
        report = run_preset(preset, opts)
        print(f"artifacts in {opts.out_dir}")
        return _finish(report)

    if args.command == "nosignal":
        opts = _options(args, parser, "nosignal")
        report = run_preset(ExperimentPreset.NOSIGNAL, opts)
        print(f"artifacts in {opts.out_dir}")
        print(report["conclusion"])
        return _finish(report)

    if args.command == "redsox-phase1":
        opts = _options(args, parser, "redsox")
        report = run_redsox_phase1(opts)
        print(f"checkpoint written: {report['checkpoint']}")
        return _finish(report)

    if args.command == "redsox-phase2":
        out_dir = args.out_dir if args.out_dir is not None else default_out_dir() / "redsox"
        checkpoint = args.checkpoint if args.checkpoint is not None \
            else Path(out_dir) / "phase1_checkpoint.log"
        if not Path(checkpoint).exists():
            print(f"checkpoint not found: {checkpoint}", file=sys.stderr)
            return 1
        try:
            report = run_redsox_phase2(checkpoint, choice=(args.choice == "yes"),
                                       bins=args.bins, out_dir=out_dir)
        except (ValueError, OSError) as exc:
            print(f"cannot resolve phase 1 checkpoint: {exc}", file=sys.stderr)
            return 1
        return _finish(report)

    if args.command == "serve":
        service = EraserService(
            apparatus=_apparatus(args, parser), n_pairs=args.pairs, seed=args.seed,
            rate=args.rate, lookahead=args.lookahead, bins=args.bins,
            bs_in=args.bs_in, host=args.host, port=args.port)
        port = service.start()
        print(json.dumps({"serving": {"host": args.host, "port": port,
                                      "protocol": "qeraser/1"}}), flush=True)
        try:
            service.wait()
        except KeyboardInterrupt:
            pass
        finally:
            service.stop()
        return 0

    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
