"""Command-line interface.

Subcommands: simulate, train, eval, sync-bench, study.  Exit codes: 0 on
success, 2 on configuration/usage errors, 3 on numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_experiment
from .frameio import FrameFormatError, load_frames, save_frames, load_model, save_model
from .studies import (
    STUDY_NAMES,
    UnknownStudyError,
    evaluate_record,
    run_study,
    simulate,
    write_rows_csv,
)
from .sync import SYNC_PROFILES, ClockState, TonePair, coherence_report, sample_clocks
from .training import TrainConfig, TrainingDivergenceError, train
from .vitals import NoRateError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vitalradar",
        description="Distributed UWB MIMO radar vital-sign sensing simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize a frame record + GT sidecar")
    p_sim.add_argument("--config", required=True, help="experiment JSON file")
    p_sim.add_argument("--out", required=True, help="output frame file (.mdsf)")
    p_sim.add_argument("--seed", type=int, default=None)

    p_train = sub.add_parser("train", help="train a separator on a frame record")
    p_train.add_argument("--frames", required=True)
    p_train.add_argument("--out", required=True, help="model checkpoint (.mdsm)")
    p_train.add_argument("--iters", type=int, default=200)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--batch", type=int, default=64)
    p_train.add_argument("--lr", type=float, default=0.1)

    p_eval = sub.add_parser("eval", help="evaluate a model against ground truth")
    p_eval.add_argument("--frames", required=True)
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--gt", required=True, help="ground-truth sidecar JSON")
    p_eval.add_argument("--out", required=True, help="results CSV")
    p_eval.add_argument("--run-id", default="run0")

    p_sync = sub.add_parser("sync-bench", help="clock-sync coherence statistics")
    p_sync.add_argument("--profile", choices=("los", "nlos"), default="los")
    p_sync.add_argument("--boards", type=int, default=100)
    p_sync.add_argument("--seed", type=int, default=0)
    p_sync.add_argument("--out", default=None, help="CSV path (default stdout)")
    p_sync.add_argument(
        "--include-server",
        action="store_true",
        help="report the (ideal) server board alongside the clients",
    )

    p_study = sub.add_parser("study", help="run a named experiment study")
    p_study.add_argument("--name", required=True)
    p_study.add_argument("--seeds", default="1..5", help="e.g. 1..5 or 1,2,3")
    p_study.add_argument("--out", required=True, help="output directory")
    p_study.add_argument("--subjects", type=int, default=None)
    p_study.add_argument("--duration", type=float, default=None)
    return parser


def _cmd_simulate(args) -> int:
    config = load_experiment(args.config)
    record, gt = simulate(config, seed=args.seed)
    save_frames(args.out, record)
    gt_path = str(args.out) + ".gt.json"
    with open(gt_path, "w") as f:
        json.dump(gt, f)
        f.write("\n")
    print(f"wrote {len(record)} frames x {record.n_elements} elements to {args.out}")
    print(f"wrote ground truth to {gt_path}")
    return EXIT_OK


def _cmd_train(args) -> int:
    record = load_frames(args.frames)
    cfg = TrainConfig(
        iterations=args.iters,
        seed=args.seed,
        batch_pairs=args.batch,
        learning_rate=args.lr,
    )
    model, trace = train(record, None, cfg)
    save_model(args.out, model)
    print(f"trained {cfg.iterations} iterations: loss {trace[0]:.4f} -> {trace[-1]:.4f}")
    print(f"wrote checkpoint to {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    record = load_frames(args.frames)
    model = load_model(args.model)
    with open(args.gt) as f:
        gt = json.load(f)
    results, comps = evaluate_record(model, record, gt)
    from .vitals import classify_component

    rows = []
    for r in results:
        est = classify_component(comps.series[r["component"]], comps.fs)
        rows.append(
            {
                "run_id": args.run_id,
                "subject_id": r["subject"],
                "kind": est.kind,
                "rate_bpm": r["rate_bpm"],
                "gt_bpm": r["gt_bpm"],
                "abs_err": r["abs_err_bpm"],
                "rel_err": r["rel_err"],
                "cosine": r["cosine"],
            }
        )
    write_rows_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_sync_bench(args) -> int:
    profile = SYNC_PROFILES[args.profile]
    clocks = sample_clocks(args.boards, profile, seed=args.seed)
    stats = coherence_report(clocks, TonePair(), profile=profile, seed=args.seed)
    rows = [
        {
            "board_id": c.board_id,
            "residual_cfo_hz": cfo,
            "phase_offset_rad": ph,
        }
        for c, cfo, ph in zip(clocks, stats.residual_cfo_hz, stats.phase_offset_rad)
    ]
    if args.include_server:
        # The clock server is its own reference; it does not take part in
        # sensing and reports zero offsets.
        rows.append({"board_id": -1, "residual_cfo_hz": 0.0, "phase_offset_rad": 0.0})
    if args.out:
        write_rows_csv(args.out, rows)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print("board_id,residual_cfo_hz,phase_offset_rad")
        for row in rows:
            print(f"{row['board_id']},{row['residual_cfo_hz']:.10g},{row['phase_offset_rad']:.10g}")
    print(
        f"median residual CFO {stats.median_residual_cfo_hz:.4f} Hz, "
        f"median |phase| {stats.median_abs_phase_offset_rad:.4f} rad"
    )
    return EXIT_OK


def _cmd_study(args) -> int:
    params = {}
    if args.subjects is not None:
        params["subjects"] = args.subjects
    if args.duration is not None:
        params["duration_s"] = args.duration
    rows, summary = run_study(args.name, _parse_seeds(args.seeds), out_dir=args.out, **params)
    print(f"study {args.name}: {len(rows)} rows -> {args.out}")
    for key, stats in summary.items():
        metrics = {k: v for k, v in stats.items() if k.startswith("median_")}
        print(f"  {key}: {metrics}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sync-bench": _cmd_sync_bench,
    "study": _cmd_study,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, UnknownStudyError, FrameFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDivergenceError, NoRateError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
