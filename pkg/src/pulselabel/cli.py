"""Operator command line: serve, simulate, replay, train/eval, reports.

Every run prints a reproducibility header (resolved config + seed). Reports
are CSV files under --out-dir; --plot additionally renders PNGs when
matplotlib is available. Exit codes: 0 ok, 1 runtime error, 2 usage.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analytics
from .activity import (
    ForestModel,
    evaluate_leave_k_out,
    extract_motion_features,
    load_labeled_csv,
    save_labeled_csv,
    train_forest,
    MotionWindow,
)
from .config import Config, load_config
from .errors import PulseLabelError
from .gateway import Gateway
from .server import serve_forever
from .simulator import (
    DETECTOR_CLASS_OF,
    SIM_ACTIVITIES,
    SimParams,
    SubjectProfile,
    generate_window,
    write_dataset,
)

REPORTS = ("coverage", "temporal", "quality", "response")

REPORT_FILES = {
    "coverage": "fig3_coverage.csv",
    "temporal_activity": "fig4_temporal_activity.csv",
    "temporal_stress": "fig5_temporal_stress.csv",
    "quality": "fig6_sqi_activity.csv",
    "response_cdf": "fig7_response_cdf.csv",
    "response_rate": "fig8_response_rate.csv",
}


def _print_header(cfg: Config, args) -> None:
    print(f"pulselabel {args.command}")
    print(f"config: {json.dumps(cfg.to_dict(), sort_keys=True)}")
    print(f"seed: {cfg.seed}")


def _load_cfg(args) -> Config:
    return load_config(args.config, seed=args.seed)


def _gateway(args, cfg: Config) -> Gateway:
    model_path = getattr(args, "activity_model", None)
    model = ForestModel.load(model_path) if model_path else None
    data_dir = Path(args.data_dir)
    if (data_dir / "samples.jsonl").exists():
        return Gateway.recover(data_dir, config=cfg, activity_model=model)
    return Gateway(data_dir, config=cfg, activity_model=model)


def cmd_serve(args) -> int:
    cfg = _load_cfg(args)
    _print_header(cfg, args)
    gateway = _gateway(args, cfg)
    print(f"listening on http://{args.host}:{args.port} "
          f"(data dir: {args.data_dir})")
    serve_forever(gateway, host=args.host, port=args.port)
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    _print_header(cfg, args)
    params = SimParams(fs=cfg.fs, window_s=cfg.window_s, period_s=cfg.period_s)
    profiles = [SubjectProfile(subject_id=f"S{i + 1:02d}", seed=cfg.seed + 101 * i)
                for i in range(args.subjects)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    info = write_dataset(profiles, days=args.days, path=out, params=params)
    print(f"wrote {info['samples']} samples for {info['subjects']} subjects "
          f"to {out}")
    return 0


def cmd_replay(args) -> int:
    cfg = _load_cfg(args)
    _print_header(cfg, args)
    gateway = _gateway(args, cfg)
    report = gateway.replay(args.input, speed=args.speed, sort=args.sort)
    gateway.close()
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _sim_corpus(cfg: Config, subjects: int, windows: int):
    X, y, subj = [], [], []
    params = SimParams(fs=cfg.fs, window_s=cfg.window_s, period_s=cfg.period_s)
    for s in range(subjects):
        for activity in SIM_ACTIVITIES:
            profile = SubjectProfile(subject_id=f"T{s:02d}",
                                     seed=cfg.seed + 37 * s,
                                     schedule=((0.0, activity),))
            for w in range(windows):
                payload = generate_window(profile, w, params)
                motion = MotionWindow(payload["acc"], payload["gyro"],
                                      payload["grav"], fs=cfg.fs)
                rows = extract_motion_features(motion)
                X.append(rows)
                y += [DETECTOR_CLASS_OF[activity]] * len(rows)
                subj += [f"T{s:02d}"] * len(rows)
    return np.vstack(X), y, subj


def cmd_train_activity(args) -> int:
    cfg = _load_cfg(args)
    _print_header(cfg, args)
    if args.corpus:
        X, y, subjects = load_labeled_csv(args.corpus)
        print(f"loaded {len(y)} rows from {args.corpus}")
    else:
        X, y, subjects = _sim_corpus(cfg, args.subjects, args.windows)
        print(f"simulated corpus: {len(y)} rows from {args.subjects} subjects")
        if args.save_corpus:
            save_labeled_csv(args.save_corpus, X, y, subjects)
            print(f"corpus written to {args.save_corpus}")
    model = train_forest(X, y, n_trees=args.trees, seed=cfg.seed)
    model.save(args.out)
    print(f"model ({model.n_trees} trees, classes {model.classes}) "
          f"written to {args.out}")
    print(f"model digest: {model.digest()}")
    return 0


def cmd_eval_activity(args) -> int:
    cfg = _load_cfg(args)
    _print_header(cfg, args)
    if args.corpus:
        X, y, subjects = load_labeled_csv(args.corpus)
    else:
        X, y, subjects = _sim_corpus(cfg, args.subjects, args.windows)
    result = evaluate_leave_k_out(X, y, subjects, k=args.k, seed=cfg.seed,
                                  n_trees=args.trees)
    for fold in result["folds"]:
        print(f"held out {fold['held_out']}: accuracy {fold['accuracy']:.4f}")
    print(f"mean accuracy: {result['mean_accuracy']:.4f}")
    return 0


def _maybe_plot(args, draw):
    if not args.plot:
        return
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping plots", file=sys.stderr)
        return
    draw(plt)


def cmd_report(args) -> int:
    cfg = _load_cfg(args)
    _print_header(cfg, args)
    gateway = _gateway(args, cfg)
    if not gateway.samples:
        print("no samples in the data directory", file=sys.stderr)
        return 1
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.report == "coverage":
        subject = args.subject or gateway.subjects()[0]
        data = gateway.subject_data(subject)
        curve = analytics.coverage_curve(data, D=cfg.coverage_d)
        path = out_dir / REPORT_FILES["coverage"]
        analytics.write_coverage_csv(path, subject, curve)
        print(f"{path}: {len(curve)} points, final F = {curve[-1][1]:.4f}")
        _maybe_plot(args, lambda plt: _plot_coverage(plt, curve, out_dir))
    elif args.report == "temporal":
        subject = args.subject or gateway.subjects()[0]
        data = gateway.subject_data(subject)
        by_activity = analytics.temporal_profile(data, group_by="activity")
        by_stress = analytics.temporal_profile(data, group_by="stress")
        overall = analytics.temporal_profile(data, group_by="none")
        path_a = out_dir / REPORT_FILES["temporal_activity"]
        analytics.write_temporal_csv(path_a, overall + by_activity)
        path_s = out_dir / REPORT_FILES["temporal_stress"]
        analytics.write_temporal_csv(path_s, by_stress)
        print(f"{path_a}: {len(by_activity) + len(overall)} profiles")
        print(f"{path_s}: {len(by_stress)} profiles")
        _maybe_plot(args, lambda plt: _plot_temporal(plt, overall + by_activity, out_dir))
    elif args.report == "quality":
        subjects = [gateway.subject_data(s) for s in gateway.subjects()]
        rows = analytics.quality_by_activity(subjects)
        path = out_dir / REPORT_FILES["quality"]
        analytics.write_quality_csv(path, rows)
        print(f"{path}: {len(rows)} rows")
    else:
        subjects = [gateway.subject_data(s) for s in gateway.subjects()]
        stats = analytics.response_stats(subjects)
        path_c = out_dir / REPORT_FILES["response_cdf"]
        analytics.write_response_cdf_csv(path_c, stats)
        path_r = out_dir / REPORT_FILES["response_rate"]
        analytics.write_response_rate_csv(path_r, stats)
        print(f"{path_c}: {len(stats.cdfs)} contexts")
        print(f"{path_r}: {len(stats.rate_by_hour)} hours")
    gateway.close()
    return 0


def _plot_coverage(plt, curve, out_dir):
    fig, ax = plt.subplots()
    ax.plot([i for i, _ in curve], [f for _, f in curve])
    ax.set_xlabel("labels collected")
    ax.set_ylabel("fraction farther than D")
    fig.savefig(out_dir / "fig3_coverage.png", dpi=120)


def _plot_temporal(plt, profiles, out_dir):
    fig, ax = plt.subplots()
    for p in profiles:
        ax.plot(p.gap_min, p.mean_distance, label=f"{p.group_kind}:{p.group_key}")
    ax.set_xlabel("time gap (min)")
    ax.set_ylabel("mean feature distance")
    ax.legend(fontsize=6)
    fig.savefig(out_dir / "fig4_temporal.png", dpi=120)


def cmd_checkpoint(args) -> int:
    cfg = _load_cfg(args)
    _print_header(cfg, args)
    gateway = _gateway(args, cfg)
    if args.subject:
        if args.subject not in gateway.engines:
            print(f"unknown subject {args.subject!r}", file=sys.stderr)
            return 1
        engines = [gateway.engines[args.subject]]
    else:
        engines = list(gateway.engines.values())
    for engine in engines:
        gateway.store.write_engine_checkpoint(engine)
        path = gateway.store.engine_checkpoint_path(engine.subject_id)
        print(f"{engine.subject_id}: phase={engine.phase} "
              f"samples={len(engine.sample_ids)} labels={len(engine.labeled)} "
              f"-> {path}")
    gateway.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulselabel",
        description="Streaming PPG ingestion with adaptive EMA labeling")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out-dir", default="./reports",
                        help="directory for report outputs")
    # the same globals are accepted after the subcommand; SUPPRESS keeps a
    # value given before the subcommand from being overwritten by the default
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP gateway")
    p.add_argument("--data-dir", default="./data")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--activity-model")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("simulate", parents=[common], help="emit a replay-compatible dataset")
    p.add_argument("--subjects", type=int, default=4)
    p.add_argument("--days", type=float, default=3.0)
    p.add_argument("--out", default="sim.jsonl")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("replay", parents=[common], help="feed a dataset through ingestion")
    p.add_argument("--input", required=True)
    p.add_argument("--data-dir", default="./data")
    p.add_argument("--speed", type=float,
                   help="real-time factor; omit to run at full speed")
    p.add_argument("--sort", action="store_true",
                   help="sort out-of-order timestamps instead of rejecting")
    p.add_argument("--activity-model")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("train-activity", parents=[common], help="train the activity forest")
    p.add_argument("--corpus", help="labeled CSV; default: simulator corpus")
    p.add_argument("--subjects", type=int, default=6)
    p.add_argument("--windows", type=int, default=8)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--out", default="activity-model.json")
    p.add_argument("--save-corpus")
    p.set_defaults(fn=cmd_train_activity)

    p = sub.add_parser("eval-activity", parents=[common], help="leave-k-subjects-out evaluation")
    p.add_argument("--corpus")
    p.add_argument("--subjects", type=int, default=6)
    p.add_argument("--windows", type=int, default=8)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--k", type=int, default=2)
    p.set_defaults(fn=cmd_eval_activity)

    p = sub.add_parser("report", parents=[common], help="emit analytics CSVs")
    p.add_argument("report", choices=REPORTS)
    p.add_argument("--data-dir", default="./data")
    p.add_argument("--subject")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--activity-model")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("checkpoint", parents=[common], help="write engine checkpoints now")
    p.add_argument("--data-dir", default="./data")
    p.add_argument("--subject")
    p.set_defaults(fn=cmd_checkpoint)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PulseLabelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
