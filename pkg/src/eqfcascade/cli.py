"""Command-line front end.

Subcommands:
    run      one simulation, print its metrics, optionally write CSVs
    batch    Monte Carlo batch with a per-run + aggregate summary CSV
    compare  low-rate unbiased vs biased input vs 100 Hz variants on the
             same seeds, emitting a combined comparison table

Flags override values loaded from --config.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

from .config import ScenarioConfig, apply_overrides, read_config, write_config
from .harness import run_batch, run_single
from .metrics import BatchSummary, RunMetrics, metric_names, write_batch_csv, write_run_csv, write_series_csv


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario configuration file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--duration", type=float, dest="duration_s", help="run length, s")
    p.add_argument("--gyro-rate", type=float, dest="gyro_rate_hz", help="Hz")
    p.add_argument("--star-rate", type=float, dest="star_rate_hz", help="Hz")
    p.add_argument("--feature-rate", type=float, dest="feature_rate_hz", help="Hz")
    p.add_argument("--iterations", type=int, dest="update_iterations", help="correction sub-steps per measurement")
    p.add_argument("--mode", dest="input_mode", choices=["unbiased_cascade", "biased_passthrough"], help="stage-2 input wiring")
    p.add_argument("--gyro-noise", type=float, dest="gyro_noise_std", help="rad/s")
    p.add_argument("--direction-noise", type=float, dest="direction_noise_std", help="rad")
    p.add_argument("--attitude-init-max", type=float, dest="attitude_init_max_deg", help="bound initial attitudes, deg (default: uniform)")
    p.add_argument("--out-dir", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes for batches")
    p.add_argument("--emit-series", action="store_true", help="write per-tick time-series CSVs")


def _load_config(args) -> ScenarioConfig:
    cfg = read_config(args.config) if args.config else ScenarioConfig()
    names = {f.name for f in dataclasses.fields(ScenarioConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in names}
    return apply_overrides(cfg, **overrides)


def _print_metrics(m: RunMetrics) -> None:
    if m.diverged:
        print(f"run {m.run_index}: DIVERGED (numerical failure or non-finite state)")
        return
    def axes(v):
        return "/".join(f"{x:.4f}" for x in v)
    print(f"run {m.run_index}:")
    print(f"  chaser attitude mean err [10,15]s (deg, r/p/y): {axes(m.mean_chaser_deg)}")
    print(f"  chaser attitude time-to-1deg (s, r/p/y):        {axes(m.t1deg_chaser)}")
    print(f"  gyro bias mean err: {m.bias_mean_dps:.4f} deg/s ({m.bias_mean_rel_pct:.2f} %)")
    print(f"  relative attitude mean err (deg, r/p/y):        {axes(m.mean_rel_deg)}")
    print(f"  relative attitude time-to-1deg (s, r/p/y):      {axes(m.t1deg_rel)}")
    print(f"  target angular velocity mean err: {m.omega_mean_dps:.4f} deg/s ({m.omega_mean_rel_pct:.2f} %)")


def _print_aggregate(tag: str, s: BatchSummary) -> None:
    a = s.aggregate
    print(f"[{tag}] {len(s.runs)} runs, {s.n_failed} diverged")
    if s.n_failed == len(s.runs):
        return
    print(
        "  chaser att mean (deg r/p/y): "
        f"{a['mean_chaser_deg_roll']:.4f}/{a['mean_chaser_deg_pitch']:.4f}/{a['mean_chaser_deg_yaw']:.4f}"
        f"   time-to-1deg: {a['t1deg_chaser_roll']:.3f}/{a['t1deg_chaser_pitch']:.3f}/{a['t1deg_chaser_yaw']:.3f} s"
    )
    print(
        f"  gyro bias mean: {a['bias_mean_dps']:.4f} deg/s ({a['bias_mean_rel_pct']:.2f} %)"
        f"   min: {a['bias_min_dps']:.4f} deg/s"
    )
    print(
        "  rel att mean (deg r/p/y):    "
        f"{a['mean_rel_deg_roll']:.4f}/{a['mean_rel_deg_pitch']:.4f}/{a['mean_rel_deg_yaw']:.4f}"
        f"   time-to-1deg: {a['t1deg_rel_roll']:.3f}/{a['t1deg_rel_pitch']:.3f}/{a['t1deg_rel_yaw']:.3f} s"
    )
    print(
        f"  target ang vel mean: {a['omega_mean_dps']:.4f} deg/s ({a['omega_mean_rel_pct']:.2f} %)"
        f"   min: {a['omega_min_dps']:.4f} deg/s"
    )


def _emit_series(out_dir: Path, summary: BatchSummary) -> None:
    for m in summary.runs:
        if m.series is not None:
            write_series_csv(out_dir / f"run_{m.run_index:04d}_series.csv", m.series)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    m = run_single(cfg, keep_series=args.emit_series)
    _print_metrics(m)
    write_run_csv(out_dir / "run_metrics.csv", m)
    if args.emit_series and m.series is not None:
        write_series_csv(out_dir / f"run_{m.run_index:04d}_series.csv", m.series)
    write_config(cfg, out_dir / "scenario_used.cfg")
    return 0


def cmd_batch(args) -> int:
    cfg = _load_config(args)
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = run_batch(cfg, args.runs, keep_series=args.emit_series, workers=args.workers)
    _print_aggregate("batch", summary)
    write_batch_csv(out_dir / "batch_summary.csv", summary)
    if args.emit_series:
        _emit_series(out_dir, summary)
    write_config(cfg, out_dir / "scenario_used.cfg")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    variants = {
        "unbiased": dataclasses.replace(cfg, input_mode="unbiased_cascade"),
        "biased": dataclasses.replace(cfg, input_mode="biased_passthrough"),
        "fast_rate": dataclasses.replace(
            cfg,
            input_mode="unbiased_cascade",
            star_rate_hz=cfg.gyro_rate_hz,
            feature_rate_hz=cfg.gyro_rate_hz,
            update_iterations=1,
        ),
    }
    summaries = {}
    for tag, vcfg in variants.items():
        summary = run_batch(vcfg, args.runs, workers=args.workers)
        summaries[tag] = summary
        _print_aggregate(tag, summary)
        write_batch_csv(out_dir / f"batch_{tag}.csv", summary)
    _write_compare_csv(out_dir / "compare_table.csv", summaries)
    omega_unbiased = summaries["unbiased"].aggregate["omega_mean_dps"]
    omega_biased = summaries["biased"].aggregate["omega_mean_dps"]
    if math.isfinite(omega_unbiased) and omega_unbiased > 0:
        print(f"bias feedthrough effect: omega err biased/unbiased = {omega_biased / omega_unbiased:.2f}x")
    return 0


def _write_compare_csv(path: Path, summaries: dict[str, BatchSummary]) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "runs", "diverged", *metric_names()])
        for tag, s in summaries.items():
            writer.writerow(
                [tag, len(s.runs), s.n_failed, *[f"{s.aggregate[n]:.9g}" for n in metric_names()]]
            )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eqfcascade",
        description="Two-stage equivariant filter cascade simulation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single simulation run")
    _add_scenario_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="Monte Carlo batch")
    _add_scenario_flags(p_batch)
    p_batch.add_argument("--runs", type=int, default=100, help="number of runs")
    p_batch.set_defaults(func=cmd_batch)

    p_cmp = sub.add_parser("compare", help="unbiased vs biased vs 100 Hz variants")
    _add_scenario_flags(p_cmp)
    p_cmp.add_argument("--runs", type=int, default=100, help="runs per variant")
    p_cmp.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
