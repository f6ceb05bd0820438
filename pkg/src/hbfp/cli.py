"""Command-line front end: ``run``, ``sweep`` and ``report-memory``.

Exit codes: 0 on success, 1 on a runtime failure (or any failed sweep
point), 2 on a configuration or usage error. Log verbosity comes from the
``HBFP_LOG_LEVEL`` environment variable.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from hbfp.config import ConfigError, ExperimentConfig, _convert
from hbfp.memory import format_memory_csv, report_memory
from hbfp.training import CSV_HEADER, run_config
from hbfp.xorshift import derive_seed

log = logging.getLogger("hbfp")

SWEEP_AXES = ("w_narrow", "tile", "w_wide", "seed")
SUMMARY_HEADER = ("config_id", "w_narrow", "w_wide", "tile", "seed", "train_seed", "epochs",
                  "final_train_loss", "final_val_metric")


def load_config(path, overrides) -> ExperimentConfig:
    return ExperimentConfig.from_file(path).with_overrides(overrides or [])


def parse_axes(specs) -> list:
    """``["w_narrow=4,8", "tile=1,untiled"]`` -> ``[("w_narrow", ["4", "8"]), ...]``."""
    axes = []
    seen = set()
    for spec in specs or []:
        if "=" not in spec:
            raise ConfigError(f"bad axis {spec!r}: expected key=v1,v2,...")
        key, values = spec.split("=", 1)
        key = key.strip()
        if key not in SWEEP_AXES:
            raise ConfigError(f"cannot sweep over {key!r}; choose from {', '.join(SWEEP_AXES)}")
        if key in seen:
            raise ConfigError(f"axis {key!r} given twice")
        seen.add(key)
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not vals:
            raise ConfigError(f"axis {key!r} has no values")
        _convert({key: v for v in vals})
        axes.append((key, vals))
    return axes


def sweep_points(base: ExperimentConfig, axes) -> list:
    """Cartesian product of axis values as ``(index, overrides)`` pairs."""
    keys = [k for k, _ in axes]
    return [(i, [f"{k}={v}" for k, v in zip(keys, combo)])
            for i, combo in enumerate(itertools.product(*(vals for _, vals in axes)))]


def point_config(base: ExperimentConfig, index: int, overrides) -> ExperimentConfig:
    cfg = base.with_overrides(overrides)
    return cfg.replace(train_seed=derive_seed(cfg.seed, index))


def _write_metrics(path, metrics):
    with open(path, "w", newline="") as f:
        f.write(",".join(CSV_HEADER) + "\n")
        for row in metrics:
            f.write(row.as_csv() + "\n")


def _run_point(args):
    base, index, overrides, out_dir = args
    try:
        cfg = point_config(base, index, overrides)
        result = run_config(cfg)
    except Exception as exc:  # a failed point must not stop the sweep
        label = " ".join(overrides) or "base"
        return {"ok": False, "point": label, "error": f"{type(exc).__name__}: {exc}"}
    _write_metrics(Path(out_dir) / f"{cfg.config_id}.csv", result.metrics)
    last = result.metrics[-1] if result.metrics else None
    return {
        "ok": True,
        "row": {
            "config_id": cfg.config_id, "w_narrow": cfg.w_narrow, "w_wide": cfg.w_wide,
            "tile": "untiled" if cfg.tile is None else cfg.tile, "seed": cfg.seed,
            "train_seed": cfg.train_seed, "epochs": cfg.epochs,
            "final_train_loss": repr(last.train_loss) if last else "",
            "final_val_metric": repr(last.val_metric) if last else "",
        },
    }


def run_sweep(base: ExperimentConfig, axes, out_dir, threads: int = 1):
    """Run every point, write per-point CSVs, ``summary.csv`` and ``failures.csv``.

    Returns ``(summary rows, failures)``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(base, i, ov, str(out)) for i, ov in sweep_points(base, axes)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    rows = [r["row"] for r in results if r["ok"]]
    failures = [(r["point"], r["error"]) for r in results if not r["ok"]]
    with open(out / "summary.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SUMMARY_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    with open(out / "failures.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("point", "error"))
        w.writerows(failures)
    for point, error in failures:
        log.error("sweep point %s failed: %s", point, error)
    return rows, failures


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        path = Path(args.out) / f"{cfg.config_id}.csv"
        _write_metrics(path, run_config(cfg).metrics)
        print(path, file=sys.stderr)
        return 0
    out = sys.stdout
    out.write(",".join(CSV_HEADER) + "\n")
    out.flush()

    def emit(row):
        out.write(row.as_csv() + "\n")
        out.flush()

    run_config(cfg, on_epoch=emit)
    return 0


def cmd_sweep(args) -> int:
    base = load_config(args.config, args.set)
    axes = parse_axes(args.axis)
    rows, failures = run_sweep(base, axes, args.out or "sweep-results", args.threads)
    print(f"{len(rows)} points succeeded, {len(failures)} failed", file=sys.stderr)
    return 1 if failures else 0


def cmd_report_memory(args) -> int:
    cfg = load_config(args.config, args.set)
    text = format_memory_csv(report_memory(cfg))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"memory_{cfg.config_id}.csv").write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbfp", description="Hybrid block floating point training experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--threads", type=int, default=1, metavar="N", help="parallel sweep workers")

    p = sub.add_parser("run", help="train one configuration and emit per-epoch CSV")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="grid sweep over w_narrow, tile, w_wide, seed")
    common(p)
    p.add_argument("--axis", action="append", metavar="KEY=V1,V2", help="sweep axis")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("report-memory", help="weight byte accounting versus FP32")
    common(p)
    p.set_defaults(func=cmd_report_memory)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("HBFP_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"hbfp: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"hbfp: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
