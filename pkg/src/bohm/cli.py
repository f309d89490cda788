"""bohm-bench command line.

    bohm-bench run   --engine bohm --cc-threads 4 --exec-threads 4 \
                     --workload micro10rmw --db-size 100000 --duration 30 \
                     --out run.csv
    bohm-bench sweep --engine bohm --cc-threads 2 --vary exec_threads=1,2,4,8 \
                     --out sweep.csv --plot-dir figs/
    bohm-bench plot  --csv sweep.csv --out-dir figs/ --x exec_threads

`run` is the default subcommand, so the flat form `bohm-bench --engine 2pl ...`
works too. BOHM_THREADS_NO_PIN=1 disables thread pinning.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from itertools import product

from . import bench, plots
from .bench import RunConfig
from .errors import ConfigError

_ONOFF = {"on": True, "off": False}

# sweep --vary accepts these RunConfig fields.
_SWEEPABLE = {
    "engine": str,
    "cc_threads": int,
    "exec_threads": int,
    "workers": int,
    "batch_size": int,
    "theta": float,
    "db_size": int,
    "customers": int,
    "spin_us": int,
    "readonly_fraction": float,
    "scan_size": int,
    "seed": int,
    "workload": str,
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--engine", default="bohm", help="bohm | 2pl | occ")
    p.add_argument("--cc-threads", type=int, default=None)
    p.add_argument("--exec-threads", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=10_000)
    p.add_argument("--queue-depth", type=int, default=4)
    p.add_argument("--max-recursion", type=int, default=8)
    p.add_argument("--spin-budget", type=int, default=100)
    p.add_argument("--workload", default="micro10rmw")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--db-size", type=int, default=100_000)
    p.add_argument("--record-size", type=int, default=None)
    p.add_argument("--customers", type=int, default=100_000)
    p.add_argument("--spin-us", type=int, default=50)
    p.add_argument("--readonly-fraction", type=float, default=0.01)
    p.add_argument("--scan-size", type=int, default=10_000)
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--warmup", type=float, default=5.0)
    p.add_argument("--txns", type=int, default=None,
                   help="fixed transaction count instead of a timed window")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--gc", choices=_ONOFF, default="on")
    p.add_argument("--annotate-reads", choices=_ONOFF, default="on")
    p.add_argument("--verify", action="store_true",
                   help="record the log, replay it serially and diff states")
    p.add_argument("--writecheck-abort", action="store_true",
                   help="SmallBank WriteCheck aborts on overdraft instead of penalty")
    p.add_argument("--debug", action="store_true",
                   help="enable instrumentation assertions (slower)")
    p.add_argument("--out", default=None, help="CSV output path")


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        engine=args.engine,
        cc_threads=args.cc_threads,
        exec_threads=args.exec_threads,
        workers=args.workers,
        batch_size=args.batch_size,
        queue_depth=args.queue_depth,
        max_recursion=args.max_recursion,
        spin_budget=args.spin_budget,
        workload=args.workload,
        theta=args.theta,
        db_size=args.db_size,
        record_size=args.record_size,
        customers=args.customers,
        spin_us=args.spin_us,
        readonly_fraction=args.readonly_fraction,
        scan_size=args.scan_size,
        duration=args.duration,
        warmup=args.warmup,
        txn_count=args.txns,
        seed=args.seed,
        gc=_ONOFF[args.gc],
        annotate_reads=_ONOFF[args.annotate_reads],
        verify=args.verify,
        writecheck_abort=args.writecheck_abort,
        debug=args.debug,
        out=args.out,
    )


def _print_summary(m: bench.RunMetrics) -> None:
    print(
        f"{m.engine} {m.workload} theta={m.theta}: "
        f"{m.committed} txns in {m.duration:.2f}s window = "
        f"{m.txns_per_sec:,.0f} txns/s, {m.ops_per_sec:,.0f} ops/s, "
        f"retries={m.retries} deferred={m.deferred} "
        f"aborts={m.logical_aborts} gc_reclaimed={m.gc_reclaimed}"
    )
    if m.final_digest:
        print(f"final state digest: {m.final_digest}")
    if m.verify_result is not None:
        print(m.verify_result.summary())


def _cmd_run(args) -> int:
    metrics = bench.run(_config_from_args(args))
    _print_summary(metrics)
    if args.out:
        print(f"wrote {args.out}")
    if metrics.verify_result is not None and not metrics.verify_result.ok:
        return 1
    return 0


def _parse_vary(vary_args: list[str]) -> list[tuple[str, list]]:
    axes = []
    for spec in vary_args:
        name, _, values = spec.partition("=")
        name = name.replace("-", "_")
        if name not in _SWEEPABLE or not values:
            raise ConfigError(
                f"--vary expects field=v1,v2,... with field in {sorted(_SWEEPABLE)}"
            )
        conv = _SWEEPABLE[name]
        axes.append((name, [conv(v) for v in values.split(",")]))
    return axes


def _normalize_threads(cfg: RunConfig) -> RunConfig:
    """Cross-engine sweeps carry the union of thread flags; keep only the
    fields the row's engine understands (bohm: cc/exec threads, baselines:
    workers)."""
    if cfg.engine == "bohm":
        return replace(cfg, workers=None)
    return replace(cfg, cc_threads=None, exec_threads=None)


def _cmd_sweep(args) -> int:
    base = _config_from_args(args)
    base.out = None
    axes = _parse_vary(args.vary or [])
    configs = []
    if axes:
        names = [a[0] for a in axes]
        for combo in product(*(a[1] for a in axes)):
            configs.append(_normalize_threads(replace(base, **dict(zip(names, combo)))))
    else:
        configs.append(_normalize_threads(base))
    results = bench.sweep(configs, out=args.out)
    for m in results:
        if m.error:
            print(f"{m.engine} {m.workload}: FAILED ({m.error})")
        else:
            _print_summary(m)
    if args.out:
        print(f"wrote {args.out}")
        if args.plot_dir:
            numeric = [n for n, vals in axes
                       if all(isinstance(v, (int, float)) for v in vals)]
            x = numeric[0] if numeric else "exec_threads"
            for path in plots.plot_sweep(args.out, args.plot_dir, x=x):
                print(f"wrote {path}")
    return 1 if any(m.error for m in results) else 0


def _cmd_plot(args) -> int:
    if args.kind == "sweep":
        written = plots.plot_sweep(args.csv, args.out_dir, x=args.x)
    else:
        written = plots.plot_run_series(args.csv, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bohm-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one benchmark configuration")
    _add_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a cross-product of configurations")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--vary", action="append", default=[],
                         metavar="FIELD=V1,V2,...",
                         help="axis to sweep; repeatable (cross product)")
    p_sweep.add_argument("--plot-dir", default=None,
                         help="also render figures from the sweep CSV")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_plot = sub.add_parser("plot", help="render figures from a CSV")
    p_plot.add_argument("--csv", required=True)
    p_plot.add_argument("--out-dir", required=True)
    p_plot.add_argument("--kind", choices=("sweep", "run"), default="sweep")
    p_plot.add_argument("--x", default="exec_threads")
    p_plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("-") and argv[0] not in ("-h", "--help"):
        argv.insert(0, "run")  # flat flag form defaults to `run`
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
