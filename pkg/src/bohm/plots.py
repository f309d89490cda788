"""Figure rendering for benchmark CSV output.

Figures go to PNG files next to (or wherever requested alongside) the
delimited output: a throughput-over-time series for single runs, and
throughput-vs-parameter curves (one line per engine) for sweeps.
"""
from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_rows(csv_path: str) -> list[dict]:
    with open(csv_path, newline="") as f:
        return [row for row in csv.DictReader(f)]


def plot_run_series(csv_path: str, out_dir: str) -> list[str]:
    """Render the per-second throughput series of a run CSV. The final row
    is the summary row and is excluded from the series."""
    rows = _read_rows(csv_path)
    if len(rows) < 2:
        raise ValueError(f"{csv_path} has no per-second rows to plot")
    series = rows[:-1]
    summary = rows[-1]
    seconds = list(range(1, len(series) + 1))
    tps = [float(r["txns_per_sec"]) for r in series]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(seconds, tps, marker="o")
    ax.set_xlabel("second")
    ax.set_ylabel("committed txns/sec")
    ax.set_title(
        f"{summary['engine']} on {summary['workload']} (theta={summary['theta']})"
    )
    ax.grid(True, alpha=0.3)
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.splitext(os.path.basename(csv_path))[0]
    out = os.path.join(out_dir, f"{base}_series.png")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [out]


def plot_sweep(csv_path: str, out_dir: str, x: str = "exec_threads") -> list[str]:
    """Render throughput-vs-`x` curves from a sweep CSV, one line per engine
    (failed rows with empty metrics are skipped)."""
    rows = [r for r in _read_rows(csv_path) if r["txns_per_sec"]]
    if not rows:
        raise ValueError(f"{csv_path} has no successful rows to plot")
    by_engine = defaultdict(list)
    for r in rows:
        xval = r[x] if r[x] != "" else r["exec_threads"]
        by_engine[r["engine"]].append((float(xval), float(r["txns_per_sec"])))
    fig, ax = plt.subplots(figsize=(7, 4))
    for engine, pts in sorted(by_engine.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=engine)
    ax.set_xlabel(x)
    ax.set_ylabel("committed txns/sec")
    ax.set_title(f"throughput vs {x}")
    ax.grid(True, alpha=0.3)
    ax.legend()
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.splitext(os.path.basename(csv_path))[0]
    out = os.path.join(out_dir, f"{base}_vs_{x}.png")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [out]
