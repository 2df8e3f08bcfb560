"""
Render the CSV plot data of a finished run
==========================================

Usage: ``python3 demos/plot_results.py runs/tfim_2x3_quick``

Writes ``fidelity_vs_lam.png`` and ``log_value_vs_lam.png`` into the run
directory. Needs matplotlib (``pip install -e .[plot]``).
"""

from __future__ import annotations

import csv
import math
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path: Path) -> list[dict]:
    with path.open() as fh:
        return list(csv.DictReader(fh))


def plot_fidelity(out: Path) -> None:
    curves = defaultdict(list)
    for row in read(out / "fidelity_vs_lam.csv"):
        curves[int(row["max_bond"])].append((float(row["lam"]), float(row["emulation_fidelity"])))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for d, pts in sorted(curves.items()):
        x, y = zip(*sorted(pts))
        ax.plot(x, y, "o-", ms=3, label=f"D = {d}")
    ax.set_xlabel("noise strength")
    ax.set_ylabel("emulation fidelity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "fidelity_vs_lam.png", dpi=150)


def plot_log_values(out: Path, max_panels: int = 4) -> None:
    series = defaultdict(list)
    for row in read(out / "log_value_vs_lam.csv"):
        series[row["observable"]].append(row)
    names = sorted(series)[:max_panels]
    fig, axes = plt.subplots(1, len(names), figsize=(4 * len(names), 3.5), squeeze=False)
    for ax, name in zip(axes[0], names):
        rows = sorted(series[name], key=lambda r: float(r["lam"]))
        for acc, style in (("1", "o"), ("0", "x")):
            pts = [(float(r["lam"]), float(r["log_abs_value"])) for r in rows if r["accepted"] == acc and r["log_abs_value"]]
            if pts:
                ax.plot(*zip(*pts), style, label="accepted" if acc == "1" else "rejected")
        fit = [(float(r["lam"]), abs(float(r["fit_value"]))) for r in rows if r["fit_value"]]
        if fit:
            x, y = zip(*fit)
            ax.plot(x, [math.log(v) for v in y], "-", label=rows[0]["mode"])
        ax.set_title(name)
        ax.set_xlabel("noise strength")
    axes[0][0].set_ylabel("log |value|")
    axes[0][0].legend()
    fig.tight_layout()
    fig.savefig(out / "log_value_vs_lam.png", dpi=150)


if __name__ == "__main__":
    run_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/tfim_2x3_quick")
    plot_fidelity(run_dir)
    plot_log_values(run_dir)
    print(f"wrote plots to {run_dir}")
