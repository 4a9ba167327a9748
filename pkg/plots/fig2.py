"""Figure 2: myopic versus adaptive trading rates along one simulated
imbalance path, with the realized imbalance below.

Usage: python fig2.py trajectories.csv --out fig2.png
"""

import argparse
from pathlib import Path

import figlib
import matplotlib.pyplot as plt


def render(spec: figlib.FigureSpec):
    data = figlib.read_csv(spec.inputs[0], required=("strategy", "t", "alpha", "y"))
    fig, (ax_rate, ax_y) = plt.subplots(
        2, 1, figsize=(7.0, 5.5), sharex=True, height_ratios=[2, 1])
    for name, mask in figlib.groups(data, "strategy"):
        ax_rate.plot(data["t"][mask], data["alpha"][mask], label=name)
    ax_rate.set_ylabel("selling rate")
    ax_rate.legend()
    ax_rate.grid(True, alpha=0.3)
    first = next(iter(figlib.groups(data, "strategy")))[1]
    ax_y.plot(data["t"][first], data["y"][first], color="tab:gray")
    ax_y.axhline(0.0, lw=0.6, color="k")
    ax_y.set_ylabel("imbalance Y")
    ax_y.set_xlabel("volume time t")
    ax_y.grid(True, alpha=0.3)
    return figlib.save(fig, spec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("trajectories", help="CSV with columns strategy,t,x,alpha,y")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    print(render(figlib.FigureSpec("fig2", (args.trajectories,), Path(args.out))))


if __name__ == "__main__":
    main()
