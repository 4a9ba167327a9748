"""Figure 5: distribution of the realized execution horizon per initial
imbalance (left) and its relation to the terminal imbalance (right).

Usage: python fig5.py horizon_hist.csv horizon_scatter.csv --out fig5.png
"""

import argparse
from pathlib import Path

import figlib
import matplotlib.pyplot as plt
import numpy as np


def render(spec: figlib.FigureSpec):
    hist = figlib.read_csv(spec.inputs[0], required=("y0", "bin_lo", "bin_hi", "count"))
    scatter = figlib.read_csv(spec.inputs[1], required=("t0", "y_t0"))
    fig, (ax_h, ax_s) = plt.subplots(1, 2, figsize=(9.5, 4.2))
    for y0, mask in figlib.groups(hist, "y0"):
        edges = np.append(hist["bin_lo"][mask], hist["bin_hi"][mask][-1])
        ax_h.stairs(hist["count"][mask], edges, label=f"y0 = {y0:+.2f}")
    ax_h.set_xlabel("realized horizon T0")
    ax_h.set_ylabel("paths")
    ax_h.legend()
    ax_h.grid(True, alpha=0.3)
    ax_s.plot(scatter["t0"], scatter["y_t0"], ".", ms=2, alpha=0.5)
    ax_s.axhline(0.0, lw=0.6, color="k")
    ax_s.set_xlabel("realized horizon T0")
    ax_s.set_ylabel("terminal imbalance")
    ax_s.grid(True, alpha=0.3)
    return figlib.save(fig, spec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("hist", help="CSV with columns y0,bin_lo,bin_hi,count")
    ap.add_argument("scatter", help="CSV with columns t0,y_t0")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    print(render(figlib.FigureSpec("fig5", (args.hist, args.scatter), Path(args.out))))


if __name__ == "__main__":
    main()
