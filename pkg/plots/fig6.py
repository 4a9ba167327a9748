"""Figure 6: per-trade EWMA imbalance with the bucketed toxicity proxy
overlaid, both against normalized session progress.

Usage: python fig6.py imbalance.csv vpin.csv --out fig6.png
"""

import argparse
from pathlib import Path

import figlib
import numpy as np


def render(spec: figlib.FigureSpec):
    ewma = figlib.read_csv(spec.inputs[0], required=("k", "I"))
    vp = figlib.read_csv(spec.inputs[1], required=("l", "I_tilde", "vpin"))
    fig, ax = figlib.new_figure(width=8.0)
    progress_trades = ewma["k"] / max(ewma["k"].max(), 1.0)
    ax.plot(progress_trades, ewma["I"], lw=0.7, label="EWMA imbalance")
    progress_buckets = vp["l"] / max(vp["l"].max(), 1.0)
    ax.plot(progress_buckets, vp["vpin"], lw=1.8, label="VPIN")
    ax.axhline(0.0, lw=0.6, color="k")
    ax.set_xlabel("session progress (volume fraction)")
    ax.set_ylabel("imbalance / toxicity")
    ax.set_ylim(-1.05, 1.05)
    ax.legend()
    ax.grid(True, alpha=0.3)
    return figlib.save(fig, spec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("ewma", help="CSV with columns k,I")
    ap.add_argument("vpin", help="CSV with columns l,I_tilde,vpin")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    print(render(figlib.FigureSpec("fig6", (args.ewma, args.vpin), Path(args.out))))


if __name__ == "__main__":
    main()
