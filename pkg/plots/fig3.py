"""Figure 3: expected execution cost as a function of the horizon for
several imbalance levels, with the minimizing horizon marked.

Usage: python fig3.py horizon_curve.csv [horizon_tstar.csv] --out fig3.png
"""

import argparse
from pathlib import Path

import figlib


def render(spec: figlib.FigureSpec):
    curve = figlib.read_csv(spec.inputs[0], required=("y", "T", "u"))
    fig, ax = figlib.new_figure()
    for y, mask in figlib.groups(curve, "y"):
        ax.plot(curve["T"][mask], curve["u"][mask], label=f"y = {y:+.2f}")
    if len(spec.inputs) > 1:
        stars = figlib.read_csv(spec.inputs[1], required=("y", "t_star"))
        for t in stars["t_star"]:
            ax.axvline(t, ls="--", lw=0.8, color="k", alpha=0.6)
    ax.set_xlabel("horizon T")
    ax.set_ylabel("expected cost u(T, x, y)")
    ax.set_title("Cost against execution horizon")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return figlib.save(fig, spec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("curve", help="CSV with columns y,T,u")
    ap.add_argument("tstar", nargs="?", help="optional CSV with columns y,t_star,u_star")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    inputs = (args.curve,) if args.tstar is None else (args.curve, args.tstar)
    print(render(figlib.FigureSpec("fig3", inputs, Path(args.out))))


if __name__ == "__main__":
    main()
