"""Figure 1: the three closed-form execution curves (linear, hyperbolic,
quadratic-in-t), the last touching zero before the deadline.

Usage: python fig1.py myopic_trajectories.csv --out fig1.png
"""

import argparse
from pathlib import Path

import figlib

STYLES = {"ML": "-", "MH": "--", "MQ": "-."}


def render(spec: figlib.FigureSpec):
    data = figlib.read_csv(spec.inputs[0], required=("kind", "t", "x"))
    fig, ax = figlib.new_figure()
    for kind, mask in figlib.groups(data, "kind"):
        ax.plot(data["t"][mask], data["x"][mask], STYLES.get(kind, "-"), label=kind)
    ax.set_xlabel("volume time t")
    ax.set_ylabel("inventory x(t)")
    ax.set_title("Deterministic execution curves")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return figlib.save(fig, spec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("trajectories", help="CSV with columns kind,t,x,alpha")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    out = render(figlib.FigureSpec("fig1", (args.trajectories,), Path(args.out)))
    print(out)


if __name__ == "__main__":
    main()
