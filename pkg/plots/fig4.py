"""Figure 4: receding-horizon trading rate against flow imbalance for
several informational-cost and leakage strengths.

Usage: python fig4.py rates.csv --out fig4.png
"""

import argparse
from pathlib import Path

import figlib


def render(spec: figlib.FigureSpec):
    data = figlib.read_csv(spec.inputs[0], required=("kappa", "eta", "y", "rate"))
    fig, ax = figlib.new_figure()
    pairs = sorted({(k, e) for k, e in zip(data["kappa"], data["eta"])})
    for kappa, eta in pairs:
        mask = (data["kappa"] == kappa) & (data["eta"] == eta)
        order = data["y"][mask].argsort()
        ax.plot(data["y"][mask][order], data["rate"][mask][order],
                label=f"kappa={kappa:g}, eta={eta:g}")
    ax.set_xlabel("flow imbalance y")
    ax.set_ylabel("trading rate")
    ax.set_title("Receding-horizon rate against market state")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return figlib.save(fig, spec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("rates", help="CSV with columns kappa,eta,y,rate")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    print(render(figlib.FigureSpec("fig4", (args.rates,), Path(args.out))))


if __name__ == "__main__":
    main()
