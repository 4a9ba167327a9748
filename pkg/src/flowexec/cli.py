"""Command-line entry point.

Every subcommand writes deterministic CSVs (single header row, '.' decimal,
%.12g floats) plus a run-manifest JSON echoing the full configuration, the
seed and the package version, so each output is re-derivable from its
manifest alone.  Module failures map to distinct exit codes:

    0 success            5 solver breakdown
    2 usage              6 simulation failure
    3 bad configuration  7 horizon search failure
    4 domain error       8 malformed input data
    1 anything else
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import discrete_dp, flow_metrics, horizon, simulation
from .config import Config, ConfigError
from .errors import DataError, SearchError, SimulationError, SolverError
from .hjb_solver import GridSpec, solve_indefinite
from .myopic import InventoryRisk, myopic_solve
from .riccati import solve_riccati, value_uD

EXIT_CONFIG, EXIT_DOMAIN, EXIT_SOLVER, EXIT_SIM, EXIT_SEARCH, EXIT_DATA = 3, 4, 5, 6, 7, 8


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def _write_manifest(outdir: Path, command: str, cfg: Config, outputs, extra=None):
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.as_dict(),
        "outputs": sorted(outputs),
    }
    if extra:
        manifest["parameters"] = extra
    with open(outdir / f"{command}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_floats(text: str):
    return [float(tok) for tok in text.split(",") if tok.strip()]


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_myopic(cfg: Config, args, outdir: Path):
    params = cfg.flow_params()
    risks = [
        ("ML", InventoryRisk.zero()),
        ("MH", InventoryRisk.quadratic(args.c_risk)),
        ("MQ", InventoryRisk.linear(args.c_risk)),
    ]
    traj_rows, summary_rows = [], []
    for label, risk in risks:
        sol = myopic_solve(risk, args.x, args.T)
        t, xs, al = sol.sample(args.samples)
        traj_rows += [(label, tv, xv, av) for tv, xv, av in zip(t, xs, al)]
        summary_rows.append((label, sol.impact_cost, sol.effective_horizon))
    write_csv(outdir / "myopic_trajectories.csv", ["kind", "t", "x", "alpha"], traj_rows)
    write_csv(outdir / "myopic_summary.csv", ["kind", "impact_cost", "effective_horizon"], summary_rows)
    _write_manifest(outdir, "myopic", cfg, ["myopic_trajectories.csv", "myopic_summary.csv"],
                    {"x": args.x, "T": args.T, "c_risk": args.c_risk, "samples": args.samples})
    print(f"wrote myopic trajectories for x={args.x}, T={args.T} to {outdir}")
    return 0


def _cmd_riccati(cfg: Config, args, outdir: Path):
    params = cfg.flow_params()
    risk = cfg.inventory_risk()
    coef = solve_riccati(params, risk, t_max=args.t_max, epsilon=cfg.epsilon, step=cfg.rk_step)
    coef.write_csv(outdir / "riccati_coefficients.csv", stride=args.stride)
    _write_manifest(outdir, "riccati", cfg, ["riccati_coefficients.csv"],
                    {"t_max": args.t_max, "stride": args.stride, "variant": coef.variant})
    print(f"solved {coef.variant} coefficients on [{coef.epsilon:g}, {coef.tau_max:g}]")
    return 0


def _cmd_hjb(cfg: Config, args, outdir: Path):
    params = cfg.flow_params()
    risk = cfg.inventory_risk()
    grid = GridSpec.default(params, x_max=cfg.x0, n_x=cfg.fd_nx, n_y=cfg.fd_ny)
    surface = solve_indefinite(params, risk, grid)
    surface.write_csv(outdir / "hjb_surface.csv", stride_x=args.stride, stride_y=max(args.stride // 4, 1))
    surface.write_binary(outdir / "hjb_surface.bin")
    v00 = surface.value(cfg.x0, 0.0)
    write_csv(outdir / "hjb_summary.csv", ["x0", "v"], [(cfg.x0, v00)])
    _write_manifest(outdir, "hjb", cfg,
                    ["hjb_surface.csv", "hjb_surface.bin", "hjb_summary.csv"],
                    {"stride": args.stride})
    print(f"v({cfg.x0:g}, 0) = {v00:.6f}")
    return 0


def _cmd_optimize_horizon(cfg: Config, args, outdir: Path):
    params = cfg.flow_params()
    risk = cfg.inventory_risk()
    ys = _parse_floats(args.y_list)
    curve_rows, star_rows = [], []

    if args.family == "elo":
        for y in ys:
            res = horizon.elo_static_horizon(cfg.x0, y, args.elo_c, params)
            star_rows.append((y, res.t_star, res.value_at_star))
        write_csv(outdir / "horizon_tstar.csv", ["y", "t_star", "u_star"], star_rows)
        _write_manifest(outdir, "optimize-horizon", cfg, ["horizon_tstar.csv"],
                        {"family": args.family, "y_list": ys, "elo_c": args.elo_c})
        for y, t, u in star_rows:
            print(f"y={y:+.3f}: T*={t:.5f}, objective={u:.6f}")
        return 0

    if args.family == "myopic-ML":
        value_of = lambda T, y: simulation._u_ml_vec(T, cfg.x0, y, params, risk.c)
        t_hi = args.t_grid_max
    else:
        want = InventoryRisk.constant(cfg.c) if args.family == "dynamic-DL" else InventoryRisk.quadratic(cfg.c)
        coef = solve_riccati(params, want, t_max=args.t_grid_max, epsilon=cfg.epsilon, step=cfg.rk_step)
        value_of = lambda T, y: value_uD(coef, T, cfg.x0, y)
        t_hi = coef.tau_max

    ts = np.linspace(max(cfg.epsilon, 0.05), t_hi, args.curve_samples)
    for y in ys:
        for t in ts:
            curve_rows.append((y, t, float(value_of(t, y))))
        res = horizon.optimize_T(lambda T: float(value_of(T, y)), t_hi,
                                 t_floor=max(cfg.epsilon, horizon.T_FLOOR))
        star_rows.append((y, res.t_star, res.value_at_star))
    write_csv(outdir / "horizon_curve.csv", ["y", "T", "u"], curve_rows)
    write_csv(outdir / "horizon_tstar.csv", ["y", "t_star", "u_star"], star_rows)
    _write_manifest(outdir, "optimize-horizon", cfg, ["horizon_curve.csv", "horizon_tstar.csv"],
                    {"family": args.family, "y_list": ys, "t_grid_max": args.t_grid_max})
    for y, t, u in star_rows:
        print(f"y={y:+.3f}: T*={t:.5f}, u(T*)={u:.6f}")
    return 0


def _cmd_simulate(cfg: Config, args, outdir: Path):
    params = cfg.flow_params()
    risk = cfg.inventory_risk()
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    deps = None
    if any(k in simulation.TABLE1_ORDER for k in kinds):
        deps = simulation.build_table1_dependencies(
            params, risk, cfg.x0, epsilon=cfg.epsilon, rk_step=cfg.rk_step)

    def build(kind):
        if kind in simulation.TABLE1_ORDER:
            return simulation.make_strategy(kind, deps, cfg.y0)
        if kind == "myopic-mh":
            return simulation.MyopicMH(InventoryRisk.quadratic(cfg.c), cfg.x0, args.T)
        if kind == "dynamic-dh":
            coef = solve_riccati(params, InventoryRisk.quadratic(cfg.c),
                                 t_max=args.T + 0.5, epsilon=cfg.epsilon, step=cfg.rk_step)
            return simulation.DynamicDH(coef, args.T)
        raise ValueError(f"unknown strategy kind {kind!r}")

    def risk_for(kind):
        return InventoryRisk.quadratic(cfg.c) if kind in ("myopic-mh", "dynamic-dh") else risk

    outputs = []
    if args.record:
        rows = []
        for kind in kinds:
            traj = simulation.run_strategy(build(kind), params, risk_for(kind),
                                           cfg.x0, cfg.y0, cfg.dt, cfg.seed)
            rows += [(kind, t, x, a, y, j) for t, x, a, y, j in
                     zip(traj.times, traj.inventory, traj.rate, traj.imbalance, traj.cumulative_cost)]
        write_csv(outdir / "trajectories.csv", ["strategy", "t", "x", "alpha", "y", "cumcost"], rows)
        outputs.append("trajectories.csv")
    else:
        rows = []
        for kind in kinds:
            st = simulation.monte_carlo(build(kind), params, risk_for(kind),
                                        cfg.x0, cfg.y0, cfg.dt, cfg.paths, cfg.seed)
            rows.append((kind, st.mean, st.sd, st.q05, st.q95, st.mean_t0, st.se,
                         st.clamp_fraction, st.n_paths))
        write_csv(outdir / "sim_stats.csv",
                  ["strategy", "mean", "sd", "q05", "q95", "mean_t0", "se", "clamp_fraction", "n_paths"],
                  rows)
        outputs.append("sim_stats.csv")
    _write_manifest(outdir, "simulate", cfg, outputs,
                    {"kinds": kinds, "record": args.record, "T": args.T})
    print(f"simulated {', '.join(kinds)}")
    return 0


def _cmd_table1(cfg: Config, args, outdir: Path):
    params = cfg.flow_params()
    risk = cfg.inventory_risk()
    rows = simulation.table1(params, risk, cfg.x0, cfg.y0, cfg.paths, cfg.seed, dt=cfg.dt)
    out = [(name, st.mean, st.sd, st.q05, st.q95, st.mean_t0, st.se, st.clamp_fraction, st.n_paths)
           for name, st in rows]
    write_csv(outdir / "table1.csv",
              ["strategy", "mean", "sd", "q05", "q95", "mean_t0", "se", "clamp_fraction", "n_paths"],
              out)
    _write_manifest(outdir, "table1", cfg, ["table1.csv"])
    for name, st in rows:
        print(f"{name:14s} E[J]={st.mean:7.4f}  SD={st.sd:6.4f}  q05={st.q05:6.4f}  "
              f"q95={st.q95:6.4f}  E[T0]={st.mean_t0:6.4f}")
    return 0


def _cmd_statics(cfg: Config, args, outdir: Path):
    params = cfg.flow_params()
    risk = cfg.inventory_risk()
    rows = simulation.comparative_statics(
        _parse_floats(args.kappas), _parse_floats(args.etas),
        np.linspace(args.y_lo, args.y_hi, args.y_points),
        params, risk, cfg.x0, epsilon=cfg.epsilon, rk_step=cfg.rk_step)
    write_csv(outdir / "rates.csv", ["kappa", "eta", "y", "rate"], rows)
    _write_manifest(outdir, "statics", cfg, ["rates.csv"],
                    {"kappas": args.kappas, "etas": args.etas,
                     "y_lo": args.y_lo, "y_hi": args.y_hi, "y_points": args.y_points})
    print(f"wrote {len(rows)} receding-DL rates")
    return 0


def _cmd_horizons(cfg: Config, args, outdir: Path):
    params = cfg.flow_params()
    risk = cfg.inventory_risk()
    y0s = _parse_floats(args.y0_list)
    dist = simulation.horizon_distribution(params, risk, cfg.x0, y0s, cfg.paths, cfg.seed, dt=cfg.dt)
    all_t0 = np.concatenate([t0 for t0, _ in dist.values()])
    edges = np.histogram_bin_edges(all_t0, bins=args.bins)
    hist_rows = []
    for y0, (t0s, _) in dist.items():
        counts, _ = np.histogram(t0s, bins=edges)
        hist_rows += [(y0, edges[i], edges[i + 1], int(c)) for i, c in enumerate(counts)]
    write_csv(outdir / "horizon_hist.csv", ["y0", "bin_lo", "bin_hi", "count"], hist_rows)
    scatter_y0 = 0.0 if 0.0 in dist else y0s[0]
    t0s, yt0s = dist[scatter_y0]
    write_csv(outdir / "horizon_scatter.csv", ["t0", "y_t0"], list(zip(t0s, yt0s)))
    _write_manifest(outdir, "horizons", cfg, ["horizon_hist.csv", "horizon_scatter.csv"],
                    {"y0_list": y0s, "bins": args.bins, "scatter_y0": scatter_y0})
    for y0, (t0s, _) in dist.items():
        print(f"y0={y0:+.2f}: median T0 = {np.median(t0s):.4f}")
    return 0


def _cmd_dp(cfg: Config, args, outdir: Path):
    params = cfg.flow_params()
    risk = cfg.inventory_risk()
    psi = (lambda a: np.asarray(a, dtype=float) ** args.psi_exponent)
    model = discrete_dp.build_model(
        params, risk, bucket_volume=args.bucket_volume, n_alpha=args.n_alpha,
        n_y=args.n_y, x_max_buckets=args.x_buckets, psi=psi, a_term=args.a_term)
    result = discrete_dp.stationary_value(model, tol=args.tol, t_cap=args.t_cap)
    discrete_dp.write_policy_csv(result, model, outdir / "dp_policy.csv")
    write_csv(outdir / "dp_summary.csv", ["converged", "gap", "iterations"],
              [(str(result.converged), result.gap, result.iterations)])
    _write_manifest(outdir, "dp", cfg, ["dp_policy.csv", "dp_summary.csv"],
                    {"n_alpha": args.n_alpha, "n_y": args.n_y, "x_buckets": args.x_buckets,
                     "psi_exponent": args.psi_exponent, "tol": args.tol, "t_cap": args.t_cap,
                     "bucket_volume": args.bucket_volume, "a_term": args.a_term})
    print(f"stationary value {'converged' if result.converged else 'NOT converged'} "
          f"after {result.iterations} stages (gap {result.gap:.2e})")
    return 0


def _cmd_flow(cfg: Config, args, outdir: Path):
    kinds = None if args.include_touch else ("execution",)
    beta = args.beta_flow if args.beta_flow else flow_metrics.default_beta(args.v_daily, args.beta_a)
    outputs = []
    if args.metric == "ewma":
        series = flow_metrics.ewma_imbalance(flow_metrics.ingest_trades(args.input, kinds), beta)
        series.write_csv(outdir / "imbalance.csv")
        outputs.append("imbalance.csv")
        print(f"EWMA imbalance over {len(series.values)} trades (beta={beta:g})")
    else:
        buckets = flow_metrics.bucket_imbalance(
            flow_metrics.ingest_trades(args.input, kinds), args.bucket_volume)
        if args.metric == "bucket":
            buckets.write_csv(outdir / "buckets.csv")
            outputs.append("buckets.csv")
            print(f"{len(buckets.values)} complete buckets of {args.bucket_volume:g}")
        else:
            series = flow_metrics.vpin(buckets, args.window)
            rows = [(l + args.window, buckets.values[l + args.window - 1], v)
                    for l, v in enumerate(series)]
            write_csv(outdir / "vpin.csv", ["l", "I_tilde", "vpin"], rows)
            outputs.append("vpin.csv")
            print(f"{len(series)} VPIN values (V={args.bucket_volume:g}, n={args.window})")
    _write_manifest(outdir, "flow", cfg, outputs,
                    {"metric": args.metric, "input": str(args.input), "beta": beta,
                     "bucket_volume": args.bucket_volume, "window": args.window,
                     "include_touch": args.include_touch})
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowexec",
        description="Optimal execution under order-flow imbalance: solvers, "
                    "Monte Carlo experiments and empirical flow metrics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--outdir", help="output directory (default $FLOWEXEC_OUTDIR or '.')")
    for name in ("beta", "sigma", "kappa", "eta", "c", "x0", "y0", "dt"):
        parser.add_argument(f"--{name}", type=float)
    parser.add_argument("--risk", choices=("zero", "quadratic", "linear", "constant"))
    parser.add_argument("--paths", type=int)
    parser.add_argument("--seed", type=int)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("myopic", help="closed-form execution curves")
    p.add_argument("--x", type=float, default=3.0)
    p.add_argument("--T", type=float, default=3.0)
    p.add_argument("--c-risk", type=float, default=2.0, dest="c_risk")
    p.add_argument("--samples", type=int, default=301)
    p.set_defaults(func=_cmd_myopic)

    p = sub.add_parser("riccati", help="solve the coefficient ODE system")
    p.add_argument("--t-max", type=float, default=8.0)
    p.add_argument("--stride", type=int, default=100)
    p.set_defaults(func=_cmd_riccati)

    p = sub.add_parser("hjb", help="indefinite-horizon finite-difference surface")
    p.add_argument("--stride", type=int, default=10)
    p.set_defaults(func=_cmd_hjb)

    p = sub.add_parser("optimize-horizon", help="T* and cost-vs-horizon curves")
    p.add_argument("--family", choices=("myopic-ML", "dynamic-DL", "dynamic-DH", "elo"),
                   default="dynamic-DH")
    p.add_argument("--y-list", default="-0.5,0,0.5")
    p.add_argument("--t-grid-max", type=float, default=8.0)
    p.add_argument("--curve-samples", type=int, default=200)
    p.add_argument("--elo-c", type=float, default=0.1)
    p.set_defaults(func=_cmd_optimize_horizon)

    p = sub.add_parser("simulate", help="Monte Carlo or single-path runs")
    p.add_argument("--kinds", default="static-ml")
    p.add_argument("--record", action="store_true", help="record one full path per kind")
    p.add_argument("--T", type=float, default=3.0, help="horizon for myopic-mh / dynamic-dh")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("table1", help="six-strategy cost comparison")
    p.set_defaults(func=_cmd_table1)

    p = sub.add_parser("statics", help="receding-DL rates over (kappa, eta, y)")
    p.add_argument("--kappas", default="5,10,20")
    p.add_argument("--etas", default="0.05,0.1")
    p.add_argument("--y-lo", type=float, default=-0.5)
    p.add_argument("--y-hi", type=float, default=0.5)
    p.add_argument("--y-points", type=int, default=21)
    p.set_defaults(func=_cmd_statics)

    p = sub.add_parser("horizons", help="realized-horizon distributions")
    p.add_argument("--y0-list", default="-0.25,0,0.25")
    p.add_argument("--bins", type=int, default=40)
    p.set_defaults(func=_cmd_horizons)

    p = sub.add_parser("dp", help="discrete volume-bucket dynamic program")
    p.add_argument("--bucket-volume", type=float, default=1.0)
    p.add_argument("--n-alpha", type=int, default=20)
    p.add_argument("--n-y", type=int, default=41)
    p.add_argument("--x-buckets", type=float, default=2.0)
    p.add_argument("--psi-exponent", type=float, default=1.0)
    p.add_argument("--a-term", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--t-cap", type=int, default=500)
    p.set_defaults(func=_cmd_dp)

    p = sub.add_parser("flow", help="empirical imbalance metrics from a trade CSV")
    p.add_argument("metric", choices=("ewma", "bucket", "vpin"))
    p.add_argument("--input", required=True)
    p.add_argument("--beta-a", type=float, default=30.0)
    p.add_argument("--v-daily", type=float, default=3_000_000.0)
    p.add_argument("--beta-flow", type=float, default=None,
                   help="EWMA memory parameter; overrides beta-a / v-daily")
    p.add_argument("--bucket-volume", type=float, default=25000.0)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--include-touch", action="store_true",
                   help="count limit-at-touch records as flow")
    p.set_defaults(func=_cmd_flow)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = Config.from_file(args.config) if args.config else Config()
        cfg.apply_overrides({
            name: getattr(args, name)
            for name in ("beta", "sigma", "kappa", "eta", "risk", "c",
                         "x0", "y0", "dt", "paths", "seed")
        })
        if args.outdir:
            cfg.outdir = args.outdir
        elif os.environ.get("FLOWEXEC_OUTDIR"):
            cfg.outdir = os.environ["FLOWEXEC_OUTDIR"]
        cfg.validate()
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    try:
        return args.func(cfg, args, outdir)
    except ValueError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    except SearchError as exc:
        print(f"search error: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - last resort
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
