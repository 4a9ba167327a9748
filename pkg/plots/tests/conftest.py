"""The figure scripts consume CSVs produced by the primary CLI; the data
fixture shells out to it once per session."""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

PLOTS_DIR = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(PLOTS_DIR))


def run_cli(args, outdir):
    cmd = [sys.executable, "-m", "flowexec.cli", "--outdir", str(outdir)] + [str(a) for a in args]
    res = subprocess.run(cmd, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return outdir


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("csv")
    run_cli(["myopic", "--x", "3", "--T", "3", "--c-risk", "2"], out)
    run_cli(["--risk", "quadratic", "--c", "0.1", "--eta", "0.05", "--seed", "2",
             "simulate", "--kinds", "myopic-mh,dynamic-dh", "--record", "--T", "3"], out)
    run_cli(["--risk", "quadratic", "--c", "0.1", "--eta", "0.05",
             "optimize-horizon", "--family", "dynamic-DH", "--y-list=-0.5,0,0.5",
             "--t-grid-max", "8", "--curve-samples", "80"], out)
    run_cli(["statics", "--kappas", "5,10", "--etas", "0.05,0.1", "--y-points", "11"], out)
    run_cli(["--paths", "300", "horizons", "--y0-list=-0.25,0,0.25", "--bins", "15"], out)

    trades = out / "trades.csv"
    rng = np.random.default_rng(6)
    with open(trades, "w") as fh:
        for k in range(20_000):
            fh.write(f"{k},{int(rng.choice([-1, 1]) * rng.integers(50, 3000))}\n")
    run_cli(["flow", "ewma", "--input", trades, "--beta-flow", "5e-5"], out)
    run_cli(["flow", "vpin", "--input", trades, "--bucket-volume", "25000",
             "--window", "20"], out)
    return out
