from pathlib import Path

import numpy as np
import pytest

import fig1
import fig2
import fig3
import fig4
import fig5
import fig6
import figlib


def spec(fid, inputs, out):
    return figlib.FigureSpec(fid, tuple(str(p) for p in inputs), Path(out))


ALL_FIGURES = [
    ("fig1", fig1, ["myopic_trajectories.csv"]),
    ("fig2", fig2, ["trajectories.csv"]),
    ("fig3", fig3, ["horizon_curve.csv", "horizon_tstar.csv"]),
    ("fig4", fig4, ["rates.csv"]),
    ("fig5", fig5, ["horizon_hist.csv", "horizon_scatter.csv"]),
    ("fig6", fig6, ["imbalance.csv", "vpin.csv"]),
]


@pytest.mark.parametrize("fid,module,inputs", ALL_FIGURES)
def test_renders_from_cli_outputs(fid, module, inputs, data_dir, tmp_path):
    out = tmp_path / f"{fid}.png"
    result = module.render(spec(fid, [data_dir / i for i in inputs], out))
    assert result.exists()
    assert result.stat().st_size > 5_000


@pytest.mark.parametrize("fid,module,inputs", ALL_FIGURES)
def test_rendering_is_deterministic(fid, module, inputs, data_dir, tmp_path):
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    module.render(spec(fid, [data_dir / i for i in inputs], a))
    module.render(spec(fid, [data_dir / i for i in inputs], b))
    assert a.read_bytes() == b.read_bytes()


def test_fig1_quadratic_curve_touches_zero_at_t_hat(data_dir, tmp_path):
    data = figlib.read_csv(data_dir / "myopic_trajectories.csv", required=("kind", "t", "x"))
    mask = data["kind"] == "MQ"
    t, x = data["t"][mask], data["x"][mask]
    sample_spacing = np.diff(t).max()
    first_zero = t[np.argmax(x <= 1e-12)]
    t_hat = 2.0 * np.sqrt(3.0) / np.sqrt(2.0)  # 2.449...
    assert abs(first_zero - t_hat) <= sample_spacing + 1e-12
    out = tmp_path / "fig1.png"
    fig1.render(spec("fig1", [data_dir / "myopic_trajectories.csv"], out))
    assert out.exists()


def test_fig3_marks_interior_minima(data_dir):
    stars = figlib.read_csv(data_dir / "horizon_tstar.csv", required=("y", "t_star"))
    curve = figlib.read_csv(data_dir / "horizon_curve.csv", required=("y", "T", "u"))
    assert np.all(stars["t_star"] > curve["T"].min())
    assert np.all(stars["t_star"] < curve["T"].max())


def test_fig6_series_within_bounds(data_dir):
    vp = figlib.read_csv(data_dir / "vpin.csv", required=("l", "I_tilde", "vpin"))
    assert np.all(vp["vpin"] >= 0.0) and np.all(vp["vpin"] <= 1.0)
    ewma = figlib.read_csv(data_dir / "imbalance.csv", required=("k", "I"))
    assert np.all(np.abs(ewma["I"]) <= 1.0)


def test_missing_column_is_reported(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    out = tmp_path / "out.png"
    with pytest.raises(figlib.SchemaError, match="kind"):
        fig1.render(spec("fig1", [bad], out))
    assert not out.exists()


def test_empty_csv_writes_nothing(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("kind,t,x,alpha\n")
    out = tmp_path / "out.png"
    with pytest.raises(figlib.SchemaError, match="no data rows"):
        fig1.render(spec("fig1", [empty], out))
    assert not out.exists()
    missing = tmp_path / "nothere.csv"
    with pytest.raises(figlib.SchemaError, match="no such file"):
        fig1.render(spec("fig1", [missing], out))


def test_script_entry_points(data_dir, tmp_path):
    out = tmp_path / "cli_fig1.png"
    fig1.main([str(data_dir / "myopic_trajectories.csv"), "--out", str(out)])
    assert out.exists()
    out6 = tmp_path / "cli_fig6.png"
    fig6.main([str(data_dir / "imbalance.csv"), str(data_dir / "vpin.csv"),
               "--out", str(out6)])
    assert out6.exists()
