"""End-to-end tests of the fcreg commands"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from src.fcreg.cli import main
from src.fcreg.fgrid import FnSeries, Grid, LinOp
from src.fcreg.fileio import load_operator, read_series, write_fn, write_frame, write_operator, write_series
from src.fcreg.regress import fit
from src.fcreg.schemas import FitConfig, RunConfig


@pytest.fixture
def toy_panel(tmp_path, rng):
    path = tmp_path / "panel.csv"
    lines = []
    for t in range(12):
        sample = rng.normal(loc=0.05 * t, scale=1.0, size=60 + t)
        lines.append(",".join(repr(float(v)) for v in sample))
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def regression_files(tmp_path, random_walk_series, rng):
    s = np.array(random_walk_series.grid.nodes)
    slope = LinOp(random_walk_series.grid, random_walk_series.grid, np.outer(np.cos(s), s))
    y = random_walk_series.map(slope) + 0.1 * rng.standard_normal(random_walk_series.values.shape)
    x_path, y_path = tmp_path / "x.csv", tmp_path / "y.csv"
    write_series(random_walk_series, x_path)
    write_series(y, y_path)
    return x_path, y_path


class TestArtifactFiles:
    def test_series_round_trip_is_exact(self, tmp_path, rng):
        series = FnSeries(Grid(0.0, 1.0, 5), np.vstack([np.arange(5) / 3, rng.standard_normal(5)]))
        path = write_series(series, tmp_path / "series.csv")
        assert "np.float64" not in path.read_text()
        loaded = read_series(path)
        assert loaded.grid == series.grid
        np.testing.assert_array_equal(loaded.values, series.values)

    def test_operator_round_trip_is_exact(self, tmp_path, small_grid, rng):
        op = LinOp(small_grid, small_grid, rng.standard_normal((small_grid.n, small_grid.n)) / 7)
        loaded = load_operator(write_operator(op, tmp_path / "op.csv"))
        assert loaded.domain == op.domain and loaded.codomain == op.codomain
        np.testing.assert_array_equal(loaded.kernel, op.kernel)

    def test_frames_keep_numeric_columns(self, tmp_path):
        frame = pd.DataFrame({"d0": [2, 1], "statistic": np.array([812.3, 1 / 3]), "p_value": [0.0, np.nan]})
        loaded = pd.read_csv(write_frame(frame, tmp_path / "frame.csv"))
        assert all(pd.api.types.is_numeric_dtype(loaded[c]) for c in loaded.columns)
        assert loaded["statistic"].iloc[1] == 1 / 3
        assert np.isnan(loaded["p_value"].iloc[1])


class TestIngest:
    def test_writes_densities(self, toy_panel, tmp_path):
        out = tmp_path / "ingest"
        code = main(["ingest-density", "--set", f"panel_path={toy_panel}", "--set", "grid_n=41",
                     "--output-dir", str(out)])
        assert code == 0
        densities = read_series(out / "densities.csv")
        clrs = read_series(out / "clr.csv")
        assert densities.T == 12 and densities.grid.n == 41
        np.testing.assert_allclose(densities.values @ densities.grid.weights, 1.0, atol=1e-8)
        np.testing.assert_allclose(clrs.values @ clrs.grid.weights, 0.0, atol=1e-8)
        provenance = yaml.safe_load((out / "provenance.yaml").read_text())
        assert provenance["periods"] == 12
        assert len(provenance["bandwidths"]) == 12
        resolved = yaml.safe_load((out / "resolved_config.yaml").read_text())
        assert resolved["grid_n"] == 41 and resolved["command"] == "ingest-density"

    def test_empty_period_is_a_data_error(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("1.0,2.0,3.0\n\n4.0,5.0\n")
        code = main(["ingest-density", "--set", f"panel_path={path}", "--output-dir", str(tmp_path / "out")])
        assert code == 3

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("1.0,2.0,abc\n4.0,5.0\n")
        code = main(["ingest-density", "--set", f"panel_path={path}", "--output-dir", str(tmp_path / "out")])
        assert code == 3


class TestConfigErrors:
    def test_unknown_key(self, regression_files, tmp_path):
        x_path, _ = regression_files
        code = main(["vr-test", "--set", f"x_path={x_path}", "--set", "bogus=1", "--output-dir", str(tmp_path)])
        assert code == 2

    def test_d_max_above_ell(self, regression_files, tmp_path):
        x_path, _ = regression_files
        code = main(["vr-test", "--set", f"x_path={x_path}", "--set", "d_max=6", "--set", "ell=5",
                     "--output-dir", str(tmp_path)])
        assert code == 2

    def test_missing_input(self, tmp_path):
        code = main(["vr-test", "--set", f"x_path={tmp_path / 'absent.csv'}", "--output-dir", str(tmp_path)])
        assert code == 2

    def test_nested_config_file(self, tmp_path):
        config = tmp_path / "run.yaml"
        config.write_text("estimate:\n  kappa: 1\n")
        code = main(["simulate", "--config", str(config), "--output-dir", str(tmp_path)])
        assert code == 2


class TestEstimate:
    def test_artifacts_reload(self, regression_files, tmp_path):
        x_path, y_path = regression_files
        out = tmp_path / "fit"
        code = main(["estimate", "--set", f"x_path={x_path}", "--set", f"y_path={y_path}",
                     "--set", "d_N=2", "--set", "K=5", "--output-dir", str(out)])
        assert code == 0
        expected = fit(read_series(x_path), read_series(y_path), FitConfig(kappa=1, d_N=2, K=5))
        for name, op in (("f_N", expected.f_N), ("f_S", expected.f_S), ("f_total", expected.f_total)):
            loaded = load_operator(out / f"{name}.csv")
            assert loaded.domain == op.domain
            np.testing.assert_allclose(loaded.kernel, op.kernel, rtol=0, atol=1e-12)
        metadata = yaml.safe_load((out / "metadata.yaml").read_text())
        assert (metadata["d_N"], metadata["K"], metadata["K_S"]) == (2, 5, 3)
        assert metadata["d_N_source"] == "config"
        eigen = pd.read_csv(out / "eigen.csv")
        assert list(eigen.columns) == ["index", "eigenvalue", "scaled"]
        assert read_series(out / "residuals.csv").T == expected.T

    def test_band(self, regression_files, random_walk_series, tmp_path):
        x_path, y_path = regression_files
        zeta_path = tmp_path / "zeta.csv"
        write_fn(random_walk_series.grid.evaluate(lambda s: np.sin(2 * np.pi * s)), zeta_path)
        out = tmp_path / "fit"
        code = main(["estimate", "--set", f"x_path={x_path}", "--set", f"y_path={y_path}",
                     "--set", "d_N=2", "--set", "K=5", "--set", "band=true",
                     "--set", f"zeta_path={zeta_path}", "--set", "breakpoints=[0.0, 0.5, 1.0]",
                     "--output-dir", str(out)])
        assert code == 0
        band = pd.read_csv(out / "band.csv")
        assert len(band) == 2
        assert (band["ci_low"] <= band["ci_high"]).all()

    def test_length_mismatch(self, regression_files, random_walk_series, tmp_path, caplog):
        x_path, _ = regression_files
        short = tmp_path / "short.csv"
        write_series(random_walk_series.slice(0, 60), short)
        code = main(["estimate", "--set", f"x_path={x_path}", "--set", f"y_path={short}",
                     "--set", "d_N=2", "--set", "K=5", "--output-dir", str(tmp_path / "fit")])
        assert code == 3
        assert "different lengths" in caplog.text


class TestVrTest:
    def test_report(self, regression_files, tmp_path, null_cache):
        x_path, _ = regression_files
        out = tmp_path / "vr"
        code = main(["vr-test", "--set", f"x_path={x_path}", "--set", "ell=3", "--set", "d_max=2",
                     "--set", "null_draws=1000", "--set", "bm_steps=100", "--output-dir", str(out)])
        assert code == 0
        report = pd.read_csv(out / "vr_report.csv")
        assert list(report["d0"]) == [2, 1]
        assert report["p_value"].between(0, 1).all()


class TestShock:
    def test_moments_per_scale(self, toy_panel, tmp_path):
        ingest = tmp_path / "ingest"
        assert main(["ingest-density", "--set", f"panel_path={toy_panel}", "--set", "grid_n=41",
                     "--output-dir", str(ingest)]) == 0
        grid = read_series(ingest / "densities.csv").grid
        fit_dir = tmp_path / "fit"
        fit_dir.mkdir()
        write_operator(LinOp(grid, grid, 0.5 * np.diag(1.0 / grid.weights)), fit_dir / "f_total.csv")

        out = tmp_path / "shock"
        code = main(["shock", "--set", f"fit_dir={fit_dir}", "--set", f"densities_path={ingest / 'densities.csv'}",
                     "--set", "shock=endpoints", "--set", "shock_width=3", "--set", "q_list=[0.0, 1.0, 2.0]",
                     "--output-dir", str(out)])
        assert code == 0
        moments = pd.read_csv(out / "shock_moments.csv")
        assert list(moments["q"]) == [0.0, 1.0, 2.0]
        # later periods sit to the right, so a positive shock moves the mean up
        assert moments["mean"].is_monotonic_increasing
        curves = read_series(out / "shock_densities.csv")
        assert curves.T == 3
        np.testing.assert_allclose(curves.values @ curves.grid.weights, 1.0, atol=1e-8)

    def test_file_shock_needs_zeta(self, tmp_path):
        fit_dir = tmp_path / "fit"
        fit_dir.mkdir()
        densities = tmp_path / "densities.csv"
        densities.write_text("0.0,1.0\n1.0,1.0\n")
        code = main(["shock", "--set", f"fit_dir={fit_dir}", "--set", f"densities_path={densities}",
                     "--set", "shock=file", "--output-dir", str(tmp_path / "out")])
        assert code == 2


class TestSimulate:
    def test_smoke(self, tmp_path):
        out = tmp_path / "sim"
        code = main(["simulate", "--set", "reps=50", "--set", "T_values=[100]", "--set", "scales=[0]",
                     "--set", "kappas=[1]", "--set", "designs=[exponential]", "--set", "metrics=[hs_error]",
                     "--set", "J_trunc=25", "--set", "sim_grid_n=101", "--set", "calib_reps=50",
                     "--output-dir", str(out)])
        assert code == 0
        table = pd.read_csv(out / "table.csv")
        assert len(table) == 1
        assert table["value"].iloc[0] > 0


SMALL_SIMULATION = ["--set", "reps=50", "--set", "T_values=[100]", "--set", "scales=[50]", "--set", "kappas=[0, 1]",
                    "--set", "designs=[sparse]", "--set", "J_trunc=25", "--set", "sim_grid_n=101",
                    "--set", "calib_reps=50"]


class TestReruns:
    def test_simulate_from_resolved_config(self, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["simulate", *SMALL_SIMULATION, "--output-dir", str(first)]) == 0
        assert main(["simulate", "--config", str(first / "resolved_config.yaml"), "--output-dir", str(second)]) == 0
        assert (first / "table.csv").read_bytes() == (second / "table.csv").read_bytes()

    def test_estimate_from_resolved_config(self, regression_files, tmp_path):
        x_path, y_path = regression_files
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["estimate", "--set", f"x_path={x_path}", "--set", f"y_path={y_path}", "--set", "d_N=2",
                     "--set", "K=5", "--output-dir", str(first)]) == 0
        assert main(["estimate", "--config", str(first / "resolved_config.yaml"), "--output-dir", str(second)]) == 0
        for name in ("f_N.csv", "f_S.csv", "f_total.csv", "intercept.csv", "residuals.csv", "eigen.csv",
                     "metadata.yaml"):
            assert (first / name).read_bytes() == (second / name).read_bytes()


def test_shipped_defaults_match_the_schema():
    shipped = yaml.safe_load((Path(__file__).parents[1] / "config" / "default.yaml").read_text())
    defaults = RunConfig(command="simulate").model_dump()
    for key, value in shipped.items():
        assert defaults[key] == value, key
