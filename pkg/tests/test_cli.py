import numpy as np
import pandas as pd
import pytest

from src.main import main
from src.pde.fields import FieldTX
from src.pde.grid import Grid


@pytest.fixture
def price_csv(tmp_path, rng):
    path = tmp_path / "prices.csv"
    steps = 5000
    prices = 100.0 + np.cumsum(0.5 * rng.standard_normal(steps))
    pd.DataFrame({'timestamp': np.arange(steps) * 0.01, 'value': prices}).to_csv(path, index=False)
    return str(path)


def run_args(out_dir, *extra):
    return ["--paths", "2000", "--steps", "20", "--seed", "3", "--out", str(out_dir), *extra]


def test_fit_writes_model(price_csv, tmp_path, capsys):
    model = tmp_path / "model.csv"
    assert main(["fit", price_csv, "--bins", "10", "--out", str(model)]) == 0
    assert model.exists()
    assert "Fitted model saved" in capsys.readouterr().out


def test_solve_with_fitted_model(price_csv, tmp_path):
    model = tmp_path / "model.csv"
    main(["fit", price_csv, "--bins", "10", "--out", str(model)])
    out = tmp_path / "solve"
    code = main(["solve", "--model", str(model), "--constraint", "mean(shift=+5%)", *run_args(out)])
    assert code == 0
    assert (out / "manifest.json").exists()
    assert (out / "fitted_model.csv").exists()


def test_solve_converges(tmp_path, capsys):
    out = tmp_path / "solve"
    code = main(["solve", "--model", "brownian", "--constraint", "mean(target=0.2)",
                 "--constraint", "var(level=0.5,quantile=0)", *run_args(out)])
    assert code == 0
    assert "converged" in capsys.readouterr().out
    assert (out / "hist_X_T.csv").exists()


def test_not_converged_exit_code(tmp_path):
    code = main(["solve", "--model", "ou", "--constraint", "var(level=0.9,shift=+10%)",
                 "--tol", "1e-30", *run_args(tmp_path)])
    assert code == 2


def test_infeasible_exit_code(tmp_path, capsys):
    code = main(["solve", "--constraint", "mean(target=50)", *run_args(tmp_path)])
    assert code == 3
    assert capsys.readouterr().err.startswith("Error: [mc engine]")


def test_input_error_exit_code(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 4
    assert main(["solve", "--constraint", "var(0.9)", *run_args(tmp_path)]) == 4
    assert "Error:" in capsys.readouterr().err


def test_simulate_writes_terminal_states(tmp_path):
    assert main(["simulate", "--model", "ou", "--paths", "100", "--steps", "10", "--out", str(tmp_path)]) == 0
    table = pd.read_csv(tmp_path / "terminal_states.csv")
    assert list(table.columns) == ["block", "row", "x0"]
    assert len(table) == 100


def test_simulate_under_grid_tilt(tmp_path):
    grid = Grid(-8.0, 8.0, 17, 10, 1.0)
    tilt = FieldTX(np.full(grid.shape, -1.0), grid, "lambda").to_csv(str(tmp_path / "lambda_grid.csv"))
    out = tmp_path / "tilted"
    assert main(["simulate", "--model", "brownian", "--tilt", tilt, *run_args(out)]) == 0
    table = pd.read_csv(out / "terminal_states.csv")
    assert "log_density" in table.columns
    assert table["x0"].mean() == pytest.approx(1.0, abs=0.1)


def test_simulate_rejects_other_fields(tmp_path):
    grid = Grid(-8.0, 8.0, 17, 10, 1.0)
    drift = FieldTX(np.zeros(grid.shape), grid, "drift").to_csv(str(tmp_path / "drift_grid.csv"))
    assert main(["simulate", "--tilt", drift, *run_args(tmp_path)]) == 4


def test_report_with_plots(tmp_path):
    code = main(["report", "--model", "brownian", *run_args(tmp_path)])
    assert code == 0
    assert (tmp_path / "manifest.json").exists()
    assert main(["report", "--model", "brownian", "--plots", *run_args(tmp_path / "plots")]) == 0
    assert (tmp_path / "plots" / "figures" / "hist_X_T.png").exists()
