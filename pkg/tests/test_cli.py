import json
import subprocess
import sys

import numpy as np
import pytest

from fano3 import (
    LineShapeParams,
    ModelConfig,
    read_curve,
    synthetic_spectrum,
    v_from_gamma,
    write_config,
    write_spectrum,
)
from fano3.cli import main, run_verify
from fano3.model import normalization_residual

CONFIG = ModelConfig("lambda", "middle", {1: -1.0, 3: 0.0}, {3: v_from_gamma(0.4)}, 0.2)
PARAMS = LineShapeParams({3: 2.0}, 0.1)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.json"
    write_config(path, CONFIG, PARAMS)
    return path


def test_eval_writes_curve(tmp_path, config_file, capsys):
    out = tmp_path / "curve.csv"
    assert main(["eval", "--config", str(config_file), "--grid", "-2:2:0.01", "--out", str(out)]) == 0
    c = read_curve(out)
    assert c.grid.size == 401 and set(c.prob_densities) == {1, 3}
    assert "lambda-middle" in capsys.readouterr().out


def test_negative_grid_bounds_parse(tmp_path, config_file):
    # a leading minus must not be taken for an option
    out = tmp_path / "curve.csv"
    assert main(["eval", "--config", str(config_file), "--grid", "-2:2:0.5", "--out", str(out)]) == 0
    assert read_curve(out).grid[0] == -2.0
    assert main(["eval", "--config", str(config_file), "--grid=-2:2:0.5", "--out", str(out)]) == 0


def test_probs(tmp_path, config_file, capsys):
    out = tmp_path / "p.csv"
    assert main(["probs", "--config", str(config_file), "--grid", "-3:3:0.01", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "level 1" in text and "level 3" in text
    assert out.read_text().splitlines()[0] == "epsilon,p_1,p_3"


def test_verify_passes(config_file, capsys):
    assert main(["verify", "--config", str(config_file), "--samples", "500"]) == 0
    assert "max_residual" in capsys.readouterr().out


def test_verify_catches_a_corrupted_identity():
    worst, _ = run_verify(CONFIG, 200, residual=lambda c, e: normalization_residual(c, e) + 1e-6)
    assert worst > 1e-10
    worst, poles = run_verify(CONFIG, 200)
    assert worst < 1e-10 and poles == 0


def test_oracle(config_file, capsys):
    assert main(["oracle", "--config", str(config_file), "--bins", "2000", "--span", "-30.5:29.5"]) == 0
    assert capsys.readouterr().out.startswith("PASS")
    assert main(["oracle", "--config", str(config_file), "--bins", "200", "--span", "-30.5:29.5",
                 "--tol", "1e-6"]) == 1


def test_oracle_span_too_narrow(config_file, capsys):
    assert main(["oracle", "--config", str(config_file), "--bins", "200", "--span", "-2:2"]) == 1
    assert "SpanTooNarrow" in capsys.readouterr().err


def test_sweep_and_presets(tmp_path, capsys):
    assert main(["sweep", "--preset", "fig6b", "--out", str(tmp_path)]) == 0
    assert len(list(tmp_path.glob("fig6b_*.csv"))) == 4
    capsys.readouterr()
    assert main(["presets", "list"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 18
    assert main(["presets", "show", "fig9c"]) == 0
    assert json.loads(capsys.readouterr().out)["fixed"] == {"2": 0.1}
    out = tmp_path / "fig4b.json"
    assert main(["presets", "config", "fig4b", "--curve", "2", "--out", str(out)]) == 0
    record = json.loads(out.read_text())
    assert record["lineshape"]["q"] == {"3": 2.0}
    assert main(["sweep", "--preset", "fig99", "--out", str(tmp_path)]) == 1
    assert "UnknownPreset" in capsys.readouterr().err


def test_fit_round_trip(tmp_path, capsys):
    spectrum = synthetic_spectrum(CONFIG, PARAMS, np.linspace(-5, 5, 400), noise=0.01, rng=3)
    write_spectrum(spectrum, tmp_path / "s.csv")
    start = ModelConfig("lambda", "middle", {1: -1.2, 3: 0.1}, {3: v_from_gamma(0.5)}, 0.25)
    write_config(tmp_path / "init.json", start, LineShapeParams({3: 1.5}, 0.12))
    out = tmp_path / "fit.json"
    code = main(["fit", "--data", str(tmp_path / "s.csv"), "--model", "lambda-middle",
                 "--init", str(tmp_path / "init.json"), "--out", str(out)])
    assert code == 0
    body = json.loads(out.read_text())
    assert body["converged"] and abs(body["best_params"]["e1"] + 1.0) < 0.05
    assert "residual_norm" in capsys.readouterr().out


def test_fit_model_mismatch(tmp_path, config_file, capsys):
    (tmp_path / "s.csv").write_text("epsilon,value\n" + "\n".join(f"{x},{x * x}" for x in range(20)))
    code = main(["fit", "--data", str(tmp_path / "s.csv"), "--model", "vee-upper", "--init", str(config_file)])
    assert code == 1
    assert "MismatchedStructure" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--config", "x.json", "--grid", "0:1", "--out", "y"],
        ["eval", "--config", "x.json", "--grid", "1:0:0.1", "--out", "y"],
        ["verify", "--config", "x.json", "--samples", "0"],
        ["frobnicate"],
        ["presets", "show"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "UsageError" in capsys.readouterr().err


def test_missing_file_is_io_failure(tmp_path, capsys):
    assert main(["verify", "--config", str(tmp_path / "nope.json")]) == 1
    assert "IoFailure" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fano3", "presets", "list"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert len(proc.stdout.strip().splitlines()) == 18


def test_eval_fig4a_grid_has_2001_points(tmp_path):
    assert main(["presets", "config", "fig4a", "--out", str(tmp_path / "c.json")]) == 0
    out = tmp_path / "c.csv"
    assert main(["eval", "--config", str(tmp_path / "c.json"), "--grid", "-10:10:0.01", "--out", str(out)]) == 0
    assert read_curve(out).grid.size == 2001


def test_both_gamma_and_v_names_the_channel(tmp_path, capsys):
    record = CONFIG.to_dict()
    record["couplings"] = {"3": {"V": 0.25, "gamma": 0.4}}
    (tmp_path / "c.json").write_text(json.dumps(record))
    assert main(["verify", "--config", str(tmp_path / "c.json")]) == 1
    assert "channel 3" in capsys.readouterr().err


def test_verify_single_sample(config_file):
    assert main(["verify", "--config", str(config_file), "--samples", "1"]) == 0


def test_oracle_fig4a_example(tmp_path):
    assert main(["presets", "config", "fig4a", "--out", str(tmp_path / "c.json")]) == 0
    base = ["oracle", "--config", str(tmp_path / "c.json")]
    assert main(base + ["--bins", "2000", "--span", "-20:21", "--tol", "0.05"]) == 0
    assert main(base + ["--bins", "50", "--span", "-20:21", "--tol", "1e-6"]) == 1


def test_verify_fails_on_a_corrupted_closed_form(config_file, monkeypatch, capsys):
    from fano3 import model

    honest = model._probabilities
    monkeypatch.setattr(model, "_probabilities", lambda t: {n: 1.001 * p for n, p in honest(t).items()})
    assert main(["verify", "--config", str(config_file)]) == 1
    assert "CheckFailed" in capsys.readouterr().err
