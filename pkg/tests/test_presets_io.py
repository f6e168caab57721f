import json
from pathlib import Path

import numpy as np
import pytest

from fano3 import (
    IoFailure,
    LineShapeParams,
    MalformedFile,
    ModelConfig,
    UnknownPreset,
    read_config,
    read_curve,
    read_spectrum,
    write_config,
    write_curve,
    write_spectrum,
)
from fano3.fit import Spectrum
from fano3.lineshape import curve
from fano3.presets import PRESETS, preset, preset_names, run_preset

CAPTIONS = json.loads((Path(__file__).parent / "data" / "captions.json").read_text())


def test_eighteen_presets_in_order():
    names = preset_names()
    assert len(names) == 18
    assert names == sorted(names)


def _matches(d, cap):
    return (
        f"{d['kind']}-{d['position']}" == cap["layout"]
        and d["gammas"] == {k: float(v) for k, v in cap["gammas"].items()}
        and (d["g"], d["v_c"]) == (cap["g"], cap["v_c"])
        and d["fixed"] == {k: float(v) for k, v in cap["held"].items()}
        and d["q"] == [{k: float(v) for k, v in q.items()} for q in cap["q"]]
    )


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_matches_caption(name):
    assert _matches(PRESETS[name].to_dict(), CAPTIONS[name])


@pytest.mark.parametrize(
    "change",
    [{"v_c": 0.3}, {"g": 0.1}, {"held": {"3": 0.1}}, {"layout": "vee-middle"}, {"gammas": {"3": 0.5}},
     {"q": [{"3": 0}, {"3": 1}, {"3": 2}]}],
)
def test_caption_comparison_detects_a_change(change):
    assert not _matches(PRESETS["fig5b"].to_dict(), dict(CAPTIONS["fig5b"], **change))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_held_detuning_is_reproduced(name):
    p = preset(name)
    config = p.config()
    # at eps = 0 the scanned detuning vanishes and the held one equals its caption value
    assert config.bound_energies[p.swept_level] == 0.0
    assert 0.0 - config.bound_energies[p.fixed_level] == p.fixed_detuning


def test_run_preset_shapes():
    curves = run_preset("fig8c")
    assert len(curves) == 4
    assert all(c.grid.size == 2001 for c in curves)
    assert [c.meta["curve"] for c in curves] == [0, 1, 2, 3]
    with pytest.raises(UnknownPreset):
        preset("fig10a")


def test_curve_round_trip_is_exact(tmp_path):
    config = ModelConfig("lambda", "middle", {1: -1.0, 3: 0.0}, {3: 0.25}, 0.2)
    c = curve(config, LineShapeParams({3: 2.0}, 0.1), np.linspace(-1.0, 1.0, 201))
    path = tmp_path / "c.csv"
    write_curve(c, path)
    back = read_curve(path)
    assert np.array_equal(back.grid, c.grid)
    np.testing.assert_array_equal(back.r_values, c.r_values)
    for n in c.prob_densities:
        np.testing.assert_array_equal(back.prob_densities[n], c.prob_densities[n])
    assert back.meta == json.loads(json.dumps(c.meta))


def test_curve_gap_round_trip(tmp_path):
    config = ModelConfig("lambda", "middle", {1: 0.0, 3: 0.0}, {3: 0.2}, 0.0)
    c = curve(config, LineShapeParams({3: 1.0}, 0.0), np.array([-1.0, 0.0, 1.0]))
    write_curve(c, tmp_path / "g.csv")
    assert read_curve(tmp_path / "g.csv").gaps == 1


def test_config_round_trip(tmp_path):
    config = ModelConfig("vee", "lower", {2: 0.5, 3: -1.0}, {2: 0.2, 3: 0.3})
    params = LineShapeParams({2: 1.0, 3: -0.5})
    write_config(tmp_path / "c.json", config, params)
    assert read_config(tmp_path / "c.json") == (config, params)


def test_spectrum_round_trip(tmp_path):
    s = Spectrum(np.array([0.0, 0.1, 0.2]), np.array([1.0, 0.5, 0.25]), 0.01)
    write_spectrum(s, tmp_path / "s.csv")
    back = read_spectrum(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.values, s.values)
    np.testing.assert_array_equal(back.sigma, s.sigma)


@pytest.mark.parametrize(
    "text",
    [
        "eps,R\n0,1\n",
        "#meta: {bad json\nepsilon,R\n0,1\n",
        "epsilon,R\n0,1,2\n",
        "epsilon,R\n1,1\n0,1\n",
        "epsilon,R\n0,abc\n",
        "epsilon,R\n",
    ],
)
def test_malformed_curves(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(MalformedFile):
        read_curve(path)


def test_missing_files(tmp_path):
    with pytest.raises(IoFailure):
        read_curve(tmp_path / "nope.csv")
    with pytest.raises(IoFailure):
        write_curve(run_preset("fig4a")[0], tmp_path / "no" / "dir" / "x.csv")
    (tmp_path / "c.json").write_text("{")
    with pytest.raises(MalformedFile):
        read_config(tmp_path / "c.json")
