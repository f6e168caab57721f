import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LABELS, random_config, random_params
from fano3 import (
    EmptyGrid,
    LineShapeParams,
    MismatchedStructure,
    ModelConfig,
    PoleAtEnergy,
    curve,
    energy_grid,
    line_shape,
    line_shape_gamma_form,
    v_from_gamma,
)
from fano3.lineshape import InvalidGrid, fano_profile, one_channel_amplitude, reduced_detuning


@pytest.mark.parametrize("label", LABELS)
def test_gamma_form_agrees(label):
    rng = np.random.default_rng(11)
    for _ in range(20):
        config = random_config(rng, label)
        params = random_params(rng, config)
        eps = rng.uniform(-8, 8, 200)
        np.testing.assert_allclose(line_shape(config, params, eps), line_shape_gamma_form(config, params, eps),
                                   rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("label", LABELS)
def test_far_wings_tend_to_one(label):
    rng = np.random.default_rng(12)
    config = random_config(rng, label)
    params = random_params(rng, config)
    assert abs(line_shape(config, params, 1e7) - 1.0) < 1e-5
    assert abs(line_shape(config, params, -1e7) - 1.0) < 1e-5


@settings(max_examples=50, deadline=None)
@given(q=st.floats(-5, 5), e=st.floats(-50, 50))
def test_fano_profile_bounds(q, e):
    r = fano_profile(e, q)
    assert -1e-12 <= r <= 1 + q * q + 1e-9


def test_one_channel_without_g_is_plain_fano():
    # g -> 0 with the dark level far away leaves the single-level profile
    config = ModelConfig("vee", "upper", {1: 0.0, 2: 1e9}, {1: v_from_gamma(0.4)}, 1e-12)
    params = LineShapeParams({1: 1.7}, 0.0)
    eps = np.linspace(-3, 3, 301)
    np.testing.assert_allclose(line_shape(config, params, eps), fano_profile(reduced_detuning(config, eps, 1), 1.7),
                               atol=1e-8)


def test_transparency_zero_at_dressed_energies_needs_zero_q_and_vc():
    amp = one_channel_amplitude(0.3, -0.2, 0.25, 0.0, 0.0, 0.0)
    assert amp != 0.0
    d_dark, g = 0.5, 0.3
    assert one_channel_amplitude(d_dark, g * g / d_dark, 0.25, g, 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_singular_point_is_a_gap():
    config = ModelConfig("lambda", "middle", {1: 0.0, 3: 0.0}, {3: 0.2}, 0.0)
    params = LineShapeParams({3: 1.0}, 0.0)
    with pytest.raises(PoleAtEnergy):
        line_shape(config, params, 0.0)
    c = curve(config, params, np.array([-1.0, 0.0, 1.0]))
    assert c.gaps == 1 and np.isnan(c.r_values[1])


def test_params_are_checked_against_layout():
    two = ModelConfig("lambda", "upper", {1: 0, 2: 1}, {1: 0.1, 2: 0.1})
    one = ModelConfig("lambda", "middle", {1: 0, 3: 1}, {3: 0.1}, 0.2)
    with pytest.raises(MismatchedStructure):
        line_shape(two, LineShapeParams({1: 1.0}), 0.3)
    with pytest.raises(MismatchedStructure):
        line_shape(two, LineShapeParams({1: 1.0, 2: 0.0}, 0.1), 0.3)
    with pytest.raises(MismatchedStructure):
        line_shape(one, LineShapeParams({3: 1.0}), 0.3)
    assert LineShapeParams.from_raw({"q": 2.0, "v_c": 0.1}, one).q == {3: 2.0}


def test_energy_grid():
    g = energy_grid(-1, 1, 0.25)
    assert g.size == 9 and g[0] == -1 and g[-1] == 1
    with pytest.raises(InvalidGrid):
        energy_grid(0, 1, 0.3)
    with pytest.raises(InvalidGrid):
        energy_grid(1, 0, 0.1)


def test_curve_rejects_bad_grids():
    config = ModelConfig("vee", "lower", {2: 0, 3: 1}, {2: 0.1, 3: 0.1})
    params = LineShapeParams({2: 0.0, 3: 0.0})
    with pytest.raises(EmptyGrid):
        curve(config, params, [])
    with pytest.raises(InvalidGrid):
        curve(config, params, [0.0, 0.0])


def test_curve_carries_densities():
    config = ModelConfig("cascade", "lower", {2: 0.0, 3: -1.0}, {2: v_from_gamma(0.4)}, 0.2)
    c = curve(config, LineShapeParams({2: 1.0}, 0.1), np.linspace(-2, 2, 41))
    assert set(c.prob_densities) == {2, 3}
    assert all(np.all(p >= 0) for p in c.prob_densities.values())
    assert c.meta["config"]["kind"] == "cascade"
    assert math.isfinite(c.r_values.sum())
