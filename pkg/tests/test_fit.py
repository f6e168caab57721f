import math

import numpy as np
import pytest

from fano3 import (
    FitProblem,
    LineShapeParams,
    MismatchedStructure,
    ModelConfig,
    NotConverged,
    Spectrum,
    equivalent,
    jacobian,
    rational_start,
    residuals,
    solve,
    synthetic_spectrum,
    v_from_gamma,
)
from fano3.fit import central_jacobian, model, pack, parameter_names
from fano3.lineshape import fano_profile

EPS = np.linspace(-5, 5, 400)
LAMBDA_UPPER = ModelConfig("lambda", "upper", {1: 0.0, 2: -1.0}, {1: v_from_gamma(0.5), 2: v_from_gamma(0.4)})
LU_PARAMS = LineShapeParams({1: 1.0, 2: 2.0})
CASCADE_UPPER = ModelConfig("cascade", "upper", {1: -1.0, 2: 0.0}, {2: v_from_gamma(0.4)}, 0.2)
CU_PARAMS = LineShapeParams({2: 2.0}, 0.1)


def test_parameter_names():
    assert parameter_names(CASCADE_UPPER) == ["e1", "e2", "gamma2", "g", "q2", "v_c", "A", "B"]
    assert parameter_names(LAMBDA_UPPER) == ["e1", "e2", "gamma1", "gamma2", "q1", "q2", "A", "B"]


def test_residual_zero_at_truth_and_grows_off_it():
    spectrum = synthetic_spectrum(CASCADE_UPPER, CU_PARAMS, EPS, scale=2.0, baseline=0.1)
    problem = FitProblem(CASCADE_UPPER, CU_PARAMS, 2.0, 0.1)
    theta = problem.theta0()
    assert np.max(np.abs(residuals(problem, spectrum, theta))) < 1e-13
    bumped = theta.copy()
    bumped[problem.free.index("q2")] += 0.1
    assert np.linalg.norm(residuals(problem, spectrum, bumped)) > 1e-2


def test_forward_jacobian_matches_central():
    spectrum = synthetic_spectrum(LAMBDA_UPPER, LU_PARAMS, EPS)
    problem = FitProblem(LAMBDA_UPPER, LineShapeParams({1: 1.2, 2: 1.7}), 1.1, 0.05)
    theta = problem.theta0()
    fwd = jacobian(problem, spectrum, theta)
    ctr = central_jacobian(problem, spectrum, theta)
    scale = np.maximum(np.abs(ctr).max(axis=0), 1.0)
    assert np.max(np.abs(fwd - ctr) / scale) < 1e-4


@pytest.mark.parametrize(
    "config, params",
    [(LAMBDA_UPPER, LU_PARAMS), (CASCADE_UPPER, CU_PARAMS)],
    ids=["two-channel", "one-channel"],
)
def test_noiseless_recovery_from_perturbed_start(config, params):
    spectrum = synthetic_spectrum(config, params, EPS, scale=1.5, baseline=-0.2)
    truth = pack(config, params, 1.5, -0.2)
    start = {k: v * 1.3 if v else 0.2 for k, v in truth.items()}
    lay = config.layout
    cfg = ModelConfig(config.kind, config.position, {n: start[f"e{n}"] for n in lay.bound},
                      {n: v_from_gamma(start[f"gamma{n}"]) for n in lay.channels}, start.get("g"))
    prm = LineShapeParams({n: start[f"q{n}"] for n in lay.channels}, start.get("v_c"))
    problem = FitProblem(cfg, prm)
    result = solve(problem, spectrum, n_starts=3)
    assert result.converged
    best = min(
        max(abs(result.best_params[p] - c[p]) / max(abs(c[p]), 1.0) for p in problem.free)
        for c in equivalent(problem, truth)
    )
    assert best < 1e-6
    assert result.residual_norm < 1e-8


def test_fixed_parameters_stay_put():
    spectrum = synthetic_spectrum(LAMBDA_UPPER, LU_PARAMS, EPS)
    problem = FitProblem(LAMBDA_UPPER, LineShapeParams({1: 1.0, 2: 1.5}), free=["q2"])
    result = solve(problem, spectrum, n_starts=1)
    assert result.free == ["q2"]
    assert result.best_params["q2"] == pytest.approx(2.0, abs=1e-8)
    assert result.best_params["e1"] == 0.0 and result.best_params["A"] == 1.0


def test_standard_errors_scale_with_noise():
    rng = np.random.default_rng(5)
    spectrum = synthetic_spectrum(LAMBDA_UPPER, LU_PARAMS, EPS, noise=0.01, rng=rng)
    result = solve(FitProblem(LAMBDA_UPPER, LU_PARAMS), spectrum, n_starts=1)
    se = result.standard_errors
    assert all(0 < s < 0.2 for s in se.values())
    # residual_norm is the rms weighted residual, so about one for a good fit
    assert 0.8 < result.residual_norm < 1.2


def test_constant_data_guard():
    spectrum = Spectrum(EPS, np.full(EPS.shape, 0.7))
    result = solve(FitProblem(CASCADE_UPPER, CU_PARAMS), spectrum)
    assert result.stop_reason == "constant-data"
    assert result.best_params["B"] == pytest.approx(0.7)
    assert result.best_params["A"] == 0.0
    assert math.isnan(result.best_params["q2"]) and "q2" in result.unidentifiable


def test_wrong_family_leaves_large_residual():
    # every family here is a squared quadratic over a quadratic's modulus, so a
    # genuinely wrong model needs more resonances than that can hold
    rng = np.random.default_rng(9)
    y = fano_profile((EPS + 3) / 0.2, 1.0) * fano_profile(EPS / 0.2, -2.0) * fano_profile((EPS - 3) / 0.2, 0.5)
    spectrum = Spectrum(EPS, y + rng.normal(0, 0.01, EPS.size), 0.01)
    result = solve(FitProblem(CASCADE_UPPER, CU_PARAMS), spectrum, n_starts=3)
    # reduced chi-square well above one flags the mismatch
    assert result.residual_norm > 3.0


def test_strict_raises_not_converged():
    spectrum = synthetic_spectrum(LAMBDA_UPPER, LU_PARAMS, EPS)
    problem = FitProblem(LAMBDA_UPPER, LineShapeParams({1: 0.3, 2: 0.4}), 2.0, 0.5)
    with pytest.raises(NotConverged) as info:
        solve(problem, spectrum, n_starts=1, max_iter=1, strict=True)
    assert not info.value.result.converged
    assert info.value.result.stop_reason == "max_iter"


def test_too_few_points():
    spectrum = synthetic_spectrum(LAMBDA_UPPER, LU_PARAMS, np.linspace(-1, 1, 5))
    with pytest.raises(MismatchedStructure):
        solve(FitProblem(LAMBDA_UPPER, LU_PARAMS), spectrum)


def test_problem_validation():
    with pytest.raises(MismatchedStructure):
        FitProblem(LAMBDA_UPPER, LU_PARAMS, free=["zeta"])
    with pytest.raises(MismatchedStructure):
        FitProblem(LAMBDA_UPPER, LU_PARAMS, free=[])
    with pytest.raises(MismatchedStructure):
        FitProblem(LAMBDA_UPPER, LU_PARAMS, bounds={"gamma1": (0.0, 1.0)})
    with pytest.raises(MismatchedStructure):
        Spectrum([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(MismatchedStructure):
        Spectrum([0.0, 1.0], [1.0, np.nan])


@pytest.mark.parametrize(
    "config, params",
    [
        (LAMBDA_UPPER, LineShapeParams({1: 1.5, 2: 1.5})),
        (CASCADE_UPPER, LineShapeParams({2: 2.0}, 0.0)),
        (CASCADE_UPPER, CU_PARAMS),
    ],
)
def test_equivalent_labellings_give_the_same_curve(config, params):
    problem = FitProblem(config, params, 1.3, 0.2)
    base = problem.full(problem.theta0())
    curves = []
    for values in equivalent(problem, base):
        theta = np.array([values[p] for p in problem.free])
        curves.append(model(problem, EPS, theta))
    assert len(curves) >= 2
    for c in curves[1:]:
        np.testing.assert_allclose(c, curves[0], rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("config, params", [(LAMBDA_UPPER, LU_PARAMS), (CASCADE_UPPER, CU_PARAMS)])
def test_rational_start_reads_parameters_off_clean_data(config, params):
    spectrum = synthetic_spectrum(config, params, EPS, scale=1.2, baseline=0.3)
    truth = pack(config, params, 1.2, 0.3)
    problem = FitProblem(config, params)
    guess = rational_start(problem, spectrum)
    assert guess is not None
    err = min(max(abs(guess[p] - c[p]) for p in problem.free) for c in equivalent(problem, truth))
    assert err < 1e-4


def test_two_channel_family_absorbs_one_channel_data():
    # a cascade-lower curve is also a lambda-upper curve: same rational family
    rng = np.random.default_rng(1)
    xl = ModelConfig("cascade", "lower", {2: 0.0, 3: -1.0}, {2: v_from_gamma(0.4)}, 0.2)
    data = synthetic_spectrum(xl, LineShapeParams({2: 2.0}, 0.1), EPS, noise=0.01, rng=rng)
    result = solve(FitProblem(LAMBDA_UPPER, LineShapeParams({1: 1.0, 2: 1.0})), data, n_starts=3)
    assert result.residual_norm < 1.2


def test_fixed_parameter_has_no_jacobian_column():
    spectrum = synthetic_spectrum(LAMBDA_UPPER, LU_PARAMS, EPS)
    problem = FitProblem(LAMBDA_UPPER, LU_PARAMS, free=["q1", "A"])
    assert jacobian(problem, spectrum, problem.theta0()).shape == (EPS.size, 2)


def test_zero_jacobian_column_is_flagged_unidentifiable():
    # v_c enters only through g * v_c, so at g = 0 its column vanishes
    config = ModelConfig("vee", "upper", {1: 0.0, 2: -1.0}, {1: v_from_gamma(0.4)}, 0.0)
    spectrum = synthetic_spectrum(config, LineShapeParams({1: 1.0}, 0.3), EPS)
    result = solve(FitProblem(config, LineShapeParams({1: 1.0}, 0.3), free=["v_c", "q1"]), spectrum, n_starts=1)
    assert "v_c" in result.unidentifiable and math.isnan(result.best_params["v_c"])
