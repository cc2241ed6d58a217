import math

import numpy as np
import pytest

from balancelab import (
    CalibrationError, ModelParams,
    largest_lyapunov, characteristic_root, calibrate_beta, refine_beta,
    lyapunov_sweep,
)

# Frozen oracle: rightmost root of s^2 + 50 s - 22 + beta e^(-0.1 s) = 0,
# evaluated independently with mpmath (50-digit Newton from a grid of
# real and complex starting points).
ROOT_G50_A22_B18 = 0.08283242700243981
ROOT_G50_A22_B26 = -0.08455869876833572


def test_characteristic_root_zero_at_beta_equals_alpha():
    # s = 0 solves the equation exactly when beta = alpha
    assert characteristic_root(50.0, 22.0, 22.0, 0.1) == pytest.approx(0.0, abs=1e-10)


def test_characteristic_root_frozen_values():
    assert characteristic_root(50.0, 22.0, 18.0, 0.1) == pytest.approx(
        ROOT_G50_A22_B18, abs=1e-9)
    assert characteristic_root(50.0, 22.0, 26.0, 0.1) == pytest.approx(
        ROOT_G50_A22_B26, abs=1e-9)


def test_characteristic_root_satisfies_equation():
    for beta in (18.0, 20.0, 24.0):
        s = characteristic_root(50.0, 22.0, beta, 0.1)
        resid = s * s + 50.0 * s - 22.0 + beta * math.exp(-s * 0.1)
        assert abs(resid) < 1e-7


def test_noise_free_estimator_matches_root():
    p = ModelParams(nu=0.0, beta=19.0)
    est = largest_lyapunov("single", p, horizon=2000.0)
    root = characteristic_root(p.gamma, p.alpha, p.beta, p.tau)
    assert est.lambda1 == pytest.approx(root, abs=1e-4)
    assert est.stderr == pytest.approx(0.0, abs=1e-9)


def test_norm_choices_agree():
    p = ModelParams(nu=0.0, beta=20.0)
    a = largest_lyapunov("single", p, horizon=2000.0, norm="headline")
    b = largest_lyapunov("single", p, horizon=2000.0, norm="full")
    assert a.lambda1 == pytest.approx(b.lambda1, abs=1e-4)


def test_estimator_reproducible():
    p = ModelParams(beta=21.0, seed=3)
    a = largest_lyapunov("single", p, horizon=500.0)
    b = largest_lyapunov("single", p, horizon=500.0)
    assert a.lambda1 == b.lambda1


def test_realizations_vary():
    p = ModelParams(beta=21.0)
    a = largest_lyapunov("single", p, horizon=500.0, realization=0)
    b = largest_lyapunov("single", p, horizon=500.0, realization=1)
    assert a.lambda1 != b.lambda1


def test_validation():
    p = ModelParams()
    with pytest.raises(ValueError):
        largest_lyapunov("nonlinear", p)
    with pytest.raises(ValueError):
        largest_lyapunov("single", p, horizon=1.0)
    with pytest.raises(ValueError):
        largest_lyapunov("single", p, norm="max")


def test_coupled_noise_free_matches_modified_equation():
    """Without noise the shared tip averages the two errors; for the
    symmetric mode the characteristic equation is unchanged, so the
    noise-free exponents of single and coupled coincide."""
    p = ModelParams(nu=0.0, beta=19.0)
    single = largest_lyapunov("single", p, horizon=2000.0)
    coupled = largest_lyapunov("coupled", p, horizon=2000.0)
    assert coupled.lambda1 == pytest.approx(single.lambda1, abs=2e-4)


def test_calibration_hits_target_noise_free():
    """With nu=0 the estimator is deterministic and the root oracle gives
    an independent check of the calibrated gain."""
    p = ModelParams(nu=0.0)
    target = 0.05
    cal = calibrate_beta("single", p, target, bracket=(18.0, 24.0),
                         n_seeds=1, horizon=2000.0)
    assert abs(cal.achieved_lambda1 - target) < 1e-4
    root = characteristic_root(p.gamma, p.alpha, cal.beta_star, p.tau)
    assert root == pytest.approx(target, abs=2e-3)


def test_calibration_requires_straddle():
    p = ModelParams(nu=0.0)
    with pytest.raises(CalibrationError):
        calibrate_beta("single", p, 10.0, bracket=(18.0, 24.0),
                       n_seeds=1, horizon=2000.0)


def test_sweep_shape_and_monotonicity():
    p = ModelParams(nu=0.0)
    rows = lyapunov_sweep("single", p, beta_range=(18.0, 24.0), n_points=5,
                          horizon=2000.0)
    assert len(rows) == 5
    lams = [r[1] for r in rows]
    assert all(a > b for a, b in zip(lams, lams[1:]))
    # sign change brackets beta = alpha = 22
    assert lams[0] > 0 > lams[-1]


def test_refine_beta_noise_free_finds_neutral_gain():
    # with nu = 0 the exponent crosses zero exactly at beta = alpha
    cal = refine_beta("single", ModelParams(nu=0.0), 0.0, beta0=21.9,
                      span=0.2, n_seeds=1)
    assert cal.beta_star == pytest.approx(22.0, abs=0.05)
    assert cal.achieved_lambda1 == pytest.approx(0.0, abs=1e-4)
    assert cal.bracket[0] < cal.beta_star < cal.bracket[1] + 0.2


def test_refine_beta_validates_grid_size():
    with pytest.raises(ValueError):
        refine_beta("single", ModelParams(nu=0.0), 0.0, beta0=21.9,
                    n_points=1, n_seeds=1)
