import math

import numpy as np
import pytest
from oracles import coin_formula, dense_step, dirac_symbol_np, hardware_symbol_np

from diracwalk.lattice import delta_state, make_geometry, random_state, site_distribution, to_momentum, to_position
from diracwalk.walk import (
    DIRAC_STEP,
    EXPERIMENT_STEP,
    NotSpecialUnitaryError,
    WalkStepParams,
    apply_step_momentum,
    apply_step_position,
    coin_matrix,
    dispersion,
    qplate_symbol,
    special_unitary,
    step_symbol,
)

S = math.sqrt(0.5)
K = np.linspace(-math.pi, math.pi, 41)


def test_coin_zero_angles():
    np.testing.assert_allclose(coin_matrix(0, 0), S * np.array([[1, 1j], [1j, 1]]), atol=1e-15)


def test_coin_default_angles():
    np.testing.assert_allclose(coin_matrix(-math.pi / 4, math.pi / 4),
                               S * np.array([[-1, 1], [-1, -1]]), atol=1e-15)


@pytest.mark.parametrize("alpha,beta", [(0.3, -1.2), (2.0, 0.7), (-0.4, 5.0)])
def test_coin_matches_formula_and_unitary(alpha, beta):
    c = coin_matrix(alpha, beta)
    np.testing.assert_allclose(c, coin_formula(alpha, beta), atol=1e-15)
    np.testing.assert_allclose(c.conj().T @ c, np.eye(2), atol=1e-14)
    assert abs(abs(np.linalg.det(c)) - 1) < 1e-14


def test_qplate_off_is_identity():
    np.testing.assert_allclose(qplate_symbol(0.0, 0.9, K), np.broadcast_to(np.eye(2), (41, 2, 2)),
                               atol=1e-15)


def test_qplate_on_default_axis():
    q = qplate_symbol(math.pi, math.pi / 4, K)
    expected = np.zeros((41, 2, 2), complex)
    expected[:, 0, 1] = -np.exp(1j * K)
    expected[:, 1, 0] = np.exp(-1j * K)
    np.testing.assert_allclose(q, expected, atol=1e-15)


def test_qplate_unitary_and_range():
    q = qplate_symbol(1.3, 0.2, K)
    np.testing.assert_allclose(q @ np.conj(np.swapaxes(q, -1, -2)),
                               np.broadcast_to(np.eye(2), q.shape), atol=1e-14)
    with pytest.raises(ValueError):
        qplate_symbol(3.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        qplate_symbol(-0.1, 0.0, 0.0)


def test_experiment_step_symbol():
    u = step_symbol(EXPERIMENT_STEP)(K)
    e = np.exp(1j * K)
    expected = S * np.stack([np.stack([e, e], -1), np.stack([-1 / e, 1 / e], -1)], -2)
    np.testing.assert_allclose(u, expected, atol=1e-15)


def test_massless_step_is_shift():
    u = step_symbol(WalkStepParams.abstract(1.0, 0.0))(K)
    np.testing.assert_allclose(u[:, 0, 0], np.exp(-1j * K), atol=1e-15)
    np.testing.assert_allclose(u[:, 1, 1], np.exp(1j * K), atol=1e-15)
    assert np.all(u[:, 0, 1] == 0) and np.all(u[:, 1, 0] == 0)


def test_dirac_step_at_zero():
    np.testing.assert_allclose(step_symbol(DIRAC_STEP)(0.0), S * np.array([[1, -1j], [-1j, 1]]),
                               atol=1e-15)


@pytest.mark.parametrize("params", [
    EXPERIMENT_STEP, DIRAC_STEP, WalkStepParams.hardware(2.2, 0.4, 0.1, -0.9),
    WalkStepParams.dirac(0.3),
])
def test_symbol_unitary_and_matches_formula(params):
    u = step_symbol(params)(K)
    np.testing.assert_allclose(u @ np.conj(np.swapaxes(u, -1, -2)),
                               np.broadcast_to(np.eye(2), u.shape), atol=1e-12)
    for i, k in enumerate(K):
        if params.mode == "hardware":
            ref = hardware_symbol_np(params.delta, params.alpha0, params.alpha, params.beta, k)
        else:
            ref = dirac_symbol_np(params.n, params.m, k)
        np.testing.assert_allclose(u[i], ref, atol=1e-14)


def test_symbol_derivative_vs_central_difference():
    sym = step_symbol(WalkStepParams.hardware(2.2, 0.4, 0.1, -0.9))
    h = 1e-6
    np.testing.assert_allclose(sym.derivative(K), (sym(K + h) - sym(K - h)) / (2 * h), atol=1e-8)


def test_params_validation():
    with pytest.raises(ValueError):
        WalkStepParams.hardware(3.3, 0, 0, 0)
    with pytest.raises(ValueError):
        WalkStepParams.abstract(0.8, 0.8)
    with pytest.raises(ValueError):
        WalkStepParams("other")
    with pytest.raises(ValueError):
        WalkStepParams.hardware(1.0, 0, 0, 0, q=0.3)
    WalkStepParams.abstract(0.6, 0.8)


def test_identity_symbol_leaves_state():
    g = make_geometry(32)
    s = to_momentum(random_state(g, np.random.default_rng(0)))
    out = apply_step_momentum(s, step_symbol(WalkStepParams.hardware(0.0, 0.0, 0.0, 0.0)))
    # delta = 0 leaves only the coin; its site distribution is unchanged
    p0 = site_distribution(to_position(s)).probabilities
    np.testing.assert_allclose(site_distribution(to_position(out)).probabilities, p0, atol=1e-14)


def test_one_step_backends_agree_on_default_input(default_input):
    mom = to_position(apply_step_momentum(to_momentum(default_input), step_symbol(EXPERIMENT_STEP)))
    pos = apply_step_position(default_input, EXPERIMENT_STEP)
    np.testing.assert_allclose(site_distribution(mom).probabilities,
                               site_distribution(pos).probabilities, atol=1e-10)


def test_norm_after_eight_steps(default_input):
    s = to_momentum(default_input)
    sym = step_symbol(EXPERIMENT_STEP)
    for _ in range(8):
        s = apply_step_momentum(s, sym)
    assert abs(s.norm() - 1) < 1e-11


def test_qplate_off_position_step_keeps_distribution():
    g = make_geometry(32)
    s = random_state(g, np.random.default_rng(2))
    out = apply_step_position(s, WalkStepParams.hardware(0.0, 0.3, 0.5, -0.2))
    np.testing.assert_allclose(site_distribution(out).probabilities,
                               site_distribution(s).probabilities, atol=1e-14)


def test_experiment_step_on_delta_support():
    g = make_geometry(32)
    s = delta_state(g, 0, (S, S))
    p = site_distribution(apply_step_position(s, EXPERIMENT_STEP))
    assert set(p.sites[p.probabilities > 1e-15].tolist()) <= {-1, 1}


@pytest.mark.parametrize("params,kind,kw", [
    (EXPERIMENT_STEP, "hardware", dict(delta=math.pi, alpha0=math.pi / 4, alpha=-math.pi / 4, beta=math.pi / 4)),
    (WalkStepParams.hardware(1.9, 0.2, 0.6, -0.3), "hardware", dict(delta=1.9, alpha0=0.2, alpha=0.6, beta=-0.3)),
    (WalkStepParams.dirac(0.4), "abstract", dict(n=math.sqrt(1 - 0.16), m=0.4)),
])
def test_position_step_matches_dense_operator(params, kind, kw):
    g = make_geometry(32)
    u = dense_step(kind, 32, **kw)
    s = random_state(g, np.random.default_rng(7))
    v = s.amplitudes.reshape(-1)
    for _ in range(8):
        s = apply_step_position(s, params)
        v = u @ v
    np.testing.assert_allclose(s.amplitudes.reshape(-1), v, atol=1e-12)


def test_representation_checks():
    g = make_geometry(16)
    s = delta_state(g, 0)
    with pytest.raises(ValueError):
        apply_step_momentum(s, step_symbol(EXPERIMENT_STEP))
    with pytest.raises(ValueError):
        apply_step_position(to_momentum(s), EXPERIMENT_STEP)


def test_dispersion_dirac_at_zero():
    d = dispersion(step_symbol(DIRAC_STEP), 0.0)
    assert float(d.omega) == pytest.approx(math.pi / 4, abs=1e-14)


def test_dispersion_massless():
    k = K[(np.abs(K) > 1e-3) & (np.abs(K) < math.pi - 1e-3)]
    d = dispersion(step_symbol(WalkStepParams.abstract(1.0, 0.0)), k)
    np.testing.assert_allclose(d.omega, np.abs(k), atol=1e-12)
    d0 = dispersion(step_symbol(WalkStepParams.abstract(1.0, 0.0)), 0.0)
    assert bool(d0.degenerate)


def test_hardware_and_dirac_share_dispersion():
    k = make_geometry(128).momenta
    w_hw = dispersion(step_symbol(EXPERIMENT_STEP), k).omega
    w_d = dispersion(step_symbol(DIRAC_STEP), k).omega
    np.testing.assert_allclose(w_hw, w_d, atol=1e-12)
    np.testing.assert_allclose(w_hw, np.arccos(np.cos(k) * S), atol=1e-12)


@pytest.mark.parametrize("params", [EXPERIMENT_STEP, DIRAC_STEP, WalkStepParams.hardware(2.0, 0.1, 0.3, 0.2)])
def test_eigenvectors(params):
    k = make_geometry(64).momenta
    sym = step_symbol(params)
    d = dispersion(sym, k)
    u = sym(k)
    ok = ~d.degenerate
    lam = np.exp(-1j * d.omega)[:, None]
    np.testing.assert_allclose(np.einsum("kab,kb->ka", u, d.plus)[ok], (lam * d.plus)[ok], atol=1e-12)
    np.testing.assert_allclose(np.einsum("kab,kb->ka", u, d.minus)[ok], (np.conj(lam) * d.minus)[ok],
                               atol=1e-12)
    assert np.max(np.abs(np.einsum("ka,ka->k", np.conj(d.plus), d.minus))[ok]) < 1e-12
    # gauge: first component real and nonnegative
    assert np.all(d.plus[:, 0].real >= 0) and np.max(np.abs(d.plus[:, 0].imag)) < 1e-14
    assert np.all((d.omega >= 0) & (d.omega <= math.pi))


def test_dispersion_rejects_non_special_unitary():
    u = step_symbol(DIRAC_STEP)(0.3) * np.exp(0.4j)
    with pytest.raises(NotSpecialUnitaryError):
        dispersion(u, None)
    d = dispersion(special_unitary(u), None)
    assert float(d.omega) == pytest.approx(math.acos(S * math.cos(0.3)), abs=1e-12)
    with pytest.raises(NotSpecialUnitaryError):
        dispersion(np.array([[1.5, 0], [0, 1 / 1.5]]), None)


def test_degenerate_point_flagged():
    d = dispersion(np.eye(2, dtype=complex), None)
    assert bool(d.degenerate) and float(d.omega) == 0.0
    d = dispersion(-np.eye(2, dtype=complex), None)
    assert bool(d.degenerate) and float(d.omega) == pytest.approx(math.pi)
