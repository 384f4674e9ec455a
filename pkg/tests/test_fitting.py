import math

import numpy as np
import pytest
from oracles import scipy_surface_fit

from diracwalk.fitting import (
    PARAM_NAMES,
    fit_per_step,
    fit_static,
    fit_surface,
    initial_guess,
    oscillating_gaussian,
)
from diracwalk.lattice import SiteDistribution, site_distribution, to_momentum, to_position
from diracwalk.noise import StepDataset, sample_dataset
from diracwalk.walk import EXPERIMENT_STEP, evolve_momentum, step_symbol

Y = np.arange(-5, 6)


def model_dataset(params, steps=9, sites=Y):
    return StepDataset(tuple(
        SiteDistribution(sites, oscillating_gaussian(t, sites, *params)) for t in range(steps)
    ))


@pytest.fixture(scope="module")
def ideal_dataset():
    from diracwalk.lattice import make_geometry, make_input_state, truncated_gaussian_profile

    g = make_geometry(128)
    s = make_input_state([math.sqrt(0.5)] * 2, truncated_gaussian_profile(0, 3.0, -5, 5, g), g)
    states = evolve_momentum(to_momentum(s), step_symbol(EXPERIMENT_STEP), 8)
    return StepDataset(tuple(site_distribution(to_position(x)) for x in states))


def test_static_limit():
    y = np.linspace(-4, 4, 9)
    np.testing.assert_array_equal(oscillating_gaussian(0, y, 0.3, 0, 1.0, 0.2, 2.0),
                                  oscillating_gaussian(7, y, 0.3, 0, 1.0, 0.2, 2.0))


def test_peak_positions():
    y = np.linspace(-3, 3, 6001)
    f0 = oscillating_gaussian(0, y, 0, 0.5, math.pi / 2, 0, 3)
    f2 = oscillating_gaussian(2, y, 0, 0.5, math.pi / 2, 0, 3)
    assert y[np.argmax(f0)] == pytest.approx(0.5, abs=1e-3)
    assert y[np.argmax(f2)] == pytest.approx(-0.5, abs=1e-3)


def test_unit_integral():
    y = np.linspace(-60, 60, 240001)
    for t in (0, 1.3, 5):
        f = oscillating_gaussian(t, y, 0.4, 0.7, 1.1, 0.3, 3.0)
        assert np.trapezoid(f, y) == pytest.approx(1.0, abs=1e-9)


def test_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        oscillating_gaussian(0, 0, 0, 0, 0, 0, 0.0)


def test_self_consistency():
    truth = (0.0, 0.5, math.pi / 2, 0.0, 3.0)
    fit = fit_surface(model_dataset(truth))
    np.testing.assert_allclose(fit.params, truth, atol=1e-6)
    assert fit.converged


def test_self_consistency_negative_amplitude_convention():
    fit = fit_surface(model_dataset((0.2, -0.6, 1.2, 0.4, 2.5)))
    assert fit.amplitude == pytest.approx(0.6, abs=1e-6)
    assert fit.phi == pytest.approx(0.4 + math.pi - 2 * math.pi, abs=1e-6)


def test_ideal_fit(ideal_dataset):
    fit = fit_surface(ideal_dataset, steps=(0, 8), window=(-5, 5))
    assert 1.664 <= fit.omega <= 1.764
    assert 0.645 <= fit.amplitude <= 0.745
    assert fit.omega > 1.6  # finite-window effect moves omega above pi/2
    assert fit.error("omega") == pytest.approx(0.017, abs=0.005)
    assert fit.error("amplitude") == pytest.approx(0.032, abs=0.008)
    assert fit.points == 99 and fit.site_window == (-5, 5) and fit.step_window == (0, 8)
    assert fit.covariance.shape == (5, 5) and not fit.degenerate_covariance


def test_ideal_fit_matches_scipy(ideal_dataset):
    fit = fit_surface(ideal_dataset)
    t, y = np.meshgrid(np.arange(9.0), Y.astype(float), indexing="ij")
    data = ideal_dataset.matrix(-5, 5).ravel()
    x, cost = scipy_surface_fit(t.ravel(), y.ravel(), data, list(fit.params))
    np.testing.assert_allclose(fit.params, x, atol=1e-6)
    assert fit.residual_sum == pytest.approx(cost, rel=1e-9)


def test_short_window_stable(ideal_dataset):
    full = fit_surface(ideal_dataset)
    short = fit_surface(ideal_dataset, steps=(0, 4))
    assert abs(short.omega - full.omega) < 0.15


def test_static_fit_worse(ideal_dataset):
    assert fit_surface(ideal_dataset).residual_sum < fit_static(ideal_dataset).residual_sum


def test_errors_shrink_with_noise(ideal_dataset):
    dists = ideal_dataset.distributions
    errs = []
    for counts in (10**3, 10**4, 10**5):
        sampled = sample_dataset([d.restrict(-5, 5, renormalize=True) for d in dists], counts, 17)
        errs.append(fit_surface(sampled).stderr)
    errs = np.array(errs)
    assert np.all(errs[0] > errs[1]) and np.all(errs[1] > errs[2])


def test_initial_guess(ideal_dataset):
    static = model_dataset((0.0, 0.0, 0.0, 0.0, 2.0))
    assert initial_guess(static).amplitude == pytest.approx(0.0, abs=1e-12)
    g = initial_guess(ideal_dataset, window=(-5, 5))
    assert abs(g.omega - 1.7) <= 2 * math.pi / 9
    single = StepDataset((ideal_dataset[0],))
    assert initial_guess(single).omega == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        fit_surface(single)


def test_preconditions(ideal_dataset):
    with pytest.raises(ValueError):
        fit_surface(ideal_dataset, steps=(0, 3))
    with pytest.raises(ValueError):
        fit_surface(ideal_dataset, window=(-4, 5))
    with pytest.raises(ValueError):
        fit_surface(ideal_dataset, steps=(2, 12))


def test_weighted_fit_needs_errors(ideal_dataset):
    with pytest.raises(ValueError):
        fit_surface(ideal_dataset, weighted=True)
    sampled = sample_dataset([d.restrict(-5, 5, renormalize=True) for d in ideal_dataset], 10**5, 1)
    fit = fit_surface(sampled, weighted=True)
    assert fit.weighted and 1.6 < fit.omega < 1.85


def test_report_fields(ideal_dataset):
    report = fit_surface(ideal_dataset).to_dict()
    assert list(report["parameters"]) == list(PARAM_NAMES)
    assert len(report["covariance"]) == 25 and report["covariance_shape"] == [5, 5]


def test_per_step_diagnostic(ideal_dataset):
    per = fit_per_step(ideal_dataset)
    assert len(per) == 9 and all(s > 0 for _, s in per)
