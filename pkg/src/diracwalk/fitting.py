"""Oscillating-Gaussian surface fit to per-step site distributions.

Model::

    f(t, y) = exp(-(y - mu0 - A cos(omega t + phi))**2 / (2 sigma**2)) / (sigma sqrt(2 pi))

fitted jointly over every (step, site) point of a window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .noise import StepDataset
from .optimize import levenberg_marquardt

PARAM_NAMES = ("mu0", "amplitude", "omega", "phi", "sigma")
SQRT_2PI = math.sqrt(2 * math.pi)


class FitParams(NamedTuple):
    mu0: float
    amplitude: float
    omega: float
    phi: float
    sigma: float


def oscillating_gaussian(t, y, mu0, amplitude, omega, phi, sigma):
    """Normal density in ``y`` whose mean oscillates in ``t`` (broadcasts)."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    u = y - mu0 - amplitude * np.cos(omega * t + phi)
    return np.exp(-(u**2) / (2 * sigma**2)) / (sigma * SQRT_2PI)


def _jacobian(t, y, p):
    mu0, a, w, phi, s = p
    theta = w * t + phi
    u = y - mu0 - a * np.cos(theta)
    f = np.exp(-(u**2) / (2 * s**2)) / (s * SQRT_2PI)
    g = f * u / s**2
    return np.stack(
        [
            g,
            g * np.cos(theta),
            -g * a * t * np.sin(theta),
            -g * a * np.sin(theta),
            f * (u**2 / s**3 - 1 / s),
        ],
        axis=-1,
    )


def _wrap(phi: float) -> float:
    return float((phi + math.pi) % (2 * math.pi) - math.pi)


@dataclass(frozen=True)
class OscillationFit:
    mu0: float
    amplitude: float
    omega: float
    phi: float
    sigma: float
    covariance: np.ndarray
    stderr: np.ndarray
    residual_sum: float
    site_window: tuple[int, int]
    step_window: tuple[int, int]
    points: int
    weighted: bool
    converged: bool
    degenerate_covariance: bool

    @property
    def params(self) -> FitParams:
        return FitParams(self.mu0, self.amplitude, self.omega, self.phi, self.sigma)

    def error(self, name: str) -> float:
        return float(self.stderr[PARAM_NAMES.index(name)])

    def mean_curve(self, t) -> np.ndarray:
        return self.mu0 + self.amplitude * np.cos(self.omega * np.asarray(t, float) + self.phi)

    def to_dict(self) -> dict:
        return {
            "parameters": dict(zip(PARAM_NAMES, map(float, self.params))),
            "stderr": dict(zip(PARAM_NAMES, map(float, self.stderr))),
            "covariance": [float(v) for v in self.covariance.ravel()],
            "covariance_shape": list(self.covariance.shape),
            "residual_sum": self.residual_sum,
            "site_window": list(self.site_window),
            "step_window": list(self.step_window),
            "points": self.points,
            "weighted": self.weighted,
            "converged": self.converged,
            "degenerate_covariance": self.degenerate_covariance,
        }


def _dominant_frequency(series: np.ndarray) -> float:
    centered = series - series.mean()
    spectrum = np.abs(np.fft.rfft(centered))
    freqs = 2 * math.pi * np.fft.rfftfreq(series.size)
    if spectrum.size < 2 or not np.any(spectrum[1:] > 0):
        return math.pi / 2
    return float(freqs[1 + np.argmax(spectrum[1:])])


def initial_guess(dataset: StepDataset, steps=None, window=None) -> FitParams:
    """Starting point from per-step moments and the spectrum of the mean series."""
    a, b = steps if steps is not None else (0, len(dataset) - 1)
    dists = [dataset[t] for t in range(a, b + 1)]
    if window is not None:
        dists = [d.restrict(*window) for d in dists]
    means = np.array([d.mean() for d in dists])
    variances = np.array([
        np.dot((d.sites - m) ** 2, d.probabilities) / d.total() for d, m in zip(dists, means)
    ])
    sigma = float(np.sqrt(max(variances.mean(), 1e-6)))
    amplitude = float((means.max() - means.min()) / 2)
    omega = _dominant_frequency(means) if means.size >= 4 else math.pi / 2
    return FitParams(float(means.mean()), amplitude, omega, 0.0, sigma)


def _canonical(x, cov):
    x = np.array(x, dtype=np.float64)
    cov = cov.copy()
    if x[1] < 0:
        x[1] = -x[1]
        x[3] += math.pi
        cov[1, :] *= -1
        cov[:, 1] *= -1
    x[3] = _wrap(x[3])
    return x, cov


def fit_surface(
    dataset: StepDataset,
    steps: tuple[int, int] | None = None,
    window: tuple[int, int] = (-5, 5),
    guess: FitParams | None = None,
    weighted: bool = False,
    max_iter: int = 500,
) -> OscillationFit:
    """Least-squares fit of :func:`oscillating_gaussian` over all points in the window.

    The covariance is ``s**2 (J^T J)^-1`` at the optimum with ``s**2`` the
    residual variance.  ``weighted`` divides residuals by the per-point
    standard errors when the dataset carries them.
    """
    a, b = steps if steps is not None else (0, len(dataset) - 1)
    if not 0 <= a <= b < len(dataset):
        raise ValueError(f"step range {(a, b)} outside the dataset (0..{len(dataset) - 1})")
    xmin, xmax = window
    t = np.arange(a, b + 1, dtype=np.float64)
    y = np.arange(xmin, xmax + 1, dtype=np.float64)
    npoints = t.size * y.size
    if t.size < 5 or y.size < 11 or npoints < 55:
        raise ValueError(
            f"need at least 5 steps x 11 sites of data, got {t.size} x {y.size}"
        )
    sub = StepDataset(dataset.distributions[a: b + 1], dataset.provenance)
    data = sub.matrix(xmin, xmax)
    tt, yy = np.meshgrid(t, y, indexing="ij")
    tt, yy = tt.ravel(), yy.ravel()
    target = data.ravel()

    weights = np.ones_like(target)
    if weighted:
        errs = [d.restrict(xmin, xmax).stderr for d in sub.distributions]
        if any(e is None for e in errs):
            raise ValueError("weighted fit needs standard errors on every step")
        err = np.concatenate(errs)
        floor = err[err > 0].min() if np.any(err > 0) else 1.0
        weights = 1.0 / np.where(err > 0, err, floor)

    def residuals(p):
        return (oscillating_gaussian(tt, yy, *p) - target) * weights

    def jac(p):
        return _jacobian(tt, yy, p) * weights[:, None]

    if guess is None:
        guess = initial_guess(sub, window=window)
    lower = np.array([-np.inf, -np.inf, 0.0, -np.inf, 1e-6])
    upper = np.array([np.inf, np.inf, math.pi, np.inf, np.inf])
    # a few restarts around the spectral guess guard against the omega ~ 0 basin
    bin_width = 2 * math.pi / t.size
    starts = []
    for dw in (0.0, -bin_width, bin_width):
        for phi in (guess.phi, guess.phi + math.pi / 2, guess.phi + math.pi, guess.phi - math.pi / 2):
            w = float(np.clip(guess.omega + dw, 0.0, math.pi))
            starts.append([guess.mu0, max(guess.amplitude, 1e-3), w, phi, guess.sigma])
    best = None
    for x0 in starts:
        res = levenberg_marquardt(residuals, x0, lower, upper, jac=jac, max_iter=max_iter,
                                  gtol=1e-14, xtol=1e-15)
        if best is None or res.cost < best.cost:
            best = res

    J = best.jacobian
    dof = max(npoints - 5, 1)
    s2 = best.cost / dof
    jtj = J.T @ J
    degenerate = bool(np.linalg.cond(jtj) > 1e14)
    cov = np.linalg.pinv(jtj) * s2 if degenerate else np.linalg.inv(jtj) * s2
    x, cov = _canonical(best.x, cov)
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return OscillationFit(
        *map(float, x),
        covariance=cov,
        stderr=stderr,
        residual_sum=float(np.sum(((oscillating_gaussian(tt, yy, *x) - target)) ** 2)),
        site_window=(int(xmin), int(xmax)),
        step_window=(int(a), int(b)),
        points=npoints,
        weighted=weighted,
        converged=best.converged,
        degenerate_covariance=degenerate,
    )


def fit_static(dataset: StepDataset, steps=None, window=(-5, 5)) -> OscillationFit:
    """Same fit with ``A = 0`` held fixed (reference for residual comparisons)."""
    a, b = steps if steps is not None else (0, len(dataset) - 1)
    xmin, xmax = window
    t = np.arange(a, b + 1, dtype=np.float64)
    y = np.arange(xmin, xmax + 1, dtype=np.float64)
    sub = StepDataset(dataset.distributions[a: b + 1], dataset.provenance)
    target = sub.matrix(xmin, xmax).ravel()
    tt, yy = (g.ravel() for g in np.meshgrid(t, y, indexing="ij"))
    g0 = initial_guess(sub, window=window)

    def residuals(p):
        return oscillating_gaussian(tt, yy, p[0], 0.0, 0.0, 0.0, p[1]) - target

    res = levenberg_marquardt(residuals, [g0.mu0, g0.sigma], [-np.inf, 1e-6], [np.inf, np.inf])
    J = res.jacobian
    s2 = res.cost / max(target.size - 2, 1)
    cov2 = np.linalg.pinv(J.T @ J) * s2
    cov = np.zeros((5, 5))
    cov[np.ix_([0, 4], [0, 4])] = cov2
    return OscillationFit(
        float(res.x[0]), 0.0, 0.0, 0.0, float(res.x[1]),
        covariance=cov, stderr=np.sqrt(np.clip(np.diag(cov), 0, None)),
        residual_sum=res.cost, site_window=(int(xmin), int(xmax)), step_window=(int(a), int(b)),
        points=target.size, weighted=False, converged=res.converged, degenerate_covariance=False,
    )


def fit_per_step(dataset: StepDataset, window=(-5, 5)) -> list[tuple[float, float]]:
    """Diagnostic: independent Gaussian ``(mean, sigma)`` fit of each step."""
    xmin, xmax = window
    y = np.arange(xmin, xmax + 1, dtype=np.float64)
    out = []
    for d in dataset.distributions:
        p = d.restrict(xmin, xmax).probabilities
        m0 = float(np.dot(y, p) / p.sum())
        s0 = float(np.sqrt(max(np.dot((y - m0) ** 2, p) / p.sum(), 1e-6)))

        def residuals(q, p=p):
            return oscillating_gaussian(0.0, y, q[0], 0.0, 0.0, 0.0, q[1]) - p

        res = levenberg_marquardt(residuals, [m0, s0], [-np.inf, 1e-6], [np.inf, np.inf])
        out.append((float(res.x[0]), float(res.x[1])))
    return out
