"""Coin x position states on a finite periodic lattice.

Amplitudes are stored as a ``(2, N)`` complex array.  Row 0 is the coin
state ``|R>``, row 1 is ``|L>``; column ``j`` holds site ``x = j - N/2``
(or momentum ``k = 2*pi*(j - N/2)/N`` in the momentum representation).

The Fourier convention is

    psi_hat(k) = N**-0.5 * sum_x psi(x) * exp(-1j * k * x)

so a momentum-diagonal symbol ``exp(1j*k)`` translates ``x -> x - 1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Representation = Literal["position", "momentum"]

MIN_LATTICE_SIZE = 16
NORM_ATOL = 1e-8


class RepresentationError(ValueError):
    """Raised when an operation receives a state in the wrong representation."""


class BoundaryContaminationWarning(UserWarning):
    """Probability has reached the periodic wrap region of the lattice."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LatticeGeometry:
    """A periodic lattice of ``size`` sites labeled ``-N/2 .. N/2-1``."""

    size: int

    def __post_init__(self):
        n = self.size
        if isinstance(n, bool) or int(n) != n:
            raise ValueError(f"lattice size must be an integer, got {n!r}")
        if n < MIN_LATTICE_SIZE or n % 2:
            raise ValueError(
                f"lattice size must be even and >= {MIN_LATTICE_SIZE}, got {n}"
            )
        object.__setattr__(self, "size", int(n))

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.size // 2, self.size // 2)

    @property
    def momenta(self) -> np.ndarray:
        """Momentum grid ``2*pi*j/N`` for ``j`` in ``-N/2 .. N/2-1``, in [-pi, pi)."""
        return 2.0 * np.pi * self.sites / self.size

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.size

    def index(self, site):
        """Column index of a site label (vectorized)."""
        site = np.asarray(site)
        lo, hi = -self.size // 2, self.size // 2 - 1
        if np.any(site < lo) or np.any(site > hi):
            raise ValueError(f"site outside lattice range [{lo}, {hi}]")
        return site + self.size // 2


def make_geometry(n: int) -> LatticeGeometry:
    return LatticeGeometry(n)


@dataclass(frozen=True)
class SpinorField:
    """Walker wavefunction over coin and lattice, immutable."""

    geometry: LatticeGeometry
    amplitudes: np.ndarray
    representation: Representation = "position"

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2, self.geometry.size):
            raise ValueError(
                f"amplitudes must have shape (2, {self.geometry.size}), got {amps.shape}"
            )
        if self.representation not in ("position", "momentum"):
            raise ValueError(f"unknown representation {self.representation!r}")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def inner(self, other: "SpinorField") -> complex:
        """``<self|other>``; both states must share representation."""
        if other.representation != self.representation:
            raise RepresentationError("inner product across representations")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def with_amplitudes(self, amplitudes) -> "SpinorField":
        return SpinorField(self.geometry, amplitudes, self.representation)

    def require(self, representation: Representation) -> None:
        if self.representation != representation:
            raise RepresentationError(
                f"expected a {representation}-representation state, "
                f"got {self.representation}"
            )


@dataclass(frozen=True)
class SiteDistribution:
    """Occupation probabilities per site, optionally with Poissonian errors."""

    sites: np.ndarray
    probabilities: np.ndarray
    stderr: np.ndarray | None = field(default=None)

    def __post_init__(self):
        sites = np.asarray(self.sites)
        if sites.size and not np.all(sites == np.round(sites)):
            raise ValueError("site labels must be integers")
        sites = sites.astype(np.int64)
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if probs.shape != sites.shape:
            raise ValueError("sites and probabilities differ in shape")
        object.__setattr__(self, "sites", _frozen(sites))
        object.__setattr__(self, "probabilities", _frozen(probs))
        if self.stderr is not None:
            err = np.asarray(self.stderr, dtype=np.float64)
            if err.shape != sites.shape:
                raise ValueError("stderr and probabilities differ in shape")
            if np.any(err < 0):
                raise ValueError("stderr must be nonnegative")
            object.__setattr__(self, "stderr", _frozen(err))

    def total(self) -> float:
        return float(self.probabilities.sum())

    def mean(self) -> float:
        return float(np.dot(self.sites, self.probabilities) / self.total())

    def mean_stderr(self) -> float | None:
        """Error on :meth:`mean` from independent per-site errors."""
        if self.stderr is None:
            return None
        total = self.total()
        mu = self.mean()
        return float(np.sqrt(np.sum(((self.sites - mu) * self.stderr) ** 2)) / total)

    def restrict(self, xmin: int, xmax: int, renormalize: bool = False) -> "SiteDistribution":
        """Keep sites in ``[xmin, xmax]``; sites missing from the support get zero."""
        wanted = np.arange(xmin, xmax + 1)
        probs = np.zeros(wanted.size)
        err = None if self.stderr is None else np.zeros(wanted.size)
        pos = {int(s): i for i, s in enumerate(self.sites)}
        for j, s in enumerate(wanted):
            i = pos.get(int(s))
            if i is not None:
                probs[j] = self.probabilities[i]
                if err is not None:
                    err[j] = self.stderr[i]
        if renormalize:
            total = probs.sum()
            if total <= 0:
                raise ValueError("no probability inside the requested window")
            probs = probs / total
            if err is not None:
                err = err / total
        return SiteDistribution(wanted, probs, err)


def truncated_gaussian_profile(
    x0: int,
    sigma: float,
    xmin: int | None,
    xmax: int | None,
    geometry: LatticeGeometry,
) -> np.ndarray:
    """Real amplitude profile ``g(x) ~ exp(-(x-x0)**2 / (2 sigma**2))`` on a window.

    Zero outside ``[xmin, xmax]`` and normalized so that ``sum(g**2) == 1``.
    Passing ``None`` for both bounds uses the whole lattice.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    sites = geometry.sites
    if xmin is None and xmax is None:
        xmin, xmax = int(sites[0]), int(sites[-1])
    if xmin is None or xmax is None:
        raise ValueError("give both window bounds or neither")
    if not xmin < xmax:
        raise ValueError(f"empty window [{xmin}, {xmax}]")
    if xmin < sites[0] or xmax > sites[-1]:
        raise ValueError(f"window [{xmin}, {xmax}] exceeds the lattice")
    inside = (sites >= xmin) & (sites <= xmax)
    d = (sites - x0).astype(np.float64)
    # log-domain shape keeps huge sigma from underflowing to an all-zero profile
    log_g = np.where(inside, -0.5 * (d / sigma) ** 2, -np.inf)
    g = np.exp(log_g - log_g[inside].max())
    return g / np.linalg.norm(g)


def make_input_state(coin, profile, geometry: LatticeGeometry) -> SpinorField:
    """Factorized input ``coin (x) sum_x g(x)|x>`` in the position representation."""
    coin = np.asarray(coin, dtype=np.complex128).reshape(-1)
    profile = np.asarray(profile, dtype=np.complex128)
    if coin.shape != (2,):
        raise ValueError("coin must be a pair of amplitudes (R, L)")
    if profile.shape != (geometry.size,):
        raise ValueError(f"profile must have {geometry.size} entries")
    if abs(np.linalg.norm(coin) - 1.0) > NORM_ATOL:
        raise ValueError("coin amplitudes are not normalized")
    if abs(np.linalg.norm(profile) - 1.0) > NORM_ATOL:
        raise ValueError("profile is not normalized")
    return SpinorField(geometry, np.outer(coin, profile), "position")


def delta_state(geometry: LatticeGeometry, site: int, coin=(1.0, 0.0)) -> SpinorField:
    profile = np.zeros(geometry.size)
    profile[geometry.index(site)] = 1.0
    coin = np.asarray(coin, dtype=np.complex128)
    return make_input_state(coin / np.linalg.norm(coin), profile, geometry)


def random_state(geometry: LatticeGeometry, rng: np.random.Generator, support=None) -> SpinorField:
    """Normalized state with Gaussian random amplitudes.

    ``support`` optionally restricts the nonzero sites to ``[lo, hi]``.
    """
    amps = rng.normal(size=(2, geometry.size)) + 1j * rng.normal(size=(2, geometry.size))
    if support is not None:
        lo, hi = support
        sites = geometry.sites
        amps[:, (sites < lo) | (sites > hi)] = 0.0
    return SpinorField(geometry, amps / np.linalg.norm(amps), "position")


def _dft(amps: np.ndarray) -> np.ndarray:
    # columns are centered on x = 0; shift to FFT order and back
    return np.fft.fftshift(
        np.fft.fft(np.fft.ifftshift(amps, axes=-1), axis=-1, norm="ortho"), axes=-1
    )


def _idft(amps: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(
        np.fft.ifft(np.fft.ifftshift(amps, axes=-1), axis=-1, norm="ortho"), axes=-1
    )


def to_momentum(state: SpinorField) -> SpinorField:
    state.require("position")
    return SpinorField(state.geometry, _dft(state.amplitudes), "momentum")


def to_position(state: SpinorField) -> SpinorField:
    state.require("momentum")
    return SpinorField(state.geometry, _idft(state.amplitudes), "position")


def site_distribution(state: SpinorField) -> SiteDistribution:
    """Trace out the coin: ``p(x) = sum_c |psi(c, x)|**2``."""
    state.require("position")
    probs = np.sum(np.abs(state.amplitudes) ** 2, axis=0)
    return SiteDistribution(state.geometry.sites, probs)


def edge_mass(state: SpinorField, margin: int | None = None) -> float:
    """Probability on the outer ``margin`` sites at each end of the lattice.

    Defaults to one eighth of the lattice per side.
    """
    state.require("position")
    n = state.geometry.size
    if margin is None:
        margin = n // 8
    p = np.sum(np.abs(state.amplitudes) ** 2, axis=0)
    return float(p[:margin].sum() + p[n - margin:].sum())


def check_boundary(state: SpinorField, tol: float = 1e-10) -> float:
    """Warn when a position state has reached the wrap region; returns the edge mass."""
    mass = edge_mass(state)
    if mass > tol:
        warnings.warn(
            f"probability {mass:.3g} near the periodic boundary; "
            "positions are unreliable, enlarge the lattice",
            BoundaryContaminationWarning,
            stacklevel=3,
        )
    return mass
