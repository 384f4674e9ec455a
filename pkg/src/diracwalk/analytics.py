"""Effective Hamiltonian, energy sectors and Zitterbewegung of a walk.

Per momentum the step is ``U(k) = exp(-1j H(k))`` with
``H(k) = omega(k) (|+><+| - |-><-|)``.  In the momentum representation
the position operator is ``X = 1j d/dk``, so the Heisenberg velocity
``1j [H, X]`` is ``H'(k)``.  Its sector-diagonal part is the group
velocity ``V = (omega'/omega) H`` and its off-diagonal remainder
``F = H' - V`` drives the oscillation

    <X(t)> = x_+(t) + x_-(t) + x_0 + z(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .lattice import LatticeGeometry, SpinorField, check_boundary, to_momentum, to_position
from .walk import (
    StepSymbol,
    WalkStepParams,
    _eigvecs_from_generator,
    evolve_momentum,
    sector_generator,
)

DerivativeMethod = Literal["auto", "closed-form", "symbol", "finite-difference"]

SIGMA_X = np.array([[0, 1], [1, 0]], complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], complex)


class DegeneracyError(ValueError):
    """Raised at momenta where ``omega`` is 0 or pi."""


def _dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _hamiltonian(u):
    omega, m, degenerate = sector_generator(u)
    return omega[..., None, None] * m, omega, degenerate


def _closed_form(params: WalkStepParams, k):
    """Dirac walk: H, H', omega, omega' from the analytic closed form."""
    n, mass = params.n, params.m
    omega = np.arccos(np.clip(n * np.cos(k), -1.0, 1.0))
    sin_w = np.sin(omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        domega = n * np.sin(k) / sin_w
        ratio = omega / sin_w
        dratio = domega * (sin_w - omega * np.cos(omega)) / sin_w**2
    b = (n * np.sin(k))[..., None, None] * SIGMA_Z + mass * SIGMA_X
    db = (n * np.cos(k))[..., None, None] * SIGMA_Z
    h = ratio[..., None, None] * b
    dh = dratio[..., None, None] * b + ratio[..., None, None] * db
    return h, dh, omega, domega


def _from_symbol_derivative(symbol: StepSymbol, k):
    """H' from the exact dU/dk by differentiating ``U = cos w - 1j sin w M``."""
    u = symbol(k)
    du = symbol.derivative(k)
    omega, m, degenerate = sector_generator(u)
    sin_w = np.where(degenerate, 1.0, np.sin(omega))
    cos_w = np.cos(omega)
    domega = -np.real(np.trace(du, axis1=-2, axis2=-1)) / (2.0 * sin_w)
    eye = np.eye(2)
    dm = (
        1j * (du + (sin_w * domega)[..., None, None] * eye) / sin_w[..., None, None]
        - m * (cos_w * domega / sin_w)[..., None, None]
    )
    h = omega[..., None, None] * m
    dh = domega[..., None, None] * m + omega[..., None, None] * dm
    return h, dh, omega, domega


def _finite_difference(symbol: StepSymbol, k, step: float):
    omega, m, _ = sector_generator(symbol(k))
    h = omega[..., None, None] * m
    h_up, _, _ = _hamiltonian(symbol(k + step))
    h_dn, _, _ = _hamiltonian(symbol(k - step))
    dh = (h_up - h_dn) / (2 * step)
    # omega' = <+|H'|+> = tr(M H')/2 keeps F = H' - V exactly sector off-diagonal
    domega = 0.5 * np.real(np.trace(m @ dh, axis1=-2, axis2=-1))
    return h, dh, omega, domega


def _resolve_method(symbol: StepSymbol, method: DerivativeMethod) -> str:
    if method == "auto":
        return "closed-form" if symbol.params.mode == "abstract" else "finite-difference"
    if method == "closed-form" and symbol.params.mode != "abstract":
        raise ValueError("closed-form derivative exists only for the abstract Dirac walk")
    if method not in ("closed-form", "symbol", "finite-difference"):
        raise ValueError(f"unknown derivative method {method!r}")
    return method


def hamiltonian_and_derivative(symbol: StepSymbol, k, method: DerivativeMethod = "auto",
                               fd_step: float | None = None):
    """``(H, H', omega, omega')`` at momenta ``k``.

    ``auto`` uses the closed form for abstract walks and central differences
    (``fd_step``, default 2*pi/128) for hardware symbols.
    """
    k = np.asarray(k, dtype=np.float64)
    method = _resolve_method(symbol, method)
    if method == "closed-form":
        return _closed_form(symbol.params, k)
    if method == "symbol":
        return _from_symbol_derivative(symbol, k)
    return _finite_difference(symbol, k, fd_step if fd_step else 2 * math.pi / 128)


def effective_hamiltonian(symbol: StepSymbol, k) -> np.ndarray:
    """Hermitian ``H(k)`` with ``exp(-1j H(k)) = U(k)`` and spectrum in [-pi, pi]."""
    h, _, degenerate = _hamiltonian(symbol(k))
    if np.any(degenerate):
        raise DegeneracyError("omega is 0 or pi; the effective Hamiltonian is not unique")
    return h


def small_k_dirac_limit_check(n: float, m: float, kmax: float, samples: int = 201) -> float:
    """Largest spectral-norm gap between ``H(k)`` and ``k sigma_z + m sigma_x`` on |k| <= kmax."""
    symbol = StepSymbol(WalkStepParams.abstract(n, m))
    ks = np.linspace(-kmax, kmax, samples)
    h, _, _ = _hamiltonian(symbol(ks))
    dirac = ks[:, None, None] * SIGMA_Z + m * SIGMA_X
    return float(max(np.linalg.norm(h - dirac, ord=2, axis=(-2, -1))))


@dataclass(frozen=True)
class SpectralData:
    """Per-momentum spectral quantities of a step on a lattice grid.

    Arrays are indexed like the momentum grid; matrices have shape
    ``(N, 2, 2)``.  ``degenerate`` flags momenta excluded from sector sums.
    """

    geometry: LatticeGeometry
    symbol: StepSymbol
    method: str
    omega: np.ndarray
    domega: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    hamiltonian: np.ndarray
    dhamiltonian: np.ndarray
    velocity: np.ndarray
    zb: np.ndarray
    degenerate: np.ndarray

    @property
    def momenta(self) -> np.ndarray:
        return self.geometry.momenta


def _spectral_fields(symbol, k, method, fd_step):
    h_raw, omega_raw, degenerate = _hamiltonian(symbol(k))
    h, dh, omega, domega = hamiltonian_and_derivative(symbol, k, method, fd_step)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(degenerate, 0.0, domega / np.where(degenerate, 1.0, omega))
    v = ratio[..., None, None] * h
    f = dh - v
    for a in (h, dh, v, f):
        a[degenerate] = 0.0
    _, m, _ = sector_generator(symbol(k))
    plus, minus = _eigvecs_from_generator(m)
    return omega_raw, np.where(degenerate, 0.0, domega), plus, minus, h, dh, v, f, degenerate


def spectral_data(symbol: StepSymbol, geometry: LatticeGeometry,
                  method: DerivativeMethod = "auto") -> SpectralData:
    method = _resolve_method(symbol, method)
    fields = _spectral_fields(symbol, geometry.momenta, method, geometry.spacing)
    omega, domega, plus, minus, h, dh, v, f, degenerate = fields
    return SpectralData(geometry, symbol, method, omega, domega, plus, minus,
                        h, dh, v, f, degenerate)


def energy_projectors(spectral: SpectralData):
    """Per-momentum rank-1 projectors ``(P+, P-)``, each of shape ``(N, 2, 2)``.

    Degenerate momenta get zero projectors (their weight is dropped).
    """
    plus, minus = spectral.plus, spectral.minus
    p_plus = plus[:, :, None] * np.conj(plus)[:, None, :]
    p_minus = minus[:, :, None] * np.conj(minus)[:, None, :]
    p_plus[spectral.degenerate] = 0.0
    p_minus[spectral.degenerate] = 0.0
    return p_plus, p_minus


def apply_diagonal(op: np.ndarray, state: SpinorField) -> SpinorField:
    """Apply a momentum-diagonal operator ``(N, 2, 2)`` to a momentum state."""
    state.require("momentum")
    return state.with_amplitudes(np.einsum("kab,bk->ak", op, state.amplitudes))


def _single_point(spectral: SpectralData, k):
    k = np.atleast_1d(np.asarray(k, dtype=np.float64))
    return _spectral_fields(spectral.symbol, k, spectral.method, spectral.geometry.spacing)


def zb_operator_F(spectral: SpectralData, k) -> np.ndarray:
    """Oscillation operator ``F(k) = H'(k) - (omega'/omega) H(k)`` at arbitrary ``k``."""
    *_, f, degenerate = _single_point(spectral, k)
    if np.any(degenerate):
        raise DegeneracyError(f"degenerate spectrum at k={k}")
    return f[0] if np.ndim(k) == 0 else f


def zb_coupling(spectral: SpectralData, k) -> complex:
    """``f(k) = <+|F|-> / (1j omega)``, the complex oscillation strength.

    With this normalization a packet ``c+ |+> + c- |->`` peaked at ``k``
    oscillates as ``|c+||c-||f| cos(2 omega t + phi0)``.
    """
    omega, _, plus, minus, _, _, _, f, degenerate = _single_point(spectral, k)
    if np.any(degenerate):
        raise DegeneracyError(f"degenerate spectrum at k={k}")
    elem = np.conj(plus[0]) @ f[0] @ minus[0]
    return complex(elem / (1j * omega[0]))


def mean_position(state: SpinorField) -> float:
    """``<X>`` using the site labels; warns if the packet reached the wrap region."""
    state.require("position")
    check_boundary(state)
    p = np.sum(np.abs(state.amplitudes) ** 2, axis=0)
    return float(np.dot(state.geometry.sites, p) / p.sum())


def position_trajectory(initial: SpinorField, symbol: StepSymbol, steps: int) -> np.ndarray:
    """``<X(t)>`` for ``t = 0 .. steps`` by direct evolution."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    start = to_momentum(initial) if initial.representation == "position" else initial
    return np.array([mean_position(to_position(s)) for s in evolve_momentum(start, symbol, steps)])


@dataclass(frozen=True)
class ZbDecomposition:
    steps: np.ndarray
    x_plus: np.ndarray
    x_minus: np.ndarray
    x0: float
    z: np.ndarray
    dropped_weight: float

    @property
    def total(self) -> np.ndarray:
        return self.x_plus + self.x_minus + self.x0 + self.z


def _x_expect(bra: SpinorField, ket: SpinorField) -> complex:
    """``<bra|X|ket>`` evaluated in the position basis."""
    b, k = to_position(bra), to_position(ket)
    return complex(np.sum(np.conj(b.amplitudes) * k.amplitudes * b.geometry.sites))


def _diag_expect(bra: SpinorField, op: np.ndarray, ket: SpinorField) -> complex:
    return complex(np.einsum("ak,kab,bk->", np.conj(bra.amplitudes), op, ket.amplitudes))


def sector_split(state: SpinorField, spectral: SpectralData):
    """Return ``(psi_plus, psi_minus, dropped_weight)`` in the momentum representation."""
    mom = to_momentum(state) if state.representation == "position" else state
    p_plus, p_minus = energy_projectors(spectral)
    dropped = float(np.sum(np.abs(mom.amplitudes[:, spectral.degenerate]) ** 2))
    return apply_diagonal(p_plus, mom), apply_diagonal(p_minus, mom), dropped


def zb_decompose(initial: SpinorField, spectral: SpectralData, steps: int) -> ZbDecomposition:
    """Split ``<X(t)>`` into sector drifts, interference shift and oscillation."""
    if initial.representation == "position":
        check_boundary(initial)
    psi_p, psi_m, dropped = sector_split(initial, spectral)
    t = np.arange(steps + 1)

    x_plus = _x_expect(psi_p, psi_p).real + t * _diag_expect(psi_p, spectral.velocity, psi_p).real
    x_minus = _x_expect(psi_m, psi_m).real + t * _diag_expect(psi_m, spectral.velocity, psi_m).real

    omega = np.where(spectral.degenerate, 1.0, spectral.omega)
    p_plus, p_minus = energy_projectors(spectral)
    # (2iH)^-1 per momentum: H = omega (P+ - P-)
    inv_2ih = (p_plus - p_minus) / (2j * omega)[:, None, None]
    f_minus = apply_diagonal(spectral.zb, psi_m)
    shift = _diag_expect(psi_p, inv_2ih, f_minus)
    x0 = 2.0 * (_x_expect(psi_p, psi_m) - shift).real

    z = np.empty(t.size)
    for i, ti in enumerate(t):
        # exp(2iHt) per momentum
        phase = (np.exp(2j * omega * ti)[:, None, None] * p_plus
                 + np.exp(-2j * omega * ti)[:, None, None] * p_minus)
        z[i] = 2.0 * _diag_expect(psi_p, inv_2ih @ phase, f_minus).real
    return ZbDecomposition(t, x_plus, x_minus, float(x0), z, dropped)


@dataclass(frozen=True)
class ZbPrediction:
    amplitude: float
    frequency: float
    phase: float
    coupling: float

    @property
    def period(self) -> float:
        return 2 * math.pi / self.frequency if self.frequency else math.inf


def zb_predict(c_plus: complex, c_minus: complex, k0: float, spectral: SpectralData) -> ZbPrediction:
    """Small-t oscillation ``|c+||c-||f(k0)| cos(2 omega(k0) t + phi0)``.

    ``phi0`` depends on the eigenvector gauge of :func:`~diracwalk.walk.dispersion`.
    """
    f = zb_coupling(spectral, k0)
    omega = float(_single_point(spectral, k0)[0][0])
    amp = abs(c_plus) * abs(c_minus) * abs(f)
    phase = float(np.angle(np.conj(c_plus) * c_minus * f)) if amp > 0 else 0.0
    return ZbPrediction(amp, 2.0 * omega, phase, abs(f))


def coin_sector_amplitudes(coin, spectral: SpectralData, k0: float):
    """``(c+, c-)``: overlaps of a coin state with the eigenvectors at ``k0``."""
    _, _, plus, minus, *_ = _single_point(spectral, k0)
    coin = np.asarray(coin, dtype=complex)
    return complex(np.vdot(plus[0], coin)), complex(np.vdot(minus[0], coin))


def sector_weights(state: SpinorField, spectral: SpectralData):
    """``(|c+|^2, |c-|^2)`` of a state: norms of its projections."""
    psi_p, psi_m, _ = sector_split(state, spectral)
    return psi_p.norm() ** 2, psi_m.norm() ** 2
