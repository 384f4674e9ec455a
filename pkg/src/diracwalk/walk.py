"""Step unitaries of the coin-walker quantum walk and their application.

A step symbol ``U(k)`` is a 2x2 unitary for each lattice momentum.  Every
symbol used here is a trigonometric polynomial of degree one,

    U(k) = A[-1] exp(-1j k) + A[0] + A[+1] exp(1j k),

so the position-space step is ``psi'(x) = sum_s A[s] psi(x + s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from .lattice import SpinorField

SQRT1_2 = math.sqrt(0.5)
CLAMP_TOL = 1e-12
DET_TOL = 1e-10
DEGENERACY_TOL = 1e-9


class NotSpecialUnitaryError(ValueError):
    """The symbol has ``det U(k) != 1`` or a cosine outside [-1, 1]."""


@dataclass(frozen=True)
class WalkStepParams:
    """Parameters for one walk step.

    Hardware mode follows the optical elements: q-plate tuning ``delta``
    in [0, pi], q-plate axis offset ``alpha0``, quarter- and half-waveplate
    angles ``alpha`` and ``beta`` (radians), and the q-plate charge ``q``
    (recorded only; the lattice shift is always one site).  Abstract mode
    is the Dirac walk with ``n**2 + m**2 == 1``.
    """

    mode: Literal["hardware", "abstract"]
    delta: float = math.pi
    alpha0: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    q: float = 0.5
    n: float = 1.0
    m: float = 0.0

    def __post_init__(self):
        if self.mode == "hardware":
            if not 0.0 <= self.delta <= math.pi:
                raise ValueError(f"q-plate tuning must lie in [0, pi], got {self.delta}")
            if (2 * self.q) != round(2 * self.q):
                raise ValueError(f"q must be a half-integer, got {self.q}")
        elif self.mode == "abstract":
            if abs(self.n**2 + self.m**2 - 1.0) >= 1e-12:
                raise ValueError(f"need n**2 + m**2 == 1, got n={self.n}, m={self.m}")
        else:
            raise ValueError(f"unknown walk mode {self.mode!r}")

    @classmethod
    def hardware(cls, delta, alpha0, alpha, beta, q=0.5) -> "WalkStepParams":
        return cls("hardware", delta=float(delta), alpha0=float(alpha0),
                   alpha=float(alpha), beta=float(beta), q=float(q))

    @classmethod
    def abstract(cls, n, m) -> "WalkStepParams":
        return cls("abstract", n=float(n), m=float(m))

    @classmethod
    def dirac(cls, mass) -> "WalkStepParams":
        """Abstract Dirac walk with ``m = mass`` and ``n = sqrt(1 - mass**2)``."""
        return cls.abstract(math.sqrt(1.0 - mass * mass), mass)


#: Waveplate and q-plate settings used in the photonic experiment.
EXPERIMENT_STEP = WalkStepParams.hardware(math.pi, math.pi / 4, -math.pi / 4, math.pi / 4)
#: Abstract Dirac walk sharing the dispersion of ``EXPERIMENT_STEP``.
DIRAC_STEP = WalkStepParams.abstract(SQRT1_2, SQRT1_2)


def coin_matrix(alpha: float, beta: float) -> np.ndarray:
    """Quarter-waveplate then half-waveplate, in the circular basis (R, L)."""
    d = alpha - beta
    return SQRT1_2 * np.array(
        [
            [np.exp(2j * d), 1j * np.exp(2j * alpha)],
            [1j * np.exp(-2j * alpha), np.exp(-2j * d)],
        ]
    )


def _qplate_taps(delta: float, alpha0: float) -> dict[int, np.ndarray]:
    c, s = math.cos(delta / 2), math.sin(delta / 2)
    up = np.zeros((2, 2), complex)
    down = np.zeros((2, 2), complex)
    up[0, 1] = 1j * np.exp(2j * alpha0) * s
    down[1, 0] = 1j * np.exp(-2j * alpha0) * s
    return {-1: down, 0: c * np.eye(2, dtype=complex), 1: up}


def qplate_symbol(delta: float, alpha0: float, k) -> np.ndarray:
    """Q-plate action at momentum ``k`` (scalar or array; result ``(..., 2, 2)``)."""
    if not 0.0 <= delta <= math.pi:
        raise ValueError(f"q-plate tuning must lie in [0, pi], got {delta}")
    return _evaluate_taps(_qplate_taps(delta, alpha0), k)


def _evaluate_taps(taps: dict[int, np.ndarray], k) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    out = np.zeros(k.shape + (2, 2), complex)
    for s, a in taps.items():
        out += np.exp(1j * s * k)[..., None, None] * a
    return out


@dataclass(frozen=True)
class StepSymbol:
    """The momentum symbol ``k -> U(k)`` of a walk step."""

    params: WalkStepParams

    def taps(self) -> dict[int, np.ndarray]:
        """Matrices ``A[s]`` multiplying ``exp(1j s k)``."""
        p = self.params
        if p.mode == "hardware":
            c = coin_matrix(p.alpha, p.beta)
            return {s: q @ c for s, q in _qplate_taps(p.delta, p.alpha0).items()}
        return {
            -1: np.array([[p.n, 0], [0, 0]], complex),
            0: np.array([[0, -1j * p.m], [-1j * p.m, 0]]),
            1: np.array([[0, 0], [0, p.n]], complex),
        }

    def __call__(self, k) -> np.ndarray:
        return _evaluate_taps(self.taps(), k)

    def derivative(self, k) -> np.ndarray:
        """Exact ``dU/dk``."""
        taps = {s: 1j * s * a for s, a in self.taps().items() if s}
        return _evaluate_taps(taps, k)


def step_symbol(params: WalkStepParams) -> StepSymbol:
    return StepSymbol(params)


def apply_step_momentum(state: SpinorField, symbol: StepSymbol) -> SpinorField:
    """Left-multiply the coin pair at each grid momentum by ``U(k)``."""
    state.require("momentum")
    u = symbol(state.geometry.momenta)
    return state.with_amplitudes(np.einsum("kab,bk->ak", u, state.amplitudes))


def _shift(amps: np.ndarray, s: int) -> np.ndarray:
    # exp(1j s k) maps x -> x - s, i.e. new[x] = old[x + s]
    return np.roll(amps, -s, axis=-1) if s else amps


def apply_step_position(state: SpinorField, params: WalkStepParams) -> SpinorField:
    """One step in position space on the periodic lattice.

    Hardware steps apply the waveplate coin on every site and then the
    q-plate: ``cos(delta/2)`` leaves the walker in place, the ``exp(1j k)``
    entry moves L -> R one site down, the ``exp(-1j k)`` entry moves R -> L
    one site up.
    """
    state.require("position")
    psi = state.amplitudes
    if params.mode == "hardware":
        psi = coin_matrix(params.alpha, params.beta) @ psi
        taps = _qplate_taps(params.delta, params.alpha0)
    else:
        taps = StepSymbol(params).taps()
    out = np.zeros_like(psi)
    for s, a in taps.items():
        out += a @ _shift(psi, s)
    return state.with_amplitudes(out)


class Dispersion(NamedTuple):
    omega: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    degenerate: np.ndarray


def _gauge(vectors: np.ndarray) -> np.ndarray:
    # first component real and nonnegative; if it vanishes, second real positive
    first = vectors[..., 0]
    ref = np.where(np.abs(first) > 1e-12, first, vectors[..., 1])
    phase = np.exp(-1j * np.angle(ref))
    return vectors * phase[..., None]


def special_unitary(u: np.ndarray) -> np.ndarray:
    """Divide out ``sqrt(det U)`` so the result has unit determinant."""
    det = np.linalg.det(u)
    return u / np.sqrt(det)[..., None, None]


def sector_generator(u: np.ndarray):
    """Return ``(omega, M, degenerate)`` with ``U = cos(omega) - 1j sin(omega) M``.

    ``M`` is Hermitian with eigenvalues +-1; its +1 eigenvector is the
    positive-energy state.  At degenerate points ``M`` is set to ``sigma_z``.
    """
    u = np.asarray(u)
    det = np.linalg.det(u)
    if np.any(np.abs(det - 1.0) > DET_TOL):
        raise NotSpecialUnitaryError(
            "symbol is not special unitary; use special_unitary() to factor the phase"
        )
    c = np.real(np.trace(u, axis1=-2, axis2=-1)) / 2.0
    if np.any(np.abs(c) > 1.0 + CLAMP_TOL):
        raise NotSpecialUnitaryError("|Re tr U / 2| exceeds 1; symbol is not unitary")
    c = np.clip(c, -1.0, 1.0)
    omega = np.arccos(c)
    sin_w = np.sin(omega)
    degenerate = np.abs(sin_w) < DEGENERACY_TOL
    safe = np.where(degenerate, 1.0, sin_w)
    m = 1j * (u - c[..., None, None] * np.eye(2)) / safe[..., None, None]
    m = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
    m = np.where(degenerate[..., None, None], np.diag([1.0, -1.0]).astype(complex), m)
    return omega, m, degenerate


def _eigvecs_from_generator(m: np.ndarray):
    eye = np.eye(2)
    vecs = []
    for sign in (1.0, -1.0):
        proj = 0.5 * (eye + sign * m)
        # the column of the rank-1 projector with the larger norm spans its range
        cols = np.swapaxes(proj, -1, -2)
        norms = np.linalg.norm(cols, axis=-1)
        pick = np.argmax(norms, axis=-1)
        v = np.take_along_axis(cols, pick[..., None, None], axis=-2)[..., 0, :]
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        vecs.append(_gauge(v))
    return vecs


def dispersion(symbol, k) -> Dispersion:
    """Eigenphases and eigenvectors with ``U(k)|+-> = exp(-+1j omega)|+->``.

    ``symbol`` may be a :class:`StepSymbol` or an array of 2x2 matrices
    (in which case ``k`` is ignored).  ``omega`` lies in [0, pi].  At
    degenerate momenta (``omega`` 0 or pi) the returned basis is the coin
    basis and the ``degenerate`` flag is set.
    """
    u = symbol(k) if callable(symbol) else np.asarray(symbol)
    omega, m, degenerate = sector_generator(u)
    plus, minus = _eigvecs_from_generator(m)
    return Dispersion(omega, plus, minus, degenerate)


def evolve_momentum(state: SpinorField, symbol: StepSymbol, steps: int):
    """Yield the momentum-space state after 0, 1, ..., ``steps`` steps."""
    state.require("momentum")
    u = symbol(state.geometry.momenta)
    amps = state.amplitudes
    yield state
    for _ in range(steps):
        amps = np.einsum("kab,bk->ak", u, amps)
        yield state.with_amplitudes(amps)
