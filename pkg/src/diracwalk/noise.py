"""Imperfect photonic walk: q-plate tunings, waveplate offsets, SLM efficiencies.

The model stays coherent: each step is the ideal step with perturbed
parameters.  The generation SLM reshapes the input amplitudes per OAM
mode, the detection SLM weights the measured populations, and only the
modes in the measured window are kept and renormalized.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .lattice import SiteDistribution, SpinorField, site_distribution
from .optimize import levenberg_marquardt
from .walk import WalkStepParams, apply_step_position

Provenance = Literal["synthetic", "external"]

DEFAULT_MODES = (-5, 5)
DEFAULT_COUNTS = 10_000
OFFSET_BOUND = 0.5
EFFICIENCY_FLOOR = 1e-3


def _as_float_array(values, name, size=None):
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or (size is not None and arr.size != size):
        raise ValueError(f"{name} must be a 1-d array" + (f" of length {size}" if size else ""))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NoiseModel:
    """Per-step device parameters and per-mode SLM efficiencies.

    ``qplate_tuning[i]`` is the tuning of the q-plate in step ``i+1``; its
    conversion efficiency is ``sin(delta/2)**2``.  Offsets are added to the
    nominal waveplate angles and q-plate axis.  Efficiencies are indexed by
    ``modes`` (consecutive OAM values).
    """

    qplate_tuning: np.ndarray
    waveplate_offset_alpha: np.ndarray
    waveplate_offset_beta: np.ndarray
    qplate_axis_offset: np.ndarray
    eta_gen: np.ndarray
    eta_det: np.ndarray
    modes: tuple[int, int] = DEFAULT_MODES
    counts: int = DEFAULT_COUNTS

    def __post_init__(self):
        delta = _as_float_array(self.qplate_tuning, "qplate_tuning")
        steps = delta.size
        object.__setattr__(self, "qplate_tuning", delta)
        for name in ("waveplate_offset_alpha", "waveplate_offset_beta", "qplate_axis_offset"):
            object.__setattr__(self, name, _as_float_array(getattr(self, name), name, steps))
        lo, hi = (int(v) for v in self.modes)
        if lo > hi:
            raise ValueError(f"empty mode range {self.modes}")
        object.__setattr__(self, "modes", (lo, hi))
        for name in ("eta_gen", "eta_det"):
            object.__setattr__(self, name, _as_float_array(getattr(self, name), name, hi - lo + 1))
        if np.any((delta < 0) | (delta > math.pi)):
            raise ValueError("q-plate tunings must lie in [0, pi]")
        for name in ("eta_gen", "eta_det"):
            eta = getattr(self, name)
            if np.any((eta <= 0) | (eta > 1)):
                raise ValueError(f"{name} must lie in (0, 1]")
        if int(self.counts) != self.counts or self.counts < 1:
            raise ValueError("counts must be a positive integer")
        object.__setattr__(self, "counts", int(self.counts))

    @property
    def steps(self) -> int:
        return self.qplate_tuning.size

    @property
    def mode_sites(self) -> np.ndarray:
        return np.arange(self.modes[0], self.modes[1] + 1)

    @classmethod
    def ideal(cls, steps: int = 8, modes=DEFAULT_MODES, counts: int = DEFAULT_COUNTS) -> "NoiseModel":
        n_modes = modes[1] - modes[0] + 1
        zeros = np.zeros(steps)
        return cls(np.full(steps, math.pi), zeros, zeros, zeros,
                   np.ones(n_modes), np.ones(n_modes), tuple(modes), counts)

    def qplate_efficiency(self) -> np.ndarray:
        return np.sin(self.qplate_tuning / 2) ** 2

    def to_dict(self) -> dict:
        return {
            "qplate_tuning": self.qplate_tuning.tolist(),
            "waveplate_offset_alpha": self.waveplate_offset_alpha.tolist(),
            "waveplate_offset_beta": self.waveplate_offset_beta.tolist(),
            "qplate_axis_offset": self.qplate_axis_offset.tolist(),
            "eta_gen": self.eta_gen.tolist(),
            "eta_det": self.eta_det.tolist(),
            "modes": list(self.modes),
            "counts": self.counts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        expected = set(cls.__dataclass_fields__)
        unknown = set(data) - expected
        if unknown:
            raise ValueError(f"unknown noise-model keys: {sorted(unknown)}")
        missing = expected - set(data) - {"modes", "counts"}
        if missing:
            raise ValueError(f"missing noise-model keys: {sorted(missing)}")
        data = dict(data)
        if "modes" in data:
            data["modes"] = tuple(data["modes"])
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class StepDataset:
    """Measured or simulated site distributions, one per step starting at t=0."""

    distributions: tuple[SiteDistribution, ...]
    provenance: Provenance = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "distributions", tuple(self.distributions))
        if self.provenance not in ("synthetic", "external"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return len(self.distributions)

    def __getitem__(self, t) -> SiteDistribution:
        return self.distributions[t]

    @property
    def steps(self) -> np.ndarray:
        return np.arange(len(self.distributions))

    def means(self) -> np.ndarray:
        return np.array([d.mean() for d in self.distributions])

    def matrix(self, xmin: int, xmax: int) -> np.ndarray:
        """Probabilities as a ``(steps, sites)`` array over ``[xmin, xmax]``."""
        return np.array([d.restrict(xmin, xmax).probabilities for d in self.distributions])


def _step_params(nominal: WalkStepParams, noise: NoiseModel, i: int) -> WalkStepParams:
    if nominal.mode != "hardware":
        raise ValueError("the noise model perturbs hardware-mode steps only")
    return WalkStepParams.hardware(
        delta=noise.qplate_tuning[i],
        alpha0=nominal.alpha0 + noise.qplate_axis_offset[i],
        alpha=nominal.alpha + noise.waveplate_offset_alpha[i],
        beta=nominal.beta + noise.waveplate_offset_beta[i],
        q=nominal.q,
    )


def _per_step(params, steps) -> list[WalkStepParams]:
    if isinstance(params, WalkStepParams):
        return [params] * steps
    params = list(params)
    if len(params) < steps:
        raise ValueError(f"need nominal parameters for {steps} steps, got {len(params)}")
    return params


def _mode_weights(sites: np.ndarray, noise: NoiseModel, eta: np.ndarray) -> np.ndarray:
    """Efficiency per lattice site; sites outside the mode range are not measured."""
    lo, hi = noise.modes
    w = np.zeros(sites.size)
    inside = (sites >= lo) & (sites <= hi)
    w[inside] = eta[sites[inside] - lo]
    return w


def prepare_input(state: SpinorField, noise: NoiseModel) -> SpinorField:
    """Apply the generation-SLM efficiencies to the input amplitudes."""
    state.require("position")
    sites = state.geometry.sites
    lo, hi = noise.modes
    outside = (sites < lo) | (sites > hi)
    if np.any(np.abs(state.amplitudes[:, outside]) > 0):
        raise ValueError(f"input state has support outside the prepared modes {noise.modes}")
    amps = state.amplitudes * np.sqrt(_mode_weights(sites, noise, noise.eta_gen))
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ValueError("generation efficiencies remove the whole input")
    return state.with_amplitudes(amps / norm)


def apply_detection_efficiency(dist: SiteDistribution, eta_det, modes=None) -> SiteDistribution:
    """Reweight populations by detection efficiency and renormalize.

    ``eta_det`` is indexed by ``modes`` (default: the distribution's own
    sites).  Standard errors scale by the same per-site factor.
    """
    eta = np.asarray(eta_det, dtype=np.float64)
    if modes is None:
        if eta.size != dist.sites.size:
            raise ValueError("efficiency vector does not match the distribution support")
        weights = eta
    else:
        lo, hi = modes
        weights = np.zeros(dist.sites.size)
        inside = (dist.sites >= lo) & (dist.sites <= hi)
        weights[inside] = eta[dist.sites[inside] - lo]
    raw = dist.probabilities * weights
    total = raw.sum()
    if total <= 0:
        raise ValueError("detection efficiencies leave zero total weight")
    err = None if dist.stderr is None else dist.stderr * weights / total
    return SiteDistribution(dist.sites, raw / total, err)


def _model_distributions(state: SpinorField, nominal, noise: NoiseModel, steps: int) -> np.ndarray:
    """Renormalized window populations, shape ``(steps+1, n_modes)``."""
    lo, hi = noise.modes
    cols = state.geometry.index(np.arange(lo, hi + 1))
    det = noise.eta_det
    out = np.empty((steps + 1, hi - lo + 1))
    psi = prepare_input(state, noise)
    for t in range(steps + 1):
        if t:
            psi = apply_step_position(psi, _step_params(nominal[t - 1], noise, t - 1))
        p = np.sum(np.abs(psi.amplitudes[:, cols]) ** 2, axis=0) * det
        total = p.sum()
        if total <= 0:
            raise ValueError(f"no detected probability in the mode window at step {t}")
        out[t] = p / total
    return out


def noisy_evolution(state: SpinorField, params, noise: NoiseModel, steps: int) -> list[SiteDistribution]:
    """Distributions over the mode window for ``t = 0 .. steps``.

    ``params`` is the nominal hardware step (or one per step).
    """
    if steps > noise.steps:
        raise ValueError(f"noise model covers {noise.steps} steps, asked for {steps}")
    nominal = _per_step(params, steps)
    probs = _model_distributions(state, nominal, noise, steps)
    sites = noise.mode_sites
    return [SiteDistribution(sites, p) for p in probs]


def ideal_window_distributions(state: SpinorField, symbol_params, steps: int, modes=DEFAULT_MODES):
    """Noise-free evolution restricted to ``modes`` and renormalized there."""
    out = []
    psi = state
    for t in range(steps + 1):
        if t:
            psi = apply_step_position(psi, symbol_params)
        out.append(site_distribution(psi).restrict(*modes, renormalize=True))
    return out


def sample_counts(dist: SiteDistribution, total: int, seed) -> SiteDistribution:
    """Multinomial draw of ``total`` detection events.

    Reports frequencies ``counts/total`` with Poissonian errors ``sqrt(counts)/total``.
    """
    if total < 1:
        raise ValueError("total counts must be at least 1")
    rng = np.random.default_rng(seed)
    p = np.clip(dist.probabilities, 0.0, None)
    counts = rng.multinomial(int(total), p / p.sum())
    return SiteDistribution(dist.sites, counts / total, np.sqrt(counts) / total)


def sample_dataset(dists: Sequence[SiteDistribution], total: int, seed) -> StepDataset:
    """Independent count samples per step from one seeded generator stream."""
    seeds = np.random.SeedSequence(seed).spawn(len(dists))
    return StepDataset(tuple(sample_counts(d, total, s) for d, s in zip(dists, seeds)), "synthetic")


def bhattacharyya(p: SiteDistribution, q: SiteDistribution) -> float:
    if p.sites.shape != q.sites.shape or np.any(p.sites != q.sites):
        raise ValueError("distributions have different supports")
    return float(np.sum(np.sqrt(np.clip(p.probabilities, 0, None) * np.clip(q.probabilities, 0, None))))


def fidelity(p: SiteDistribution, q: SiteDistribution) -> float:
    """Classical fidelity ``(sum_x sqrt(p q))**2``."""
    return min(1.0, bhattacharyya(p, q) ** 2)


def total_variation(p: SiteDistribution, q: SiteDistribution) -> float:
    if np.any(p.sites != q.sites):
        raise ValueError("distributions have different supports")
    return 0.5 * float(np.abs(p.probabilities - q.probabilities).sum())


# calibration ---------------------------------------------------------------

PARAMETER_GROUPS = (
    "qplate_tuning",
    "waveplate_offset_alpha",
    "waveplate_offset_beta",
    "qplate_axis_offset",
    "eta_gen",
    "eta_det",
)


def _bounds(group: str, size: int):
    if group == "qplate_tuning":
        return np.zeros(size), np.full(size, math.pi)
    if group.startswith("eta"):
        return np.full(size, EFFICIENCY_FLOOR), np.ones(size)
    return np.full(size, -OFFSET_BOUND), np.full(size, OFFSET_BOUND)


@dataclass
class CalibrationResult:
    model: NoiseModel
    objective: float
    step_residuals: np.ndarray  # sum of squared residuals per step
    fidelities: np.ndarray
    converged: bool
    message: str
    iterations: int
    history: list[float] = field(default_factory=list)

    def report(self) -> dict:
        return {
            "objective": self.objective,
            "converged": self.converged,
            "message": self.message,
            "iterations": self.iterations,
            "step_residuals": self.step_residuals.tolist(),
            "fidelities": self.fidelities.tolist(),
        }


def calibrate(
    measured: StepDataset,
    guess: NoiseModel,
    params,
    state: SpinorField,
    free: Sequence[str] = PARAMETER_GROUPS,
    max_iter: int = 500,
    gtol: float = 1e-10,
) -> CalibrationResult:
    """Fit noise parameters to measured step distributions.

    Minimizes ``sum_t sum_x (model_t(x) - measured_t(x))**2`` over the
    parameter groups in ``free`` within their physical bounds.  ``state``
    is the nominal input state; ``params`` the nominal hardware step(s).
    """
    steps = len(measured) - 1
    if steps < 1:
        raise ValueError("calibration needs at least two measured steps")
    if steps > guess.steps:
        raise ValueError("measured data has more steps than the noise model")
    unknown = set(free) - set(PARAMETER_GROUPS)
    if unknown:
        raise ValueError(f"unknown parameter groups {sorted(unknown)}")
    free = [g for g in PARAMETER_GROUPS if g in free]
    nominal = _per_step(params, steps)
    lo, hi = guess.modes
    data = measured.matrix(lo, hi)
    # full-lattice data is compared on the same renormalized window as the model
    totals = data.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ValueError(f"measured data has no weight in the modes {guess.modes} at some step")
    data = data / totals

    sizes = [getattr(guess, g).size for g in free]
    splits = np.cumsum(sizes)[:-1]
    x0 = np.concatenate([getattr(guess, g) for g in free]) if free else np.empty(0)
    bounds = [_bounds(g, s) for g, s in zip(free, sizes)]
    lower = np.concatenate([b[0] for b in bounds]) if free else np.empty(0)
    upper = np.concatenate([b[1] for b in bounds]) if free else np.empty(0)

    def unpack(x) -> NoiseModel:
        return replace(guess, **dict(zip(free, np.split(x, splits))))

    def residuals(x):
        return (_model_distributions(state, nominal, unpack(x), steps) - data).ravel()

    result = levenberg_marquardt(residuals, np.clip(x0, lower, upper), lower, upper,
                                 max_iter=max_iter, gtol=gtol)
    model = unpack(result.x)
    fitted = _model_distributions(state, nominal, model, steps)
    per_step = np.sum((fitted - data) ** 2, axis=1)
    sites = guess.mode_sites
    fids = np.array([
        fidelity(SiteDistribution(sites, m), SiteDistribution(sites, d))
        for m, d in zip(fitted, data)
    ])
    return CalibrationResult(model, result.cost, per_step, fids, result.converged,
                             result.message, result.iterations, result.history)
