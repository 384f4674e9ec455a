"""Static PNG figures for CLI reports (Agg canvas, no global pyplot state)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .noise import StepDataset

# strip the version stamp so identical runs give identical files
_PNG_METADATA = {"Software": None}


def _save(fig: Figure, path: Path) -> Path:
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=110, metadata=_PNG_METADATA)
    return Path(path)


def _grid(dataset: StepDataset):
    lo = min(int(d.sites.min()) for d in dataset.distributions)
    hi = max(int(d.sites.max()) for d in dataset.distributions)
    return lo, hi, dataset.matrix(lo, hi)


def plot_distributions(dataset: StepDataset, path, title="site distributions", fit=None,
                       crop=None) -> Path:
    """Heat map of ``p_t(x)`` with the per-step mean, optionally the fitted mean curve.

    ``crop`` limits the displayed site range to ``(xmin, xmax)``.
    """
    lo, hi, mat = _grid(dataset)
    if crop is not None:
        lo, hi = max(lo, crop[0]), min(hi, crop[1])
        mat = dataset.matrix(lo, hi)
    steps = dataset.steps
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.add_subplot()
    img = ax.imshow(mat.T, origin="lower", aspect="auto", cmap="viridis",
                    extent=(steps[0] - 0.5, steps[-1] + 0.5, lo - 0.5, hi + 0.5))
    fig.colorbar(img, ax=ax, label="probability")
    ax.plot(steps, dataset.means(), "o", color="white", ms=4, label="mean")
    if fit is not None:
        t = np.linspace(steps[0], steps[-1], 200)
        ax.plot(t, fit.mean_curve(t), "-", color="tab:red", lw=1.5, label="fit")
    ax.set_xlabel("step t")
    ax.set_ylabel("site x")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_mean_position(dataset: StepDataset, path, fit=None) -> Path:
    steps = dataset.steps
    means = dataset.means()
    errs = [d.mean_stderr() for d in dataset.distributions]
    fig = Figure(figsize=(5.5, 3.5))
    ax = fig.add_subplot()
    if all(e is not None for e in errs):
        ax.errorbar(steps, means, yerr=errs, fmt="o", capsize=3, label="<X(t)>")
    else:
        ax.plot(steps, means, "o-", label="<X(t)>")
    if fit is not None:
        t = np.linspace(steps[0], steps[-1], 200)
        ax.plot(t, fit.mean_curve(t), "-", label="fitted mean")
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.set_xlabel("step t")
    ax.set_ylabel("mean position")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_analytics(momenta, omega, decomposition, direct, path) -> Path:
    """Dispersion relation next to the sector decomposition of ``<X(t)>``."""
    fig = Figure(figsize=(9.0, 3.6))
    ax1, ax2 = fig.subplots(1, 2)
    ax1.plot(momenta, omega, "-")
    ax1.plot(momenta, -np.asarray(omega), "-", color="tab:blue", alpha=0.5)
    ax1.set_xlabel("k")
    ax1.set_ylabel("quasi-energy")
    ax1.set_title("dispersion")

    t = decomposition.steps
    ax2.plot(t, direct, "ko", label="direct")
    ax2.plot(t, decomposition.total, "k-", lw=1, label="sum")
    ax2.plot(t, decomposition.x_plus, "--", label="x+")
    ax2.plot(t, decomposition.x_minus, "--", label="x-")
    ax2.plot(t, decomposition.z, "-", label="z")
    ax2.axhline(decomposition.x0, color="0.6", ls=":", label="x0")
    ax2.set_xlabel("step t")
    ax2.set_ylabel("position")
    ax2.set_title("mean-position decomposition")
    ax2.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    return _save(fig, path)


def plot_calibration(measured: StepDataset, model: StepDataset, fidelities, path) -> Path:
    """Measured versus calibrated-model distributions, one panel per step."""
    n = len(measured)
    cols = min(n, 5)
    rows = -(-n // cols)
    fig = Figure(figsize=(2.4 * cols, 2.0 * rows + 0.4))
    axes = np.atleast_1d(fig.subplots(rows, cols, sharex=True, sharey=True)).ravel()
    for t, ax in enumerate(axes):
        if t >= n:
            ax.set_visible(False)
            continue
        d, m = measured[t], model[t]
        ax.bar(d.sites, d.probabilities, width=0.8, color="0.75")
        ax.plot(m.sites, m.probabilities, "o-", ms=3, color="tab:red")
        ax.set_title(f"t={t}  F={fidelities[t]:.4f}", fontsize="small")
    fig.tight_layout()
    return _save(fig, path)
