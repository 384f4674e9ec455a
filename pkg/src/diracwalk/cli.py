"""``diracwalk`` command-line interface.

Subcommands: simulate, fit, analytics, calibrate, sample.  Exit codes are
0 on success, 2 for configuration errors and 3 for data errors.
"""

from __future__ import annotations

import argparse
import math
import platform
import shutil
import sys
import tempfile
import warnings
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import (
    DegeneracyError,
    coin_sector_amplitudes,
    position_trajectory,
    sector_split,
    sector_weights,
    spectral_data,
    zb_decompose,
    zb_predict,
)
from .fitting import fit_static, fit_surface
from .formats import (
    DISTRIBUTIONS_CSV,
    MEAN_POSITION_CSV,
    ConfigError,
    DataError,
    RunConfig,
    dataset_to_csv,
    dump_json,
    load_config,
    means_to_csv,
    read_dataset,
)
from .lattice import (
    BoundaryContaminationWarning,
    SpinorField,
    edge_mass,
    make_geometry,
    make_input_state,
    site_distribution,
    to_momentum,
    to_position,
    truncated_gaussian_profile,
)
from .noise import (
    PARAMETER_GROUPS,
    NoiseModel,
    StepDataset,
    calibrate,
    noisy_evolution,
    sample_dataset,
)
from .walk import evolve_momentum, step_symbol

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3
BOUNDARY_TOL = 1e-10


def versions() -> dict:
    import matplotlib

    return {
        "diracwalk": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "matplotlib": matplotlib.__version__,
    }


@contextmanager
def staged_output(out: Path):
    """Yield a scratch directory whose files move into ``out`` only on success."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".diracwalk-", dir=out.parent))
    try:
        yield scratch
        out.mkdir(parents=True, exist_ok=True)
        for item in sorted(scratch.iterdir()):
            item.replace(out / item.name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


# input construction ----------------------------------------------------------

def build_input(cfg: RunConfig, spectral=None) -> SpinorField:
    """Input state described by ``cfg.input``, projected on a sector if asked."""
    geometry = make_geometry(cfg.lattice_size)
    inp = cfg.input
    window = inp.window if inp.window is not None else (None, None)
    try:
        profile = truncated_gaussian_profile(inp.x0, inp.sigma, *window, geometry).astype(complex)
        if inp.momentum:
            profile *= np.exp(1j * inp.momentum * geometry.sites)
        state = make_input_state(inp.coin_amplitudes(), profile, geometry)
    except ValueError as exc:
        raise ConfigError(f"input: {exc}") from None
    if inp.sector == "both":
        return state
    if spectral is None:
        spectral = spectral_data(step_symbol(cfg.step_params()), geometry)
    psi_p, psi_m, _ = sector_split(state, spectral)
    chosen = psi_p if inp.sector == "positive" else psi_m
    norm = chosen.norm()
    if norm < 1e-12:
        raise ConfigError(f"input has no weight in the {inp.sector} sector")
    return to_position(chosen.with_amplitudes(chosen.amplitudes / norm))


def simulate_distributions(cfg: RunConfig) -> tuple[list, NoiseModel | None]:
    """Per-step distributions: whole lattice when ideal, mode window when noisy."""
    params = cfg.step_params()
    noise = cfg.load_noise_model()
    state = build_input(cfg)
    if noise is not None:
        try:
            return noisy_evolution(state, params, noise, cfg.steps), noise
        except ValueError as exc:
            raise ConfigError(f"noisy evolution: {exc}") from None
    dists = []
    symbol = step_symbol(params)
    momentum = evolve_momentum(_momentum(state), symbol, cfg.steps)
    for t, psi in enumerate(momentum):
        pos = to_position(psi)
        mass = edge_mass(pos)
        if mass > BOUNDARY_TOL:
            raise DataError(
                f"step {t}: probability {mass:.3g} reached the periodic boundary; "
                "increase lattice_size"
            )
        dists.append(site_distribution(pos))
    return dists, None


def _momentum(state: SpinorField) -> SpinorField:
    return to_momentum(state) if state.representation == "position" else state


def manifest(command: str, cfg: RunConfig | None, **extra) -> dict:
    out = {"kind": "diracwalk-manifest", "command": command, "versions": versions()}
    if cfg is not None:
        config = cfg.to_dict()
        noise = cfg.load_noise_model()
        if noise is not None:
            config["noise_model"] = noise.to_dict()
        out["config"] = config
    out.update(extra)
    return out


# subcommands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .plotting import plot_distributions, plot_mean_position

    cfg = load_config(args.config) if args.config else RunConfig()
    dists, noise = simulate_distributions(cfg)
    counts = args.counts if args.counts is not None else (
        cfg.sampling.counts if cfg.sampling else None)
    seed = args.seed if args.seed is not None else (cfg.sampling.seed if cfg.sampling else 0)
    if counts is not None:
        if counts < 1:
            raise ConfigError("--counts must be positive")
        dataset = sample_dataset(dists, counts, seed)
    else:
        dataset = StepDataset(tuple(dists), "synthetic")
        seed = None
    out = Path(args.out or cfg.output_dir or "diracwalk-out")
    window = cfg.input.window or (-5, 5)
    crop = None if noise is not None else (min(window[0], -10), max(window[1], 10))
    with staged_output(out) as tmp:
        _write(tmp / DISTRIBUTIONS_CSV, dataset_to_csv(dataset))
        _write(tmp / MEAN_POSITION_CSV, means_to_csv(dataset))
        _write(tmp / "manifest.json", dump_json(manifest(
            "simulate", cfg, seed=seed, counts=counts, noisy=noise is not None)))
        plot_distributions(dataset, tmp / "distributions.png", crop=crop)
        plot_mean_position(dataset, tmp / "mean_position.png")
    print(f"wrote {len(dataset)} step distributions to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    from .plotting import plot_distributions, plot_mean_position

    src = Path(args.input)
    dataset = read_dataset(src)
    window = tuple(args.window) if args.window else (-5, 5)
    steps = tuple(args.steps) if args.steps else None
    try:
        fit = fit_surface(dataset, steps=steps, window=window, weighted=args.weighted)
        static = fit_static(dataset, steps=fit.step_window, window=window)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    report = fit.to_dict()
    report["static_residual_sum"] = static.residual_sum
    report["source"] = str(src)
    out = Path(args.out) if args.out else src
    a, b = fit.step_window
    sub = StepDataset(dataset.distributions[a: b + 1], dataset.provenance)
    with staged_output(out) as tmp:
        _write(tmp / "fit_report.json", dump_json(report))
        plot_distributions(sub, tmp / "fit.png", title="oscillating-Gaussian fit", fit=fit,
                           crop=window)
        plot_mean_position(
            StepDataset(tuple(d.restrict(*window) for d in sub.distributions), sub.provenance),
            tmp / "fit_mean.png", fit=fit)
    print(f"omega = {fit.omega:.4f} +/- {fit.error('omega'):.4f} rad/step")
    print(f"A     = {fit.amplitude:.4f} +/- {fit.error('amplitude'):.4f} sites")
    if not fit.converged:
        print("warning: fit did not converge; best point reported", file=sys.stderr)
    if fit.degenerate_covariance:
        print("warning: degenerate covariance", file=sys.stderr)
    return EXIT_OK


def _sector_amplitudes(coin, spectral, k, sector):
    c_plus, c_minus = coin_sector_amplitudes(coin, spectral, k)
    if sector == "positive":
        return c_plus / abs(c_plus), 0j
    if sector == "negative":
        return 0j, c_minus / abs(c_minus)
    return c_plus, c_minus


def _coupling_near(spectral, coin, k0, sector="both"):
    """Prediction at ``k0``; at a degenerate point use the limit from k0 + 1e-6."""
    note = None
    try:
        c = _sector_amplitudes(coin, spectral, k0, sector)
        return zb_predict(*c, k0, spectral), c, note
    except DegeneracyError:
        k1 = k0 + 1e-6
        note = f"degenerate spectrum at k0={k0}; prediction taken at k0+1e-6"
        c = _sector_amplitudes(coin, spectral, k1, sector)
        return zb_predict(*c, k1, spectral), c, note


def cmd_analytics(args) -> int:
    from .plotting import plot_analytics

    cfg = load_config(args.config) if args.config else RunConfig()
    symbol = step_symbol(cfg.step_params())
    geometry = make_geometry(cfg.lattice_size)
    spectral = spectral_data(symbol, geometry)
    state = build_input(cfg, spectral)
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundaryContaminationWarning)
        prediction, (c_plus, c_minus), note = _coupling_near(
            spectral, cfg.input.coin_amplitudes(), cfg.input.momentum, cfg.input.sector)
        if note:
            notes.append(note)
        decomposition = zb_decompose(state, spectral, cfg.steps)
        direct = position_trajectory(state, symbol, cfg.steps)
    notes += sorted({str(w.message) for w in caught})
    if np.any(spectral.degenerate):
        ks = spectral.momenta[spectral.degenerate]
        notes.append(f"degenerate momenta excluded from sector sums: {ks.round(6).tolist()}")
    w_plus, w_minus = sector_weights(state, spectral)
    report = {
        "method": spectral.method,
        "k0": cfg.input.momentum,
        "dispersion": {
            "k": spectral.momenta.tolist(),
            "omega": spectral.omega.tolist(),
            "group_velocity": spectral.domega.tolist(),
        },
        "sector_weights": {"plus": w_plus, "minus": w_minus},
        "coin_sector_amplitudes": {
            "plus": [c_plus.real, c_plus.imag], "minus": [c_minus.real, c_minus.imag]},
        "prediction": {
            "amplitude": prediction.amplitude,
            "frequency": prediction.frequency,
            "period": prediction.period if math.isfinite(prediction.period) else None,
            "phase": prediction.phase,
            "coupling": prediction.coupling,
        },
        "decomposition": {
            "step": decomposition.steps.tolist(),
            "x_plus": decomposition.x_plus.tolist(),
            "x_minus": decomposition.x_minus.tolist(),
            "x0": decomposition.x0,
            "z": decomposition.z.tolist(),
            "total": decomposition.total.tolist(),
            "direct": direct.tolist(),
            "dropped_weight": decomposition.dropped_weight,
        },
        "warnings": notes,
    }
    for note in notes:
        print(f"warning: {note}", file=sys.stderr)
    out = Path(args.out or cfg.output_dir or "diracwalk-out")
    with staged_output(out) as tmp:
        _write(tmp / "analytics.json", dump_json(report))
        plot_analytics(spectral.momenta, spectral.omega, decomposition, direct,
                       tmp / "analytics.png")
    print(f"amplitude = {prediction.amplitude:.6f}, frequency = {prediction.frequency:.6f}, "
          f"|f(k0)| = {prediction.coupling:.6f}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .plotting import plot_calibration

    cfg = load_config(args.config) if args.config else RunConfig()
    src = Path(args.input)
    measured = read_dataset(src)
    guess_path = Path(args.guess)
    if not guess_path.is_file():
        raise ConfigError(f"guess file not found: {guess_path}")
    try:
        guess = NoiseModel.from_json(guess_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ConfigError(f"{guess_path}: {exc}") from None
    free = args.free or list(PARAMETER_GROUPS)
    state = build_input(cfg)
    lo, hi = guess.modes
    if any(d.sites.min() > lo or d.sites.max() < hi for d in measured.distributions):
        raise DataError(f"measured distributions do not cover the modes {guess.modes}")
    try:
        result = calibrate(measured, guess, cfg.step_params(), state, free=free,
                           max_iter=args.max_iter)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    steps = len(measured) - 1
    model = StepDataset(tuple(noisy_evolution(state, cfg.step_params(), result.model, steps)))
    report = result.report()
    report["free"] = free
    report["bhattacharyya"] = [math.sqrt(f) for f in result.fidelities]
    report["source"] = str(src)
    out = Path(args.out) if args.out else src
    with staged_output(out) as tmp:
        _write(tmp / "noise_model.json", result.model.to_json())
        _write(tmp / "calibration_report.json", dump_json(report))
        clipped = StepDataset(tuple(d.restrict(lo, hi) for d in measured.distributions))
        plot_calibration(clipped, model, result.fidelities, tmp / "calibration.png")
    status = "converged" if result.converged else "NOT converged (best point reported)"
    print(f"calibration {status}: objective {result.objective:.3e}, "
          f"min fidelity {result.fidelities.min():.4f}")
    return EXIT_OK


def cmd_sample(args) -> int:
    src = Path(args.input)
    dataset = read_dataset(src, provenance="synthetic")
    if args.counts is None or args.counts < 1:
        raise ConfigError("sample needs --counts N with N >= 1")
    seed = args.seed if args.seed is not None else 0
    sampled = sample_dataset(dataset.distributions, args.counts, seed)
    out = Path(args.out) if args.out else src / f"sampled-{args.counts}-{seed}"
    with staged_output(out) as tmp:
        _write(tmp / DISTRIBUTIONS_CSV, dataset_to_csv(sampled))
        _write(tmp / MEAN_POSITION_CSV, means_to_csv(sampled))
        _write(tmp / "manifest.json", dump_json(manifest(
            "sample", None, source=str(src), counts=args.counts, seed=seed)))
    print(f"sampled {args.counts} counts per step into {out}")
    return EXIT_OK


# argument parsing --------------------------------------------------------------

def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diracwalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an ideal or noisy walk and write distributions")
    p.add_argument("--config", type=Path, help="RunConfig JSON (default: built-in setup)")
    p.add_argument("--out", type=Path)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--counts", type=int, help="sample this many detection events per step")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the oscillating Gaussian to a distributions directory")
    p.add_argument("input", type=Path)
    p.add_argument("--window", type=int, nargs=2, metavar=("MIN", "MAX"))
    p.add_argument("--steps", type=int, nargs=2, metavar=("A", "B"))
    p.add_argument("--weighted", action="store_true", help="weight residuals by 1/stderr")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("analytics", help="dispersion, sector weights and decomposition")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_analytics)

    p = sub.add_parser("calibrate", help="fit a noise model to measured distributions")
    p.add_argument("input", type=Path)
    p.add_argument("--guess", type=Path, required=True, help="initial NoiseModel JSON")
    p.add_argument("--config", type=Path, help="nominal setup (default: built-in)")
    p.add_argument("--free", nargs="+", choices=PARAMETER_GROUPS)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sample", help="draw finite-count data from a distributions directory")
    p.add_argument("input", type=Path)
    p.add_argument("--counts", type=int)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
