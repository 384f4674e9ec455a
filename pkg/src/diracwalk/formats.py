"""On-disk formats: step-distribution CSV, mean-position CSV, run configs.

CSV files are UTF-8 with LF line endings; probabilities carry 12
significant digits and an empty ``stderr`` field means "exact".
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .lattice import SiteDistribution
from .noise import NoiseModel, StepDataset
from .walk import WalkStepParams

DISTRIBUTIONS_CSV = "distributions.csv"
MEAN_POSITION_CSV = "mean_position.csv"
DIST_HEADER = ["step", "site", "probability", "stderr"]
MEAN_HEADER = ["step", "mean", "stderr"]


class ConfigError(ValueError):
    """Invalid or unreadable run configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Missing, malformed or insufficient data (CLI exit code 3)."""


def fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.12g}"


def _write_rows(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def dataset_to_csv(dataset: StepDataset) -> str:
    rows = []
    for t, d in enumerate(dataset.distributions):
        err = d.stderr
        for i, (x, p) in enumerate(zip(d.sites, d.probabilities)):
            rows.append([t, int(x), fmt(float(p)), "" if err is None else fmt(float(err[i]))])
    return _write_rows(DIST_HEADER, rows)


def dataset_from_csv(text: str, provenance="external") -> StepDataset:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != DIST_HEADER:
        raise DataError(f"expected CSV header {','.join(DIST_HEADER)}, got {header}")
    per_step: dict[int, list] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise DataError(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            t, x, p = int(row[0]), int(row[1]), float(row[2])
            e = float(row[3]) if row[3] != "" else None
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        per_step.setdefault(t, []).append((x, p, e))
    if not per_step:
        raise DataError("no distribution rows")
    steps = sorted(per_step)
    if steps != list(range(len(steps))):
        raise DataError(f"steps must run 0..n without gaps, got {steps}")
    dists = []
    for t in steps:
        rows = sorted(per_step[t])
        errs = [r[2] for r in rows]
        has_err = [e is not None for e in errs]
        if any(has_err) and not all(has_err):
            raise DataError(f"step {t}: stderr given for some sites only")
        dists.append(SiteDistribution(
            [r[0] for r in rows], [r[1] for r in rows], errs if all(has_err) else None))
    return StepDataset(tuple(dists), provenance)


def means_to_csv(dataset: StepDataset) -> str:
    rows = []
    for t, d in enumerate(dataset.distributions):
        rows.append([t, fmt(d.mean()), fmt(d.mean_stderr())])
    return _write_rows(MEAN_HEADER, rows)


def means_from_csv(text: str):
    reader = csv.reader(io.StringIO(text))
    if next(reader, None) != MEAN_HEADER:
        raise DataError("bad mean-position header")
    steps, means, errs = [], [], []
    for row in reader:
        if row:
            steps.append(int(row[0]))
            means.append(float(row[1]))
            errs.append(float(row[2]) if row[2] else None)
    return np.array(steps), np.array(means), errs


def read_dataset(directory: Path, provenance="external") -> StepDataset:
    path = Path(directory) / DISTRIBUTIONS_CSV
    if not path.is_file():
        raise DataError(f"no {DISTRIBUTIONS_CSV} in {directory}")
    return dataset_from_csv(path.read_text(encoding="utf-8"), provenance)


def dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=False, allow_nan=True) + "\n"


# run configuration ------------------------------------------------------------

SQRT1_2 = math.sqrt(0.5)


@dataclass
class InputConfig:
    x0: int = 0
    sigma: float = 3.0
    window: list[int] | None = field(default_factory=lambda: [-5, 5])
    coin: list[list[float]] = field(default_factory=lambda: [[SQRT1_2, 0.0], [SQRT1_2, 0.0]])
    momentum: float = 0.0
    sector: str = "both"

    def coin_amplitudes(self) -> np.ndarray:
        return np.array([complex(re, im) for re, im in self.coin])


@dataclass
class SamplingConfig:
    counts: int = 10_000
    seed: int = 0


@dataclass
class RunConfig:
    lattice_size: int = 128
    steps: int = 8
    walk: dict = field(default_factory=lambda: {
        "mode": "hardware", "delta": math.pi, "alpha0": math.pi / 4,
        "alpha": -math.pi / 4, "beta": math.pi / 4, "q": 0.5,
    })
    input: InputConfig = field(default_factory=InputConfig)
    noise_model: str | dict | None = None  # path (relative to the config file) or inline
    sampling: SamplingConfig | None = None
    output_dir: str | None = None
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    def step_params(self) -> WalkStepParams:
        return walk_params_from_dict(self.walk)

    def noise_model_path(self) -> Path | None:
        if not isinstance(self.noise_model, str):
            return None
        path = Path(self.noise_model)
        return path if path.is_absolute() else self.base_dir / path

    def load_noise_model(self) -> NoiseModel | None:
        if self.noise_model is None:
            return None
        try:
            if isinstance(self.noise_model, dict):
                return NoiseModel.from_dict(self.noise_model)
            return NoiseModel.from_json(self.noise_model_path().read_text(encoding="utf-8"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"noise model: {exc}") from None

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("base_dir")
        return out


_WALK_KEYS = {
    "hardware": {"mode", "delta", "alpha0", "alpha", "beta", "q"},
    "abstract": {"mode", "n", "m"},
}


def walk_params_from_dict(data: dict) -> WalkStepParams:
    mode = data.get("mode")
    if mode not in _WALK_KEYS:
        raise ConfigError(f"walk.mode must be 'hardware' or 'abstract', got {mode!r}")
    unknown = set(data) - _WALK_KEYS[mode]
    if unknown:
        raise ConfigError(f"unknown walk keys for {mode} mode: {sorted(unknown)}")
    kwargs = {k: v for k, v in data.items() if k != "mode"}
    try:
        if mode == "hardware":
            return WalkStepParams.hardware(**kwargs)
        return WalkStepParams.abstract(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"walk: {exc}") from None


def _strict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return data


def config_from_dict(data: dict, base_dir: Path = Path(".")) -> RunConfig:
    data = dict(_strict(RunConfig, data, "config"))
    inp = InputConfig(**_strict(InputConfig, data.pop("input", {}), "input"))
    sampling = data.pop("sampling", None)
    if sampling is not None:
        sampling = SamplingConfig(**_strict(SamplingConfig, sampling, "sampling"))
    cfg = RunConfig(**data, input=inp, sampling=sampling, base_dir=base_dir)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(isinstance(cfg.lattice_size, int) and cfg.lattice_size >= 16 and cfg.lattice_size % 2 == 0,
         "lattice_size must be an even integer >= 16")
    need(isinstance(cfg.steps, int) and cfg.steps >= 0, "steps must be a nonnegative integer")
    if not isinstance(cfg.walk, dict):
        raise ConfigError("walk must be an object")
    cfg.step_params()
    inp = cfg.input
    need(isinstance(inp.x0, int), "input.x0 must be an integer site")
    need(isinstance(inp.sigma, (int, float)) and inp.sigma > 0, "input.sigma must be positive")
    if inp.window is not None:
        need(len(inp.window) == 2 and all(isinstance(v, int) for v in inp.window)
             and inp.window[0] < inp.window[1], "input.window must be [xmin, xmax] with xmin < xmax")
        half = cfg.lattice_size // 2
        need(-half <= inp.window[0] and inp.window[1] <= half - 1, "input.window exceeds the lattice")
    need(len(inp.coin) == 2 and all(len(c) == 2 for c in inp.coin),
         "input.coin must be [[re, im], [re, im]]")
    need(abs(np.linalg.norm(inp.coin_amplitudes()) - 1) < 1e-8, "input.coin is not normalized")
    need(inp.sector in ("both", "positive", "negative"),
         "input.sector must be 'both', 'positive' or 'negative'")
    if cfg.sampling is not None:
        need(isinstance(cfg.sampling.counts, int) and cfg.sampling.counts >= 1,
             "sampling.counts must be a positive integer")
        need(isinstance(cfg.sampling.seed, int) and cfg.sampling.seed >= 0,
             "sampling.seed must be a nonnegative integer")
    need(cfg.noise_model is None or isinstance(cfg.noise_model, (str, dict)),
         "noise_model must be a path or an inline object")
    path = cfg.noise_model_path()
    if path is not None:
        need(path.is_file(), f"noise model file not found: {path}")
    noise = cfg.load_noise_model()
    if noise is not None:
        need(cfg.step_params().mode == "hardware", "noise models apply to hardware-mode walks only")
        need(noise.steps >= cfg.steps, f"noise model covers {noise.steps} steps, config asks for {cfg.steps}")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(data, dict) and data.get("kind") == "diracwalk-manifest":
        # a run manifest carries the full config, noise model inlined
        data = data.get("config")
    try:
        return config_from_dict(data, base_dir=path.parent)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
