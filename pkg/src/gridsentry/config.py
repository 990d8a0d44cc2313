"""Run configuration (YAML) and run manifests (JSON) for the CLI."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .detector.models import VARIANTS
from .grid.case import DEFAULT_CASE
from .neural import TrainConfig

OUTPUT_ROOT_ENV = "GRIDSENTRY_OUTPUT_ROOT"

DEFAULT_TRAIN_STAGES = {
    "autoencoder": {"learning_rate": 1e-3, "epochs": 60, "batch_size": 256},
    "predictor": {"learning_rate": 5e-3, "epochs": 120, "batch_size": 8},
    "classifier": {"learning_rate": 2e-3, "epochs": 80, "batch_size": 256},
}


class ConfigError(ValueError):
    """Invalid or unresolvable run configuration."""


@dataclass
class RunConfig:
    case_file: str
    output_dir: str
    seed: int
    horizon: int = 120
    noise_sigma: float = 0.01
    num_households: tuple[int, int] = (90, 110)
    levels: tuple[int, ...] = (1, 2, 3, 4, 5)
    window: tuple[int, int] = (24, 104)
    normal_series: int = 15
    series_per_condition_per_level: int = 4
    variants: tuple[str, ...] = VARIANTS
    train_stages: dict = field(default_factory=lambda: {
        k: dict(v) for k, v in DEFAULT_TRAIN_STAGES.items()})
    split_fraction: float = 0.8
    holdout_replications: int = 5
    holdout_l_values: tuple[int, ...] = (1, 2, 3, 4)
    workers: int = 1

    def stage_config(self, stage: str) -> TrainConfig:
        params = self.train_stages.get(stage, DEFAULT_TRAIN_STAGES[stage])
        return TrainConfig(**params)

    def canonical(self) -> dict:
        return json.loads(json.dumps(asdict(self), sort_keys=True))


def _as_pair(value, name) -> tuple:
    if (not isinstance(value, (list, tuple))) or len(value) != 2:
        raise ConfigError(f"{name} must be a pair")
    return tuple(value)


def resolve_output_dir(path: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out = Path(path)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def load_config(path: str | Path) -> RunConfig:
    """Parse and fully validate a YAML run config before any compute."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw = yaml.safe_load(path.read_text()) or {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")

    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "seed" not in raw:
        raise ConfigError("seed must be explicit (no wall-clock defaults)")
    if "output_dir" not in raw:
        raise ConfigError("output_dir is required")

    raw.setdefault("case_file", str(DEFAULT_CASE))
    cfg = RunConfig(**{**raw,
                       "num_households": _as_pair(
                           raw.get("num_households", (90, 110)),
                           "num_households"),
                       "window": _as_pair(raw.get("window", (24, 104)),
                                          "window"),
                       "levels": tuple(raw.get("levels", (1, 2, 3, 4, 5))),
                       "variants": tuple(raw.get("variants", VARIANTS)),
                       "holdout_l_values": tuple(
                           raw.get("holdout_l_values", (1, 2, 3, 4)))})

    if not Path(cfg.case_file).exists():
        raise ConfigError(f"case file not found: {cfg.case_file}")
    if cfg.horizon < 24:
        raise ConfigError("horizon must cover at least one day")
    if not 0 <= cfg.window[0] < cfg.window[1] <= cfg.horizon:
        raise ConfigError("window must fit inside the horizon")
    if any(lvl not in (1, 2, 3, 4, 5) for lvl in cfg.levels):
        raise ConfigError("levels must be drawn from 1..5")
    if any(v not in VARIANTS for v in cfg.variants):
        raise ConfigError(f"variants must be drawn from {VARIANTS}")
    if not 0 < cfg.split_fraction < 1:
        raise ConfigError("split_fraction must be in (0, 1)")
    if cfg.normal_series < 1 or cfg.series_per_condition_per_level < 1:
        raise ConfigError("series counts must be positive")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    for stage, params in cfg.train_stages.items():
        if stage not in DEFAULT_TRAIN_STAGES:
            raise ConfigError(f"unknown training stage {stage!r}")
        TrainConfig(**params)  # raises on bad values
    return cfg


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.canonical(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunManifest:
    """Ledger of every artifact a command emits, keyed by relative path."""

    def __init__(self, directory: Path, cfg_hash: str):
        self.directory = Path(directory)
        self.data = {
            "config_hash": cfg_hash,
            "package_version": __version__,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
            "stages": {},
            "files": {},
        }

    def add_file(self, path: Path) -> None:
        rel = str(Path(path).relative_to(self.directory))
        self.data["files"][rel] = file_sha256(Path(path))

    def set_stage(self, name: str, status: str, **extra) -> None:
        self.data["stages"][name] = {"status": status, **extra}

    def write(self) -> Path:
        out = self.directory / "manifest.json"
        out.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")
        return out

    @staticmethod
    def read(directory: Path) -> dict:
        return json.loads((Path(directory) / "manifest.json").read_text())
