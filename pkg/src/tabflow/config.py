"""Pipeline configuration: flat INI-style key = value file, one section per
module, every key defaulted to the pipeline's standard settings. The config
hash (sha256 of the canonical text) is embedded in every output artifact.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from . import odesolve
from .errors import UsageError
from .flowmatch import TrainConfig

_DEFAULTS: dict[str, dict[str, str]] = {
    "paths": {
        "scores_dir": "scores",
        "audio_dir": "audio",
        "workdir": "work",
    },
    "latentcodec": {
        "dims": "64",
        "chunk_seconds": "4.0",
        "residual_high_bands": "true",
    },
    "flowmatch": {
        "batch_size": "64",
        "lr": "0.0001",
        "epochs": "50",
        "base_channels": "32",
    },
    "odesolve": {
        "solver": "dopri5",
        "steps": "100",
        "rtol": "0.0001",
        "atol": "0.0001",
        "max_steps": "10000",
    },
    "stringsynth": {
        "sample_rate": "44100",
        "amp_drive": "6.0",
        "amp_tone_cutoff": "5000.0",
        "normalize_db": "-9.0",
    },
    "audiodist": {
        "kad_max_frames": "2048",
    },
    "synthdata": {
        "n_scores": "10",
        "score_seconds": "60.0",
    },
    "cli": {
        "seed": "0",
        "workers": "1",
        "train_split": "0.9",
    },
}


@dataclass(frozen=True)
class PipelineConfig:
    scores_dir: Path
    audio_dir: Path
    workdir: Path
    dims: int
    chunk_seconds: float
    residual_high_bands: bool
    batch_size: int
    lr: float
    epochs: int
    base_channels: int
    solver_name: str
    steps: int
    rtol: float
    atol: float
    max_steps: int
    sample_rate: int
    amp_drive: float
    amp_tone_cutoff: float
    normalize_db: float
    kad_max_frames: int
    n_scores: int
    score_seconds: float
    seed: int
    workers: int
    train_split: float
    raw: dict[str, dict[str, str]] = field(default_factory=dict, compare=False)

    def solver(self) -> odesolve.SolverKind:
        if self.solver_name == "euler":
            return odesolve.Euler(self.steps)
        if self.solver_name == "rk4":
            return odesolve.RK4(self.steps)
        if self.solver_name == "dopri5":
            return odesolve.Dopri5(self.rtol, self.atol, self.max_steps)
        raise UsageError(f"unknown solver {self.solver_name!r}")

    def train_config(self) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, lr=self.lr, epochs=self.epochs,
                           seed=self.seed, dims=self.dims,
                           chunk_seconds=self.chunk_seconds,
                           base_channels=self.base_channels)

    def canonical_text(self) -> str:
        lines = []
        for section in sorted(self.raw):
            lines.append(f"[{section}]")
            for key in sorted(self.raw[section]):
                lines.append(f"{key} = {self.raw[section][key]}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()[:16]


def _merge(base: dict[str, dict[str, str]], override: dict[str, dict[str, str]]):
    merged = {s: dict(kv) for s, kv in base.items()}
    for section, kv in override.items():
        if section not in merged:
            raise UsageError(f"unknown config section [{section}]")
        for key, value in kv.items():
            if key not in merged[section]:
                raise UsageError(f"unknown config key {key!r} in [{section}]")
            merged[section][key] = value
    return merged


def load_config(path: str | Path | None = None,
                overrides: dict[str, dict[str, str]] | None = None) -> PipelineConfig:
    """Defaults, optionally overlaid with an INI file and explicit overrides."""
    raw = {s: dict(kv) for s, kv in _DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise UsageError(f"cannot read config file {path}")
        file_dict = {s: dict(parser.items(s)) for s in parser.sections()}
        raw = _merge(raw, file_dict)
    if overrides:
        raw = _merge(raw, overrides)

    try:
        cfg = PipelineConfig(
            scores_dir=Path(raw["paths"]["scores_dir"]),
            audio_dir=Path(raw["paths"]["audio_dir"]),
            workdir=Path(raw["paths"]["workdir"]),
            dims=int(raw["latentcodec"]["dims"]),
            chunk_seconds=float(raw["latentcodec"]["chunk_seconds"]),
            residual_high_bands=raw["latentcodec"]["residual_high_bands"].lower()
            in ("1", "true", "yes"),
            batch_size=int(raw["flowmatch"]["batch_size"]),
            lr=float(raw["flowmatch"]["lr"]),
            epochs=int(raw["flowmatch"]["epochs"]),
            base_channels=int(raw["flowmatch"]["base_channels"]),
            solver_name=raw["odesolve"]["solver"],
            steps=int(raw["odesolve"]["steps"]),
            rtol=float(raw["odesolve"]["rtol"]),
            atol=float(raw["odesolve"]["atol"]),
            max_steps=int(raw["odesolve"]["max_steps"]),
            sample_rate=int(raw["stringsynth"]["sample_rate"]),
            amp_drive=float(raw["stringsynth"]["amp_drive"]),
            amp_tone_cutoff=float(raw["stringsynth"]["amp_tone_cutoff"]),
            normalize_db=float(raw["stringsynth"]["normalize_db"]),
            kad_max_frames=int(raw["audiodist"]["kad_max_frames"]),
            n_scores=int(raw["synthdata"]["n_scores"]),
            score_seconds=float(raw["synthdata"]["score_seconds"]),
            seed=int(raw["cli"]["seed"]),
            workers=int(raw["cli"]["workers"]),
            train_split=float(raw["cli"]["train_split"]),
            raw=raw,
        )
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from None
    if cfg.solver_name not in ("euler", "rk4", "dopri5"):
        raise UsageError(f"unknown solver {cfg.solver_name!r}")
    return cfg


def with_updates(cfg: PipelineConfig, **sections) -> PipelineConfig:
    """Functional update, e.g. with_updates(cfg, cli={'seed': '7'})."""
    raw = _merge(cfg.raw, {s: {k: str(v) for k, v in kv.items()}
                           for s, kv in sections.items()})
    return load_config(None, overrides=raw)
