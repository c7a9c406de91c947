"""JSON experiment configuration."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusSpec
from .features import FeatureConfig
from .model import SINGLE, ModelDims, MtlConfig
from .training import TrainConfig

TOPOLOGIES = (SINGLE, "mtl", "pretrain")
GRID_SYSTEMS = (
    "single",
    "pretrain",
    "mtl-l1-large",
    "mtl-l1-small",
    "mtl-l1l2-large",
    "mtl-l1l2-small",
    "adapted-single",
    "adapted-mtl-l1l2-small",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelDims = field(default_factory=ModelDims)
    mtl: MtlConfig = field(default_factory=MtlConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    topology: str = SINGLE
    seeds: list = field(default_factory=lambda: [0])
    adapt_epochs: int = 20
    data: dict = field(default_factory=dict)
    corpus: CorpusSpec = field(default_factory=CorpusSpec)
    systems: list = field(default_factory=lambda: list(GRID_SYSTEMS))

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if self.train.batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if self.train.beam_width < 1:
            raise ConfigError("train.beam_width must be >= 1")
        if self.train.patience < 0:
            raise ConfigError("train.patience must be >= 0")
        if not self.train.lr > 0:
            raise ConfigError("train.lr must be positive")
        bad = [s for s in self.systems if s not in GRID_SYSTEMS]
        if bad:
            raise ConfigError(f"unknown grid systems {bad}; choose from {GRID_SYSTEMS}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        self.model.input_dim = self.features.input_dim

    @classmethod
    def desk(cls, **overrides) -> "ExperimentConfig":
        """Small dims and a faster optimiser schedule for CPU-scale runs."""
        cfg = cls(model=ModelDims(ff_units=32, lstm_cells=16),
                  train=TrainConfig(lr=0.01, batch_size=5, max_epochs=100, patience=5))
        for k, v in overrides.items():
            setattr(cfg, k, v)
        cfg.__post_init__()
        return cfg

    def to_dict(self) -> dict:
        m = self.model
        return {
            "features": self.features.to_dict(),
            "model": {"ff_units": m.ff_units, "lstm_cells": m.lstm_cells, "init_std": m.init_std},
            "mtl": {"lambda": self.mtl.lam, "task2_size": self.mtl.task2_size,
                    "task2_mode": self.mtl.task2_mode},
            "train": self.train.to_dict(),
            "topology": self.topology,
            "seeds": list(self.seeds),
            "adapt_epochs": self.adapt_epochs,
            "data": self.data,
            "corpus": self.corpus.to_dict(),
            "systems": list(self.systems),
        }

    @classmethod
    def from_dict(cls, d: dict, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        known = {"features", "model", "mtl", "train", "topology", "seeds", "adapt_epochs",
                 "data", "corpus", "systems", "preset"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if base is None:
            base = cls.desk() if d.get("preset") == "desk" else cls()
        cfg = base.to_dict()
        for section in ("features", "model", "mtl", "train"):
            extra = set(d.get(section, {})) - set(cfg[section])
            if extra:
                raise ConfigError(f"unknown keys in {section!r}: {sorted(extra)}")
            cfg[section].update(d.get(section, {}))
        for key in ("topology", "seeds", "adapt_epochs", "data", "systems"):
            if key in d:
                cfg[key] = d[key]
        corpus = dict(cfg["corpus"])
        corpus.update(d.get("corpus", {}))
        try:
            mtl = cfg["mtl"]
            return cls(
                features=FeatureConfig.from_dict(cfg["features"]),
                model=ModelDims(**cfg["model"]),
                mtl=MtlConfig(mtl["lambda"], mtl["task2_size"], mtl["task2_mode"]),
                train=TrainConfig(**cfg["train"]),
                topology=cfg["topology"],
                seeds=[int(s) for s in cfg["seeds"]],
                adapt_epochs=int(cfg["adapt_epochs"]),
                data=cfg["data"],
                corpus=CorpusSpec.from_dict(corpus),
                systems=list(cfg["systems"]),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from None
        return cls.from_dict(d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
