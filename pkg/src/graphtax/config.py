"""The JSON run configuration consumed by ``graphtax all``.

Example::

    {
      "datasets": [
        {"generator": "feature-only", "n_graphs": 120, "seed": 1},
        {"path": "data/IMDB-BINARY"}
      ],
      "models": ["gcn", {"kind": "gat", "hidden_dim": 32}],
      "suite": ["identity", "no-node-features", "no-edges", "fragmented-2"],
      "train": {"epochs": 100, "patience": 20},
      "output": "out",
      "seed": 0,
      "workers": 1,
      "n_clusters": 2
    }

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .data.synthetic import SBMSpec, gen_feature_only, gen_sbm_cluster, gen_structure_only
from .data.tu import load_dir
from .errors import InputError
from .graph import Dataset
from .harness import TrainConfig
from .models import ModelConfig
from .perturb import CANONICAL_SUITE, Perturbation, parse_suite

GENERATORS = ("feature-only", "structure-only", "sbm-cluster")


def generate(kind: str, params: dict[str, Any]) -> Dataset:
    params = dict(params)
    try:
        if kind == "feature-only":
            return gen_feature_only(params.pop("n_graphs", 200), params.pop("seed", 0), **params)
        if kind == "structure-only":
            return gen_structure_only(params.pop("n_graphs", 200), params.pop("seed", 0), **params)
        if kind == "sbm-cluster":
            return gen_sbm_cluster(SBMSpec(**params))
    except TypeError as exc:
        raise InputError(f"bad parameters for generator {kind!r}: {exc}") from None
    raise InputError(f"unknown generator {kind!r}; expected one of {', '.join(GENERATORS)}")


@dataclass
class DatasetRef:
    path: Optional[Path] = None
    generator: Optional[str] = None
    params: dict = field(default_factory=dict)
    name: Optional[str] = None

    def load(self) -> Dataset:
        if self.path is not None:
            ds = load_dir(self.path)
        else:
            params = dict(self.params)
            if self.name:
                params["name"] = self.name
            return generate(self.generator, params)
        if self.name and self.name != ds.name:
            ds = Dataset(self.name, ds.graphs, ds.task, ds.num_classes, ds.split)
        return ds


def _model(entry) -> ModelConfig:
    if isinstance(entry, str):
        return ModelConfig(kind=entry)
    if isinstance(entry, dict):
        try:
            return ModelConfig(**entry)
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad model entry {entry}: {exc}") from None
    raise InputError(f"bad model entry {entry!r}")


@dataclass
class RunConfig:
    datasets: list[DatasetRef]
    models: list[ModelConfig]
    suite: tuple[Perturbation, ...] = CANONICAL_SUITE
    train: TrainConfig = TrainConfig()
    output: Path = Path("out")
    seed: int = 0
    workers: int = 1
    n_clusters: int = 4
    margin: float = 0.02

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path = Path(".")) -> "RunConfig":
        known = {"datasets", "models", "suite", "train", "output", "seed", "workers", "n_clusters", "margin"}
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        refs = []
        for entry in raw.get("datasets", []):
            entry = dict(entry)
            name = entry.pop("name", None)
            if "path" in entry:
                refs.append(DatasetRef(path=(base_dir / entry.pop("path")).resolve(), name=name))
                if entry:
                    raise InputError(f"unexpected keys for a path dataset: {sorted(entry)}")
            elif "generator" in entry:
                gen = entry.pop("generator")
                if gen not in GENERATORS:
                    raise InputError(f"unknown generator {gen!r}")
                refs.append(DatasetRef(generator=gen, params=entry, name=name))
            else:
                raise InputError("each dataset needs a 'path' or a 'generator'")
        seed = int(raw.get("seed", 0))
        train_raw = dict(raw.get("train", {}))
        train_raw["seed"] = seed
        try:
            train = TrainConfig(**train_raw)
        except TypeError as exc:
            raise InputError(f"bad train section: {exc}") from None
        cfg = cls(
            datasets=refs,
            models=[_model(m) for m in raw.get("models", ["gcn"])],
            suite=parse_suite(raw.get("suite", [p.name for p in CANONICAL_SUITE])),
            train=train,
            output=(base_dir / raw.get("output", "out")).resolve(),
            seed=seed,
            workers=int(raw.get("workers", 1)),
            n_clusters=int(raw.get("n_clusters", 4)),
            margin=float(raw.get("margin", 0.02)),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"{path}: cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise InputError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw, path.parent)

    def validate(self) -> None:
        if not self.datasets:
            raise InputError("config lists no datasets")
        if not self.models:
            raise InputError("config lists no models")
        for ref in self.datasets:
            if ref.path is not None and not ref.path.is_dir():
                raise InputError(f"dataset path {ref.path} does not exist")
        parse_suite(self.suite)
        if self.workers < 1:
            raise InputError("workers must be >= 1")

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, seed=seed, train=self.train.with_overrides(seed=seed))

    def effective_workers(self, flag: Optional[int] = None) -> int:
        if flag is not None:
            return flag
        env = os.environ.get("GRAPHTAX_WORKERS")
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise InputError(f"GRAPHTAX_WORKERS must be an integer, got {env!r}") from None
        return self.workers
