"""Run configuration: one declarative file per experiment plus CLI overrides.

The config names the dataset, exactly one backbone source (an embedding
cache or the hashing featurizer), the slice schema, model and training
settings, and the output directory. Validation errors name the offending
field path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import slicing
from .attention import MoAConfig
from .errors import ConfigError
from .model import ModelConfig
from .training import Split, TrainConfig


@dataclass
class DatasetConfig:
    path: str
    format: str = "tsv"
    text_col: str = "text"
    label_col: str = "label"
    id_col: str | None = None
    lowercase: bool = False


@dataclass
class RunConfig:
    dataset: DatasetConfig
    backbone: dict
    schema: slicing.SliceSchema
    model: ModelConfig
    train: TrainConfig
    split: dict
    runs: int = 1
    metrics: list[str] | None = None
    f1_average: str = "macro"
    lift_mode: str = "points"
    output_dir: str = "out"

    def metric_names(self, num_classes: int) -> list[str]:
        if self.metrics:
            return list(self.metrics)
        return ["accuracy", "f1", "mcc"] if num_classes == 2 else ["accuracy", "f1"]


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}.{key}: required field missing")
    return obj[key]


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return parse_run_config(raw)


def parse_run_config(raw: dict) -> RunConfig:
    ds_raw = _require(raw, "dataset", "config")
    dataset = DatasetConfig(
        path=_require(ds_raw, "path", "dataset"),
        format=ds_raw.get("format", "tsv"),
        text_col=ds_raw.get("text_col", "text"),
        label_col=ds_raw.get("label_col", "label"),
        id_col=ds_raw.get("id_col"),
        lowercase=bool(ds_raw.get("lowercase", False)),
    )
    if dataset.format not in ("tsv", "csv", "jsonl"):
        raise ConfigError(f"dataset.format: unknown format {dataset.format!r}")

    backbone = _require(raw, "backbone", "config")
    sources = [k for k in ("cache", "hashing") if k in backbone]
    if len(sources) != 1:
        raise ConfigError("backbone: exactly one of 'cache' or 'hashing' is required")
    if "hashing" in backbone:
        d = backbone["hashing"].get("d") if isinstance(backbone["hashing"], dict) else backbone["hashing"]
        if not isinstance(d, int) or d < 16:
            raise ConfigError("backbone.hashing.d: need an integer width >= 16")
        backbone = {"hashing": {"d": d}}

    schema = slicing.schema_from_config(raw.get("slices", []), lowercase=bool(raw.get("slices_lowercase", True)))

    model_raw = dict(raw.get("model", {}))
    moa = MoAConfig(
        phi=model_raw.pop("phi", "softmax"),
        combine_op=model_raw.pop("combine_op", "add"),
        tau=float(model_raw.pop("tau", 1.0)),
        use_expert_confidence=bool(model_raw.pop("expert_confidence", False)),
        stochastic_eval=bool(model_raw.pop("stochastic_eval", False)),
    )
    model = ModelConfig(
        kind=model_raw.pop("kind", "sbl_moa"),
        d=0,  # resolved against the backbone at pipeline time
        k=schema.k,
        C=2,  # resolved against the dataset at pipeline time
        moa=moa,
        dropout=float(model_raw.pop("dropout", 0.5)),
        hidden=int(model_raw.pop("hidden", 128)),
        use_bias=bool(model_raw.pop("use_bias", False)),
    )
    if model_raw:
        raise ConfigError(f"model: unknown fields {sorted(model_raw)}")

    train_raw = dict(raw.get("train", {}))
    train = TrainConfig(
        lr=float(train_raw.pop("lr", 0.001)),
        weight_decay=float(train_raw.pop("weight_decay", 0.0)),
        max_epochs=int(train_raw.pop("max_epochs", 500)),
        patience=int(train_raw.pop("patience", 50)),
        batch_size=int(train_raw.pop("batch_size", 32)),
        seed=int(train_raw.pop("seed", 0)),
        selection_metric=train_raw.pop("selection_metric", "accuracy"),
        f1_average=train_raw.pop("f1_average", "macro"),
    ).validate()
    if train_raw:
        raise ConfigError(f"train: unknown fields {sorted(train_raw)}")

    split = raw.get("split", {"fractions": [0.7, 0.1, 0.2]})
    if ("fractions" in split) == ("counts" in split):
        raise ConfigError("split: exactly one of fractions or counts is required")

    runs = int(raw.get("runs", 1))
    if runs < 1:
        raise ConfigError(f"runs: must be at least 1, got {runs}")
    lift_mode = raw.get("lift_mode", "points")
    if lift_mode not in ("points", "relative"):
        raise ConfigError(f"lift_mode: expected 'points' or 'relative', got {lift_mode!r}")

    return RunConfig(
        dataset=dataset,
        backbone=backbone,
        schema=schema,
        model=model,
        train=train,
        split=split,
        runs=runs,
        metrics=raw.get("metrics"),
        f1_average=raw.get("f1_average", "macro"),
        lift_mode=lift_mode,
        output_dir=raw.get("output_dir", "out"),
    )


@dataclass
class Pipeline:
    """Materialized experiment data: dataset, memberships, features, splits."""

    config: RunConfig
    dataset: data_mod.TextDataset
    gamma: np.ndarray
    X: np.ndarray
    splits: tuple[Split, Split, Split]
    subsets: tuple
    d: int

    def index_of(self, sample_id: str) -> int:
        try:
            return self.dataset.ids.index(sample_id)
        except ValueError:
            raise data_mod.MissingIdError(f"sample id {sample_id!r} not in the dataset") from None


def build_pipeline(cfg: RunConfig, base_dir: Path | None = None) -> Pipeline:
    """Load the dataset, featurize every sample, and cut the splits.

    Embedding lookups are resolved for all ids up front, so a missing cache
    entry fails before any training starts.
    """
    ds_path = Path(cfg.dataset.path)
    if base_dir is not None and not ds_path.is_absolute():
        ds_path = base_dir / ds_path
    dataset = data_mod.load_dataset(
        ds_path,
        cfg.dataset.format,
        cfg.dataset.text_col,
        cfg.dataset.label_col,
        id_col=cfg.dataset.id_col,
        lowercase=cfg.dataset.lowercase,
    )
    if "cache" in cfg.backbone:
        cache_path = Path(cfg.backbone["cache"])
        if base_dir is not None and not cache_path.is_absolute():
            cache_path = base_dir / cache_path
        cache = data_mod.read_cache(cache_path)
        X = cache.lookup(dataset.ids)
        d = cache.d
    else:
        d = cfg.backbone["hashing"]["d"]
        X = data_mod.featurize_all(dataset.texts, d)
    gamma = cfg.schema.assign_all(dataset.texts)

    subsets_idx = _split_indices(dataset, cfg)
    splits = tuple(
        Split(X=X[idx], gamma=gamma[idx], y=dataset.labels[idx]) for idx in subsets_idx
    )
    subsets = tuple(dataset.subset(idx) for idx in subsets_idx)
    return Pipeline(config=cfg, dataset=dataset, gamma=gamma, X=X, splits=splits, subsets=subsets, d=d)


def _split_indices(dataset: data_mod.TextDataset, cfg: RunConfig):
    # split on ids via an index dataset so feature rows stay aligned
    marker = data_mod.TextDataset(
        ids=list(dataset.ids),
        texts=[str(i) for i in range(len(dataset))],
        labels=dataset.labels,
        label_vocab=dataset.label_vocab,
    )
    seed = cfg.split.get("seed", cfg.train.seed)
    parts = data_mod.stratified_split(
        marker,
        fractions=cfg.split.get("fractions"),
        counts=cfg.split.get("counts"),
        seed=seed,
    )
    return tuple(np.array([int(t) for t in part.texts], dtype=np.int64) for part in parts)
