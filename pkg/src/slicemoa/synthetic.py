"""Synthetic question-slice task for end-to-end replication tests.

Texts are short utterances over two topic vocabularies; the topic determines
the label everywhere except on a small "question" slice (interrogative words
plus a trailing '?'), where the label rule is inverted for most samples. A
model that only learns the topic rule is systematically wrong on the slice;
slice-aware models receive the membership signal during training, route
question samples through a dedicated expert, and recover part of the
inversion, lifting slice metrics while leaving the overall metric close to
the baseline's.

The question marker is kept weak on purpose (a few interrogative tokens
hashed into 32 dimensions): strong markers let the plain feed-forward
baseline discover the inversion on its own, which is exactly the regime the
slice machinery is meant to beat.

The corpus, split, and inversion pattern are fully deterministic (fixed data
seed); repeated experiments differ only in the training seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from . import slicing
from .attention import MoAConfig
from .model import Model, ModelConfig
from .training import Split, TrainConfig, train

TOPIC_0 = "alarm timer clock wake remind schedule meeting tomorrow".split()
TOPIC_1 = "music play song volume playlist artist album track".split()
NEUTRAL = "please the set my now for".split()
WH_WORDS = "what when how where why who".split()


@dataclass
class SyntheticSpec:
    n: int = 2000
    d: int = 32
    question_frac: float = 0.10
    invert_purity: float = 0.85   # fraction of question samples with inverted labels
    topic_rate: float = 0.75
    min_topic_tokens: int = 2
    wh_per_question: int = 3
    data_seed: int = 11
    fractions: tuple = (0.5, 0.15, 0.35)


def generate_dataset(spec: SyntheticSpec):
    """Deterministic synthetic corpus with an exactly-sized question slice.

    Returns the dataset plus a per-sample stratum id encoding
    (label, question, inverted) so splits can preserve all three proportions.
    """
    rng = np.random.default_rng(spec.data_seed)
    n_questions = round(spec.n * spec.question_frac)
    n_inverted = round(n_questions * spec.invert_purity)
    question_ids = set(int(i) for i in rng.permutation(spec.n)[:n_questions])
    q_order = rng.permutation(sorted(question_ids))
    inverted_ids = set(int(i) for i in q_order[:n_inverted])

    ids, texts, labels, strata = [], [], [], []
    pools = (TOPIC_0, TOPIC_1)
    for i in range(spec.n):
        c = int(rng.integers(0, 2))
        length = int(rng.integers(4, 8))
        tokens = []
        n_topic = 0
        for _ in range(length):
            if rng.random() < spec.topic_rate:
                tokens.append(pools[c][rng.integers(0, len(pools[c]))])
                n_topic += 1
            else:
                tokens.append(NEUTRAL[rng.integers(0, len(NEUTRAL))])
        while n_topic < spec.min_topic_tokens:
            tokens[int(rng.integers(0, length))] = pools[c][rng.integers(0, len(pools[c]))]
            n_topic += 1
        label = c
        is_q = i in question_ids
        is_inv = i in inverted_ids
        if is_q:
            for _ in range(spec.wh_per_question):
                tokens.insert(int(rng.integers(0, len(tokens) + 1)), WH_WORDS[rng.integers(0, len(WH_WORDS))])
            tokens[-1] = tokens[-1] + "?"
            if is_inv:
                label = 1 - c
        ids.append(f"syn{i:05d}")
        texts.append(" ".join(tokens))
        labels.append(label)
        strata.append(label * 4 + int(is_q) * 2 + int(is_inv))
    ds = data_mod.TextDataset(ids=ids, texts=texts, labels=np.array(labels), label_vocab=["topic0", "topic1"])
    return ds, np.array(strata, dtype=np.int64)


def question_schema() -> slicing.SliceSchema:
    return slicing.schema_from_config([{"name": "question", "builtin": "question"}])


def featurized_splits(spec: SyntheticSpec):
    """Dataset -> hashed features -> stratified splits as training arrays."""
    ds, strata = generate_dataset(spec)
    schema = question_schema()
    subsets = data_mod.stratified_split(ds, fractions=spec.fractions, seed=spec.data_seed, strata=strata)
    splits = []
    for subset in subsets:
        X = data_mod.featurize_all(subset.texts, spec.d)
        gamma = schema.assign_all(subset.texts)
        splits.append(Split(X=X, gamma=gamma, y=subset.labels))
    return tuple(splits), subsets, schema


def default_train_config(seed: int = 0) -> TrainConfig:
    # low lr: the slice models' routed path learns the inversion steadily
    # through the membership supervision, while the baseline only discovers
    # it as a late optimization transient; mcc selection favors snapshots
    # where the minority slice's correlated errors are fixed
    return TrainConfig(
        lr=0.003,
        weight_decay=0.01,
        max_epochs=400,
        patience=400,
        batch_size=32,
        selection_metric="mcc",
        seed=seed,
    )


VARIANTS = ("baseline", "sbl", "sbl_moa_add", "sbl_moa_mul")


@dataclass
class VariantResult:
    overall_f1: list = field(default_factory=list)
    slice_f1: list = field(default_factory=list)

    def mean_overall(self) -> float:
        return float(np.mean(self.overall_f1))

    def mean_slice(self) -> float:
        return float(np.mean(self.slice_f1))


def build_model(variant: str, spec: SyntheticSpec, k: int, seed: int) -> Model:
    # dropout off: at d=32 it deletes the sparse question-marker buckets more
    # often than it regularizes
    if variant == "baseline":
        cfg = ModelConfig(kind="baseline", d=spec.d, k=k, C=2, dropout=0.0)
    elif variant == "sbl":
        cfg = ModelConfig(kind="sbl", d=spec.d, k=k, C=2, dropout=0.0)
    elif variant in ("sbl_moa_add", "sbl_moa_mul"):
        op = "add" if variant.endswith("add") else "mul"
        cfg = ModelConfig(kind="sbl_moa", d=spec.d, k=k, C=2, dropout=0.0, moa=MoAConfig(combine_op=op))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return Model(cfg, seed=seed)


def run_lift_experiment(
    spec: SyntheticSpec | None = None,
    seeds=(0, 1, 2),
    variants=VARIANTS,
    train_cfg: TrainConfig | None = None,
) -> dict[str, VariantResult]:
    """Train each variant on the synthetic task and score the question slice."""
    from . import metrics as met

    spec = spec or SyntheticSpec()
    (train_split, val_split, test_split), _, schema = featurized_splits(spec)
    base_cfg = train_cfg or default_train_config()
    results: dict[str, VariantResult] = {v: VariantResult() for v in variants}
    for variant in variants:
        for seed in seeds:
            model = build_model(variant, spec, schema.k, seed)
            cfg = TrainConfig(**{**base_cfg.to_record(), "seed": seed})
            train(model, train_split, val_split, cfg)
            preds = model.predict(test_split.X)
            report = met.per_slice("f1", preds, test_split.y, test_split.gamma, schema.names, 2)
            results[variant].overall_f1.append(report.overall)
            results[variant].slice_f1.append(report.slices["question"])
    return results


def summarize(results: dict[str, VariantResult]) -> dict:
    """Pooled means and the two headline comparisons vs the baseline."""
    base = results["baseline"]
    moa_overall = []
    moa_slice = []
    for name in ("sbl_moa_add", "sbl_moa_mul"):
        if name in results:
            moa_overall.extend(results[name].overall_f1)
            moa_slice.extend(results[name].slice_f1)
    return {
        "baseline_overall_f1": base.mean_overall(),
        "baseline_slice_f1": base.mean_slice(),
        "moa_overall_f1": float(np.mean(moa_overall)),
        "moa_slice_f1": float(np.mean(moa_slice)),
        "slice_gap_points": 100.0 * (float(np.mean(moa_slice)) - base.mean_slice()),
        "overall_delta_points": 100.0 * (float(np.mean(moa_overall)) - base.mean_overall()),
    }
