"""Overall and per-slice evaluation: accuracy, F1, MCC, and lift columns.

Per-slice values are computed over the subset of samples belonging to each
monitored slice (schema slots 1..k-1); the base slice is the whole set, so
its numbers equal the overall ones. Lift against a baseline report is the
per-slice metric difference in percentage points by default; a relative mode
is available behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

METRIC_NAMES = ("accuracy", "f1", "mcc")


@dataclass(frozen=True)
class ConfusionCounts:
    """C x C confusion matrix; rows are true labels, columns predictions."""

    matrix: np.ndarray

    @classmethod
    def from_predictions(cls, predictions, labels, num_classes: int | None = None) -> "ConfusionCounts":
        preds = np.asarray(predictions, dtype=np.int64)
        gold = np.asarray(labels, dtype=np.int64)
        if preds.shape != gold.shape:
            raise ContractError(f"predictions {preds.shape} and labels {gold.shape} misaligned")
        C = num_classes if num_classes is not None else int(max(preds.max(initial=0), gold.max(initial=0))) + 1
        m = np.zeros((C, C), dtype=np.int64)
        np.add.at(m, (gold, preds), 1)
        return cls(m)

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def binary(self) -> tuple[int, int, int, int]:
        """(TP, FP, TN, FN) with class 1 as the positive class."""
        if self.num_classes != 2:
            raise ContractError(f"binary counts need 2 classes, got {self.num_classes}")
        m = self.matrix
        return int(m[1, 1]), int(m[0, 1]), int(m[0, 0]), int(m[1, 0])


def accuracy(counts: ConfusionCounts) -> float:
    total = counts.total
    return float(np.trace(counts.matrix)) / total if total else 0.0


def _f1_for_class(m: np.ndarray, c: int) -> float:
    tp = m[c, c]
    fp = m[:, c].sum() - tp
    fn = m[c, :].sum() - tp
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


def f1(counts: ConfusionCounts, average: str = "binary") -> float:
    """Binary F1 of class 1, or macro/weighted average of per-class F1.

    Degenerate denominators yield 0 (common toolkit convention).
    """
    m = counts.matrix
    if average == "binary":
        if counts.num_classes != 2:
            raise ContractError("binary F1 needs exactly 2 classes")
        return _f1_for_class(m, 1)
    per_class = np.array([_f1_for_class(m, c) for c in range(counts.num_classes)])
    if average == "macro":
        return float(per_class.mean())
    if average == "weighted":
        support = m.sum(axis=1)
        total = support.sum()
        return float((per_class * support).sum() / total) if total else 0.0
    raise ContractError(f"unknown F1 average {average!r}")


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation coefficient for binary counts; 0 when any
    marginal factor is 0."""
    tp, fp, tn, fn = counts.binary()
    denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom_sq == 0:
        return 0.0
    return float(tp * tn - fp * fn) / float(np.sqrt(denom_sq))


def compute_metric(name: str, predictions, labels, num_classes: int, f1_average: str = "binary") -> float:
    counts = ConfusionCounts.from_predictions(predictions, labels, num_classes)
    if name == "accuracy":
        return accuracy(counts)
    if name == "f1":
        avg = f1_average if num_classes > 2 else "binary"
        return f1(counts, average=avg)
    if name == "mcc":
        return mcc(counts)
    raise ContractError(f"unknown metric {name!r}")


@dataclass
class SliceReport:
    """One metric evaluated overall and on each monitored slice.

    Slice values are None when the slice is empty (NA, never 0).
    """

    metric: str
    overall: float
    slices: dict[str, float | None]
    slice_sizes: dict[str, int] = field(default_factory=dict)
    n: int = 0

    def to_record(self) -> dict:
        return {
            "metric": self.metric,
            "overall": self.overall,
            "slices": self.slices,
            "slice_sizes": self.slice_sizes,
            "n": self.n,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SliceReport":
        return cls(
            metric=rec["metric"],
            overall=rec["overall"],
            slices=dict(rec["slices"]),
            slice_sizes={k: int(v) for k, v in rec.get("slice_sizes", {}).items()},
            n=int(rec.get("n", 0)),
        )


def per_slice(
    metric: str,
    predictions,
    labels,
    memberships,
    slice_names,
    num_classes: int,
    f1_average: str = "binary",
) -> SliceReport:
    """Evaluate ``metric`` overall and restricted to each monitored slice.

    ``memberships`` is the [n, k] gamma matrix aligned with ``slice_names``
    (slot 0 = base); monitored slices are slots 1..k-1.
    """
    preds = np.asarray(predictions)
    gold = np.asarray(labels)
    gamma = np.asarray(memberships)
    if gamma.shape != (len(preds), len(slice_names)):
        raise ContractError(
            f"memberships {gamma.shape} misaligned with {len(preds)} samples x {len(slice_names)} slices"
        )
    overall = compute_metric(metric, preds, gold, num_classes, f1_average)
    slices: dict[str, float | None] = {}
    sizes: dict[str, int] = {}
    for i, name in enumerate(slice_names):
        if i == 0:
            continue
        mask = gamma[:, i] == 1
        sizes[name] = int(mask.sum())
        if sizes[name] == 0:
            slices[name] = None
        else:
            slices[name] = compute_metric(metric, preds[mask], gold[mask], num_classes, f1_average)
    return SliceReport(metric=metric, overall=overall, slices=slices, slice_sizes=sizes, n=len(preds))


@dataclass(frozen=True)
class LiftResult:
    per_slice: dict[str, float | None]
    avg: float | None
    max: float | None


def lift(method: SliceReport, baseline: SliceReport, mode: str = "points") -> LiftResult:
    """Per-slice improvement of ``method`` over ``baseline``.

    ``points`` mode reports absolute percentage-point differences
    (method - baseline, x100); ``relative`` reports 100*(method-baseline)/baseline.
    Slices empty in either report are excluded from the average and maximum.
    """
    if set(method.slices) != set(baseline.slices):
        raise ContractError(
            f"lift: slice sets differ ({sorted(method.slices)} vs {sorted(baseline.slices)})"
        )
    if method.metric != baseline.metric:
        raise ContractError(f"lift: metric mismatch ({method.metric} vs {baseline.metric})")
    if mode not in ("points", "relative"):
        raise ContractError(f"lift: unknown mode {mode!r}")
    per: dict[str, float | None] = {}
    values = []
    for name, m_val in method.slices.items():
        b_val = baseline.slices[name]
        if m_val is None or b_val is None or (mode == "relative" and b_val == 0.0):
            per[name] = None
            continue
        delta = 100.0 * (m_val - b_val)
        per[name] = delta if mode == "points" else delta / b_val
        values.append(per[name])
    if not values:
        return LiftResult(per, None, None)
    return LiftResult(per, float(np.mean(values)), float(np.max(values)))


def overall_contribution(slice_size: int, slice_lift: float, total_size: int) -> float:
    """Expected overall-metric movement from a per-slice improvement.

    A lift on a small slice dilutes into the overall number in proportion to
    the slice's share of the evaluation set.
    """
    if slice_size <= 0 or total_size <= 0:
        raise ContractError("overall_contribution: sizes must be positive")
    return slice_size * slice_lift / total_size


def render_table(
    rows: list[tuple[str, dict[str, SliceReport]]],
    metrics: list[str],
    slice_names: list[str],
    baseline: str | None = None,
    lift_mode: str = "points",
) -> str:
    """Aligned plain-text table: per metric, Overall | slices | Avg. | Max. lift."""
    monitored = [n for n in slice_names if n != "base"]
    headers = ["Method"]
    for metric in metrics:
        headers += [f"{metric}:Overall"] + [f"{metric}:{s}" for s in monitored]
        if baseline is not None:
            headers += [f"{metric}:Avg.", f"{metric}:Max."]
    base_idx = next((i for i, (name, _) in enumerate(rows) if name == baseline), None)
    base_reports = rows[base_idx][1] if base_idx is not None else None

    def fmt(v):
        return "NA" if v is None else f"{v:.4f}"

    def fmt_lift(v):
        return "---" if v is None else f"{v:.1f}%"

    table = [headers]
    for i, (name, reports) in enumerate(rows):
        row = [name]
        for metric in metrics:
            rep = reports[metric]
            row.append(fmt(rep.overall))
            row += [fmt(rep.slices.get(s)) for s in monitored]
            if baseline is not None:
                if i == base_idx or base_reports is None:
                    row += ["---", "---"]
                else:
                    lf = lift(rep, base_reports[metric], mode=lift_mode)
                    row += [fmt_lift(lf.avg), fmt_lift(lf.max)]
        table.append(row)
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)
