import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slicemoa import metrics
from slicemoa.errors import ContractError


def brute_force_binary(preds, labels):
    """Loop-and-count oracle for the binary metrics."""
    tp = fp = tn = fn = 0
    for p, y in zip(preds, labels):
        if y == 1 and p == 1:
            tp += 1
        elif y == 0 and p == 1:
            fp += 1
        elif y == 0 and p == 0:
            tn += 1
        else:
            fn += 1
    acc = (tp + tn) / len(preds) if len(preds) else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(denom) if denom else 0.0
    return acc, f1, mcc


def counts(tp, fp, tn, fn):
    return metrics.ConfusionCounts(np.array([[tn, fp], [fn, tp]], dtype=np.int64))


# -- f1 ---------------------------------------------------------------------


def test_f1_perfect():
    assert metrics.f1(counts(tp=3, fp=0, tn=4, fn=0)) == 1.0


def test_f1_degenerate_denominator():
    assert metrics.f1(counts(tp=0, fp=0, tn=0, fn=5)) == 0.0


def test_f1_hand_value():
    assert metrics.f1(counts(tp=6, fp=2, tn=0, fn=2)) == pytest.approx(0.75)


def test_f1_macro_and_weighted():
    m = np.array([[5, 0, 0], [0, 3, 2], [0, 0, 0]])
    c = metrics.ConfusionCounts(m)
    # class F1s: 1.0, 3/4 wait: class1 tp=3 fp=0 fn=2 -> 6/8; class2 tp=0 fp=2 -> 0
    per = [1.0, 6 / 8, 0.0]
    assert metrics.f1(c, average="macro") == pytest.approx(sum(per) / 3)
    assert metrics.f1(c, average="weighted") == pytest.approx((5 * 1.0 + 5 * 0.75 + 0.0) / 10)


# -- mcc ----------------------------------------------------------------------


def test_mcc_perfect():
    assert metrics.mcc(counts(tp=1, fp=0, tn=1, fn=0)) == 1.0


def test_mcc_hand_value():
    assert metrics.mcc(counts(tp=50, fp=10, tn=30, fn=10)) == pytest.approx(1400 / 2400)


def test_mcc_inverted_predictor():
    # every prediction flipped relative to a perfect predictor
    labels = np.array([0, 1, 0, 1, 1, 0])
    c = metrics.ConfusionCounts.from_predictions(1 - labels, labels, 2)
    assert metrics.mcc(c) == -1.0


def test_mcc_degenerate_factor_is_zero():
    assert metrics.mcc(counts(tp=0, fp=0, tn=3, fn=2)) == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(2, 200))
@settings(max_examples=200, deadline=None)
def test_metrics_match_brute_force_oracle(seed, n):
    r = np.random.default_rng(seed)
    preds = r.integers(0, 2, size=n)
    labels = r.integers(0, 2, size=n)
    acc, f1_val, mcc_val = brute_force_binary(preds, labels)
    c = metrics.ConfusionCounts.from_predictions(preds, labels, 2)
    assert metrics.accuracy(c) == acc
    assert metrics.f1(c) == f1_val
    assert metrics.mcc(c) == pytest.approx(mcc_val, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_mcc_label_swap_symmetry(seed):
    r = np.random.default_rng(seed)
    preds = r.integers(0, 2, size=60)
    labels = r.integers(0, 2, size=60)
    a = metrics.mcc(metrics.ConfusionCounts.from_predictions(preds, labels, 2))
    b = metrics.mcc(metrics.ConfusionCounts.from_predictions(1 - preds, 1 - labels, 2))
    assert a == pytest.approx(b, abs=1e-12)


def test_mcc_requires_binary():
    with pytest.raises(ContractError):
        metrics.mcc(metrics.ConfusionCounts(np.zeros((3, 3), dtype=np.int64)))


# -- per-slice reports ------------------------------------------------------------


def test_per_slice_all_samples_everywhere_equals_overall(rng):
    preds = rng.integers(0, 2, size=40)
    labels = rng.integers(0, 2, size=40)
    gamma = np.ones((40, 3), dtype=np.int8)
    rep = metrics.per_slice("f1", preds, labels, gamma, ["base", "a", "b"], 2)
    assert rep.slices["a"] == rep.overall
    assert rep.slices["b"] == rep.overall


def test_per_slice_empty_slice_is_na():
    gamma = np.array([[1, 0], [1, 0]], dtype=np.int8)
    rep = metrics.per_slice("accuracy", [0, 1], [0, 1], gamma, ["base", "rare"], 2)
    assert rep.slices["rare"] is None
    assert rep.slice_sizes["rare"] == 0


def test_per_slice_constructed_fixture():
    # slice-2 predictions all wrong; slice-1 (the rest) all right
    labels = np.array([0, 1, 0, 1, 1, 0])
    preds = labels.copy()
    in_slice = np.array([0, 0, 0, 0, 1, 1])
    preds[in_slice == 1] = 1 - preds[in_slice == 1]
    gamma = np.stack([np.ones(6, dtype=np.int8), in_slice], axis=1)
    rep = metrics.per_slice("accuracy", preds, labels, gamma, ["base", "s2"], 2)
    assert rep.slices["s2"] == 0.0
    assert rep.overall == pytest.approx(4 / 6)


def test_base_slice_restriction_equals_overall(rng):
    preds = rng.integers(0, 2, size=30)
    labels = rng.integers(0, 2, size=30)
    gamma = np.ones((30, 1), dtype=np.int8)
    rep = metrics.per_slice("mcc", preds, labels, gamma, ["base"], 2)
    assert rep.slices == {}
    # restricting to base by hand reproduces the overall value
    c = metrics.ConfusionCounts.from_predictions(preds[gamma[:, 0] == 1], labels[gamma[:, 0] == 1], 2)
    assert metrics.mcc(c) == rep.overall


# -- lift ----------------------------------------------------------------------


def report(metric, overall, slices):
    return metrics.SliceReport(metric=metric, overall=overall, slices=slices)


def test_lift_reproduces_published_sbl_f1_row():
    baseline = report("f1", 0.70, {"s1": 0.60, "s2": 0.65})
    sbl = report("f1", 0.69, {"s1": 0.71, "s2": 0.72})
    out = metrics.lift(sbl, baseline)
    assert out.avg == pytest.approx(9.0)
    assert out.max == pytest.approx(11.0)


def test_lift_reproduces_published_moa_mul_f1_row():
    baseline = report("f1", 0.70, {"s1": 0.60, "s2": 0.65})
    moa = report("f1", 0.69, {"s1": 0.72, "s2": 0.71})
    out = metrics.lift(moa, baseline)
    assert out.avg == pytest.approx(9.0)
    assert out.max == pytest.approx(12.0)


def test_lift_of_identical_reports_is_zero(rng):
    rep = report("f1", 0.5, {"a": float(rng.random()), "b": float(rng.random())})
    out = metrics.lift(rep, rep)
    assert out.avg == 0.0
    assert out.max == 0.0


def test_lift_relative_mode():
    baseline = report("f1", 0.70, {"s1": 0.50})
    method = report("f1", 0.70, {"s1": 0.60})
    out = metrics.lift(method, baseline, mode="relative")
    assert out.per_slice["s1"] == pytest.approx(20.0)


def test_lift_skips_na_slices():
    baseline = report("f1", 0.7, {"s1": 0.6, "s2": None})
    method = report("f1", 0.7, {"s1": 0.7, "s2": 0.9})
    out = metrics.lift(method, baseline)
    assert out.per_slice["s2"] is None
    assert out.avg == pytest.approx(10.0)
    assert out.max == pytest.approx(10.0)


def test_lift_schema_mismatch():
    with pytest.raises(ContractError):
        metrics.lift(report("f1", 0.5, {"a": 0.5}), report("f1", 0.5, {"b": 0.5}))
    with pytest.raises(ContractError):
        metrics.lift(report("f1", 0.5, {"a": 0.5}), report("mcc", 0.5, {"a": 0.5}))


# -- dilution -------------------------------------------------------------------


def test_overall_contribution_published_footnote_value():
    assert metrics.overall_contribution(122, 0.07, 5124) == pytest.approx(0.0017, abs=1e-4)


def test_overall_contribution_edges():
    assert metrics.overall_contribution(10, 0.0, 100) == 0.0
    assert metrics.overall_contribution(100, 0.3, 100) == pytest.approx(0.3)


# -- rendering ------------------------------------------------------------------


def test_render_table_layout():
    baseline = {"f1": report("f1", 0.70, {"s1": 0.60, "s2": 0.65})}
    sbl = {"f1": report("f1", 0.69, {"s1": 0.71, "s2": 0.72})}
    text = metrics.render_table(
        [("baseline", baseline), ("sbl", sbl)],
        metrics=["f1"],
        slice_names=["base", "s1", "s2"],
        baseline="baseline",
    )
    header = text.splitlines()[0]
    cols = header.split()
    assert cols == ["Method", "f1:Overall", "f1:s1", "f1:s2", "f1:Avg.", "f1:Max."]
    assert "9.0%" in text and "11.0%" in text


def test_render_table_na_cells():
    rep = {"accuracy": report("accuracy", 0.5, {"s1": None})}
    text = metrics.render_table([("m", rep)], ["accuracy"], ["base", "s1"])
    assert "NA" in text
