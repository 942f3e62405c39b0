import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slicemoa import slicing
from slicemoa.errors import ConfigError


# -- built-in predicates --------------------------------------------------------


def test_length_predicate():
    assert slicing.sf_length("hi", k=10)
    assert slicing.sf_length("", k=10)
    assert not slicing.sf_length("abcdefghij", k=10)  # boundary: strict <


def test_length_counts_unicode_scalars():
    assert slicing.sf_length("héllo wörl", k=10) is False  # 10 code points
    assert slicing.sf_length("héllo wör", k=10) is True


def test_substring_predicate():
    assert slicing.sf_substring("what time is it", "time")
    assert not slicing.sf_substring("", "time")
    assert slicing.sf_substring("sometimes", "time")  # no word boundary


def test_long_predicate():
    assert slicing.sf_long(" ".join("a" * 1 for _ in range(11)), k=10)
    assert not slicing.sf_long("one two", k=10)
    # split on single space keeps empty fields: "a  b" has 3 fields
    assert len("a  b".split(" ")) == 3
    assert not slicing.sf_long("a  b", k=10)
    assert slicing.sf_long("a " * 5 + "b", k=5)  # 6 fields > 5


def test_question_predicate():
    assert slicing.sf_question("is this good?")
    assert not slicing.sf_question("is this good? yes")
    assert not slicing.sf_question("")


# -- schema / assignment ----------------------------------------------------------


def nlu_schema():
    return slicing.preset_schema("nlu")


def cola_schema():
    return slicing.preset_schema("cola")


def test_preset_schema_lengths():
    assert cola_schema().k == 3
    assert nlu_schema().k == 4
    assert cola_schema().names == ("base", "long", "question")
    assert nlu_schema().names == ("base", "length", "time", "email")


def test_assign_nlu_example():
    gamma = nlu_schema().assign("set alarm time")  # 14 chars, contains "time"
    assert np.array_equal(gamma, [1, 0, 1, 0])


def test_assign_cola_example():
    gamma = cola_schema().assign("ok?")
    assert np.array_equal(gamma, [1, 0, 1])


def test_assign_base_only_schema():
    schema = slicing.schema_from_config([])
    assert schema.k == 1
    assert np.array_equal(schema.assign("anything at all"), [1])


def test_assign_is_case_insensitive_by_default():
    schema = nlu_schema()
    assert np.array_equal(schema.assign("SET ALARM TIME"), [1, 0, 1, 0])
    raw = slicing.SliceSchema(schema.functions, lowercase=False)
    assert np.array_equal(raw.assign("SET ALARM TIME"), [1, 0, 0, 0])


def test_schema_rejects_duplicates_and_missing_base():
    fn = slicing.builtin("question")
    with pytest.raises(ConfigError):
        slicing.SliceSchema((fn,))
    with pytest.raises(ConfigError):
        slicing.SliceSchema((slicing.BASE_SLICE, fn, fn))


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        slicing.builtin("mystery")


@given(st.text(max_size=60))
@settings(max_examples=200, deadline=None)
def test_base_membership_is_always_one(text):
    gamma = nlu_schema().assign(text)
    assert gamma[0] == 1
    assert set(np.unique(gamma)) <= {0, 1}


@given(st.lists(st.text(max_size=40), min_size=1, max_size=20), st.integers(0, 2**16))
@settings(max_examples=50, deadline=None)
def test_assignment_commutes_with_permutation(texts, seed):
    schema = cola_schema()
    gammas = schema.assign_all(texts)
    perm = np.random.default_rng(seed).permutation(len(texts))
    permuted = schema.assign_all([texts[i] for i in perm])
    assert np.array_equal(permuted, gammas[perm])


def test_assign_all_shape():
    out = nlu_schema().assign_all(["hi", "what time is it?"])
    assert out.shape == (2, 4)
    assert np.array_equal(out[0], [1, 1, 0, 0])
    assert np.array_equal(out[1], [1, 0, 1, 0])


def test_schema_config_round_trip():
    schema = nlu_schema()
    rebuilt = slicing.schema_from_config(schema.to_config())
    assert rebuilt.names == schema.names
    for text in ["set a timer", "EMAIL bob", "?"]:
        assert np.array_equal(rebuilt.assign(text), schema.assign(text))
