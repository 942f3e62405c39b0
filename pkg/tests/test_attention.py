import math

import numpy as np
import pytest

from slicemoa import attention as att
from slicemoa import autodiff as ad
from slicemoa.errors import ConfigError, ContractError, ParameterError


class HalfRng:
    """Stub generator whose uniform draws are all 0.5."""

    def random(self, shape):
        return np.full(shape, 0.5)


def entropy(p):
    p = np.clip(p, 1e-12, 1.0)
    return -(p * np.log(p)).sum(axis=-1)


# -- membership attention ----------------------------------------------------


def test_membership_uniform_logits():
    p = att.membership_attention(ad.Tensor([0.0, 0.0, 0.0]))
    assert np.allclose(p.data, [1 / 3] * 3)


def test_membership_softmax_values():
    p = att.membership_attention(ad.Tensor([1.0, 2.0, 3.0]))
    assert np.allclose(p.data, [0.0900, 0.2447, 0.6652], atol=5e-5)


def test_membership_confidence_multiclass_guard():
    with pytest.raises(ContractError):
        att.membership_attention(ad.Tensor([0.0, 0.0]), expert_conf=ad.Tensor([1.0, 1.0]), num_classes=3)


def test_membership_confidence_binary_uses_magnitude():
    p = att.membership_attention(ad.Tensor([0.0, 0.0]), expert_conf=ad.Tensor([-2.0, 0.0]), num_classes=2)
    e = math.exp(2.0)
    assert np.allclose(p.data, [e / (e + 1), 1 / (e + 1)])


def test_membership_is_differentiable_wrt_h():
    h = ad.Tensor([0.5, -0.5], requires_grad=True)
    att.membership_attention(h)[0].backward()
    assert h.grad is not None and np.all(np.isfinite(h.grad)) and np.any(h.grad != 0)


# -- dot-product attention ------------------------------------------------------


def test_dot_product_symmetric_logits():
    p = att.dot_product_attention(ad.Tensor(np.eye(2)), ad.Tensor([5.0, 5.0]))
    assert np.allclose(p.data, [0.5, 0.5])


def test_dot_product_softmax_value():
    p = att.dot_product_attention(ad.Tensor(np.eye(2)), ad.Tensor([1.0, 0.0]))
    assert np.allclose(p.data, [0.7311, 0.2689], atol=5e-5)


def test_dot_product_zero_input_is_uniform(rng):
    A = ad.Tensor(rng.normal(size=(4, 3)))
    p = att.dot_product_attention(A, ad.Tensor(np.zeros(4)))
    assert np.allclose(p.data, [1 / 3] * 3)


def test_dot_product_dimension_mismatch():
    with pytest.raises(ContractError):
        att.dot_product_attention(ad.Tensor(np.eye(3)), ad.Tensor([1.0, 2.0]))


def test_dot_product_gradients_reach_A_and_x():
    A = ad.Tensor(np.eye(2), requires_grad=True)
    x = ad.Tensor([1.0, -1.0], requires_grad=True)
    att.dot_product_attention(A, x)[0].backward()
    assert np.any(A.grad != 0) and np.any(x.grad != 0)


def test_dot_product_batched_rows_match_single(rng):
    A = ad.Tensor(rng.normal(size=(5, 3)))
    X = rng.normal(size=(4, 5))
    batched = att.dot_product_attention(A, ad.Tensor(X)).data
    singles = np.stack([att.dot_product_attention(A, ad.Tensor(X[i])).data for i in range(4)])
    assert np.allclose(batched, singles, atol=1e-12)


# -- slice weighting -------------------------------------------------------------


def test_weight_slices_one_hot_selects_column(rng):
    M = ad.Tensor(rng.normal(size=(4, 3)))
    p = np.array([0.0, 0.0, 1.0])
    assert np.allclose(att.weight_slices(M, p).data, M.data[:, 2])


def test_weight_slices_average():
    M = ad.Tensor(np.eye(2))
    assert np.allclose(att.weight_slices(M, [0.5, 0.5]).data, [0.5, 0.5])


def test_weight_slices_hand_value():
    M = ad.Tensor(np.array([[2.0, 0.0], [0.0, 4.0]]))
    assert np.allclose(att.weight_slices(M, [0.25, 0.75]).data, [0.5, 3.0])


# -- gumbel softmax ---------------------------------------------------------------


def test_gumbel_noise_formula():
    noise = att.gumbel_noise((3,), HalfRng())
    assert np.allclose(noise, -math.log(-math.log(0.5)))
    assert noise[0] == pytest.approx(0.3665, abs=5e-5)


def test_gumbel_high_temperature_approaches_uniform(rng):
    p = att.gumbel_softmax(ad.Tensor([3.0, -1.0, 0.5]), tau=1e6, rng=rng)
    assert np.allclose(p.data, [1 / 3] * 3, atol=1e-3)


def test_gumbel_invalid_tau(rng):
    with pytest.raises(ParameterError):
        att.gumbel_softmax(ad.Tensor([0.0, 0.0]), tau=0.0, rng=rng)
    with pytest.raises(ParameterError):
        att.gumbel_softmax(ad.Tensor([0.0, 0.0]), tau=-1.0, rng=rng)


def test_gumbel_soft_sample_on_simplex(rng):
    p = att.gumbel_softmax(ad.Tensor(rng.normal(size=(100, 4))), tau=0.7, rng=rng)
    assert (p.data >= 0).all()
    assert np.allclose(p.data.sum(axis=1), 1.0, atol=1e-9)


def test_gumbel_hard_forward_is_exactly_one_hot(rng):
    p = att.gumbel_softmax(ad.Tensor(rng.normal(size=(50, 3))), tau=1.0, rng=rng, hard=True)
    assert set(np.unique(p.data)) <= {0.0, 1.0}
    assert np.array_equal(p.data.sum(axis=1), np.ones(50))


def test_gumbel_max_law_two_slices(rng):
    # argmax of Gumbel-perturbed logits is distributed as softmax(logits):
    # logits [ln 1, ln 3] put 3/4 of the mass on the second slice
    n = 100_000
    logits = np.tile([math.log(1.0), math.log(3.0)], (n, 1))
    hard = att.gumbel_softmax(ad.Tensor(logits), tau=1.0, rng=rng, hard=True)
    freq = hard.data.mean(axis=0)
    assert abs(freq[1] - 0.75) < 0.01


def test_gumbel_max_law_k4(rng):
    logits = rng.normal(size=4)
    target = np.exp(logits - logits.max())
    target /= target.sum()
    hard = att.gumbel_softmax(ad.Tensor(np.tile(logits, (100_000, 1))), tau=1.0, rng=rng, hard=True)
    freq = hard.data.mean(axis=0)
    assert np.max(np.abs(freq - target)) < 0.01


def test_gumbel_entropy_decreases_with_tau(rng):
    logits = np.tile([0.4, -0.2, 0.9], (10_000, 1))
    means = []
    for tau in (5.0, 1.0, 0.1):
        p = att.gumbel_softmax(ad.Tensor(logits), tau=tau, rng=rng)
        means.append(entropy(p.data).mean())
    assert means[0] > means[1] > means[2]


def test_gumbel_hard_straight_through_gradient(rng):
    logits = ad.Tensor([0.3, -0.7, 0.1], requires_grad=True)
    hard = att.gumbel_softmax(logits, tau=1.0, rng=rng, hard=True)
    ad.mul(hard, np.array([1.0, 2.0, 3.0])).sum().backward()
    assert logits.grad is not None
    assert np.all(np.isfinite(logits.grad))
    assert np.any(logits.grad != 0)


def test_gumbel_reproducible_for_fixed_seed():
    a = att.gumbel_softmax(ad.Tensor([0.1, 0.2]), tau=1.0, rng=np.random.default_rng(7))
    b = att.gumbel_softmax(ad.Tensor([0.1, 0.2]), tau=1.0, rng=np.random.default_rng(7))
    assert np.array_equal(a.data, b.data)


# -- phi dispatch -------------------------------------------------------------------


def test_apply_phi_eval_mode_switches_to_softmax(rng):
    logits = ad.Tensor([1.0, 0.0])
    out = att.apply_phi(logits, "gumbel_soft", tau=1.0, rng=rng, training=False)
    assert np.allclose(out.data, ad.softmax(logits).data)


def test_apply_phi_stochastic_eval_keeps_sampling():
    logits = ad.Tensor([1.0, 0.0])
    a = att.apply_phi(logits, "gumbel_soft", 1.0, np.random.default_rng(3), training=False, stochastic_eval=True)
    assert not np.allclose(a.data, ad.softmax(logits).data)


def test_apply_phi_deterministic_bit_reproducible():
    logits = ad.Tensor([0.25, -1.5, 2.0])
    a = att.apply_phi(logits, "softmax", 1.0, None)
    b = att.apply_phi(logits, "softmax", 1.0, None)
    assert np.array_equal(a.data, b.data)


def test_apply_phi_unknown_phi():
    with pytest.raises(ConfigError):
        att.apply_phi(ad.Tensor([0.0]), "argmax", 1.0, np.random.default_rng(0))


# -- full combination -----------------------------------------------------------------


def cfg(**kw):
    return att.MoAConfig(**kw).validate()


def test_moa_combine_zero_banks_add():
    s = att.moa_combine(
        ad.Tensor(np.zeros((3, 2))),
        ad.Tensor([0.1, -0.2]),
        ad.Tensor(np.zeros((3, 2))),
        ad.Tensor([1.0, 2.0, 3.0]),
        cfg(combine_op="add"),
    )
    assert np.allclose(s.data, np.zeros(3))


def test_moa_combine_all_ones_prototypes_mul_is_identity(rng):
    r = ad.Tensor(rng.normal(size=(3, 2)))
    h = ad.Tensor(rng.normal(size=2))
    s = att.moa_combine(r, h, ad.Tensor(np.ones((3, 2))), ad.Tensor(rng.normal(size=3)), cfg(combine_op="mul"))
    p1 = ad.softmax(h).data
    assert np.allclose(s.data, r.data @ p1)


def test_moa_combine_hand_case():
    r = ad.Tensor(np.eye(2))
    h = ad.Tensor([0.0, 0.0])
    A = ad.Tensor(np.ones((2, 2)))
    x = ad.Tensor([0.0, 0.0])
    s = att.moa_combine(r, h, A, x, cfg(combine_op="mul"))
    assert np.allclose(s.data, [0.5, 0.5])


def test_moa_combine_k1_degenerates():
    r = ad.Tensor([[2.0], [3.0]])
    A = ad.Tensor([[5.0], [7.0]])
    s_add = att.moa_combine(r, ad.Tensor([0.3]), A, ad.Tensor([1.0, 1.0]), cfg(combine_op="add"))
    assert np.allclose(s_add.data, [7.0, 10.0])
    s_mul = att.moa_combine(r, ad.Tensor([0.3]), A, ad.Tensor([1.0, 1.0]), cfg(combine_op="mul"))
    assert np.allclose(s_mul.data, [10.0, 21.0])


def test_moa_config_validation():
    with pytest.raises(ParameterError):
        cfg(tau=0.0)
    with pytest.raises(ConfigError):
        cfg(phi="sample")
    with pytest.raises(ConfigError):
        cfg(combine_op="concat")
