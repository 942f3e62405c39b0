"""Mixture of attentions over slice representations.

Two slice distributions are computed from different inputs: a membership
attention over the indicator logits (optionally sharpened by expert
confidence in binary tasks) and a dot-product attention between the input
representation and learned slice prototypes (the columns of A). Each
distribution weights its own column bank, and the two weighted vectors are
combined elementwise (add or multiply) into the slice-aware representation.

Distributions go through phi, which is either a plain softmax
(deterministic), a Gumbel-softmax sample (soft), or a straight-through
one-hot of the Gumbel-softmax sample (hard but differentiable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, ParameterError

PHI_CHOICES = ("softmax", "gumbel_soft", "gumbel_hard")
COMBINE_CHOICES = ("add", "mul")


@dataclass
class MoAConfig:
    """Attention configuration shared by the model and the CLI flags."""

    phi: str = "softmax"
    combine_op: str = "add"
    tau: float = 1.0
    use_expert_confidence: bool = False
    stochastic_eval: bool = False  # keep sampling at eval time instead of softmax

    def validate(self):
        if self.phi not in PHI_CHOICES:
            raise ConfigError(f"moa.phi: expected one of {PHI_CHOICES}, got {self.phi!r}")
        if self.combine_op not in COMBINE_CHOICES:
            raise ConfigError(f"moa.combine_op: expected one of {COMBINE_CHOICES}, got {self.combine_op!r}")
        if not self.tau > 0:
            raise ParameterError(f"moa.tau: temperature must be positive, got {self.tau}")
        return self

    def to_record(self) -> dict:
        return {
            "phi": self.phi,
            "combine_op": self.combine_op,
            "tau": self.tau,
            "use_expert_confidence": self.use_expert_confidence,
            "stochastic_eval": self.stochastic_eval,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "MoAConfig":
        return cls(**rec).validate()


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. Gumbel(0,1) draws: -log(-log(u)), u ~ Uniform(0,1)."""
    u = rng.random(shape)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return -np.log(-np.log(u))


def gumbel_softmax(logits, tau: float, rng: np.random.Generator, hard: bool = False) -> Tensor:
    """Sample a slice distribution by perturbing logits with Gumbel noise.

    Soft mode returns softmax((logits + noise)/tau), a relaxed sample whose
    concentration grows as tau shrinks. Hard mode returns the one-hot of the
    sample's argmax while backpropagating the soft sample's gradient
    (straight-through), so sampling stays differentiable.
    """
    if not tau > 0:
        raise ParameterError(f"gumbel_softmax: tau must be positive, got {tau}")
    logits = ad.as_tensor(logits)
    noise = gumbel_noise(logits.data.shape, rng)
    soft = ad.softmax(ad.mul(ad.add(logits, noise), 1.0 / tau), axis=-1)
    return ad.hard_one_hot(soft) if hard else soft


def apply_phi(logits, phi: str, tau: float, rng: np.random.Generator | None, training: bool = True,
              stochastic_eval: bool = False) -> Tensor:
    """Turn logits into a slice distribution.

    Stochastic phis fall back to the deterministic softmax at eval time
    unless stochastic_eval is set.
    """
    if phi == "softmax" or (not training and not stochastic_eval):
        return ad.softmax(ad.as_tensor(logits), axis=-1)
    if phi not in PHI_CHOICES:
        raise ConfigError(f"unknown phi {phi!r}")
    if rng is None:
        raise ParameterError(f"phi={phi!r} needs an rng")
    return gumbel_softmax(logits, tau, rng, hard=(phi == "gumbel_hard"))


def membership_attention(
    h,
    expert_conf=None,
    *,
    num_classes: int | None = None,
    phi: str = "softmax",
    tau: float = 1.0,
    rng: np.random.Generator | None = None,
    training: bool = True,
    stochastic_eval: bool = False,
) -> Tensor:
    """Slice distribution p1 from indicator logits.

    In binary tasks the logits may be sharpened with the magnitude of each
    expert's confidence (logits + |conf|); with more than two classes the
    confidence term has no well-defined elementwise shape, so supplying it is
    a contract error and p1 comes from the membership logits alone.
    """
    h = ad.as_tensor(h)
    if expert_conf is not None:
        if num_classes is not None and num_classes != 2:
            raise ContractError(
                "expert confidence is only defined for binary tasks; "
                f"got C={num_classes} (elementwise addition shape mismatch)"
            )
        logits = ad.add(h, ad.absolute(ad.as_tensor(expert_conf)))
    else:
        logits = h
    return apply_phi(logits, phi, tau, rng, training, stochastic_eval)


def dot_product_attention(
    A: Tensor,
    x,
    *,
    phi: str = "softmax",
    tau: float = 1.0,
    rng: np.random.Generator | None = None,
    training: bool = True,
    stochastic_eval: bool = False,
) -> Tensor:
    """Slice distribution p2 = phi(A^T x); gradients reach both A and x.

    ``x`` may be a single [d] vector or an [n,d] batch of rows.
    """
    A = ad.as_tensor(A)
    x = ad.as_tensor(x)
    single = x.data.ndim == 1
    rows = ad.reshape(x, (1, -1)) if single else x
    if rows.data.shape[1] != A.data.shape[0]:
        raise ContractError(
            f"dot_product_attention: x width {rows.data.shape[1]} vs A rows {A.data.shape[0]}"
        )
    logits = ad.matmul(rows, A)
    p = apply_phi(logits, phi, tau, rng, training, stochastic_eval)
    return ad.reshape(p, (-1,)) if single else p


def weight_slices(M: Tensor, p) -> Tensor:
    """Probability-weighted mixture of the columns of M (d x k).

    A one-hot p selects a single column, realizing hard sampling.
    """
    M = ad.as_tensor(M)
    p = ad.as_tensor(p)
    col = ad.reshape(p, (-1, 1)) if p.data.ndim == 1 else p
    out = ad.matmul(M, col)
    return ad.reshape(out, (-1,)) if p.data.ndim == 1 else out


def combine(s1: Tensor, s2: Tensor, op: str) -> Tensor:
    if op == "add":
        return ad.add(s1, s2)
    if op == "mul":
        return ad.mul(s1, s2)
    raise ConfigError(f"unknown combine op {op!r}")


def moa_combine(
    r: Tensor,
    h,
    A: Tensor,
    x,
    cfg: MoAConfig,
    rng: np.random.Generator | None = None,
    *,
    expert_conf=None,
    num_classes: int | None = None,
    training: bool = True,
) -> Tensor:
    """Full mixture for one sample: s = (r . phi(h)) o (A . phi(A^T x))."""
    cfg.validate()
    p1 = membership_attention(
        h,
        expert_conf,
        num_classes=num_classes,
        phi=cfg.phi,
        tau=cfg.tau,
        rng=rng,
        training=training,
        stochastic_eval=cfg.stochastic_eval,
    )
    p2 = dot_product_attention(
        A,
        x,
        phi=cfg.phi,
        tau=cfg.tau,
        rng=rng,
        training=training,
        stochastic_eval=cfg.stochastic_eval,
    )
    s1 = weight_slices(r, p1)
    s2 = weight_slices(A, p2)
    return combine(s1, s2, cfg.combine_op)
