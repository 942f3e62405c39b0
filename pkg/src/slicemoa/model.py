"""The three model families and their losses.

``baseline`` is a plain three-layer feed-forward net on the input embedding.
``sbl`` adds slice machinery: per-slice indicators (trained to predict
membership), per-slice experts with one shared prediction head, and a
membership attention that mixes expert representations into the slice-aware
vector fed to the final predictor. ``sbl_moa`` additionally learns slice
prototypes and a dot-product attention, combining both attended vectors
elementwise.

The training objective is the unweighted sum of three terms: indicator
membership loss (binary CE per slice), expert task loss (CE masked to each
expert's slice), and the final prediction loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import attention as att
from . import autodiff as ad
from . import rng as rng_mod
from .autodiff import Tensor
from .errors import ConfigError, ContractError, DimensionError

MODEL_KINDS = ("baseline", "sbl", "sbl_moa")


@dataclass
class ModelConfig:
    kind: str
    d: int
    k: int
    C: int
    moa: att.MoAConfig = field(default_factory=att.MoAConfig)
    dropout: float = 0.5
    hidden: int = 128
    use_bias: bool = False

    def validate(self) -> "ModelConfig":
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind: expected one of {MODEL_KINDS}, got {self.kind!r}")
        if self.d < 1 or self.k < 1 or self.C < 2:
            raise ConfigError(f"model: need d >= 1, k >= 1, C >= 2 (got d={self.d}, k={self.k}, C={self.C})")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"model.dropout: must be in [0, 1), got {self.dropout}")
        self.moa.validate()
        if self.moa.use_expert_confidence and self.C != 2:
            raise ContractError(
                f"expert confidence requires a binary task, got C={self.C}"
            )
        return self

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "d": self.d,
            "k": self.k,
            "C": self.C,
            "moa": self.moa.to_record(),
            "dropout": self.dropout,
            "hidden": self.hidden,
            "use_bias": self.use_bias,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ModelConfig":
        rec = dict(rec)
        rec["moa"] = att.MoAConfig.from_record(rec["moa"])
        return cls(**rec).validate()


@dataclass
class ForwardTrace:
    """Per-sample view of the forward pass (plain arrays, for inspection)."""

    x: np.ndarray
    logits: np.ndarray
    h: np.ndarray | None = None            # [k] indicator logits
    r: np.ndarray | None = None            # [d, k] expert representations
    expert_logits: np.ndarray | None = None  # [C, k] shared-head outputs
    p1: np.ndarray | None = None
    p2: np.ndarray | None = None
    s: np.ndarray | None = None


def make_rngs(seed: int) -> dict:
    """Independent dropout/Gumbel streams for one training run."""
    return {"dropout": rng_mod.stream(seed, "dropout"), "gumbel": rng_mod.stream(seed, "gumbel")}


# -- single-sample loss terms (the batched model computes the same sums) -----


def loss_indicators(h, gamma) -> Tensor:
    """Sum over slices of binary CE between sigmoid(h_i) and gamma_i."""
    gamma = np.asarray(gamma, dtype=np.float64)
    return ad.binary_cross_entropy_with_logits(ad.as_tensor(h), gamma).sum()


def loss_experts(expert_logits, gamma, y: int) -> Tensor:
    """Slice-masked task CE: each expert trains only on its slice's samples.

    ``expert_logits`` is the [C, k] matrix of shared-head outputs.
    """
    expert_logits = ad.as_tensor(expert_logits)
    gamma = np.asarray(gamma, dtype=np.float64)
    total = None
    for i in range(expert_logits.data.shape[1]):
        term = ad.cross_entropy(expert_logits[:, i], int(y)) * float(gamma[i])
        total = term if total is None else total + term
    return total


def loss_task(s, y: int, predictor) -> Tensor:
    """Final prediction CE of eta(s) = predictor^T s against y."""
    s = ad.as_tensor(s)
    logits = ad.matmul(ad.reshape(s, (1, -1)), ad.as_tensor(predictor))
    return ad.cross_entropy(ad.reshape(logits, (-1,)), int(y))


def total_loss(zeta1: Tensor, zeta2: Tensor, zeta3: Tensor) -> Tensor:
    """Unweighted sum of the three loss terms."""
    return zeta1 + zeta2 + zeta3


def _uniform_init(generator: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return generator.uniform(-bound, bound, size=shape)


class Model:
    """A classifier over fixed backbone embeddings."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg.validate()
        self.params: dict[str, Tensor] = {}
        g = rng_mod.stream(seed, "init")
        d, k, C, hidden = cfg.d, cfg.k, cfg.C, cfg.hidden
        if cfg.kind == "baseline":
            self._add("dense1", _uniform_init(g, (d, hidden), d))
            self._add("dense2", _uniform_init(g, (hidden, hidden), hidden))
            self._add("dense3", _uniform_init(g, (hidden, C), hidden))
            if cfg.use_bias:
                for name, width in (("dense1_bias", hidden), ("dense2_bias", hidden), ("dense3_bias", C)):
                    self._add(name, np.zeros((1, width)))
        else:
            self._add("indicators", _uniform_init(g, (d, k), d))
            for i in range(k):
                self._add(f"experts.{i}", _uniform_init(g, (d, d), d))
            self._add("shared_head", _uniform_init(g, (d, C), d))
            if cfg.kind == "sbl_moa":
                self._add("attention", _uniform_init(g, (d, k), d))
            self._add("predictor", _uniform_init(g, (d, C), d))

    def _add(self, name: str, value: np.ndarray):
        self.params[name] = Tensor(value, requires_grad=True, name=name)

    # -- forward ----------------------------------------------------------

    def forward(self, X, training: bool = False, rngs: dict | None = None) -> dict:
        """Run the network on an [n, d] batch; returns the tensors by name."""
        X = ad.as_tensor(X)
        if X.data.ndim != 2 or X.data.shape[1] != self.cfg.d:
            raise DimensionError(f"forward: expected [n, {self.cfg.d}] input, got {X.shape}")
        rngs = rngs or {}
        x = ad.dropout(X, self.cfg.dropout, training, rngs.get("dropout"))
        if self.cfg.kind == "baseline":
            z = ad.relu(self._affine(x, "dense1"))
            z = ad.relu(self._affine(z, "dense2"))
            return {"x": x, "logits": self._affine(z, "dense3")}

        cfg, moa = self.cfg, self.cfg.moa
        h = ad.matmul(x, self.params["indicators"])
        experts = [ad.matmul(x, self.params[f"experts.{i}"]) for i in range(cfg.k)]
        expert_logits = [ad.matmul(r_i, self.params["shared_head"]) for r_i in experts]
        conf = None
        if moa.use_expert_confidence:
            # per-expert binary confidence: the shared head's log-odds
            conf = ad.stack_cols([y[:, 1] - y[:, 0] for y in expert_logits])
        p1 = att.membership_attention(
            h,
            conf,
            num_classes=cfg.C,
            phi=moa.phi,
            tau=moa.tau,
            rng=rngs.get("gumbel"),
            training=training,
            stochastic_eval=moa.stochastic_eval,
        )
        s1 = experts[0] * p1[:, 0:1]
        for i in range(1, cfg.k):
            s1 = s1 + experts[i] * p1[:, i : i + 1]
        out = {"x": x, "h": h, "experts": experts, "expert_logits": expert_logits, "p1": p1}
        if cfg.kind == "sbl":
            s = s1
        else:
            A = self.params["attention"]
            p2 = att.dot_product_attention(
                A,
                x,
                phi=moa.phi,
                tau=moa.tau,
                rng=rngs.get("gumbel"),
                training=training,
                stochastic_eval=moa.stochastic_eval,
            )
            s2 = ad.matmul(p2, A.T)
            s = att.combine(s1, s2, moa.combine_op)
            out["p2"] = p2
        out["s"] = s
        out["logits"] = ad.matmul(s, self.params["predictor"])
        return out

    def _affine(self, x: Tensor, name: str) -> Tensor:
        out = ad.matmul(x, self.params[name])
        bias = self.params.get(f"{name}_bias")
        return out + bias if bias is not None else out

    # -- losses ------------------------------------------------------------

    def loss(self, X, gamma, y, training: bool = True, rngs: dict | None = None):
        """Mean total loss over the batch plus the per-term means.

        gamma is the [n, k] membership matrix and y the [n] class indices.
        """
        out = self.forward(X, training=training, rngs=rngs)
        y = np.asarray(y, dtype=np.int64)
        zeta3 = ad.cross_entropy(out["logits"], y)
        if self.cfg.kind == "baseline":
            total = zeta3.mean()
            return total, {"zeta1": 0.0, "zeta2": 0.0, "zeta3": total.item(), "loss": total.item()}
        gamma = np.asarray(gamma, dtype=np.float64)
        if gamma.shape != (len(y), self.cfg.k):
            raise DimensionError(f"loss: gamma {gamma.shape} vs expected ({len(y)}, {self.cfg.k})")
        zeta1 = ad.binary_cross_entropy_with_logits(out["h"], gamma).sum(axis=1)
        zeta2 = None
        for i in range(self.cfg.k):
            term = ad.cross_entropy(out["expert_logits"][i], y) * gamma[:, i]
            zeta2 = term if zeta2 is None else zeta2 + term
        total = (zeta1 + zeta2 + zeta3).mean()
        comps = {
            "zeta1": float(zeta1.data.mean()),
            "zeta2": float(zeta2.data.mean()),
            "zeta3": float(zeta3.data.mean()),
            "loss": total.item(),
        }
        return total, comps

    # -- inference -----------------------------------------------------------

    def predict(self, X, rngs: dict | None = None) -> np.ndarray:
        out = self.forward(X, training=False, rngs=rngs)
        return out["logits"].data.argmax(axis=1)

    def trace(self, x: np.ndarray, rngs: dict | None = None) -> ForwardTrace:
        """Inspect one sample's forward pass (deterministic phi)."""
        x = np.asarray(x, dtype=np.float64)
        out = self.forward(x.reshape(1, -1), training=False, rngs=rngs)
        row = lambda t: t.data[0].copy()
        if self.cfg.kind == "baseline":
            return ForwardTrace(x=x, logits=row(out["logits"]))
        return ForwardTrace(
            x=x,
            logits=row(out["logits"]),
            h=row(out["h"]),
            r=np.column_stack([row(r_i) for r_i in out["experts"]]),
            expert_logits=np.column_stack([row(y_i) for y_i in out["expert_logits"]]),
            p1=row(out["p1"]),
            p2=row(out["p2"]) if "p2" in out else None,
            s=row(out["s"]),
        )

    # -- parameter plumbing ------------------------------------------------------

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        if set(state) != set(self.params):
            raise ContractError(
                f"state dict keys {sorted(state)} do not match model parameters {sorted(self.params)}"
            )
        for name, value in state.items():
            value = np.asarray(value, dtype=self.params[name].data.dtype)
            if value.shape != self.params[name].data.shape:
                raise DimensionError(f"parameter {name}: shape {value.shape} vs {self.params[name].data.shape}")
            self.params[name].data = value.copy()

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()
