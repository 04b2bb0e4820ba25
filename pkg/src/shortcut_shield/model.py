"""Predictors of the form ``f(x) = h(phi(x))`` and the regularized objective.

Two architectures:

``linear``
    ``phi(x) = x @ w`` (one representation coordinate), ``h(z) = sigmoid(z + b)``.
``mlp``
    ``phi(x) = tanh(x @ W1 + b1)`` (``hidden`` coordinates),
    ``h(z) = sigmoid(z @ w2 + b2)``.

The objective is a (weighted) mean logistic loss plus ``alpha`` times an MMD^2
penalty on ``phi`` between the ``v`` groups plus ``lambda_l2`` times the squared
norm of the layer weights (biases are not penalized). Gradients are analytic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.special import expit

from .errors import BatchCompositionError, ConfigurationError
from .kernel_mmd import KernelConfig, weighted_mmd2_and_grad
from .weights import group_normalize

PROB_EPS = 1e-15
ARCHS = ("linear", "mlp")
MMD_VARIANTS = ("marginal", "conditional", "none")


@dataclass(eq=False)
class ModelParams:
    arch: str
    layer_weights: List[np.ndarray]
    layer_biases: List[np.ndarray]

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigurationError(f"unknown arch {self.arch!r}")
        expected = 1 if self.arch == "linear" else 2
        if len(self.layer_weights) != expected or len(self.layer_biases) != expected:
            raise ConfigurationError(f"{self.arch} model needs {expected} layer(s)")
        for W, b in zip(self.layer_weights, self.layer_biases):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ConfigurationError("layer shapes do not chain")
        for W_prev, W_next in zip(self.layer_weights, self.layer_weights[1:]):
            if W_prev.shape[1] != W_next.shape[0]:
                raise ConfigurationError("layer shapes do not chain")
        if self.layer_weights[-1].shape[1] != 1:
            raise ConfigurationError("final layer must have a single output")

    @property
    def input_dim(self) -> int:
        return self.layer_weights[0].shape[0]

    @property
    def repr_dim(self) -> int:
        return 1 if self.arch == "linear" else self.layer_weights[0].shape[1]

    @property
    def w(self) -> np.ndarray:
        """Linear weight vector (linear models only)."""
        if self.arch != "linear":
            raise ConfigurationError("w is only defined for linear models")
        return self.layer_weights[0][:, 0]

    def arrays(self) -> list:
        out = []
        for W, b in zip(self.layer_weights, self.layer_biases):
            out += [W, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec) -> "ModelParams":
        vec = np.asarray(vec, dtype=float)
        arrays, pos = [], 0
        for a in self.arrays():
            arrays.append(vec[pos : pos + a.size].reshape(a.shape).copy())
            pos += a.size
        if pos != vec.size:
            raise ValueError("parameter vector has the wrong length")
        return ModelParams(self.arch, arrays[0::2], arrays[1::2])

    def copy(self) -> "ModelParams":
        return self.with_flat(self.flat())

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "layers": [
                {"shape": list(W.shape), "weights": W.ravel().tolist(), "bias": b.tolist()}
                for W, b in zip(self.layer_weights, self.layer_biases)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        Ws, bs = [], []
        for layer in data["layers"]:
            Ws.append(np.asarray(layer["weights"], dtype=float).reshape(layer["shape"]))
            bs.append(np.asarray(layer["bias"], dtype=float))
        return cls(data["arch"], Ws, bs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


def linear_params(w, bias: float = 0.0) -> ModelParams:
    w = np.asarray(w, dtype=float).reshape(-1, 1)
    return ModelParams("linear", [w], [np.array([float(bias)])])


def init_params(arch: str, input_dim: int, hidden: int = 32, seed: int = 0) -> ModelParams:
    """Linear models start at zero; MLP weights are scaled-normal draws."""
    if arch == "linear":
        return linear_params(np.zeros(input_dim))
    if arch == "mlp":
        rng = np.random.default_rng(seed)
        W1 = rng.standard_normal((input_dim, hidden)) / np.sqrt(input_dim)
        w2 = rng.standard_normal((hidden, 1)) / np.sqrt(hidden)
        return ModelParams("mlp", [W1, w2], [np.zeros(hidden), np.zeros(1)])
    raise ConfigurationError(f"unknown arch {arch!r}")


@dataclass(frozen=True)
class ObjectiveConfig:
    alpha: float = 0.0
    lambda_l2: float = 0.0
    kernel: KernelConfig = field(default_factory=KernelConfig)
    use_weights_in_loss: bool = False
    use_weights_in_mmd: bool = False
    mmd_variant: str = "none"
    # Conditional penalty only: drop y-slices that lack one v side in a batch
    # instead of failing. Needed for small-batch studies.
    skip_empty_slices: bool = False

    def __post_init__(self):
        if self.alpha < 0 or self.lambda_l2 < 0:
            raise ConfigurationError("alpha and lambda_l2 must be >= 0")
        if self.mmd_variant not in MMD_VARIANTS:
            raise ConfigurationError(f"unknown mmd_variant {self.mmd_variant!r}")

    @property
    def penalized(self) -> bool:
        return self.mmd_variant != "none" and self.alpha > 0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "lambda_l2": self.lambda_l2,
            "gamma": self.kernel.gamma,
            "use_weights_in_loss": self.use_weights_in_loss,
            "use_weights_in_mmd": self.use_weights_in_mmd,
            "mmd_variant": self.mmd_variant,
            "skip_empty_slices": self.skip_empty_slices,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectiveConfig":
        data = dict(data)
        gamma = data.pop("gamma", KernelConfig().gamma)
        return cls(kernel=KernelConfig(gamma), **data)


def _check_input(params: ModelParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(f"expected an (m, {params.input_dim}) batch, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return x


def _forward(params: ModelParams, x):
    if params.arch == "linear":
        phi = x @ params.layer_weights[0]
        logits = phi[:, 0] + params.layer_biases[0][0]
        return phi, logits
    W1, w2 = params.layer_weights
    b1, b2 = params.layer_biases
    phi = np.tanh(x @ W1 + b1)
    logits = phi @ w2[:, 0] + b2[0]
    return phi, logits


def forward(params: ModelParams, x_batch):
    """Return ``(phi, prob)`` for a batch; ``prob`` lies strictly in (0, 1)."""
    x = _check_input(params, x_batch)
    phi, logits = _forward(params, x)
    prob = np.clip(expit(logits), PROB_EPS, 1.0 - PROB_EPS)
    return phi, prob


def logits(params: ModelParams, x_batch) -> np.ndarray:
    x = _check_input(params, x_batch)
    return _forward(params, x)[1]


def _require_groups(mask_groups, label):
    for name, count in mask_groups:
        if count < 2:
            raise BatchCompositionError(
                f"batch has {count} example(s) in {label} {name}; need >= 2 "
                "(restratify the batch or enlarge it)"
            )


def penalty_and_grad(phi, y, v, u_bar, cfg: ObjectiveConfig):
    """MMD^2 penalty (unscaled by alpha) and its gradient with respect to ``phi``."""
    v = np.asarray(v)
    if cfg.mmd_variant == "marginal":
        _require_groups([(f"v={g}", int(np.sum(v == g))) for g in (0, 1)], "group")
        if cfg.use_weights_in_mmd:
            weights = group_normalize(u_bar, v)
        else:
            weights = group_normalize(np.ones(len(v)), v)
        return weighted_mmd2_and_grad(phi, v, weights, cfg.kernel)
    if cfg.mmd_variant == "conditional":
        y = np.asarray(y)
        value = 0.0
        grad = np.zeros_like(phi)
        for yy in (0, 1):
            idx = np.flatnonzero(y == yy)
            vs = v[idx]
            counts = [(f"(y={yy}, v={g})", int(np.sum(vs == g))) for g in (0, 1)]
            if cfg.skip_empty_slices:
                if min(c for _, c in counts) < 1:
                    continue
            else:
                _require_groups(counts, "slice")
            val, g = weighted_mmd2_and_grad(
                phi[idx], vs, group_normalize(np.ones(len(idx)), vs), cfg.kernel
            )
            value += val
            grad[idx] += g
        return value, grad
    return 0.0, np.zeros_like(phi)


def objective_and_grad(params: ModelParams, x, y, u_tilde, u_bar, v, cfg: ObjectiveConfig):
    """Objective value, gradient (as a :class:`ModelParams`) and its parts.

    ``u_tilde`` are per-example loss weights; they are renormalized to sum to
    one within the batch. ``u_bar`` are per-example MMD weights; they are
    renormalized within each ``v`` group of the batch. Either is ignored when
    the matching ``use_weights_in_*`` flag is off.
    """
    x = _check_input(params, x)
    y = np.asarray(y, dtype=float)
    m = x.shape[0]

    if cfg.use_weights_in_loss:
        a = np.asarray(u_tilde, dtype=float)
        a = a / a.sum()
    else:
        a = np.full(m, 1.0 / m)

    if params.arch == "linear":
        W = params.layer_weights[0]
        phi = x @ W
        z = phi[:, 0] + params.layer_biases[0][0]
    else:
        W1, w2 = params.layer_weights
        b1, b2 = params.layer_biases
        phi = np.tanh(x @ W1 + b1)
        z = phi @ w2[:, 0] + b2[0]

    loss = float(a @ (np.logaddexp(0.0, z) - y * z))
    dz = a * (expit(z) - y)

    if cfg.penalized:
        mmd, dphi = penalty_and_grad(phi, y, v, u_bar, cfg)
        dphi = cfg.alpha * dphi
    else:
        mmd, dphi = 0.0, None

    l2 = float(sum(np.sum(Wk * Wk) for Wk in params.layer_weights))
    value = loss + cfg.alpha * mmd + cfg.lambda_l2 * l2

    if params.arch == "linear":
        g_phi = dz[:, None] if dphi is None else dz[:, None] + dphi
        gW = x.T @ g_phi + 2.0 * cfg.lambda_l2 * W
        gb = np.array([dz.sum()])
        grads = ModelParams("linear", [gW], [gb])
    else:
        g_phi = dz[:, None] * w2[:, 0][None, :]
        if dphi is not None:
            g_phi = g_phi + dphi
        g_pre = g_phi * (1.0 - phi * phi)
        gW1 = x.T @ g_pre + 2.0 * cfg.lambda_l2 * W1
        gb1 = g_pre.sum(axis=0)
        gw2 = phi.T @ dz[:, None] + 2.0 * cfg.lambda_l2 * w2
        gb2 = np.array([dz.sum()])
        grads = ModelParams("mlp", [gW1, gw2], [gb1, gb2])

    return value, grads, {"loss": loss, "mmd2": float(mmd), "l2": l2}
