"""Minibatch Adam training for every method in the menu.

Method names map to objective flags:

======  ================  ===============  ============
name    loss weights      MMD weights      penalty
======  ================  ===============  ============
wMMD    u                 u_bar            marginal
MMD     uniform           uniform          marginal
cMMD    uniform           uniform          conditional
L2      uniform           --               none
wL2     u                 --               none
======  ================  ===============  ============

A method is paired with a cross-validation style; the labelled variants
(``wMMD-T``, ``MMD-uT``, ``L2-S``...) are listed in :data:`VARIANTS`.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np
from scipy.special import expit

from .errors import BatchCompositionError, ConfigurationError, NumericalError
from .kernel_mmd import CLAMP_TOL, KernelConfig
from .model import (
    ModelParams,
    ObjectiveConfig,
    init_params,
    linear_params,
    objective_and_grad,
)
from .weights import group_normalize

METHOD_NAMES = ("wMMD", "MMD", "cMMD", "L2", "wL2")
CV_STYLES = ("standard", "two_step", "two_step_unweighted")

VARIANTS = {
    "wMMD-T": ("wMMD", "two_step"),
    "wMMD-S": ("wMMD", "standard"),
    "MMD-T": ("MMD", "two_step"),
    "MMD-S": ("MMD", "standard"),
    "MMD-uT": ("MMD", "two_step_unweighted"),
    "cMMD-T": ("cMMD", "two_step"),
    "L2-S": ("L2", "standard"),
    "wL2-S": ("wL2", "standard"),
}

LAMBDA_GRID = (0.0, 0.001, 0.0001)
ALPHA_GRID = (1e3, 1e5, 1e7)
GAMMA_GRID = (1e1, 1e2, 1e3)


@dataclass(frozen=True)
class MethodSpec:
    name: str
    cv_style: str = "standard"
    experimental: bool = False

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ConfigurationError(f"unknown method {self.name!r}")
        if self.cv_style not in CV_STYLES:
            raise ConfigurationError(f"unknown cv_style {self.cv_style!r}")
        if (self.name, self.cv_style) not in VARIANTS.values() and not self.experimental:
            raise ConfigurationError(
                f"({self.name}, {self.cv_style}) is not a named variant; "
                "pass experimental=True to use it anyway"
            )

    @property
    def label(self) -> str:
        for label, pair in VARIANTS.items():
            if pair == (self.name, self.cv_style):
                return label
        return f"{self.name}-{self.cv_style}"

    @property
    def uses_mmd(self) -> bool:
        return self.name in ("wMMD", "MMD", "cMMD")

    @classmethod
    def from_label(cls, label: str) -> "MethodSpec":
        if label not in VARIANTS:
            raise ConfigurationError(f"unknown method label {label!r}; known: {sorted(VARIANTS)}")
        name, style = VARIANTS[label]
        return cls(name, style)

    def to_dict(self) -> dict:
        return {"name": self.name, "cv_style": self.cv_style, "experimental": self.experimental}

    @classmethod
    def from_dict(cls, data) -> "MethodSpec":
        if isinstance(data, str):
            return cls.from_label(data)
        return cls(**data)


def objective_for(
    method: MethodSpec,
    alpha: float = 0.0,
    lambda_l2: float = 0.0,
    gamma: float = 100.0,
    skip_empty_slices: bool = False,
) -> ObjectiveConfig:
    """Objective flags implied by a method name."""
    name = method.name
    variant = {"wMMD": "marginal", "MMD": "marginal", "cMMD": "conditional"}.get(name, "none")
    return ObjectiveConfig(
        alpha=alpha if variant != "none" else 0.0,
        lambda_l2=lambda_l2,
        kernel=KernelConfig(gamma),
        use_weights_in_loss=name in ("wMMD", "wL2"),
        use_weights_in_mmd=name == "wMMD",
        mmd_variant=variant,
        skip_empty_slices=skip_empty_slices and variant == "conditional",
    )


def hyper_grid(method: MethodSpec, skip_empty_slices: bool = False) -> List[ObjectiveConfig]:
    """Cartesian grid of penalty settings; alpha and gamma only for MMD methods."""
    if not method.uses_mmd:
        return [objective_for(method, lambda_l2=lam) for lam in LAMBDA_GRID]
    return [
        objective_for(method, alpha=a, lambda_l2=lam, gamma=g, skip_empty_slices=skip_empty_slices)
        for lam, a, g in itertools.product(LAMBDA_GRID, ALPHA_GRID, GAMMA_GRID)
    ]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 200
    batch_size: int = 64
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    seed: int = 0
    arch: str = "linear"
    hidden: int = 32
    # "constant" or "cosine" (anneals lr to zero over the run)
    lr_schedule: str = "constant"

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigurationError("lr must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("beta1 and beta2 must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ConfigurationError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.objective.penalized and self.batch_size < 4:
            raise ConfigurationError("batch_size must be >= 4 when an MMD penalty is active")

    def to_dict(self) -> dict:
        out = {
            k: getattr(self, k)
            for k in (
                "lr", "beta1", "beta2", "eps", "epochs", "batch_size", "seed", "arch", "hidden",
                "lr_schedule",
            )
        }
        out["objective"] = self.objective.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        if "objective" in data:
            data["objective"] = ObjectiveConfig.from_dict(data["objective"])
        return cls(**data)


@dataclass(eq=False)
class FittedModel:
    params: ModelParams
    trace: List[dict]
    method: MethodSpec
    config: TrainConfig

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "trace": self.trace,
            "method": self.method.to_dict(),
            "config": self.config.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "FittedModel":
        return cls(
            ModelParams.from_dict(data["params"]),
            list(data["trace"]),
            MethodSpec.from_dict(data["method"]),
            TrainConfig.from_dict(data["config"]),
        )

    def trace_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "loss", "mmd2", "l2"])
            for row in self.trace:
                writer.writerow(
                    [row["epoch"], repr(row["train_loss"]), repr(row["train_mmd2"]), repr(row["train_l2"])]
                )


class Adam:
    """Bias-corrected adaptive-moment updates on a list of arrays (in place)."""

    def __init__(self, arrays, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.arrays = arrays
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for a, g, m, v in zip(self.arrays, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            a -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def stratified_batches(groups, n_batches: int, rng: np.random.Generator, min_per_group: int = 0):
    """Split row indices into ``n_batches`` batches with proportional group shares.

    Each group is shuffled and cut into ``n_batches`` near-equal chunks; which
    batches receive the larger chunks is itself shuffled. Every row lands in
    exactly one batch.
    """
    groups = np.asarray(groups)
    labels = np.unique(groups)
    parts = [[] for _ in range(n_batches)]
    for g in labels:
        idx = rng.permutation(np.flatnonzero(groups == g))
        if len(idx) // n_batches < min_per_group:
            raise ConfigurationError(
                f"group {g!r} has {len(idx)} rows, fewer than {min_per_group} per batch "
                f"across {n_batches} batches; use a larger batch_size"
            )
        chunks = np.array_split(idx, n_batches)
        for b, chunk in zip(rng.permutation(n_batches), chunks):
            parts[b].append(chunk)
    return [np.sort(np.concatenate(p)) for p in parts]


def batch_groups(method_or_cfg, y, v) -> np.ndarray:
    """Group label per row used for stratification."""
    cfg = method_or_cfg
    if cfg.mmd_variant == "conditional" and not cfg.skip_empty_slices:
        return 2 * np.asarray(y) + np.asarray(v)
    return np.asarray(v)


def n_batches_for(n: int, batch_size: int) -> int:
    return max(1, int(np.ceil(n / batch_size)))


def train(dataset, weights, method: MethodSpec, cfg: TrainConfig) -> FittedModel:
    """Fit ``method`` on ``dataset``; deterministic given ``cfg.seed``.

    The objective flags in ``cfg.objective`` are overridden by the method
    name; only ``alpha``, ``lambda_l2``, ``gamma`` and ``skip_empty_slices`` are
    taken from it.
    """
    o = cfg.objective
    obj = objective_for(method, o.alpha, o.lambda_l2, o.kernel.gamma, o.skip_empty_slices)
    cfg = replace(cfg, objective=obj)
    x = np.asarray(dataset.x, dtype=float)
    y = np.asarray(dataset.y)
    v = np.asarray(dataset.v)
    u = np.asarray(weights.u, dtype=float)
    if len(u) != len(y):
        raise ConfigurationError("weights and dataset are not aligned")

    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg.arch, x.shape[1], cfg.hidden, seed=cfg.seed)
    arrays = params.arrays()
    opt = Adam(arrays, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    groups = batch_groups(obj, y, v)
    nb = n_batches_for(len(y), cfg.batch_size)
    min_per_group = 2 if obj.penalized else 0

    total_steps = cfg.epochs * nb
    trace = []
    for epoch in range(cfg.epochs):
        sums = np.zeros(3)
        batches = stratified_batches(groups, nb, rng, min_per_group)
        for idx in batches:
            if cfg.lr_schedule == "cosine":
                opt.lr = cfg.lr * 0.5 * (1.0 + np.cos(np.pi * opt.t / total_steps))
            _, grads, parts = objective_and_grad(
                params, x[idx], y[idx], u[idx], u[idx], v[idx], obj
            )
            opt.step(grads.arrays())
            sums += (parts["loss"], parts["mmd2"], parts["l2"])
        sums /= len(batches)
        trace.append(
            {
                "epoch": epoch,
                "train_loss": float(sums[0]),
                "train_mmd2": float(sums[1]),
                "train_l2": float(sums[2]),
            }
        )
    return FittedModel(params, trace, method, cfg)


def _signed_blocks(y, v, u, obj: ObjectiveConfig):
    """``[(rows, signed weights)]`` making up the batch penalty as quadratic forms."""
    if obj.mmd_variant == "marginal":
        w = group_normalize(u if obj.use_weights_in_mmd else np.ones(len(v)), v)
        for g in (0, 1):
            if np.sum(v == g) < 2:
                raise BatchCompositionError(f"batch has fewer than 2 examples in group v={g}")
        return [(np.arange(len(v)), np.where(v == 0, w, -w))]
    blocks = []
    for yy in (0, 1):
        idx = np.flatnonzero(y == yy)
        vs = v[idx]
        counts = [int(np.sum(vs == g)) for g in (0, 1)]
        if obj.skip_empty_slices:
            if min(counts) < 1:
                continue
        elif min(counts) < 2:
            raise BatchCompositionError(f"batch has fewer than 2 examples in a y={yy} slice")
        w = group_normalize(np.ones(len(idx)), vs)
        blocks.append((idx, np.where(vs == 0, w, -w)))
    return blocks


def train_many(dataset, weights, method: MethodSpec, cfg: TrainConfig, objectives) -> List[FittedModel]:
    """Train one linear model per objective, all on the same batch stream.

    Equivalent (up to floating-point summation order) to calling
    :func:`train` once per objective with ``cfg.seed``: batches depend only on
    the seed and the group labels, and every update is columnwise. All
    objectives must share the penalty variant and ``skip_empty_slices``.
    """
    if cfg.arch != "linear":
        return [train(dataset, weights, method, replace(cfg, objective=o)) for o in objectives]
    objs = [objective_for(method, o.alpha, o.lambda_l2, o.kernel.gamma, o.skip_empty_slices) for o in objectives]
    if not objs:
        raise ConfigurationError("no objectives given")
    base = objs[0]
    if any(o.skip_empty_slices != base.skip_empty_slices for o in objs):
        raise ConfigurationError("objectives disagree on skip_empty_slices")
    cfgs = [replace(cfg, objective=o) for o in objs]

    x = np.asarray(dataset.x, dtype=float)
    y = np.asarray(dataset.y)
    v = np.asarray(dataset.v)
    u = np.asarray(weights.u, dtype=float)
    if len(u) != len(y):
        raise ConfigurationError("weights and dataset are not aligned")
    n_c = len(objs)
    alpha = np.array([o.alpha if o.penalized else 0.0 for o in objs])
    lam = np.array([o.lambda_l2 for o in objs])
    gamma = np.array([o.kernel.gamma for o in objs])
    penalized = any(o.penalized for o in objs)

    rng = np.random.default_rng(cfg.seed)
    W = np.zeros((x.shape[1], n_c))
    b = np.zeros(n_c)
    opt = Adam([W, b], cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    groups = batch_groups(base, y, v)
    nb = n_batches_for(len(y), cfg.batch_size)
    total_steps = cfg.epochs * nb
    yf = y.astype(float)
    traces = [[] for _ in objs]
    for epoch in range(cfg.epochs):
        sums = np.zeros((3, n_c))
        for idx in stratified_batches(groups, nb, rng, 2 if penalized else 0):
            if cfg.lr_schedule == "cosine":
                opt.lr = cfg.lr * 0.5 * (1.0 + np.cos(np.pi * opt.t / total_steps))
            xb, yb, ub, vb = x[idx], yf[idx], u[idx], v[idx]
            a = ub / ub.sum() if base.use_weights_in_loss else np.full(len(idx), 1.0 / len(idx))
            phi = xb @ W
            z = phi + b
            loss = a @ (np.logaddexp(0.0, z) - yb[:, None] * z)
            g_phi = a[:, None] * (expit(z) - yb[:, None])
            gb = g_phi.sum(axis=0)
            mmd = np.zeros(n_c)
            if penalized:
                for rows, s in _signed_blocks(y[idx], vb, ub, base):
                    p = phi[rows]
                    diff = p[:, None, :] - p[None, :, :]
                    K = np.exp(-(diff * diff) / gamma)
                    Ks = np.einsum("ijc,j->ic", K, s)
                    val = s @ Ks
                    if np.any(val < -CLAMP_TOL):
                        raise NumericalError("MMD^2 estimate is negative beyond tolerance")
                    mmd += np.maximum(val, 0.0)
                    Ksp = np.einsum("ijc,jc->ic", K, s[:, None] * p)
                    g_phi[rows] += alpha * (-4.0 / gamma) * s[:, None] * (p * Ks - Ksp)
            l2 = np.sum(W * W, axis=0)
            gW = xb.T @ g_phi + 2.0 * lam * W
            opt.step([gW, gb])
            sums += (loss, mmd, l2)
        sums /= nb
        for c in range(n_c):
            traces[c].append(
                {
                    "epoch": epoch,
                    "train_loss": float(sums[0, c]),
                    "train_mmd2": float(sums[1, c]),
                    "train_l2": float(sums[2, c]),
                }
            )
    return [
        FittedModel(linear_params(W[:, c].copy(), b[c]), traces[c], method, cfgs[c])
        for c in range(n_c)
    ]
