"""Desk-scale checks of the theoretical claims behind weighted MMD training.

Every check returns a :class:`TheoryReport` with the JSON layout
``{name, inputs, statistics, satisfied}``. Reports flagged ``strict=False``
are diagnostics: they concern population quantities or function-class
membership that cannot be verified exactly, so they carry Monte Carlo slack
and never fail a run on their own.

Notation for the linear analysis: ``Delta`` is the mean gap
``E[X | V=0] - E[X | V=1]`` under the unconfounded distribution; for any
vector ``w``, ``w_perp`` is its projection onto ``Delta`` and ``w_par`` the
remainder.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, EstimationError
from .evaluation import auroc, derive_seed, proper_scores
from .kernel_mmd import KernelConfig, mmd2, weighted_mmd2
from .model import ModelParams, forward
from .simulator import DistributionSpec, ideal_spec, sample_dataset, shift_grid, true_delta
from .trainer import MethodSpec, TrainConfig, objective_for, train_many
from .weights import compute_weights, estimate_stats, group_normalize

MC_SLACK = 8.0


@dataclass
class TheoryReport:
    name: str
    inputs: dict
    statistics: dict
    satisfied: bool
    strict: bool = True

    def __getitem__(self, key):
        return self.statistics[key]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": _jsonable(self.inputs),
            "statistics": _jsonable(self.statistics),
            "satisfied": bool(self.satisfied),
            "strict": self.strict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


@dataclass(frozen=True)
class TheoryConfig:
    """Constants of the linear function classes.

    ``B_perp`` and ``B_par`` default to the largest norms of the data's
    components along and against ``Delta``.
    """

    A: float = 1.0
    tau: float = 0.0
    B_perp: Optional[float] = None
    B_par: Optional[float] = None
    n_rademacher_draws: int = 200
    delta_source: str = "analytic"

    def __post_init__(self):
        if not self.A > 0:
            raise ConfigurationError("A must be > 0")
        if self.tau < 0:
            raise ConfigurationError("tau must be >= 0")
        for name in ("B_perp", "B_par"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.n_rademacher_draws < 1:
            raise ConfigurationError("n_rademacher_draws must be >= 1")
        if self.delta_source not in ("analytic", "empirical"):
            raise ConfigurationError(f"unknown delta_source {self.delta_source!r}")

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "tau": self.tau,
            "B_perp": self.B_perp,
            "B_par": self.B_par,
            "n_rademacher_draws": self.n_rademacher_draws,
            "delta_source": self.delta_source,
        }


# ---------------------------------------------------------------- projection


def _check_delta(delta) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    if delta.ndim != 1 or not np.any(delta):
        raise ConfigurationError("delta must be a nonzero vector")
    return delta


def project_decompose(w, delta):
    """Split ``w`` into ``(w_perp, w_par)``: along ``delta`` and orthogonal to it."""
    w = np.asarray(w, dtype=float)
    delta = _check_delta(delta)
    if w.shape != delta.shape:
        raise ValueError("w and delta must have the same shape")
    w_perp = (delta @ w) / (delta @ delta) * delta
    return w_perp, w - w_perp


def projection_matrix(delta) -> np.ndarray:
    delta = _check_delta(delta)
    return np.outer(delta, delta) / (delta @ delta)


def group_mean_gap(x, v) -> np.ndarray:
    """Empirical ``mean(x | v=0) - mean(x | v=1)``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v)
    for g in (0, 1):
        if not np.any(v == g):
            raise EstimationError(f"group v={g} is empty")
    return x[v == 0].mean(axis=0) - x[v == 1].mean(axis=0)


def _params(model) -> ModelParams:
    return getattr(model, "params", model)


def _kernel_of(model) -> KernelConfig:
    cfg = getattr(model, "config", None)
    return cfg.objective.kernel if cfg is not None else KernelConfig()


def check_projection_bound(
    model, dataset_ideal, tol: float = 1e-10, rbf_rows: int = 4000
) -> TheoryReport:
    """Linear-witness form of the projection bound on an unconfounded sample.

    ``tau_hat = |w' Delta_hat|`` is the MMD lower bound given by the linear
    witness ``x -> w' x``; the identity ``||w_perp|| ||Delta_hat|| = tau_hat``
    is asserted to ``tol``. The RBF MMD of the model's representation is
    reported for comparison, computed on the first ``rbf_rows`` rows (the
    quadratic cost would otherwise dominate on large samples).
    """
    params = _params(model)
    if params.arch != "linear":
        raise ConfigurationError("the projection bound applies to linear models only")
    w = params.w
    delta = group_mean_gap(dataset_ideal.x, dataset_ideal.v)
    w_perp, _ = project_decompose(w, delta)
    tau_hat = abs(float(w @ delta))
    d_norm = float(np.linalg.norm(delta))
    perp_norm = float(np.linalg.norm(w_perp))
    w_norm = float(np.linalg.norm(w))
    identity_err = abs(perp_norm * d_norm - tau_hat)
    kernel = _kernel_of(model)
    head = dataset_ideal.subset(np.arange(min(rbf_rows, len(dataset_ideal))))
    phi, _ = forward(params, head.x)
    rbf_mmd = float(np.sqrt(mmd2(phi, head.v, kernel)))
    stats = {
        "w_perp_norm": perp_norm,
        "w_norm": w_norm,
        "w_perp_ratio": perp_norm / w_norm if w_norm > 0 else 0.0,
        "delta_norm": d_norm,
        "tau_hat": tau_hat,
        "bound": tau_hat / d_norm,
        "identity_error": identity_err,
        "rbf_mmd": rbf_mmd,
        "bound_ratio": tau_hat / rbf_mmd if rbf_mmd > 0 else float("inf"),
    }
    inputs = {"n": len(dataset_ideal), "gamma": kernel.gamma, "rbf_rows": len(head)}
    return TheoryReport("projection_bound", inputs, stats, identity_err <= tol * max(1.0, tau_hat))


# ---------------------------------------------------------------- Rademacher


def constrained_sup(s, delta, A: float, tau: float) -> np.ndarray:
    """``max w's`` over ``||w|| <= A`` and ``|w' delta| <= tau``, row by row of ``s``.

    Writing ``w = a e + b`` with ``e = delta / ||delta||`` and ``b`` orthogonal
    to ``e``, the optimum puts ``b`` along the orthogonal part of ``s`` and
    picks ``a`` as large as the slab allows, up to the unconstrained optimum.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    delta = _check_delta(delta)
    e = delta / np.linalg.norm(delta)
    p = np.abs(s @ e)
    s_norm = np.linalg.norm(s, axis=1)
    q = np.sqrt(np.maximum(s_norm**2 - p**2, 0.0))
    a_max = min(tau / np.linalg.norm(delta), A)
    free = A * p <= a_max * s_norm
    return np.where(free, A * s_norm, a_max * p + np.sqrt(A * A - a_max * a_max) * q)


def feature_bounds(x, delta):
    """Largest norms of the rows' components along and orthogonal to ``delta``."""
    x = np.asarray(x, dtype=float)
    delta = _check_delta(delta)
    e = delta / np.linalg.norm(delta)
    along = x @ e
    ortho = np.sqrt(np.maximum(np.sum(x * x, axis=1) - along**2, 0.0))
    return float(np.max(np.abs(along))), float(np.max(ortho))


def eq7_threshold(A: float, B_par: float, B_perp: float, delta_norm: float) -> float:
    """Largest MMD level for which the constrained class has the smaller bound."""
    return A * (np.hypot(B_par, B_perp) - B_par) * delta_norm / B_perp


def analytic_bounds(A, B_par, B_perp, delta_norm, tau, n):
    """Upper bounds on the two Rademacher complexities, ``(l2, l2 + mmd)``."""
    root = np.sqrt(n)
    return A * np.hypot(B_par, B_perp) / root, (A * B_par + tau * B_perp / delta_norm) / root


def rademacher_estimate(
    data,
    cfg: TheoryConfig,
    delta=None,
    v=None,
    seed: int = 0,
) -> TheoryReport:
    """Monte Carlo Rademacher complexities of the plain and MMD-constrained classes.

    ``data`` should be centered. ``delta`` is required when
    ``cfg.delta_source == "analytic"``; with ``"empirical"`` it is estimated
    from the group labels ``v``. Each draw uses the exact supremum, so the
    only randomness is in the sign vectors.
    """
    x = np.asarray(data, dtype=float)
    n = x.shape[0]
    if cfg.delta_source == "empirical":
        if v is None:
            raise ConfigurationError("empirical delta needs the group labels v")
        delta = group_mean_gap(x, v)
    elif delta is None:
        raise ConfigurationError("analytic delta_source needs delta")
    delta = _check_delta(delta)
    d_norm = float(np.linalg.norm(delta))
    b_perp, b_par = feature_bounds(x, delta)
    B_perp = cfg.B_perp if cfg.B_perp is not None else b_perp
    B_par = cfg.B_par if cfg.B_par is not None else b_par

    vacuous = cfg.tau >= cfg.A * d_norm
    if vacuous:
        warnings.warn("tau >= A ||delta||: the MMD constraint is vacuous", RuntimeWarning)

    rng = np.random.default_rng(seed)
    eps = rng.choice([-1.0, 1.0], size=(cfg.n_rademacher_draws, n))
    s = eps @ x / n
    sup_l2 = cfg.A * np.linalg.norm(s, axis=1)
    sup_mmd = constrained_sup(s, delta, cfg.A, cfg.tau)
    bound_l2, bound_mmd = analytic_bounds(cfg.A, B_par, B_perp, d_norm, cfg.tau, n)
    stats = {
        "r_l2": float(sup_l2.mean()),
        "r_l2mmd": float(sup_mmd.mean()),
        "bound_l2": float(bound_l2),
        "bound_l2mmd": float(bound_mmd),
        "eq7_rhs": float(eq7_threshold(cfg.A, B_par, B_perp, d_norm)),
        "B_perp": B_perp,
        "B_par": B_par,
        "delta_norm": d_norm,
        "vacuous": bool(vacuous),
        "pointwise_dominance": bool(np.all(sup_mmd <= sup_l2 * (1 + 1e-12))),
        "active_fraction": float(np.mean(sup_mmd < sup_l2)),
    }
    ok = (
        stats["pointwise_dominance"]
        and stats["r_l2"] <= stats["bound_l2"]
        and stats["r_l2mmd"] <= stats["bound_l2mmd"]
    )
    inputs = {**cfg.to_dict(), "n": n, "d": x.shape[1], "seed": seed}
    return TheoryReport("rademacher", inputs, stats, ok)


def eq7_ordering_check(A, B_par, B_perp, delta_norm, taus, n: int = 1) -> TheoryReport:
    """Below the threshold the constrained bound is smaller; at or above, it is not."""
    rhs = eq7_threshold(A, B_par, B_perp, delta_norm)
    rows, ok = [], True
    for tau in taus:
        b_l2, b_mmd = analytic_bounds(A, B_par, B_perp, delta_norm, tau, n)
        smaller = bool(b_mmd < b_l2)
        # exactly at the threshold the bounds agree up to rounding
        boundary = abs(tau - rhs) <= 1e-12 * max(1.0, rhs)
        agrees = boundary or smaller == (tau < rhs)
        ok &= agrees
        rows.append({"tau": float(tau), "bound_l2": b_l2, "bound_l2mmd": b_mmd, "smaller": smaller})
    inputs = {"A": A, "B_par": B_par, "B_perp": B_perp, "delta_norm": delta_norm, "n": n}
    return TheoryReport("eq7_ordering", inputs, {"eq7_rhs": rhs, "rows": rows}, bool(ok))


# ---------------------------------------------------------------- risk gaps


def _logloss(params, ds) -> float:
    return proper_scores(forward(params, ds.x)[1], ds.y)[0]


def _rep_mmd(params, ds, kernel: KernelConfig) -> float:
    phi, _ = forward(params, ds.x)
    u = compute_weights(estimate_stats(ds), ds).u
    return float(np.sqrt(weighted_mmd2(phi, ds.v, group_normalize(u, ds.v), kernel)))


def structural_gap_check(
    model,
    source_spec: DistributionSpec,
    rhos: Sequence[float],
    n: int = 10000,
    seed: int = 0,
    kernel: Optional[KernelConfig] = None,
) -> TheoryReport:
    """Compare the worst risk increase over the grid with twice the representation MMD.

    Risks are log losses estimated on fresh samples of size ``n``; the
    allowance ``8 / sqrt(n)`` absorbs Monte Carlo error.
    """
    params = _params(model)
    kernel = kernel or _kernel_of(model)
    p0 = sample_dataset(ideal_spec(source_spec), n, derive_seed(seed, 10_000))
    tau_hat = _rep_mmd(params, p0, kernel)
    r0 = _logloss(params, p0)
    gaps = []
    for i, spec in enumerate(shift_grid(source_spec, rhos)):
        gaps.append(_logloss(params, sample_dataset(spec, n, derive_seed(seed, i))) - r0)
    slack = MC_SLACK / np.sqrt(n)
    max_gap = float(max(gaps))
    stats = {
        "tau_hat": tau_hat,
        "max_gap": max_gap,
        "bound": 2.0 * tau_hat + slack,
        "slack": slack,
        "risk_p0": r0,
        "gaps": gaps,
    }
    inputs = {"rhos": list(rhos), "n": n, "seed": seed, "gamma": kernel.gamma, "rho_source": source_spec.rho}
    return TheoryReport("structural_gap", inputs, stats, max_gap <= stats["bound"], strict=False)


def lemma_componentwise_check(model, dataset_ideal, y: int, kernel: Optional[KernelConfig] = None) -> TheoryReport:
    """``P(Y=y) (R_{0y} - R_{1y})`` against the representation MMD plus slack."""
    if y not in (0, 1):
        raise ConfigurationError("y must be 0 or 1")
    params = _params(model)
    kernel = kernel or _kernel_of(model)
    ds = dataset_ideal
    risks = []
    for vv in (0, 1):
        mask = (ds.y == y) & (ds.v == vv)
        if not mask.any():
            raise EstimationError(f"slice (y={y}, v={vv}) is empty")
        risks.append(_logloss(params, ds.subset(np.flatnonzero(mask))))
    p_y = float(np.mean(ds.y == y))
    lhs = p_y * (risks[0] - risks[1])
    phi, _ = forward(params, ds.x)
    tau_hat = float(np.sqrt(mmd2(phi, ds.v, kernel)))
    slack = MC_SLACK / np.sqrt(len(ds))
    stats = {"lhs": lhs, "tau_hat": tau_hat, "slack": slack, "risk_v0": risks[0], "risk_v1": risks[1]}
    inputs = {"y": y, "n": len(ds), "gamma": kernel.gamma}
    return TheoryReport("lemma_componentwise", inputs, stats, lhs <= tau_hat + slack, strict=False)


# ---------------------------------------------------------------- bias tradeoff


def bias_tradeoff_demo(
    source_spec: DistributionSpec,
    alphas: Sequence[float],
    seed: int = 0,
    n_train: int = 5000,
    n_eval: int = 20000,
    gamma: float = 100.0,
    train_cfg: Optional[TrainConfig] = None,
    rhos: Optional[Sequence[float]] = None,
) -> TheoryReport:
    """Train unweighted and weighted MMD models along an ``alpha`` path.

    Rows report AUROC on a large unconfounded sample, the worst AUROC over
    the shift grid and the invariance gap. ``satisfied`` is the ordering at
    the largest ``alpha``: the weighted model is at least as accurate under
    the unconfounded distribution.
    """
    if abs(source_spec.rho - 0.5) < 1e-12:
        raise ConfigurationError("the tradeoff needs a confounded source (rho != 0.5)")
    alphas = sorted(float(a) for a in alphas)
    if not alphas:
        raise ConfigurationError("alphas must be nonempty")
    rhos = [round(0.1 * k, 1) for k in range(1, 10)] if rhos is None else list(rhos)
    cfg = replace(train_cfg or TrainConfig(), seed=seed)
    ds = sample_dataset(source_spec, n_train, seed)
    w = compute_weights(estimate_stats(ds), ds)
    p0 = sample_dataset(ideal_spec(source_spec), n_eval, derive_seed(seed, 10_000))
    grid = [sample_dataset(s, n_eval, derive_seed(seed, i)) for i, s in enumerate(shift_grid(source_spec, rhos))]

    rows = []
    for weighted in (False, True):
        method = MethodSpec("wMMD" if weighted else "MMD", "two_step")
        objs = [objective_for(method, alpha=a, gamma=gamma) for a in alphas]
        for a, fm in zip(alphas, train_many(ds, w, method, cfg, objs)):
            scores = [auroc(forward(fm.params, g.x)[1], g.y) for g in grid]
            rows.append(
                {
                    "alpha": a,
                    "weighted": weighted,
                    "train_p0_auroc": auroc(forward(fm.params, p0.x)[1], p0.y),
                    "worst_auroc": float(min(scores)),
                    "invariance_gap": float(max(scores) - min(scores)),
                }
            )
    top = {r["weighted"]: r for r in rows if r["alpha"] == alphas[-1]}
    ok = top[True]["train_p0_auroc"] >= top[False]["train_p0_auroc"]
    inputs = {
        "alphas": alphas,
        "seed": seed,
        "n_train": n_train,
        "n_eval": n_eval,
        "gamma": gamma,
        "rho_source": source_spec.rho,
    }
    return TheoryReport("bias_tradeoff", inputs, {"rows": rows}, bool(ok))


# ---------------------------------------------------------------- suite


THEORY_CHECKS = (
    "projection_identity",
    "projection_bound",
    "rademacher",
    "eq7_ordering",
    "structural_gap",
    "lemma_componentwise",
    "bias_tradeoff",
)


@dataclass
class TheorySettings:
    """Knobs of :func:`run_theory`; every field has a desk-scale default."""

    checks: List[str] = field(default_factory=lambda: list(THEORY_CHECKS))
    seeds: List[int] = field(default_factory=lambda: list(range(5)))
    A: float = 1.0
    tau_fraction: float = 0.5
    n_rademacher: int = 500
    n_rademacher_draws: int = 200
    n_ideal: int = 2000
    n_gap: int = 10000
    alpha_projection: float = 1e5
    alpha_gap: float = 1e3
    gamma: float = 100.0
    tradeoff_alphas: List[float] = field(default_factory=lambda: [0.0, 1e3, 1e5, 1e7])
    rhos: List[float] = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 10)])
    majority: float = 0.8

    def __post_init__(self):
        unknown = set(self.checks) - set(THEORY_CHECKS)
        if unknown:
            raise ConfigurationError(f"unknown theory checks: {sorted(unknown)}")
        if not self.seeds:
            raise ConfigurationError("theory seeds must be nonempty")

    @classmethod
    def from_dict(cls, data: dict) -> "TheorySettings":
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc


def projection_identity_check(n_pairs: int = 100, d: int = 20, seed: int = 0, tol: float = 1e-10) -> TheoryReport:
    """``||w_perp|| ||Delta|| = |w' Delta|`` and orthogonality on random pairs."""
    rng = np.random.default_rng(seed)
    worst_norm, worst_orth = 0.0, 0.0
    for _ in range(n_pairs):
        w, delta = rng.standard_normal(d), rng.standard_normal(d)
        w_perp, w_par = project_decompose(w, delta)
        scale = max(1.0, abs(w @ delta))
        worst_norm = max(worst_norm, abs(np.linalg.norm(w_perp) * np.linalg.norm(delta) - abs(w @ delta)) / scale)
        worst_orth = max(worst_orth, abs(w_perp @ w_par))
    stats = {"max_norm_error": worst_norm, "max_orthogonality_error": worst_orth}
    return TheoryReport(
        "projection_identity",
        {"n_pairs": n_pairs, "d": d, "seed": seed},
        stats,
        worst_norm <= tol and worst_orth <= tol,
    )


def _combine(name, reports, majority, strict, extra=None) -> TheoryReport:
    frac = float(np.mean([r.satisfied for r in reports]))
    stats = {"fraction_satisfied": frac, "per_seed": [r.to_dict() for r in reports], **(extra or {})}
    return TheoryReport(name, {"n_seeds": len(reports), "majority": majority}, stats, frac >= majority, strict)


def run_theory(spec: DistributionSpec, settings: TheorySettings, train_cfg: TrainConfig) -> List[TheoryReport]:
    """Run the selected checks; multi-seed checks are summarized by majority."""
    s = settings
    out = []
    ideal = ideal_spec(spec)
    confounded = spec if abs(spec.rho - 0.5) > 1e-12 else replace(spec, rho=0.9)
    wmmd = MethodSpec("wMMD", "two_step")
    l2 = MethodSpec("L2", "standard")

    if "projection_identity" in s.checks:
        out.append(projection_identity_check(seed=s.seeds[0]))

    if "projection_bound" in s.checks:
        reps, wins = [], []
        for seed in s.seeds:
            ds = sample_dataset(ideal, s.n_ideal, seed)
            w = compute_weights(estimate_stats(ds), ds)
            cfg = replace(train_cfg, seed=seed)
            fw = train_many(ds, w, wmmd, cfg, [objective_for(wmmd, s.alpha_projection, gamma=s.gamma)])[0]
            fl = train_many(ds, w, l2, cfg, [objective_for(l2)])[0]
            rw, rl = check_projection_bound(fw, ds), check_projection_bound(fl, ds)
            reps += [rw, rl]
            wins.append(rw["w_perp_ratio"] < rl["w_perp_ratio"])
        rep = _combine("projection_bound", reps, 1.0, True, {"wmmd_smaller_ratio": wins})
        out.append(rep)

    if "rademacher" in s.checks or "eq7_ordering" in s.checks:
        ds = sample_dataset(ideal, s.n_rademacher, s.seeds[0])
        x = ds.x - ds.x.mean(axis=0)
        delta = true_delta(spec)
        probe = rademacher_estimate(x, TheoryConfig(A=s.A, n_rademacher_draws=1), delta=delta)
        rhs = probe["eq7_rhs"]
        if "rademacher" in s.checks:
            reps = []
            for seed in s.seeds:
                dss = sample_dataset(ideal, s.n_rademacher, seed)
                xs = dss.x - dss.x.mean(axis=0)
                cfg = TheoryConfig(A=s.A, n_rademacher_draws=s.n_rademacher_draws)
                first = rademacher_estimate(xs, cfg, delta=delta, seed=seed)
                cfg = replace(cfg, tau=s.tau_fraction * first["eq7_rhs"])
                r = rademacher_estimate(xs, cfg, delta=delta, seed=seed)
                r.satisfied = r.satisfied and r["r_l2mmd"] < r["r_l2"]
                reps.append(r)
            out.append(_combine("rademacher", reps, 1.0, True))
        if "eq7_ordering" in s.checks:
            taus = np.linspace(0.0, 2.0 * rhs, 50)
            out.append(
                eq7_ordering_check(s.A, probe["B_par"], probe["B_perp"], probe["delta_norm"], taus)
            )

    if "structural_gap" in s.checks or "lemma_componentwise" in s.checks:
        gap_reps, lemma_reps = [], []
        for seed in s.seeds:
            ds = sample_dataset(confounded, s.n_gap // 2, seed)
            w = compute_weights(estimate_stats(ds), ds)
            fm = train_many(
                ds, w, wmmd, replace(train_cfg, seed=seed), [objective_for(wmmd, s.alpha_gap, gamma=s.gamma)]
            )[0]
            if "structural_gap" in s.checks:
                gap_reps.append(structural_gap_check(fm, confounded, s.rhos, s.n_gap, seed))
            if "lemma_componentwise" in s.checks:
                p0 = sample_dataset(ideal, s.n_gap, derive_seed(seed, 20_000))
                lemma_reps += [lemma_componentwise_check(fm, p0, yy) for yy in (0, 1)]
        if gap_reps:
            out.append(_combine("structural_gap", gap_reps, s.majority, False))
        if lemma_reps:
            out.append(_combine("lemma_componentwise", lemma_reps, s.majority, False))

    if "bias_tradeoff" in s.checks:
        reps = [
            bias_tradeoff_demo(confounded, s.tradeoff_alphas, seed, gamma=s.gamma, train_cfg=train_cfg, rhos=s.rhos)
            for seed in s.seeds
        ]
        out.append(_combine("bias_tradeoff", reps, s.majority, False))
    return out
