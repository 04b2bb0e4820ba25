"""End-to-end protocol: sample, weight, sweep, select, refit, evaluate.

One *unit* of work is a ``(seed, method name)`` pair. The hyperparameter
sweep is shared by every cross-validation style of the same method name
(``wMMD-T`` and ``wMMD-S`` reuse the same fold models).
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .evaluation import accuracy, auroc, evaluate_grid, write_rows
from .kernel_mmd import conditional_mmd2, mmd2, weighted_mmd2
from .model import ObjectiveConfig, forward
from .selection import FoldMetrics, kfold_split, select
from .simulator import DistributionSpec, sample_dataset, shift_grid
from .trainer import (
    ALPHA_GRID,
    FittedModel,
    GAMMA_GRID,
    LAMBDA_GRID,
    MethodSpec,
    TrainConfig,
    hyper_grid,
    objective_for,
    train,
    train_many,
)
from .weights import compute_weights, estimate_stats, group_normalize, weights_for

DEFAULT_RHOS = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass
class ExperimentConfig:
    spec: DistributionSpec
    methods: List[MethodSpec]
    seeds: List[int]
    rhos_test: List[float] = field(default_factory=lambda: list(DEFAULT_RHOS))
    n_train: int = 5000
    n_test: int = 10000
    out_dir: str = "results"
    train: TrainConfig = field(default_factory=TrainConfig)
    K: int = 5
    # Optional override of the hyperparameter grid: keys lambda_l2, alpha, gamma.
    grid: Optional[Dict[str, list]] = None
    skip_empty_slices: bool = False

    def __post_init__(self):
        if not self.methods:
            raise ConfigurationError("methods must be nonempty")
        if not self.seeds:
            raise ConfigurationError("seeds must be nonempty")
        if not self.rhos_test:
            raise ConfigurationError("rhos_test must be nonempty")
        # validates every rho (range and feasibility) before any work starts
        shift_grid(self.spec, self.rhos_test)
        if self.n_train < 2 * self.K:
            raise ConfigurationError("n_train too small for the requested folds")

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "methods": [m.label if not m.experimental else m.to_dict() for m in self.methods],
            "seeds": list(self.seeds),
            "rhos_test": list(self.rhos_test),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "out_dir": str(self.out_dir),
            "train": self.train.to_dict(),
            "K": self.K,
            "grid": self.grid,
            "skip_empty_slices": self.skip_empty_slices,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {
            "spec", "methods", "seeds", "rhos_test", "n_train", "n_test", "out_dir",
            "train", "K", "grid", "skip_empty_slices", "theory",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown experiment config keys: {sorted(unknown)}")
        data.pop("theory", None)
        try:
            data["spec"] = DistributionSpec.from_dict(data.get("spec", {}))
            data["methods"] = [MethodSpec.from_dict(m) for m in data.get("methods", [])]
            if "train" in data:
                data["train"] = TrainConfig.from_dict(data["train"])
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def candidate_grid(method: MethodSpec, grid=None, skip_empty_slices=False) -> List[ObjectiveConfig]:
    if grid is None:
        return hyper_grid(method, skip_empty_slices)
    lams = grid.get("lambda_l2", LAMBDA_GRID)
    if not method.uses_mmd:
        return [objective_for(method, lambda_l2=lam) for lam in lams]
    return [
        objective_for(method, alpha=a, lambda_l2=lam, gamma=g, skip_empty_slices=skip_empty_slices)
        for lam, a, g in itertools.product(
            lams, grid.get("alpha", ALPHA_GRID), grid.get("gamma", GAMMA_GRID)
        )
    ]


def validation_metrics(params, val, u_val, obj: ObjectiveConfig) -> dict:
    """Weighted and unweighted validation metrics of one fitted candidate."""
    phi, prob = forward(params, val.x)
    kernel = obj.kernel
    if obj.mmd_variant == "conditional":
        # weights are constant inside each (y, v) slice, so both versions agree
        m_w = m_u = conditional_mmd2(phi, val.v, val.y, kernel)
    else:
        m_w = weighted_mmd2(phi, val.v, group_normalize(u_val, val.v), kernel)
        m_u = mmd2(phi, val.v, kernel)
    return {
        "mmd2": m_w,
        "auroc": auroc(prob, val.y, u_val),
        "acc": accuracy(prob, val.y, u_val),
        "mmd2_unweighted": m_u,
        "auroc_unweighted": auroc(prob, val.y),
        "acc_unweighted": accuracy(prob, val.y),
    }


def sweep_method(ds, method: MethodSpec, base: TrainConfig, K: int, seed: int, grid=None,
                 skip_empty_slices=False):
    """Train every grid candidate on every fold; return ``[(objective, FoldMetrics)]``."""
    folds = kfold_split(len(ds), K, seed)
    candidates = candidate_grid(method, grid, skip_empty_slices)
    per_cand = [[] for _ in candidates]
    for train_idx, val_idx in folds:
        tr, val = ds.subset(train_idx), ds.subset(val_idx)
        stats = estimate_stats(tr)
        w_tr = compute_weights(stats, tr)
        u_val = weights_for(stats, val.y, val.v).u
        fits = train_many(tr, w_tr, method, replace(base, seed=seed), candidates)
        for c, (obj, fm) in enumerate(zip(candidates, fits)):
            per_cand[c].append(validation_metrics(fm.params, val, u_val, obj))
    out = []
    for obj, rows in zip(candidates, per_cand):
        metrics = FoldMetrics(
            **{f"val_{k}": np.array([r[k] for r in rows]) for k in rows[0]}
        )
        out.append((obj, metrics))
    return out


def fit_selected(ds, method: MethodSpec, obj: ObjectiveConfig, base: TrainConfig, seed: int):
    w = compute_weights(estimate_stats(ds), ds)
    return train(ds, w, method, replace(base, objective=obj, seed=seed))


def run_unit(config: ExperimentConfig, seed: int, methods: List[MethodSpec]):
    """All methods sharing one name, for one seed.

    Returns ``(rows, selections, models)`` keyed by method label.
    """
    name = methods[0].name
    assert all(m.name == name for m in methods)
    ds = sample_dataset(replace(config.spec), config.n_train, seed)
    sweep = sweep_method(
        ds, methods[0], config.train, config.K, seed, config.grid, config.skip_empty_slices
    )
    candidates = [(obj.to_dict(), fm) for obj, fm in sweep]
    rows, selections, models = [], {}, {}
    fitted_cache = {}
    for method in methods:
        sel = select(candidates, method.cv_style)
        if sel.chosen not in fitted_cache:
            fitted_cache[sel.chosen] = fit_selected(
                ds, method, sweep[sel.chosen][0], config.train, seed
            )
        fm = fitted_cache[sel.chosen]
        fm = replace_method(fm, method)
        rep = evaluate_grid(fm, config.spec, config.rhos_test, config.n_test, seed, method.label)
        rows.extend(rep.rows)
        selections[method.label] = {
            **sel.to_dict(),
            "fold_metrics": [m.to_dict() for _, m in candidates],
            "summary": rep.summary,
        }
        models[method.label] = fm
    return rows, selections, models


def replace_method(fm, method):
    return FittedModel(fm.params, fm.trace, method, fm.config)


def units_of(config: ExperimentConfig):
    """Ordered ``(seed, [methods with the same name])`` work units."""
    names = []
    for m in config.methods:
        if m.name not in names:
            names.append(m.name)
    for seed in config.seeds:
        for name in names:
            yield seed, [m for m in config.methods if m.name == name]


def _unit_job(args):
    config, seed, methods = args
    rows, selections, _ = run_unit(config, seed, methods)
    return rows, selections


def default_jobs() -> int:
    return int(os.environ.get("SHORTCUT_SHIELD_JOBS", "1"))


def run_experiment(config: ExperimentConfig, jobs: Optional[int] = None) -> Path:
    """Run every unit and write ``results.csv``, ``selection.json``, ``manifest.json``.

    Completed units recorded in an existing manifest with the same config
    hash are skipped, so a crashed run resumes without duplicating rows.
    """
    jobs = default_jobs() if jobs is None else jobs
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    results_path = out / "results.csv"
    selection_path = out / "selection.json"
    chash = config.config_hash()

    manifest = {"config_hash": chash, "version": __version__, "completed": []}
    selections: dict = {}
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text())
        if old.get("config_hash") == chash and results_path.exists():
            manifest = old
            if selection_path.exists():
                selections = json.loads(selection_path.read_text())
    if not manifest["completed"]:
        write_rows(results_path, [], append=False)
        selections = {}

    done = {(c["seed"], c["method"]) for c in manifest["completed"]}
    todo = [
        (seed, ms)
        for seed, ms in units_of(config)
        if not all((seed, m.label) in done for m in ms)
    ]

    def collect(seed, ms, rows, sels):
        write_rows(results_path, rows, append=True)
        for label, sel in sels.items():
            selections[f"{seed}/{label}"] = sel
            manifest["completed"].append({"seed": seed, "method": label})
        selection_path.write_text(json.dumps(selections, indent=2, sort_keys=True))
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_unit_job, [(config, s, ms) for s, ms in todo])
            for (seed, ms), (rows, sels) in zip(todo, results):
                collect(seed, ms, rows, sels)
    else:
        for seed, ms in todo:
            rows, sels = _unit_job((config, seed, ms))
            collect(seed, ms, rows, sels)
    return out


# Staged runs: each stage reads the previous stage's file from ``out``.


def run_sweep(config: ExperimentConfig, out=None) -> Path:
    """Write ``sweep.json``: per ``seed/method name`` the fold metrics of every candidate."""
    out = Path(out or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    blob = {}
    for seed, ms in units_of(config):
        ds = sample_dataset(config.spec, config.n_train, seed)
        sweep = sweep_method(ds, ms[0], config.train, config.K, seed, config.grid, config.skip_empty_slices)
        blob[f"{seed}/{ms[0].name}"] = [
            {"objective": obj.to_dict(), "metrics": fm.to_dict()} for obj, fm in sweep
        ]
    path = out / "sweep.json"
    path.write_text(json.dumps(blob, indent=2, sort_keys=True))
    return path


def _read_json(path: Path, stage: str):
    if not path.exists():
        raise ConfigurationError(f"{path} not found; run the {stage!r} stage first")
    return json.loads(path.read_text())


def run_select(config: ExperimentConfig, out=None) -> Path:
    """Write ``selection.json`` from an existing ``sweep.json``."""
    out = Path(out or config.out_dir)
    sweep = _read_json(out / "sweep.json", "sweep")
    selections = {}
    for seed in config.seeds:
        for m in config.methods:
            key = f"{seed}/{m.name}"
            if key not in sweep:
                raise ConfigurationError(f"sweep.json has no entry for {key}")
            cands = [(c["objective"], FoldMetrics.from_dict(c["metrics"])) for c in sweep[key]]
            selections[f"{seed}/{m.label}"] = select(cands, m.cv_style).to_dict()
    path = out / "selection.json"
    path.write_text(json.dumps(selections, indent=2, sort_keys=True))
    return path


def run_evaluate(config: ExperimentConfig, out=None) -> Path:
    """Refit each selected configuration and write ``results.csv``."""
    out = Path(out or config.out_dir)
    selections = _read_json(out / "selection.json", "select")
    rows = []
    for seed in config.seeds:
        ds = sample_dataset(config.spec, config.n_train, seed)
        for m in config.methods:
            key = f"{seed}/{m.label}"
            if key not in selections:
                raise ConfigurationError(f"selection.json has no entry for {key}")
            obj = ObjectiveConfig.from_dict(selections[key]["chosen_config"])
            fm = fit_selected(ds, m, obj, config.train, seed)
            rows += evaluate_grid(fm, config.spec, config.rhos_test, config.n_test, seed, m.label).rows
    path = out / "results.csv"
    write_rows(path, rows, append=False)
    return path
