"""Metrics and shift-grid evaluation of fitted models."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, EstimationError
from .model import forward
from .simulator import DistributionSpec, sample_dataset, shift_grid

REPORT_HEADER = ["method", "seed", "rho_train", "rho_test", "auroc", "logloss", "brier", "n_test"]
CLIP = 1e-12


def auroc(scores, labels, weights=None) -> float:
    """Mann-Whitney probability that a positive outranks a negative.

    Ties count one half. Optional per-example ``weights`` give the weighted
    version (each positive/negative pair weighted by the product).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    w = np.ones(len(scores)) if weights is None else np.asarray(weights, dtype=float)
    pos = labels == 1
    if pos.all() or not pos.any():
        raise EstimationError("AUROC needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    s, p, wt = scores[order], pos[order], w[order]
    # boundaries of tied runs
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    wpos = np.add.reduceat(np.where(p, wt, 0.0), starts)
    wneg = np.add.reduceat(np.where(p, 0.0, wt), starts)
    neg_below = np.cumsum(wneg) - wneg
    num = np.sum(wpos * (neg_below + 0.5 * wneg))
    return float(num / (wpos.sum() * wneg.sum()))


def proper_scores(probs, labels, weights=None):
    """Mean logistic loss and Brier score."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    p = np.clip(probs, CLIP, 1.0 - CLIP)
    w = np.full(len(p), 1.0 / len(p)) if weights is None else np.asarray(weights) / np.sum(weights)
    logloss = -np.sum(w * (labels * np.log(p) + (1 - labels) * np.log1p(-p)))
    brier = np.sum(w * (probs - labels) ** 2)
    return float(logloss), float(brier)


def accuracy(probs, labels, weights=None) -> float:
    correct = (np.asarray(probs) >= 0.5) == (np.asarray(labels) == 1)
    if weights is None:
        return float(np.mean(correct))
    w = np.asarray(weights, dtype=float)
    return float(np.sum(w * correct) / np.sum(w))


@dataclass
class EvalReport:
    rows: List[dict]
    summary: dict = field(default_factory=dict)

    def to_csv(self, path, append: bool = False) -> None:
        write_rows(path, self.rows, append=append)

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True)


def write_rows(path, rows, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not append or fh.tell() == 0:
            writer.writerow(REPORT_HEADER)
        for r in rows:
            writer.writerow(
                [
                    r["method"],
                    int(r["seed"]),
                    repr(float(r["rho_train"])),
                    repr(float(r["rho_test"])),
                    repr(float(r["auroc"])),
                    repr(float(r["logloss"])),
                    repr(float(r["brier"])),
                    int(r["n_test"]),
                ]
            )


def derive_seed(seed: int, index: int) -> int:
    """Independent, reproducible child seed for grid point ``index``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def summarize(rows, rho_train: Optional[float] = None) -> dict:
    aurocs = np.array([r["auroc"] for r in rows])
    rhos = np.array([r["rho_test"] for r in rows])
    at_train = float("nan")
    if rho_train is not None and len(rows):
        j = int(np.argmin(np.abs(rhos - rho_train)))
        if abs(rhos[j] - rho_train) < 1e-12:
            at_train = float(aurocs[j])
    return {
        "invariance_gap_auroc": float(aurocs.max() - aurocs.min()),
        "worst_auroc": float(aurocs.min()),
        "at_train_auroc": at_train,
    }


def score_dataset(predict, ds):
    """``predict`` maps an ``x`` matrix to probabilities."""
    probs = predict(ds.x)
    ll, br = proper_scores(probs, ds.y)
    return {"auroc": auroc(probs, ds.y), "logloss": ll, "brier": br}


def _predictor(model):
    if callable(model):
        return model
    params = getattr(model, "params", model)
    return lambda x: forward(params, x)[1]


def evaluate_grid(
    model,
    source_spec: DistributionSpec,
    rhos: Sequence[float],
    n_test: int = 10000,
    seed: int = 0,
    method: Optional[str] = None,
) -> EvalReport:
    """Score ``model`` on a fresh test set for every ``rho`` in the grid.

    ``model`` may be a FittedModel, a ModelParams, or a callable returning
    probabilities. Rows are sorted by ``rho_test``.
    """
    rhos = list(rhos)
    if not rhos:
        raise ConfigurationError("rhos must be nonempty")
    predict = _predictor(model)
    if method is None:
        method = getattr(getattr(model, "method", None), "label", "model")
    specs = shift_grid(source_spec, rhos)
    rows = []
    for i, spec in enumerate(specs):
        ds = sample_dataset(spec, n_test, derive_seed(seed, i))
        m = score_dataset(predict, ds)
        rows.append(
            {
                "method": method,
                "seed": seed,
                "rho_train": source_spec.rho,
                "rho_test": spec.rho,
                "n_test": n_test,
                **m,
            }
        )
    rows.sort(key=lambda r: r["rho_test"])
    return EvalReport(rows, summarize(rows, source_spec.rho))
