"""K-fold model selection, including the two-step MMD filter.

Two-step selection: a candidate survives if a one-sample t-test cannot
reject "mean validation MMD^2 across folds is zero" at the 0.05 level; the
survivor with the best mean validation AUROC is chosen. If nothing survives,
the candidate with the smallest mean validation MMD^2 is returned and
``fallback_used`` is set. Ties always go to the lowest candidate index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import betainc

from .errors import ConfigurationError

P_THRESHOLD = 0.05


def kfold_split(n: int, K: int, seed: int):
    """Shuffled folds; returns a list of ``(train_idx, val_idx)`` pairs."""
    if K < 2:
        raise ConfigurationError(f"K must be >= 2, got {K}")
    if n < 2 * K:
        raise ConfigurationError(f"need n >= 2K rows for {K} folds, got n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, K)
    out = []
    for k in range(K):
        val = np.sort(folds[k])
        train = np.sort(np.concatenate([folds[j] for j in range(K) if j != k]))
        out.append((train, val))
    return out


def t_statistic(samples, mu0: float = 0.0):
    x = np.asarray(samples, dtype=float)
    n = len(x)
    sd = x.std(ddof=1)
    return (x.mean() - mu0) / (sd / np.sqrt(n)), n - 1


def t_test_pvalue(samples, mu0: float = 0.0) -> float:
    """Two-sided one-sample Student t-test p-value.

    Uses ``p = I_{df / (df + t^2)}(df / 2, 1 / 2)`` (regularized incomplete
    beta). With zero sample variance the p-value is 1 if the mean equals
    ``mu0`` and 0 otherwise.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("t-test needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    mean = x.mean()
    # std can underflow to 0 for distinct subnormal values too
    if np.all(x == x[0]) or x.std(ddof=1) == 0.0:
        return 1.0 if mean == mu0 else 0.0
    t, df = t_statistic(x, mu0)
    if not np.isfinite(t):
        return 0.0
    return float(min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t * t)))))


@dataclass
class FoldMetrics:
    """Per-fold validation metrics of one candidate.

    The plain fields hold u-weighted metrics; the ``*_unweighted`` fields
    hold their unweighted counterparts (they default to the weighted ones).
    """

    val_mmd2: np.ndarray
    val_auroc: np.ndarray
    val_acc: np.ndarray
    val_mmd2_unweighted: Optional[np.ndarray] = None
    val_auroc_unweighted: Optional[np.ndarray] = None
    val_acc_unweighted: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("val_mmd2", "val_auroc", "val_acc"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
            alt = name + "_unweighted"
            val = getattr(self, alt)
            setattr(self, alt, getattr(self, name).copy() if val is None else np.asarray(val, dtype=float))
        lens = {len(getattr(self, f)) for f in self._fields()}
        if len(lens) != 1:
            raise ConfigurationError("all fold metric arrays must have the same length")
        if self.K < 2:
            raise ConfigurationError("need at least 2 folds")
        for f in self._fields():
            if not np.all(np.isfinite(getattr(self, f))):
                raise ConfigurationError(f"{f} contains non-finite values")

    @staticmethod
    def _fields():
        base = ("val_mmd2", "val_auroc", "val_acc")
        return base + tuple(b + "_unweighted" for b in base)

    @property
    def K(self) -> int:
        return len(self.val_mmd2)

    def get(self, metric: str, weighted: bool = True) -> np.ndarray:
        return getattr(self, f"val_{metric}" + ("" if weighted else "_unweighted"))

    def to_dict(self) -> dict:
        return {f: getattr(self, f).tolist() for f in self._fields()}

    @classmethod
    def from_dict(cls, data: dict) -> "FoldMetrics":
        return cls(**data)


@dataclass
class SelectionResult:
    chosen: int
    survivors: List[int]
    p_values: List[float]
    fallback_used: bool = False
    config_ids: List = field(default_factory=list)

    @property
    def chosen_config(self):
        return self.config_ids[self.chosen] if self.config_ids else self.chosen

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen,
            "chosen_config": self.chosen_config,
            "survivors": list(self.survivors),
            "p_values": [float(p) for p in self.p_values],
            "fallback_used": self.fallback_used,
            "config_ids": list(self.config_ids),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _unpack(candidates):
    candidates = list(candidates)
    if not candidates:
        raise ConfigurationError("no candidates to select from")
    ids, metrics = zip(*candidates)
    if len({m.K for m in metrics}) != 1:
        raise ConfigurationError("candidates were evaluated on different numbers of folds")
    return list(ids), list(metrics)


def _argmax_first(values) -> int:
    # np.argmax returns the first maximal index, i.e. lowest-index tie-break
    return int(np.argmax(np.asarray(values, dtype=float)))


def two_step_select(
    candidates: Sequence,
    weighted_metrics: bool = True,
    p_threshold: float = P_THRESHOLD,
    criterion: str = "auroc",
) -> SelectionResult:
    """Filter by the fold-MMD t-test, then maximize mean validation ``criterion``."""
    ids, metrics = _unpack(candidates)
    pvals = [t_test_pvalue(m.get("mmd2", weighted_metrics), 0.0) for m in metrics]
    survivors = [i for i, p in enumerate(pvals) if p >= p_threshold]
    if survivors:
        scores = [metrics[i].get(criterion, weighted_metrics).mean() for i in survivors]
        chosen = survivors[_argmax_first(scores)]
        return SelectionResult(chosen, survivors, pvals, False, ids)
    means = [m.get("mmd2", weighted_metrics).mean() for m in metrics]
    chosen = int(np.argmin(means))
    return SelectionResult(chosen, [], pvals, True, ids)


def standard_select(candidates: Sequence) -> SelectionResult:
    """Pick the best mean (unweighted) validation accuracy; every candidate survives."""
    ids, metrics = _unpack(candidates)
    accs = [m.get("acc", weighted=False).mean() for m in metrics]
    pvals = [t_test_pvalue(m.val_mmd2_unweighted, 0.0) for m in metrics]
    return SelectionResult(_argmax_first(accs), list(range(len(metrics))), pvals, False, ids)


def select(candidates: Sequence, cv_style: str) -> SelectionResult:
    if cv_style == "standard":
        return standard_select(candidates)
    if cv_style == "two_step":
        return two_step_select(candidates, weighted_metrics=True)
    if cv_style == "two_step_unweighted":
        return two_step_select(candidates, weighted_metrics=False)
    raise ConfigurationError(f"unknown cv_style {cv_style!r}")
