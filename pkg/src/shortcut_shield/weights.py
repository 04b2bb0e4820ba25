"""Importance weights mapping the source joint of (Y, V) to the unconfounded one.

``u(y, v) = P(y) P(v) / P(y, v)`` with plug-in probabilities. Three
normalizations are carried around:

* ``u``        raw weights; they sum to ``n`` exactly,
* ``u_tilde``  ``u / sum(u)``, used for the weighted empirical risk,
* ``u_bar``    ``u`` normalized to sum to one inside each ``v`` group, used
  by the weighted MMD estimator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import OverlapError


@dataclass(frozen=True, eq=False)
class JointStats:
    counts: np.ndarray  # [y, v]
    n: int
    p_y: np.ndarray
    p_v: np.ndarray
    p_yv: np.ndarray

    def cell_weights(self) -> np.ndarray:
        """2x2 table of ``u(y, v)``."""
        return np.outer(self.p_y, self.p_v) / self.p_yv


@dataclass(frozen=True, eq=False)
class WeightSet:
    u: np.ndarray
    u_tilde: np.ndarray
    u_bar_by_group: np.ndarray
    c_ps: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["u"])
            for val in self.u:
                writer.writerow([repr(float(val))])


def stats_from_counts(counts) -> JointStats:
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (2, 2):
        raise ValueError(f"counts must be 2x2, got shape {counts.shape}")
    for yy in (0, 1):
        for vv in (0, 1):
            if counts[yy, vv] <= 0:
                raise OverlapError(
                    f"overlap violated: cell (y={yy}, v={vv}) has count {counts[yy, vv]}"
                )
    n = int(counts.sum())
    p_yv = counts / n
    return JointStats(counts, n, p_yv.sum(axis=1), p_yv.sum(axis=0), p_yv)


def estimate_stats(dataset) -> JointStats:
    """Maximum-likelihood cell probabilities of ``(y, v)``."""
    y = np.asarray(dataset.y)
    if y.size == 0:
        raise OverlapError("cannot estimate joint statistics from an empty dataset")
    counts = np.zeros((2, 2), dtype=np.int64)
    np.add.at(counts, (y, np.asarray(dataset.v)), 1)
    return stats_from_counts(counts)


def group_normalize(u, v) -> np.ndarray:
    """Scale ``u`` so that it sums to one within each value of ``v``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v)
    out = np.empty_like(u)
    for g in (0, 1):
        mask = v == g
        if mask.any():
            out[mask] = u[mask] / u[mask].sum()
    return out


def weights_for(stats: JointStats, y, v) -> WeightSet:
    """Weights for arbitrary rows using previously estimated statistics.

    This is how validation rows reuse the training-split statistics.
    """
    u = stats.cell_weights()[np.asarray(y), np.asarray(v)]
    return WeightSet(
        u=u,
        u_tilde=u / u.sum(),
        u_bar_by_group=group_normalize(u, v),
        c_ps=float(u.max()),
    )


def compute_weights(stats: JointStats, dataset) -> WeightSet:
    return weights_for(stats, dataset.y, dataset.v)


def sup_weight(stats: JointStats) -> float:
    """Largest cell weight over all four cells (not just observed rows)."""
    return float(stats.cell_weights().max())


def renyi_exponential(stats: JointStats, order: float = 2.0) -> float:
    """``2 ** D_order(P_unconf || P_source)`` over the (y, v) cells.

    With base-2 Renyi divergence this is ``(sum_c p0_c^a / ps_c^(a-1)) ** (1/(a-1))``;
    its limit as ``order -> inf`` is the sup weight.
    """
    p0 = np.outer(stats.p_y, stats.p_v).ravel()
    ps = stats.p_yv.ravel()
    a = float(order)
    return float(np.sum(p0**a / ps ** (a - 1.0)) ** (1.0 / (a - 1.0)))
