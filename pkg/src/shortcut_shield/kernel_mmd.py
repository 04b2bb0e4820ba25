"""RBF kernel and V-statistic MMD^2 estimators with analytic gradients.

The kernel is ``k(a, b) = exp(-||a - b||^2 / gamma)``. All estimators are
V-statistics: the ``i == j`` terms are included.

The weighted two-group estimator is written as a single quadratic form.
With signed weights ``c_i = u_bar_i`` for ``v_i = 0`` and ``c_i = -u_bar_i``
for ``v_i = 1``::

    MMD^2 = sum_ij c_i c_j k(phi_i, phi_j)

which is the squared RKHS distance between the two weighted mean embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, EstimationError, NumericalError

CLAMP_TOL = 1e-12
GROUP_SUM_TOL = 1e-8
_CHUNK = 1024


@dataclass(frozen=True)
class KernelConfig:
    gamma: float = 100.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def sq_dists(a, b) -> np.ndarray:
    a, b = _as_2d(a), _as_2d(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[1] == 1:
        return (a - b.T) ** 2
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def rbf_gram(a, b, cfg: KernelConfig) -> np.ndarray:
    """Gram matrix ``K[i, j] = exp(-||a_i - b_j||^2 / gamma)``."""
    return np.exp(-sq_dists(a, b) / cfg.gamma)


def _quad_form(phi, c, gamma) -> float:
    # c^T K c, chunked over rows to bound memory on large validation sets.
    total = 0.0
    for start in range(0, len(phi), _CHUNK):
        block = np.exp(-sq_dists(phi[start : start + _CHUNK], phi) / gamma)
        total += float(c[start : start + _CHUNK] @ (block @ c))
    return total


def _clamp(value: float) -> float:
    if value < -CLAMP_TOL:
        raise NumericalError(f"MMD^2 estimate is negative beyond tolerance: {value!r}")
    return max(value, 0.0)


def _signed_weights(v, u_bar) -> np.ndarray:
    v = np.asarray(v)
    u_bar = np.asarray(u_bar, dtype=float)
    if v.shape[0] != u_bar.shape[0]:
        raise ValueError("v and u_bar must have the same length")
    for g in (0, 1):
        mask = v == g
        if not mask.any():
            raise EstimationError(f"group v={g} is empty; MMD^2 is undefined")
        total = u_bar[mask].sum()
        if abs(total - 1.0) > GROUP_SUM_TOL:
            raise ContractError(f"u_bar sums to {total!r} within group v={g}, expected 1")
    return np.where(v == 0, u_bar, -u_bar)


def weighted_mmd2(phi, v, u_bar, cfg: KernelConfig) -> float:
    """Weighted V-statistic MMD^2 between the ``v == 0`` and ``v == 1`` rows."""
    phi = _as_2d(phi)
    c = _signed_weights(v, u_bar)
    return _clamp(_quad_form(phi, c, cfg.gamma))


def uniform_group_weights(v) -> np.ndarray:
    v = np.asarray(v)
    out = np.zeros(len(v))
    for g in (0, 1):
        mask = v == g
        if mask.any():
            out[mask] = 1.0 / mask.sum()
    return out


def mmd2(phi, v, cfg: KernelConfig) -> float:
    """Unweighted V-statistic MMD^2 between the two ``v`` groups."""
    return weighted_mmd2(phi, v, uniform_group_weights(v), cfg)


def _slices(v, y):
    v = np.asarray(v)
    y = np.asarray(y)
    for yy in (0, 1):
        mask = y == yy
        for vv in (0, 1):
            if not np.any(mask & (v == vv)):
                raise EstimationError(f"slice (y={yy}, v={vv}) is empty")
        yield yy, np.flatnonzero(mask)


def conditional_mmd2(phi, v, y, cfg: KernelConfig) -> float:
    """Sum over ``y`` of the unweighted MMD^2 between ``v`` slices within ``y``."""
    phi = _as_2d(phi)
    v = np.asarray(v)
    total = 0.0
    for _, idx in list(_slices(v, y)):
        total += mmd2(phi[idx], v[idx], cfg)
    return total


def weighted_mmd2_grad(phi, v, u_bar, cfg: KernelConfig) -> np.ndarray:
    """Gradient of :func:`weighted_mmd2` with respect to every row of ``phi``.

    Uses ``d k(a, b) / d a = -(2 / gamma) (a - b) k(a, b)``.
    """
    phi = _as_2d(phi)
    c = _signed_weights(v, u_bar)
    K = rbf_gram(phi, phi, cfg)
    Kc = K @ c
    K_cphi = K @ (c[:, None] * phi)
    return (-4.0 / cfg.gamma) * c[:, None] * (phi * Kc[:, None] - K_cphi)


def weighted_mmd2_and_grad(phi, v, u_bar, cfg: KernelConfig):
    """Value and gradient sharing one Gram matrix (the training hot path)."""
    phi = _as_2d(phi)
    c = _signed_weights(v, u_bar)
    K = rbf_gram(phi, phi, cfg)
    Kc = K @ c
    value = _clamp(float(c @ Kc))
    K_cphi = K @ (c[:, None] * phi)
    grad = (-4.0 / cfg.gamma) * c[:, None] * (phi * Kc[:, None] - K_cphi)
    return value, grad


def conditional_mmd2_grad(phi, v, y, cfg: KernelConfig) -> np.ndarray:
    phi = _as_2d(phi)
    v = np.asarray(v)
    grad = np.zeros_like(phi)
    for _, idx in list(_slices(v, y)):
        grad[idx] += weighted_mmd2_grad(phi[idx], v[idx], uniform_group_weights(v[idx]), cfg)
    return grad
