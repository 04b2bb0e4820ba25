"""Independent reference implementations used as test oracles.

Each oracle is written in the most literal form available (explicit loops,
generic optimizers, arbitrary-precision quadrature) and shares no code with
the library beyond the batching helper used to align a reference trainer.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy.optimize import minimize


def rbf(a, b, gamma):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return math.exp(-float(np.sum((a - b) ** 2)) / gamma)


def gram_loop(a, b, gamma):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty((len(a), len(b)))
    for i in range(len(a)):
        for j in range(len(b)):
            out[i, j] = rbf(a[i], b[j], gamma)
    return out


def weighted_mmd2_loop(phi, v, u_bar, gamma):
    """Three double sums, exactly as written for the weighted V-statistic."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    g0 = [i for i in range(len(v)) if v[i] == 0]
    g1 = [i for i in range(len(v)) if v[i] == 1]
    s00 = sum(u_bar[i] * u_bar[j] * rbf(phi[i], phi[j], gamma) for i in g0 for j in g0)
    s11 = sum(u_bar[i] * u_bar[j] * rbf(phi[i], phi[j], gamma) for i in g1 for j in g1)
    s01 = sum(u_bar[i] * u_bar[j] * rbf(phi[i], phi[j], gamma) for i in g0 for j in g1)
    return s00 + s11 - 2.0 * s01


def mmd2_loop(phi, v, gamma):
    """Unweighted Gretton-style V-statistic."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    a = phi[np.asarray(v) == 0]
    b = phi[np.asarray(v) == 1]
    kaa = np.mean([rbf(p, q, gamma) for p in a for q in a])
    kbb = np.mean([rbf(p, q, gamma) for p in b for q in b])
    kab = np.mean([rbf(p, q, gamma) for p in a for q in b])
    return kaa + kbb - 2.0 * kab


def conditional_mmd2_loop(phi, v, y, gamma):
    phi = np.asarray(phi, dtype=float)
    v, y = np.asarray(v), np.asarray(y)
    return sum(mmd2_loop(phi[y == yy], v[y == yy], gamma) for yy in (0, 1))


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of a scalar function of an array."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        fp = f(x)
        flat[k] = old - h
        fm = f(x)
        flat[k] = old
        gflat[k] = (fp - fm) / (2 * h)
    return g


def auroc_pairs(scores, labels, weights=None):
    """Exhaustive pair counting with ties worth one half."""
    scores = list(map(float, scores))
    w = [1.0] * len(scores) if weights is None else list(map(float, weights))
    num = den = 0.0
    for i, (si, li) in enumerate(zip(scores, labels)):
        if li != 1:
            continue
        for j, (sj, lj) in enumerate(zip(scores, labels)):
            if lj != 0:
                continue
            pw = w[i] * w[j]
            den += pw
            num += pw * (1.0 if si > sj else 0.5 if si == sj else 0.0)
    return num / den


def t_pvalue_mpmath(t, df):
    """Two-sided Student-t p-value by direct quadrature of the density."""
    mpmath.mp.dps = 30
    nu = mpmath.mpf(df)
    c = mpmath.gamma((nu + 1) / 2) / (mpmath.sqrt(nu * mpmath.pi) * mpmath.gamma(nu / 2))
    dens = lambda s: c * (1 + s * s / nu) ** (-(nu + 1) / 2)
    tail = mpmath.quad(dens, [abs(mpmath.mpf(t)), mpmath.inf])
    return float(2 * tail)


def constrained_sup_numeric(s, delta, A, tau):
    """Maximize ``w's`` subject to ``||w|| <= A`` and ``|w'delta| <= tau`` with SLSQP."""
    s = np.asarray(s, dtype=float)
    delta = np.asarray(delta, dtype=float)
    cons = [
        {"type": "ineq", "fun": lambda w: A * A - w @ w, "jac": lambda w: -2 * w},
        {"type": "ineq", "fun": lambda w: tau - w @ delta, "jac": lambda w: -delta},
        {"type": "ineq", "fun": lambda w: tau + w @ delta, "jac": lambda w: delta},
    ]
    best = -np.inf
    rng = np.random.default_rng(0)
    starts = [np.zeros_like(s), A * s / np.linalg.norm(s) * 0.5] + [
        0.1 * rng.standard_normal(s.size) for _ in range(3)
    ]
    for w0 in starts:
        res = minimize(
            lambda w: -(w @ s), w0, jac=lambda w: -s, constraints=cons, method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 1000},
        )
        best = max(best, -res.fun)
    return best


class ReferenceLogisticTrainer:
    """Plain (optionally weighted) logistic regression with Adam, written out longhand.

    Only the batch index stream is shared with the library so the two can be
    compared epoch by epoch.
    """

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8, lam=0.0):
        self.lr, self.b1, self.b2, self.eps, self.lam = lr, beta1, beta2, eps, lam

    def fit(self, x, y, batches_per_epoch, sample_weights=None):
        d = x.shape[1]
        theta = np.zeros(d + 1)  # weights then bias
        m = np.zeros(d + 1)
        v = np.zeros(d + 1)
        t = 0
        losses = []
        for batches in batches_per_epoch:
            total = 0.0
            for idx in batches:
                xb, yb = x[idx], y[idx]
                a = np.ones(len(idx)) if sample_weights is None else sample_weights[idx]
                a = a / a.sum()
                z = xb @ theta[:d] + theta[d]
                p = 1.0 / (1.0 + np.exp(-z))
                loss = -np.sum(a * (yb * np.log(p) + (1 - yb) * np.log(1 - p)))
                total += loss
                r = a * (p - yb)
                g = np.concatenate([xb.T @ r + 2 * self.lam * theta[:d], [r.sum()]])
                t += 1
                m = self.b1 * m + (1 - self.b1) * g
                v = self.b2 * v + (1 - self.b2) * g * g
                mh = m / (1 - self.b1**t)
                vh = v / (1 - self.b2**t)
                theta = theta - self.lr * mh / (np.sqrt(vh) + self.eps)
            losses.append(total / len(batches))
        return theta, losses
