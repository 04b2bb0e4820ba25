"""Synthetic anti-causal data with a controllable label/shortcut correlation.

Labels ``(Y, V)`` generate the input: ``Y`` drives a "core" Gaussian block
and ``V`` drives a "shortcut" Gaussian block. Changing ``rho`` only changes
the joint of ``(Y, V)``; ``P(X | Y, V)`` and ``P(Y)`` stay fixed, so a grid of
``rho`` values sweeps the family of shifted test distributions.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, GenerationError

MIN_ROWS = 40

_SPEC_FIELDS = (
    "p_y1",
    "rho",
    "d_core",
    "d_shortcut",
    "mu_core",
    "mu_shortcut",
    "sigma_core",
    "sigma_shortcut",
    "flip_rate",
    "rotation",
)


def _joint_from(p_y1: float, rho: float) -> np.ndarray:
    if rho == 0.5:
        # independence: keep P(Y) and take a fair V
        return np.outer([1.0 - p_y1, p_y1], [0.5, 0.5])
    else:
        p_v1 = (p_y1 - (1.0 - rho)) / (2.0 * rho - 1.0)
    # joint[y, v]
    joint = np.array(
        [
            [rho * (1.0 - p_v1), (1.0 - rho) * p_v1],
            [(1.0 - rho) * (1.0 - p_v1), rho * p_v1],
        ]
    )
    if not (0.0 < p_v1 < 1.0) or np.any(joint <= 0.0):
        raise ConfigurationError(
            f"infeasible (p_y1={p_y1}, rho={rho}): implied P(V=1)={p_v1:.6g} "
            "leaves a (y, v) cell with probability <= 0"
        )
    return joint


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """One member of the shift family.

    ``rho`` is ``P(Y=1|V=1) = P(Y=0|V=0)``. ``rotation`` (optional) is an
    orthogonal matrix applied to ``concat(core, shortcut)``.
    """

    p_y1: float = 0.5
    rho: float = 0.5
    d_core: int = 10
    d_shortcut: int = 40
    mu_core: float = 1.0
    mu_shortcut: float = 1.0
    sigma_core: float = 1.0
    sigma_shortcut: float = 1.0
    flip_rate: float = 0.01
    rotation: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 < self.p_y1 < 1.0:
            raise ConfigurationError(f"p_y1 must lie in (0, 1), got {self.p_y1}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in (0, 1), got {self.rho}")
        for name in ("d_core", "d_shortcut"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {val}")
        # mu_shortcut = 0 is allowed: it switches the shortcut signal off.
        if self.mu_core <= 0 or self.mu_shortcut < 0:
            raise ConfigurationError("mean offsets must be positive")
        if self.sigma_core <= 0 or self.sigma_shortcut <= 0:
            raise ConfigurationError("noise scales must be positive")
        if not 0.0 <= self.flip_rate < 1.0:
            raise ConfigurationError(f"flip_rate must lie in [0, 1), got {self.flip_rate}")
        if self.rotation is not None:
            rot = np.asarray(self.rotation, dtype=float)
            d = self.dim
            if rot.shape != (d, d):
                raise ConfigurationError(f"rotation must be {d}x{d}, got {rot.shape}")
            if np.max(np.abs(rot.T @ rot - np.eye(d))) > 1e-10:
                raise ConfigurationError("rotation is not orthogonal to within 1e-10")
            object.__setattr__(self, "rotation", rot)
        _joint_from(self.p_y1, self.rho)

    @property
    def dim(self) -> int:
        return int(self.d_core) + int(self.d_shortcut)

    def joint(self) -> np.ndarray:
        """2x2 array of cell probabilities indexed ``[y, v]``."""
        return _joint_from(self.p_y1, self.rho)

    def p_v1(self) -> float:
        return float(self.joint()[:, 1].sum())

    def rotation_matrix(self) -> np.ndarray:
        if self.rotation is None:
            return np.eye(self.dim)
        return self.rotation

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in _SPEC_FIELDS}
        if self.rotation is not None:
            out["rotation"] = self.rotation.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSpec":
        unknown = set(data) - set(_SPEC_FIELDS)
        if unknown:
            raise ConfigurationError(f"unknown DistributionSpec fields: {sorted(unknown)}")
        kwargs = dict(data)
        if kwargs.get("rotation") is not None:
            kwargs["rotation"] = np.asarray(kwargs["rotation"], dtype=float)
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DistributionSpec":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, DistributionSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))


@dataclass(eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    seed: int = 0

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx], self.v[idx], self.seed)

    def cell_counts(self) -> np.ndarray:
        counts = np.zeros((2, 2), dtype=np.int64)
        np.add.at(counts, (self.y, self.v), 1)
        return counts

    def to_csv(self, path, extra_columns: Optional[dict] = None) -> None:
        """Write ``x_0..x_{d-1},y,v`` (plus optional extra columns)."""
        d = self.x.shape[1]
        header = [f"x_{j}" for j in range(d)] + ["y", "v"]
        extra_columns = extra_columns or {}
        header += list(extra_columns)
        extras = [np.asarray(col) for col in extra_columns.values()]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i in range(len(self.y)):
                row = [repr(float(val)) for val in self.x[i]]
                row += [int(self.y[i]), int(self.v[i])]
                row += [repr(float(col[i])) for col in extras]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path, seed: int = 0) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [r for r in reader]
        xcols = [j for j, name in enumerate(header) if name.startswith("x_")]
        iy, iv = header.index("y"), header.index("v")
        arr = np.array(rows, dtype=object)
        x = arr[:, xcols].astype(float) if rows else np.zeros((0, len(xcols)))
        y = arr[:, iy].astype(np.int64) if rows else np.zeros(0, dtype=np.int64)
        v = arr[:, iv].astype(np.int64) if rows else np.zeros(0, dtype=np.int64)
        return cls(x, y, v, seed)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.v, other.v)
        )


def sample_dataset(
    spec: DistributionSpec, n: int, seed: int, min_rows: int = MIN_ROWS
) -> Dataset:
    """Draw ``n`` rows from ``spec``.

    Clean labels generate ``x``; label noise is applied afterwards to the
    recorded ``y`` and ``v`` independently.
    """
    if n < min_rows:
        raise ConfigurationError(f"n must be >= {min_rows}, got {n}")
    joint = spec.joint()
    p_v1 = joint[:, 1].sum()
    p_y1_given_v = joint[1, :] / joint.sum(axis=0)

    rng = np.random.default_rng(seed)
    v = (rng.random(n) < p_v1).astype(np.int64)
    y = (rng.random(n) < p_y1_given_v[v]).astype(np.int64)
    core = (2 * y - 1)[:, None] * spec.mu_core + spec.sigma_core * rng.standard_normal(
        (n, spec.d_core)
    )
    short = (2 * v - 1)[:, None] * spec.mu_shortcut + spec.sigma_shortcut * rng.standard_normal(
        (n, spec.d_shortcut)
    )
    x = np.concatenate([core, short], axis=1)
    if spec.rotation is not None:
        x = x @ spec.rotation.T
    if spec.flip_rate > 0:
        y = np.where(rng.random(n) < spec.flip_rate, 1 - y, y)
        v = np.where(rng.random(n) < spec.flip_rate, 1 - v, v)

    ds = Dataset(x, y, v, seed)
    counts = ds.cell_counts()
    for yy in (0, 1):
        for vv in (0, 1):
            if counts[yy, vv] == 0:
                raise GenerationError(
                    f"cell (y={yy}, v={vv}) is empty in a sample of n={n} (seed={seed})"
                )
    return ds


def shift_grid(spec: DistributionSpec, rhos: Sequence[float]) -> list:
    """Copies of ``spec`` with ``rho`` replaced; everything else unchanged."""
    rhos = list(rhos)
    if not rhos:
        raise ConfigurationError("rhos must be a nonempty list")
    return [dataclasses.replace(spec, rho=float(r)) for r in rhos]


def ideal_spec(spec: DistributionSpec) -> DistributionSpec:
    """The member of the family where ``Y`` and ``V`` are independent (``rho = 0.5``)."""
    return dataclasses.replace(spec, rho=0.5)


def true_delta(spec: DistributionSpec) -> np.ndarray:
    """Analytic ``E[X|V=0] - E[X|V=1]`` under the unconfounded member."""
    # The core block has mean zero given V when Y and V are independent
    # and P(Y=1) = 1/2; for other p_y1 its conditional mean is the same for
    # both V values, so it cancels in the difference either way.
    delta = np.concatenate(
        [np.zeros(spec.d_core), -2.0 * spec.mu_shortcut * np.ones(spec.d_shortcut)]
    )
    return spec.rotation_matrix() @ delta


def core_direction(spec: DistributionSpec) -> np.ndarray:
    """Weight vector using only the core block (the Bayes direction on X*)."""
    w = np.concatenate([np.ones(spec.d_core), np.zeros(spec.d_shortcut)])
    w *= 2.0 * spec.mu_core / spec.sigma_core**2
    return spec.rotation_matrix() @ w


def load_spec(path) -> DistributionSpec:
    return DistributionSpec.from_json(Path(path).read_text())
