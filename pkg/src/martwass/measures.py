"""Finitely supported probability measures on R and R^d.

Both measure types are immutable: their arrays are flagged read-only after
construction and every operation returns a new object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatch, DomainError

WEIGHT_TOL = 1e-12
MERGE_TOL = 1e-14


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class NormSpec:
    """The L^r norm on R^d, ``r`` in [1, inf]."""

    r: float = 2.0

    def __post_init__(self):
        r = float(self.r)
        if math.isnan(r) or r < 1.0:
            raise DomainError(f"norm index must be >= 1 or inf, got {self.r!r}")
        object.__setattr__(self, "r", r)

    @classmethod
    def parse(cls, text) -> "NormSpec":
        if isinstance(text, NormSpec):
            return text
        if isinstance(text, str) and text.strip().lower() in ("inf", "infinity", "max"):
            return cls(math.inf)
        return cls(float(text))

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.r)

    def __call__(self, v):
        """Norm of a vector, or of each row of a 2-D array."""
        v = np.abs(np.asarray(v, dtype=float))
        big = v.max(axis=-1) if v.shape[-1] else np.zeros(v.shape[:-1])
        if self.is_inf:
            return big
        if self.r == 1.0:
            return v.sum(axis=-1)
        # factor out the largest coordinate so v**r cannot overflow
        safe = np.where(big > 0, big, 1.0)
        scaled = v / np.expand_dims(safe, -1)
        return big * np.sum(scaled ** self.r, axis=-1) ** (1.0 / self.r)

    def __str__(self):
        return "inf" if self.is_inf else f"{self.r:g}"


EUCLIDEAN = NormSpec(2.0)


def _check_weights(weights, n):
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != n:
        raise ValueError(f"got {w.shape[0]} weights for {n} atoms")
    if n == 0:
        raise ValueError("a measure needs at least one atom")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights sum to {total!r}, not 1")
    return w


@dataclass(frozen=True, eq=False)
class DiscreteMeasure1D:
    """Probability measure sum_i w_i delta_{a_i} on the real line.

    Atoms closer than ``MERGE_TOL`` are merged and zero weights dropped, so
    the stored atoms are strictly increasing with positive weights.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __init__(self, atoms, weights):
        a = np.asarray(atoms, dtype=float).ravel()
        if not np.all(np.isfinite(a)):
            raise ValueError("atoms must be finite")
        w = _check_weights(weights, a.shape[0])
        order = np.argsort(a, kind="stable")
        a, w = a[order], w[order]
        keep_a, keep_w = [a[0]], [w[0]]
        for x, p in zip(a[1:], w[1:]):
            if x - keep_a[-1] <= MERGE_TOL:
                keep_w[-1] += p
            else:
                keep_a.append(x)
                keep_w.append(p)
        a, w = np.array(keep_a), np.array(keep_w)
        pos = w > 0
        a, w = a[pos], w[pos]
        w = w / w.sum()
        cum = np.cumsum(w)
        cum[-1] = 1.0
        object.__setattr__(self, "atoms", _frozen(a))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "_cum", _frozen(cum))

    @classmethod
    def dirac(cls, x: float) -> "DiscreteMeasure1D":
        return cls([x], [1.0])

    @classmethod
    def uniform(cls, atoms) -> "DiscreteMeasure1D":
        atoms = np.asarray(atoms, dtype=float)
        return cls(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))

    @classmethod
    def from_fractions(cls, atoms: Sequence, weights: Sequence) -> "DiscreteMeasure1D":
        """Build from exact rationals; the weights must sum to exactly 1."""
        fw = [Fraction(w) for w in weights]
        if sum(fw) != 1:
            raise ValueError(f"rational weights sum to {sum(fw)}, not 1")
        if any(w < 0 for w in fw):
            raise ValueError("weights must be nonnegative")
        return cls([float(Fraction(a)) for a in atoms], [float(w) for w in fw])

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return 1

    @property
    def cumulative(self) -> np.ndarray:
        """F at each atom; the last entry is exactly 1."""
        return self._cum

    @property
    def points(self) -> np.ndarray:
        return self.atoms.reshape(-1, 1)

    def cdf(self, x):
        return cdf(self, x)

    def quantile(self, u):
        return quantile(self, u)

    def mean(self) -> float:
        return float(self.weights @ self.atoms)

    def as_nd(self) -> "DiscreteMeasureND":
        return DiscreteMeasureND(self.points, self.weights)

    def map(self, f) -> "DiscreteMeasure1D":
        return DiscreteMeasure1D(f(self.atoms), self.weights)

    def __eq__(self, other):
        return same_measure(self, other, tol=0.0)

    def __repr__(self):
        return f"DiscreteMeasure1D(atoms={self.atoms.tolist()}, weights={self.weights.tolist()})"


@dataclass(frozen=True, eq=False)
class DiscreteMeasureND:
    """Probability measure sum_i w_i delta_{x_i} on R^d.

    Points are stored in lexicographic order; points whose coordinates all
    agree within ``MERGE_TOL`` are merged.
    """

    points: np.ndarray
    weights: np.ndarray

    def __init__(self, points, weights):
        p = np.asarray(points, dtype=float)
        if p.ndim == 1:
            p = p.reshape(-1, 1)
        if p.ndim != 2 or p.shape[1] == 0:
            raise ValueError("points must be an (n, d) array with d >= 1")
        if not np.all(np.isfinite(p)):
            raise ValueError("points must be finite")
        w = _check_weights(weights, p.shape[0])
        p, w = _merge_points(p, w)
        pos = w > 0
        p, w = p[pos], w[pos]
        object.__setattr__(self, "points", _frozen(p))
        object.__setattr__(self, "weights", _frozen(w / w.sum()))

    @classmethod
    def dirac(cls, x) -> "DiscreteMeasureND":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return cls(x, [1.0])

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def as_nd(self) -> "DiscreteMeasureND":
        return self

    def as_1d(self) -> DiscreteMeasure1D:
        if self.dim != 1:
            raise DimensionMismatch(f"cannot view a {self.dim}-dimensional measure as 1-D")
        return DiscreteMeasure1D(self.points[:, 0], self.weights)

    def map(self, f) -> "DiscreteMeasureND":
        """Image measure under ``f`` applied to the (n, d) point array."""
        return DiscreteMeasureND(f(self.points), self.weights)

    def translate(self, shift) -> "DiscreteMeasureND":
        return self.map(lambda p: p + np.asarray(shift, dtype=float))

    def embed(self, d: int) -> "DiscreteMeasureND":
        """Pad points with zero coordinates up to dimension ``d``."""
        if d < self.dim:
            raise DimensionMismatch(f"cannot embed dimension {self.dim} into {d}")
        pad = np.zeros((self.size, d - self.dim))
        return DiscreteMeasureND(np.hstack([self.points, pad]), self.weights)

    def __eq__(self, other):
        return same_measure(self, other, tol=0.0)

    def __repr__(self):
        return f"DiscreteMeasureND(points={self.points.tolist()}, weights={self.weights.tolist()})"


Measure = Union[DiscreteMeasure1D, DiscreteMeasureND]


def _merge_points(p, w):
    order = np.lexsort(p.T[::-1])
    p, w = p[order], w[order]
    n = p.shape[0]
    owner = np.arange(n)
    for i in range(n):
        if owner[i] != i:
            continue
        j = i + 1
        # candidates share the first coordinate within tolerance
        while j < n and p[j, 0] - p[i, 0] <= MERGE_TOL:
            if owner[j] == j and np.max(np.abs(p[j] - p[i])) <= MERGE_TOL:
                owner[j] = i
            j += 1
    heads = np.flatnonzero(owner == np.arange(n))
    merged_w = np.zeros(n)
    np.add.at(merged_w, owner, w)
    return p[heads], merged_w[heads]


def as_nd(m: Measure) -> DiscreteMeasureND:
    return m if isinstance(m, DiscreteMeasureND) else m.as_nd()


def as_1d(m: Measure) -> DiscreteMeasure1D:
    return m if isinstance(m, DiscreteMeasure1D) else m.as_1d()


def same_measure(a: Measure, b: Measure, tol: float = 1e-12) -> bool:
    a, b = as_nd(a), as_nd(b)
    if a.dim != b.dim or a.size != b.size:
        return False
    return bool(
        np.all(np.abs(a.points - b.points) <= tol) and np.all(np.abs(a.weights - b.weights) <= tol)
    )


def cdf(m: DiscreteMeasure1D, x):
    """F_m(x) = m((-inf, x]); right-continuous."""
    idx = np.searchsorted(m.atoms, x, side="right") - 1
    out = np.where(idx >= 0, m.cumulative[np.clip(idx, 0, None)], 0.0)
    return float(out) if np.ndim(out) == 0 else out


def quantile(m: DiscreteMeasure1D, u):
    """Left-continuous generalised inverse inf{x : F_m(x) >= u} for u in (0, 1)."""
    uu = np.asarray(u, dtype=float)
    if np.any(~((uu > 0) & (uu < 1))):
        raise DomainError("quantile level must lie in the open interval (0, 1)")
    idx = np.searchsorted(m.cumulative, uu, side="left")
    out = m.atoms[np.clip(idx, 0, m.size - 1)]
    return float(out) if np.ndim(out) == 0 else out


def mean(m: Measure):
    return m.mean()


def merged_partition(mu: DiscreteMeasure1D, nu: DiscreteMeasure1D, extra=()):
    """Common refinement of the quantile step structures of ``mu`` and ``nu``.

    Returns ``(u, x, y)`` where ``u`` holds the cell boundaries
    0 = u_0 < ... < u_K = 1 and on the cell (u_{k-1}, u_k] the quantile
    functions are the constants ``x[k-1]`` and ``y[k-1]``. Extra levels in
    ``extra`` are added to the grid.
    """
    levels = np.concatenate([[0.0], mu.cumulative[:-1], nu.cumulative[:-1], np.asarray(extra, float), [1.0]])
    levels = np.unique(np.clip(levels, 0.0, 1.0))
    keep = np.concatenate([[True], np.diff(levels) > 1e-15])
    levels = levels[keep]
    levels[-1] = 1.0
    if levels.shape[0] < 2:
        levels = np.array([0.0, 1.0])
    mid = 0.5 * (levels[:-1] + levels[1:])
    x = mu.atoms[np.clip(np.searchsorted(mu.cumulative, mid, side="left"), 0, mu.size - 1)]
    y = nu.atoms[np.clip(np.searchsorted(nu.cumulative, mid, side="left"), 0, nu.size - 1)]
    return levels, x, y


def moment_about(m: Measure, c, rho: float, norm: NormSpec = EUCLIDEAN) -> float:
    """sum_i w_i |a_i - c|^rho (no root)."""
    m = as_nd(m)
    dist = norm(m.points - np.asarray(c, dtype=float).reshape(1, -1))
    return float(m.weights @ dist**rho)


def _sigma_1d(m: DiscreteMeasure1D, rho: float):
    a, w = m.atoms, m.weights
    if m.size == 1:
        return 0.0, float(a[0])
    if rho == 1.0:
        # smallest minimiser: the lower weighted median
        k = int(np.searchsorted(m.cumulative, 0.5 - 1e-12, side="left"))
        c = float(a[min(k, m.size - 1)])
    elif rho == 2.0:
        c = m.mean()
    else:
        # the derivative of the convex objective is increasing in c; bisect on its sign
        def slope(c):
            d = c - a
            return float(w @ (np.sign(d) * np.abs(d) ** (rho - 1.0)))

        lo, hi = float(a[0]), float(a[-1])
        while True:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            if slope(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        c = lo if float(w @ np.abs(a - lo) ** rho) <= float(w @ np.abs(a - hi) ** rho) else hi
    val = float(w @ np.abs(a - c) ** rho)
    return val ** (1.0 / rho), c


def _weighted_median_coords(m: DiscreteMeasureND):
    out = np.empty(m.dim)
    for j in range(m.dim):
        out[j] = _sigma_1d(DiscreteMeasure1D(m.points[:, j], m.weights), 1.0)[1]
    return out


def _sigma_nd(m: DiscreteMeasureND, rho: float, norm: NormSpec):
    pts, w = m.points, m.weights

    def obj(c):
        return float(w @ norm(pts - c) ** rho)

    mean_pt = m.mean()
    if rho == 2.0 and norm.r == 2.0:
        return obj(mean_pt) ** 0.5, mean_pt
    med = _weighted_median_coords(m)
    if rho == 1.0 and norm.r == 1.0:
        # separable objective: coordinatewise medians are exact
        return obj(med), med

    scale = float(np.max(np.abs(pts - mean_pt))) or 1.0
    best_c, best_v = mean_pt, obj(mean_pt)
    for c in pts:
        v = obj(c)
        if v < best_v:
            best_c, best_v = c.copy(), v
    # the objective is convex, so a few local searches suffice
    for s in (best_c.copy(), mean_pt, med):
        res = minimize(
            obj,
            s,
            method="Nelder-Mead",
            options={
                "xatol": 1e-11 * scale,
                "fatol": 1e-15 * max(best_v, 1e-300),
                "maxiter": 4000,
                "initial_simplex": s + np.vstack([np.zeros(m.dim), 0.1 * scale * np.eye(m.dim)]),
            },
        )
        if res.fun < best_v:
            best_c, best_v = np.asarray(res.x), float(res.fun)
    return best_v ** (1.0 / rho), best_c


def centred_moment(m: Measure, rho: float, norm: NormSpec = EUCLIDEAN):
    """Centred moment sigma_rho(m) = min_c (int |y - c|^rho m(dy))^(1/rho).

    Returns ``(sigma, c_star)``; ``c_star`` is a float for 1-D measures and a
    d-vector otherwise. For rho = 1 in dimension one the left end of the
    median interval is returned.
    """
    if rho < 1:
        raise DomainError(f"rho must be >= 1, got {rho}")
    if isinstance(m, DiscreteMeasure1D):
        return _sigma_1d(m, float(rho))
    if m.dim == 1:
        s, c = _sigma_1d(m.as_1d(), float(rho))
        return s, np.array([c])
    if m.size == 1:
        return 0.0, m.points[0].copy()
    return _sigma_nd(m, float(rho), NormSpec.parse(norm))
