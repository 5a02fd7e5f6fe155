"""Couplings and Wasserstein distances.

In dimension one W_rho is evaluated exactly from quantile functions; in R^d
it is the value of the transportation LP solved by :func:`martwass.lp.lp_solve`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, MarginalMismatch
from .lp import lp_solve
from .measures import (
    EUCLIDEAN,
    DiscreteMeasure1D,
    DiscreteMeasureND,
    Measure,
    NormSpec,
    as_1d,
    as_nd,
    merged_partition,
)

MARGINAL_TOL = 1e-10
CLAMP_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class Coupling:
    """Joint weights ``matrix[i, j]`` on ``row_support[i] x col_support[j]``.

    Entries above ``-CLAMP_TOL`` are clamped to zero; more negative entries
    or marginal sums off by more than ``MARGINAL_TOL`` raise
    :class:`MarginalMismatch` unless ``validate=False``.
    """

    row_marginal: DiscreteMeasureND
    col_marginal: DiscreteMeasureND
    matrix: np.ndarray

    def __init__(self, row_marginal: Measure, col_marginal: Measure, matrix, validate: bool = True):
        rm, cm = as_nd(row_marginal), as_nd(col_marginal)
        M = np.array(matrix, dtype=float)
        if M.shape != (rm.size, cm.size):
            raise MarginalMismatch(f"matrix shape {M.shape} does not match supports {(rm.size, cm.size)}")
        if rm.dim != cm.dim:
            raise DimensionMismatch("row and column supports live in different dimensions")
        if validate and np.any(M < -CLAMP_TOL):
            raise MarginalMismatch(f"negative coupling weight {M.min()!r}")
        M[M < 0] = 0.0
        M.flags.writeable = False
        object.__setattr__(self, "row_marginal", rm)
        object.__setattr__(self, "col_marginal", cm)
        object.__setattr__(self, "matrix", M)
        if validate:
            r, c = self.marginal_residuals()
            if max(r, c) > MARGINAL_TOL:
                raise MarginalMismatch(f"marginal residuals {r:.3e}, {c:.3e} exceed {MARGINAL_TOL}")

    @classmethod
    def identity(cls, m: Measure) -> "Coupling":
        m = as_nd(m)
        return cls(m, m, np.diag(m.weights))

    @classmethod
    def product(cls, mu: Measure, nu: Measure) -> "Coupling":
        mu, nu = as_nd(mu), as_nd(nu)
        return cls(mu, nu, np.outer(mu.weights, nu.weights))

    @classmethod
    def from_triplets(cls, xs, ys, ws, row_marginal: Measure = None, col_marginal: Measure = None,
                      validate: bool = True) -> "Coupling":
        """Aggregate weighted pairs (x, y, w) onto atom supports.

        With marginals given, every x (resp. y) must coincide with one of
        their atoms; otherwise marginals are read off the triplets.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        ws = np.asarray(ws, dtype=float).ravel()
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        if ys.ndim == 1:
            ys = ys.reshape(-1, 1)
        if row_marginal is None:
            row_marginal = _marginal_from(xs, ws)
        if col_marginal is None:
            col_marginal = _marginal_from(ys, ws)
        rm, cm = as_nd(row_marginal), as_nd(col_marginal)
        ri = _locate(rm.points, xs)
        ci = _locate(cm.points, ys)
        M = np.zeros((rm.size, cm.size))
        np.add.at(M, (ri, ci), ws)
        return cls(rm, cm, M, validate=validate)

    @property
    def row_support(self) -> np.ndarray:
        return self.row_marginal.points

    @property
    def col_support(self) -> np.ndarray:
        return self.col_marginal.points

    @property
    def dim(self) -> int:
        return self.row_marginal.dim

    def marginal_residuals(self):
        r = float(np.max(np.abs(self.matrix.sum(axis=1) - self.row_marginal.weights)))
        c = float(np.max(np.abs(self.matrix.sum(axis=0) - self.col_marginal.weights)))
        return r, c

    def martingale_residual(self) -> float:
        """max_i |sum_j m_ij (y_j - x_i)|, in the sup norm over coordinates."""
        drift = self.matrix @ self.col_support - self.matrix.sum(axis=1)[:, None] * self.row_support
        return float(np.max(np.abs(drift)))

    def is_martingale(self, tol: float = 1e-10) -> bool:
        return self.martingale_residual() <= tol

    def cost(self, rho: float, norm: NormSpec = EUCLIDEAN) -> float:
        """sum_ij m_ij |x_i - y_j|^rho."""
        return float(np.sum(self.matrix * cost_matrix(self.row_support, self.col_support, rho, norm)))

    def kernel(self) -> np.ndarray:
        """Row-normalised matrix: the conditional law of y given x_i."""
        return self.matrix / self.matrix.sum(axis=1, keepdims=True)

    def transpose(self) -> "Coupling":
        return Coupling(self.col_marginal, self.row_marginal, self.matrix.T)

    def triplets(self, tol: float = 0.0):
        """Nonzero entries as (i, j, weight), row-major."""
        ii, jj = np.nonzero(self.matrix > tol)
        return [(int(i), int(j), float(self.matrix[i, j])) for i, j in zip(ii, jj)]

    def __repr__(self):
        return f"Coupling({self.row_marginal.size}x{self.col_marginal.size}, nnz={len(self.triplets())})"


def _marginal_from(pts, ws):
    keep = ws > 0
    return DiscreteMeasureND(pts[keep], ws[keep] / ws[keep].sum())


def _locate(support, pts, tol=1e-9):
    idx = np.empty(pts.shape[0], dtype=int)
    for k, p in enumerate(pts):
        d = np.max(np.abs(support - p), axis=1)
        j = int(np.argmin(d))
        if d[j] > tol * (1.0 + np.max(np.abs(p))):
            raise MarginalMismatch(f"point {p.tolist()} is not an atom of the target marginal")
        idx[k] = j
    return idx


def coupling_cost(M: Coupling, rho: float, norm: NormSpec = EUCLIDEAN) -> float:
    return M.cost(rho, norm)


def cost_matrix(xs, ys, rho: float, norm: NormSpec = EUCLIDEAN) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    diff = xs[:, None, :] - ys[None, :, :]
    return norm(diff) ** rho


def transport_constraints(n: int, m: int, drop_last: bool = True):
    """Row-sum and column-sum equality rows for an n x m plan, row-major."""
    rows = np.kron(np.eye(n), np.ones((1, m)))
    cols = np.kron(np.ones((1, n)), np.eye(m))
    if drop_last:
        cols = cols[:-1]
    return np.vstack([rows, cols])


def _check_rho(rho):
    if not rho >= 1:
        raise DomainError(f"rho must be >= 1, got {rho}")


def w_rho_1d(mu: DiscreteMeasure1D, nu: DiscreteMeasure1D, rho: float) -> float:
    """W_rho from the quantile formula, summed exactly over the merged partition."""
    _check_rho(rho)
    u, x, y = merged_partition(as_1d(mu), as_1d(nu))
    return float(np.diff(u) @ np.abs(x - y) ** rho) ** (1.0 / rho)


def comonotone_coupling(mu: DiscreteMeasure1D, nu: DiscreteMeasure1D) -> Coupling:
    """Quantile coupling of two 1-D measures (optimal for every rho >= 1)."""
    mu, nu = as_1d(mu), as_1d(nu)
    u, x, y = merged_partition(mu, nu)
    return Coupling.from_triplets(x, y, np.diff(u), mu, nu)


def w_rho_nd(mu: Measure, nu: Measure, rho: float, norm: NormSpec = EUCLIDEAN):
    """Return ``(W_rho, optimal coupling)`` from the transportation LP."""
    _check_rho(rho)
    mu, nu = as_nd(mu), as_nd(nu)
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"dimensions differ: {mu.dim} vs {nu.dim}")
    norm = NormSpec.parse(norm)
    n, m = mu.size, nu.size
    C = cost_matrix(mu.points, nu.points, rho, norm)
    A = transport_constraints(n, m)
    b = np.concatenate([mu.weights, nu.weights[:-1]])
    sol = lp_solve(C.ravel(), A, b)
    if not sol.ok:
        raise RuntimeError(f"transport LP failed with status {sol.status}")
    P = sol.primal.reshape(n, m)
    # the dropped column row is implied; absorb rounding into the plan's residual
    coupling = Coupling(mu, nu, P)
    return max(coupling.cost(rho, norm), 0.0) ** (1.0 / rho), coupling


def wasserstein(mu: Measure, nu: Measure, rho: float, norm: NormSpec = EUCLIDEAN) -> float:
    """W_rho, exact in dimension one and by LP otherwise."""
    if as_nd(mu).dim == 1 and as_nd(nu).dim == 1:
        return w_rho_1d(as_1d(mu), as_1d(nu), rho)
    return w_rho_nd(mu, nu, rho, norm)[0]
