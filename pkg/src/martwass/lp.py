"""Two-phase revised simplex for ``min c.x  s.t.  A x = b, x >= 0``.

The basis inverse is kept explicitly, updated by one elimination step per
pivot and recomputed from scratch every ``REFACTOR_EVERY`` pivots. The
constraint matrix is stored sparse; the LPs built by this package have at
most 2 + d nonzeros per column, so pricing is cheap.

Pricing is Dantzig's most-negative reduced cost; after a run of degenerate
pivots the solver switches to Bland's smallest-index rule, which cannot
cycle, and switches back after the next improving pivot. Ties in the ratio
test go to the largest pivot element, or to the smallest basic variable
index while Bland's rule is active. The result is deterministic
for a given input.

Redundant equality rows (marginal constraints are rank deficient by one,
martingale constraints by up to d more) keep a zero-valued artificial
variable in the basis after phase one; it can never leave, because its row
of B^-1 A vanishes on the structural columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.linalg import blas

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9
DEGENERATE_RUN = 30
REFACTOR_EVERY = 64
RELATIVE_PIVOT = 1e-9
HARRIS_TOL = 1e-12


@dataclass
class LpSolution:
    objective: float
    primal: np.ndarray
    status: str
    certificate: Optional[np.ndarray] = None
    infeasibility: float = 0.0
    iterations: int = 0
    basis: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class _Simplex:
    def __init__(self, A: sparse.csc_matrix, b: np.ndarray):
        self.A = A
        self.AT = A.T.tocsr()
        self.b = b
        self.m, self.N = A.shape
        self.basis = None
        self.Binv = None
        self.xB = None
        self.since_refactor = 0

    def column(self, j):
        s, e = self.A.indptr[j], self.A.indptr[j + 1]
        return self.A.indices[s:e], self.A.data[s:e]

    def refactor(self):
        B = self.A[:, self.basis].toarray()
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            # keep the product-form inverse; it is still usable
            self.since_refactor = 0
            return
        self.Binv = np.asfortranarray(Binv)
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < 1e-15] = 0.0
        self.since_refactor = 0

    def run(self, c, allowed, max_iter, floor=None):
        """Pivot until optimal, or until the objective reaches ``floor`` when given."""
        it = 0
        degenerate = 0
        while it < max_iter:
            if floor is not None and c[self.basis] @ self.xB <= floor:
                return "optimal", it
            y = c[self.basis] @ self.Binv
            red = c - self.AT @ y
            scale = 1.0 + (np.max(np.abs(red[allowed])) if np.any(allowed) else 0.0)
            cand = np.flatnonzero(allowed & (red < -PIVOT_TOL * scale))
            if cand.size == 0:
                return "optimal", it
            if degenerate >= DEGENERATE_RUN:
                col = int(cand[0])
            else:
                col = int(cand[np.argmin(red[cand])])
            rows, vals = self.column(col)
            u = self.Binv[:, rows] @ vals
            pos = np.flatnonzero(u > max(PIVOT_TOL, RELATIVE_PIVOT * np.max(np.abs(u))))
            if pos.size == 0:
                return "unbounded", it
            xb = np.maximum(self.xB[pos], 0.0)
            if degenerate >= DEGENERATE_RUN:
                ratios = xb / u[pos]
                best = ratios.min()
                ties = pos[ratios <= best + 1e-14 * (1.0 + abs(best))]
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                # Harris: largest pivot among rows whose ratio is within tolerance of the minimum
                bound = np.min((xb + HARRIS_TOL) / u[pos])
                ok = pos[xb / u[pos] <= bound]
                r = int(ok[np.argmax(u[ok])])
            degenerate = degenerate + 1 if self.xB[r] <= 1e-14 else 0
            self.pivot(r, col, u)
            it += 1
        return "limit", it

    def pivot(self, r, col, u):
        ur = u[r]
        self.Binv[r] /= ur
        self.xB[r] /= ur
        f = u.copy()
        f[r] = 0.0
        # in-place rank-one update Binv -= f (row r)^T
        self.Binv = blas.dger(-1.0, f, self.Binv[r].copy(), a=self.Binv, overwrite_a=True)
        self.xB -= f * self.xB[r]
        self.basis[r] = col
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()


def lp_solve(costs, constraint_matrix, rhs, max_iter: Optional[int] = None) -> LpSolution:
    """Solve ``min costs.x`` over ``{x >= 0 : constraint_matrix x = rhs}``.

    Infeasibility and unboundedness are reported through ``status``; the
    function does not raise for them. On success ``certificate`` holds the
    dual values y (one per input row, zero for rows found redundant), so
    that ``costs - A.T y >= 0`` and ``rhs.y`` equals the objective.
    """
    c = np.asarray(costs, dtype=float).ravel()
    if sparse.issparse(constraint_matrix):
        A = sparse.csc_matrix(constraint_matrix, dtype=float)
    else:
        A = sparse.csc_matrix(np.atleast_2d(np.asarray(constraint_matrix, dtype=float)))
    b = np.asarray(rhs, dtype=float).ravel()
    m, n = A.shape
    if c.shape[0] != n or b.shape[0] != m:
        raise ValueError("inconsistent LP dimensions")
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A.data)) and np.all(np.isfinite(b))):
        raise ValueError("LP data must be finite")
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000

    # equilibrate rows so that every row has largest entry 1; sign makes b >= 0
    rmax = np.asarray(abs(A).max(axis=1).todense()).ravel()
    rscale = np.where(rmax > 0, 1.0 / np.where(rmax > 0, rmax, 1.0), 1.0)
    sign = np.where(b < 0, -1.0, 1.0) * rscale
    A1 = sparse.csc_matrix(sparse.diags(sign) @ A)
    b1 = b * sign
    Aext = sparse.hstack([A1, sparse.identity(m, format="csc")], format="csc")
    Aext.sort_indices()

    S = _Simplex(Aext, b1)
    S.basis = np.arange(n, n + m)
    S.Binv = np.asfortranarray(np.eye(m))
    S.xB = b1.copy()

    # phase one: minimise the sum of artificials
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    bscale = 1.0 + np.max(np.abs(b1)) if m else 1.0
    # the phase-one objective is bounded below by 0; stop once it is reached
    _, it1 = S.run(c1, np.ones(n + m, dtype=bool), max_iter, floor=0.1 * FEAS_TOL * bscale)
    S.refactor()
    infeas = float(np.sum(S.xB[S.basis >= n]))
    if infeas > FEAS_TOL * bscale:
        return LpSolution(np.nan, np.full(n, np.nan), INFEASIBLE, None, infeas, it1)

    # pivot zero-valued artificials out where a structural column can replace them
    for r in range(m):
        if S.basis[r] < n:
            continue
        row = S.Binv[r] @ A1  # 1 x n
        row = np.asarray(row).ravel()
        nz = np.flatnonzero(np.abs(row) > 1e-9)
        nz = nz[~np.isin(nz, S.basis)]
        if nz.size:
            col = int(nz[np.argmax(np.abs(row[nz]))])
            rows, vals = S.column(col)
            u = S.Binv[:, rows] @ vals
            S.pivot(r, col, u)
    S.refactor()

    c2 = np.concatenate([c, np.zeros(m)])
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    status, it2 = S.run(c2, allowed, max_iter)
    iters = it1 + it2
    if status == "unbounded":
        return LpSolution(-np.inf, np.full(n, np.nan), UNBOUNDED, None, 0.0, iters, S.basis.copy())
    if status == "limit":
        return LpSolution(np.nan, np.full(n, np.nan), ITERATION_LIMIT, None, 0.0, iters, S.basis.copy())

    S.refactor()
    x = np.zeros(n + m)
    x[S.basis] = np.clip(S.xB, 0.0, None)
    y = c2[S.basis] @ S.Binv
    structural = S.basis[S.basis < n]
    redundant = np.zeros(m, dtype=bool)
    for r in np.flatnonzero(S.basis >= n):
        redundant[S.basis[r] - n] = True
    y[redundant] = 0.0
    x = x[:n]
    return LpSolution(float(c @ x), x, OPTIMAL, y * sign, 0.0, iters, structural)
