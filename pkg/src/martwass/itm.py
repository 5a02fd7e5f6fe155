"""Inverse-transform martingale couplings M^Q for ordered pairs on the line.

Notation follows the construction: on the merged quantile grid, cell k is
(u_{k-1}, u_k] where F_mu^{-1} = x_k and F_nu^{-1} = y_k. Psi_+ grows with
slope (x_k - y_k)^+ and Psi_- with slope (x_k - y_k)^-. A coupling Q of
dPsi_+ and dPsi_- living on {u < v} sends mass from "positive" cells to
later "negative" cells. Inside a positive cell, the kernel splits the mass
at x_k between y_k and the partner's y_{k'} so that the mean is x_k; the
negative cells are treated symmetrically through the reversed kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex_order import check_cx_1d
from .errors import DegenerateSupport, EqualMeasures, NotInConvexOrder
from .measures import DiscreteMeasure1D, as_1d, merged_partition
from .transport import Coupling, coupling_cost  # noqa: F401  (re-exported)

LEVEL_TOL = 1e-14
EQUAL_TOL = 1e-13
# blocks pairing a cell with an earlier one can only come from rounding
ROUNDING_MASS = 1e-12


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFn:
    """Continuous nondecreasing piecewise-linear map on [0, 1] with f(0) = 0."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.shape != v.shape or b.ndim != 1 or b.shape[0] < 2:
            raise ValueError("breakpoints and values must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(v) < 0):
            raise ValueError("values must be nondecreasing")
        if v[0] != 0.0:
            raise ValueError("f(0) must be 0")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def total(self) -> float:
        return float(self.values[-1])

    def __call__(self, u):
        return np.interp(u, self.breakpoints, self.values)

    def inverse(self, level):
        """Left-continuous generalised inverse inf{u : f(u) >= level}."""
        lv = np.atleast_1d(np.asarray(level, dtype=float))
        k = np.searchsorted(self.values, lv, side="left")
        out = np.empty_like(lv)
        at_start = k == 0
        out[at_start] = self.breakpoints[0]
        kk = np.clip(k[~at_start], 1, self.values.shape[0] - 1)
        v0, v1 = self.values[kk - 1], self.values[kk]
        b0, b1 = self.breakpoints[kk - 1], self.breakpoints[kk]
        out[~at_start] = b0 + (lv[~at_start] - v0) / (v1 - v0) * (b1 - b0)
        return out if np.ndim(level) else float(out[0])

    def inverse_right(self, level):
        """Right-continuous generalised inverse sup{u : f(u) <= level}."""
        lv = np.atleast_1d(np.asarray(level, dtype=float))
        k = np.searchsorted(self.values, lv, side="right")
        out = np.empty_like(lv)
        at_end = k >= self.values.shape[0]
        out[at_end] = self.breakpoints[-1]
        kk = k[~at_end]
        v0, v1 = self.values[kk - 1], self.values[kk]
        b0, b1 = self.breakpoints[kk - 1], self.breakpoints[kk]
        out[~at_end] = b0 + (lv[~at_end] - v0) / (v1 - v0) * (b1 - b0)
        return out if np.ndim(level) else float(out[0])


@dataclass(frozen=True, eq=False)
class QMeasure:
    """Coupling of dPsi_+/Psi_+(1) and dPsi_-/Psi_+(1) on {u < v}.

    Stored as blocks: block b carries normalised mass ``mass[b]`` from the
    u-interval [u_lo, u_hi] inside grid cell ``pos_cell`` to the v-interval
    [v_lo, v_hi] inside cell ``neg_cell``. ``kind`` says how mass is spread
    inside a block: "comonotone" (increasing map) or "product".
    """

    grid: np.ndarray
    pos_cell: np.ndarray
    neg_cell: np.ndarray
    mass: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray
    v_lo: np.ndarray
    v_hi: np.ndarray
    kind: str

    def first_marginal(self) -> np.ndarray:
        """Mass per grid cell of the first projection."""
        out = np.zeros(self.grid.shape[0] - 1)
        np.add.at(out, self.pos_cell, self.mass)
        return out

    def second_marginal(self) -> np.ndarray:
        out = np.zeros(self.grid.shape[0] - 1)
        np.add.at(out, self.neg_cell, self.mass)
        return out

    def weight_below_diagonal(self) -> float:
        """Q({u >= v}); zero for every valid element of the family."""
        return float(self.mass[self.u_hi > self.v_lo].sum())


def _cells(mu, nu):
    u, x, y = merged_partition(mu, nu)
    return u, x, y, x - y


def psi_pair(mu: DiscreteMeasure1D, nu: DiscreteMeasure1D):
    """Psi_+ and Psi_- as exact piecewise-linear functions on the merged grid."""
    mu, nu = as_1d(mu), as_1d(nu)
    rep = check_cx_1d(mu, nu)
    if not rep.ordered:
        raise NotInConvexOrder(f"mu is not below nu in convex order ({rep})")
    u, x, y, d = _cells(mu, nu)
    du = np.diff(u)
    plus = np.concatenate([[0.0], np.cumsum(du * np.clip(d, 0, None))])
    minus = np.concatenate([[0.0], np.cumsum(du * np.clip(-d, 0, None))])
    scale = max(1.0, float(np.max(np.abs(x))), float(np.max(np.abs(y))))
    if max(plus[-1], minus[-1]) <= EQUAL_TOL * scale:
        raise EqualMeasures("mu == nu; the coupling is the identity")
    return PiecewiseLinearFn(u, plus), PiecewiseLinearFn(u, minus)


def q_comonotone(psi_plus: PiecewiseLinearFn, psi_minus: PiecewiseLinearFn) -> QMeasure:
    """Pair equal normalised levels of Psi_+ and Psi_-."""
    if psi_plus.total <= 0 or psi_minus.total <= 0:
        raise DegenerateSupport("Psi_+(1) must be positive")
    grid = psi_plus.breakpoints
    p = psi_plus.values / psi_plus.total
    q = psi_minus.values / psi_minus.total
    levels = np.unique(np.concatenate([p, q]))
    levels = levels[np.concatenate([[True], np.diff(levels) > LEVEL_TOL])]
    levels[-1] = 1.0
    lo, hi = levels[:-1], levels[1:]
    mid = 0.5 * (lo + hi)
    # the cell where the level is reached is the one where f increases through it
    kp = np.searchsorted(p, mid, side="left") - 1
    kn = np.searchsorted(q, mid, side="left") - 1
    f_p = PiecewiseLinearFn(grid, p)
    f_q = PiecewiseLinearFn(grid, q)
    # rounding-level slopes elsewhere must not stretch a block outside its cell
    u_lo = np.clip(f_p.inverse_right(lo), grid[kp], grid[kp + 1])
    u_hi = np.clip(f_p.inverse(hi), grid[kp], grid[kp + 1])
    v_lo = np.clip(f_q.inverse_right(lo), grid[kn], grid[kn + 1])
    v_hi = np.clip(f_q.inverse(hi), grid[kn], grid[kn + 1])
    return QMeasure(grid, kp, kn, hi - lo, u_lo, u_hi, v_lo, v_hi, "comonotone")


def q_conditioned_product(psi_plus: PiecewiseLinearFn, psi_minus: PiecewiseLinearFn,
                          tol: float = 1e-15, max_iter: int = 200_000) -> QMeasure:
    """Product of the two normalised measures, reweighted onto {u < v}.

    Start from the product of the cell masses restricted to pairs of a
    positive cell followed by a later negative cell, then rescale rows and
    columns alternately (iterative proportional fitting) until both
    marginals are matched. The problem is first split at the interior
    points where Psi_+ = Psi_-, which decouple the cells on either side.
    """
    if psi_plus.total <= 0 or psi_minus.total <= 0:
        raise DegenerateSupport("Psi_+(1) must be positive")
    grid = psi_plus.breakpoints
    a = np.diff(psi_plus.values) / psi_plus.total
    b = np.diff(psi_minus.values) / psi_minus.total
    K = a.shape[0]
    gap = psi_plus.values / psi_plus.total - psi_minus.values / psi_minus.total
    cuts = [0] + [k for k in range(1, K) if gap[k] <= 1e-13] + [K]
    blocks = []
    for s, e in zip(cuts[:-1], cuts[1:]):
        P_idx = [k for k in range(s, e) if a[k] > 0]
        N_idx = [k for k in range(s, e) if b[k] > 0]
        if not P_idx or not N_idx:
            continue  # only rounding-level mass on one side
        allowed = np.array([[kp < kn for kn in N_idx] for kp in P_idx], dtype=float)
        rows, cols = allowed.any(axis=1), allowed.any(axis=0)
        P_idx = [k for k, r in zip(P_idx, rows) if r]
        N_idx = [k for k, c in zip(N_idx, cols) if c]
        allowed = allowed[np.ix_(rows, cols)]
        if not P_idx or not N_idx:
            continue
        ra, cb = a[P_idx], b[N_idx]
        cb = cb * (ra.sum() / cb.sum())
        Q = np.outer(ra, cb) * allowed
        for _ in range(max_iter):
            Q *= (ra / Q.sum(axis=1))[:, None]
            Q *= (cb / Q.sum(axis=0))[None, :]
            if np.max(np.abs(Q.sum(axis=1) - ra)) <= tol:
                break
        for i, kp in enumerate(P_idx):
            for j, kn in enumerate(N_idx):
                if Q[i, j] > 0:
                    blocks.append((kp, kn, Q[i, j]))
    kp = np.array([t[0] for t in blocks], dtype=int)
    kn = np.array([t[1] for t in blocks], dtype=int)
    mass = np.array([t[2] for t in blocks])
    return QMeasure(grid, kp, kn, mass, grid[kp], grid[kp + 1], grid[kn], grid[kn + 1], "product")


def build_itm(mu: DiscreteMeasure1D, nu: DiscreteMeasure1D, Q: QMeasure = None) -> Coupling:
    """The martingale coupling M^Q, aggregated onto the atoms of mu and nu.

    Without ``Q`` the comonotone element is used. If mu == nu the identity
    coupling is returned.
    """
    mu, nu = as_1d(mu), as_1d(nu)
    try:
        psi_p, psi_m = psi_pair(mu, nu)
    except EqualMeasures:
        return Coupling.identity(mu)
    if Q is None:
        Q = q_comonotone(psi_p, psi_m)
    u, x, y, d = _cells(mu, nu)
    if u.shape != Q.grid.shape or np.any(u != Q.grid):
        raise ValueError("Q was built on a different grid than (mu, nu)")
    du = np.diff(u)
    tot_p, tot_m = psi_p.total, psi_m.total

    xs, ys, ws = [], [], []
    remaining = du.copy()  # Lebesgue mass of each cell not yet sent off the diagonal
    for kp, kn, q in zip(Q.pos_cell, Q.neg_cell, Q.mass):
        if q <= 0:
            continue
        gap = y[kn] - y[kp]
        if kp >= kn or gap <= 0:
            if q <= ROUNDING_MASS:
                continue
            raise NotInConvexOrder(f"Q block pairs cell {kp} with cell {kn}; expected an earlier positive cell")
        # positive cell: u-length lp = q tot_p / d_kp, fraction d_kp / gap goes up to y_kn
        up = q * tot_p / gap
        xs.append(x[kp]); ys.append(y[kn]); ws.append(up)
        remaining[kp] -= up
        # negative cell: u-length q tot_m / |d_kn|, fraction |d_kn| / gap goes down to y_kp
        down = q * tot_m / gap
        xs.append(x[kn]); ys.append(y[kp]); ws.append(down)
        remaining[kn] -= down
    for k in range(du.shape[0]):
        if remaining[k] > 0:
            xs.append(x[k]); ys.append(y[k]); ws.append(remaining[k])
    return Coupling.from_triplets(np.array(xs), np.array(ys), np.array(ws), mu, nu)


def itm_coupling(mu, nu, q: str = "comonotone") -> Coupling:
    """Convenience wrapper selecting Q by name: "comonotone" or "conditioned-product"."""
    mu, nu = as_1d(mu), as_1d(nu)
    try:
        psi_p, psi_m = psi_pair(mu, nu)
    except EqualMeasures:
        return Coupling.identity(mu)
    if q == "comonotone":
        Q = q_comonotone(psi_p, psi_m)
    elif q in ("conditioned-product", "product"):
        Q = q_conditioned_product(psi_p, psi_m)
    else:
        raise ValueError(f"unknown Q family member {q!r}")
    return build_itm(mu, nu, Q)


def per_cell_conservation(mu, nu, Q: QMeasure = None) -> float:
    """max over cells of | int_cell int |y - y_k| m~(u, dy) du - |x_k - y_k| |cell| |.

    The kernel of each cell is reassembled from the Q blocks; zero in
    exact arithmetic. The discrepancy is integrated over the cell because
    cell widths are differences of cumulative weights and carry absolute,
    not relative, rounding error.
    """
    mu, nu = as_1d(mu), as_1d(nu)
    try:
        psi_p, psi_m = psi_pair(mu, nu)
    except EqualMeasures:
        return 0.0
    if Q is None:
        Q = q_comonotone(psi_p, psi_m)
    u, x, y, d = _cells(mu, nu)
    du = np.diff(u)
    spread = np.zeros(du.shape[0])  # int |y - y_k| m~ du over the cell
    for kp, kn, q in zip(Q.pos_cell, Q.neg_cell, Q.mass):
        gap = y[kn] - y[kp]
        if kp >= kn and q <= ROUNDING_MASS:
            continue
        spread[kp] += q * psi_p.total / gap * gap
        spread[kn] += q * psi_m.total / gap * gap
    return float(np.max(np.abs(spread - du * np.abs(d))))
