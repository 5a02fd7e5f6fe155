"""Martingale optimal transport between finitely supported measures.

The martingale LP has one variable per pair (x_i, y_j), the usual marginal
rows (the last column row dropped as redundant) and d martingale rows per
x_i, each divided by 1 + |x_i| for conditioning.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, DomainError, MarginalMismatch, NotInConvexOrder
from .lp import lp_solve
from .measures import EUCLIDEAN, Measure, NormSpec, as_nd, moment_about
from .transport import Coupling, cost_matrix, transport_constraints


def martingale_constraints(mu, nu):
    """Constraint matrix and right-hand side of the martingale polytope."""
    mu, nu = as_nd(mu), as_nd(nu)
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"dimensions differ: {mu.dim} vs {nu.dim}")
    n, m, d = mu.size, nu.size, mu.dim
    A_marg = transport_constraints(n, m)
    A_mart = np.zeros((n * d, n * m))
    for i in range(n):
        scale = 1.0 / (1.0 + np.max(np.abs(mu.points[i])))
        for k in range(d):
            A_mart[i * d + k, i * m : (i + 1) * m] = (nu.points[:, k] - mu.points[i, k]) * scale
    A = np.vstack([A_marg, A_mart])
    b = np.concatenate([mu.weights, nu.weights[:-1], np.zeros(n * d)])
    return A, b


def mot_lp(mu: Measure, nu: Measure, costs) -> tuple:
    """Minimise sum_ij c_ij m_ij over martingale couplings of (mu, nu).

    ``costs`` is an (n, m) matrix indexed like ``mu.points`` x ``nu.points``.
    Returns ``(optimal value, Coupling)``.
    """
    mu, nu = as_nd(mu), as_nd(nu)
    A, b = martingale_constraints(mu, nu)
    C = np.asarray(costs, dtype=float)
    if C.shape != (mu.size, nu.size):
        raise ValueError(f"cost matrix shape {C.shape} does not match {(mu.size, nu.size)}")
    sol = lp_solve(C.ravel(), A, b)
    if sol.status == "infeasible":
        raise NotInConvexOrder(
            f"no martingale coupling exists (phase-one residual {sol.infeasibility:.3e})"
        )
    if not sol.ok:
        raise RuntimeError(f"martingale LP failed with status {sol.status}")
    M = Coupling(mu, nu, sol.primal.reshape(mu.size, nu.size))
    return float(np.sum(M.matrix * C)), M


def m_rho_lp(mu: Measure, nu: Measure, rho: float, norm: NormSpec = EUCLIDEAN):
    """M_rho(mu, nu) and an optimal martingale coupling.

    Raises :class:`NotInConvexOrder` when the martingale polytope is empty.
    """
    if not rho >= 1:
        raise DomainError(f"rho must be >= 1, got {rho}")
    mu, nu = as_nd(mu), as_nd(nu)
    norm = NormSpec.parse(norm)
    value, M = mot_lp(mu, nu, cost_matrix(mu.points, nu.points, rho, norm))
    return max(value, 0.0) ** (1.0 / rho), M


def m2_closed_form(mu: Measure, nu: Measure) -> float:
    """int |y - c|^2 dnu - int |x - c|^2 dmu with c the mean of nu (Euclidean).

    Equals M_2^2 for ordered pairs; returned as is (possibly negative) otherwise.
    """
    mu, nu = as_nd(mu), as_nd(nu)
    c = nu.mean()
    return moment_about(nu, c, 2.0) - moment_about(mu, c, 2.0)


def compose_coupling(pi: Coupling, M: Coupling, tol: float = 1e-10) -> Coupling:
    """Glue pi (mu -> nu) and M (nu -> nu') through their shared marginal nu.

    The result is pi_n(dx, dy') = int m(y, dy') pi(dx, dy), where m is the
    disintegration of M with respect to nu.
    """
    a, b = pi.col_marginal, M.row_marginal
    if a.dim != b.dim or a.size != b.size or np.max(np.abs(a.points - b.points)) > tol \
            or np.max(np.abs(a.weights - b.weights)) > tol:
        raise MarginalMismatch("pi's second marginal differs from M's first marginal")
    return Coupling(pi.row_marginal, M.col_marginal, pi.matrix @ M.kernel())


def gluing_plan(pi: Coupling, M: Coupling) -> Coupling:
    """The plan pi(dx, dy) delta_x(dx') m(y, dy') viewed as a coupling of pi and pi_n.

    Supports are the atoms of pi and of ``compose_coupling(pi, M)`` as points
    (x, y) and (x', y') of R^{2d}.
    """
    composed = compose_coupling(pi, M)
    K = M.kernel()
    xs, ys, ws = [], [], []
    for i, j in zip(*np.nonzero(pi.matrix)):
        for k in np.flatnonzero(K[j]):
            xs.append(np.concatenate([pi.row_support[i], pi.col_support[j]]))
            ys.append(np.concatenate([pi.row_support[i], M.col_support[k]]))
            ws.append(pi.matrix[i, j] * K[j, k])
    return Coupling.from_triplets(np.array(xs), np.array(ys), np.array(ws),
                                  _as_joint(pi), _as_joint(composed))


def _as_joint(P: Coupling):
    from .measures import DiscreteMeasureND

    ii, jj = np.nonzero(P.matrix)
    pts = np.hstack([P.row_support[ii], P.col_support[jj]])
    return DiscreteMeasureND(pts, P.matrix[ii, jj])


def stability_sequence(mu: Measure, nu: Measure, cost_fn, epsilons):
    """V(mu, nu_eps) for nu_eps the (1 + eps)-dilation of nu about its mean.

    Each nu_eps dominates nu in convex order and tends to nu in W_rho as
    eps -> 0. ``cost_fn(x, y)`` receives (n, 1, d) and (1, m, d) arrays.
    Returns ``(V(mu, nu), [V(mu, nu_eps) for eps in epsilons])``.
    """
    mu, nu = as_nd(mu), as_nd(nu)

    def value(target):
        C = cost_fn(mu.points[:, None, :], target.points[None, :, :])
        return mot_lp(mu, target, C)[0]

    alpha = nu.mean()
    seq = [value(nu.map(lambda p, e=e: alpha + (1.0 + e) * (p - alpha))) for e in epsilons]
    return value(nu), seq
