"""Convex-order tests for discrete measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .lp import lp_solve
from .measures import DiscreteMeasure1D, Measure, as_1d, as_nd, merged_partition

DEFICIT_TOL = 1e-12
MEAN_TOL = 1e-10


@dataclass(frozen=True)
class CxReport:
    ordered: bool
    mean_gap: float
    worst_violation: float


def integrated_quantile_gap(mu: DiscreteMeasure1D, nu: DiscreteMeasure1D):
    """Breakpoints u and D(u) = int_0^u (F_mu^{-1} - F_nu^{-1}) at each of them.

    D is affine between breakpoints, so its extremes are attained there.
    """
    u, x, y = merged_partition(mu, nu)
    D = np.concatenate([[0.0], np.cumsum(np.diff(u) * (x - y))])
    return u, D


def check_cx_1d(mu: Measure, nu: Measure) -> CxReport:
    mu, nu = as_1d(mu), as_1d(nu)
    scale = max(1.0, float(np.max(np.abs(mu.atoms))), float(np.max(np.abs(nu.atoms))))
    gap = abs(mu.mean() - nu.mean())
    _, D = integrated_quantile_gap(mu, nu)
    worst = max(0.0, -float(D.min()))
    ordered = gap <= MEAN_TOL * scale and worst <= DEFICIT_TOL * scale
    return CxReport(bool(ordered), float(gap), worst)


def check_cx_nd(mu: Measure, nu: Measure) -> CxReport:
    """Strassen test: feasibility of the martingale-coupling LP."""
    from .mot import martingale_constraints

    mu, nu = as_nd(mu), as_nd(nu)
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"dimensions differ: {mu.dim} vs {nu.dim}")
    gap = float(np.max(np.abs(mu.mean() - nu.mean())))
    A, b = martingale_constraints(mu, nu)
    sol = lp_solve(np.zeros(A.shape[1]), A, b)
    return CxReport(sol.ok, gap, float(sol.infeasibility))


def check_cx(mu: Measure, nu: Measure) -> CxReport:
    if as_nd(mu).dim == 1 and as_nd(nu).dim == 1:
        return check_cx_1d(mu, nu)
    return check_cx_nd(mu, nu)
