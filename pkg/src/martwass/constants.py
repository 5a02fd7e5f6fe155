"""The constant K_rho of the martingale Wasserstein inequality and its bounds.

K_rho = inf { 2^(rho-1) g1 + 2 (2^(rho-2) v 1) g2 : (x + x^rho)/(1 + x) <= g1 + g2 (1 + x)^(rho-1) for x >= 0 }.

For rho in (1, 2) the smallest admissible g2 given g1 is

    g2(g1) = sup_{x >= 0} (x^rho + (1 - g1) x - g1) / (1 + x)^rho,

whose derivative has the sign of h(x) = rho x^(rho-1) + 1 + (rho-1) g1 - (rho-1)(1-g1) x.
h is concave with h(0) > 0, so for g1 < 1 the supremum sits at the unique
root of h. That root can be astronomically large when rho is close to 2
(about e^700 at rho = 1.999), so everything is done in t = log x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

EDGE_TOL = 1e-9
FIXED_POINT_TOL = 1e-12
FIXED_POINT_ITERS = 10_000
# padding that makes the reported g2 provably admissible despite rounding
GAMMA2_PAD = 1e-13


@dataclass(frozen=True)
class ConstantsResult:
    rho: float
    f_sup: float
    x_star: float
    K_est: float
    K_lower: float
    K_upper: float
    gamma1_star: float
    gamma2_star: float

    def as_row(self):
        return (self.rho, self.K_lower, self.K_est, self.K_upper)


def f_rho(x, rho: float):
    """(x + x^rho) / (1 + x)^rho, evaluated without overflow for large x."""
    t = np.log(np.asarray(x, dtype=float))
    return (np.exp((1.0 - rho) * t) + 1.0) / (1.0 + np.exp(-t)) ** rho


def _shifted_ratio_log(t, rho: float, g1):
    """(x^rho + (1-g1) x - g1) / (1+x)^rho at x = e^t."""
    num = 1.0 + (1.0 - g1) * np.exp((1.0 - rho) * t) - g1 * np.exp(-rho * t)
    return num / (1.0 + np.exp(-t)) ** rho


def _stationary_log(rho: float, g1: np.ndarray, iters: int = 200) -> np.ndarray:
    """log of the root of h for each g1 < 1, by vectorised bisection.

    In log coordinates h(e^t)/e^t = rho e^((rho-2) t) + A e^(-t) - B is
    strictly decreasing, which makes bracketing trivial.
    """
    A = 1.0 + (rho - 1.0) * g1
    B = (rho - 1.0) * (1.0 - g1)
    lo = np.full_like(g1, math.log(1e-3))  # h > 0 on (0, 1] anyway
    hi = np.maximum(np.log(2.0 * A / B), np.log(2.0 * rho / B) / (2.0 - rho)) + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        val = rho * np.exp((rho - 2.0) * mid) + A * np.exp(-mid) - B
        pos = val > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(hi))):
            break
    return 0.5 * (lo + hi)


def sup_f_rho(rho: float):
    """(sup_{x > 1} f_rho(x), argmax) for rho in (1, 2).

    Fixed-point iteration of x -> (rho x^(rho-1) + 1)/(rho - 1) from
    x0 = 2/(rho - 1), run on log x; bisection if it fails to settle.
    """
    rho = float(rho)
    if not 1.0 < rho < 2.0:
        raise DomainError(f"sup_f_rho needs rho in (1, 2), got {rho}")
    t = math.log(2.0 / (rho - 1.0))
    lr = math.log(rho - 1.0)
    converged = False
    for _ in range(FIXED_POINT_ITERS):
        # log(rho e^{(rho-1)t} + 1) - log(rho - 1), stable for large t
        a = math.log(rho) + (rho - 1.0) * t
        t_new = a + math.log1p(math.exp(-a)) - lr
        if abs(t_new - t) < FIXED_POINT_TOL:
            t = t_new
            converged = True
            break
        t = t_new
    if not converged:
        t = float(_stationary_log(rho, np.array([0.0]))[0])
    return _f_rho_log(t, rho), (math.exp(t) if t < 709 else math.inf)


def _f_rho_log(t: float, rho: float) -> float:
    return (math.exp((1.0 - rho) * t) + 1.0) / (1.0 + math.exp(-t)) ** rho


def gamma2_of_gamma1(rho: float, g1) -> np.ndarray:
    """Smallest admissible g2 for each g1 in [0, 1]; rho in (1, 2)."""
    g1 = np.atleast_1d(np.asarray(g1, dtype=float))
    out = np.ones_like(g1)  # g1 = 1: supremum is the limit 1 at infinity
    inner = g1 < 1.0
    if np.any(inner):
        t = _stationary_log(rho, g1[inner])
        out[inner] = np.maximum(_shifted_ratio_log(t, rho, g1[inner]), 1.0)
    return out


def k_rho(rho: float, gamma1_step: float = 1e-4) -> ConstantsResult:
    """K_rho with the admissible pair realising it and the sandwich bounds."""
    rho = float(rho)
    if not rho >= 1.0:
        raise DomainError(f"rho must be >= 1, got {rho}")
    if rho <= 1.0 + EDGE_TOL:
        return ConstantsResult(rho, 2.0, math.inf, 2.0, 2.0, 2.0, 2.0, 0.0)
    if rho >= 2.0 - EDGE_TOL:
        K = 2.0 ** (rho - 1.0)
        f_sup, x_star = (1.0, math.inf) if rho <= 2.0 + EDGE_TOL else (math.nan, math.nan)
        return ConstantsResult(rho, f_sup, x_star, K, K, K, 0.0, 1.0)
    if not 0 < gamma1_step <= 1:
        raise DomainError("gamma1_step must lie in (0, 1]")
    f_sup, x_star = sup_f_rho(rho)
    n = int(round(1.0 / gamma1_step))
    g1 = np.linspace(0.0, 1.0, n + 1)
    g2 = gamma2_of_gamma1(rho, g1)
    K = 2.0 ** (rho - 1.0) * g1 + 2.0 * g2
    i = int(np.argmin(K))
    g2_star = float(g2[i]) + GAMMA2_PAD
    lower = 2.0 ** (rho - 1.0) * f_sup
    upper = min(2.0 ** (rho - 1.0) + 2.0, 2.0 * f_sup)
    K_est = 2.0 ** (rho - 1.0) * float(g1[i]) + 2.0 * g2_star
    return ConstantsResult(rho, f_sup, x_star, K_est, lower, upper, float(g1[i]), g2_star)


def admissibility_residual(rho: float, gamma1: float, gamma2: float, n_grid: int = 20_001) -> float:
    """max_x (x + x^rho)/(1 + x) - gamma1 - gamma2 (1 + x)^(rho-1).

    Evaluated on a log-spaced grid over [1e-12, 1e12], at 0, and at the
    stationary point of the shifted ratio. Admissible pairs give <= 0.
    """
    rho = float(rho)
    ts = list(np.linspace(math.log(1e-12), math.log(1e12), n_grid))
    if 1.0 < rho < 2.0 and gamma1 < 1.0:
        ts.append(float(_stationary_log(rho, np.array([float(gamma1)]))[0]))
    t = np.array(ts)
    # (1+x)^(rho-1) * (ratio(x) - gamma2) where ratio is the shifted quotient
    with np.errstate(over="ignore"):
        scale = np.exp((rho - 1.0) * (t + np.log1p(np.exp(-t))))
        vals = scale * (_shifted_ratio_log(t, rho, gamma1) - gamma2)
    vals = np.where(np.isnan(vals), 0.0, vals)
    at_zero = -gamma1 - gamma2
    return float(max(np.max(vals), at_zero))


def figure1_table(rho_grid, gamma1_step: float = 1e-4):
    """Rows (rho, K_lower, K_est, K_upper) for each rho in the grid."""
    return [k_rho(r, gamma1_step).as_row() for r in rho_grid]


def parse_grid(spec: str):
    """'a:b:step' -> inclusive list of rho values, rounded to the step's decimals."""
    try:
        a, b, step = (float(s) for s in spec.split(":"))
    except ValueError as exc:
        raise DomainError(f"grid must look like a:b:step, got {spec!r}") from exc
    if step <= 0 or b < a:
        raise DomainError(f"empty or invalid grid {spec!r}")
    n = int(math.floor((b - a) / step + 1e-9))
    digits = max(0, -int(math.floor(math.log10(step))) + 2)
    return [round(a + k * step, digits) for k in range(n + 1)]
