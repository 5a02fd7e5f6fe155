"""Evaluation of M_rho^rho <= C W_rho sigma_rho^(rho-1) on single pairs and sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .constants import k_rho
from .convex_order import check_cx
from .errors import DegeneratePair, DomainError, NotInConvexOrder
from .examples import (
    direction_dependent_pair,
    radial_pair,
    random_cx_pair,
    scaling_constant,
    scaling_pair,
    tensor_pair,
)
from .itm import itm_coupling
from .measures import EUCLIDEAN, DiscreteMeasure1D, DiscreteMeasureND, Measure, NormSpec, as_nd, centred_moment
from .mot import m_rho_lp
from .transport import wasserstein

CASES = ("1d", "scaling", "tensor", "radial", "direction", "nd")
SLACK_TOL = 1e-7


@dataclass(frozen=True)
class InequalityReport:
    case: str
    rho: float
    w_rho: float
    sigma_rho: float
    m_rho_lp: float
    itm_cost: Optional[float]
    ratio: float
    bound: float
    slack: float
    surrogate: bool = False

    @property
    def holds(self) -> bool:
        return self.slack >= -SLACK_TOL

    def to_dict(self) -> dict:
        return asdict(self)


def _is_1d(m) -> bool:
    return isinstance(m, DiscreteMeasure1D) or as_nd(m).dim == 1


def applicable_bound(case: str, rho: float, norm: NormSpec = EUCLIDEAN, lam: Optional[float] = None):
    """(bound, surrogate) for a case tag.

    One-dimensional pairs use K_rho. The tensor, radial and direction cases
    share the optimal one-dimensional constant C_rho, which is replaced by
    its computable upper bound K_rho and flagged. With rho = 2 and the
    Euclidean norm the constant 2 holds in every dimension.
    """
    norm = NormSpec.parse(norm)
    if case not in CASES:
        raise DomainError(f"unknown case {case!r}; expected one of {CASES}")
    bound, surrogate = math.inf, False
    if case == "1d":
        bound = k_rho(rho).K_est
    elif case in ("tensor", "radial", "direction"):
        bound = k_rho(rho).K_est
        surrogate = 1.0 < rho < 2.0
    elif case == "scaling":
        if lam is None:
            raise DomainError("the scaling case needs lambda")
        bound = scaling_constant(rho, lam)
    if rho == 2.0 and norm.r == 2.0 and bound > 2.0:
        bound, surrogate = 2.0, False
    return bound, surrogate


def verify_pair(mu: Measure, nu: Measure, rho: float, norm: NormSpec = EUCLIDEAN,
                case_tag: str = "1d", lam: Optional[float] = None) -> InequalityReport:
    """Compute W_rho, sigma_rho(nu), M_rho by LP and compare the ratio with the case's constant."""
    norm = NormSpec.parse(norm)
    one_d = _is_1d(mu) and _is_1d(nu)
    # in higher dimension the martingale LP itself reports infeasibility
    if one_d and not check_cx(mu, nu).ordered:
        raise NotInConvexOrder("mu is not below nu in convex order")
    w = wasserstein(mu, nu, rho, norm)
    sigma, _ = centred_moment(nu, rho, norm)
    m_val, _ = m_rho_lp(mu, nu, rho, norm)
    m_pow = m_val**rho
    itm_cost = itm_coupling(mu, nu).cost(rho) if one_d else None
    bound, surrogate = applicable_bound(case_tag, rho, norm, lam)
    if w <= 0.0:
        if m_pow > 1e-12:
            raise DegeneratePair(f"W_rho = 0 but M_rho^rho = {m_pow:.3e}")
        ratio = 0.0
    else:
        ratio = m_pow / (w * sigma ** (rho - 1.0))
    return InequalityReport(case_tag, float(rho), float(w), float(sigma), float(m_val),
                            None if itm_cost is None else float(itm_cost),
                            float(ratio), float(bound), float(bound - ratio), surrogate)


def exponent_ratio(mu: Measure, nu: Measure, rho: float, s: float, norm: NormSpec = EUCLIDEAN) -> float:
    """M_rho^rho / (W_rho^s sigma_rho^(rho - s))."""
    if not 1.0 < s <= rho:
        raise DomainError("need 1 < s <= rho")
    w = wasserstein(mu, nu, rho, norm)
    sigma, _ = centred_moment(nu, rho, norm)
    m_val, _ = m_rho_lp(mu, nu, rho, norm)
    return m_val**rho / (w**s * sigma ** (rho - s))


# ------------------------------------------------------------------ sweeps


@dataclass(frozen=True)
class SweepConfig:
    cases: Sequence[str] = ("1d",)
    rhos: Sequence[float] = (1.0,)
    seeds: Sequence[int] = field(default_factory=lambda: list(range(10)))
    n_atoms: int = 5
    n_dilations: int = 4
    dim: int = 2
    lam: float = 1.0
    norm: NormSpec = EUCLIDEAN

    def __post_init__(self):
        for c in self.cases:
            if c not in CASES:
                raise DomainError(f"unknown case {c!r}")
        for r in self.rhos:
            if not r >= 1:
                raise DomainError(f"rho must be >= 1, got {r}")
        if self.n_atoms < 1 or self.n_dilations < 0 or self.dim < 1:
            raise DomainError("invalid instance sizes")
        if self.lam < 0:
            raise DomainError("lambda must be >= 0")


SWEEP_HEADER = ("case", "seed", "rho", "w_rho", "sigma_rho", "m_rho_lp", "itm_cost",
                "ratio", "bound", "slack", "surrogate")


def make_instance(case: str, seed: int, cfg: SweepConfig, rho: float):
    """(mu, nu, norm, lam) for one sweep cell; deterministic in (case, seed)."""
    rng = np.random.default_rng([seed, CASES.index(case)])
    d = cfg.dim
    if case == "1d":
        mu, nu = random_cx_pair(seed, cfg.n_atoms, cfg.n_dilations, 1)
        return mu, nu, cfg.norm, None
    if case == "nd":
        mu, nu = random_cx_pair(seed, cfg.n_atoms, cfg.n_dilations, d)
        return mu, nu, cfg.norm, None
    if case == "scaling":
        mu = DiscreteMeasureND(rng.normal(size=(cfg.n_atoms, d)), rng.dirichlet(np.ones(cfg.n_atoms)))
        nu, _ = scaling_pair(mu, cfg.lam)
        return mu, nu, cfg.norm, cfg.lam
    if case == "tensor":
        pairs = [random_cx_pair(int(rng.integers(2**31)), 2, 2, 1) for _ in range(2)]
        mu, nu, _, _ = tensor_pair(pairs, rho)
        return mu, nu, NormSpec(rho), None
    if case == "radial":
        m1, n1 = random_cx_pair(int(rng.integers(2**31)), cfg.n_atoms, cfg.n_dilations, 1)
        # |.| of a spread, then an outward push, dominates in increasing convex order
        bar_mu = DiscreteMeasure1D(np.abs(m1.atoms + 0.5), m1.weights)
        bar_nu = DiscreteMeasure1D(np.abs(n1.atoms + 0.5) * (1.0 + 0.2 * rng.uniform(size=n1.size)), n1.weights)
        dirs = rng.normal(size=(3, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        eta = DiscreteMeasureND(dirs, rng.dirichlet(np.ones(3)))
        rp = radial_pair(bar_mu, bar_nu, eta, rng.normal(size=d), rho)
        return rp.mu, rp.nu, EUCLIDEAN, None
    if case == "direction":
        k = max(1, cfg.n_atoms // 2)
        alpha = rng.normal(size=d)
        v = rng.normal(size=(k, d))
        w = rng.dirichlet(np.ones(k)) / 2
        mu = DiscreteMeasureND(np.vstack([alpha + v, alpha - v]), np.concatenate([w, w]))
        nu, _ = direction_dependent_pair(mu, cfg.lam, rho, cfg.norm)
        return mu, nu, cfg.norm, None
    raise DomainError(f"unknown case {case!r}")


def _run_cell(args):
    case, seed, rho, cfg = args
    mu, nu, norm, lam = make_instance(case, seed, cfg, rho)
    rep = verify_pair(mu, nu, rho, norm, case, lam)
    return (case, seed, rho, rep)


def sweep(config: SweepConfig, threads: int = 1) -> List[tuple]:
    """Rows (SWEEP_HEADER order) for every case x seed x rho, plus max-ratio summaries.

    Rows are sorted by (case, seed, rho) whatever the thread count. Each
    summary row has seed "max" and carries the largest ratio for its
    (case, rho) together with the smallest slack.
    """
    cells = [(c, s, r, config) for c in config.cases for s in config.seeds for r in config.rhos]
    if threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    results.sort(key=lambda t: (t[0], t[1], t[2]))
    rows = []
    for case, seed, rho, rep in results:
        rows.append((case, seed, rho, rep.w_rho, rep.sigma_rho, rep.m_rho_lp,
                     rep.itm_cost, rep.ratio, rep.bound, rep.slack, rep.surrogate))
    summary = {}
    for case, seed, rho, rep in results:
        key = (case, rho)
        best = summary.get(key)
        if best is None or rep.ratio > best[0]:
            summary[key] = (rep.ratio, rep.bound, rep.surrogate)
        worst_slack = min(rep.slack, summary.get((key, "slack"), math.inf))
        summary[(key, "slack")] = worst_slack
    for key in sorted(k for k in summary if isinstance(k[0], str)):
        ratio, bound, surrogate = summary[key]
        rows.append((key[0], "max", key[1], None, None, None, None, ratio, bound,
                     summary[(key, "slack")], surrogate))
    return rows


def sweep_ok(rows) -> bool:
    return all(r[9] is None or r[9] >= -SLACK_TOL for r in rows)
