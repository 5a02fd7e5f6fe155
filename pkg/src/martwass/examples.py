"""Worked examples, special multidimensional cases and instance generators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import List, Sequence, Tuple

import numpy as np

from .convex_order import check_cx_1d
from .errors import ConditionalMeanViolation, DomainError, NotInConvexOrder
from .measures import (
    EUCLIDEAN,
    DiscreteMeasure1D,
    DiscreteMeasureND,
    Measure,
    NormSpec,
    as_1d,
    as_nd,
)
from .mot import m_rho_lp
from .transport import Coupling, _locate

# ---------------------------------------------------------------- two atoms


def two_atom_pair(a: float, b: float):
    """mu = (d_-a + d_a)/2, nu = (d_-b + d_b)/2 and their only martingale coupling."""
    if not 0 < a < b:
        raise DomainError(f"need 0 < a < b, got a={a}, b={b}")
    mu = DiscreteMeasure1D([-a, a], [0.5, 0.5])
    nu = DiscreteMeasure1D([-b, b], [0.5, 0.5])
    hi, lo = (b + a) / (4 * b), (b - a) / (4 * b)
    H = Coupling(mu, nu, [[hi, lo], [lo, hi]])
    return mu, nu, H


def two_atom_m_rho_rho(a: float, b: float, rho: float) -> float:
    """M_rho^rho of the two-atom pair."""
    return ((a + b) * (b - a) ** rho + (b - a) * (a + b) ** rho) / (2 * b)


def two_atom_ratio(b: float, rho: float) -> float:
    """M^rho / (W sigma^(rho-1)) for a = 1."""
    return ((1 + b) * (b - 1) ** (rho - 1) + (1 + b) ** rho) / (2 * b**rho)


def two_atom_exponent_ratio(a: float, b: float, rho: float, s: float) -> float:
    """M^rho / (W^s sigma^(rho-s)) for the two-atom pair, with W = b - a, sigma = b."""
    return ((a + b) * (b - a) ** (rho - s) + (a + b) ** rho * (b - a) ** (1 - s)) / (2 * b ** (rho + 1 - s))


def two_atom_lower_bound_point(x: float) -> float:
    """The b giving ratio 2^(rho-1) f_rho(x) at a = 1."""
    if not x > 1:
        raise DomainError("x must exceed 1")
    return (x + 1) / (x - 1)


# ---------------------------------------------------------------- bj example


def _unit(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def bj_example(n: int, theta: float = 0.0, norm: NormSpec = EUCLIDEAN):
    """mu_n uniform on (1,0),...,(n,0); nu = mu_n P_theta; the kernel coupling.

    P_theta moves x to x - e or x + e with probability 1/2, e = (cos theta, sin theta).
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    if not 0 <= theta < math.pi:
        raise DomainError("theta must lie in [0, pi)")
    e = _unit(theta)
    xs = np.column_stack([np.arange(1, n + 1, dtype=float), np.zeros(n)])
    mu = DiscreteMeasureND(xs, np.full(n, 1.0 / n))
    src = np.vstack([xs, xs])
    dst = np.vstack([xs - e, xs + e])
    w = np.full(2 * n, 0.5 / n)
    nu = DiscreteMeasureND(dst, w)
    return mu, nu, Coupling.from_triplets(src, dst, w, mu, nu)


def bj_w_formula(n: int, rho: float) -> float:
    """W_rho(mu_n, mu_n P_0) / |(1,0)|."""
    return n ** (-1.0 / rho)


def bj_sigma_formula(n: int, rho: float) -> float:
    """sigma_rho^rho(mu_n P_0) / |(1,0)|^rho, centred at ((n+1)/2, 0)."""
    inner = sum((n + 1 - 2 * i) ** rho for i in range(2, (n + 1) // 2 + 1))
    return ((n + 1) ** rho + (n - 1) ** rho + 2 * inner) / (2**rho * n)


def bj_ratio(n: int, rho: float, norm: NormSpec = EUCLIDEAN) -> float:
    """theta -> 0 limit of M^rho / (W sigma^(rho-1)) for the pair (mu_n, mu_n P_theta).

    The numerator tends to |(1,0)|^rho since the martingale coupling is
    unique for theta > 0; W and sigma are continuous in theta.
    """
    e1 = float(NormSpec.parse(norm)(np.array([1.0, 0.0])))
    w = bj_w_formula(n, rho) * e1
    sigma = bj_sigma_formula(n, rho) ** (1.0 / rho) * e1
    return e1**rho / (w * sigma ** (rho - 1))


def bj_limit(rho: float) -> float:
    """2^(rho-1) (rho+1)^((rho-1)/rho): limit of bj_ratio(n) n^(rho-1-1/rho)."""
    return 2 ** (rho - 1) * (rho + 1) ** ((rho - 1) / rho)


def bj_explicit_bound(n: int, rho: float) -> float:
    """((n^rho + n)/(n^2 + n))^(1/rho): M_rho(mu_n, mu_n P_0) / |(1,0)| upper bound."""
    return ((n**rho + n) / (n**2 + n)) ** (1.0 / rho)


def bj_explicit_coupling(n: int) -> Coupling:
    """A martingale coupling of (mu_n, mu_n P_0) with cost (n^rho + n)/(n^2 + n) |(1,0)|^rho.

    Atoms 2..n-1 stay put. Atoms 1 and n each keep half their mass and send
    the rest to 0 and n+1 in the proportions that keep their mean.
    """
    mu, nu, _ = bj_example(n, 0.0)
    return _bj_explicit(n, mu, nu)


def _bj_explicit(n, mu, nu):
    # Atoms 1 and n each lose 1/(2n); the freed mass must land on 0 and n+1.
    # From x=1: a to 0 and b to n+1 with -a + n b = 0 and a + b = q.
    # From x=n: c to n+1 and e to 0 with c - n e = 0 and c + e = q.
    # Requirements: a + e = 1/(2n) at 0, b + c = 1/(2n) at n+1, q = 1/(2n).
    q = 1.0 / (2 * n)
    a = q * n / (n + 1)
    b = q / (n + 1)
    xs = [(float(i), 0.0) for i in range(1, n + 1)]
    ys = list(xs)
    ws = [1.0 / n] * n
    ws[0] -= q
    ws[-1] -= q
    xs += [(1.0, 0.0), (1.0, 0.0), (float(n), 0.0), (float(n), 0.0)]
    ys += [(0.0, 0.0), (float(n + 1), 0.0), (float(n + 1), 0.0), (0.0, 0.0)]
    ws += [a, b, a, b]
    return Coupling.from_triplets(np.array(xs), np.array(ys), np.array(ws), mu, nu)


# ----------------------------------------------------------------- triangle


def triangle_example(n: int, lam: float):
    """Three atoms (0,0), (1,0), (1/2, 1/n) and their (1+lam)-dilation about the mean."""
    if n < 2:
        raise DomainError("n must be >= 2")
    if lam <= 0:
        raise DomainError("lambda must be positive")
    p = q = 1.0 / (2 * n)
    r = 1.0 - 1.0 / n
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0 / n]])
    mu = DiscreteMeasureND(pts, [p, q, r])
    nu, _ = scaling_pair(mu, lam)
    return mu, nu


def triangle_mean(n: int) -> np.ndarray:
    return np.array([0.5, 1.0 / n - 1.0 / n**2])


# ------------------------------------------------------------------ scaling


def scaling_image(mu: Measure, lam: float, alpha=None):
    """Image of mu under x -> x + lam (x - alpha); alpha defaults to the mean."""
    m = as_nd(mu)
    a = m.mean() if alpha is None else np.asarray(alpha, dtype=float).reshape(-1)
    out = m.map(lambda p: p + lam * (p - a))
    return out.as_1d() if isinstance(mu, DiscreteMeasure1D) else out


def scaling_pair(mu: Measure, lam: float):
    """(nu, M): nu the dilation of mu about its mean and the scaling kernel coupling.

    The kernel sends x to its image with probability 1/(1+lam) and to an
    independent draw from nu otherwise.
    """
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    m = as_nd(mu)
    nu = scaling_image(m, lam)
    if lam == 0:
        return (nu.as_1d() if isinstance(mu, DiscreteMeasure1D) else nu), Coupling.identity(m)
    alpha = m.mean()
    idx = _locate(nu.points, m.points + lam * (m.points - alpha))
    M = np.outer(m.weights, nu.weights) * (lam / (1 + lam))
    M[np.arange(m.size), idx] += m.weights / (1 + lam)
    coupling = Coupling(m, nu, M)
    return (nu.as_1d() if isinstance(mu, DiscreteMeasure1D) else nu), coupling


def scaling_w_formula(mu: Measure, lam: float, rho: float, norm: NormSpec = EUCLIDEAN) -> float:
    """lam (sum_i w_i |x_i - alpha|^rho)^(1/rho)."""
    m = as_nd(mu)
    d = NormSpec.parse(norm)(m.points - m.mean())
    return lam * float(m.weights @ d**rho) ** (1.0 / rho)


def scaling_constant(rho: float, lam: float) -> float:
    return 2 ** (rho - 1) * (3 + lam) / (1 + lam)


# ------------------------------------------------------------------- tensor


def _reorder(measure: DiscreteMeasureND, pts: np.ndarray) -> np.ndarray:
    return _locate(measure.points, pts)


def tensor_pair(pairs: Sequence[Tuple[DiscreteMeasure1D, DiscreteMeasure1D]], rho: float):
    """Product measures and the product of per-factor optimal martingale couplings.

    Under the L^rho norm the product coupling's cost is the sum of factor
    costs. Returns ``(mu, nu, M, factor_values)`` with factor_values the
    per-factor M_rho^rho.
    """
    if not pairs:
        raise DomainError("need at least one factor")
    mus, nus, Ms, vals = [], [], [], []
    for k, (m, n) in enumerate(pairs):
        m, n = as_1d(m), as_1d(n)
        if not check_cx_1d(m, n).ordered:
            raise NotInConvexOrder(f"factor {k} is not in convex order")
        v, M = m_rho_lp(m, n, rho)
        mus.append(m); nus.append(n); Ms.append(M.matrix); vals.append(v**rho)
    xs = np.array(list(product(*[m.atoms for m in mus])))
    ys = np.array(list(product(*[n.atoms for n in nus])))
    wx = np.array([np.prod(t) for t in product(*[m.weights for m in mus])])
    wy = np.array([np.prod(t) for t in product(*[n.weights for n in nus])])
    big = Ms[0]
    for Mk in Ms[1:]:
        big = np.kron(big, Mk)
    mu = DiscreteMeasureND(xs, wx)
    nu = DiscreteMeasureND(ys, wy)
    ri, ci = _reorder(mu, xs), _reorder(nu, ys)
    mat = np.zeros((mu.size, nu.size))
    np.add.at(mat, (ri[:, None], ci[None, :]), big)
    return mu, nu, Coupling(mu, nu, mat), vals


# ------------------------------------------------------------------- radial


@dataclass(frozen=True)
class RadialPair:
    mu: DiscreteMeasureND
    nu: DiscreteMeasureND
    coupling: Coupling
    mu_signed: DiscreteMeasure1D
    nu_signed: DiscreteMeasure1D
    coupling_1d: Coupling


def symmetrise(m: DiscreteMeasure1D) -> DiscreteMeasure1D:
    """Law of r s with r ~ m and s = +-1 independent and fair."""
    m = as_1d(m)
    return DiscreteMeasure1D(np.concatenate([m.atoms, -m.atoms]), np.concatenate([m.weights, m.weights]) / 2)


def radial_pair(bar_mu: DiscreteMeasure1D, bar_nu: DiscreteMeasure1D, eta: DiscreteMeasureND,
                alpha, rho: float = 1.0, norm: NormSpec = EUCLIDEAN) -> RadialPair:
    """Images of bar(dr) eta(dtheta) under (r, theta) -> alpha + r theta.

    eta is symmetrised first. The coupling is the lift of an optimal 1-D
    martingale coupling of the signed radii via (t, u, theta) -> (alpha + t theta, alpha + u theta).
    """
    norm = NormSpec.parse(norm)
    bar_mu, bar_nu = as_1d(bar_mu), as_1d(bar_nu)
    if bar_mu.atoms[0] < 0 or bar_nu.atoms[0] < 0:
        raise DomainError("radial laws must live on [0, inf)")
    eta = as_nd(eta)
    if np.max(np.abs(norm(eta.points) - 1.0)) > 1e-10:
        raise DomainError("eta must live on the unit sphere")
    eta = DiscreteMeasureND(np.vstack([eta.points, -eta.points]), np.concatenate([eta.weights, eta.weights]) / 2)
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.shape[0] != eta.dim:
        raise DomainError("alpha has the wrong dimension")
    mu_s, nu_s = symmetrise(bar_mu), symmetrise(bar_nu)
    if not check_cx_1d(mu_s, nu_s).ordered:
        raise NotInConvexOrder("symmetrised radial laws are not in convex order")
    _, M1 = m_rho_lp(mu_s, nu_s, rho)
    t = M1.row_support[:, 0]
    u = M1.col_support[:, 0]
    xs, ys, ws = [], [], []
    ii, jj = np.nonzero(M1.matrix)
    for th, wt in zip(eta.points, eta.weights):
        xs.append(alpha + t[ii, None] * th)
        ys.append(alpha + u[jj, None] * th)
        ws.append(M1.matrix[ii, jj] * wt)
    xs, ys, ws = np.vstack(xs), np.vstack(ys), np.concatenate(ws)
    pm, wm = _products(mu_s, eta)
    pn, wn = _products(nu_s, eta)
    mu = DiscreteMeasureND(alpha + pm, wm)
    nu = DiscreteMeasureND(alpha + pn, wn)
    return RadialPair(mu, nu, Coupling.from_triplets(xs, ys, ws, mu, nu), mu_s, nu_s, M1)


def _products(radii: DiscreteMeasure1D, eta: DiscreteMeasureND):
    pts = (radii.atoms[:, None, None] * eta.points[None, :, :]).reshape(-1, eta.dim)
    w = np.outer(radii.weights, eta.weights).ravel()
    return pts, w


# --------------------------------------------------------------- directions


def direction_map(x, norm: NormSpec = EUCLIDEAN) -> np.ndarray:
    """Unit vector of x's line, oriented so its first nonzero coordinate is positive; e1 at 0."""
    norm = NormSpec.parse(norm)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    out = np.zeros_like(X)
    out[:, 0] = 1.0
    nrm = norm(X)
    for k in range(X.shape[0]):
        if nrm[k] == 0:
            continue
        nz = np.flatnonzero(X[k])
        s = 1.0 if X[k, nz[0]] > 0 else -1.0
        out[k] = s * X[k] / nrm[k]
    return out[0] if single else out


def direction_projection(a, c, norm: NormSpec = EUCLIDEAN) -> np.ndarray:
    """The point c_a of Span(a) with |y - c_a| <= |y - c| for every y in Span(a).

    For finite r this is (sum_i c_i sgn(a_i) |a_i|^(r-1)) a, with zero
    coordinates of a contributing nothing; for r = inf it is
    c_i sgn(a_i) a with i the first index where |a_i| = 1.
    """
    norm = NormSpec.parse(norm)
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    if abs(float(norm(a)) - 1.0) > 1e-10:
        raise DomainError("a must be a unit vector")
    sgn = np.where(a >= 0, 1.0, -1.0)
    if norm.is_inf:
        i = int(np.flatnonzero(np.abs(np.abs(a) - 1.0) <= 1e-12)[0])
        return c[i] * sgn[i] * a
    absa = np.abs(a)
    pw = np.where(absa > 0, absa ** (norm.r - 1.0), 0.0)
    return float(np.sum(c * sgn * pw)) * a


@dataclass(frozen=True)
class Fibre:
    direction: np.ndarray
    mass: float
    q: DiscreteMeasure1D
    q_tilde: DiscreteMeasure1D
    coupling_1d: Coupling
    value: float  # M_rho^rho(q, q_tilde)


@dataclass(frozen=True)
class DirectionDecomposition:
    alpha: np.ndarray
    fibres: List[Fibre]
    coupling: Coupling

    def assembled_cost(self) -> float:
        return float(sum(f.mass * f.value for f in self.fibres))


def _direction_key(a: np.ndarray) -> tuple:
    return tuple(np.round(a, 12) + 0.0)


def direction_dependent_pair(mu: Measure, lam: float, rho: float = 1.0, norm: NormSpec = EUCLIDEAN):
    """(nu, decomposition): nu the dilation of mu about its mean, split along the lines of H.

    Requires E[X | H(X - alpha)] = alpha. Each fibre is reduced to a pair
    of 1-D laws of the coefficient t in x - alpha = t a, solved exactly,
    and lifted back.
    """
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    norm = NormSpec.parse(norm)
    m = as_nd(mu)
    alpha = m.mean()
    diff = m.points - alpha
    dirs = direction_map(diff, norm)
    lengths = norm(diff)
    t_all = np.where(np.einsum("ij,ij->i", diff, dirs) >= 0, lengths, -lengths)

    groups = {}
    for k in range(m.size):
        groups.setdefault(_direction_key(dirs[k]), []).append(k)
    scale = 1.0 + float(np.max(np.abs(m.points)))
    bad = []
    for key, idx in groups.items():
        w = m.weights[idx]
        drift = (w @ t_all[idx]) / w.sum()
        if abs(drift) > 1e-10 * scale:
            bad.append(key)
    if bad:
        raise ConditionalMeanViolation(
            f"conditional mean differs from the mean along {len(bad)} direction(s)", bad
        )

    nu = scaling_image(m, lam)
    fibres, xs, ys, ws = [], [], [], []
    for key in sorted(groups):
        idx = groups[key]
        a = dirs[idx[0]]
        w = m.weights[idx]
        mass = float(w.sum())
        q = DiscreteMeasure1D(t_all[idx], w / mass)
        qt = q.map(lambda t: (1.0 + lam) * t)
        if q == qt:
            v, M1 = 0.0, Coupling.identity(q)
        else:
            val, M1 = m_rho_lp(q, qt, rho)
            v = val**rho
        fibres.append(Fibre(a, mass, q, qt, M1, v))
        ii, jj = np.nonzero(M1.matrix)
        xs.append(alpha + M1.row_support[ii, 0][:, None] * a)
        ys.append(alpha + M1.col_support[jj, 0][:, None] * a)
        ws.append(M1.matrix[ii, jj] * mass)
    M = Coupling.from_triplets(np.vstack(xs), np.vstack(ys), np.concatenate(ws), m, nu)
    return nu, DirectionDecomposition(alpha, fibres, M)


# --------------------------------------------------------------- generators


def random_cx_pair(seed: int, n_atoms: int, n_dilations: int, d: int = 1):
    """A random mu and a nu obtained from it by mean-preserving two-point spreads.

    Each spread takes part of one atom's mass and splits it between two
    points on a random line through the atom, keeping the barycentre, so
    mu <=_cx nu by construction. d = 1 returns 1-D measures.
    """
    if n_atoms < 1 or n_dilations < 0 or d < 1:
        raise DomainError("need n_atoms >= 1, n_dilations >= 0, d >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_atoms, d))
    w = rng.dirichlet(np.ones(n_atoms))
    cur_p, cur_w = [p for p in pts], list(w)
    for _ in range(n_dilations):
        j = int(rng.integers(len(cur_w)))
        frac = rng.uniform(0.2, 1.0)
        v = rng.normal(size=d)
        v /= np.linalg.norm(v)
        l1, l2 = rng.uniform(0.1, 1.5, size=2)
        moved = cur_w[j] * frac
        cur_w[j] -= moved
        x = cur_p[j]
        cur_p += [x + l1 * v, x - l2 * v]
        cur_w += [moved * l2 / (l1 + l2), moved * l1 / (l1 + l2)]
    P, W = np.array(cur_p), np.array(cur_w)
    keep = W > 0
    if d == 1:
        return DiscreteMeasure1D(pts[:, 0], w), DiscreteMeasure1D(P[keep, 0], W[keep])
    return DiscreteMeasureND(pts, w), DiscreteMeasureND(P[keep], W[keep])


# ------------------------------------------------------------------ limits


def richardson(hs, values) -> float:
    """Value at h = 0 of the polynomial interpolating (h_k, values_k) (Neville)."""
    h = [float(x) for x in hs]
    p = [float(v) for v in values]
    if len(h) != len(p) or not h:
        raise DomainError("need matching, nonempty sequences")
    for level in range(1, len(h)):
        p = [(h[k + level] * p[k] - h[k] * p[k + 1]) / (h[k + level] - h[k]) for k in range(len(p) - 1)]
    return p[0]


@dataclass(frozen=True)
class LimitSweep:
    parameter: str
    values: List[float]
    raw: List[float]
    extrapolated: float


def limit_sweep(fn, parameter: str, values: Sequence[float], step=None) -> LimitSweep:
    """Evaluate fn along a parameter sequence and extrapolate to step -> 0.

    ``step`` maps a parameter value to the small quantity h that vanishes
    in the limit (1/n for n -> inf, lambda itself for lambda -> 0); by
    default h = value.
    """
    step = step or (lambda v: v)
    vals = [float(v) for v in values]
    raw = [float(fn(v)) for v in vals]
    return LimitSweep(parameter, vals, raw, richardson([step(v) for v in vals], raw))
