import itertools
import math

import numpy as np
import pytest
from scipy import sparse

from martwass.errors import DimensionMismatch, DomainError, MarginalMismatch
from martwass.examples import random_cx_pair, scaling_pair, scaling_w_formula, tensor_pair, two_atom_pair
from martwass.lp import lp_solve
from martwass.measures import EUCLIDEAN, DiscreteMeasure1D, DiscreteMeasureND, NormSpec, centred_moment
from martwass.transport import (
    Coupling,
    comonotone_coupling,
    cost_matrix,
    coupling_cost,
    transport_constraints,
    w_rho_1d,
    w_rho_nd,
    wasserstein,
)

from conftest import highs_transport

# frozen oracle values (independent LP solver)
FIXED_X, FIXED_P = [0.0, 1.0, 3.0], [0.2, 0.5, 0.3]
FIXED_Y, FIXED_Q = [-1.0, 2.0, 4.0], [0.3, 0.3, 0.4]
FIXED_T15 = 1.6024579547452824  # W_1.5^1.5 of the pair above


def vertex_enumeration(C, p, q):
    """Minimum of c.x over the basic feasible solutions of the transport polytope."""
    n, m = C.shape
    A = transport_constraints(n, m, drop_last=True)
    b = np.concatenate([p, q[:-1]])
    rank = A.shape[0]
    best = math.inf
    for cols in itertools.combinations(range(n * m), rank):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if np.all(xb >= -1e-12):
            best = min(best, float(C.ravel()[list(cols)] @ xb))
    return best


class TestCoupling:
    def test_validation(self):
        mu = DiscreteMeasure1D([0.0, 1.0], [0.5, 0.5])
        with pytest.raises(MarginalMismatch):
            Coupling(mu, mu, [[0.5, 0.1], [0.0, 0.4]])
        with pytest.raises(MarginalMismatch):
            Coupling(mu, mu, [[0.6, -0.1], [-0.1, 0.6]])
        with pytest.raises(MarginalMismatch):
            Coupling(mu, mu, [[1.0]])

    def test_clamp(self):
        mu = DiscreteMeasure1D([0.0, 1.0], [0.5, 0.5])
        M = Coupling(mu, mu, [[0.5, -1e-16], [1e-16, 0.5]])
        assert M.matrix.min() == 0.0

    def test_identity_and_product(self):
        mu = DiscreteMeasure1D([0.0, 1.0, 3.0], [0.2, 0.3, 0.5])
        I = Coupling.identity(mu)
        assert I.cost(1.0) == 0.0 and I.is_martingale()
        P = Coupling.product(mu, mu)
        assert max(P.marginal_residuals()) < 1e-15

    def test_from_triplets_aggregates(self):
        xs = [0.0, 0.0, 1.0]
        ys = [1.0, 1.0, 1.0]
        M = Coupling.from_triplets(xs, ys, [0.25, 0.25, 0.5])
        assert M.matrix.tolist() == [[0.5], [0.5]]

    def test_cost_two_atom(self):
        _, _, H = two_atom_pair(1.0, 2.0)
        assert coupling_cost(H, 1.0) == pytest.approx(1.5, rel=1e-15)
        assert coupling_cost(H, 2.0) == pytest.approx(3.0, rel=1e-15)


class TestW1D:
    @pytest.mark.parametrize("rho", [1.0, 1.5, 2.0, 3.0])
    def test_two_atom(self, rho):
        mu, nu, _ = two_atom_pair(0.5, 4.0)
        assert w_rho_1d(mu, nu, rho) == pytest.approx(3.5, rel=1e-14)

    def test_identity(self):
        m = DiscreteMeasure1D([0.0, 2.0, 5.0], [0.1, 0.6, 0.3])
        assert w_rho_1d(m, m, 1.7) == 0.0

    def test_domain(self):
        m = DiscreteMeasure1D.dirac(0.0)
        with pytest.raises(DomainError):
            w_rho_1d(m, m, 0.9)

    def test_matches_lp(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            mu = DiscreteMeasure1D(rng.normal(size=5), rng.dirichlet(np.ones(5)))
            nu = DiscreteMeasure1D(rng.normal(size=5), rng.dirichlet(np.ones(5)))
            for rho in (1.0, 2.5):
                lp, _ = w_rho_nd(mu, nu, rho)
                assert w_rho_1d(mu, nu, rho) == pytest.approx(lp, rel=1e-9)

    def test_comonotone_coupling_optimal(self):
        rng = np.random.default_rng(1)
        mu = DiscreteMeasure1D(rng.normal(size=6), rng.dirichlet(np.ones(6)))
        nu = DiscreteMeasure1D(rng.normal(size=4), rng.dirichlet(np.ones(4)))
        P = comonotone_coupling(mu, nu)
        assert P.cost(2.0) == pytest.approx(w_rho_1d(mu, nu, 2.0) ** 2, rel=1e-12)


class TestWND:
    def test_diracs(self):
        x, y = [1.0, 2.0], [4.0, 6.0]
        for r in (1.0, 2.0, math.inf):
            w, _ = w_rho_nd(DiscreteMeasureND.dirac(x), DiscreteMeasureND.dirac(y), 1.3, NormSpec(r))
            assert w == pytest.approx(float(NormSpec(r)(np.subtract(x, y))), rel=1e-12)

    def test_fixed_oracle(self):
        mu = DiscreteMeasure1D(FIXED_X, FIXED_P)
        nu = DiscreteMeasure1D(FIXED_Y, FIXED_Q)
        w, P = w_rho_nd(mu, nu, 1.5)
        assert w**1.5 == pytest.approx(FIXED_T15, rel=1e-10)
        C = cost_matrix(mu.points, nu.points, 1.5)
        assert vertex_enumeration(C, mu.weights, nu.weights) == pytest.approx(FIXED_T15, rel=1e-10)

    def test_vertex_enumeration_random(self):
        rng = np.random.default_rng(2)
        for _ in range(15):
            mu = DiscreteMeasureND(rng.normal(size=(3, 2)), rng.dirichlet(np.ones(3)))
            nu = DiscreteMeasureND(rng.normal(size=(3, 2)), rng.dirichlet(np.ones(3)))
            w, _ = w_rho_nd(mu, nu, 1.0)
            C = cost_matrix(mu.points, nu.points, 1.0)
            assert w == pytest.approx(vertex_enumeration(C, mu.weights, nu.weights), rel=1e-9)

    def test_matches_highs(self):
        rng = np.random.default_rng(3)
        for r in (1.0, 2.0, math.inf):
            for _ in range(5):
                mu = DiscreteMeasureND(rng.normal(size=(6, 3)), rng.dirichlet(np.ones(6)))
                nu = DiscreteMeasureND(rng.normal(size=(7, 3)), rng.dirichlet(np.ones(7)))
                w, P = w_rho_nd(mu, nu, 2.0, NormSpec(r))
                C = cost_matrix(mu.points, nu.points, 2.0, NormSpec(r))
                assert w**2 == pytest.approx(highs_transport(C, mu.weights, nu.weights), rel=1e-9)
                assert max(P.marginal_residuals()) <= 1e-10

    def test_scaling_formula(self):
        rng = np.random.default_rng(4)
        for lam in (0.1, 1.0, 10.0):
            mu = DiscreteMeasureND(rng.normal(size=(5, 2)), rng.dirichlet(np.ones(5)))
            nu, _ = scaling_pair(mu, lam)
            for rho in (1.0, 1.5, 3.0):
                alpha = mu.mean()
                expected = lam * float(mu.weights @ np.linalg.norm(mu.points - alpha, axis=1) ** rho) ** (1 / rho)
                assert wasserstein(mu, nu, rho) == pytest.approx(expected, rel=1e-10)
                assert scaling_w_formula(mu, lam, rho) == pytest.approx(expected, rel=1e-14)

    def test_tensor_equality(self):
        pairs = [two_atom_pair(1.0, 2.0)[:2], two_atom_pair(0.5, 3.0)[:2]]
        for rho in (1.0, 1.5, 2.0):
            mu, nu, _, _ = tensor_pair(pairs, rho)
            w = wasserstein(mu, nu, rho, NormSpec(rho))
            assert w**rho == pytest.approx(1.0**rho + 2.5**rho, rel=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            w_rho_nd(DiscreteMeasureND.dirac([0.0, 0.0]), DiscreteMeasureND.dirac([0.0]), 1.0)


class TestMetricProperties:
    def test_symmetry_triangle_monotonicity(self):
        rng = np.random.default_rng(5)
        for _ in range(8):
            ms = [DiscreteMeasureND(rng.normal(size=(4, 2)), rng.dirichlet(np.ones(4))) for _ in range(3)]
            for rho in (1.0, 2.0):
                ab = wasserstein(ms[0], ms[1], rho)
                ba = wasserstein(ms[1], ms[0], rho)
                bc = wasserstein(ms[1], ms[2], rho)
                ac = wasserstein(ms[0], ms[2], rho)
                assert ab == pytest.approx(ba, rel=1e-9)
                assert ac <= ab + bc + 1e-9
            assert wasserstein(ms[0], ms[1], 1.0) <= wasserstein(ms[0], ms[1], 1.5) + 1e-9 \
                <= wasserstein(ms[0], ms[1], 3.0) + 2e-9

    def test_w_le_two_sigma_when_ordered(self):
        for seed in range(20):
            mu, nu = random_cx_pair(seed, 5, 4)
            for rho in (1.0, 1.5, 2.0):
                assert w_rho_1d(mu, nu, rho) <= 2 * centred_moment(nu, rho)[0] + 1e-12


class TestLpSolve:
    def test_single_transport(self):
        sol = lp_solve([2.0 ** 1.5], [[1.0]], [1.0])
        assert sol.ok and sol.objective == pytest.approx(2.0 ** 1.5)

    def test_equal_marginals_identity(self):
        m = DiscreteMeasure1D([0.0, 1.0, 2.0], [0.2, 0.3, 0.5])
        w, P = w_rho_nd(m, m, 1.0)
        assert w == 0.0
        np.testing.assert_allclose(P.matrix, np.diag(m.weights), atol=1e-15)

    def test_infeasible(self):
        sol = lp_solve([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])
        assert sol.status == "infeasible" and sol.infeasibility > 0

    def test_unbounded(self):
        sol = lp_solve([-1.0, 0.0], [[1.0, -1.0]], [0.0])
        assert sol.status == "unbounded"

    def test_negative_rhs_and_sparse_input(self):
        A = sparse.csr_matrix(np.array([[-1.0, -1.0, 0.0], [0.0, 1.0, 1.0]]))
        sol = lp_solve([1.0, 2.0, 0.5], A, [-1.0, 1.0])
        assert sol.ok and sol.objective == pytest.approx(1.5)

    def test_bad_input(self):
        with pytest.raises(ValueError):
            lp_solve([1.0], [[1.0, 2.0]], [1.0])
        with pytest.raises(ValueError):
            lp_solve([np.inf], [[1.0]], [1.0])

    def test_certificates_random(self):
        from scipy.optimize import linprog

        rng = np.random.default_rng(6)
        for _ in range(40):
            m, n = rng.integers(2, 7), rng.integers(4, 14)
            A = rng.integers(-3, 4, size=(m, n)).astype(float)
            x0 = rng.uniform(size=n) * (rng.uniform(size=n) < 0.6)
            b = A @ x0
            c = rng.uniform(0.1, 2.0, size=n)
            sol = lp_solve(c, A, b)
            ref = linprog(c, A_eq=A, b_eq=b, method="highs")
            assert sol.ok and ref.status == 0
            assert sol.objective == pytest.approx(ref.fun, rel=1e-9, abs=1e-12)
            assert np.max(np.abs(A @ sol.primal - b)) <= 1e-9
            assert np.all(sol.primal >= 0)
            y = sol.certificate
            assert np.all(c - A.T @ y >= -1e-9)
            assert abs(b @ y - sol.objective) <= 1e-8 * (1 + abs(sol.objective))

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        A = rng.integers(0, 3, size=(4, 10)).astype(float)
        b = A @ rng.uniform(size=10)
        c = rng.integers(1, 3, size=10).astype(float)
        s1, s2 = lp_solve(c, A, b), lp_solve(c, A, b)
        assert np.array_equal(s1.primal, s2.primal)

    def test_thread_safety(self):
        from concurrent.futures import ThreadPoolExecutor

        pairs = [random_cx_pair(s, 5, 3, d=2) for s in range(8)]
        serial = [w_rho_nd(mu, nu, 1.0)[0] for mu, nu in pairs]
        with ThreadPoolExecutor(4) as ex:
            threaded = list(ex.map(lambda p: w_rho_nd(p[0], p[1], 1.0)[0], pairs))
        assert serial == threaded
