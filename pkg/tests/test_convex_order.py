import numpy as np
import pytest

from martwass.convex_order import check_cx, check_cx_1d, check_cx_nd
from martwass.errors import DimensionMismatch
from martwass.examples import bj_example, random_cx_pair, tensor_pair, two_atom_pair
from martwass.measures import DiscreteMeasure1D, DiscreteMeasureND

from conftest import highs_martingale


def call_price_oracle(mu, nu, tol=1e-12):
    """mu <=cx nu iff equal means and E(X-k)+ <= E(Y-k)+ at every kink k."""
    if abs(mu.mean() - nu.mean()) > tol:
        return False
    ks = np.concatenate([mu.atoms, nu.atoms])
    cm = np.maximum(mu.atoms[None, :] - ks[:, None], 0) @ mu.weights
    cn = np.maximum(nu.atoms[None, :] - ks[:, None], 0) @ nu.weights
    return bool(np.all(cm <= cn + tol))


def test_symmetric_pair_ordered():
    for a, b in [(1, 2), (0.5, 4), (1e-3, 1)]:
        mu, nu, _ = two_atom_pair(a, b)
        assert check_cx_1d(mu, nu).ordered


def test_unequal_means():
    r = check_cx_1d(DiscreteMeasure1D.dirac(0.0), DiscreteMeasure1D.dirac(1.0))
    assert not r.ordered and r.mean_gap == 1.0


def test_reversed_pair():
    mu, nu, _ = two_atom_pair(1.0, 2.0)
    r = check_cx_1d(nu, mu)
    assert not r.ordered and r.worst_violation > 0


def test_report_invariant():
    for seed in range(20):
        mu, nu = random_cx_pair(seed, 4, 3)
        r = check_cx_1d(mu, nu)
        if r.ordered:
            assert r.mean_gap <= 1e-10 and r.worst_violation <= 1e-10


def test_agrees_with_call_price_oracle():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(300):
        n, m = rng.integers(1, 5, size=2)
        x = rng.integers(-3, 4, size=n).astype(float)
        y = rng.integers(-5, 6, size=m).astype(float)
        mu = DiscreteMeasure1D(x, rng.dirichlet(np.ones(n)))
        w = rng.dirichlet(np.ones(m))
        # shift the last atom of nu so that the means agree
        y[-1] += (mu.mean() - w @ y) / w[-1]
        nu = DiscreteMeasure1D(y, w)
        expected = call_price_oracle(mu, nu, 1e-9)
        assert check_cx_1d(mu, nu).ordered == expected
        hits += expected
    assert 10 < hits < 290


def test_1d_and_nd_agree():
    rng = np.random.default_rng(1)
    for seed in range(30):
        mu, nu = random_cx_pair(seed, 3, 2)
        if seed % 2:
            mu, nu = nu, mu
        if seed % 3 == 0:
            nu = nu.map(lambda a: a + rng.normal(scale=0.1))
        assert check_cx_1d(mu, nu).ordered == check_cx_nd(mu, nu).ordered


def test_nd_agrees_with_highs():
    rng = np.random.default_rng(2)
    for seed in range(15):
        mu, nu = random_cx_pair(seed, 3, 2, d=2)
        if seed % 2:
            nu = nu.translate(rng.normal(scale=0.05, size=2)) if seed % 4 == 1 else nu
            mu, nu = (nu, mu) if seed % 4 == 3 else (mu, nu)
        C = np.zeros((mu.size, nu.size))
        feasible = highs_martingale(mu.points, mu.weights, nu.points, nu.weights, C) is not None
        assert check_cx_nd(mu, nu).ordered == feasible


def test_jensen_dirac_at_mean():
    rng = np.random.default_rng(3)
    nu = DiscreteMeasureND(rng.normal(size=(6, 2)), rng.dirichlet(np.ones(6)))
    assert check_cx_nd(DiscreteMeasureND.dirac(nu.mean()), nu).ordered


def test_bj_pair_ordered():
    mu, nu, _ = bj_example(5, 0.3)
    assert check_cx_nd(mu, nu).ordered


def test_tensor_pair_ordered():
    pairs = [random_cx_pair(s, 2, 2) for s in (5, 6)]
    mu, nu, _, _ = tensor_pair(pairs, 1.5)
    assert check_cx_nd(mu, nu).ordered


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        check_cx_nd(DiscreteMeasureND.dirac([0.0, 0.0]), DiscreteMeasureND.dirac([0.0]))


def test_translation_and_scaling_preserve_order():
    for seed in range(15):
        mu, nu = random_cx_pair(seed, 4, 3)
        for f in (lambda a: a + 3.7, lambda a: 2.5 * a, lambda a: 0.1 * a - 1):
            assert check_cx(mu.map(f), nu.map(f)).ordered


def test_dilation_closure():
    rng = np.random.default_rng(4)
    for seed in range(30):
        mu, nu = random_cx_pair(seed, 4, 2)
        # further spread one atom of nu about itself
        k = int(rng.integers(nu.size))
        x, p = nu.atoms[k], nu.weights[k]
        lo, hi = x - rng.uniform(0.1, 2), x + rng.uniform(0.1, 2)
        t = (x - lo) / (hi - lo)
        atoms = np.concatenate([np.delete(nu.atoms, k), [lo, hi]])
        weights = np.concatenate([np.delete(nu.weights, k), [p * (1 - t), p * t]])
        assert check_cx(mu, DiscreteMeasure1D(atoms, weights)).ordered
