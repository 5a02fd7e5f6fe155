import math
from fractions import Fraction

import numpy as np
import pytest

from martwass.errors import DomainError
from martwass.measures import (
    EUCLIDEAN,
    DiscreteMeasure1D,
    DiscreteMeasureND,
    NormSpec,
    cdf,
    centred_moment,
    mean,
    moment_about,
    quantile,
)

SYM = DiscreteMeasure1D([-1.0, 1.0], [0.5, 0.5])


class TestConstruction:
    def test_sorted_and_merged(self):
        m = DiscreteMeasure1D([3.0, 1.0, 1.0 + 1e-16, 2.0], [0.25, 0.25, 0.25, 0.25])
        assert m.atoms.tolist() == [1.0, 2.0, 3.0]
        assert m.weights.tolist() == [0.5, 0.25, 0.25]

    def test_zero_weights_dropped(self):
        m = DiscreteMeasure1D([0.0, 1.0, 2.0], [0.5, 0.0, 0.5])
        assert m.size == 2

    def test_immutable(self):
        with pytest.raises(ValueError):
            SYM.atoms[0] = 5.0

    @pytest.mark.parametrize("w", [[0.5, 0.6], [1.5, -0.5], [np.nan, 1.0]])
    def test_bad_weights(self, w):
        with pytest.raises(ValueError):
            DiscreteMeasure1D([0.0, 1.0], w)

    def test_from_fractions(self):
        m = DiscreteMeasure1D.from_fractions([0, Fraction(1, 3)], [Fraction(1, 3), Fraction(2, 3)])
        assert m.atoms[1] == 1 / 3 and m.weights[0] == 1 / 3
        with pytest.raises(ValueError):
            DiscreteMeasure1D.from_fractions([0, 1], [Fraction(1, 3), Fraction(1, 3)])

    def test_nd_merge_and_order(self):
        m = DiscreteMeasureND([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]], [0.25, 0.5, 0.25])
        assert m.points.tolist() == [[0.0, 1.0], [1.0, 0.0]]
        assert m.weights.tolist() == [0.5, 0.5]

    def test_embed(self):
        m = DiscreteMeasureND([[1.0], [2.0]], [0.5, 0.5]).embed(3)
        assert m.points.tolist() == [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]

    def test_norm_spec(self):
        assert NormSpec.parse("inf").is_inf
        assert NormSpec.parse("1").r == 1.0
        with pytest.raises(DomainError):
            NormSpec(0.5)
        v = np.array([3.0, -4.0])
        assert NormSpec(2.0)(v) == 5.0
        assert NormSpec(1.0)(v) == 7.0
        assert NormSpec(math.inf)(v) == 4.0
        # no overflow for huge coordinates
        assert NormSpec(3.0)(np.array([1e200, 1e200])) == pytest.approx(2 ** (1 / 3) * 1e200)


class TestCdfQuantile:
    def test_examples(self):
        assert cdf(DiscreteMeasure1D.dirac(0.0), -1.0) == 0.0
        assert cdf(SYM, -1.0) == 0.5
        assert cdf(SYM, 0.0) == 0.5
        assert quantile(SYM, 0.5) == -1.0
        for eps in (1e-9, 0.1, 0.4999):
            assert quantile(SYM, 0.5 + eps) == 1.0
        for u in (0.01, 0.5, 0.99):
            assert quantile(DiscreteMeasure1D.dirac(3.0), u) == 3.0

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
    def test_quantile_domain(self, u):
        with pytest.raises(DomainError):
            quantile(SYM, u)

    def test_galois_connection(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 8))
            m = DiscreteMeasure1D(rng.normal(size=n), rng.dirichlet(np.ones(n)))
            us = np.concatenate([rng.uniform(size=20), m.cumulative[:-1]])
            for u in us:
                if not 0 < u < 1:
                    continue
                q = quantile(m, u)
                for x in m.atoms:
                    assert (q <= x) == (u <= cdf(m, x))

    def test_inverse_transform_sampling(self):
        # rational weights with denominator 12: the grid (k - 1/2)/12 reproduces m exactly
        m = DiscreteMeasure1D.from_fractions([0, 1, 5], [Fraction(1, 4), Fraction(1, 6), Fraction(7, 12)])
        N = 12
        u = (np.arange(1, N + 1) - 0.5) / N
        xs = quantile(m, u)
        atoms, counts = np.unique(xs, return_counts=True)
        assert atoms.tolist() == m.atoms.tolist()
        assert [Fraction(int(c), N) for c in counts] == [Fraction(1, 4), Fraction(1, 6), Fraction(7, 12)]


class TestMean:
    def test_examples(self):
        assert mean(DiscreteMeasure1D([-2.5, 2.5], [0.5, 0.5])) == 0.0
        n = 7
        m = DiscreteMeasureND([[0, 0], [1, 0], [0.5, 1 / n]], [0.25, 0.25, 0.5])
        np.testing.assert_allclose(mean(m), [0.5, 1 / (2 * n)], rtol=0, atol=1e-15)
        np.testing.assert_array_equal(mean(DiscreteMeasureND.dirac([1.0, -2.0])), [1.0, -2.0])


def _local_opt_check(m, rho, norm, sigma, c, rng, trials=200):
    """Convex objective: no small perturbation of c* may improve it."""
    base = sigma**rho
    scale = float(np.max(np.abs(m.points - m.mean()))) or 1.0
    for _ in range(trials):
        v = rng.normal(size=m.dim)
        for h in (1e-3, 1e-5):
            assert moment_about(m, c + h * scale * v, rho, norm) >= base * (1 - 1e-10) - 1e-15


class TestCentredMoment:
    @pytest.mark.parametrize("rho", [1.0, 1.3, 2.0, 3.5])
    def test_symmetric_two_atom(self, rho):
        s, c = centred_moment(DiscreteMeasure1D([-3.0, 3.0], [0.5, 0.5]), rho)
        assert s == pytest.approx(3.0, rel=1e-12)
        if rho > 1:
            assert abs(c) < 1e-9

    def test_dirac(self):
        assert centred_moment(DiscreteMeasure1D.dirac(4.0), 1.7)[0] == 0.0
        assert centred_moment(DiscreteMeasureND.dirac([1.0, 2.0]), 1.7)[0] == 0.0

    def test_rho_two_is_std(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            pts = rng.normal(size=(6, 3))
            w = rng.dirichlet(np.ones(6))
            m = DiscreteMeasureND(pts, w)
            s, c = centred_moment(m, 2.0)
            np.testing.assert_allclose(c, w @ pts, atol=1e-14)
            var = w @ np.sum((pts - w @ pts) ** 2, axis=1)
            assert s == pytest.approx(math.sqrt(var), rel=1e-12)

    def test_rho_one_left_median(self):
        m = DiscreteMeasure1D([0.0, 1.0, 2.0, 3.0], [0.25] * 4)
        s, c = centred_moment(m, 1.0)
        assert c == 1.0 and s == pytest.approx(1.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            centred_moment(SYM, 0.5)

    @pytest.mark.parametrize("rho", [1.0, 1.5, 2.5])
    @pytest.mark.parametrize("r", [1.0, 2.0, 3.0, math.inf])
    def test_nd_global_minimum(self, rho, r):
        rng = np.random.default_rng(int(10 * rho + r if math.isfinite(r) else 99))
        norm = NormSpec(r)
        for _ in range(4):
            m = DiscreteMeasureND(rng.normal(size=(7, 2)), rng.dirichlet(np.ones(7)))
            s, c = centred_moment(m, rho, norm)
            assert s**rho <= moment_about(m, m.mean(), rho, norm) * (1 + 1e-12)
            for a in m.points:
                assert s**rho <= moment_about(m, a, rho, norm) * (1 + 1e-12)
            if not (rho == 1.0 and r in (1.0, math.inf)):
                _local_opt_check(m, rho, norm, s, c, rng)

    def test_translation_and_scaling(self):
        rng = np.random.default_rng(3)
        for rho in (1.0, 1.5, 3.0):
            pts = rng.normal(size=(5, 2))
            w = rng.dirichlet(np.ones(5))
            s0, _ = centred_moment(DiscreteMeasureND(pts, w), rho)
            s1, _ = centred_moment(DiscreteMeasureND(pts + [3.0, -7.0], w), rho)
            s2, _ = centred_moment(DiscreteMeasureND(2.5 * pts, w), rho)
            assert s1 == pytest.approx(s0, rel=1e-8)
            assert s2 == pytest.approx(2.5 * s0, rel=1e-8)

    def test_1d_matches_nd_embedding(self):
        rng = np.random.default_rng(4)
        for rho in (1.0, 1.7, 2.0, 3.0):
            m = DiscreteMeasure1D(rng.normal(size=6), rng.dirichlet(np.ones(6)))
            s1, _ = centred_moment(m, rho)
            s2, _ = centred_moment(m.as_nd().embed(2), rho, EUCLIDEAN)
            assert s2 == pytest.approx(s1, rel=1e-8)
