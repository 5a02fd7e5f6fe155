import numpy as np
import pytest
from scipy.optimize import linprog

from martwass.examples import random_cx_pair


def highs_transport(C, p, q):
    """Optimal transport value by an independent solver."""
    n, m = C.shape
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([p, q]), method="highs")
    assert res.status == 0
    return res.fun


def highs_martingale(x, p, y, q, C):
    """Martingale transport value by an independent solver; None when infeasible.

    x, y are (n, d) and (m, d) point arrays.
    """
    x, y = np.atleast_2d(x), np.atleast_2d(y)
    n, m, d = x.shape[0], y.shape[0], x.shape[1]
    rows, rhs = [], []
    for i in range(n):
        r = np.zeros((n, m))
        r[i] = 1.0
        rows.append(r.ravel())
        rhs.append(p[i])
        for k in range(d):
            r = np.zeros((n, m))
            r[i] = y[:, k] - x[i, k]
            rows.append(r.ravel())
            rhs.append(0.0)
    for j in range(m):
        r = np.zeros((n, m))
        r[:, j] = 1.0
        rows.append(r.ravel())
        rhs.append(q[j])
    res = linprog(np.asarray(C).ravel(), A_eq=np.array(rows), b_eq=rhs, method="highs")
    if res.status == 2:
        return None
    assert res.status == 0
    return res.fun


@pytest.fixture
def pairs_1d():
    return [random_cx_pair(seed, 5, 4, 1) for seed in range(20)]


@pytest.fixture
def pairs_2d():
    return [random_cx_pair(seed, 4, 3, 2) for seed in range(8)]
