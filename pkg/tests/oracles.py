"""Slow, obviously-correct reference implementations used by the tests."""

import math
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as P


def exact_normal_equations(y, x):
    """Solve (X'X) b = X'y in exact rational arithmetic (Gaussian elimination)."""
    X = [[Fraction(1), Fraction(float(v))] for v in x]
    Y = [Fraction(float(v)) for v in y]
    q = 2
    A = [[sum(r[i] * r[j] for r in X) for j in range(q)] + [sum(r[i] * yy for r, yy in zip(X, Y))]
         for i in range(q)]
    for c in range(q):
        piv = next(r for r in range(c, q) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        for r in range(q):
            if r != c and A[r][c] != 0:
                factor = A[r][c] / A[c][c]
                A[r] = [a - factor * b for a, b in zip(A[r], A[c])]
    return [float(A[i][q] / A[i][i]) for i in range(q)]


def innovations_limit(gamma, n_iter=400):
    """Innovations algorithm run to its fixed point, banded for an MA(q).

    Returns (theta_1..theta_q, v) from the last iteration.
    """
    q = len(gamma) - 1
    g = lambda h: gamma[abs(h)] if abs(h) <= q else 0.0  # noqa: E731
    v = [g(0)]
    th = [[]]
    for n in range(1, n_iter + 1):
        row = [0.0] * (n + 1)  # row[j] = theta_{n,j}
        for k in range(max(0, n - q), n):
            acc = g(n - k)
            for j in range(max(0, n - q, k - q), k):
                acc -= th[k][k - j] * row[n - j] * v[j]
            row[n - k] = acc / v[k]
        th.append(row)
        v.append(g(0) - sum(row[n - j] ** 2 * v[j] for j in range(max(0, n - q), n)))
    last = th[-1]
    return np.array(last[1 : q + 1]), v[-1]


def random_invertible(rng, q):
    roots = []
    while len(roots) < q:
        r = rng.uniform(1.3, 4.0)
        if q - len(roots) >= 2 and rng.random() < 0.5:
            phase = rng.uniform(0.2, math.pi - 0.2)
            z = r * np.exp(1j * phase)
            roots += [z, np.conj(z)]
        else:
            roots.append(r * rng.choice([-1, 1]))
    c = np.real(P.polyfromroots(roots))
    return c / c[0]
