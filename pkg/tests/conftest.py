"""Shared oracles for the test suite.

Everything here is deliberately naive: explicit loops, dictionaries and
matrix products, sharing no code with the package's recursions.
"""

import itertools
import math

import numpy as np
import pytest


def kron_matrix(n):
    """``[[1,1],[0,1]]^{(x)log2 n}`` built from the bit rule ``(i & j) == i``."""
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    return ((i & j) == i).astype(np.uint8)


def gf2_apply(x):
    """``G_N x`` by explicit matrix-vector product mod 2 (rows of ``x``)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.int64))
    g = kron_matrix(x.shape[1]).astype(np.int64)
    return ((x @ g.T) % 2).astype(np.uint8)


def all_words(n):
    """All length-``n`` bit tuples, first coordinate most significant."""
    return list(itertools.product((0, 1), repeat=n))


def brute_u_table(p_xs, n):
    """``P(u, s)`` for ``u = G_n x`` as a dict keyed by (u tuple, s tuple)."""
    ns = p_xs.shape[1]
    table = {}
    for x in all_words(n):
        u = tuple(int(b) for b in gf2_apply(x)[0])
        for s in itertools.product(range(ns), repeat=n):
            p = 1.0
            for a, b in zip(x, s):
                p *= p_xs[a, b]
            table[(u, s)] = table.get((u, s), 0.0) + p
    return table


def brute_conditional(table, i):
    """``{(prefix, s): P(u_i = 1 | prefix, s)}`` with zero-mass contexts omitted."""
    num, den = {}, {}
    for (u, s), p in table.items():
        key = (u[:i], s)
        den[key] = den.get(key, 0.0) + p
        if u[i]:
            num[key] = num.get(key, 0.0) + p
    return {k: num.get(k, 0.0) / v for k, v in den.items() if v > 0}


def brute_profile(p_xs, n):
    """``H(U_i | U^{i-1}, S^n)`` from marginal entropies of the brute table."""
    table = brute_u_table(p_xs, n)

    def h_of(i):
        acc = {}
        for (u, s), p in table.items():
            acc[(u[:i], s)] = acc.get((u[:i], s), 0.0) + p
        return -sum(p * math.log2(p) for p in acc.values() if p > 0)

    hs = [h_of(i) for i in range(n + 1)]
    return np.array([hs[i + 1] - hs[i] for i in range(n)])


def h2(p):
    return 0.0 if p in (0.0, 1.0) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
