"""
Polarization transform over GF(2).

``transform`` computes ``u = G_N x`` with ``G_N = [[1, 1], [0, 1]]^{(x) log N}``
in natural (non bit-reversed) order. Index 0 corresponds to the first
coordinate. The transform acts on the last axis, so a ``(K, M)`` array is
transformed row by row, which is exactly the multilevel form used by the
outer layer.
"""

import numpy as np


class OpCounter:
    """Counts elementary bit-xor operations performed by the butterfly."""

    def __init__(self):
        self.xors = 0

    def reset(self):
        self.xors = 0


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def _check_length(n):
    if not is_power_of_two(n):
        raise ValueError(f"block length must be a power of two, got {n}")


def transform(x, counter=None):
    """Apply ``G_N`` to the last axis of ``x``.

    Parameters
    ----------
    x : array-like of {0, 1}
        Shape ``(..., N)`` with ``N`` a power of two.
    counter : OpCounter, optional
        Incremented by the number of xor operations actually performed.

    Returns
    -------
    ndarray of uint8
        Same shape as ``x``.
    """
    u = np.array(x, dtype=np.uint8, copy=True)
    if u.ndim == 0:
        raise ValueError("transform needs at least one axis")
    n = u.shape[-1]
    _check_length(n)
    lead = u.shape[:-1]
    stride = n // 2
    while stride >= 1:
        # [[G, G], [0, G]]: top half absorbs bottom half, widest stride first
        view = u.reshape(lead + (n // (2 * stride), 2, stride))
        view[..., 0, :] ^= view[..., 1, :]
        if counter is not None:
            counter.xors += (u.size // n) * (n // 2)
        stride //= 2
    return u


def inverse_transform(u, counter=None):
    """Inverse of :func:`transform`; ``G_N`` is an involution over GF(2)."""
    return transform(u, counter)


def transform_multilevel(t, counter=None):
    """Apply ``G_M`` independently to each of the ``K`` rows of ``t``.

    ``t`` must be rectangular. ``K = 0`` returns an empty ``(0, M)`` array.
    """
    if isinstance(t, np.ndarray):
        arr = t
    else:
        rows = [np.asarray(r) for r in t]
        if len({r.shape for r in rows}) > 1:
            raise ValueError("ragged BitMatrix: rows have different lengths")
        arr = np.array(rows, dtype=np.uint8) if rows else np.zeros((0, 0), np.uint8)
    if arr.ndim != 2:
        raise ValueError("BitMatrix must be two-dimensional")
    if arr.shape[0] == 0:
        return np.zeros(arr.shape, dtype=np.uint8)
    return transform(arr, counter)


def generator_matrix(n):
    """Explicit ``G_N`` as a dense 0/1 matrix (small ``N`` only)."""
    _check_length(n)
    g = np.ones((1, 1), dtype=np.uint8)
    kernel = np.array([[1, 1], [0, 1]], dtype=np.uint8)
    while g.shape[0] < n:
        g = np.kron(kernel, g)
    return g
