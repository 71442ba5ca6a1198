"""
Private channel coding: the key-agreement scheme run in reverse.

The encoder places the message on the key coordinates, simulates the other
outer coordinates level by level, then simulates the inner public bits of
every block before applying ``G_L``. Decoding is Bob's side of key agreement.
"""

from dataclasses import dataclass, field

import numpy as np

from .bitchan import _context_index
from .codec import simulate_deterministic_positions, simulate_uniform_positions
from .polar import transform
from .ska import bob_inner, expand_public, extract, reduce_public


@dataclass
class PccRecord:
    """Everything the encoder simulated, kept for replay and audit."""

    outer_bits: np.ndarray
    inner_bits: np.ndarray
    flagged: np.ndarray
    t: np.ndarray = field(repr=False, default=None)


def _level_llr(code, t_prev, j):
    model = code.level_model[j]
    p1 = np.asarray(model["p1"], dtype=np.float64)
    ctx = _context_index(t_prev, j, model["depth"])
    p = p1[ctx]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log1p(-p) - np.log(p)


def _message_slices(code):
    out, start = [], 0
    for f in code.outer_sets:
        out.append(slice(start, start + len(f)))
        start += len(f)
    return out


def pcc_encode(m, code, rng, reduce=False):
    """Encode messages ``m`` (B, J) into channel inputs ``x`` (B, N).

    Returns ``(x, public, record)``. With ``reduce=True`` the G-set bits are
    fixed to zero and ``public`` carries only the I-set bits.
    """
    m = np.atleast_2d(np.asarray(m, dtype=np.uint8))
    if m.shape[1] != code.J:
        raise ValueError(f"message length {m.shape[1]} does not match J = {code.J}")
    b, K, M, L = m.shape[0], code.K, code.M, code.L
    t = np.zeros((b, K, M), dtype=np.uint8)
    u = np.zeros((b, K, M), dtype=np.uint8)
    flagged = np.zeros(b, dtype=bool)
    for j, sl in enumerate(_message_slices(code)):
        # per-block context: lower levels of the same block, (B, M, j)
        lam = _level_llr(code, t[:, :j, :].transpose(0, 2, 1), j)
        res = simulate_deterministic_positions(lam, code.outer_sets[j], m[:, sl], rng)
        u[:, j] = res.bits
        t[:, j] = transform(res.bits)
        flagged |= res.flagged
    tb = t.transpose(0, 2, 1).reshape(b * M, K)
    fixed_pos = code.E
    fixed_val = tb
    if reduce:
        fixed_pos = np.concatenate([code.E, code.G])
        fixed_val = np.concatenate([tb, np.zeros((b * M, len(code.G)), np.uint8)], axis=1)
    inner = simulate_uniform_positions(code.p_x, L, fixed_pos, fixed_val, rng)
    v = inner.bits
    x = transform(v).reshape(b, M * L)
    public = v[:, code.Ec].reshape(b, M, len(code.Ec))
    if reduce:
        public, _ = reduce_public(public, code)
    flagged |= inner.flagged.reshape(b, M).any(axis=1)
    record = PccRecord(u, v[:, code.Ec].reshape(b, M, -1), flagged, t)
    return x, public, record


def pcc_decode(y, public, code, reduced=False):
    """Bob's message estimate ``(m_hat, failed)``; never reads Eve's output."""
    public = np.asarray(public, dtype=np.uint8)
    if reduced:
        public = expand_public(public, code)
    t_hat, failed = bob_inner(y, public, code)
    return extract(transform(t_hat), code), failed


def transmit(x, channel, rng):
    """Pass ``x`` through the wiretap channel; returns ``(y, z)``."""
    x = np.asarray(x, dtype=np.int64)
    w = channel.transition
    ny, nz = w.shape[1], w.shape[2]
    cdf = np.cumsum(w.reshape(w.shape[0], ny * nz), axis=1)
    r = rng.random(x.shape)
    idx = (r[..., None] > cdf[x]).sum(axis=-1)
    idx = np.minimum(idx, ny * nz - 1)
    return idx // nz, idx % nz
