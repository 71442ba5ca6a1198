"""
One-way secret-key agreement: Alice's map, the public message, Bob's map.

Arrays carry a leading batch axis so many protocol runs share one decoder
pass; a single run is a batch of one. Sequences of length ``N = L M`` are
split into ``M`` consecutive inner blocks of length ``L``.
"""

from dataclasses import dataclass

import numpy as np

from .codec import FrozenMap, sc_decode
from .polar import transform


class PublicMismatch(ValueError):
    """A public block disagrees with the code's fixed G-set assignment."""


@dataclass
class SkaTranscript:
    key_alice: np.ndarray
    key_bob: np.ndarray
    public: np.ndarray
    failed: np.ndarray

    @property
    def mismatch(self):
        return self.failed | (self.key_alice != self.key_bob).any(axis=-1)


def _blocks(seq, code):
    seq = np.atleast_2d(np.asarray(seq))
    if seq.shape[1] != code.N:
        raise ValueError(f"sequence length {seq.shape[1]} does not match N = {code.N}")
    return seq.reshape(seq.shape[0], code.M, code.L)


def _key_index(code):
    coords = code.key_coordinates()
    lv = np.array([c[0] for c in coords], dtype=np.int64)
    ps = np.array([c[1] for c in coords], dtype=np.int64)
    return lv, ps


def extract(u, code):
    """Key/message coordinates of the outer array ``u`` (B, K, M)."""
    lv, ps = _key_index(code)
    return u[:, lv, ps].astype(np.uint8)


def ska_alice(x, code):
    """Alice's side of the protocol.

    Parameters
    ----------
    x : {0,1} array (N,) or (B, N)
    code : CodeSpec

    Returns
    -------
    key : (B, J) uint8
    public : (B, M, L - K) uint8
        ``c = v[E_K^c]`` for every inner block.
    t : (B, K, M) uint8
        The outer-layer input, one row per level.
    """
    xb = _blocks(x, code).astype(np.uint8)
    v = transform(xb)
    t = v[:, :, code.E].transpose(0, 2, 1)
    public = v[:, :, code.Ec]
    u = transform(t)
    return extract(u, code), public, t


def bob_inner(y, public, code, model=None):
    """Recover ``t`` (B, K, M) from Bob's observations and the public blocks.

    Returns ``(t_hat, failed)`` with ``failed`` a per-run mask.
    """
    yb = _blocks(y, code)
    b = yb.shape[0]
    public = np.asarray(public, dtype=np.uint8).reshape(b * code.M, len(code.Ec))
    frozen = FrozenMap(code.Ec, public)
    res = sc_decode(yb.reshape(b * code.M, code.L), frozen,
                    code.bob_model if model is None else model)
    v_hat = res.bits.reshape(b, code.M, code.L)
    failed = res.failed.reshape(b, code.M).any(axis=1)
    return v_hat[:, :, code.E].transpose(0, 2, 1), failed


def ska_bob(y, public, code):
    """Bob's key estimate ``(key, failed)``; failed runs still return a key."""
    t_hat, failed = bob_inner(y, public, code)
    return extract(transform(t_hat), code), failed


def run_ska(x, y, code):
    key_a, public, _ = ska_alice(x, code)
    key_b, failed = ska_bob(y, public, code)
    return SkaTranscript(key_a, key_b, public, failed)


# --- public-message reduction ----------------------------------------------

def _reduction_index(code):
    ec = code.Ec
    keep = ~np.isin(ec, code.G)
    return keep


def reduce_public(c, code):
    """Keep only the I-set bits of public blocks ``c`` (..., L - K).

    Returns ``(reduced, mismatch)`` where ``mismatch`` marks blocks whose
    G-set bits differ from the fixed all-zero assignment.
    """
    c = np.asarray(c, dtype=np.uint8)
    keep = _reduction_index(code)
    mismatch = (c[..., ~keep] != 0).any(axis=-1)
    return c[..., keep], mismatch


def expand_public(reduced, code):
    """Inverse of :func:`reduce_public` with the G-set bits fixed to zero."""
    reduced = np.asarray(reduced, dtype=np.uint8)
    keep = _reduction_index(code)
    if reduced.shape[-1] != int(keep.sum()):
        raise ValueError("reduced block length does not match |I|")
    full = np.zeros(reduced.shape[:-1] + (len(keep),), dtype=np.uint8)
    full[..., keep] = reduced
    return full
