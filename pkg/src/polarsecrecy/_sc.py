"""Log-likelihood-ratio kernels for successive cancellation.

All LLRs are natural-log ratios ``log P(bit=0, obs) - log P(bit=1, obs)``.
Infinite values encode certainty; NaN marks an observation that has zero
probability under the model.
"""

import numpy as np

LN2 = np.log(2.0)


def boxplus(a, b):
    """Exact check-node combine: LLR of ``x1 ^ x2`` from the LLRs of x1, x2.

    ``sign(a) sign(b) min(|a|, |b|) + log((1 + e^-|a+b|) / (1 + e^-|a-b|))``,
    evaluated in place; the correction vanishes when either input is infinite.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        s = np.add(a, b)
        d = np.subtract(a, b)
        for t in (s, d):
            np.abs(t, out=t)
            np.negative(t, out=t)
            np.exp(t, out=t)
            t += 1.0
        s /= d
        np.log(s, out=s)
        s[np.isnan(s)] = 0.0
        mag = np.minimum(np.abs(a), np.abs(b))
        mag *= np.sign(a) * np.sign(b)
        mag += s
        return mag


def varnode(top, bot, a):
    """Variable-node combine given the already-decided partial sum ``a``."""
    with np.errstate(invalid="ignore"):
        return bot + np.where(a.astype(bool), -top, top)


def prob_one(llr):
    """``P(bit = 1)`` from an LLR; NaN stays NaN."""
    return 0.5 * (1.0 - np.tanh(0.5 * llr))


def bits_of_surprise(llr, bits):
    """``-log2 P(bit = bits)`` computed stably from the LLR."""
    s = np.where(bits.astype(bool), llr, -llr)
    with np.errstate(over="ignore"):
        return np.logaddexp(0.0, s) / LN2


def sc_pass(llr, decide):
    """Run one successive-cancellation pass over a batch.

    Parameters
    ----------
    llr : ndarray, shape (B, N)
        Per-position channel LLRs for the ``x`` coordinates.
    decide : callable
        ``decide(i, llr_i) -> bits`` with ``llr_i`` of shape ``(B,)``; chooses
        ``u_i`` once its exact conditional is known.

    Returns
    -------
    dec_llr : ndarray, shape (B, N)
        LLR of ``P(u_i | u^{i-1}, obs)`` at each position.
    u : ndarray of uint8, shape (B, N)
        The realized ``u`` sequence.
    """
    llr = np.asarray(llr, dtype=np.float64)
    if llr.ndim != 2:
        raise ValueError("sc_pass expects a (batch, N) LLR array")
    b, n = llr.shape
    dec = np.empty((b, n))
    u = np.empty((b, n), dtype=np.uint8)

    def rec(lam, offset):
        size = lam.shape[1]
        if size == 1:
            li = lam[:, 0]
            dec[:, offset] = li
            bit = np.asarray(decide(offset, li), dtype=np.uint8)
            u[:, offset] = bit
            return bit[:, None]
        h = size // 2
        top, bot = lam[:, :h], lam[:, h:]
        a = rec(boxplus(top, bot), offset)
        c = rec(varnode(top, bot, a), offset + h)
        return np.concatenate([a ^ c, c], axis=1)

    rec(llr, 0)
    return dec, u
