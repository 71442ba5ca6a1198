"""
Successive-cancellation decoder and the encoder-side bit simulators.

Encoder simulators run the same recursion with prior-only LLRs, so the
conditional of every simulated bit is exact for the model they are given;
they never see channel outputs.
"""

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from . import _sc
from .bitchan import argmax_feed, llr_table, prior_llr

DecodeResult = namedtuple("DecodeResult", "bits failed")
SampleResult = namedtuple("SampleResult", "bits p_one flagged")


@dataclass
class FrozenMap:
    """Positions whose values the decoder looks up instead of deciding.

    ``values`` has shape (B, len(positions)).
    """

    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.uint8))
        if self.values.shape[1] != len(self.positions):
            raise ValueError("one frozen value per position is required")


def sc_decode(y, frozen, model):
    """Decode ``v`` from observations ``y`` under the per-symbol ``model``.

    Parameters
    ----------
    y : int array (B, L)
        Received symbols (indices into the model's columns).
    frozen : FrozenMap
        Publicly known positions and their values.
    model : array (2, |Y|)
        Joint ``P(x, y)`` of one position.

    Returns
    -------
    DecodeResult
        Hard decisions ``bits`` (B, L) and a ``failed`` mask for rows whose
        observation is impossible under the model.
    """
    y = np.atleast_2d(np.asarray(y))
    llr = llr_table(model)[y]
    decide = argmax_feed(frozen.positions, frozen.values)
    dec, bits = _sc.sc_pass(llr, decide)
    return DecodeResult(bits, np.isnan(dec).any(axis=1))


def _sampling_feed(fixed_positions, fixed_values, rng, p_one, flagged):
    col = {int(p): k for k, p in enumerate(fixed_positions)}

    def decide(i, llr):
        k = col.get(i)
        if k is not None:
            return fixed_values[:, k]
        p1 = _sc.prob_one(llr)
        bad = np.isnan(p1)
        np.logical_or(flagged, bad, out=flagged)
        p1 = np.where(bad, 0.5, p1)
        p_one[:, i] = p1
        return (rng.random(len(p1)) < p1).astype(np.uint8)

    return decide


def _sample_pass(llr, fixed_positions, fixed_values, rng):
    b, n = llr.shape
    p_one = np.full((b, n), np.nan)
    flagged = np.zeros(b, dtype=bool)
    fixed_values = np.atleast_2d(np.asarray(fixed_values, dtype=np.uint8))
    if fixed_values.shape[0] == 1 and b > 1:
        fixed_values = np.repeat(fixed_values, b, axis=0)
    decide = _sampling_feed(fixed_positions, fixed_values, rng, p_one, flagged)
    _, bits = _sc.sc_pass(llr, decide)
    return SampleResult(bits, p_one, flagged)


def simulate_uniform_positions(p_x, n_len, fixed_positions, fixed_values, rng):
    """Inner-encoder simulation of the nearly uniform positions.

    Every position outside ``fixed_positions`` is drawn from its exact
    conditional ``P(v_i | v^{i-1})`` under i.i.d. ``X ~ p_x``.
    Returns a :class:`SampleResult` with the full ``v`` blocks.
    """
    b = np.atleast_2d(fixed_values).shape[0]
    lam = np.full((b, n_len), prior_llr(p_x))
    return _sample_pass(lam, fixed_positions, fixed_values, rng)


def simulate_deterministic_positions(level_llr, fixed_positions, fixed_values, rng):
    """Outer-encoder simulation for one level.

    ``level_llr`` (B, M) is the per-block prior LLR of ``T_j`` given the
    already realized lower levels; positions outside ``fixed_positions`` (the
    message slots) are sampled from their conditionals. Rows whose model
    conditional was undefined fall back to a fair coin and are flagged.
    """
    lam = np.asarray(level_llr, dtype=np.float64)
    flagged = np.isnan(lam).any(axis=1)
    res = _sample_pass(np.nan_to_num(lam, nan=0.0, posinf=np.inf, neginf=-np.inf),
                       fixed_positions, fixed_values, rng)
    return SampleResult(res.bits, res.p_one, res.flagged | flagged)
