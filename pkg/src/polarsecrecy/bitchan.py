"""
Bit-channel entropy profiles, index-set selection and code construction.

A profile is the sequence ``h_i = H(U_i | U^{i-1}, S^N)`` for ``U = G_N X``
where ``(X_i, S_i)`` are i.i.d. pairs drawn from a 2-D joint table. Three
estimators are provided:

* ``exact_entropy_profile`` evolves the joint law of (bit, posterior LLR)
  through the minus/plus recursion. Merging observations with equal posterior
  is lossless, so the result is exact.
* ``mc_entropy_profile`` averages ``-log2 P(u_i | u^{i-1}, s^N)`` over sampled
  blocks with true-value feed.
* ``bec_entropy_profile`` is the closed-form erasure recursion.
"""

from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from . import _sc
from .polar import is_power_of_two, transform
from .probability import conditional_entropy

EXHAUSTIVE_LIMIT = 2 ** 26
MIN_TRIALS = 100
CHUNK_BLOCKS = 4096
EXACT_OUTER_MAX = 4

ProbPair = namedtuple("ProbPair", "p0 p1")
SCResult = namedtuple("SCResult", "pairs u impossible")


class InfeasibleError(RuntimeError):
    """An exhaustive computation would exceed its size bound."""


# --- observation models -----------------------------------------------------

def llr_table(joint):
    """Per-symbol LLR ``log P(0, s) - log P(1, s)`` of a (2, |S|) joint.

    Symbols impossible under both inputs map to NaN.
    """
    j = np.asarray(joint, dtype=np.float64)
    if j.ndim != 2 or j.shape[0] != 2:
        raise ValueError("model must be a (2, |S|) joint table")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(j[0]) - np.log(j[1])


def prior_llr(p_x):
    """LLR of the input law alone (encoder side, no observation)."""
    p = np.asarray(p_x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return float(np.log(p[0]) - np.log(p[1]))


def true_feed(u):
    u = np.asarray(u, dtype=np.uint8)
    return lambda i, llr: u[:, i]


def argmax_feed(frozen_positions=(), frozen_values=None):
    """Argmax on free positions (ties to 0), lookup on frozen ones.

    ``frozen_values`` has shape (B, len(frozen_positions)).
    """
    col = {int(p): k for k, p in enumerate(frozen_positions)}

    def decide(i, llr):
        k = col.get(i)
        if k is not None:
            return frozen_values[:, k]
        return (llr < 0).astype(np.uint8)

    return decide


def sc_pass(joint, y, decide):
    """Successive-cancellation pass with exact conditionals.

    Parameters
    ----------
    joint : array (2, |S|)
        Per-position model ``P(x_i, s_i)``.
    y : int array, shape (N,) or (B, N)
        Observed side information.
    decide : callable
        Bit source, see :func:`true_feed` and :func:`argmax_feed`.

    Returns
    -------
    SCResult
        ``pairs`` of shape (B, N, 2) holding ``P(U_i = 0 | ...)`` and
        ``P(U_i = 1 | ...)``, realized ``u`` and a per-row ``impossible`` mask.
    """
    y = np.atleast_2d(np.asarray(y))
    if not is_power_of_two(y.shape[1]):
        raise ValueError("block length must be a power of two")
    dec, u = _sc.sc_pass(llr_table(joint)[y], decide)
    p1 = _sc.prob_one(dec)
    impossible = np.isnan(dec).any(axis=1)
    return SCResult(np.stack([1.0 - p1, p1], axis=-1), u, impossible)


# --- profiles ---------------------------------------------------------------

@dataclass
class EntropyProfile:
    """Per-index conditional entropies with provenance.

    ``provenance`` is one of 'exact', 'monte_carlo', 'bec_closed_form'.
    """

    h: np.ndarray
    provenance: str
    trials: int = 0
    std_err: np.ndarray = None
    error_rate: np.ndarray = None

    def __post_init__(self):
        self.h = np.clip(np.asarray(self.h, dtype=np.float64), 0.0, 1.0)

    def __len__(self):
        return len(self.h)

    @property
    def mean(self):
        return float(self.h.mean())

    def to_json(self):
        d = {"provenance": self.provenance, "h": self.h.tolist()}
        if self.trials:
            d["trials"] = int(self.trials)
        if self.std_err is not None:
            d["std_err"] = np.asarray(self.std_err).tolist()
        return d

    @classmethod
    def from_json(cls, d):
        se = d.get("std_err")
        return cls(np.array(d["h"]), d["provenance"], d.get("trials", 0),
                   None if se is None else np.array(se))


class _Atoms:
    """Binary-target channel as classes of equal posterior LLR."""

    __slots__ = ("w0", "w1")

    def __init__(self, w0, w1):
        w0 = np.asarray(w0, dtype=np.float64).ravel()
        w1 = np.asarray(w1, dtype=np.float64).ravel()
        keep = (w0 + w1) > 0
        w0, w1 = w0[keep], w1[keep]
        with np.errstate(divide="ignore"):
            key = np.round(np.log(w0) - np.log(w1), 9)
        uniq, inv = np.unique(key, return_inverse=True)
        self.w0 = np.bincount(inv, weights=w0, minlength=len(uniq))
        self.w1 = np.bincount(inv, weights=w1, minlength=len(uniq))

    def __len__(self):
        return len(self.w0)

    def minus(self):
        a0, a1 = self.w0, self.w1
        return _Atoms(np.outer(a0, a0) + np.outer(a1, a1),
                      np.outer(a0, a1) + np.outer(a1, a0))

    def plus(self):
        a0, a1 = self.w0, self.w1
        # target is the second copy; the decided xor is part of the observation
        same0, same1 = np.outer(a0, a0), np.outer(a1, a1)
        diff0, diff1 = np.outer(a1, a0), np.outer(a0, a1)
        return _Atoms(np.concatenate([same0.ravel(), diff0.ravel()]),
                      np.concatenate([same1.ravel(), diff1.ravel()]))

    def entropy(self):
        tot = self.w0 + self.w1
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = np.where(self.w0 > 0, self.w0 * np.log2(tot / self.w0), 0.0)
            t1 = np.where(self.w1 > 0, self.w1 * np.log2(tot / self.w1), 0.0)
        return float((t0 + t1).sum())

    def error(self):
        return float(np.minimum(self.w0, self.w1).sum())


def _exact_from_atoms(base, n_len, limit):
    work = (2 * len(base)) ** n_len
    if work > limit:
        raise InfeasibleError(
            f"exhaustive profile needs ~{work:.3g} (input, observation) tuples, "
            f"limit {limit:.3g}")
    h, err = [], []

    def rec(ch, size):
        if size == 1:
            h.append(ch.entropy())
            err.append(ch.error())
            return
        rec(ch.minus(), size // 2)
        rec(ch.plus(), size // 2)

    rec(base, n_len)
    return EntropyProfile(np.array(h), "exact", error_rate=np.array(err))


def exact_entropy_profile(joint, n_len, limit=EXHAUSTIVE_LIMIT):
    """Exact ``H(U_i | U^{i-1}, S^N)`` for i.i.d. pairs from a (2, |S|) joint.

    The size bound ``(2 |S'|)^N <= limit`` uses the number ``|S'|`` of
    distinct posteriors among the observation symbols.
    """
    j = np.asarray(joint, dtype=np.float64)
    if j.ndim != 2 or j.shape[0] != 2:
        raise ValueError("exact_entropy_profile needs a binary-input (2, |S|) joint")
    if not is_power_of_two(n_len):
        raise ValueError("block length must be a power of two")
    return _exact_from_atoms(_Atoms(j[0], j[1]), n_len, limit)


def _profile_stats(total, total_sq, errors, count, provenance):
    mean = total / count
    var = np.maximum(total_sq / count - mean ** 2, 0.0)
    se = np.sqrt(var / max(count - 1, 1))
    return EntropyProfile(mean, provenance, int(count), se, errors / count)


def mc_entropy_profile(joint, n_len, trials, rng, chunk=CHUNK_BLOCKS):
    """Monte Carlo profile with per-index standard errors.

    Each trial samples one block of ``n_len`` pairs and averages
    ``-log2 P(u_i | u^{i-1}, s^N)`` under true-value feed. The argmax mismatch
    frequency per index is recorded as ``error_rate``.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")
    j = np.asarray(joint, dtype=np.float64)
    table = llr_table(j)
    flat = j.ravel() / j.sum()
    total = np.zeros(n_len)
    total_sq = np.zeros(n_len)
    errors = np.zeros(n_len)
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        idx = rng.choice(flat.size, size=(b, n_len), p=flat)
        x, s = np.divmod(idx, j.shape[1])
        u = transform(x.astype(np.uint8))
        dec, _ = _sc.sc_pass(table[s], true_feed(u))
        ok = ~np.isnan(dec).any(axis=1)
        bits = _sc.bits_of_surprise(dec[ok], u[ok])
        total += bits.sum(axis=0)
        total_sq += (bits ** 2).sum(axis=0)
        wrong = (dec[ok] < 0) != u[ok].astype(bool)
        errors += wrong.sum(axis=0)
        done += b
    return _profile_stats(total, total_sq, errors, trials, "monte_carlo")


def bec_entropy_profile(erasure, n_len):
    """Closed-form profile of uniform X seen through an erasure channel."""
    if not 0.0 <= erasure <= 1.0:
        raise ValueError("erasure probability must lie in [0, 1]")
    if not is_power_of_two(n_len):
        raise ValueError("block length must be a power of two")
    z = np.array([float(erasure)])
    while len(z) < n_len:
        z = np.stack([2.0 * z - z * z, z * z], axis=1).ravel()
    return EntropyProfile(z, "bec_closed_form")


# --- set selection ----------------------------------------------------------

@dataclass
class SetPartition:
    """Random set R, deterministic set D and the unpolarized rest I."""

    R: np.ndarray
    D: np.ndarray
    I: np.ndarray

    @property
    def n(self):
        return len(self.R) + len(self.D) + len(self.I)

    def to_json(self):
        return {"R": self.R.tolist(), "D": self.D.tolist(), "I": self.I.tolist()}

    @classmethod
    def from_json(cls, d):
        return cls(*(np.array(d[k], dtype=np.int64) for k in "RDI"))


def select_sets(profile, eps):
    """Threshold a profile: ``R = {h >= 1-eps}``, ``D = {h <= eps}``."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    h = profile.h if isinstance(profile, EntropyProfile) else np.clip(np.asarray(profile, float), 0, 1)
    idx = np.arange(len(h))
    r = h >= 1.0 - eps
    d = h <= eps
    return SetPartition(idx[r], idx[d], idx[~(r | d)])


# --- code construction ------------------------------------------------------

@dataclass
class CodeSpec:
    """Everything the two protocols need, produced by :func:`construct_code`.

    ``outer_sets[j]`` holds the F-set of level ``j`` (0-based, level ``j`` is
    the ``j``-th smallest index of ``E_K``). ``level_model`` holds the
    encoder-side conditional ``P(T_j = 1 | previous levels)`` as a table over
    the last ``depth_j`` level bits (most recent level in the lowest bit).
    """

    L: int
    M: int
    eps1: float
    eps2: float
    mode: str
    trials: int
    seed: int
    source_joint: np.ndarray
    inner: SetPartition
    inner_profile: EntropyProfile
    eve_profile: EntropyProfile
    outer_profiles: list
    outer_sets: list
    level_model: list
    source_hash: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.L * self.M

    @property
    def E(self):
        return self.inner.D

    @property
    def Ec(self):
        return np.setdiff1d(np.arange(self.L), self.inner.D)

    @property
    def G(self):
        return self.inner.R

    @property
    def K(self):
        return len(self.inner.D)

    @property
    def J(self):
        return int(sum(len(f) for f in self.outer_sets))

    @property
    def rate(self):
        return self.J / self.N

    @property
    def p_x(self):
        return self.source_joint.sum(axis=(1, 2))

    @property
    def bob_model(self):
        return self.source_joint.sum(axis=2)

    @property
    def eve_model(self):
        return self.source_joint.sum(axis=1)

    def key_coordinates(self):
        """(level, index) pairs of the key bits, level-major and ascending."""
        return [(j, int(i)) for j, f in enumerate(self.outer_sets) for i in f]

    def verify(self):
        if self.inner_profile is not None:
            again = select_sets(self.inner_profile, self.eps1)
            if not np.array_equal(again.D, self.inner.D):
                raise ValueError("stored E_K does not match the inner profile's D-set")
        if len(self.outer_sets) != self.K:
            raise ValueError("one outer set per level of E_K is required")
        if not 0 <= self.J <= self.K * self.M:
            raise ValueError("J out of range")
        for f in self.outer_sets:
            if len(f) and (f.min() < 0 or f.max() >= self.M):
                raise ValueError("outer set index out of range")


def _level_model_from_counts(counts1, counts, depth):
    p1 = (counts1 + 0.5) / (counts + 1.0)
    p1 = np.where(counts > 0, p1, np.nan)
    return {"depth": int(depth), "p1": p1.tolist()}


def _pack_bits(bits):
    """Integer code of bit columns, column 0 in the lowest position."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    weights = 1 << np.arange(bits.shape[-1], dtype=np.int64)
    return bits @ weights


def _context_index(t, j, depth):
    # t: (..., K) bits of all levels; most recent level (j-1) in the lowest bit
    if depth == 0:
        return np.zeros(t.shape[:-1], dtype=np.int64)
    prev = t[..., j - 1::-1][..., :depth] if j - 1 >= 0 else t[..., :0]
    return _pack_bits(prev)


def _all_bits(n):
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def _enumerate_blocks(p_xz, L):
    """All (x^L, z^L) with probabilities; ``x`` rows are bit vectors."""
    nz = p_xz.shape[1]
    xs = _all_bits(L)
    zi = np.arange(nz ** L)
    zs = (zi[:, None] // nz ** np.arange(L)) % nz
    prob = np.ones((len(xs), len(zs)))
    for i in range(L):
        prob *= p_xz[xs[:, i]][:, zs[:, i]]
    return xs, zs, prob


def _exact_outer(code_E, code_Ec, p_xz, L, M, limit):
    xs, zs, prob = _enumerate_blocks(p_xz, L)
    v = transform(xs)
    t = v[:, code_E]
    c = v[:, code_Ec]
    nz = p_xz.shape[1]
    z_code = (zs * nz ** np.arange(L)).sum(axis=1)
    profiles, models = [], []
    px_v = prob.sum(axis=1)
    for j in range(len(code_E)):
        obs_bits = np.concatenate([t[:, :j], c], axis=1)
        obs = _pack_bits(obs_bits)[:, None] * (nz ** L) + z_code[None, :]
        tj = np.broadcast_to(t[:, j][:, None], prob.shape)
        uniq, inv = np.unique(obs.ravel(), return_inverse=True)
        w0 = np.bincount(inv, weights=np.where(tj == 0, prob, 0).ravel(), minlength=len(uniq))
        w1 = np.bincount(inv, weights=np.where(tj == 1, prob, 0).ravel(), minlength=len(uniq))
        profiles.append(_exact_from_atoms(_Atoms(w0, w1), M, limit))
        ctx = _pack_bits(t[:, :j][:, ::-1])
        n_ctx = 2 ** j
        mass = np.bincount(ctx, weights=px_v, minlength=n_ctx)
        ones = np.bincount(ctx, weights=px_v * t[:, j], minlength=n_ctx)
        with np.errstate(invalid="ignore", divide="ignore"):
            p1 = np.where(mass > 0, ones / mass, np.nan)
        models.append({"depth": j, "p1": p1.tolist()})
    return profiles, models


def _mc_outer(code_E, p_xz, L, M, trials, seq, depth_cap, chunk_trials):
    K = len(code_E)
    table = llr_table(p_xz)
    flat = p_xz.ravel() / p_xz.sum()
    nz = p_xz.shape[1]
    tot = np.zeros((K, M))
    tot_sq = np.zeros((K, M))
    err = np.zeros((K, M))
    eve_tot = np.zeros(L)
    eve_sq = np.zeros(L)
    eve_err = np.zeros(L)
    depths = [min(j, depth_cap) for j in range(K)]
    c1 = [np.zeros(2 ** d) for d in depths]
    cn = [np.zeros(2 ** d) for d in depths]
    done, chunk_id = 0, 0
    while done < trials:
        b = min(chunk_trials, trials - done)
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seq.entropy, spawn_key=seq.spawn_key + (chunk_id,)))
        idx = rng.choice(flat.size, size=(b * M, L), p=flat)
        x, z = np.divmod(idx, nz)
        v = transform(x.astype(np.uint8))
        dec, _ = _sc.sc_pass(table[z], true_feed(v))
        bits = _sc.bits_of_surprise(dec, v)
        eve_tot += bits.sum(axis=0)
        eve_sq += (bits ** 2).sum(axis=0)
        eve_err += ((dec < 0) != v.astype(bool)).sum(axis=0)
        if K:
            lam = dec[:, code_E].reshape(b, M, K).transpose(0, 2, 1).reshape(b * K, M)
            tt = v[:, code_E].reshape(b, M, K)
            uu = transform(tt.transpose(0, 2, 1)).reshape(b * K, M)
            odec, _ = _sc.sc_pass(lam, true_feed(uu))
            ob = _sc.bits_of_surprise(odec, uu).reshape(b, K, M)
            tot += ob.sum(axis=0)
            tot_sq += (ob ** 2).sum(axis=0)
            err += ((odec < 0) != uu.astype(bool)).reshape(b, K, M).sum(axis=0)
            flat_t = tt.reshape(b * M, K)
            for j in range(K):
                ctx = _context_index(flat_t, j, depths[j])
                cn[j] += np.bincount(ctx, minlength=2 ** depths[j])
                c1[j] += np.bincount(ctx, weights=flat_t[:, j], minlength=2 ** depths[j])
        done += b
        chunk_id += 1
    profiles = [_profile_stats(tot[j], tot_sq[j], err[j], trials, "monte_carlo") for j in range(K)]
    models = [_level_model_from_counts(c1[j], cn[j], depths[j]) for j in range(K)]
    eve = _profile_stats(eve_tot, eve_sq, eve_err, trials * M, "monte_carlo")
    return profiles, models, eve


def construct_code(source, L, M, eps1=0.01, eps2=0.01, mode="mc", trials=10000, seed=0,
                   context_depth=3, limit=EXHAUSTIVE_LIMIT):
    """Build the inner partition and per-level outer sets for both protocols.

    Parameters
    ----------
    source : WiretapSource
        Binary-input joint ``P(x, y, z)``.
    L, M : int
        Inner and outer block lengths (powers of two).
    eps1, eps2 : float
        Inner and outer thresholds.
    mode : {'exact', 'mc'}
        Exhaustive enumeration (small ``L``) or Monte Carlo estimation.
    trials : int
        Monte Carlo blocks for the inner profile and ``M``-block super-source
        samples for the outer profiles.
    seed : int
        Master seed; every random stream is derived from it.
    context_depth : int
        Number of previous levels the mc-mode encoder model conditions on.

    Returns
    -------
    CodeSpec
    """
    if source.joint.shape[0] != 2:
        raise ValueError("construction supports binary X only")
    if not (is_power_of_two(L) and is_power_of_two(M)):
        raise ValueError("L and M must be powers of two")
    if mode not in ("exact", "mc"):
        raise ValueError(f"unknown mode {mode!r}")
    p_xy, p_xz = source.p_xy, source.p_xz
    master = np.random.SeedSequence(seed)
    inner_seq, outer_seq = master.spawn(2)
    if mode == "exact":
        if L > EXACT_OUTER_MAX or M > EXACT_OUTER_MAX:
            raise InfeasibleError(
                f"exact mode supports L, M <= {EXACT_OUTER_MAX}, got L={L}, M={M}")
        inner_profile = exact_entropy_profile(p_xy, L, limit)
        eve_profile = exact_entropy_profile(p_xz, L, limit)
    else:
        if trials < MIN_TRIALS:
            raise ValueError(f"need at least {MIN_TRIALS} construction trials")
        inner_profile = mc_entropy_profile(p_xy, L, trials, np.random.default_rng(inner_seq))
    inner = select_sets(inner_profile, eps1)
    E = inner.D
    Ec = np.setdiff1d(np.arange(L), E)
    if mode == "exact":
        outer_profiles, models = _exact_outer(E, Ec, p_xz, L, M, limit)
    else:
        chunk = max(1, CHUNK_BLOCKS // M // max(1, L // 256))
        outer_profiles, models, eve_profile = _mc_outer(
            E, p_xz, L, M, trials, outer_seq, context_depth, chunk)
    outer_sets = [select_sets(p, eps2).R for p in outer_profiles]
    code = CodeSpec(L, M, float(eps1), float(eps2), mode, int(trials) if mode == "mc" else 0,
                    int(seed), np.array(source.joint), inner, inner_profile, eve_profile,
                    outer_profiles, outer_sets, models)
    code.meta["h_x_given_y"] = conditional_entropy(p_xy)
    code.meta["h_x_given_z"] = conditional_entropy(p_xz)
    return code
