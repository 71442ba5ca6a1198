"""
Measurement harness: trial batches, exact secrecy at toy scale, the
proof-chain secrecy bound, polarization tables and super-source checks.
"""

import math
from statistics import NormalDist
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _sc
from .bitchan import InfeasibleError, _all_bits, _pack_bits, prior_llr, select_sets
from .pcc import _level_llr, pcc_decode, pcc_encode, transmit
from .polar import transform
from .probability import WiretapChannel, WiretapSource, conditional_entropy, sample_source
from .ska import reduce_public, ska_alice, ska_bob

EXACT_LIMIT = 2 ** 26


def wilson_interval(k, n, level=0.95):
    """Wilson score interval for a binomial proportion."""
    z = NormalDist().inv_cdf(0.5 + level / 2)
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def trial_rng(seed, index, stream=0):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream, index)))


@dataclass
class TrialReport:
    protocol: str
    N: int
    J: int
    trials: int
    mismatches: int
    failed: int
    public_bits: int
    rows: list = field(repr=False, default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def rate(self):
        return self.J / self.N

    @property
    def mismatch_rate(self):
        return self.mismatches / self.trials if self.trials else 0.0

    @property
    def interval(self):
        return wilson_interval(self.mismatches, self.trials)

    def summary(self):
        lo, hi = self.interval
        return {
            "protocol": self.protocol, "N": self.N, "J": self.J, "rate": self.rate,
            "trials": self.trials, "mismatches": self.mismatches,
            "mismatch_rate": self.mismatch_rate, "wilson95": [lo, hi],
            "decode_failures": self.failed, "public_bits_per_run": self.public_bits,
            **self.meta,
        }


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _as_source(model):
    return model if isinstance(model, WiretapSource) else model.source()


def _as_channel(model):
    return model if isinstance(model, WiretapChannel) else model.channel()


def ska_trial(source, code, seed, index):
    """Source realization ``(x, y, z)`` of trial ``index``."""
    return sample_source(source, code.N, trial_rng(seed, index))


def pcc_trial(channel, code, seed, index, reduce=False, message=None):
    """Message, encoder output and channel outputs of trial ``index``."""
    rng = trial_rng(seed, index)
    if message is None:
        m = rng.integers(0, 2, size=(1, code.J), dtype=np.uint8)
    else:
        m = np.asarray(message, dtype=np.uint8).reshape(1, code.J)
    x, public, rec = pcc_encode(m, code, rng, reduce=reduce)
    y, z = transmit(x, channel, rng)
    return {"m": m[0], "x": x[0], "y": y[0], "z": z[0], "public": public[0],
            "flagged": bool(rec.flagged[0])}


def run_trials(protocol, model, code, trials, seed, threads=1, reduce=False, message=None):
    """Run ``trials`` seeded protocol executions and aggregate.

    ``model`` is a WiretapSource for 'ska' and a WiretapChannel for 'pcc'.
    Trial ``i`` draws all of its randomness from ``(seed, i)``, so the report
    does not depend on scheduling or thread count. Decoding is batched.
    """
    if protocol not in ("ska", "pcc"):
        raise ValueError(f"unknown protocol {protocol!r}")
    n = code.N
    if protocol == "ska":
        source = _as_source(model)
        data = _map(lambda i: ska_trial(source, code, seed, i), range(trials), threads)
        x = np.array([d[0] for d in data]).reshape(trials, n)
        y = np.array([d[1] for d in data]).reshape(trials, n)
        key_a, public, _ = ska_alice(x, code)
        key_b, failed = ska_bob(y, public, code)
        mism = failed | (key_a != key_b).any(axis=1)
        flagged = np.zeros(trials, dtype=bool)
        pub_bits = public.shape[1] * public.shape[2]
        if reduce:
            _, bad = reduce_public(public, code)
            flagged = bad.any(axis=1)
    else:
        channel = _as_channel(model)
        data = _map(lambda i: pcc_trial(channel, code, seed, i, reduce, message),
                    range(trials), threads)
        m = np.array([d["m"] for d in data]).reshape(trials, code.J)
        y = np.array([d["y"] for d in data]).reshape(trials, n)
        public = np.array([d["public"] for d in data])
        flagged = np.array([d["flagged"] for d in data], dtype=bool)
        m_hat, failed = pcc_decode(y, public, code, reduced=reduce)
        mism = failed | (m != m_hat).any(axis=1)
        pub_bits = int(np.prod(public.shape[1:]))
    rows = [{"trial": i, "mismatch": int(mism[i]), "failed": int(failed[i]),
             "flagged": int(flagged[i]), "length": code.J, "public_bits": pub_bits}
            for i in range(trials)]
    meta = {"seed": int(seed), "eps1": code.eps1, "eps2": code.eps2, "L": code.L,
            "M": code.M, "K": code.K, "reduced_public": bool(reduce),
            "flagged": int(flagged.sum())}
    return TrialReport(protocol, n, code.J, trials, int(mism.sum()), int(failed.sum()),
                       pub_bits, rows, meta)


# --- exact secrecy ----------------------------------------------------------

def _sequences(n_sym, length):
    idx = np.arange(n_sym ** length)
    return (idx[:, None] // n_sym ** np.arange(length)) % n_sym


def _check_exact(source, code):
    nx, ny, nz = source.joint.shape
    work = (nx * ny * nz) ** code.N
    if work > EXACT_LIMIT:
        raise InfeasibleError(f"exact secrecy needs {work:.3g} realizations, limit {EXACT_LIMIT:.3g}")


def _l1_from_table(table):
    # table: (|S|, |C|, |Z^N|) with S the key/message index
    pcz = table.sum(axis=0, keepdims=True)
    return float(np.abs(table - pcz / table.shape[0]).sum())


def exact_secrecy_l1(source, code, protocol="ska"):
    """``|| P_{S,Z,C} - U_S x P_{Z,C} ||_1`` by full enumeration.

    For 'pcc' the key is replaced by a uniform message and the encoder's
    simulated bits are enumerated with their exact sampling probabilities.
    """
    _check_exact(source, code)
    p_xz = source.p_xz
    n, nz = code.N, p_xz.shape[1]
    zs = _sequences(nz, n)
    z_code = np.arange(len(zs))
    n_pub = code.M * len(code.Ec)
    if protocol == "ska":
        xs = _all_bits(n)
        pxz = np.ones((len(xs), len(zs)))
        for i in range(n):
            pxz *= p_xz[xs[:, i]][:, zs[:, i]]
        key, public, _ = ska_alice(xs, code)
        s_idx = _pack_bits(key)
        c_idx = _pack_bits(public.reshape(len(xs), -1))
        table = np.zeros((2 ** code.J, 2 ** n_pub, len(zs)))
        np.add.at(table, (s_idx[:, None], c_idx[:, None], z_code[None, :]), pxz)
        return _l1_from_table(table)
    if protocol == "pcc":
        return _l1_from_table(_pcc_table(source, code, zs))
    raise ValueError(f"unknown protocol {protocol!r}")


def _encoder_outer_law(code):
    """All outer arrays ``u`` (B, K, M) and their encoder probabilities."""
    K, M = code.K, code.M
    us = _all_bits(K * M).reshape(-1, K, M)
    prob = np.full(len(us), 0.5 ** code.J)
    t = transform(us)
    for j in range(K):
        lam = _level_llr(code, t[:, :j, :].transpose(0, 2, 1), j)
        lam = np.nan_to_num(lam, nan=0.0, posinf=np.inf, neginf=-np.inf)
        dec, _ = _sc.sc_pass(lam, lambda i, l, j=j: us[:, j, i])
        p1 = _sc.prob_one(dec)
        free = np.setdiff1d(np.arange(M), code.outer_sets[j])
        for i in free:
            prob *= np.where(us[:, j, i] == 1, p1[:, i], 1.0 - p1[:, i])
    return us, t, prob


def _pcc_table(source, code, zs):
    K, M, L = code.K, code.M, code.L
    us, t, p_u = _encoder_outer_law(code)
    n_pub = M * len(code.Ec)
    pubs = _all_bits(n_pub).reshape(2 ** n_pub, M, len(code.Ec))
    # every (u, public) pair is one encoder path
    ui, ci = np.meshgrid(np.arange(len(us)), np.arange(len(pubs)), indexing="ij")
    ui, ci = ui.ravel(), ci.ravel()
    v = np.zeros((len(ui), M, L), dtype=np.uint8)
    v[:, :, code.E] = t[ui].transpose(0, 2, 1)
    v[:, :, code.Ec] = pubs[ci]
    vb = v.reshape(-1, L)
    lam = np.full(vb.shape, prior_llr(code.p_x))
    dec, _ = _sc.sc_pass(lam, lambda i, l: vb[:, i])
    p1 = _sc.prob_one(dec)
    pv = np.where(vb == 1, p1, 1.0 - p1)[:, code.Ec].prod(axis=1).reshape(-1, M).prod(axis=1)
    path_p = p_u[ui] * pv
    x = transform(v).reshape(len(ui), M * L)
    w_z = source.channel().w_z
    pz = np.ones((len(ui), len(zs)))
    for i in range(M * L):
        pz *= w_z[x[:, i]][:, zs[:, i]]
    msg = _pack_bits(us[ui][:, [c[0] for c in code.key_coordinates()],
                            [c[1] for c in code.key_coordinates()]])
    table = np.zeros((2 ** code.J, 2 ** n_pub, len(zs)))
    np.add.at(table, (msg[:, None], ci[:, None], np.arange(len(zs))[None, :]),
              path_p[:, None] * pz)
    return table


def exact_key_deficit(source, code):
    """``J - H(S | Z^N, C)`` by enumeration (ska)."""
    _check_exact(source, code)
    p_xz = source.p_xz
    n, nz = code.N, p_xz.shape[1]
    zs = _sequences(nz, n)
    xs = _all_bits(n)
    pxz = np.ones((len(xs), len(zs)))
    for i in range(n):
        pxz *= p_xz[xs[:, i]][:, zs[:, i]]
    key, public, _ = ska_alice(xs, code)
    s_idx, c_idx = _pack_bits(key), _pack_bits(public.reshape(len(xs), -1))
    n_pub = public.shape[1] * public.shape[2]
    table = np.zeros((2 ** code.J, 2 ** n_pub * len(zs)))
    np.add.at(table, (s_idx[:, None], (c_idx[:, None] * len(zs) + np.arange(len(zs))[None, :])), pxz)
    return code.J - conditional_entropy(table)


@dataclass
class SecrecyReport:
    J: int
    eps2: float
    entropy_lower_bound: float
    entropy_deficit: float
    pinsker_bound: float
    eps2_budget: float
    violations: int
    provenance: str
    std_err: float = 0.0
    exact_l1: float = None

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def secrecy_bound_chain(code, profiles=None, exact_l1=None):
    """Proof-chain bound on the key's distance from ideal.

    The key entropy given Eve's view is bounded below by the sum of the
    selected outer-profile entries; Pinsker then bounds the variational
    distance by ``sqrt(ln2/2 * deficit)``.
    """
    profiles = code.outer_profiles if profiles is None else profiles
    sel, var = [], 0.0
    for prof, f in zip(profiles, code.outer_sets):
        sel.extend(prof.h[f].tolist())
        if prof.std_err is not None and len(f):
            var += float((np.asarray(prof.std_err)[f] ** 2).sum())
    sel = np.array(sel)
    lower = float(sel.sum())
    deficit = max(0.0, code.J - lower)
    prov = profiles[0].provenance if profiles else "exact"
    return SecrecyReport(
        J=code.J, eps2=code.eps2, entropy_lower_bound=lower, entropy_deficit=deficit,
        pinsker_bound=math.sqrt(math.log(2) / 2 * deficit), eps2_budget=code.J * code.eps2,
        violations=int((sel < 1.0 - code.eps2).sum()), provenance=prov,
        std_err=math.sqrt(var), exact_l1=exact_l1)


# --- polarization and super-source -----------------------------------------

def polarization_report(profiles, eps, h_cond=None):
    """One row per block length: set fractions and deficits vs ``H(X|S)``.

    ``profiles`` maps block length to EntropyProfile.
    """
    rows = []
    for n_len in sorted(profiles):
        prof = profiles[n_len]
        part = select_sets(prof, eps)
        h = prof.mean if h_cond is None else h_cond
        r, d, i = len(part.R) / n_len, len(part.D) / n_len, len(part.I) / n_len
        rows.append({"N": n_len, "R_frac": r, "D_frac": d, "I_frac": i,
                     "H": h, "R_deficit": h - r, "D_deficit": (1.0 - h) - d})
    return rows


def _block_table(p_xs, L, E):
    ns = p_xs.shape[1]
    work = (2 * ns) ** L
    if work > EXACT_LIMIT:
        raise InfeasibleError(f"super-source check needs {work:.3g} tuples, limit {EXACT_LIMIT:.3g}")
    xs = _all_bits(L)
    ss = _sequences(ns, L)
    prob = np.ones((len(xs), len(ss)))
    for i in range(L):
        prob *= p_xs[xs[:, i]][:, ss[:, i]]
    v = transform(xs)
    Ec = np.setdiff1d(np.arange(L), E)
    return prob, _pack_bits(v[:, E]), _pack_bits(v[:, Ec]), len(E), len(Ec)


def _h_t_given_c_s(prob, t_idx, c_idx, k, kc):
    ns = prob.shape[1]
    table = np.zeros((2 ** k, 2 ** kc * ns))
    cols = c_idx[:, None] * ns + np.arange(ns)[None, :]
    np.add.at(table, (np.broadcast_to(t_idx[:, None], prob.shape), cols), prob)
    return conditional_entropy(table)


def _h_c_given_s(prob, c_idx, kc):
    ns = prob.shape[1]
    table = np.zeros((2 ** kc, ns))
    np.add.at(table, (np.broadcast_to(c_idx[:, None], prob.shape),
                      np.broadcast_to(np.arange(ns)[None, :], prob.shape)), prob)
    return conditional_entropy(table)


def super_source_check(source, L, eps1, tol=1e-9):
    """Exact check of ``H(V[E_K] | V[E_K^c], Y^L) <= K eps1`` and the rate identity.

    The identity compares ``H(V[E_K] | V[E_K^c], Z^L) / L`` with
    ``H(X|Z) - H(V[E_K^c] | Z^L) / L``.
    """
    from .bitchan import exact_entropy_profile

    prof = exact_entropy_profile(source.p_xy, L)
    E = select_sets(prof, eps1).D
    K = len(E)
    prob, t_idx, c_idx, k, kc = _block_table(source.p_xy, L, E)
    h_bob = _h_t_given_c_s(prob, t_idx, c_idx, k, kc)
    probz, tz, cz, _, _ = _block_table(source.p_xz, L, E)
    lhs = _h_t_given_c_s(probz, tz, cz, k, kc) / L
    rhs = conditional_entropy(source.p_xz) - _h_c_given_s(probz, cz, kc) / L
    bound = K * eps1
    return {
        "L": L, "K": K, "eps1": eps1,
        "h_T_given_C_Y": h_bob, "bound": bound, "holds": bool(h_bob <= bound + tol),
        "slack": bound - h_bob, "profile_sum": float(prof.h[E].sum()),
        "rate_lhs": lhs, "rate_rhs": rhs, "identity_gap": abs(lhs - rhs),
    }


def rate_deficit(code):
    """``max(0, H(X|Z) - H(X|Y)) - J/N`` for a constructed code."""
    bench = max(0.0, code.meta["h_x_given_z"] - code.meta["h_x_given_y"])
    return bench - code.rate
