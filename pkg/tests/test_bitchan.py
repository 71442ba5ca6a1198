import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from polarsecrecy.bitchan import (
    EntropyProfile, InfeasibleError, bec_entropy_profile, construct_code,
    exact_entropy_profile, mc_entropy_profile, sc_pass, select_sets, true_feed,
)
from polarsecrecy.polar import transform
from polarsecrecy.probability import (
    WiretapSource, bec, bsc, bsc_cascade, conditional_entropy, product_channel,
)

from conftest import all_words, brute_conditional, brute_profile, brute_u_table, h2


def uniform_bsc(p):
    return 0.5 * bsc(p)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_sc_pass_matches_enumeration(n):
    joint = uniform_bsc(0.11)
    table = brute_u_table(joint, n)
    words = np.array(all_words(n), dtype=np.uint8)
    # every (u, y) pair: all conditioning contexts
    u = np.repeat(words, len(words), axis=0)
    y = np.tile(words, (len(words), 1))
    res = sc_pass(joint, y, true_feed(u))
    assert np.array_equal(res.u, u)
    for i in range(n):
        cond = brute_conditional(table, i)
        want = np.array([cond[(tuple(a[:i]), tuple(b))] for a, b in zip(u.tolist(), y.tolist())])
        assert np.max(np.abs(res.pairs[:, i, 1] - want)) < 1e-9
    assert np.allclose(res.pairs.sum(axis=-1), 1.0, atol=1e-12)


def test_sc_pass_single_position():
    joint = np.array([[0.3, 0.1], [0.2, 0.4]])
    res = sc_pass(joint, [[0], [1]], true_feed(np.zeros((2, 1), np.uint8)))
    assert res.pairs[0, 0, 1] == pytest.approx(0.2 / 0.5)
    assert res.pairs[1, 0, 1] == pytest.approx(0.4 / 0.5)


def test_sc_pass_noiseless(rng):
    x = rng.integers(0, 2, size=(20, 16), dtype=np.uint8)
    u = transform(x)
    res = sc_pass(np.diag([0.5, 0.5]), x, true_feed(u))
    assert np.array_equal(res.u, u)
    assert set(np.unique(res.pairs)) <= {0.0, 1.0}


def test_sc_pass_flags_impossible_observation():
    joint = np.array([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0]])
    u = transform(np.array([[0, 0], [0, 1]], dtype=np.uint8))
    res = sc_pass(joint, [[0, 2], [0, 1]], true_feed(u))
    assert res.impossible.tolist() == [True, False]


BRUTE_CASES = [(j, n) for j in (uniform_bsc(0.11), np.array([[0.3, 0.1], [0.05, 0.55]]))
               for n in (2, 4, 8)] + [(0.5 * bec(0.3), n) for n in (2, 4)]


@pytest.mark.parametrize("joint,n", BRUTE_CASES)
def test_exact_profile_matches_brute_force(joint, n):
    prof = exact_entropy_profile(joint, n)
    assert np.max(np.abs(prof.h - brute_profile(joint, n))) < 1e-9
    assert prof.mean == pytest.approx(conditional_entropy(joint), abs=1e-9)


def test_exact_profile_examples():
    assert np.all(exact_entropy_profile(np.diag([0.5, 0.5]), 8).h == 0)
    assert np.allclose(exact_entropy_profile(np.full((2, 2), 0.25), 8).h, 1.0)
    prof = exact_entropy_profile(uniform_bsc(0.11), 2)
    # first bit sees x1 ^ x2 through a BSC(2p(1-p))
    assert prof.h[0] == pytest.approx(h2(2 * 0.11 * 0.89), abs=1e-12)
    assert prof.h[0] == pytest.approx(0.71351, abs=1e-4)
    assert prof.mean == pytest.approx(h2(0.11), abs=1e-9)


def test_exact_profile_refuses_large_work():
    rng = np.random.default_rng(0)
    joint = rng.dirichlet(np.ones(20)).reshape(2, 10)
    with pytest.raises(InfeasibleError):
        exact_entropy_profile(joint, 16)


def test_bec_closed_form_examples():
    assert np.all(bec_entropy_profile(0.0, 16).h == 0)
    assert np.all(bec_entropy_profile(1.0, 16).h == 1)
    assert np.allclose(bec_entropy_profile(0.5, 2).h, [0.75, 0.25])
    for n in (2, 4, 8):
        assert np.allclose(bec_entropy_profile(0.3, n).h,
                           exact_entropy_profile(0.5 * bec(0.3), n).h, atol=1e-12)


def test_mc_profile_noiseless(rng):
    prof = mc_entropy_profile(np.diag([0.5, 0.5]), 32, 100, rng)
    assert np.all(prof.h == 0)
    assert prof.provenance == "monte_carlo" and prof.trials == 100


def test_mc_profile_matches_exact(rng):
    joint = uniform_bsc(0.11)
    mc = mc_entropy_profile(joint, 8, 20000, rng)
    ex = exact_entropy_profile(joint, 8)
    assert np.all(np.abs(mc.h - ex.h) <= np.maximum(3 * mc.std_err, 0.02))
    assert np.all(np.abs(mc.error_rate - ex.error_rate) <= 0.02)


def test_mc_profile_rejects_few_trials(rng):
    with pytest.raises(ValueError):
        mc_entropy_profile(uniform_bsc(0.1), 8, 99, rng)


def test_select_sets_examples():
    part = select_sets(EntropyProfile(np.array([0.99, 0.6, 0.3, 0.01]), "exact"), 0.1)
    assert part.R.tolist() == [0] and part.D.tolist() == [3] and part.I.tolist() == [1, 2]
    assert select_sets(np.zeros(8), 0.1).D.tolist() == list(range(8))
    # thresholds are inclusive
    tie = select_sets(np.array([0.75, 0.25, 0.5]), 0.25)
    assert tie.R.tolist() == [0] and tie.D.tolist() == [1]
    with pytest.raises(ValueError):
        select_sets(np.zeros(4), 0.5)


def test_select_sets_bec_sizes():
    prof = bec_entropy_profile(0.5, 1024)
    part = select_sets(prof, 0.1)
    assert len(part.R) == int((prof.h >= 0.9).sum())
    assert len(part.D) == int((prof.h <= 0.1).sum())
    assert part.n == 1024
    assert len(set(part.R) | set(part.D) | set(part.I)) == 1024


def _brute_outer_profiles(source, code):
    """Outer profiles by dictionary accumulation over every (x, z)."""
    L, M, K = code.L, code.M, code.K
    p_xz = source.p_xz
    nz = p_xz.shape[1]
    acc = {}
    for x in itertools.product((0, 1), repeat=L * M):
        xb = np.array(x, dtype=np.uint8).reshape(M, L)
        v = transform(xb)
        t = v[:, code.E].T
        u = transform(t)
        c = v[:, code.Ec].tobytes()
        px = np.array([p_xz[a] for a in x])
        for z in itertools.product(range(nz), repeat=L * M):
            p = np.prod(px[np.arange(L * M), z])
            key = (u.tobytes(), c, z)
            acc[key] = acc.get(key, 0.0) + p
    out = np.zeros((K, M))
    for j in range(K):
        for i in range(M):
            num, den = {}, {}
            for (ub, c, z), p in acc.items():
                u = np.frombuffer(ub, dtype=np.uint8).reshape(K, M)
                lower = transform(u[:j]).tobytes() if j else b""
                ctx = (lower, u[j, :i].tobytes(), c, z)
                den[ctx] = den.get(ctx, 0.0) + p
                full = ctx + (int(u[j, i]),)
                num[full] = num.get(full, 0.0) + p
            h = -sum(p * math.log2(p) for p in num.values() if p > 0) \
                + sum(p * math.log2(p) for p in den.values() if p > 0)
            out[j, i] = h
    return out


def test_exact_outer_profiles_match_brute_force():
    source = bsc_cascade(0.01, 0.3).source()
    code = construct_code(source, 4, 2, 0.1, 0.1, mode="exact")
    want = _brute_outer_profiles(source, code)
    got = np.array([p.h for p in code.outer_profiles])
    assert np.max(np.abs(got - want)) < 1e-9


def test_construct_noiseless_bob_independent_eve():
    src = product_channel(np.eye(2), np.full((2, 2), 0.5), [0.5, 0.5]).source()
    code = construct_code(src, 4, 4, 0.1, 0.1, mode="exact")
    assert code.K == 4 and len(code.Ec) == 0
    # Eve learns nothing and v = G x is uniform: every outer bit is a fair coin
    assert code.J == 16
    assert all(np.allclose(p.h, 1.0) for p in code.outer_profiles)


def test_construct_eve_sees_x():
    w = np.einsum("xy,xz->xyz", bsc(0.05), np.eye(2))
    code = construct_code(WiretapSource(0.5 * w), 4, 2, 0.1, 0.1, mode="exact")
    assert code.J == 0 and code.rate == 0
    assert all(np.allclose(p.h, 0.0) for p in code.outer_profiles)


def test_construct_invariants_and_determinism():
    src = bsc_cascade(0.05, 0.15).source()
    a = construct_code(src, 64, 4, 0.05, 0.05, trials=400, seed=9)
    b = construct_code(src, 64, 4, 0.05, 0.05, trials=400, seed=9)
    assert np.array_equal(a.E, b.E)
    assert all(np.array_equal(f, g) for f, g in zip(a.outer_sets, b.outer_sets))
    assert all(np.array_equal(p.h, q.h) for p, q in zip(a.outer_profiles, b.outer_profiles))
    assert a.level_model == b.level_model
    assert np.array_equal(a.E, select_sets(a.inner_profile, 0.05).D)
    assert a.J == sum(len(f) for f in a.outer_sets) <= a.K * a.M
    a.verify()
    broken = replace(a, outer_sets=a.outer_sets[:-1])
    with pytest.raises(ValueError):
        broken.verify()


def test_mc_outer_never_below_exact():
    # the sampled outer profile conditions on less than the exact one
    src = bsc_cascade(0.02, 0.2).source()
    ex = construct_code(src, 4, 2, 0.2, 0.1, mode="exact")
    mc = construct_code(src, 4, 2, 0.2, 0.1, mode="mc", trials=20000, seed=4)
    assert np.array_equal(ex.E, mc.E)
    for pe, pm in zip(ex.outer_profiles, mc.outer_profiles):
        assert np.all(pm.h >= pe.h - 3 * pm.std_err - 1e-3)


def test_construct_argument_errors():
    src = bsc_cascade(0.05, 0.15).source()
    with pytest.raises(ValueError):
        construct_code(src, 6, 2)
    with pytest.raises(ValueError):
        construct_code(src, 64, 2, trials=50)
    with pytest.raises(InfeasibleError):
        construct_code(src, 8, 2, mode="exact")
