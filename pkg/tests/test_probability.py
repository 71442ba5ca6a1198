import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarsecrecy.probability import (
    MarkovTriple, Pmf, UnsupportedAlphabet, ValidationError, WiretapChannel, WiretapSource,
    binary_entropy, bsc, bsc_cascade, conditional_entropy, entropy, is_less_noisy,
    is_more_capable, joint_entropy, key_rate_less_noisy, l1_distance, lemma11_check,
    product_channel, sample_source, secrecy_capacity_more_capable, variational_distance,
)

from conftest import h2

CASCADE_RATE = h2(0.185) - h2(0.05)


def noiseless():
    return np.eye(2)


def indep():
    return np.full((2, 2), 0.5)


def test_entropy_examples():
    assert entropy([0.5, 0.5]) == pytest.approx(1.0, abs=1e-12)
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.11, 0.89]) == pytest.approx(0.499916, abs=1e-5)
    assert binary_entropy(0.11) == pytest.approx(h2(0.11), abs=1e-12)


def test_pmf_validation():
    with pytest.raises(ValidationError):
        Pmf([0.6, 0.6])
    with pytest.raises(ValidationError):
        Pmf([-0.1, 1.1])
    with pytest.raises(ValidationError):
        Pmf([])
    # small drift is renormalized once
    p = Pmf([0.5, 0.5 + 1e-9])
    assert abs(p.probs.sum() - 1.0) < 1e-15


def test_conditional_entropy_examples():
    assert conditional_entropy(np.diag([0.5, 0.5])) == pytest.approx(0.0, abs=1e-12)
    assert conditional_entropy(np.full((2, 2), 0.25)) == pytest.approx(1.0, abs=1e-12)
    joint = 0.5 * bsc(0.11)
    assert conditional_entropy(joint) == pytest.approx(0.499916, abs=1e-5)


def test_variational_distance_examples():
    assert variational_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert variational_distance([1, 0], [0, 1]) == pytest.approx(1.0)
    assert variational_distance([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.1)
    assert l1_distance([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.2)
    with pytest.raises(ValidationError):
        variational_distance([0.5, 0.5], [1 / 3] * 3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=6, max_size=6))
def test_chain_rule(w):
    j = np.array(w).reshape(2, 3)
    j /= j.sum()
    # conditional_entropy conditions axis 0 on axis 1
    assert joint_entropy(j) == pytest.approx(entropy(j.sum(axis=0)) + conditional_entropy(j),
                                             abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=12, max_size=12))
def test_triangle_inequality(w):
    w = np.array(w).reshape(3, 4) + 1e-3
    p, q, r = (row / row.sum() for row in w)
    assert variational_distance(p, r) <= variational_distance(p, q) + variational_distance(q, r) + 1e-12
    assert variational_distance(p, q) == pytest.approx(0.5 * np.abs(p - q).sum(), abs=1e-15)


def test_source_and_channel_invariants():
    ch = bsc_cascade(0.05, 0.15)
    s = ch.source()
    assert s.joint.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(s.channel().transition, ch.transition)
    with pytest.raises(ValidationError):
        WiretapSource(np.ones((2, 2, 2)))
    with pytest.raises(ValidationError):
        WiretapChannel(np.ones((2, 2, 2)) * 0.5, Pmf([0.5, 0.5]))


def test_more_capable():
    w_noisy_eve = product_channel(noiseless(), bsc(0.3), [0.5, 0.5])
    assert is_more_capable(w_noisy_eve)[0]
    ok, witness = is_more_capable(product_channel(bsc(0.1), noiseless(), [0.5, 0.5]))
    assert not ok
    assert abs(witness.probs[0] - 0.5) < 0.05
    assert is_more_capable(bsc_cascade(0.05, 0.15))[0]


def test_less_noisy():
    assert is_less_noisy(bsc_cascade(0.05, 0.15))[0]
    assert not is_less_noisy(product_channel(bsc(0.2), noiseless(), [0.5, 0.5]))[0]
    # Y and Z the same BSC applied independently
    assert is_less_noisy(product_channel(bsc(0.1), bsc(0.1), [0.5, 0.5]))[0]


def test_class_predicates_reject_larger_inputs():
    w = WiretapChannel(np.full((3, 2, 2), 0.25), Pmf.uniform(3))
    with pytest.raises(UnsupportedAlphabet):
        is_more_capable(w)
    with pytest.raises(UnsupportedAlphabet):
        is_less_noisy(w)


def test_key_rate_examples():
    assert key_rate_less_noisy(product_channel(noiseless(), indep(), [0.5, 0.5]).source()) == \
        pytest.approx(1.0, abs=1e-12)
    same = WiretapSource(np.einsum("xy,yz->xyz", 0.5 * bsc(0.1), np.eye(2)))
    assert key_rate_less_noisy(same) == pytest.approx(0.0, abs=1e-12)
    assert key_rate_less_noisy(bsc_cascade(0.05, 0.15).source()) == \
        pytest.approx(0.40455, abs=1e-4)


def test_secrecy_capacity():
    v, p = secrecy_capacity_more_capable(product_channel(noiseless(), indep(), [0.5, 0.5]))
    assert v == pytest.approx(1.0, abs=1e-9)
    assert p.probs[0] == pytest.approx(0.5, abs=1e-3)
    v, _ = secrecy_capacity_more_capable(product_channel(bsc(0.1), noiseless(), [0.5, 0.5]))
    assert v == 0.0
    ch = bsc_cascade(0.05, 0.15)
    v, p = secrecy_capacity_more_capable(ch)
    assert v == pytest.approx(CASCADE_RATE, abs=1e-3)
    assert p.probs[0] == pytest.approx(0.5, abs=1e-3)
    assert key_rate_less_noisy(ch.source()) == pytest.approx(v, abs=1e-3)


def test_sample_source_edges(rng):
    s = bsc_cascade(0.05, 0.15).source()
    x, y, z = sample_source(s, 0, rng)
    assert len(x) == len(y) == len(z) == 0
    point = np.zeros((2, 2, 3))
    point[1, 0, 2] = 1.0
    x, y, z = sample_source(WiretapSource(point), 50, rng)
    assert set(x) == {1} and set(y) == {0} and set(z) == {2}


def test_sample_source_reproducible():
    s = bsc_cascade(0.05, 0.15).source()
    a = sample_source(s, 100, np.random.default_rng(7))
    b = sample_source(s, 100, np.random.default_rng(7))
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_sample_source_frequencies(rng):
    s = bsc_cascade(0.1, 0.2, 0.3).source()
    n = 10 ** 6
    x, y, z = sample_source(s, n, rng)
    counts = np.zeros(s.joint.shape)
    np.add.at(counts, (x, y, z), 1)
    p = s.joint
    se = np.sqrt(p * (1 - p) / n)
    assert np.all(np.abs(counts / n - p) <= 3 * se + 1e-12)


def _random_triple(rng):
    p_x = rng.dirichlet([1, 1])
    # Bob close to noiseless so the hypothesis holds often
    flip = rng.uniform(0, 0.01)
    w_y = np.array([[1 - flip, flip], [flip, 1 - flip]])
    w_z = rng.dirichlet([1, 1], size=2)
    p_u = rng.dirichlet([1, 1], size=2)
    return MarkovTriple(p_u, p_x, w_y[:, :, None] * w_z[:, None, :])


def test_lemma11_examples():
    t = MarkovTriple(np.eye(2), [0.5, 0.5], np.einsum("xy,xz->xyz", np.eye(2), indep()))
    r = lemma11_check(t, 0.0)
    assert r and not r.vacuous
    rng = np.random.default_rng(3)
    for _ in range(20):
        t = MarkovTriple(rng.dirichlet([1, 1], size=2), rng.dirichlet([1, 1]),
                         rng.dirichlet([1] * 4, size=2).reshape(2, 2, 2))
        assert lemma11_check(t, 1.0)


def test_lemma11_random_triples():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 1000:
        t = _random_triple(rng)
        r = lemma11_check(t, 0.05)
        if r.vacuous:
            continue
        assert r.holds
        checked += 1
