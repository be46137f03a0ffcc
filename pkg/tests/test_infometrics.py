"""Posterior, entropy, and generic-hardness math against hand oracles."""

import math
from fractions import Fraction

import pytest

from hiddenpath.infometrics import (
    CAVEAT,
    bayes_success_general,
    binary_entropy,
    collision_probability,
    conditional_entropy,
    digest_bound,
    expected_visible_fiber,
    fano_bound,
    fano_full_holds,
    guessing_probability,
    list_size,
    min_entropy,
    min_entropy_additivity_check,
    posterior_stats,
    random_collision_expectation,
    security_bits,
)
from hiddenpath.oracle import FiberTable, build_fiber_table
from hiddenpath.pathgen import RandomSource

from conftest import seed


# ---------------------------------------------------------------------------
# posterior statistics
# ---------------------------------------------------------------------------

def test_injective_map_leaves_nothing():
    st = posterior_stats([1] * 40)
    assert st.conditional_entropy_bits == 0.0
    assert st.p_guess == 1.0
    assert st.min_entropy_avg_bits == 0.0
    assert st.min_entropy_worst_bits == 0.0
    assert st.max_fiber == 1


def test_constant_map_hides_everything():
    st = posterior_stats([8])
    assert st.conditional_entropy_bits == pytest.approx(3.0)
    assert st.p_guess == pytest.approx(1 / 8)
    assert st.collision_probability == pytest.approx(1.0)
    assert st.expected_visible_fiber == pytest.approx(8.0)


def test_mixed_histogram_frozen_values():
    """One fiber of four plus twelve singletons: all stats by hand."""
    sizes = [4] + [1] * 12
    st = posterior_stats(sizes)
    assert st.support == 16
    assert st.image_size == 13
    assert st.conditional_entropy_bits == pytest.approx(0.5)
    assert st.p_guess == pytest.approx(13 / 16)
    assert st.min_entropy_avg_bits == pytest.approx(-math.log2(13 / 16))
    assert st.min_entropy_worst_bits == 0.0
    assert st.collision_probability == pytest.approx(7 / 64)
    assert st.expected_visible_fiber == pytest.approx(1.75)


def test_stats_accept_fiber_tables(tele_1296):
    t = build_fiber_table(tele_1296)
    st = posterior_stats(t)
    sizes = t.fiber_sizes()
    n = sum(sizes)
    assert st.support == n == 1296
    assert st.conditional_entropy_bits == pytest.approx(
        sum(k * math.log2(k) for k in sizes) / n)
    assert st.collision_probability == pytest.approx(
        sum((k / n) ** 2 for k in sizes))


def test_empty_or_bad_sizes_rejected():
    with pytest.raises(ValueError):
        posterior_stats([])
    with pytest.raises(ValueError):
        posterior_stats([3, 0, 2])


def test_mutual_information_capped_by_entry_budget(tiny_nonlinear):
    t = build_fiber_table(tiny_nonlinear)
    st = posterior_stats(t)
    fam = tiny_nonlinear.family
    revealed = math.log2(st.support) - st.conditional_entropy_bits
    assert revealed <= fam.m * fam.ell + 1e-9
    if st.max_fiber == 1:
        # injectivity forces the entry budget to cover the support
        assert fam.m * fam.ell >= math.ceil(math.log2(st.support))


# ---------------------------------------------------------------------------
# list decoding
# ---------------------------------------------------------------------------

def _table_with_fiber(k):
    fibers = {b"y": [bytes([j]) for j in range(k)], b"z": [b"\xff"]}
    return FiberTable(None, None, fibers, k + 1)


def test_list_size_rounds_up():
    t = _table_with_fiber(15)
    assert list_size(t, b"y", 0.5) == 8
    assert list_size(t, b"y", 0.0) == 15
    assert list_size(t, b"y", 1.0) == 1
    assert list_size(t, b"z", 0.9) == 1


def test_list_size_validates():
    t = _table_with_fiber(3)
    with pytest.raises(KeyError):
        list_size(t, b"missing", 0.5)
    with pytest.raises(ValueError):
        list_size(t, b"y", -0.1)


# ---------------------------------------------------------------------------
# fano
# ---------------------------------------------------------------------------

def test_fano_bound_frozen():
    assert fano_bound(3.0, 8) == pytest.approx(2 / 3)
    assert fano_bound(0.9, 100) == 0.0     # clamped below one bit
    with pytest.raises(ValueError):
        fano_bound(1.0, 1)


def test_fano_full_feasibility():
    # uniform fiber of k: H = log2 k, best Pe = (k-1)/k over N = k
    for k in (2, 4, 8, 32):
        assert fano_full_holds(math.log2(k), (k - 1) / k, k)
    assert not fano_full_holds(3.0, 0.0, 8)     # zero error can't hide 3 bits


# ---------------------------------------------------------------------------
# digests and collisions
# ---------------------------------------------------------------------------

def test_digest_bound_frozen():
    assert digest_bound(10, 4) == 64
    assert digest_bound(4096, 256) == 2 ** 3840
    assert digest_bound(4, 4) == 1
    assert digest_bound(3, 8) == 1


def test_collision_expectation_exact():
    assert random_collision_expectation(100, 1000) == Fraction(99, 20)
    assert float(random_collision_expectation(100, 1000)) == 4.95
    assert random_collision_expectation(2, 1) == 1
    assert random_collision_expectation(0, 5) == 0


def test_collision_expectation_monte_carlo():
    n_in, m_out, reps = 100, 1000, 2000
    rng = RandomSource(seed(24), "coll")
    total_pairs = 0
    for _ in range(reps):
        counts = {}
        for _ in range(n_in):
            y = rng.randrange(m_out)
            counts[y] = counts.get(y, 0) + 1
        total_pairs += sum(k * (k - 1) // 2 for k in counts.values())
    mean = total_pairs / reps
    expect = float(random_collision_expectation(n_in, m_out))
    # pairs are near-independent Bernoulli(1/m): var ~ expectation
    se = math.sqrt(expect / reps)
    assert abs(mean - expect) < 4 * se + 0.05


# ---------------------------------------------------------------------------
# security estimates
# ---------------------------------------------------------------------------

def test_security_bits_frozen():
    e = security_bits(2.0 ** -128)
    assert e.classical_bits == pytest.approx(128.0)
    assert e.quantum_bits == pytest.approx(64.0)
    assert security_bits(1.0).classical_bits == 0.0
    assert security_bits(8 / 1296).classical_bits == \
        pytest.approx(math.log2(162))


def test_security_bits_always_caveated():
    e = security_bits(0.5, public_key_bits=77)
    assert e.structural_caveat
    assert e.caveat == CAVEAT
    assert e.public_key_bits == 77
    with pytest.raises(ValueError):
        security_bits(0.0)
    with pytest.raises(ValueError):
        security_bits(1.5)


# ---------------------------------------------------------------------------
# min-entropy
# ---------------------------------------------------------------------------

def test_min_entropy_values():
    assert min_entropy([0.25] * 4) == pytest.approx(2.0)
    assert min_entropy([0.75, 0.25]) == pytest.approx(math.log2(4 / 3))
    with pytest.raises(ValueError):
        min_entropy([0.5, 0.4])
    with pytest.raises(ValueError):
        min_entropy([1.5, -0.5])


def test_min_entropy_additivity():
    assert min_entropy_additivity_check([[0.5, 0.5], [0.75, 0.25]])
    assert min_entropy_additivity_check([[0.25] * 4] * 3)
    with pytest.raises(ValueError):
        min_entropy_additivity_check([[1.0 / 50] * 50] * 5)   # 312M atoms


def test_binary_entropy():
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.1) == pytest.approx(binary_entropy(0.9))


# ---------------------------------------------------------------------------
# general bayes success
# ---------------------------------------------------------------------------

def test_bayes_success_hand_table():
    joint = {
        "y0": {"a": 0.25, "b": 0.25},    # max 0.25
        "y1": {"c": 0.5},                # max 0.5
    }
    assert bayes_success_general(joint) == pytest.approx(0.75)


def test_bayes_success_matches_fiber_formula(tiny_energy):
    t = build_fiber_table(tiny_energy)
    n = t.support
    joint = {y: {enc: 1.0 / n for enc in encs}
             for y, encs in t.fibers.items()}
    assert bayes_success_general(joint) == pytest.approx(t.image_size / n)


def test_bayes_success_validates_mass():
    with pytest.raises(ValueError):
        bayes_success_general({"y": {"x": 0.5}})
    with pytest.raises(ValueError):
        bayes_success_general({"y": {"x": -0.1, "z": 1.1}})
    with pytest.raises(ValueError):
        bayes_success_general({"y": {}})
