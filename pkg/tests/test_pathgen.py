"""Deterministic randomness, noise sampling, path iteration, diagnostics."""

import math

import pytest
from scipy import stats

from hiddenpath.fieldcore import AliasError, Boundary, Modulus
from hiddenpath.pathgen import (
    MicroObject,
    NoiseSpec,
    RandomSource,
    canonical_lift,
    effective_increments,
    generator_diagnostics,
    is_admissible,
    iterate_path,
    object_distance,
    sample_object,
    sample_tdg,
    validate_object,
)

from conftest import make_params, seed


# ---------------------------------------------------------------------------
# random source
# ---------------------------------------------------------------------------

def test_same_seed_same_stream():
    a = RandomSource(seed(1), "x")
    b = RandomSource(seed(1), "x")
    assert [a.randrange(1000) for _ in range(50)] == \
           [b.randrange(1000) for _ in range(50)]


def test_labels_separate_streams():
    a = RandomSource(seed(1), "x")
    b = RandomSource(seed(1), "y")
    assert [a.randrange(256) for _ in range(32)] != \
           [b.randrange(256) for _ in range(32)]


def test_child_derivation_is_one_way_and_stable():
    root = RandomSource(seed(1))
    c1 = root.child("a").randbytes(16)
    c2 = RandomSource(seed(1)).child("a").randbytes(16)
    assert c1 == c2
    assert root.child("b").randbytes(16) != c1


def test_randrange_exact_uniformity_small():
    """Rejection sampling: every residue class equally likely, chi-square."""
    src = RandomSource(seed(2), "u")
    counts = [0] * 7
    for _ in range(7000):
        counts[src.randrange(7)] += 1
    _, pval = stats.chisquare(counts)
    assert pval > 1e-6


def test_uniform_in_unit_interval():
    src = RandomSource(seed(3), "f")
    xs = [src.uniform() for _ in range(1000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert 0.4 < sum(xs) / len(xs) < 0.6


# ---------------------------------------------------------------------------
# truncated discrete Gaussian
# ---------------------------------------------------------------------------

def test_tdg_bound_zero_always_zero():
    spec = NoiseSpec(True, sigma=1.0, bound=0)
    src = RandomSource(seed(4), "n")
    assert all(sample_tdg(spec, src) == 0 for _ in range(100))


def _rho_table(sigma: float, bound: int) -> list[float]:
    # independent density oracle: rho(z) = exp(-pi z^2 / sigma^2), normalized
    raw = [math.exp(-math.pi * z * z / (sigma * sigma))
           for z in range(-bound, bound + 1)]
    total = sum(raw)
    return [w / total for w in raw]


def test_tdg_mass_at_zero_matches_density():
    """sigma=1, B=3: empirical mass at 0 within 3 s.e. of the rho table."""
    spec = NoiseSpec(True, sigma=1.0, bound=3)
    expected = _rho_table(1.0, 3)[3]
    src = RandomSource(seed(5), "tdg")
    trials = 100_000
    hits = sum(1 for _ in range(trials) if sample_tdg(spec, src) == 0)
    se = math.sqrt(expected * (1 - expected) / trials)
    assert abs(hits / trials - expected) <= 3 * se


def test_tdg_symmetry_binwise():
    """rho is even, so P(z) and P(-z) agree within 4 s.e. per bin."""
    spec = NoiseSpec(True, sigma=1.5, bound=4)
    src = RandomSource(seed(6), "sym")
    trials = 100_000
    counts = {z: 0 for z in range(-4, 5)}
    for _ in range(trials):
        counts[sample_tdg(spec, src)] += 1
    for z in range(1, 5):
        p_hat = counts[z] / trials
        q_hat = counts[-z] / trials
        se = math.sqrt((p_hat * (1 - p_hat) + q_hat * (1 - q_hat)) / trials)
        assert abs(p_hat - q_hat) <= 4 * se + 1e-12


def test_tdg_support_clipped():
    spec = NoiseSpec(True, sigma=5.0, bound=2)
    src = RandomSource(seed(7), "clip")
    draws = {sample_tdg(spec, src) for _ in range(2000)}
    assert draws <= {-2, -1, 0, 1, 2}
    assert len(draws) == 5


# ---------------------------------------------------------------------------
# canonical lift
# ---------------------------------------------------------------------------

def test_lift_residue_99_mod_101():
    assert canonical_lift(99, 3, Modulus(101)) == -2


def test_lift_aliasing_raises():
    with pytest.raises(AliasError):
        canonical_lift(1, 3, Modulus(5))    # q=5 <= 2B=6


def test_lift_out_of_window_is_none():
    assert canonical_lift(50, 3, Modulus(101)) is None


# ---------------------------------------------------------------------------
# sampling and iteration
# ---------------------------------------------------------------------------

def test_degenerate_params_unique_object():
    p = make_params(q=7, macro=((2,),), micro=((0,),),
                    boundary=Boundary(start=(1,)))
    a = sample_object(p, RandomSource(seed(8), "s1"))
    b = sample_object(p, RandomSource(seed(9), "s2"))
    assert a == b
    assert a.x0 == (1,)


def test_sampling_reproducible():
    p = make_params(q=11, macro=((1,), (2,), (3,)), micro=((0,), (5,)))
    x1 = sample_object(p, RandomSource(seed(10), "g"))
    x2 = sample_object(p, RandomSource(seed(10), "g"))
    assert x1 == x2


def test_prefix_histories_uniform(toy_1296):
    """b=2, r=3: all 36 (macro, micro) two-step prefixes, chi-square sane."""
    rng = RandomSource(seed(11), "prefix")
    counts = {}
    for i in range(10_000):
        x = sample_object(toy_1296, rng.child(str(i)))
        key = (x.macro_indices[:2], x.micro_indices[:2])
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 36
    _, pval = stats.chisquare(list(counts.values()))
    assert pval > 1e-6


def test_hand_iterated_path():
    """q=101: x0=0, deltas (1,1,-1,1), eps (0,1,-1,0) gives (0,1,3,1,2)."""
    p = make_params(q=101, macro=((1,), (100,)), micro=((0,), (1,), (100,)),
                    T=4)
    # macro indices pick +1,+1,-1,+1; micro pick 0,+1,-1,0
    x = MicroObject((0,), (0, 0, 1, 0), (0, 1, 2, 0),
                    ((0,),) * 4)
    assert iterate_path(x, p) == ((0,), (1,), (3,), (1,), (2,))


def test_constant_path_when_all_zero():
    p = make_params(q=5, macro=((0,), (1,)), micro=((0,), (2,)))
    x = MicroObject((3,), (0,) * 3, (0,) * 3, ((0,),) * 3)
    assert iterate_path(x, p) == ((3,),) * 4


def test_telescoping_identity_random_objects():
    """Interior cancellation: sum of consecutive differences = gamma_T - gamma_0."""
    p = make_params(q=11, n=2, T=5,
                    macro=((1, 0), (0, 1), (3, 3)),
                    micro=((0, 0), (1, 2)),
                    noise=NoiseSpec(True, 1.0, 2))
    rng = RandomSource(seed(12), "tele")
    for i in range(50):
        x = sample_object(p, rng.child(str(i)))
        g = iterate_path(x, p)
        total = (0, 0)
        for a, b in zip(g, g[1:]):
            total = tuple((t + bb - aa) % 11 for t, aa, bb in zip(total, a, b))
        assert total == tuple((bb - aa) % 11 for aa, bb in zip(g[0], g[-1]))


def test_effective_increments_consistent_with_path():
    p = make_params(q=7, T=4, noise=NoiseSpec(True, 1.0, 1))
    x = sample_object(p, RandomSource(seed(13), "ei"))
    g = iterate_path(x, p)
    for i, inc in enumerate(effective_increments(x, p)):
        assert tuple((a + d) % 7 for a, d in zip(g[i], inc)) == g[i + 1]


def test_validate_rejects_bad_indices():
    p = make_params()
    with pytest.raises(ValueError):
        validate_object(MicroObject((0,), (5, 0, 0), (0, 0, 0),
                                    ((0,),) * 3), p)
    assert not is_admissible(MicroObject((0,), (0, 0), (0, 0), ((0,),) * 2), p)


def test_validate_enforces_start_pin_only():
    p = make_params(boundary=Boundary(start=(2,), end=(0,)))
    x = MicroObject((2,), (0,) * 3, (0,) * 3, ((0,),) * 3)
    validate_object(x, p)    # end target is not an admissibility constraint
    with pytest.raises(ValueError):
        validate_object(MicroObject((1,), (0,) * 3, (0,) * 3, ((0,),) * 3), p)


def test_object_distance_zero_iff_equal():
    p = make_params(T=4, noise=NoiseSpec(True, 1.0, 1))
    rng = RandomSource(seed(14), "d")
    a = sample_object(p, rng.child("a"))
    assert object_distance(a, a, p) == 0
    b = sample_object(p, rng.child("b"))
    if a != b:
        assert object_distance(a, b, p) > 0


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def test_macro_entropy_near_one_bit():
    p = make_params(q=11, macro=((1,), (2,)), micro=((0,),), T=6)
    rng = RandomSource(seed(15), "ent")
    xs = [sample_object(p, rng.child(str(i))) for i in range(10_000 // 6)]
    rep = generator_diagnostics(xs, p)
    assert abs(rep.macro_entropy_bits - 1.0) < 0.05


def test_constant_generator_zero_entropy():
    p = make_params(q=11, macro=((3,),), micro=((0,),))
    xs = [sample_object(p, RandomSource(seed(16), str(i))) for i in range(64)]
    rep = generator_diagnostics(xs, p)
    assert rep.macro_entropy_bits == 0.0


def test_alternating_pattern_high_autocorr():
    """A forced +1/-1 alternation shows near-perfect lag-1 anticorrelation."""
    p = make_params(q=5, macro=((1,), (4,)), micro=((0,),), T=8)
    xs = [MicroObject((0,), (0, 1) * 4, (0,) * 8, ((0,),) * 8)
          for _ in range(32)]
    rep = generator_diagnostics(xs, p)
    assert abs(rep.state_autocorr[1]) > 0.8
