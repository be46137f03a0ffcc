"""Recovery games: scoring, confidence intervals, adversaries, KDFs."""

import math

import pytest

from hiddenpath.fieldcore import Boundary, encode_object
from hiddenpath.games import (
    ADVERSARY_BUILDERS,
    KDF_BUILDERS,
    build_adversary,
    check_kdf_factoring,
    kdf_hash_encoding,
    kdf_hash_observable,
    kdf_hash_state_path,
    run_ow_game,
    run_paired_games,
    score_recovery,
    wilson_interval,
)
from hiddenpath.observables import (
    LinearProjected,
    PostProcessor,
    compose_postprocess,
    eval_observable,
    iterate_path,
)
from hiddenpath.oracle import build_fiber_table
from hiddenpath.pathgen import MicroObject, NoiseSpec, RandomSource, \
    sample_object

from conftest import make_params, seed


def _pinned_linear(m=6, T=3, micro=((0,),), noise=None, fam_seed=5, q=5):
    fam = LinearProjected.generate(m, 3, seed(fam_seed), q=q, n=1, T=T)
    return make_params(q=q, n=1, T=T, macro=((1,), (2,)), micro=micro,
                       noise=noise, family=fam, boundary=Boundary(start=(0,)))


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

def test_score_self_is_perfect(tiny_energy):
    x = sample_object(tiny_energy, RandomSource(seed(70), "s"))
    sc = score_recovery(x, x, tiny_energy)
    assert sc.exact_success and sc.state_success and sc.fiber_success
    assert sc.coarse_score == 1.0
    assert sc.macro_agreement == 1.0
    assert sc.d_state == 0 and sc.d_x == 0
    assert sc.hierarchy_ok()


def test_score_single_macro_flip(tiny_energy):
    x = sample_object(tiny_energy, RandomSource(seed(71), "f"))
    flip = MicroObject(x.x0,
                       (1 - x.macro_indices[0],) + x.macro_indices[1:],
                       x.micro_indices, x.noise_lifts)
    sc = score_recovery(flip, x, tiny_energy)
    assert not sc.exact_success
    assert sc.macro_agreement == pytest.approx(1 - 1 / tiny_energy.T)
    # flipping step one shifts every later state
    assert sc.d_state == tiny_energy.T
    assert sc.d_x == sc.d_state + 1
    assert sc.hierarchy_ok()


def test_score_aliased_noise_lift_is_near_miss():
    """q <= 2B: lifts -2 and +1 agree mod 3, witnesses differ at d_x = 1."""
    p = _pinned_linear(m=3, T=2, micro=((0,), (1,)), q=3,
                       noise=NoiseSpec(True, 1.0, 2), fam_seed=2)
    a = MicroObject((0,), (0, 1), (0, 0), ((-2,), (0,)))
    b = MicroObject((0,), (0, 1), (0, 0), ((1,), (0,)))
    sc = score_recovery(a, b, p)
    assert not sc.exact_success
    assert sc.state_success and sc.fiber_success
    assert sc.coarse_score == 1.0
    assert sc.d_x == 1
    assert sc.hierarchy_ok()


def test_score_rejects_malformed_candidate(tiny_energy):
    x = sample_object(tiny_energy, RandomSource(seed(72), "m"))
    bad = MicroObject(x.x0, (9,) + x.macro_indices[1:], x.micro_indices,
                      x.noise_lifts)
    with pytest.raises(Exception):
        score_recovery(bad, x, tiny_energy)


def test_score_radius_flag(tiny_energy):
    x = sample_object(tiny_energy, RandomSource(seed(73), "r"))
    flip = MicroObject(x.x0, x.macro_indices,
                       (1 - x.micro_indices[0],) + x.micro_indices[1:],
                       x.noise_lifts)
    near = score_recovery(flip, x, tiny_energy, radius=tiny_energy.T + 1)
    far = score_recovery(flip, x, tiny_energy, radius=0)
    assert near.within_radius is True
    assert far.within_radius is False
    assert score_recovery(flip, x, tiny_energy).within_radius is None


# ---------------------------------------------------------------------------
# wilson intervals
# ---------------------------------------------------------------------------

def _wilson_oracle(s, n, z=1.959963984540054):
    ph = s / n
    denom = 1 + z * z / n
    center = (ph + z * z / (2 * n)) / denom
    rad = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom
    return center - rad, center + rad


def test_wilson_matches_closed_form():
    for s, n in [(0, 10), (5, 10), (10, 10), (3, 100), (997, 1000)]:
        lo, hi = wilson_interval(s, n)
        elo, ehi = _wilson_oracle(s, n)
        assert lo == pytest.approx(elo)
        assert hi == pytest.approx(ehi)
        assert 0.0 <= lo and hi <= 1.0 + 1e-12
        assert lo - 1e-12 <= s / n <= hi + 1e-12


def test_wilson_edge_cases():
    lo, hi = wilson_interval(0, 10)
    assert lo == 0.0 and hi > 0.2
    lo, hi = wilson_interval(10, 10)
    assert hi == pytest.approx(1.0) and lo < 0.8


# ---------------------------------------------------------------------------
# paired games
# ---------------------------------------------------------------------------

def test_bayes_fiber_paired_rates(tele_1296):
    t = build_fiber_table(tele_1296)
    adv = build_adversary("bayes-fiber", table=t)
    ow, rel = run_paired_games(tele_1296, adv, 400,
                               RandomSource(seed(74), "bp"),
                               adversary_name="bayes-fiber")
    assert rel.advantage == 1.0
    assert rel.successes >= ow.successes
    expect = t.image_size / t.support
    se = math.sqrt(expect * (1 - expect) / 400)
    assert abs(ow.advantage - expect) < 4 * se
    assert ow.ci_low <= ow.advantage <= ow.ci_high


def test_random_guess_rate_is_tiny(tiny_energy):
    adv = build_adversary("random-guess")
    ow = run_ow_game(tiny_energy, adv, 2000, RandomSource(seed(75), "rg"))
    # support 512: 4 s.e. above 1/512 stays under 0.006
    assert ow.advantage < 0.006
    assert ow.exceptions == 0


def test_empty_adversary_never_wins(tiny_energy):
    ow, rel = run_paired_games(tiny_energy, build_adversary("empty"), 50,
                               RandomSource(seed(76), "ea"))
    assert ow.successes == 0 and rel.successes == 0
    assert ow.advantage == 0.0


def test_raising_adversary_counts_exceptions(tiny_energy):
    def boom(p, y, rng):
        raise RuntimeError("adversary crashed")
    tr = run_ow_game(tiny_energy, boom, 25, RandomSource(seed(77), "x"))
    assert tr.exceptions == 25
    assert tr.successes == 0


def test_linear_collapse_adversary_owns_full_rank_instance():
    p = _pinned_linear()
    adv = build_adversary("linear-collapse")
    ow = run_ow_game(p, adv, 30, RandomSource(seed(78), "lc"))
    assert ow.advantage == 1.0


def test_relation_only_always_meets_relation(tiny_energy):
    adv = build_adversary("relation-only")
    _, rel = run_paired_games(tiny_energy, adv, 60,
                              RandomSource(seed(79), "ro"))
    assert rel.advantage == 1.0


def test_collected_scores_keep_hierarchy(tiny_energy):
    adv = build_adversary("random-guess")
    ow = run_ow_game(tiny_energy, adv, 120, RandomSource(seed(80), "cs"),
                     collect_scores=True)
    assert ow.scores
    assert all(sc.hierarchy_ok() for sc in ow.scores)


def test_all_named_adversaries_build(tele_1296):
    t = build_fiber_table(tele_1296)
    for name in ADVERSARY_BUILDERS:
        adv = build_adversary(name, table=t, split=2, budget=50)
        assert callable(adv)
    with pytest.raises(Exception):
        build_adversary("no-such-adversary")


# ---------------------------------------------------------------------------
# kdf factoring
# ---------------------------------------------------------------------------

def test_kdf_of_observable_always_factors(tele_1296):
    t = build_fiber_table(tele_1296)
    rep = check_kdf_factoring(kdf_hash_observable(tele_1296), t)
    assert rep.factors
    assert rep.counterexample is None
    assert rep.fibers_checked == t.image_size


def test_kdf_of_encoding_fails_on_wide_fibers(tele_1296):
    t = build_fiber_table(tele_1296)
    kdf = kdf_hash_encoding(tele_1296)
    rep = check_kdf_factoring(kdf, t)
    assert not rep.factors
    a, b = rep.counterexample
    assert encode_object(a, tele_1296) != encode_object(b, tele_1296)
    assert kdf(a) != kdf(b)
    ya = eval_observable(tele_1296.family, a, tele_1296)
    yb = eval_observable(tele_1296.family, b, tele_1296)
    assert ya.entries == yb.entries


def test_kdf_of_state_path_tracks_fiber_structure(tele_1296):
    # endpoint fibers mix distinct interior paths: path hash can't factor
    t = build_fiber_table(tele_1296)
    rep = check_kdf_factoring(kdf_hash_state_path(tele_1296), t)
    assert not rep.factors
    a, b = rep.counterexample
    assert iterate_path(a, tele_1296) != iterate_path(b, tele_1296)

    # noise-only fibers share their state path: path hash factors
    p = _pinned_linear(noise=NoiseSpec(True, 1.0, 1), q=7, fam_seed=6)
    t2 = build_fiber_table(p)
    assert t2.max_fiber > 1
    rep2 = check_kdf_factoring(kdf_hash_state_path(p), t2)
    assert rep2.factors


def test_kdf_on_injective_table_factors_trivially(tiny_nonlinear):
    t = build_fiber_table(tiny_nonlinear)
    assert t.max_fiber == 1
    for name, builder in KDF_BUILDERS.items():
        rep = check_kdf_factoring(builder(tiny_nonlinear), t)
        assert rep.factors, name
