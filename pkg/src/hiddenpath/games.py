"""Recovery games, scoring and key-derivation factoring.

Two formal experiments share one trial stream: the planted game scores
byte-exact recovery of the sampled witness, the relation game scores any
candidate satisfying the observable equation.  Trial i derives two
independent streams, "trial{i}/plant" and "trial{i}/adversary", so an
adversary never touches the planting randomness, and running both games
over the same root source reproduces identical candidates, which makes
relation-advantage >= planted-advantage an exact set inclusion rather
than a statistical tendency.

Scoring definitions (logged in every report header): coarse_score is the
fraction of steps whose effective increment (macro + micro + noise mod q)
agrees; the raw macro-index agreement is kept alongside as
macro_agreement.  The combined object distance d_x adds four Hamming
terms: state path, macro indices, micro indices, integer noise lifts.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass
from typing import Callable

from .attacks import affine_attack, dp_attack, local_search_round, \
    bayes_fiber_guess, mitm_split
from .fieldcore import ParameterSet, encode_object, hamming
from .observables import PublicObservable, eval_observable, serialize_public
from .oracle import EnumerationGuard, FiberTable, enumerate_support
from .pathgen import (
    MicroObject,
    RandomSource,
    effective_increments,
    is_admissible,
    iterate_path,
    sample_object,
    validate_object,
)

Adversary = Callable[[ParameterSet, PublicObservable, RandomSource],
                     MicroObject | None]


# ---------------------------------------------------------------------------
# recovery scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecoveryScore:
    exact_success: bool
    state_success: bool
    fiber_success: bool
    coarse_score: float
    macro_agreement: float
    d_state: int
    d_x: int
    radius: int | None = None
    within_radius: bool | None = None

    def hierarchy_ok(self) -> bool:
        """exact implies state implies coarse = 1, and exact iff d_x = 0."""
        if self.exact_success and not self.state_success:
            return False
        if self.state_success and self.coarse_score != 1.0:
            return False
        return self.exact_success == (self.d_x == 0)


def score_recovery(candidate: MicroObject, planted: MicroObject,
                   p: ParameterSet,
                   radius: int | None = None) -> RecoveryScore:
    """Score a candidate against the planted witness.

    Both objects must be admissible; a malformed candidate raises rather
    than silently scoring.  Note d_x compares noise lifts as integers, so
    in the aliasing regime (q <= 2B) two admissible witnesses can agree
    on every state yet sit at d_x = 1.
    """
    if p.family is None:
        raise ValueError("parameter set has no observable family")
    validate_object(planted, p)
    validate_object(candidate, p)
    exact = encode_object(candidate, p) == encode_object(planted, p)
    gc, gp = iterate_path(candidate, p), iterate_path(planted, p)
    d_state = hamming(gc, gp)
    inc_c = effective_increments(candidate, p)
    inc_p = effective_increments(planted, p)
    coarse = 1.0 - hamming(inc_c, inc_p) / p.T
    macro = 1.0 - hamming(candidate.macro_indices, planted.macro_indices) / p.T
    d_x = (d_state
           + hamming(candidate.macro_indices, planted.macro_indices)
           + hamming(candidate.micro_indices, planted.micro_indices)
           + hamming(candidate.noise_lifts, planted.noise_lifts))
    fiber = serialize_public(eval_observable(p.family, candidate, p)) == \
        serialize_public(eval_observable(p.family, planted, p))
    within = None if radius is None else d_x <= radius
    return RecoveryScore(exact, d_state == 0, fiber, coarse, macro,
                         d_state, d_x, radius, within)


# ---------------------------------------------------------------------------
# game transcripts
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, trials: int,
                    z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(
        phat * (1.0 - phat) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class GameTranscript:
    kind: str                       # "ow" or "rel"
    adversary: str
    trials: int
    successes: int
    exceptions: int
    malformed: int
    advantage: float
    ci_low: float
    ci_high: float
    wall_time_s: float
    scores: list[RecoveryScore]

    def summary(self) -> str:
        return (f"{self.kind} game, adversary={self.adversary}: "
                f"{self.successes}/{self.trials} "
                f"(adv {self.advantage:.4f}, "
                f"95% CI [{self.ci_low:.4f}, {self.ci_high:.4f}], "
                f"{self.exceptions} exceptions)")


def _transcript(kind, name, trials, successes, exceptions, malformed,
                t0, scores) -> GameTranscript:
    low, high = wilson_interval(successes, trials)
    return GameTranscript(kind, name, trials, successes, exceptions,
                          malformed, successes / trials, low, high,
                          time.perf_counter() - t0, scores)


def _run_trials(p: ParameterSet, adversary: Adversary, trials: int,
                rng: RandomSource):
    """Yield (planted, serialized Y, candidate or None, failure kind)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if p.family is None:
        raise ValueError("parameter set has no observable family")
    for i in range(trials):
        planted = sample_object(p, rng.child(f"trial{i}/plant"))
        y = eval_observable(p.family, planted, p)
        try:
            cand = adversary(p, y, rng.child(f"trial{i}/adversary"))
        except Exception:
            yield planted, y, None, "exception"
            continue
        if cand is None:
            yield planted, y, None, "empty"
        elif not is_admissible(cand, p):
            yield planted, y, None, "malformed"
        else:
            yield planted, y, cand, None


def run_ow_game(p: ParameterSet, adversary: Adversary, trials: int,
                rng: RandomSource, adversary_name: str = "adversary",
                collect_scores: bool = False) -> GameTranscript:
    """Planted-recovery experiment: win on byte-exact encoded equality."""
    t0 = time.perf_counter()
    successes = exceptions = malformed = 0
    scores: list[RecoveryScore] = []
    for planted, y, cand, fail in _run_trials(p, adversary, trials, rng):
        if fail == "exception":
            exceptions += 1
        elif fail == "malformed":
            malformed += 1
        if cand is None:
            continue
        if encode_object(cand, p) == encode_object(planted, p):
            successes += 1
        if collect_scores:
            scores.append(score_recovery(cand, planted, p))
    return _transcript("ow", adversary_name, trials, successes, exceptions,
                       malformed, t0, scores)


def run_rel_game(p: ParameterSet, adversary: Adversary, trials: int,
                 rng: RandomSource, adversary_name: str = "adversary",
                 collect_scores: bool = False) -> GameTranscript:
    """Relation experiment: win on observable equality alone."""
    t0 = time.perf_counter()
    successes = exceptions = malformed = 0
    scores: list[RecoveryScore] = []
    for planted, y, cand, fail in _run_trials(p, adversary, trials, rng):
        if fail == "exception":
            exceptions += 1
        elif fail == "malformed":
            malformed += 1
        if cand is None:
            continue
        out = eval_observable(p.family, cand, p)
        if serialize_public(out) == serialize_public(y):
            successes += 1
        if collect_scores:
            scores.append(score_recovery(cand, planted, p))
    return _transcript("rel", adversary_name, trials, successes, exceptions,
                       malformed, t0, scores)


def run_paired_games(p: ParameterSet, adversary: Adversary, trials: int,
                     rng: RandomSource, adversary_name: str = "adversary",
                     collect_scores: bool = False
                     ) -> tuple[GameTranscript, GameTranscript]:
    """Both scorings over one candidate stream.

    Every planted win is also a relation win on the same trial, so the
    returned pair satisfies rel.successes >= ow.successes exactly.
    """
    t0 = time.perf_counter()
    ow = rel = exceptions = malformed = 0
    scores: list[RecoveryScore] = []
    for planted, y, cand, fail in _run_trials(p, adversary, trials, rng):
        if fail == "exception":
            exceptions += 1
        elif fail == "malformed":
            malformed += 1
        if cand is None:
            continue
        if serialize_public(eval_observable(p.family, cand, p)) == \
                serialize_public(y):
            rel += 1
            if encode_object(cand, p) == encode_object(planted, p):
                ow += 1
        if collect_scores:
            scores.append(score_recovery(cand, planted, p))
    ow_t = _transcript("ow", adversary_name, trials, ow, exceptions,
                       malformed, t0, scores)
    rel_t = _transcript("rel", adversary_name, trials, rel, exceptions,
                        malformed, t0, scores)
    return ow_t, rel_t


# ---------------------------------------------------------------------------
# built-in adversaries
# ---------------------------------------------------------------------------

def random_guess_adversary() -> Adversary:
    """Ignores Y; resamples from the generator."""
    def run(p, y, rng):
        return sample_object(p, rng)
    return run


def empty_adversary() -> Adversary:
    def run(p, y, rng):
        return None
    return run


def bayes_fiber_adversary(table: FiberTable) -> Adversary:
    """Uniform draw from the exact fiber of Y; optimal for planted recovery."""
    def run(p, y, rng):
        try:
            return bayes_fiber_guess(y, table, rng)
        except ValueError:
            return None
    return run


def linear_collapse_adversary(probes: int = 32) -> Adversary:
    def run(p, y, rng):
        return affine_attack(p, y, probes=probes, rng=rng).candidate
    return run


def dp_adversary(guard: EnumerationGuard | None = None) -> Adversary:
    def run(p, y, rng):
        return dp_attack(p, y, guard=guard).candidate
    return run


def mitm_adversary(split: int | None = None,
                   guard: EnumerationGuard | None = None) -> Adversary:
    def run(p, y, rng):
        at = split if split is not None else max(1, p.T // 2)
        return mitm_split(p, y, at, guard=guard, rng=rng).candidate
    return run


def local_search_adversary(budget: int = 2000, restarts: int = 16) -> Adversary:
    def run(p, y, rng):
        return local_search_round(p, y, budget, restarts=restarts,
                                  rng=rng).candidate
    return run


def relation_only_adversary(guard: EnumerationGuard | None = None) -> Adversary:
    """Sees Y only through a satisfaction check on enumerated candidates.

    Returns the first support element satisfying the relation, which makes
    its planted success on a fiber of size k exactly 1/k: it has no way to
    prefer the planted member.
    """
    def run(p, y, rng):
        want = serialize_public(y)
        for cand in enumerate_support(p, guard):
            out = eval_observable(p.family, cand, p)
            if serialize_public(out) == want:
                return cand
        return None
    return run


ADVERSARY_BUILDERS = {
    "random-guess": random_guess_adversary,
    "empty": empty_adversary,
    "bayes-fiber": bayes_fiber_adversary,
    "linear-collapse": linear_collapse_adversary,
    "dp": dp_adversary,
    "mitm": mitm_adversary,
    "local-search": local_search_adversary,
    "relation-only": relation_only_adversary,
}


def build_adversary(name: str, *, table: FiberTable | None = None,
                    guard: EnumerationGuard | None = None,
                    budget: int = 2000, split: int | None = None,
                    probes: int = 32) -> Adversary:
    """Instantiate a named adversary with whatever context it needs."""
    if name == "random-guess":
        return random_guess_adversary()
    if name == "empty":
        return empty_adversary()
    if name == "bayes-fiber":
        if table is None:
            raise ValueError("bayes-fiber needs a fiber table")
        return bayes_fiber_adversary(table)
    if name == "linear-collapse":
        return linear_collapse_adversary(probes=probes)
    if name == "dp":
        return dp_adversary(guard=guard)
    if name == "mitm":
        return mitm_adversary(split=split, guard=guard)
    if name == "local-search":
        return local_search_adversary(budget=budget)
    if name == "relation-only":
        return relation_only_adversary(guard=guard)
    raise ValueError(f"unknown adversary {name!r}; "
                     f"known: {', '.join(sorted(ADVERSARY_BUILDERS))}")


# ---------------------------------------------------------------------------
# key-derivation factoring
# ---------------------------------------------------------------------------

@dataclass
class KdfReport:
    factors: bool
    counterexample: tuple[MicroObject, MicroObject] | None
    fibers_checked: int


def check_kdf_factoring(kdf: Callable[[MicroObject], bytes],
                        table: FiberTable) -> KdfReport:
    """Is the derivation rule constant on every observable fiber?

    A rule usable with relation-level security must depend on the witness
    only through the observable; the first fiber carrying two distinct
    derived values is returned as the counterexample.
    """
    checked = 0
    for key in table.fibers:
        members = table.members(key)
        checked += 1
        first = kdf(members[0])
        for other in members[1:]:
            if kdf(other) != first:
                return KdfReport(False, (members[0], other), checked)
    return KdfReport(True, None, checked)


def kdf_hash_encoding(p: ParameterSet) -> Callable[[MicroObject], bytes]:
    """Digest of the canonical witness encoding (fails on non-injective maps)."""
    def kdf(x: MicroObject) -> bytes:
        return hashlib.blake2b(encode_object(x, p), digest_size=32).digest()
    return kdf


def kdf_hash_state_path(p: ParameterSet) -> Callable[[MicroObject], bytes]:
    """Digest of the visited state sequence."""
    def kdf(x: MicroObject) -> bytes:
        h = hashlib.blake2b(digest_size=32)
        for state in iterate_path(x, p):
            h.update(repr(state).encode())
        return h.digest()
    return kdf


def kdf_hash_observable(p: ParameterSet) -> Callable[[MicroObject], bytes]:
    """Digest of the serialized observable; factors by construction."""
    if p.family is None:
        raise ValueError("parameter set has no observable family")

    def kdf(x: MicroObject) -> bytes:
        y = serialize_public(eval_observable(p.family, x, p))
        return hashlib.blake2b(y, digest_size=32).digest()
    return kdf


KDF_BUILDERS = {
    "hash-of-encoding": kdf_hash_encoding,
    "hash-of-state-path": kdf_hash_state_path,
    "hash-of-observable": kdf_hash_observable,
}
