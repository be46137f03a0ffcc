"""Exact reference oracles: enumeration, fiber tables and counting.

Everything here is ground truth for the rest of the package.  Counts are
Python ints, enumeration is plain nested iteration, and the two endpoint
counters (dynamic programming and character sums) are genuinely
independent code paths so they can check each other.

Every potentially explosive operation is gated by an EnumerationGuard:
the exact work or object count is computed from closed-form formulas
first, and CapExceeded (carrying the needed count) is raised before any
loop starts.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from .fieldcore import (
    BigCount,
    CapExceeded,
    Modulus,
    ParameterSet,
    Vec,
    all_states,
    encode_object,
    decode_object,
    state_index,
    vec_reduce,
    vec_sub,
)
from .observables import ObservableFamily, eval_observable, serialize_public
from .pathgen import MicroObject, RandomSource, iterate_path

DEFAULT_CAP = 2 ** 24


@dataclass
class EnumerationGuard:
    """Work cap for enumerations and tables."""

    cap: int = DEFAULT_CAP

    def check(self, needed: int, what: str) -> None:
        if needed > self.cap:
            raise CapExceeded(needed, self.cap, what)


def _guard(guard: EnumerationGuard | None) -> EnumerationGuard:
    return guard if guard is not None else EnumerationGuard()


# ---------------------------------------------------------------------------
# support enumeration and fiber tables
# ---------------------------------------------------------------------------

def support_size(p: ParameterSet) -> BigCount:
    """|S_P| = (free x0 choices) * (b * r * s)^T, exactly."""
    starts = 1 if p.fixed_start is not None else p.q ** p.n
    per_step = p.b * p.r * p.noise_support_size()
    return starts * per_step ** p.T


def _noise_step_vectors(p: ParameterSet) -> list[Vec]:
    if not p.noise.enabled:
        return [(0,) * p.n]
    rng = range(-p.noise.bound, p.noise.bound + 1)
    return [tuple(v) for v in itertools.product(rng, repeat=p.n)]


def enumerate_support(p: ParameterSet,
                      guard: EnumerationGuard | None = None) -> Iterator[MicroObject]:
    """Yield every admissible witness, in a fixed deterministic order."""
    _guard(guard).check(support_size(p), "support enumeration")
    starts: Sequence[Vec]
    if p.fixed_start is not None:
        starts = [p.fixed_start]
    else:
        starts = list(all_states(p.n, p.q))
    noise_vecs = _noise_step_vectors(p)
    for x0 in starts:
        for macro in itertools.product(range(p.b), repeat=p.T):
            for micro in itertools.product(range(p.r), repeat=p.T):
                for lifts in itertools.product(noise_vecs, repeat=p.T):
                    yield MicroObject(x0, macro, micro, lifts)


class FiberTable:
    """Serialized observable -> list of encoded witnesses in its preimage."""

    def __init__(self, p: ParameterSet, family: ObservableFamily,
                 fibers: dict[bytes, list[bytes]], support: int):
        self.p = p
        self.family = family
        self.fibers = fibers
        self.support = support
        self._state_class_min: dict[tuple, bytes] | None = None

    @property
    def image_size(self) -> int:
        return len(self.fibers)

    def fiber_sizes(self) -> list[int]:
        return [len(v) for v in self.fibers.values()]

    @property
    def max_fiber(self) -> int:
        return max(self.fiber_sizes())

    def members(self, key: bytes) -> list[MicroObject]:
        return [decode_object(enc, self.p) for enc in self.fibers.get(key, [])]

    def encoded_objects(self) -> Iterator[bytes]:
        for encs in self.fibers.values():
            yield from encs

    def size_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for k in self.fiber_sizes():
            hist[k] = hist.get(k, 0) + 1
        return hist


def build_fiber_table(p: ParameterSet,
                      guard: EnumerationGuard | None = None) -> FiberTable:
    """Exhaustive observable-fiber table for an enumerable parameter set."""
    if p.family is None:
        raise ValueError("parameter set has no observable family")
    fibers: dict[bytes, list[bytes]] = {}
    count = 0
    for x in enumerate_support(p, guard):
        key = serialize_public(eval_observable(p.family, x, p))
        fibers.setdefault(key, []).append(encode_object(x, p))
        count += 1
    return FiberTable(p, p.family, fibers, count)


@dataclass
class IdentifiabilityReport:
    support: int
    image_size: int
    injective: bool
    max_fiber: int
    avg_fiber_seen: float     # expected size of the fiber a random witness sits in


def identifiability_report(table: FiberTable) -> IdentifiabilityReport:
    sizes = table.fiber_sizes()
    n = table.support
    return IdentifiabilityReport(
        support=n,
        image_size=len(sizes),
        injective=all(k == 1 for k in sizes),
        max_fiber=max(sizes),
        avg_fiber_seen=sum(k * k for k in sizes) / n,
    )


def _state_paths(table: FiberTable) -> dict[tuple, bytes]:
    """Lexicographically smallest encoding per state-path class."""
    if table._state_class_min is None:
        best: dict[tuple, bytes] = {}
        for enc in table.encoded_objects():
            gamma = iterate_path(decode_object(enc, table.p), table.p)
            cur = best.get(gamma)
            if cur is None or enc < cur:
                best[gamma] = enc
        table._state_class_min = best
    return table._state_class_min


def quotient_identifiability_check(
        table: FiberTable, relation: str = "state_path",
) -> tuple[bool, tuple[MicroObject, MicroObject] | None]:
    """Is the observable constant-injective on state-path classes?

    True iff every fiber's members share one state path; otherwise returns
    a witness pair from one offending fiber.
    """
    if relation != "state_path":
        raise ValueError(f"unsupported relation {relation!r}")
    for key, encs in table.fibers.items():
        first = decode_object(encs[0], table.p)
        gamma0 = iterate_path(first, table.p)
        for enc in encs[1:]:
            other = decode_object(enc, table.p)
            if iterate_path(other, table.p) != gamma0:
                return False, (first, other)
    return True, None


def canonical_representative(x: MicroObject, table: FiberTable,
                             relation: str = "state_path") -> MicroObject:
    """Smallest-encoding member of x's equivalence class in the support."""
    if relation != "state_path":
        raise ValueError(f"unsupported relation {relation!r}")
    gamma = iterate_path(x, table.p)
    best = _state_paths(table).get(gamma)
    if best is None:
        raise ValueError("witness is not in the enumerated support")
    return decode_object(best, table.p)


# ---------------------------------------------------------------------------
# exact counting
# ---------------------------------------------------------------------------

def count_histories(b: int, r: int, s: int, T: int, *, n: int = 0, q: int = 1,
                    free_start: bool = False) -> BigCount:
    """(b r s)^T histories, times q^n when the start state is free."""
    if min(b, r, s) < 1 or T < 1:
        raise ValueError("alphabet sizes and T must be >= 1")
    total = (b * r * s) ** T
    if free_start:
        if n < 1 or q < 2:
            raise ValueError("free start needs n >= 1 and q >= 2")
        total *= q ** n
    return total


def _increment_permutations(alphabet: Sequence[Vec], modulus: Modulus,
                            n: int) -> list[list[int]]:
    """For each alphabet vector d, the index map u -> u + d on Z_q^n."""
    q = modulus.q
    size = q ** n
    perms = []
    for d in alphabet:
        perm = [0] * size
        for idx in range(size):
            u = _index_state_cached(idx, n, q)
            perm[idx] = state_index(tuple((a + b) % q for a, b in zip(u, d)), q)
        perms.append(perm)
    return perms


def _index_state_cached(idx: int, n: int, q: int) -> Vec:
    coords = [0] * n
    for i in range(n - 1, -1, -1):
        idx, coords[i] = divmod(idx, q)
    return tuple(coords)


def endpoint_counts_all(alphabet: Sequence[Vec], T: int, start: Vec,
                        modulus: Modulus,
                        guard: EnumerationGuard | None = None) -> list[BigCount]:
    """Exact endpoint distribution of T-step macro walks, indexed by state_index."""
    n = len(start)
    q = modulus.q
    size = q ** n
    _guard(guard).check(size * len(alphabet) * max(T, 1), "endpoint DP")
    perms = _increment_permutations(alphabet, modulus, n)
    counts = [0] * size
    counts[state_index(vec_reduce(start, q), q)] = 1
    for _ in range(T):
        nxt = [0] * size
        for idx, c in enumerate(counts):
            if c:
                for perm in perms:
                    nxt[perm[idx]] += c
        counts = nxt
    return counts


def endpoint_count_dp(alphabet: Sequence[Vec], T: int, start: Vec, end: Vec,
                      modulus: Modulus,
                      guard: EnumerationGuard | None = None) -> BigCount:
    """Exact number of length-T macro walks from start to end."""
    counts = endpoint_counts_all(alphabet, T, start, modulus, guard)
    return counts[state_index(vec_reduce(end, modulus.q), modulus.q)]


def endpoint_count_characters(alphabet: Sequence[Vec], T: int, start: Vec,
                              end: Vec, modulus: Modulus,
                              raw: bool = False) -> BigCount | float:
    """Character-sum endpoint count (independent of the DP route).

    Averages chi_w(a - b) * (sum_d chi_w(d))^T over all q^n characters
    chi_w(x) = exp(2 pi i <w, x> / q), with compensated summation.  With
    raw=True the unrounded real part is returned; otherwise the value is
    rounded and checked to be within 1e-6 relative of an integer.
    """
    modulus.require_prime()
    q = modulus.q
    n = len(start)
    if len(end) != n or any(len(d) != n for d in alphabet):
        raise ValueError("dimension mismatch")
    diff = vec_sub(vec_reduce(start, q), vec_reduce(end, q), q)
    tau = 2.0 * math.pi / q
    reals: list[float] = []
    imags: list[float] = []
    for w in all_states(n, q):
        s = 0j
        for d in alphabet:
            s += cmath.exp(1j * tau * (sum(a * b for a, b in zip(w, d)) % q))
        phase = cmath.exp(1j * tau * (sum(a * b for a, b in zip(w, diff)) % q))
        term = phase * s ** T
        reals.append(term.real)
        imags.append(term.imag)
    total = complex(math.fsum(reals), math.fsum(imags)) / q ** n
    if raw:
        return total.real
    nearest = round(total.real)
    scale = max(1.0, abs(float(nearest)))
    if abs(total.real - nearest) > 1e-6 * scale or abs(total.imag) > 1e-6 * scale:
        raise ValueError(f"character sum did not converge to an integer: {total}")
    return int(nearest)


class MultiplicityMap:
    """m(u) = number of (macro, micro, noise) triples summing to u mod q."""

    def __init__(self, counts: dict[Vec, int], total: int):
        self.counts = counts
        self.total = total

    def m(self, u: Vec) -> int:
        return self.counts.get(u, 0)

    def history_count(self, increments: Sequence[Vec]) -> BigCount:
        """Witness realizations of an increment sequence: product of m(u_i)."""
        total = 1
        for u in increments:
            total *= self.m(u)
            if total == 0:
                return 0
        return total

    def path_realizations(self, gamma: Sequence[Vec], q: int) -> BigCount:
        """Realizations of a state path via its consecutive differences."""
        incs = [vec_sub(gamma[i + 1], gamma[i], q) for i in range(len(gamma) - 1)]
        return self.history_count(incs)


def multiplicity_map(p: ParameterSet,
                     guard: EnumerationGuard | None = None) -> MultiplicityMap:
    """Exhaustive per-step multiplicity of effective increments."""
    s = p.noise_support_size()
    _guard(guard).check(p.b * p.r * s, "multiplicity map")
    counts: dict[Vec, int] = {}
    for d in p.macro_alphabet:
        for e in p.micro_alphabet:
            for eta in _noise_step_vectors(p):
                u = tuple((a + b + c) % p.q for a, b, c in zip(d, e, eta))
                counts[u] = counts.get(u, 0) + 1
    return MultiplicityMap(counts, p.b * p.r * s)


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def projection_fiber_count(n: int, k: int, T: int, q: int, *,
                           endpoints_fixed: bool = False,
                           projected: Sequence[Vec] | None = None,
                           endpoints: tuple[Vec, Vec] | None = None) -> BigCount:
    """State sequences over Z_q^n agreeing with a first-k-coordinate view.

    q^((n-k)(T+1)) with free endpoints, q^((n-k)(T-1)) when both endpoint
    states are pinned; 0 when a concrete projected view contradicts the
    pinned endpoints.
    """
    if not (0 <= k <= n) or T < 1 or q < 2:
        raise ValueError("need 0 <= k <= n, T >= 1, q >= 2")
    if endpoints is not None:
        endpoints_fixed = True
        if projected is not None:
            a, b = endpoints
            if (tuple(projected[0]) != tuple(c % q for c in a[:k])
                    or tuple(projected[-1]) != tuple(c % q for c in b[:k])):
                return 0
    exponent = (n - k) * (T - 1 if endpoints_fixed else T + 1)
    return q ** exponent


def projection_fiber_enumerate(projected: Sequence[Vec], n: int, k: int,
                               T: int, modulus: Modulus, *,
                               endpoints: tuple[Vec, Vec] | None = None,
                               guard: EnumerationGuard | None = None) -> BigCount:
    """Brute-force cross-check of projection_fiber_count."""
    q = modulus.q
    if len(projected) != T + 1:
        raise ValueError("projected view must have T+1 states")
    _guard(guard).check(q ** (n * (T + 1)), "projection fiber enumeration")
    count = 0
    states = list(all_states(n, q))
    for path in itertools.product(states, repeat=T + 1):
        if any(s[:k] != tuple(pv) for s, pv in zip(path, projected)):
            continue
        if endpoints is not None:
            a, b = endpoints
            if path[0] != vec_reduce(a, q) or path[-1] != vec_reduce(b, q):
                continue
        count += 1
    return count


# ---------------------------------------------------------------------------
# Hamming geometry
# ---------------------------------------------------------------------------

def hamming_sphere_size(n: int, k: int, q: int) -> BigCount:
    """Words at distance exactly k from a fixed word: C(n,k) (q-1)^k."""
    if k < 0 or n < 0 or q < 2:
        raise ValueError("need n, k >= 0 and q >= 2")
    if k > n:
        return 0
    return math.comb(n, k) * (q - 1) ** k


def hamming_ball_size(n: int, k: int, q: int) -> BigCount:
    return sum(hamming_sphere_size(n, j, q) for j in range(min(k, n) + 1))


@dataclass
class ConcentrationReport:
    trials: int
    expected_mean: float
    empirical_mean: float
    mean_tolerance: float      # 4 standard errors
    mean_ok: bool
    tail_threshold: int
    tail_bound: float          # Hoeffding: 2 exp(-2 t^2 / n)
    tail_fraction: float
    tail_ok: bool

    @property
    def ok(self) -> bool:
        return self.mean_ok and self.tail_ok


def hamming_concentration_check(n: int, modulus: Modulus, trials: int,
                                rng: RandomSource,
                                tail_threshold: int | None = None) -> ConcentrationReport:
    """Empirical distance of uniform pairs vs Binomial(n, 1 - 1/q) facts."""
    q = modulus.q
    if trials < 1:
        raise ValueError("need at least one trial")
    expected = n * (1.0 - 1.0 / q)
    t = tail_threshold if tail_threshold is not None else math.ceil(math.sqrt(n))
    bound = 2.0 * math.exp(-2.0 * t * t / n)
    total = 0
    tail_hits = 0
    for _ in range(trials):
        d = sum(1 for _ in range(n) if rng.randrange(q) != rng.randrange(q))
        total += d
        if abs(d - expected) >= t:
            tail_hits += 1
    mean = total / trials
    mean_tol = 4.0 * math.sqrt(n / 4.0 / trials)
    tail_fraction = tail_hits / trials
    tail_tol = 4.0 * math.sqrt(max(bound * (1.0 - bound), 1e-12) / trials)
    return ConcentrationReport(
        trials=trials,
        expected_mean=expected,
        empirical_mean=mean,
        mean_tolerance=mean_tol,
        mean_ok=abs(mean - expected) <= mean_tol,
        tail_threshold=t,
        tail_bound=bound,
        tail_fraction=tail_fraction,
        tail_ok=tail_fraction <= min(1.0, bound + tail_tol),
    )


# ---------------------------------------------------------------------------
# observation-noise identifiability
# ---------------------------------------------------------------------------

@dataclass
class OverlapReport:
    identifiable: bool
    witness: tuple[MicroObject, MicroObject] | None
    support: int
    pairs_checked: int


def obs_noise_overlap_check(p: ParameterSet,
                            guard: EnumerationGuard | None = None) -> OverlapReport:
    """Can two distinct witnesses collide for SOME observation noise values?

    Exhausts the per-entry noise support of a quantized-real family: for
    each witness and entry the attainable quantized bins are listed; two
    witnesses can collide iff the bin sets intersect at every entry.
    identifiable=True means no such pair exists, i.e. the observable
    separates all witnesses regardless of observation noise.
    """
    from .observables import QuantizedReal

    fam = p.family
    if not isinstance(fam, QuantizedReal):
        raise ValueError("overlap check applies to quantized-real families")
    g = _guard(guard)
    n_support = support_size(p)
    g.check(n_support * n_support * fam.m, "observation-noise overlap check")
    if fam.obs_noise.enabled:
        noise_values = range(-fam.obs_noise.bound, fam.obs_noise.bound + 1)
    else:
        noise_values = range(0, 1)
    mask = (1 << fam.ell) - 1
    bin_sets: list[tuple[MicroObject, list[frozenset[int]]]] = []
    for x in enumerate_support(p, g):
        feats = fam.features(x, p)
        per_entry = []
        for j, f in enumerate(feats):
            tau = fam.quantizer.taus[j]
            off = fam.quantizer.offsets[j]
            per_entry.append(frozenset(
                round((f + e + off) / tau) & mask for e in noise_values))
        bin_sets.append((x, per_entry))
    pairs = 0
    for i in range(len(bin_sets)):
        xi, bi = bin_sets[i]
        for j in range(i + 1, len(bin_sets)):
            xj, bj = bin_sets[j]
            pairs += 1
            if all(s & t for s, t in zip(bi, bj)):
                return OverlapReport(False, (xi, xj), len(bin_sets), pairs)
    return OverlapReport(True, None, len(bin_sets), pairs)
