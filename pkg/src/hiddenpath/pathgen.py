"""Hidden-path generation.

A witness is sampled from four independent deterministic streams derived
from one root seed by domain separation: labels "x0", "macro", "micro"
and "noise".  The stream construction is a BLAKE2b keyed counter mode
(key' = BLAKE2b(data=label, key=parent_key), block_i = BLAKE2b(i, key')),
so every draw is reproducible from (seed, label) alone and distinct
labels give independent streams.

Step noise uses a truncated discrete Gaussian on [-B, B] with weights
proportional to exp(-pi z^2 / sigma^2), sampled by inverse CDF on a
cached table.  Witnesses store the integer lifts (pre-reduction values),
not their mod-q residues; canonical_lift recovers a lift from a residue
and is injective exactly when q > 2B.
"""

from __future__ import annotations

import hashlib
import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .fieldcore import (
    AliasError,
    Modulus,
    ParameterSet,
    Vec,
    hamming,
    vec_add,
    vec_reduce,
)


# ---------------------------------------------------------------------------
# deterministic randomness
# ---------------------------------------------------------------------------

class RandomSource:
    """Seed- and label-addressed deterministic random stream.

    Uniform integers come from rejection sampling on the keyed stream, so
    randrange(n) is exactly uniform for every n.  child(label) derives an
    independent stream; chaining labels keeps domains separated.
    """

    _BLOCK = 64

    def __init__(self, seed: bytes, label: str = ""):
        if not isinstance(seed, bytes) or len(seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")
        self.label = label
        self._key = hashlib.blake2b(
            label.encode("utf-8"), key=seed, digest_size=32).digest()
        self._counter = 0
        self._buf = b""
        self._pos = 0

    def child(self, label: str) -> "RandomSource":
        return RandomSource(self._key, label)

    def randbytes(self, k: int) -> bytes:
        out = bytearray()
        while len(out) < k:
            if self._pos == len(self._buf):
                self._buf = hashlib.blake2b(
                    self._counter.to_bytes(8, "little"),
                    key=self._key, digest_size=self._BLOCK).digest()
                self._counter += 1
                self._pos = 0
            take = min(k - len(out), len(self._buf) - self._pos)
            out += self._buf[self._pos:self._pos + take]
            self._pos += take
        return bytes(out)

    def randbits(self, k: int) -> int:
        if k <= 0:
            raise ValueError("k must be positive")
        nbytes = (k + 7) // 8
        return int.from_bytes(self.randbytes(nbytes), "big") >> (8 * nbytes - k)

    def randrange(self, n: int) -> int:
        if n < 1:
            raise ValueError("empty range")
        if n == 1:
            return 0
        k = (n - 1).bit_length()
        while True:
            v = self.randbits(k)
            if v < n:
                return v

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return self.randbits(53) / (1 << 53)

    def choice(self, seq: Sequence):
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Truncated discrete Gaussian step noise on [-bound, bound]."""

    enabled: bool
    sigma: float = 0.0
    bound: int = 0

    def __post_init__(self):
        if self.enabled:
            if self.sigma <= 0:
                raise ValueError("enabled noise needs sigma > 0")
            if self.bound < 0:
                raise ValueError("bound must be >= 0")

    @classmethod
    def disabled(cls) -> "NoiseSpec":
        return cls(enabled=False)

    def support_size(self, n: int) -> int:
        """Per-step support (2B+1)^n, or 1 when disabled."""
        return (2 * self.bound + 1) ** n if self.enabled else 1

    def weights(self) -> tuple[float, ...]:
        """Normalized weights for z = -bound .. bound."""
        if not self.enabled:
            raise ValueError("noise is disabled")
        return _tdg_weights(self.sigma, self.bound)


@lru_cache(maxsize=None)
def _tdg_weights(sigma: float, bound: int) -> tuple[float, ...]:
    raw = [math.exp(-math.pi * z * z / (sigma * sigma))
           for z in range(-bound, bound + 1)]
    total = sum(raw)
    return tuple(w / total for w in raw)


@lru_cache(maxsize=None)
def _tdg_cdf(sigma: float, bound: int) -> tuple[float, ...]:
    acc, cdf = 0.0, []
    for w in _tdg_weights(sigma, bound):
        acc += w
        cdf.append(acc)
    cdf[-1] = 1.0
    return tuple(cdf)


def sample_tdg(spec: NoiseSpec, rng: RandomSource) -> int:
    """One truncated-discrete-Gaussian draw in [-bound, bound] by inverse CDF."""
    if not spec.enabled:
        raise ValueError("cannot sample from disabled noise")
    cdf = _tdg_cdf(spec.sigma, spec.bound)
    return bisect_right(cdf, rng.uniform()) - spec.bound


def canonical_lift(residue: int, bound: int, modulus: Modulus) -> int | None:
    """The unique lift of residue in [-bound, bound], or None if there is none.

    Raises AliasError when q <= 2*bound: two distinct lifts would share a
    residue and no canonical choice exists.
    """
    q = modulus.q
    if bound < 0:
        raise ValueError("bound must be >= 0")
    if q <= 2 * bound:
        raise AliasError(f"q = {q} <= 2B = {2 * bound}: lifts alias")
    r = residue % q
    if r <= bound:
        return r
    if r >= q - bound:
        return r - q
    return None


# ---------------------------------------------------------------------------
# witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MicroObject:
    """A microscopic witness: start state plus per-step choices.

    macro_indices / micro_indices index into the parameter set's alphabets;
    noise_lifts holds the integer noise vectors before reduction mod q.
    The derived state path is iterate_path(x, p); witness equality is plain
    field equality, byte-exact equality goes through encode_object.
    """

    x0: Vec
    macro_indices: tuple[int, ...]
    micro_indices: tuple[int, ...]
    noise_lifts: tuple[Vec, ...]


def validate_object(x: MicroObject, p: ParameterSet) -> None:
    """Raise ValueError unless x is admissible under p."""
    if len(x.x0) != p.n or any(not (0 <= c < p.q) for c in x.x0):
        raise ValueError("x0 is not a canonical state vector")
    if len(x.macro_indices) != p.T or len(x.micro_indices) != p.T:
        raise ValueError("index sequences must have length T")
    if len(x.noise_lifts) != p.T:
        raise ValueError("noise sequence must have length T")
    if any(not (0 <= i < p.b) for i in x.macro_indices):
        raise ValueError("macro index out of range")
    if any(not (0 <= i < p.r) for i in x.micro_indices):
        raise ValueError("micro index out of range")
    bound = p.noise.bound if p.noise.enabled else 0
    for step in x.noise_lifts:
        if len(step) != p.n:
            raise ValueError("noise vectors must have dimension n")
        if any(abs(c) > bound for c in step):
            raise ValueError("noise lift outside [-B, B]")
    if p.fixed_start is not None and x.x0 != p.fixed_start:
        raise ValueError("x0 does not match the pinned start state")


def is_admissible(x: MicroObject, p: ParameterSet) -> bool:
    try:
        validate_object(x, p)
    except ValueError:
        return False
    return True


def sample_object(p: ParameterSet, rng: RandomSource) -> MicroObject:
    """Draw one admissible witness from the four domain-separated streams."""
    src_x0 = rng.child("x0")
    src_macro = rng.child("macro")
    src_micro = rng.child("micro")
    src_noise = rng.child("noise")
    if p.fixed_start is not None:
        x0 = p.fixed_start
    else:
        x0 = tuple(src_x0.randrange(p.q) for _ in range(p.n))
    macro = tuple(src_macro.randrange(p.b) for _ in range(p.T))
    micro = tuple(src_micro.randrange(p.r) for _ in range(p.T))
    if p.noise.enabled:
        lifts = tuple(
            tuple(sample_tdg(p.noise, src_noise) for _ in range(p.n))
            for _ in range(p.T))
    else:
        zero = (0,) * p.n
        lifts = tuple(zero for _ in range(p.T))
    return MicroObject(x0, macro, micro, lifts)


def effective_increments(x: MicroObject, p: ParameterSet) -> tuple[Vec, ...]:
    """Per-step totals (macro + micro + noise) mod q."""
    q = p.q
    out = []
    for i in range(p.T):
        d = p.macro_alphabet[x.macro_indices[i]]
        e = p.micro_alphabet[x.micro_indices[i]]
        eta = x.noise_lifts[i]
        out.append(tuple((a + b + c) % q for a, b, c in zip(d, e, eta)))
    return tuple(out)


def iterate_path(x: MicroObject, p: ParameterSet) -> tuple[Vec, ...]:
    """The T+1 visited states, starting at x0."""
    states = [vec_reduce(x.x0, p.q)]
    for u in effective_increments(x, p):
        states.append(vec_add(states[-1], u, p.q))
    return tuple(states)


def object_distance(a: MicroObject, b: MicroObject, p: ParameterSet) -> int:
    """Structural witness distance: mismatched visited states plus
    mismatched macro indices, micro indices, and per-step noise vectors.

    Zero exactly when the two objects are identical as witnesses.
    """
    d = hamming(iterate_path(a, p), iterate_path(b, p))
    d += hamming(a.macro_indices, b.macro_indices)
    d += hamming(a.micro_indices, b.micro_indices)
    d += hamming(a.noise_lifts, b.noise_lifts)
    return d


# ---------------------------------------------------------------------------
# generator diagnostics
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsReport:
    """Sanity statistics over a batch of sampled witnesses."""

    samples: int
    macro_hist: list[list[int]]          # T rows, b columns
    micro_hist: list[list[int]]          # T rows, r columns
    macro_entropy_bits: float            # pooled order-0, bits/symbol
    micro_entropy_bits: float
    state_autocorr: dict[int, float]     # lag -> mean coordinate autocorrelation
    bitstream_bit_entropy: float         # order-0 entropy of encodings, bits/bit


def empirical_entropy_bits(counts: Sequence[int]) -> float:
    """Order-0 entropy of a histogram in bits per symbol."""
    total = sum(counts)
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c:
            pr = c / total
            h -= pr * math.log2(pr)
    return h


def _autocorr(series: Sequence[float], lag: int) -> float | None:
    a = series[:-lag]
    b = series[lag:]
    if len(a) < 2:
        return None
    ma = sum(a) / len(a)
    mb = sum(b) / len(b)
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((x - mb) ** 2 for x in b)
    if va == 0 or vb == 0:
        return 0.0
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    return cov / math.sqrt(va * vb)


def generator_diagnostics(samples: Sequence[MicroObject],
                          p: ParameterSet) -> DiagnosticsReport:
    """Histograms, entropies, state autocorrelation and stream entropy."""
    from .fieldcore import encode_object

    if not samples:
        raise ValueError("need at least one sample")
    macro_hist = [[0] * p.b for _ in range(p.T)]
    micro_hist = [[0] * p.r for _ in range(p.T)]
    for x in samples:
        for i in range(p.T):
            macro_hist[i][x.macro_indices[i]] += 1
            micro_hist[i][x.micro_indices[i]] += 1
    pooled_macro = [sum(col) for col in zip(*macro_hist)]
    pooled_micro = [sum(col) for col in zip(*micro_hist)]

    lags = range(1, min(4, p.T - 1) + 1)
    acc = {lag: [] for lag in lags}
    ones = 0
    bits = 0
    for x in samples:
        path = iterate_path(x, p)
        for c in range(p.n):
            series = [s[c] for s in path]
            for lag in lags:
                rho = _autocorr(series, lag)
                if rho is not None:
                    acc[lag].append(rho)
        enc = encode_object(x, p)
        ones += sum(byte.bit_count() for byte in enc)
        bits += 8 * len(enc)
    autocorr = {lag: (sum(v) / len(v) if v else 0.0) for lag, v in acc.items()}
    return DiagnosticsReport(
        samples=len(samples),
        macro_hist=macro_hist,
        micro_hist=micro_hist,
        macro_entropy_bits=empirical_entropy_bits(pooled_macro),
        micro_entropy_bits=empirical_entropy_bits(pooled_micro),
        state_autocorr=autocorr,
        bitstream_bit_entropy=empirical_entropy_bits([bits - ones, ones]),
    )
