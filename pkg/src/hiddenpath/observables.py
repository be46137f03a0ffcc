"""Observable families: public functionals of a hidden path.

Every family maps a witness to a vector of m entries, each in [0, 2^ell).
Mod-q families (linear projections, transition energies, nonlinear local
sums, endpoint differences and composites of those) emit canonical
residues and require q <= 2^ell so that masking to ell bits is lossless.
The quantized-real family emits rounded, scaled integer features reduced
mod 2^ell.

All coefficient material is derived from the family's 32-byte seed
through the deterministic stream labelled "obs-coeffs", so a family is
fully reproducible from (variant, shape, seed).  The wire format for a
public observable is

    magic "HPOB" | version byte | m (4 LE) | ell (4 LE) | fingerprint (32)
    | entries packed ell bits each, little-endian, zero-padded to bytes

which makes the payload exactly ceil(m*ell/8) bytes.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import ClassVar, Sequence

from .fieldcore import ParameterSet, Vec, vec_dot, vec_reduce, vec_sub
from .pathgen import (
    MicroObject,
    NoiseSpec,
    RandomSource,
    iterate_path,
    sample_tdg,
    validate_object,
)

MAGIC = b"HPOB"
WIRE_VERSION = 1


class FamilyError(ValueError):
    """Family construction or evaluation constraint violated."""


# ---------------------------------------------------------------------------
# public observable container and wire format
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PublicObservable:
    """An emitted observable vector plus the identity of its family."""

    entries: tuple[int, ...]
    ell: int
    fingerprint: bytes
    version: int = WIRE_VERSION

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("ell must be >= 1")
        if not self.entries:
            raise ValueError("need at least one entry")
        top = 1 << self.ell
        if any(not (0 <= e < top) for e in self.entries):
            raise ValueError("entry outside [0, 2^ell)")
        if len(self.fingerprint) != 32:
            raise ValueError("fingerprint must be 32 bytes")

    @property
    def m(self) -> int:
        return len(self.entries)


def serialize_public(pk: PublicObservable) -> bytes:
    """Fixed-layout byte serialization (see module docstring)."""
    header = MAGIC + bytes([pk.version]) + struct.pack("<II", pk.m, pk.ell)
    header += pk.fingerprint
    acc = 0
    for i, e in enumerate(pk.entries):
        acc |= e << (i * pk.ell)
    payload = acc.to_bytes((pk.m * pk.ell + 7) // 8, "little")
    return header + payload


def parse_public(data: bytes) -> PublicObservable:
    """Strict inverse of serialize_public."""
    if len(data) < 45:
        raise ValueError("truncated header")
    if data[:4] != MAGIC:
        raise ValueError("bad magic")
    version = data[4]
    if version != WIRE_VERSION:
        raise ValueError(f"unsupported version {version}")
    m, ell = struct.unpack("<II", data[5:13])
    if m < 1 or ell < 1:
        raise ValueError("bad shape fields")
    fingerprint = data[13:45]
    expected = 45 + (m * ell + 7) // 8
    if len(data) != expected:
        raise ValueError(f"expected {expected} bytes, got {len(data)}")
    acc = int.from_bytes(data[45:], "little")
    mask = (1 << ell) - 1
    entries = tuple((acc >> (i * ell)) & mask for i in range(m))
    if acc >> (m * ell):
        raise ValueError("nonzero padding bits")
    return PublicObservable(entries=entries, ell=ell,
                            fingerprint=fingerprint, version=version)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizerSpec:
    """Per-entry scales and offsets; rounding is always half-to-even."""

    taus: tuple[float, ...]
    offsets: tuple[float, ...]

    def __post_init__(self):
        if len(self.taus) != len(self.offsets):
            raise ValueError("taus and offsets must have equal length")
        if any(t <= 0 for t in self.taus):
            raise ValueError("all scales must be positive")


def quantize(values: Sequence[float], spec: QuantizerSpec) -> tuple[int, ...]:
    """round((v + offset)/tau) per entry, ties to even."""
    if len(values) != len(spec.taus):
        raise ValueError("value count does not match quantizer width")
    return tuple(round((v + o) / t)
                 for v, t, o in zip(values, spec.taus, spec.offsets))


def add_observation_noise(features: Sequence[float], spec: NoiseSpec,
                          rng: RandomSource) -> list[float]:
    """Add one truncated-discrete-Gaussian draw to each feature."""
    return [f + sample_tdg(spec, rng) for f in features]


# ---------------------------------------------------------------------------
# synthetic vector-domain objects (used by the linear-structure attacks)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorObject:
    """An object with free vector components instead of alphabet indices.

    deltas/epsilons are arbitrary vectors in Z_q^n (not necessarily in the
    alphabets) and etas are residues; mod-q families extend to this domain
    verbatim, which is exactly the structure the affine-surrogate attack
    probes.
    """

    x0: Vec
    deltas: tuple[Vec, ...]
    epsilons: tuple[Vec, ...]
    etas: tuple[Vec, ...]


def vector_path(v: VectorObject, q: int) -> tuple[Vec, ...]:
    states = [vec_reduce(v.x0, q)]
    for d, e, h in zip(v.deltas, v.epsilons, v.etas):
        states.append(tuple((a + x + y + z) % q
                            for a, x, y, z in zip(states[-1], d, e, h)))
    return tuple(states)


# ---------------------------------------------------------------------------
# family base
# ---------------------------------------------------------------------------

def _coeff_stream(seed: bytes) -> RandomSource:
    return RandomSource(seed, "obs-coeffs")


def _rand_vec(src: RandomSource, n: int, q: int) -> Vec:
    return tuple(src.randrange(q) for _ in range(n))


@dataclass(frozen=True)
class ObservableFamily:
    """Common shape of every family: m entries of ell bits over (q, n, T)."""

    m: int
    ell: int
    q: int
    n: int
    T: int
    coeff_seed: bytes

    variant: ClassVar[str] = "abstract"
    #: mod-q families emit residues and need q <= 2^ell
    emits_residues: ClassVar[bool] = True

    def __post_init__(self):
        if self.m < 1:
            raise FamilyError("m must be >= 1")
        if not (1 <= self.ell <= 64):
            raise FamilyError("ell must be in [1, 64]")
        if self.q < 2 or self.n < 1 or self.T < 1:
            raise FamilyError("bad dimensions")
        if len(self.coeff_seed) != 32:
            raise FamilyError("coefficient seed must be 32 bytes")
        if self.emits_residues and self.q > (1 << self.ell):
            raise FamilyError(
                f"q = {self.q} does not fit in ell = {self.ell} bits")

    # -- evaluation ---------------------------------------------------------

    def _mod_entries(self, gamma: tuple[Vec, ...],
                     eps: tuple[Vec, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def _entries_object(self, x: MicroObject, p: ParameterSet) -> tuple[int, ...]:
        gamma = iterate_path(x, p)
        eps = tuple(p.micro_alphabet[i] for i in x.micro_indices)
        return self._mod_entries(gamma, eps)

    def vector_entries(self, v: VectorObject) -> tuple[int, ...]:
        """Evaluation on the synthetic vector domain (mod-q families only)."""
        if len(v.deltas) != self.T:
            raise FamilyError("vector object has wrong length")
        gamma = vector_path(v, self.q)
        eps = tuple(vec_reduce(e, self.q) for e in v.epsilons)
        return self._mod_entries(gamma, eps)

    # -- identity -----------------------------------------------------------

    def fingerprint(self) -> bytes:
        h = hashlib.blake2b(digest_size=32)
        h.update(self.variant.encode())
        h.update(struct.pack("<IIIII", self.m, self.ell, self.q, self.n, self.T))
        h.update(self.coeff_seed)
        self._fingerprint_extra(h)
        return h.digest()

    def _fingerprint_extra(self, h) -> None:
        pass


def _check_family_matches(family: ObservableFamily, p: ParameterSet) -> None:
    if (family.q, family.n, family.T) != (p.q, p.n, p.T):
        raise FamilyError(
            f"family dims (q={family.q}, n={family.n}, T={family.T}) do not "
            f"match parameters (q={p.q}, n={p.n}, T={p.T})")


def eval_observable(family: ObservableFamily, x: MicroObject,
                    p: ParameterSet) -> PublicObservable:
    """Evaluate a family on a witness.  Pure: repeated calls are identical."""
    _check_family_matches(family, p)
    validate_object(x, p)
    return PublicObservable(entries=family._entries_object(x, p),
                            ell=family.ell, fingerprint=family.fingerprint())


def eval_vector_object(family: ObservableFamily, v: VectorObject) -> tuple[int, ...]:
    """Raw entries of a family on a synthetic vector object."""
    return family.vector_entries(v)


def entry_domains(family: ObservableFamily) -> tuple[int, ...]:
    """Per-entry value-range sizes: residues live in [0, q), quantized
    entries in [0, 2^ell); post-processing reshapes accordingly."""
    if isinstance(family, Composite):
        return tuple(d for f in family.parts for d in entry_domains(f))
    if isinstance(family, PostProcessed):
        inner = entry_domains(family.inner)
        proc = family.processor
        if proc.kind == "identity":
            return inner
        if proc.kind == "truncate_bits":
            return tuple(min(d, 1 << proc.bits) for d in inner)
        if proc.kind == "keep_first":
            return inner[:proc.keep]
        return (1,)   # constant
    if family.emits_residues:
        return (family.q,) * family.m
    return (1 << family.ell,) * family.m


def _ints_to_fp(h, values) -> None:
    for v in values:
        h.update(repr(v).encode())


# ---------------------------------------------------------------------------
# variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearProjected(ObservableFamily):
    """Entry j is sum_i <a[j][i], x_i> mod q over the whole path."""

    coeffs: tuple[tuple[Vec, ...], ...] = ()   # [m][T+1] vectors

    variant: ClassVar[str] = "linear_projected"

    def __post_init__(self):
        super().__post_init__()
        if len(self.coeffs) != self.m or any(len(c) != self.T + 1
                                             for c in self.coeffs):
            raise FamilyError("coefficient table must be m x (T+1)")

    @classmethod
    def generate(cls, m: int, ell: int, seed: bytes, *, q: int, n: int,
                 T: int) -> "LinearProjected":
        src = _coeff_stream(seed)
        coeffs = tuple(tuple(_rand_vec(src, n, q) for _ in range(T + 1))
                       for _ in range(m))
        return cls(m, ell, q, n, T, seed, coeffs)

    def _mod_entries(self, gamma, eps):
        q = self.q
        return tuple(sum(vec_dot(a, s, q) for a, s in zip(row, gamma)) % q
                     for row in self.coeffs)

    def _fingerprint_extra(self, h):
        _ints_to_fp(h, self.coeffs)


@dataclass(frozen=True)
class TransitionEnergy(ObservableFamily):
    """Entry j sums a step kernel over transitions:

    psi_j(x, x', i) = <u[j][i], x> * <v[j][i], x'> + <w[j][i], x' - x>  (mod q)
    """

    u: tuple[tuple[Vec, ...], ...] = ()   # [m][T]
    v: tuple[tuple[Vec, ...], ...] = ()
    w: tuple[tuple[Vec, ...], ...] = ()

    variant: ClassVar[str] = "transition_energy"

    def __post_init__(self):
        super().__post_init__()
        for name in ("u", "v", "w"):
            tab = getattr(self, name)
            if len(tab) != self.m or any(len(c) != self.T for c in tab):
                raise FamilyError(f"{name} table must be m x T")

    @classmethod
    def generate(cls, m: int, ell: int, seed: bytes, *, q: int, n: int,
                 T: int) -> "TransitionEnergy":
        src = _coeff_stream(seed)

        def table():
            return tuple(tuple(_rand_vec(src, n, q) for _ in range(T))
                         for _ in range(m))

        return cls(m, ell, q, n, T, seed, table(), table(), table())

    def _mod_entries(self, gamma, eps):
        q = self.q
        out = []
        for uj, vj, wj in zip(self.u, self.v, self.w):
            total = 0
            for i in range(self.T):
                x, xn = gamma[i], gamma[i + 1]
                total += vec_dot(uj[i], x, q) * vec_dot(vj[i], xn, q)
                total += vec_dot(wj[i], vec_sub(xn, x, q), q)
            out.append(total % q)
        return tuple(out)

    def _fingerprint_extra(self, h):
        _ints_to_fp(h, (self.u, self.v, self.w))


@dataclass(frozen=True)
class NonlinearLocal(ObservableFamily):
    """Entry j is sum_i chi[j][i] * (<a,x_i>^2 + c*<b,x_{i+1}> + <d,eps_i>) mod q."""

    chi: tuple[tuple[int, ...], ...] = ()    # [m][T] time weights
    a: tuple[tuple[Vec, ...], ...] = ()      # [m][T]
    b: tuple[tuple[Vec, ...], ...] = ()
    c: tuple[tuple[int, ...], ...] = ()
    d: tuple[tuple[Vec, ...], ...] = ()

    variant: ClassVar[str] = "nonlinear_local"

    def __post_init__(self):
        super().__post_init__()
        for name in ("chi", "a", "b", "c", "d"):
            tab = getattr(self, name)
            if len(tab) != self.m or any(len(row) != self.T for row in tab):
                raise FamilyError(f"{name} table must be m x T")

    @classmethod
    def generate(cls, m: int, ell: int, seed: bytes, *, q: int, n: int,
                 T: int) -> "NonlinearLocal":
        src = _coeff_stream(seed)

        def scalars():
            return tuple(tuple(src.randrange(q) for _ in range(T))
                         for _ in range(m))

        def vecs():
            return tuple(tuple(_rand_vec(src, n, q) for _ in range(T))
                         for _ in range(m))

        return cls(m, ell, q, n, T, seed,
                   scalars(), vecs(), vecs(), scalars(), vecs())

    def _mod_entries(self, gamma, eps):
        q = self.q
        out = []
        for j in range(self.m):
            total = 0
            for i in range(self.T):
                g = vec_dot(self.a[j][i], gamma[i], q)
                term = (g * g
                        + self.c[j][i] * vec_dot(self.b[j][i], gamma[i + 1], q)
                        + vec_dot(self.d[j][i], eps[i], q))
                total += self.chi[j][i] * term
            out.append(total % q)
        return tuple(out)

    def _fingerprint_extra(self, h):
        _ints_to_fp(h, (self.chi, self.a, self.b, self.c, self.d))


@dataclass(frozen=True)
class Telescoping(ObservableFamily):
    """Endpoint difference x_T - x_0; one entry per coordinate (m = n)."""

    variant: ClassVar[str] = "telescoping"

    def __post_init__(self):
        super().__post_init__()
        if self.m != self.n:
            raise FamilyError("telescoping family needs m = n")

    @classmethod
    def generate(cls, ell: int, seed: bytes, *, q: int, n: int,
                 T: int) -> "Telescoping":
        return cls(n, ell, q, n, T, seed)

    def _mod_entries(self, gamma, eps):
        return vec_sub(gamma[-1], gamma[0], self.q)


@dataclass(frozen=True)
class QuantizedReal(ObservableFamily):
    """Rounded scaled integer features with optional observation noise.

    The feature F_j(X) is an exact integer:

        sum_i <u[j][i], x_i> + <v[j][i], x_{i+1}> + <w[j][i], eps_i>
              + <z[j][i], eta_i-lift>

    with residues read as integers in [0, q).  The emitted entry is
    round((F_j + e_j + offset_j) / tau_j) mod 2^ell with ties to even.
    When observation noise is enabled e_j is drawn from a stream keyed by
    the coefficient seed and the witness encoding, which keeps evaluation
    a pure function; add_observation_noise exists for fresh-noise callers.
    """

    u: tuple[tuple[Vec, ...], ...] = ()
    v: tuple[tuple[Vec, ...], ...] = ()
    w: tuple[tuple[Vec, ...], ...] = ()
    z: tuple[tuple[Vec, ...], ...] = ()
    quantizer: QuantizerSpec = QuantizerSpec((), ())
    obs_noise: NoiseSpec = NoiseSpec.disabled()

    variant: ClassVar[str] = "quantized_real"
    emits_residues: ClassVar[bool] = False

    def __post_init__(self):
        super().__post_init__()
        for name in ("u", "v", "w", "z"):
            tab = getattr(self, name)
            if len(tab) != self.m or any(len(row) != self.T for row in tab):
                raise FamilyError(f"{name} table must be m x T")
        if len(self.quantizer.taus) != self.m:
            raise FamilyError("quantizer width must equal m")

    @classmethod
    def generate(cls, m: int, ell: int, seed: bytes, *, q: int, n: int,
                 T: int, obs_noise: NoiseSpec | None = None) -> "QuantizedReal":
        src = _coeff_stream(seed)

        def table():
            return tuple(tuple(_rand_vec(src, n, q) for _ in range(T))
                         for _ in range(m))

        u, v, w, z = table(), table(), table(), table()
        taus = tuple(0.5 + src.uniform() for _ in range(m))
        quant = QuantizerSpec(taus, (0.0,) * m)
        return cls(m, ell, q, n, T, seed, u, v, w, z, quant,
                   obs_noise or NoiseSpec.disabled())

    def features(self, x: MicroObject, p: ParameterSet) -> list[int]:
        """Exact integer features before noise and quantization."""
        gamma = iterate_path(x, p)
        eps = tuple(p.micro_alphabet[i] for i in x.micro_indices)
        out = []
        for j in range(self.m):
            total = 0
            for i in range(self.T):
                total += sum(a * s for a, s in zip(self.u[j][i], gamma[i]))
                total += sum(a * s for a, s in zip(self.v[j][i], gamma[i + 1]))
                total += sum(a * s for a, s in zip(self.w[j][i], eps[i]))
                total += sum(a * s for a, s in zip(self.z[j][i], x.noise_lifts[i]))
            out.append(total)
        return out

    def _entries_object(self, x, p):
        feats: list[float] = list(self.features(x, p))
        if self.obs_noise.enabled:
            from .fieldcore import encode_object
            tag = "obs-noise:" + encode_object(x, p).hex()
            feats = add_observation_noise(
                feats, self.obs_noise, RandomSource(self.coeff_seed, tag))
        mask = (1 << self.ell) - 1
        return tuple(k & mask for k in quantize(feats, self.quantizer))

    def _mod_entries(self, gamma, eps):
        raise FamilyError("quantized-real families have no vector-domain form")

    def _fingerprint_extra(self, h):
        _ints_to_fp(h, (self.u, self.v, self.w, self.z))
        _ints_to_fp(h, (self.quantizer.taus, self.quantizer.offsets))
        h.update(repr((self.obs_noise.enabled, self.obs_noise.sigma,
                       self.obs_noise.bound)).encode())


@dataclass(frozen=True)
class Composite(ObservableFamily):
    """Concatenation of families sharing (q, n, T, ell)."""

    parts: tuple[ObservableFamily, ...] = ()

    variant: ClassVar[str] = "composite"
    emits_residues: ClassVar[bool] = False   # parts check their own fit

    def __post_init__(self):
        super().__post_init__()
        if not self.parts:
            raise FamilyError("composite needs at least one part")
        if any((f.q, f.n, f.T, f.ell) != (self.q, self.n, self.T, self.ell)
               for f in self.parts):
            raise FamilyError("all parts must share (q, n, T, ell)")
        if self.m != sum(f.m for f in self.parts):
            raise FamilyError("m must be the sum of part widths")

    @classmethod
    def from_parts(cls, parts: Sequence[ObservableFamily]) -> "Composite":
        parts = tuple(parts)
        if not parts:
            raise FamilyError("composite needs at least one part")
        first = parts[0]
        h = hashlib.blake2b(digest_size=32)
        for f in parts:
            h.update(f.fingerprint())
        return cls(sum(f.m for f in parts), first.ell, first.q, first.n,
                   first.T, h.digest(), parts)

    def _entries_object(self, x, p):
        out: list[int] = []
        for f in self.parts:
            out.extend(f._entries_object(x, p))
        return tuple(out)

    def vector_entries(self, v):
        out: list[int] = []
        for f in self.parts:
            out.extend(f.vector_entries(v))
        return tuple(out)

    def _fingerprint_extra(self, h):
        for f in self.parts:
            h.update(f.fingerprint())


# ---------------------------------------------------------------------------
# post-processing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PostProcessor:
    """A public map applied after the family: identity, bit truncation,
    entry selection, or a constant collapse."""

    kind: str
    bits: int | None = None
    keep: int | None = None

    KINDS: ClassVar[tuple[str, ...]] = (
        "identity", "truncate_bits", "keep_first", "constant")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown post-processor kind {self.kind!r}")
        if self.kind == "truncate_bits" and (self.bits is None or self.bits < 1):
            raise ValueError("truncate_bits needs bits >= 1")
        if self.kind == "keep_first" and (self.keep is None or self.keep < 1):
            raise ValueError("keep_first needs keep >= 1")

    def output_shape(self, m: int, ell: int) -> tuple[int, int]:
        if self.kind == "identity":
            return m, ell
        if self.kind == "truncate_bits":
            if self.bits > ell:
                raise ValueError("cannot truncate to more bits than present")
            return m, self.bits
        if self.kind == "keep_first":
            if self.keep > m:
                raise ValueError("cannot keep more entries than present")
            return self.keep, ell
        return 1, 1   # constant

    def apply(self, entries: tuple[int, ...]) -> tuple[int, ...]:
        if self.kind == "identity":
            return entries
        if self.kind == "truncate_bits":
            mask = (1 << self.bits) - 1
            return tuple(e & mask for e in entries)
        if self.kind == "keep_first":
            return entries[:self.keep]
        return (0,)


@dataclass(frozen=True)
class PostProcessed(ObservableFamily):
    """A family composed with a post-processor (outermost applies last)."""

    inner: ObservableFamily | None = None
    processor: PostProcessor = PostProcessor("identity")

    variant: ClassVar[str] = "post_processed"
    emits_residues: ClassVar[bool] = False

    def __post_init__(self):
        super().__post_init__()
        if self.inner is None:
            raise FamilyError("post-processed family needs an inner family")
        m, ell = self.processor.output_shape(self.inner.m, self.inner.ell)
        if (self.m, self.ell) != (m, ell):
            raise FamilyError("shape does not match processor output")

    def _entries_object(self, x, p):
        return self.processor.apply(self.inner._entries_object(x, p))

    def vector_entries(self, v):
        return self.processor.apply(self.inner.vector_entries(v))

    def _fingerprint_extra(self, h):
        h.update(self.inner.fingerprint())
        h.update(repr((self.processor.kind, self.processor.bits,
                       self.processor.keep)).encode())


def compose_postprocess(processor: PostProcessor,
                        family: ObservableFamily) -> PostProcessed:
    """Wrap a family with a post-processor; nesting records the order."""
    m, ell = processor.output_shape(family.m, family.ell)
    return PostProcessed(m, ell, family.q, family.n, family.T,
                         family.coeff_seed, family, processor)


# ---------------------------------------------------------------------------
# factory
# ---------------------------------------------------------------------------

FAMILY_VARIANTS = {
    cls.variant: cls
    for cls in (LinearProjected, TransitionEnergy, NonlinearLocal,
                Telescoping, QuantizedReal)
}


def generate_family(variant: str, m: int, ell: int, seed: bytes, *,
                    q: int, n: int, T: int,
                    obs_noise: NoiseSpec | None = None) -> ObservableFamily:
    """Build a family of the given variant from its seed."""
    if variant == "telescoping":
        if m != n:
            raise FamilyError("telescoping family needs m = n")
        return Telescoping.generate(ell, seed, q=q, n=n, T=T)
    if variant == "quantized_real":
        return QuantizedReal.generate(m, ell, seed, q=q, n=n, T=T,
                                      obs_noise=obs_noise)
    try:
        cls = FAMILY_VARIANTS[variant]
    except KeyError:
        raise FamilyError(f"unknown family variant {variant!r}") from None
    return cls.generate(m, ell, seed, q=q, n=n, T=T)
