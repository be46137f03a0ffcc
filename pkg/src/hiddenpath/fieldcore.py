"""Modular state-space primitives.

States live in Z_q^n and are represented as plain tuples of canonical
residues in [0, q).  Tuples keep everything hashable (enumeration tables,
DP layers and fiber dictionaries key on them directly) and keep the
arithmetic exact: all counting in this package is done with Python ints,
never floats.

The module also owns the canonical bit-level witness encoding.  A witness
is stored as

    version byte | x0 residues | macro indices | micro indices | noise lifts

with fixed field widths derived from the parameter set: ceil(log2 q) bits
per residue coordinate, ceil(log2 b) / ceil(log2 r) bits per alphabet
index, and ceil(log2(2B+1)) bits per noise coordinate (offset-binary,
storing lift + B).  Degenerate fields (b = 1, r = 1, noise disabled) take
zero bits.  Bits are packed MSB-first and padded with zero bits to a byte
boundary; decode rejects bad lengths, out-of-range fields, wrong version
bytes and nonzero padding, so the encoding is a bijection between
admissible witnesses and valid byte strings of the fixed length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover - type-only imports, no runtime cycle
    from .pathgen import MicroObject, NoiseSpec

Vec = tuple[int, ...]

#: Exact counts are plain Python integers (arbitrary precision).  The alias
#: documents intent in signatures; nothing in this package ever converts a
#: count through a float.
BigCount = int


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

class CompositeModulusError(ValueError):
    """A field-only operation was asked to run over a composite modulus."""


class AliasError(ValueError):
    """Lifting is ambiguous because q <= 2B (distinct lifts share a residue)."""


class InconsistentSystemError(ValueError):
    """An affine system A x = y - c has no solution."""


class EncodingError(ValueError):
    """A byte string is not a valid canonical witness encoding."""


class CapExceeded(RuntimeError):
    """An enumeration or table would exceed the configured cap."""

    def __init__(self, needed: int, cap: int, what: str = "enumeration"):
        super().__init__(f"{what} needs {needed} units, cap is {cap}")
        self.needed = needed
        self.cap = cap


# ---------------------------------------------------------------------------
# modulus and vector arithmetic
# ---------------------------------------------------------------------------

def _is_prime(q: int) -> bool:
    """Deterministic trial-division primality test (desk-scale moduli)."""
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class Modulus:
    """A modulus q >= 2 with its primality decided once at construction."""

    q: int
    is_prime: bool = field(init=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.q, int) or self.q < 2:
            raise ValueError(f"modulus must be an integer >= 2, got {self.q!r}")
        object.__setattr__(self, "is_prime", _is_prime(self.q))

    def require_prime(self) -> None:
        if not self.is_prime:
            raise CompositeModulusError(f"q = {self.q} is composite")


def vec_reduce(v: Sequence[int], q: int) -> Vec:
    """Canonical residues in [0, q), coordinate-wise."""
    return tuple(c % q for c in v)


def _check_dims(u: Sequence[int], v: Sequence[int]) -> None:
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")


def vec_add(u: Sequence[int], v: Sequence[int], q: int) -> Vec:
    _check_dims(u, v)
    return tuple((a + b) % q for a, b in zip(u, v))


def vec_sub(u: Sequence[int], v: Sequence[int], q: int) -> Vec:
    _check_dims(u, v)
    return tuple((a - b) % q for a, b in zip(u, v))


def vec_scale(k: int, v: Sequence[int], q: int) -> Vec:
    return tuple((k * a) % q for a in v)


def vec_dot(u: Sequence[int], v: Sequence[int], q: int) -> int:
    _check_dims(u, v)
    return sum(a * b for a, b in zip(u, v)) % q


def hamming(u: Sequence, v: Sequence) -> int:
    """Number of differing positions between two equal-length sequences."""
    _check_dims(u, v)
    return sum(1 for a, b in zip(u, v) if a != b)


def state_index(v: Sequence[int], q: int) -> int:
    """Mixed-radix rank of a state vector (first coordinate most significant)."""
    idx = 0
    for c in v:
        idx = idx * q + (c % q)
    return idx


def index_state(idx: int, n: int, q: int) -> Vec:
    """Inverse of state_index."""
    coords = [0] * n
    for i in range(n - 1, -1, -1):
        idx, coords[i] = divmod(idx, q)
    return tuple(coords)


def all_states(n: int, q: int) -> Iterable[Vec]:
    """All q^n state vectors in state_index order."""
    for idx in range(q ** n):
        yield index_state(idx, n, q)


# ---------------------------------------------------------------------------
# exact linear algebra over prime fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldMatrix:
    """Dense matrix over F_q (prime q), rows of canonical residues."""

    rows: tuple[Vec, ...]
    modulus: Modulus

    def __post_init__(self):
        self.modulus.require_prime()
        q = self.modulus.q
        if self.rows:
            ncols = len(self.rows[0])
            if any(len(r) != ncols for r in self.rows):
                raise ValueError("ragged rows")
        object.__setattr__(
            self, "rows", tuple(vec_reduce(r, q) for r in self.rows))

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def ncols(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def mul_vec(self, v: Sequence[int]) -> Vec:
        q = self.modulus.q
        return tuple(vec_dot(r, v, q) for r in self.rows)

    def column(self, j: int) -> Vec:
        return tuple(r[j] for r in self.rows)


def _echelonize(rows: list[list[int]], q: int) -> tuple[list[list[int]], list[int]]:
    """In-place reduced row echelon form mod prime q; returns (rows, pivot cols)."""
    nrows = len(rows)
    ncols = len(rows[0]) if rows else 0
    pivots = []
    row = 0
    for col in range(ncols):
        pivot = next((r for r in range(row, nrows) if rows[r][col] % q), None)
        if pivot is None:
            continue
        rows[row], rows[pivot] = rows[pivot], rows[row]
        inv = pow(rows[row][col], -1, q)
        rows[row] = [(inv * x) % q for x in rows[row]]
        for r in range(nrows):
            if r != row and rows[r][col]:
                factor = rows[r][col]
                rows[r] = [(a - factor * b) % q for a, b in zip(rows[r], rows[row])]
        pivots.append(col)
        row += 1
        if row == nrows:
            break
    return rows, pivots


def mat_rank(a: FieldMatrix) -> int:
    """Rank over F_q by Gauss-Jordan elimination with exact modular inverses."""
    if not a.rows:
        return 0
    _, pivots = _echelonize([list(r) for r in a.rows], a.modulus.q)
    return len(pivots)


@dataclass(frozen=True)
class AffineSolution:
    """Solution set of A x = y - c: particular point plus kernel basis."""

    particular: Vec
    kernel_basis: tuple[Vec, ...]
    rank: int
    modulus: Modulus

    @property
    def fiber_size(self) -> BigCount:
        return self.modulus.q ** len(self.kernel_basis)


def solve_affine(a: FieldMatrix, c: Sequence[int], y: Sequence[int]) -> AffineSolution:
    """Solve A x = y - c over F_q.

    Returns a particular solution with free variables set to 0 and a kernel
    basis (one vector per free column).  Raises InconsistentSystemError when
    y - c is outside the column span.
    """
    q = a.modulus.q
    if len(c) != a.nrows or len(y) != a.nrows:
        raise ValueError("right-hand side length does not match row count")
    ncols = a.ncols
    rhs = [(yi - ci) % q for yi, ci in zip(y, c)]
    aug = [list(r) + [rhs[i]] for i, r in enumerate(a.rows)]
    if not aug:
        return AffineSolution((), (), 0, a.modulus)
    ech, pivots = _echelonize(aug, q)
    pivots = [p for p in pivots if p < ncols]
    rank = len(pivots)
    for r in range(len(ech)):
        if all(x % q == 0 for x in ech[r][:ncols]) and ech[r][ncols] % q:
            raise InconsistentSystemError("target is outside the image")
    particular = [0] * ncols
    for i, p in enumerate(pivots):
        particular[p] = ech[i][ncols] % q
    free_cols = [j for j in range(ncols) if j not in set(pivots)]
    basis = []
    for f in free_cols:
        vec = [0] * ncols
        vec[f] = 1
        for i, p in enumerate(pivots):
            vec[p] = (-ech[i][f]) % q
        basis.append(tuple(vec))
    return AffineSolution(tuple(particular), tuple(basis), rank, a.modulus)


# ---------------------------------------------------------------------------
# parameter bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Boundary:
    """Optional endpoint pins: start fixes x0, end is a target final state."""

    start: Vec | None = None
    end: Vec | None = None


@dataclass(frozen=True)
class ParameterSet:
    """Everything that defines one experiment instance.

    macro_alphabet and micro_alphabet are duplicate-free tuples of state
    vectors (reduced mod q at construction, so entries may be given as
    signed integers).  family may be None for generation-only work; any
    operation that needs an observable raises if it is missing.
    """

    modulus: Modulus
    n: int
    T: int
    macro_alphabet: tuple[Vec, ...]
    micro_alphabet: tuple[Vec, ...]
    noise: "NoiseSpec"
    seed: bytes
    family: object | None = None
    boundary: Boundary | None = None
    encoding_version: int = 1

    def __post_init__(self):
        q = self.modulus.q
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not isinstance(self.seed, bytes) or len(self.seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")
        if not (0 <= self.encoding_version <= 255):
            raise ValueError("encoding_version must fit one byte")
        for name in ("macro_alphabet", "micro_alphabet"):
            alpha = getattr(self, name)
            if not alpha:
                raise ValueError(f"{name} must be nonempty")
            if any(len(v) != self.n for v in alpha):
                raise ValueError(f"{name} entries must have dimension n={self.n}")
            reduced = tuple(vec_reduce(v, q) for v in alpha)
            if len(set(reduced)) != len(reduced):
                raise ValueError(f"{name} contains duplicate vectors mod q")
            object.__setattr__(self, name, reduced)
        if self.boundary is not None:
            start, end = self.boundary.start, self.boundary.end
            for v in (start, end):
                if v is not None and len(v) != self.n:
                    raise ValueError("boundary vectors must have dimension n")
            object.__setattr__(self, "boundary", Boundary(
                None if start is None else vec_reduce(start, q),
                None if end is None else vec_reduce(end, q)))

    @property
    def q(self) -> int:
        return self.modulus.q

    @property
    def b(self) -> int:
        return len(self.macro_alphabet)

    @property
    def r(self) -> int:
        return len(self.micro_alphabet)

    @property
    def fixed_start(self) -> Vec | None:
        return self.boundary.start if self.boundary is not None else None

    @property
    def target_end(self) -> Vec | None:
        return self.boundary.end if self.boundary is not None else None

    def noise_support_size(self) -> BigCount:
        """Per-step noise support (2B+1)^n, or 1 when noise is disabled."""
        if not self.noise.enabled:
            return 1
        return (2 * self.noise.bound + 1) ** self.n


# ---------------------------------------------------------------------------
# canonical witness encoding
# ---------------------------------------------------------------------------

def _width_bits(cardinality: int) -> int:
    """Bits needed to index a set of the given size (0 for singletons)."""
    if cardinality < 1:
        raise ValueError("cardinality must be >= 1")
    return (cardinality - 1).bit_length()


class _BitWriter:
    """MSB-first bit packer."""

    def __init__(self):
        self._acc = 0
        self._nbits = 0

    def write(self, value: int, width: int) -> None:
        if width == 0:
            if value:
                raise ValueError("nonzero value in zero-width field")
            return
        if not (0 <= value < (1 << width)):
            raise ValueError(f"value {value} does not fit in {width} bits")
        self._acc = (self._acc << width) | value
        self._nbits += width

    def to_bytes(self) -> bytes:
        pad = (-self._nbits) % 8
        return ((self._acc << pad)).to_bytes((self._nbits + pad) // 8, "big")


class _BitReader:
    """MSB-first bit unpacker with strict padding checks."""

    def __init__(self, data: bytes, nbits: int):
        total = len(data) * 8
        if total < nbits or total - nbits >= 8:
            raise EncodingError(f"expected {nbits} payload bits in {len(data)} bytes")
        acc = int.from_bytes(data, "big")
        pad = total - nbits
        if acc & ((1 << pad) - 1):
            raise EncodingError("nonzero padding bits")
        self._acc = acc >> pad
        self._left = nbits

    def read(self, width: int) -> int:
        if width == 0:
            return 0
        if width > self._left:
            raise EncodingError("read past end of payload")
        self._left -= width
        value = self._acc >> self._left
        self._acc &= (1 << self._left) - 1
        return value


def _field_widths(p: ParameterSet) -> tuple[int, int, int, int]:
    """(residue, macro index, micro index, noise coordinate) widths in bits."""
    w_q = _width_bits(p.q)
    w_b = _width_bits(p.b)
    w_r = _width_bits(p.r)
    w_e = _width_bits(2 * p.noise.bound + 1) if p.noise.enabled else 0
    return w_q, w_b, w_r, w_e


def encoding_bit_length(p: ParameterSet) -> int:
    """Payload bits after the version byte, fixed per parameter set."""
    w_q, w_b, w_r, w_e = _field_widths(p)
    return p.n * w_q + p.T * (w_b + w_r + p.n * w_e)


def encoded_length(p: ParameterSet) -> int:
    """Total encoding length in bytes (version byte + padded payload)."""
    return 1 + (encoding_bit_length(p) + 7) // 8


def encode_object(x: "MicroObject", p: ParameterSet) -> bytes:
    """Canonical fixed-length encoding of a witness.

    Injective on admissible witnesses: alphabet indices and pre-reduction
    noise lifts are stored directly, never their mod-q images.
    """
    from .pathgen import validate_object

    validate_object(x, p)
    w_q, w_b, w_r, w_e = _field_widths(p)
    bound = p.noise.bound
    w = _BitWriter()
    for c in x.x0:
        w.write(c, w_q)
    for i in range(p.T):
        w.write(x.macro_indices[i], w_b)
        w.write(x.micro_indices[i], w_r)
        for c in x.noise_lifts[i]:
            w.write(c + bound if w_e else 0, w_e)
    return bytes([p.encoding_version]) + w.to_bytes()


def decode_object(data: bytes, p: ParameterSet) -> "MicroObject":
    """Inverse of encode_object; rejects anything outside its image."""
    from .pathgen import MicroObject, validate_object

    if len(data) != encoded_length(p):
        raise EncodingError(
            f"expected {encoded_length(p)} bytes, got {len(data)}")
    if data[0] != p.encoding_version:
        raise EncodingError(
            f"version byte {data[0]} != expected {p.encoding_version}")
    w_q, w_b, w_r, w_e = _field_widths(p)
    bound = p.noise.bound
    r = _BitReader(data[1:], encoding_bit_length(p))
    x0 = tuple(r.read(w_q) for _ in range(p.n))
    if any(c >= p.q for c in x0):
        raise EncodingError("x0 residue out of range")
    macro, micro, lifts = [], [], []
    for _ in range(p.T):
        mi = r.read(w_b)
        if mi >= p.b:
            raise EncodingError("macro index out of range")
        ui = r.read(w_r)
        if ui >= p.r:
            raise EncodingError("micro index out of range")
        macro.append(mi)
        micro.append(ui)
        step = []
        for _ in range(p.n):
            code = r.read(w_e)
            if w_e and code > 2 * bound:
                raise EncodingError("noise code out of range")
            step.append(code - bound if w_e else 0)
        lifts.append(tuple(step))
    obj = MicroObject(x0, tuple(macro), tuple(micro), tuple(lifts))
    try:
        validate_object(obj, p)
    except ValueError as exc:  # e.g. boundary pin violated
        raise EncodingError(str(exc)) from exc
    return obj
