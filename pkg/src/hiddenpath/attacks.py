"""Structural attack taxonomy.

Attacks never see the planted witness except as an optional scoring
reference; they work from the parameter set and a public observable.
Every attack returns an AttackReport with a method name, an outcome from
{planted-recovered, witness-found, localized, failed, not-applicable},
explicit work counters and the wall time.

The linear-structure attacks act on the vector view of a witness: the
free components (x0 unless pinned, macro/micro step vectors unless the
alphabet is a singleton, noise residues unless noise is off) flattened
into F_q^N.  Components pinned by the parameter set enter the model's
constant term.  Mapping noise lifts to residues is faithful only when
q > 2B, so aliasing instances are rejected up front.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field as dc_field
from typing import Callable, Hashable, Iterable, Sequence

from .fieldcore import (
    AliasError,
    CompositeModulusError,
    FieldMatrix,
    InconsistentSystemError,
    ParameterSet,
    Vec,
    all_states,
    hamming,
    solve_affine,
    vec_reduce,
    vec_sub,
)
from .observables import (
    Composite,
    FamilyError,
    LinearProjected,
    NonlinearLocal,
    ObservableFamily,
    PublicObservable,
    Telescoping,
    TransitionEnergy,
    VectorObject,
    eval_observable,
    serialize_public,
    _check_family_matches,
)
from .oracle import EnumerationGuard, FiberTable, _guard, _noise_step_vectors
from .pathgen import (
    MicroObject,
    RandomSource,
    canonical_lift,
    is_admissible,
    object_distance,
    sample_object,
)

OUTCOMES = ("planted-recovered", "witness-found", "localized", "failed",
            "not-applicable")


@dataclass
class AttackReport:
    method: str
    outcome: str
    work: dict[str, int]
    wall_time_s: float
    candidate: MicroObject | None = None
    candidate_vector: VectorObject | None = None
    details: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")


def _classify(candidate: MicroObject | None, y: PublicObservable,
              p: ParameterSet, planted: MicroObject | None) -> str:
    """Shared success classification for a verified candidate."""
    if candidate is None:
        return "failed"
    if planted is not None and candidate == planted:
        return "planted-recovered"
    return "witness-found"


def _verifies(candidate: MicroObject, y: PublicObservable,
              p: ParameterSet) -> bool:
    if not is_admissible(candidate, p):
        return False
    return serialize_public(eval_observable(p.family, candidate, p)) == \
        serialize_public(y)


# ---------------------------------------------------------------------------
# vector view
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorView:
    """Layout of the free witness components inside F_q^N."""

    p: ParameterSet
    include_x0: bool
    include_macro: bool
    include_micro: bool
    include_noise: bool

    @classmethod
    def for_params(cls, p: ParameterSet) -> "VectorView":
        if p.noise.enabled and p.q <= 2 * p.noise.bound:
            raise AliasError(
                f"q = {p.q} <= 2B = {2 * p.noise.bound}: residue view aliases")
        return cls(p, p.fixed_start is None, p.b > 1, p.r > 1, p.noise.enabled)

    @property
    def dim(self) -> int:
        n, t = self.p.n, self.p.T
        blocks = int(self.include_x0) + t * (
            int(self.include_macro) + int(self.include_micro)
            + int(self.include_noise))
        return n * blocks

    def to_vector(self, x: MicroObject) -> Vec:
        p = self.p
        out: list[int] = []
        if self.include_x0:
            out.extend(x.x0)
        if self.include_macro:
            for i in x.macro_indices:
                out.extend(p.macro_alphabet[i])
        if self.include_micro:
            for i in x.micro_indices:
                out.extend(p.micro_alphabet[i])
        if self.include_noise:
            for step in x.noise_lifts:
                out.extend(c % p.q for c in step)
        return tuple(out)

    def _split_blocks(self, v: Sequence[int]):
        p = self.p
        n, t = p.n, p.T
        pos = 0

        def take(count):
            nonlocal pos
            chunk = [tuple(v[pos + k * n: pos + (k + 1) * n]) for k in range(count)]
            pos += count * n
            return chunk

        x0 = take(1)[0] if self.include_x0 else p.fixed_start
        if self.include_macro:
            deltas = take(t)
        else:
            deltas = [p.macro_alphabet[0]] * t
        if self.include_micro:
            epsilons = take(t)
        else:
            epsilons = [p.micro_alphabet[0]] * t
        if self.include_noise:
            etas = take(t)
        else:
            etas = [(0,) * n] * t
        if pos != len(v):
            raise ValueError("vector length does not match view dimension")
        return x0, deltas, epsilons, etas

    def to_vobj(self, v: Sequence[int]) -> VectorObject:
        x0, deltas, epsilons, etas = self._split_blocks(v)
        q = self.p.q
        return VectorObject(vec_reduce(x0, q),
                            tuple(vec_reduce(d, q) for d in deltas),
                            tuple(vec_reduce(e, q) for e in epsilons),
                            tuple(vec_reduce(h, q) for h in etas))

    def candidate(self, v: Sequence[int]) -> MicroObject | None:
        """Devectorize into an admissible witness, or None."""
        p = self.p
        x0, deltas, epsilons, etas = self._split_blocks(v)
        macro_lut = {vec: i for i, vec in enumerate(p.macro_alphabet)}
        micro_lut = {vec: i for i, vec in enumerate(p.micro_alphabet)}
        macro, micro, lifts = [], [], []
        for d, e, h in zip(deltas, epsilons, etas):
            mi = macro_lut.get(vec_reduce(d, p.q))
            ui = micro_lut.get(vec_reduce(e, p.q))
            if mi is None or ui is None:
                return None
            macro.append(mi)
            micro.append(ui)
            if self.include_noise:
                step = []
                for c in h:
                    lift = canonical_lift(c, p.noise.bound, p.modulus)
                    if lift is None:
                        return None
                    step.append(lift)
                lifts.append(tuple(step))
            else:
                lifts.append((0,) * p.n)
        cand = MicroObject(vec_reduce(x0, p.q), tuple(macro), tuple(micro),
                           tuple(lifts))
        return cand if is_admissible(cand, p) else None


# ---------------------------------------------------------------------------
# affine surrogate and linear collapse
# ---------------------------------------------------------------------------

@dataclass
class AffineModel:
    """Fitted surrogate Phi(v) ~ A v + c over F_q on the vector view."""

    matrix: FieldMatrix
    constant: tuple[int, ...]
    view: VectorView
    family_fingerprint: bytes
    exact: bool
    residual: int       # probe mismatches
    probes: int
    evals: int

    def predict(self, v: Sequence[int]) -> tuple[int, ...]:
        q = self.matrix.modulus.q
        av = self.matrix.mul_vec(v)
        return tuple((a + c) % q for a, c in zip(av, self.constant))


def affine_surrogate_fit(p: ParameterSet, probes: int = 64,
                         rng: RandomSource | None = None) -> AffineModel:
    """Fit A and c from basis probes of the evaluation oracle.

    c = Phi(0); column j = Phi(e_j) - c.  The exactness flag comes from
    fresh random probes, so a non-affine family yields exact=False with a
    positive residual rather than an error.
    """
    family = p.family
    if family is None:
        raise ValueError("parameter set has no observable family")
    p.modulus.require_prime()
    view = VectorView.for_params(p)
    rng = rng or RandomSource(p.seed, "affine-probe")
    n_dim = view.dim
    q = p.q

    def phi(v: Sequence[int]) -> tuple[int, ...]:
        return family.vector_entries(view.to_vobj(v))

    evals = 0
    zero = (0,) * n_dim
    c = phi(zero)
    evals += 1
    columns = []
    for j in range(n_dim):
        e_j = tuple(1 if k == j else 0 for k in range(n_dim))
        col = tuple((a - b) % q for a, b in zip(phi(e_j), c))
        evals += 1
        columns.append(col)
    rows = tuple(tuple(columns[j][i] for j in range(n_dim))
                 for i in range(family.m))
    matrix = FieldMatrix(rows, p.modulus)
    model = AffineModel(matrix, c, view, family.fingerprint(),
                        exact=True, residual=0, probes=probes, evals=evals)
    residual = 0
    for _ in range(probes):
        v = tuple(rng.randrange(q) for _ in range(n_dim))
        model.evals += 1
        if model.predict(v) != phi(v):
            residual += 1
    model.exact = residual == 0
    model.residual = residual
    return model


def linear_collapse(model: AffineModel, y: PublicObservable, p: ParameterSet,
                    planted: MicroObject | None = None) -> AttackReport:
    """Solve the fitted affine model for the hidden vector.

    Full rank gives the unique preimage; rank deficiency reports the
    solution-space size q^(N - rank) and returns a particular witness.
    """
    t0 = time.perf_counter()
    if model.family_fingerprint != p.family.fingerprint():
        raise ValueError("model was fitted to a different family")
    q = p.q
    if any(e >= q for e in y.entries):
        raise ValueError("observable entries are not residues mod q")
    work = {"dimension": model.view.dim, "rank": 0, "verify_evals": 0}
    details: dict = {"model_exact": model.exact}
    try:
        sol = solve_affine(model.matrix, model.constant, y.entries)
    except InconsistentSystemError:
        return AttackReport("linear_collapse", "failed", work,
                            time.perf_counter() - t0,
                            details={**details, "inconsistent": True})
    work["rank"] = sol.rank
    details["kernel_dim"] = len(sol.kernel_basis)
    details["solution_space"] = sol.fiber_size
    candidate = model.view.candidate(sol.particular)
    candidate_vector = None
    if candidate is not None:
        work["verify_evals"] += 1
        if not _verifies(candidate, y, p):
            candidate = None
    if candidate is None:
        vobj = model.view.to_vobj(sol.particular)
        if p.family.vector_entries(vobj) == y.entries:
            candidate_vector = vobj
    if candidate is not None:
        outcome = _classify(candidate, y, p, planted)
    elif candidate_vector is not None:
        # consistent on the vector domain but not an admissible witness
        outcome = "localized"
    else:
        outcome = "failed"
    return AttackReport("linear_collapse", outcome, work,
                        time.perf_counter() - t0, candidate=candidate,
                        candidate_vector=candidate_vector, details=details)


def affine_attack(p: ParameterSet, y: PublicObservable, probes: int = 64,
                  rng: RandomSource | None = None,
                  planted: MicroObject | None = None) -> AttackReport:
    """Fit the affine surrogate and collapse it in one call.

    Families without a vector-domain form, and aliasing noise views,
    come back as not-applicable instead of raising.
    """
    t0 = time.perf_counter()
    try:
        model = affine_surrogate_fit(p, probes=probes, rng=rng)
    except (FamilyError, AliasError, CompositeModulusError) as exc:
        return AttackReport("affine_surrogate", "not-applicable",
                            {"evals": 0}, time.perf_counter() - t0,
                            details={"reason": str(exc)})
    report = linear_collapse(model, y, p, planted=planted)
    report.method = "affine_surrogate"
    report.work["fit_evals"] = model.evals
    report.wall_time_s += time.perf_counter() - t0
    return report


# ---------------------------------------------------------------------------
# layered dynamic programming
# ---------------------------------------------------------------------------

@dataclass
class DPStructure:
    """A layered reachability problem with group-valued step observables.

    moves(i, s) yields (label, next_state, acc_delta); acc values combine
    with acc_add starting from acc_zero.  num_states and acc_size bound
    the table (entries <= steps * V * M) for the budget pre-check.
    """

    num_states: int
    acc_size: int
    steps: int
    start_states: Sequence[Hashable]
    moves: Callable[[int, Hashable], Iterable[tuple]]
    acc_add: Callable
    acc_zero: tuple
    target_state: Hashable | None = None


def dp_collapse(structure: DPStructure, target_acc: tuple,
                guard: EnumerationGuard | None = None,
                assemble: Callable | None = None,
                p: ParameterSet | None = None,
                y: PublicObservable | None = None,
                planted: MicroObject | None = None) -> AttackReport:
    """Layer-by-layer reachability of (steps, target_state, target_acc).

    assemble(start_state, labels) may turn an accepting move sequence into
    a full witness; without it the report only localizes reachability.
    """
    t0 = time.perf_counter()
    bound = structure.steps * structure.num_states * structure.acc_size
    _guard(guard).check(bound, "DP table")
    layers: list[dict] = [{(s, structure.acc_zero): None
                           for s in structure.start_states}]
    entries = 0
    edges = 0
    for i in range(structure.steps):
        nxt: dict = {}
        for (s, acc) in layers[i]:
            for label, t_state, delta in structure.moves(i, s):
                edges += 1
                key = (t_state, structure.acc_add(acc, delta))
                if key not in nxt:
                    nxt[key] = (s, acc, label)
        entries += len(nxt)
        layers.append(nxt)
    work = {"table_entries": entries, "edges": edges, "entry_bound": bound}
    final = layers[-1]
    hit = None
    for (s, acc) in final:
        if acc != target_acc:
            continue
        if structure.target_state is not None and s != structure.target_state:
            continue
        hit = (s, acc)
        break
    if hit is None:
        return AttackReport("dp_collapse", "failed", work,
                            time.perf_counter() - t0,
                            details={"reachable": False})
    labels = []
    state, acc = hit
    for i in range(structure.steps, 0, -1):
        prev_s, prev_acc, label = layers[i][(state, acc)]
        labels.append(label)
        state, acc = prev_s, prev_acc
    labels.reverse()
    start_state = state
    details = {"reachable": True, "final_state": hit[0]}
    candidate = assemble(start_state, labels) if assemble else None
    if candidate is not None and p is not None and y is not None:
        if not _verifies(candidate, y, p):
            candidate = None
    outcome = ("localized" if candidate is None
               else _classify(candidate, y, p, planted))
    return AttackReport("dp_collapse", outcome, work,
                        time.perf_counter() - t0, candidate=candidate,
                        details=details)


def _dp_step_terms(family: ObservableFamily, i: int, s: Vec, t: Vec,
                   eps: Vec) -> tuple[int, ...] | None:
    """Per-step accumulator contribution for step-decomposable families."""
    q = family.q
    if isinstance(family, LinearProjected):
        from .fieldcore import vec_dot
        out = []
        for row in family.coeffs:
            term = vec_dot(row[i + 1], t, q)
            if i == 0:
                term += vec_dot(row[0], s, q)
            out.append(term % q)
        return tuple(out)
    if isinstance(family, TransitionEnergy):
        from .fieldcore import vec_dot
        out = []
        for uj, vj, wj in zip(family.u, family.v, family.w):
            term = vec_dot(uj[i], s, q) * vec_dot(vj[i], t, q)
            term += vec_dot(wj[i], vec_sub(t, s, q), q)
            out.append(term % q)
        return tuple(out)
    if isinstance(family, NonlinearLocal):
        from .fieldcore import vec_dot
        out = []
        for j in range(family.m):
            g = vec_dot(family.a[j][i], s, q)
            term = (g * g
                    + family.c[j][i] * vec_dot(family.b[j][i], t, q)
                    + vec_dot(family.d[j][i], eps, q))
            out.append((family.chi[j][i] * term) % q)
        return tuple(out)
    if isinstance(family, Telescoping):
        return vec_sub(t, s, q)
    if isinstance(family, Composite):
        parts = [_dp_step_terms(f, i, s, t, eps) for f in family.parts]
        if any(part is None for part in parts):
            return None
        return tuple(x for part in parts for x in part)
    return None


def dp_decomposable(family: ObservableFamily) -> bool:
    """Does the family split into a sum of per-transition terms?"""
    if isinstance(family, (LinearProjected, TransitionEnergy, NonlinearLocal,
                           Telescoping)):
        return True
    if isinstance(family, Composite):
        return all(dp_decomposable(f) for f in family.parts)
    return False


def dp_attack(p: ParameterSet, y: PublicObservable,
              guard: EnumerationGuard | None = None,
              target_end: Vec | None = None,
              planted: MicroObject | None = None) -> AttackReport:
    """DP collapse specialized to a step-decomposable observable family."""
    family = p.family
    _check_family_matches(family, p)
    if not dp_decomposable(family):
        return AttackReport("dp_collapse", "not-applicable",
                            {"table_entries": 0}, 0.0,
                            details={"reason": "family is not step-decomposable"})
    q = p.q
    noise_vecs = _noise_step_vectors(p)
    steps_menu = [(mi, ui, eta)
                  for mi in range(p.b) for ui in range(p.r)
                  for eta in noise_vecs]

    def moves(i: int, s: Vec):
        for mi, ui, eta in steps_menu:
            d = p.macro_alphabet[mi]
            e = p.micro_alphabet[ui]
            t = tuple((a + b + c + h) % q for a, b, c, h in zip(s, d, e, eta))
            phi = _dp_step_terms(family, i, s, t, e)
            yield (mi, ui, eta), t, phi

    def acc_add(a, b):
        return tuple((x + z) % q for x, z in zip(a, b))

    if p.fixed_start is not None:
        starts: Sequence[Vec] = [p.fixed_start]
    else:
        starts = list(all_states(p.n, q))
    end = target_end if target_end is not None else p.target_end
    structure = DPStructure(
        num_states=q ** p.n,
        acc_size=q ** family.m,
        steps=p.T,
        start_states=starts,
        moves=moves,
        acc_add=acc_add,
        acc_zero=(0,) * family.m,
        target_state=vec_reduce(end, q) if end is not None else None,
    )

    def assemble(start_state: Vec, labels) -> MicroObject:
        macro = tuple(lab[0] for lab in labels)
        micro = tuple(lab[1] for lab in labels)
        lifts = tuple(lab[2] for lab in labels)
        return MicroObject(start_state, macro, micro, lifts)

    return dp_collapse(structure, tuple(y.entries), guard=guard,
                       assemble=assemble, p=p, y=y, planted=planted)


# ---------------------------------------------------------------------------
# meet in the middle
# ---------------------------------------------------------------------------

def _half_menu(p: ParameterSet) -> list[tuple[int, int, Vec]]:
    noise_vecs = _noise_step_vectors(p)
    return [(mi, ui, eta)
            for mi in range(p.b) for ui in range(p.r) for eta in noise_vecs]


def mitm_split(p: ParameterSet, y: PublicObservable, split: int,
               guard: EnumerationGuard | None = None,
               probes: int | None = None,
               rng: RandomSource | None = None,
               planted: MicroObject | None = None) -> AttackReport:
    """Meet-in-the-middle over a time split, for additively separable families.

    Separability Phi(X) = Phi_L(left) + Phi_R(right) is probed on random
    recombinations before any table is built; a single mismatch aborts
    with not-applicable.  The left-image table is keyed by entry vectors;
    the right scan looks up Y - Phi_R.  The default probe count scales
    with the table sizes so the total evaluation count stays within
    2 (N_L + N_R) + 64 even on toy instances.
    """
    t0 = time.perf_counter()
    family = p.family
    _check_family_matches(family, p)
    if not (1 <= split < p.T):
        raise ValueError("split must be in [1, T-1]")
    rng = rng or RandomSource(p.seed, "mitm-probe")
    q = p.q
    n = p.n
    menu = _half_menu(p)
    per_step = len(menu)
    if p.fixed_start is not None:
        starts: Sequence[Vec] = [p.fixed_start]
    else:
        starts = list(all_states(n, q))
    n_left = len(starts) * per_step ** split
    n_right = per_step ** (p.T - split)
    _guard(guard).check(n_left + n_right, "MITM tables")
    if probes is None:
        # keep 1 + 3*probes within the 64-eval slack of the bound
        probes = max(2, min(20, (n_left + n_right) // 8))
    work = {"left_evals": 0, "right_evals": 0, "probe_evals": 0,
            "verify_evals": 0, "n_left": n_left, "n_right": n_right}
    base_x0 = p.fixed_start if p.fixed_start is not None else (0,) * n
    zero_vec = (0,) * n
    zero_steps = [(zero_vec, zero_vec, zero_vec)] * p.T

    def vobj_from(x0: Vec, steps: list[tuple[Vec, Vec, Vec]]) -> VectorObject:
        return VectorObject(x0,
                            tuple(s[0] for s in steps),
                            tuple(s[1] for s in steps),
                            tuple(s[2] for s in steps))

    def steps_of(labels: Sequence[tuple[int, int, Vec]]):
        return [(p.macro_alphabet[mi], p.micro_alphabet[ui],
                 vec_reduce(eta, q)) for mi, ui, eta in labels]

    def phi(v: VectorObject) -> tuple[int, ...]:
        return family.vector_entries(v)

    try:
        phi_base = phi(vobj_from(base_x0, zero_steps))
    except FamilyError as exc:
        return AttackReport("mitm_split", "not-applicable", work,
                            time.perf_counter() - t0,
                            details={"reason": str(exc)})
    work["probe_evals"] += 1

    def phi_left(x0: Vec, labels) -> tuple[int, ...]:
        steps = steps_of(labels) + zero_steps[split:]
        return phi(vobj_from(x0, steps))

    def phi_right(labels) -> tuple[int, ...]:
        steps = zero_steps[:split] + steps_of(labels)
        raw = phi(vobj_from(base_x0, steps))
        return tuple((a - b) % q for a, b in zip(raw, phi_base))

    # separability probe on random admissible recombinations
    for k in range(probes):
        src = rng.child(f"probe{k}")
        obj_l = sample_object(p, src.child("left"))
        obj_r = sample_object(p, src.child("right"))
        left_labels = [(obj_l.macro_indices[i], obj_l.micro_indices[i],
                        obj_l.noise_lifts[i]) for i in range(split)]
        right_labels = [(obj_r.macro_indices[i], obj_r.micro_indices[i],
                         obj_r.noise_lifts[i]) for i in range(split, p.T)]
        combined = MicroObject(
            obj_l.x0,
            obj_l.macro_indices[:split] + obj_r.macro_indices[split:],
            obj_l.micro_indices[:split] + obj_r.micro_indices[split:],
            obj_l.noise_lifts[:split] + obj_r.noise_lifts[split:])
        lhs = eval_observable(family, combined, p).entries
        rhs_l = phi_left(obj_l.x0, left_labels)
        rhs_r = phi_right(right_labels)
        work["probe_evals"] += 3
        if lhs != tuple((a + b) % q for a, b in zip(rhs_l, rhs_r)):
            return AttackReport(
                "mitm_split", "not-applicable", work,
                time.perf_counter() - t0,
                details={"reason": f"separability probe failed at {k}"})

    import itertools
    table: dict[tuple[int, ...], tuple[Vec, tuple]] = {}
    for x0 in starts:
        for labels in itertools.product(menu, repeat=split):
            key = phi_left(x0, labels)
            work["left_evals"] += 1
            if key not in table:
                table[key] = (x0, labels)
    target = tuple(y.entries)
    for labels in itertools.product(menu, repeat=p.T - split):
        val = phi_right(labels)
        work["right_evals"] += 1
        want = tuple((a - b) % q for a, b in zip(target, val))
        hit = table.get(want)
        if hit is None:
            continue
        x0, left_labels = hit
        candidate = MicroObject(
            x0,
            tuple(l[0] for l in left_labels) + tuple(l[0] for l in labels),
            tuple(l[1] for l in left_labels) + tuple(l[1] for l in labels),
            tuple(l[2] for l in left_labels) + tuple(l[2] for l in labels))
        work["verify_evals"] += 1
        if _verifies(candidate, y, p):
            return AttackReport("mitm_split",
                                _classify(candidate, y, p, planted), work,
                                time.perf_counter() - t0, candidate=candidate)
    return AttackReport("mitm_split", "failed", work,
                        time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# local search
# ---------------------------------------------------------------------------

def _neighbors(x: MicroObject, p: ParameterSet) -> Iterable[MicroObject]:
    """Single-coordinate moves in the witness space."""
    if p.fixed_start is None:
        for c in range(p.n):
            for val in range(p.q):
                if val != x.x0[c]:
                    x0 = x.x0[:c] + (val,) + x.x0[c + 1:]
                    yield MicroObject(x0, x.macro_indices, x.micro_indices,
                                      x.noise_lifts)
    for i in range(p.T):
        for mi in range(p.b):
            if mi != x.macro_indices[i]:
                macro = x.macro_indices[:i] + (mi,) + x.macro_indices[i + 1:]
                yield MicroObject(x.x0, macro, x.micro_indices, x.noise_lifts)
        for ui in range(p.r):
            if ui != x.micro_indices[i]:
                micro = x.micro_indices[:i] + (ui,) + x.micro_indices[i + 1:]
                yield MicroObject(x.x0, x.macro_indices, micro, x.noise_lifts)
        if p.noise.enabled:
            for c in range(p.n):
                for val in range(-p.noise.bound, p.noise.bound + 1):
                    if val != x.noise_lifts[i][c]:
                        step = x.noise_lifts[i][:c] + (val,) + x.noise_lifts[i][c + 1:]
                        lifts = x.noise_lifts[:i] + (step,) + x.noise_lifts[i + 1:]
                        yield MicroObject(x.x0, x.macro_indices,
                                          x.micro_indices, lifts)


def local_search_round(p: ParameterSet, y: PublicObservable, budget: int,
                       restarts: int = 16, rng: RandomSource | None = None,
                       planted: MicroObject | None = None,
                       start: MicroObject | None = None) -> AttackReport:
    """Greedy hill climbing on observable Hamming distance.

    First-improvement moves over shuffled single-coordinate neighborhoods;
    each observable evaluation costs one unit of budget.
    """
    t0 = time.perf_counter()
    family = p.family
    rng = rng or RandomSource(p.seed, "local-search")
    target = y.entries
    evals = 0

    def dist(cand: MicroObject) -> int:
        nonlocal evals
        evals += 1
        return hamming(eval_observable(family, cand, p).entries, target)

    first = start if start is not None else sample_object(p, rng.child("start"))
    if budget <= 0:
        details = {"best_distance": None, "initial_distance": None}
        if planted is not None:
            details["d_object"] = object_distance(first, planted, p)
        return AttackReport("local_search", "failed", {"evals": 0},
                            time.perf_counter() - t0, candidate=first,
                            details=details)
    best: MicroObject | None = None
    best_dist = None
    initial_dist = None
    for k in range(restarts):
        if evals >= budget:
            break
        cand = first if k == 0 else sample_object(p, rng.child(f"restart{k}"))
        d = dist(cand)
        if initial_dist is None:
            initial_dist = d
        improved = True
        while improved and d > 0 and evals < budget:
            improved = False
            neigh = list(_neighbors(cand, p))
            rng.child(f"order{k}").shuffle(neigh)
            for nb in neigh:
                if evals >= budget:
                    break
                nd = dist(nb)
                if nd < d:
                    cand, d = nb, nd
                    improved = True
                    break
        if best_dist is None or d < best_dist:
            best, best_dist = cand, d
        if d == 0:
            break
    details = {"best_distance": best_dist, "initial_distance": initial_dist,
               "restarts_run": min(restarts, k + 1)}
    if planted is not None:
        details["d_object"] = object_distance(best, planted, p)
    if best_dist == 0:
        outcome = _classify(best, y, p, planted)
    elif best_dist is not None and initial_dist is not None \
            and best_dist < initial_dist:
        outcome = "localized"
    else:
        outcome = "failed"
    return AttackReport("local_search", outcome, {"evals": evals},
                        time.perf_counter() - t0, candidate=best,
                        details=details)


# ---------------------------------------------------------------------------
# posterior sampling
# ---------------------------------------------------------------------------

def bayes_fiber_guess(y: PublicObservable | bytes, table: FiberTable,
                      rng: RandomSource) -> MicroObject:
    """Uniform draw from the exact fiber of y (optimal under uniform prior)."""
    from .fieldcore import decode_object

    key = serialize_public(y) if isinstance(y, PublicObservable) else y
    members = table.fibers.get(key)
    if not members:
        raise ValueError("observable value outside the table image")
    return decode_object(rng.choice(members), table.p)


def bayes_fiber_experiment(p: ParameterSet, table: FiberTable, trials: int,
                           rng: RandomSource) -> AttackReport:
    """Empirical planted-success of the fiber sampler over fresh witnesses."""
    t0 = time.perf_counter()
    successes = 0
    for i in range(trials):
        planted = sample_object(p, rng.child(f"trial{i}/plant"))
        y = eval_observable(p.family, planted, p)
        guess = bayes_fiber_guess(y, table, rng.child(f"trial{i}/guess"))
        if guess == planted:
            successes += 1
    rate = successes / trials
    return AttackReport(
        "bayes_fiber", "witness-found", {"trials": trials, "evals": trials},
        time.perf_counter() - t0,
        details={"successes": successes, "success_rate": rate,
                 "relation_rate": 1.0})


# ---------------------------------------------------------------------------
# structure detectors
# ---------------------------------------------------------------------------

@dataclass
class TelescopeReport:
    endpoint_determined: bool
    probes_run: int
    counterexample: tuple[MicroObject, MicroObject] | None


def telescoping_detector(p: ParameterSet, probes: int = 1000,
                         rng: RandomSource | None = None) -> TelescopeReport:
    """Is the observable a function of the endpoints alone?

    Probes endpoint-matched witness pairs built by swapping two unequal
    steps (the increment sum commutes, so both endpoints are preserved);
    any observable difference disproves endpoint determination.
    """
    family = p.family
    rng = rng or RandomSource(p.seed, "telescope-probe")
    if p.T < 2:
        raise ValueError("need T >= 2 to build interior-differing pairs")
    attempts_left = 50 * probes

    def swapped_pair(src: RandomSource) -> tuple[MicroObject, MicroObject] | None:
        x = sample_object(p, src)
        steps = [(x.macro_indices[i], x.micro_indices[i], x.noise_lifts[i])
                 for i in range(p.T)]
        distinct = [(i, j) for i in range(p.T) for j in range(i + 1, p.T)
                    if steps[i] != steps[j]]
        if not distinct:
            return None
        i, j = distinct[src.randrange(len(distinct))]
        steps[i], steps[j] = steps[j], steps[i]
        other = MicroObject(x.x0,
                            tuple(s[0] for s in steps),
                            tuple(s[1] for s in steps),
                            tuple(s[2] for s in steps))
        return x, other

    run = 0
    k = 0
    while run < probes:
        if attempts_left <= 0:
            raise ValueError(
                "could not build endpoint-matched differing pairs "
                "(degenerate step alphabet)")
        attempts_left -= 1
        pair = swapped_pair(rng.child(f"pair{k}"))
        k += 1
        if pair is None:
            continue
        a, b = pair
        run += 1
        ya = eval_observable(family, a, p)
        yb = eval_observable(family, b, p)
        if serialize_public(ya) != serialize_public(yb):
            return TelescopeReport(False, run, (a, b))
    return TelescopeReport(True, run, None)


@dataclass
class DistinguisherReport:
    keys: int
    positions: int
    bins: int
    reject: bool
    min_p_corrected: float
    worst_position: int
    corr_min: float
    corr_max: float


def multi_instance_distinguisher(keys: Sequence[PublicObservable] | Sequence[Sequence[int]],
                                 domain: int | Sequence[int] | None = None,
                                 alpha: float = 1e-4) -> DistinguisherReport:
    """Per-position chi-square against uniform, Bonferroni-corrected.

    domain gives each position's value-range size (one int applies to all;
    see observables.entry_domains for families with mixed entry ranges).
    Values are folded into equal-width bins sized so that expected counts
    stay well above the chi-square validity floor; rejection means some
    position's corrected p-value dropped below alpha.  Positions whose
    domain collapses to a single value carry no information and are
    skipped.  Pairwise Pearson correlation extremes are reported alongside.
    """
    import numpy as np
    from scipy import stats

    if not keys:
        raise ValueError("need at least one key")
    if isinstance(keys[0], PublicObservable):
        if domain is None:
            domain = 1 << keys[0].ell
        rows = [k.entries for k in keys]
    else:
        if domain is None:
            raise ValueError("domain is required for raw entry arrays")
        rows = [tuple(k) for k in keys]
    m = len(rows[0])
    if any(len(r) != m for r in rows):
        raise ValueError("keys must share their entry count")
    if isinstance(domain, int):
        domains = [domain] * m
    else:
        domains = list(domain)
        if len(domains) != m:
            raise ValueError("need one domain per entry position")
    data = np.asarray(rows, dtype=np.int64)
    n_keys = len(rows)
    tested = 0
    min_p = 1.0
    worst = 0
    max_bins = 2
    for j in range(m):
        if domains[j] < 2:
            continue
        nbins = min(domains[j], max(2, n_keys // 16))
        max_bins = max(max_bins, nbins)
        binned = (data[:, j] * nbins) // domains[j]
        expected = n_keys / nbins
        counts = np.bincount(binned, minlength=nbins)
        stat = float(((counts - expected) ** 2 / expected).sum())
        pval = float(stats.chi2.sf(stat, nbins - 1))
        tested += 1
        if pval < min_p:
            min_p, worst = pval, j
    min_p_corrected = min(1.0, min_p * max(1, tested))
    corr_min, corr_max = 0.0, 0.0
    if m >= 2:
        if m <= 64:
            pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
        else:
            pick = RandomSource(bytes(32), "distinguisher-pairs")
            pairs = [(pick.randrange(m), pick.randrange(m)) for _ in range(1000)]
            pairs = [(i, j) for i, j in pairs if i != j]
        cors = []
        for i, j in pairs:
            a, b = data[:, i].astype(float), data[:, j].astype(float)
            if a.std() == 0 or b.std() == 0:
                cors.append(0.0)
            else:
                cors.append(float(np.corrcoef(a, b)[0, 1]))
        corr_min, corr_max = min(cors), max(cors)
    return DistinguisherReport(
        keys=n_keys, positions=tested, bins=max_bins,
        reject=min_p_corrected < alpha,
        min_p_corrected=min_p_corrected, worst_position=worst,
        corr_min=corr_min, corr_max=corr_max)


def periodicity_scan(entries: Sequence[int]) -> int | None:
    """Smallest proper period of a sequence, or None if aperiodic."""
    n = len(entries)
    for per in range(1, n):
        if all(entries[i] == entries[i - per] for i in range(per, n)):
            return per
    return None


# ---------------------------------------------------------------------------
# constraint-instance export
# ---------------------------------------------------------------------------

def export_constraint_instance(p: ParameterSet, y: PublicObservable,
                               path: str) -> None:
    """Write a self-contained solver-facing description of (P, Y).

    The file is versioned JSON with explicit coefficient arrays, so an
    external brute-force or constraint solver needs nothing but this file.
    """
    from .config import params_to_dict

    doc = {
        "format": "hiddenpath-constraint",
        "version": 1,
        "parameters": params_to_dict(p),
        "observable": {
            "entries": list(y.entries),
            "ell": y.ell,
            "fingerprint": y.fingerprint.hex(),
            "serialized": serialize_public(y).hex(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def parse_constraint_instance(path: str) -> tuple[ParameterSet, PublicObservable]:
    """Read back an exported instance; round-trips exactly."""
    from .config import params_from_dict
    from .observables import parse_public

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "hiddenpath-constraint":
        raise ValueError("not a constraint-instance file")
    if doc.get("version") != 1:
        raise ValueError(f"unsupported version {doc.get('version')!r}")
    p = params_from_dict(doc["parameters"])
    y = parse_public(bytes.fromhex(doc["observable"]["serialized"]))
    if list(y.entries) != doc["observable"]["entries"]:
        raise ValueError("entry list does not match serialized payload")
    return p, y
