"""Computation and information variables, distinguishability and measurement.

Quantum answers come from :mod:`constructor_kit.oracles`; three-valued
results are returned as ``True`` / ``False`` / ``None`` (unknown).
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _linalg as la
from .core import Attribute, Permutation, Substrate, Task, Variable
from .errors import (
    ConstructorKitError,
    LabelMismatch,
    NotPreparable,
    SharedSubstrate,
    TooFewAttributes,
)
from .oracles import OracleConfig, Verdict, possible_with_side_effects


def tri_and(*vals) -> bool | None:
    if any(v is False for v in vals):
        return False
    if any(v is None for v in vals):
        return None
    return True


def verdict_bool(v: Verdict) -> bool | None:
    if v.possible:
        return True
    if v.impossible:
        return False
    return None


# --------------------------------------------------------------------------- pointers


def pointer_medium(n: int, kind: str, name: str = "pointer") -> Substrate:
    """A fresh output medium with room for ``n`` sharp values."""
    return Substrate(name, kind, max(2, n))


def pointer_attributes(medium: Substrate, labels: Sequence[str]) -> list[Attribute]:
    """Orthonormal basis rays (quantum) or single labels (classical), one per label."""
    if medium.is_quantum:
        eye = np.eye(medium.size)
        return [Attribute.rays(medium, [eye[i]], label=f"'{lab}'") for i, lab in enumerate(labels)]
    states = medium.state_labels()
    return [Attribute.states(medium, [states[i]], label=f"'{lab}'") for i, lab in enumerate(labels)]


def receptive_attribute(medium: Substrate) -> Attribute:
    """The canonical blank state of a pointer medium."""
    if medium.is_quantum:
        return Attribute.rays(medium, [np.eye(medium.size)[0]], label="blank")
    return Attribute.states(medium, [medium.state_labels()[0]], label="blank")


def canonical_basis(substrate: Substrate, name: str | None = None) -> Variable:
    """One attribute per computational-basis state (or per classical label)."""
    if substrate.is_quantum:
        eye = np.eye(substrate.size)
        attrs = [Attribute.rays(substrate, [eye[i]], label=str(i)) for i in range(substrate.size)]
    else:
        attrs = [Attribute.states(substrate, [s], label=str(s)) for s in substrate.state_labels()]
    return Variable(tuple(attrs), name=name or f"basis({substrate.name})")


def _attrs(x) -> list[Attribute]:
    return list(x.attributes) if isinstance(x, Variable) else list(x)


def _labels(x) -> list[str]:
    if isinstance(x, Variable):
        return [x.label_of(i) for i in range(len(x))]
    return [a.label or str(i) for i, a in enumerate(x)]


# --------------------------------------------------------------------------- distinguishability


def distinguishing_task(x_set, medium: Substrate | None = None, tag: str | None = None) -> Task:
    attrs = _attrs(x_set)
    kind = attrs[0].substrate.kind
    medium = medium or pointer_medium(len(attrs), kind)
    ptrs = pointer_attributes(medium, [str(i) for i in range(len(attrs))])
    return Task(tuple((a, p) for a, p in zip(attrs, ptrs)), tag=tag or "distinguish")


def distinguish(x_set, config: OracleConfig | None = None) -> Verdict:
    """Whether the attributes can be mapped onto a fresh information variable."""
    return possible_with_side_effects(distinguishing_task(x_set), config)


class PerpRelation:
    """Memoised symmetric distinguishability relation keyed by attribute fingerprints."""

    def __init__(self, config: OracleConfig | None = None):
        self.config = config
        self._cache: dict = {}
        self._lock = threading.Lock()

    def __call__(self, x: Attribute, y: Attribute) -> bool | None:
        key = tuple(sorted((x.fingerprint(), y.fingerprint())))
        if key in self._cache:
            return self._cache[key]
        if not x.substrate.same_shape(y.substrate) or not x.isdisjoint(y):
            val = False
        else:
            val = verdict_bool(distinguish([x, y], self.config))
        with self._lock:
            self._cache[key] = val
        return val

    def __len__(self):
        return len(self._cache)


_DEFAULT_PERP = PerpRelation()


def perp(x: Attribute, y: Attribute, config: OracleConfig | None = None) -> bool | None:
    """``x`` is distinguishable from ``y``; non-disjoint attributes never are."""
    if config is None:
        return _DEFAULT_PERP(x, y)
    return PerpRelation(config)(x, y)


# --------------------------------------------------------------------------- bar


def bar(x: Attribute) -> Attribute:
    """All states distinguishable from every state of ``x``."""
    label = f"bar({x.label})" if x.label else None
    if not x.is_quantum:
        rest = [s for s in x.substrate.state_labels() if s not in x.state_set]
        return Attribute.states(x.substrate, rest, label=label)
    comp = la.complement(x.span(), x.substrate.size)
    if comp.shape[1] == 0:
        return Attribute.empty(x.substrate, label=label)
    return Attribute.subspace(x.substrate, comp, label=label)


def bar_bar(x: Attribute) -> Attribute:
    label = f"barbar({x.label})" if x.label else None
    if not x.is_quantum:
        return Attribute.states(x.substrate, x.state_set, label=label)
    span = x.span()
    if span.shape[1] == 0:
        return Attribute.empty(x.substrate, label=label)
    return Attribute.subspace(x.substrate, span, label=label)


def boolean_variable(x: Attribute) -> Variable:
    """``{x, bar(x)}``; ``bar(x)`` may be empty."""
    return Variable((x, bar(x)), name=f"bool({x.label or '?'})")


def is_maximal(v: Variable) -> bool:
    return bar(v.union()).is_empty


def is_measurable(v: Variable, config: OracleConfig | None = None) -> bool | None:
    """Some measurer of ``v`` exists; a destructive measurement suffices."""
    return verdict_bool(distinguish(v, config))


def is_observable(v: Variable, config: OracleConfig | None = None) -> bool | None:
    """Measurable and every attribute closed under the double bar."""
    m = is_measurable(v, config)
    if m is not True:
        return False if m is False else None
    return all(a.same_as(bar_bar(a)) for a in v)


# --------------------------------------------------------------------------- cloning & computation


def _copy_substrate(sub: Substrate) -> Substrate:
    return sub.renamed(sub.name + "'")


def cloning_task(s_var, x0: Attribute, preparables: Sequence[Attribute] | None = None) -> Task:
    """``{(x, x0) -> (x, x)}`` over the attributes of ``s_var`` on ``S (+) S'``."""
    attrs = _attrs(s_var)
    sub = attrs[0].substrate
    if preparables is not None and not any(x0.same_as(p) for p in preparables):
        raise NotPreparable(f"{x0!r} is not declared preparable")
    copy = _copy_substrate(sub)
    both = Substrate.compose(sub, copy)
    blank = x0.rehome(copy)
    pairs = tuple((Attribute.product(x, blank, substrate=both),
                   Attribute.product(x, x.rehome(copy), substrate=both)) for x in attrs)
    return Task(pairs, tag="cloning")


def _distinct(attrs: list[Attribute]) -> list[Attribute]:
    out: list[Attribute] = []
    for a in attrs:
        if not any(a.same_as(b) for b in out):
            out.append(a)
    return out


def cloning_verdict(s_var, preparables: Sequence[Attribute] | None = None,
                    config: OracleConfig | None = None) -> Verdict:
    """First Possible cloning verdict over the blank states, else the last refutation.

    Attributes equal as sets count once, so ``{x, x}`` is the one-element set.
    """
    attrs = _distinct(_attrs(s_var))
    sub = attrs[0].substrate
    blanks = [p for p in (preparables or []) if p.substrate.same_shape(sub)]
    if not blanks:
        if sub.is_quantum:
            blanks = [Attribute.rays(sub, [np.eye(sub.size)[0]], label="0")]
        else:
            blanks = [Attribute.states(sub, [sub.state_labels()[0]])]
    last = None
    unknown = None
    for x0 in blanks:
        v = possible_with_side_effects(cloning_task(attrs, x0), config)
        if v.possible:
            return v
        if v.unknown:
            unknown = v
        last = v
    return unknown or last


def is_clonable(s_var, preparables: Sequence[Attribute] | None = None,
                config: OracleConfig | None = None) -> bool | None:
    return verdict_bool(cloning_verdict(s_var, preparables, config))


def computation_task(s_var, perm: Permutation) -> Task:
    attrs = _attrs(s_var)
    return Task(tuple((attrs[i], attrs[perm(i)]) for i in range(len(attrs))), tag="computation")


def permutations_to_check(n: int):
    """All permutations for small sets, else the transpositions that generate them."""
    if n <= 6:
        return [p for p in Permutation.all(n) if not p.is_identity]
    return [Permutation.transposition(n, i, j) for i, j in itertools.combinations(range(n), 2)]


def is_computation_variable(s_var, config: OracleConfig | None = None) -> bool | None:
    attrs = _attrs(s_var)
    if len(attrs) < 2:
        raise TooFewAttributes("a computation variable needs at least two attributes")
    results = []
    for p in permutations_to_check(len(attrs)):
        r = verdict_bool(possible_with_side_effects(computation_task(attrs, p), config))
        if r is False:
            return False
        results.append(r)
    return tri_and(*results)


def is_information_variable(s_var, preparables=None, config: OracleConfig | None = None) -> bool | None:
    attrs = _attrs(s_var)
    if len(_distinct(attrs)) < 2:
        return False
    comp = is_computation_variable(attrs, config)
    if comp is False:
        return False
    return tri_and(comp, is_clonable(attrs, preparables, config))


def info_capacity(substrate: Substrate, candidates: Sequence[Variable] = (),
                  config: OracleConfig | None = None) -> float:
    """log2 of the size of the largest information variable found.

    Classical substrates: the partition into single states, verified.
    Quantum substrates: the declared candidates plus the computational basis.
    """
    pool = [c for c in candidates if c.substrate.same_shape(substrate)]
    pool.append(canonical_basis(substrate))
    best = 0
    for v in sorted(pool, key=len, reverse=True):
        if len(v) <= best:
            continue
        if is_information_variable(v, config=config) is True:
            best = len(v)
    return math.log2(best) if best else 0.0


# --------------------------------------------------------------------------- measurement


@dataclass(frozen=True, eq=False)
class MeasurementSpec:
    """Measurement of a variable: ``(x, x0) -> (y_x, 'x')`` for each ``x`` in the input."""

    input_variable: Variable
    output_medium: Substrate
    receptive: Attribute
    output_variable: Variable
    residuals: tuple[Attribute, ...]

    def __post_init__(self):
        n = len(self.input_variable)
        if len(self.output_variable) != n or len(self.residuals) != n:
            raise LabelMismatch("output labels and residuals must biject with input attributes")
        object.__setattr__(self, "residuals", tuple(self.residuals))

    def labels(self) -> list[str]:
        return [self.output_variable.label_of(i) for i in range(len(self.output_variable))]

    def output_is_information_variable(self, config=None) -> bool | None:
        return is_information_variable(self.output_variable, config=config)


def non_perturbing_spec(x_var: Variable, medium: Substrate | None = None) -> MeasurementSpec:
    """Measurer that leaves each attribute of ``x_var`` in place and writes its label."""
    medium = medium or pointer_medium(len(x_var), x_var.substrate.kind, name="M")
    labels = [x_var.label_of(i) for i in range(len(x_var))]
    out = Variable(tuple(pointer_attributes(medium, labels)), tuple(labels))
    return MeasurementSpec(x_var, medium, receptive_attribute(medium), out, tuple(x_var.attributes))


def demolition_spec(x_var: Variable, medium: Substrate | None = None) -> MeasurementSpec:
    """Measurer that may leave the measured substrate in any state."""
    spec = non_perturbing_spec(x_var, medium)
    full = Attribute.full(x_var.substrate, label="any")
    return MeasurementSpec(spec.input_variable, spec.output_medium, spec.receptive,
                           spec.output_variable, tuple(full for _ in x_var))


def _joint(spec: MeasurementSpec) -> Substrate:
    names = {a.name for a in spec.input_variable.substrate.atoms}
    if names & {a.name for a in spec.output_medium.atoms}:
        raise SharedSubstrate("measured substrate and output medium share components")
    return Substrate.compose(spec.input_variable.substrate, spec.output_medium)


def measurement_task(spec: MeasurementSpec) -> Task:
    both = _joint(spec)
    pairs = tuple(
        (Attribute.product(x, spec.receptive, substrate=both),
         Attribute.product(y, p, substrate=both))
        for x, y, p in zip(spec.input_variable, spec.residuals, spec.output_variable))
    return Task(pairs, tag="measurement")


def is_non_perturbing(spec: MeasurementSpec) -> bool:
    return all(y.issubset(x) for x, y in zip(spec.input_variable, spec.residuals))


def _as_union_of(target: Attribute, parts: Sequence[Attribute]) -> list[int] | None:
    idx = [i for i, p in enumerate(parts) if p.issubset(target)]
    if not idx:
        return None
    u = parts[idx[0]] if len(idx) == 1 else Attribute.union(*(parts[i] for i in idx))
    return idx if u.same_as(target) else None


def is_measurer_of(spec: MeasurementSpec, v: Variable, config: OracleConfig | None = None,
                   max_labellings: int = 256) -> bool | None:
    """Whether a constructor performing ``spec`` also measures ``v`` under some relabelling.

    Subsets and coarsenings of the measured variable are accepted directly
    (the labelling is the union of the grouped pointer values).  Otherwise
    the measurement task is conjoined with ``(v_j, x0) -> (anything, L_j)``
    for each assignment of disjoint nonempty label sets ``L_j``.
    """
    base = verdict_bool(possible_with_side_effects(measurement_task(spec), config))
    if base is not True:
        return base
    xs = list(spec.input_variable)
    groups = [_as_union_of(a, xs) for a in v]
    if all(g is not None for g in groups):
        return True
    both = _joint(spec)
    ptrs = list(spec.output_variable)
    full = Attribute.full(spec.input_variable.substrate, label="any")
    base_task = measurement_task(spec)
    labellings = _label_assignments(len(ptrs), len(v))
    results = []
    for assignment in itertools.islice(labellings, max_labellings):
        extra = []
        for a, labs in zip(v, assignment):
            out = ptrs[labs[0]] if len(labs) == 1 else Attribute.union(*(ptrs[i] for i in labs))
            extra.append((Attribute.product(a, spec.receptive, substrate=both),
                          Attribute.product(full, out, substrate=both)))
        try:
            task = Task(base_task.pairs + tuple(extra), tag="measurement")
        except ConstructorKitError:
            return None
        r = verdict_bool(possible_with_side_effects(task, config))
        if r is True:
            return True
        results.append(r)
    if len(results) < _count_assignments(len(ptrs), len(v)):
        return None
    return tri_and(*results)


def _label_assignments(n_labels: int, n_attrs: int):
    """Ordered tuples of pairwise-disjoint nonempty subsets of ``range(n_labels)``."""
    cells = list(range(n_attrs + 1))  # extra cell = unused labels
    for owner in itertools.product(cells, repeat=n_labels):
        groups = [tuple(i for i in range(n_labels) if owner[i] == c) for c in range(n_attrs)]
        if all(groups):
            yield groups


def _count_assignments(n_labels: int, n_attrs: int) -> int:
    return sum(1 for _ in _label_assignments(n_labels, n_attrs))


def non_perturbing_possible(x_var: Variable, config: OracleConfig | None = None) -> Verdict:
    """Oracle verdict on the non-perturbing measurement task of ``x_var``."""
    return possible_with_side_effects(measurement_task(non_perturbing_spec(x_var)), config)
