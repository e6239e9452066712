"""Substrates, attributes, variables, tasks and the task algebra.

Everything here is independent of any subsidiary theory: nothing in this
module decides whether a task is possible.  Values are immutable once built.

Quantum attributes are stored as a finite union of *pieces*.  A piece is a
product set: one linear subspace per contiguous group of atomic components,
and the piece stands for every product state drawn from those subspaces.  A
single ray is a piece whose factors are all one-dimensional, a subspace
attribute is a one-factor piece, and the product of attributes on two
substrates concatenates their factors.  Comparisons between pieces whose
factor cuts differ merge factors by tensor product, which is exact whenever
the merged factors are rays.
"""

from __future__ import annotations

import graphlib
import hashlib
import itertools
from dataclasses import dataclass, field
from math import prod
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _linalg as la
from .errors import (
    BadPartition,
    CycleDetected,
    DimensionMismatch,
    InterfaceMismatch,
    KindMismatch,
    OverlappingOutputs,
    SharedSubstrate,
    ValidationError,
)

CLASSICAL = "classical"
QUANTUM = "quantum"


# --------------------------------------------------------------------------- substrates


@dataclass(frozen=True)
class Substrate:
    """A physical system: atomic, or an ordered composite of atomic parts."""

    name: str
    kind: str
    size: int
    parts: tuple["Substrate", ...] = ()

    def __post_init__(self):
        if self.kind not in (CLASSICAL, QUANTUM):
            raise ValidationError("Kind", f"unknown substrate kind {self.kind!r}")
        if not self.parts:
            minimum = 2 if self.kind == QUANTUM else 1
            if self.size < minimum:
                raise ValidationError("Dimension", f"{self.name}: size {self.size} < {minimum}")

    @classmethod
    def classical(cls, name: str, states: int) -> "Substrate":
        return cls(name, CLASSICAL, int(states))

    @classmethod
    def quantum(cls, name: str, dimension: int) -> "Substrate":
        return cls(name, QUANTUM, int(dimension))

    @classmethod
    def compose(cls, *subs: "Substrate", name: str | None = None) -> "Substrate":
        """Composite ``S1 (+) S2 (+) ...``; nested composites are flattened."""
        if len(subs) == 1 and name is None:
            return subs[0]
        kinds = {s.kind for s in subs}
        if len(kinds) != 1:
            raise KindMismatch("cannot compose classical and quantum substrates")
        atoms = tuple(a for s in subs for a in s.atoms)
        return cls(name or "+".join(s.name for s in subs), kinds.pop(),
                   prod(a.size for a in atoms), atoms)

    @property
    def atoms(self) -> tuple["Substrate", ...]:
        return self.parts if self.parts else (self,)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.atoms)

    @property
    def is_composite(self) -> bool:
        return bool(self.parts)

    @property
    def is_quantum(self) -> bool:
        return self.kind == QUANTUM

    def same_shape(self, other: "Substrate") -> bool:
        return self.kind == other.kind and self.dims == other.dims

    def renamed(self, name: str) -> "Substrate":
        if self.parts:
            return Substrate.compose(*(a.renamed(f"{name}.{i}") for i, a in enumerate(self.parts)),
                                     name=name)
        return Substrate(name, self.kind, self.size)

    def state_labels(self) -> list:
        if not self.parts:
            return list(range(self.size))
        return list(itertools.product(*(range(a.size) for a in self.parts)))

    def __repr__(self):
        return f"Substrate({self.name!r}, {self.kind}, {self.dims if self.parts else self.size})"


# --------------------------------------------------------------------------- states


class State:
    """A point of a substrate's state space.

    Quantum payloads are rays: two vectors differing by a global phase are the
    same state.
    """

    __slots__ = ("substrate", "payload")

    def __init__(self, substrate: Substrate, payload):
        self.substrate = substrate
        if substrate.is_quantum:
            v = la.as_vector(payload, substrate.size)
            if abs(np.linalg.norm(v) - 1.0) > la.TAU_NORM:
                raise ValidationError("Norm", f"state vector has norm {np.linalg.norm(v):.12g}")
            self.payload = la.normalize(v)
        else:
            if payload not in set(substrate.state_labels()):
                raise ValidationError("Label", f"{payload!r} is not a state of {substrate.name}")
            self.payload = payload

    def __eq__(self, other):
        if not isinstance(other, State) or not self.substrate.same_shape(other.substrate):
            return NotImplemented
        if self.substrate.is_quantum:
            return la.rays_equal(self.payload, other.payload)
        return self.payload == other.payload

    def __hash__(self):
        return hash(self.substrate.dims)

    def __repr__(self):
        return f"State({self.substrate.name}, {self.payload!r})"


# --------------------------------------------------------------------------- pieces


class Factor(NamedTuple):
    start: int
    stop: int
    basis: np.ndarray  # (dim of atoms[start:stop], k), orthonormal columns


Piece = tuple  # tuple[Factor, ...] covering all atoms contiguously


def _cuts(piece: Piece) -> frozenset:
    return frozenset(f.stop for f in piece[:-1])


def _merge(piece: Piece, cuts: frozenset) -> Piece:
    out, group = [], []
    for f in piece:
        group.append(f)
        if f.stop in cuts or f is piece[-1]:
            basis = la.kron_all([g.basis for g in group])
            out.append(Factor(group[0].start, group[-1].stop, basis))
            group = []
    return tuple(out)


def _align(p: Piece, q: Piece) -> tuple[Piece, Piece]:
    cp, cq = _cuts(p), _cuts(q)
    if cp == cq:
        return p, q
    c = cp & cq
    return _merge(p, c), _merge(q, c)


def piece_is_ray(p: Piece) -> bool:
    return all(f.basis.shape[1] == 1 for f in p)


def piece_dense(p: Piece) -> np.ndarray:
    return la.kron_all([f.basis for f in p])


def piece_inner(p: Piece, q: Piece) -> complex:
    """<p|q> for two ray pieces, computed factor by factor when cuts agree."""
    a, b = _align(p, q)
    out = 1.0 + 0.0j
    for fa, fb in zip(a, b):
        out *= complex(np.vdot(fa.basis[:, 0], fb.basis[:, 0]))
    return out


def piece_bound(p: Piece, q: Piece) -> float:
    """Largest |<u|v>| with u in p and v in q."""
    a, b = _align(p, q)
    out = 1.0
    for fa, fb in zip(a, b):
        out *= la.max_overlap(fa.basis, fb.basis)
    return out


def _ray_in_piece(vec: np.ndarray, p: Piece, dims: Sequence[int]) -> bool:
    if len(p) == 1:
        return la.span_contains(p[0].basis, vec[:, None])
    group_dims = [prod(dims[f.start:f.stop]) for f in p]
    parts = la.split_product(vec, group_dims)
    if parts is None:
        return False
    return all(la.span_contains(f.basis, v[:, None]) for f, v in zip(p, parts))


def _piece_contains(p: Piece, q: Piece, dims) -> bool:
    """q is a subset of p."""
    if piece_is_ray(q):
        # Compare block by block on the coarsest common cuts; p's factors nest inside.
        c = _cuts(p) & _cuts(q)
        qm = _merge(q, c) if _cuts(q) != c else q
        for fq in qm:
            sub = tuple(Factor(f.start - fq.start, f.stop - fq.start, f.basis)
                        for f in p if fq.start <= f.start and f.stop <= fq.stop)
            if not _ray_in_piece(fq.basis[:, 0], sub, dims[fq.start:fq.stop]):
                return False
        return True
    a, b = _align(p, q)
    return all(la.span_contains(fa.basis, fb.basis) for fa, fb in zip(a, b))


def _piece_disjoint(p: Piece, q: Piece, dims) -> bool:
    if piece_is_ray(q):
        return not _piece_contains(p, q, dims)
    if piece_is_ray(p):
        return not _piece_contains(q, p, dims)
    a, b = _align(p, q)
    return any(la.intersection_dim(fa.basis, fb.basis) == 0 for fa, fb in zip(a, b))


def _piece_key(p: Piece) -> bytes:
    h = hashlib.sha256()
    for f in p:
        proj = f.basis @ f.basis.conj().T
        h.update(f"{f.start}:{f.stop}:".encode())
        h.update(np.round(proj, 9).astype(np.complex128).tobytes())
    return h.digest()


def _ray_piece(sub: Substrate, vec: np.ndarray) -> Piece:
    v = la.canonical_phase(la.normalize(vec))
    return (Factor(0, len(sub.atoms), v[:, None]),)


# --------------------------------------------------------------------------- attributes


class Attribute:
    """A set of states of one substrate.

    Build with :meth:`states`, :meth:`rays`, :meth:`subspace`, :meth:`full`,
    :meth:`empty`, :meth:`product` or :meth:`union`.
    """

    __slots__ = ("substrate", "label", "_states", "_pieces", "_fp", "_source")

    def __init__(self, substrate: Substrate, *, states=None, pieces=None, label=None, source=None):
        self.substrate = substrate
        self.label = label
        self._states = frozenset(states) if states is not None else None
        self._pieces = tuple(pieces) if pieces is not None else None
        self._fp = None
        self._source = source

    # -- constructors
    @classmethod
    def states(cls, substrate: Substrate, labels: Iterable, label: str | None = None) -> "Attribute":
        if substrate.is_quantum:
            raise KindMismatch("state-set attributes need a classical substrate")
        labels = [tuple(x) if isinstance(x, list) else x for x in labels]
        valid = set(substrate.state_labels())
        bad = [x for x in labels if x not in valid]
        if bad:
            raise ValidationError("Label", f"{bad!r} not states of {substrate.name}")
        return cls(substrate, states=labels, label=label, source=("states", None))

    @classmethod
    def rays(cls, substrate: Substrate, vectors, label: str | None = None) -> "Attribute":
        if not substrate.is_quantum:
            raise KindMismatch("ray attributes need a quantum substrate")
        pieces: list = []
        for v in vectors:
            vec = la.as_vector(v, substrate.size)
            p = _ray_piece(substrate, vec)
            if not any(piece_is_ray(q) and la.rays_equal(piece_dense(q)[:, 0], p[0].basis[:, 0])
                       for q in pieces):
                pieces.append(p)
        return cls(substrate, pieces=pieces, label=label, source=("rays", None))

    @classmethod
    def subspace(cls, substrate: Substrate, basis, label: str | None = None) -> "Attribute":
        if not substrate.is_quantum:
            raise KindMismatch("subspace attributes need a quantum substrate")
        m = np.asarray(basis, dtype=np.complex128)
        if m.ndim == 1:
            m = m[:, None]
        elif m.shape[0] != substrate.size and m.shape[1] == substrate.size:
            m = m.T  # given as a list of row vectors
        if m.shape[0] != substrate.size:
            raise DimensionMismatch(f"basis vectors must have length {substrate.size}")
        q = la.orthonormalize(m)
        pieces = [] if q.shape[1] == 0 else [(Factor(0, len(substrate.atoms), q),)]
        return cls(substrate, pieces=pieces, label=label, source=("subspace", None))

    @classmethod
    def full(cls, substrate: Substrate, label: str | None = None) -> "Attribute":
        if substrate.is_quantum:
            return cls.subspace(substrate, np.eye(substrate.size), label=label)
        return cls.states(substrate, substrate.state_labels(), label=label)

    @classmethod
    def empty(cls, substrate: Substrate, label: str | None = None) -> "Attribute":
        if substrate.is_quantum:
            return cls(substrate, pieces=[], label=label, source=("empty", None))
        return cls(substrate, states=[], label=label, source=("empty", None))

    @classmethod
    def product(cls, *attrs: "Attribute", substrate: Substrate | None = None,
                label: str | None = None) -> "Attribute":
        """The attribute ``(a, b, ...)`` of the composite of the attributes' substrates."""
        if len(attrs) == 1 and substrate is None:
            return attrs[0]
        sub = substrate or Substrate.compose(*(a.substrate for a in attrs))
        if label is None and all(a.label for a in attrs):
            label = "(" + ",".join(a.label for a in attrs) + ")"
        src = ("product", tuple(attrs))
        if not sub.is_quantum:
            def flat(a, x):
                return x if a.substrate.is_composite else (x,)
            labels = [sum((flat(a, x) for a, x in zip(attrs, combo)), ())
                      for combo in itertools.product(*(sorted(a._states, key=repr) for a in attrs))]
            if len(sub.atoms) == 1:
                labels = [x[0] for x in labels]
            return cls(sub, states=labels, label=label, source=src)
        pieces = []
        for combo in itertools.product(*(a._pieces for a in attrs)):
            offset, factors = 0, []
            for a, p in zip(attrs, combo):
                factors.extend(Factor(f.start + offset, f.stop + offset, f.basis) for f in p)
                offset += len(a.substrate.atoms)
            pieces.append(tuple(factors))
        return cls(sub, pieces=pieces, label=label, source=src)

    @classmethod
    def union(cls, *attrs: "Attribute", label: str | None = None) -> "Attribute":
        sub = attrs[0].substrate
        for a in attrs:
            if not a.substrate.same_shape(sub):
                raise DimensionMismatch("union of attributes on different substrates")
        src = ("union", tuple(attrs))
        if not sub.is_quantum:
            return cls(sub, states=frozenset().union(*(a._states for a in attrs)), label=label,
                       source=src)
        pieces: list = []
        for a in attrs:
            for p in a._pieces:
                if not any(_piece_key(p) == _piece_key(q) for q in pieces):
                    pieces.append(p)
        return cls(sub, pieces=pieces, label=label, source=src)

    # -- basic properties
    @property
    def is_quantum(self) -> bool:
        return self.substrate.is_quantum

    @property
    def state_set(self) -> frozenset:
        if self._states is None:
            raise KindMismatch("quantum attributes have no finite state set")
        return self._states

    @property
    def pieces(self) -> tuple:
        if self._pieces is None:
            raise KindMismatch("classical attributes have no pieces")
        return self._pieces

    @property
    def is_empty(self) -> bool:
        return not (self._pieces if self.is_quantum else self._states)

    @property
    def is_ray(self) -> bool:
        return self.is_quantum and len(self._pieces) == 1 and piece_is_ray(self._pieces[0])

    def ray(self) -> np.ndarray:
        if not self.is_ray:
            raise ValueError(f"{self!r} is not a single ray")
        return piece_dense(self._pieces[0])[:, 0]

    def span(self) -> np.ndarray:
        """Orthonormal basis of the linear span of every state in the attribute."""
        if not self.is_quantum:
            raise KindMismatch("span is defined for quantum attributes")
        if not self._pieces:
            return np.zeros((self.substrate.size, 0), dtype=np.complex128)
        return la.orthonormalize(np.hstack([piece_dense(p) for p in self._pieces]))

    def expand_rays(self) -> list[Piece]:
        """Spanning rays of every piece, kept in factored form."""
        out = []
        for p in self.pieces:
            cols = [[Factor(f.start, f.stop, f.basis[:, [k]]) for k in range(f.basis.shape[1])]
                    for f in p]
            out.extend(tuple(c) for c in itertools.product(*cols))
        return out

    def fingerprint(self) -> str:
        if self._fp is None:
            h = hashlib.sha256(repr(self.substrate.dims).encode() + self.substrate.kind.encode())
            if self.is_quantum:
                for k in sorted(_piece_key(p) for p in self._pieces):
                    h.update(k)
            else:
                h.update(repr(sorted(self._states, key=repr)).encode())
            self._fp = h.hexdigest()
        return self._fp

    def rehome(self, substrate: Substrate) -> "Attribute":
        """The same set of states on another substrate of identical shape."""
        if not substrate.same_shape(self.substrate):
            raise DimensionMismatch(f"{substrate!r} does not match {self.substrate!r}")
        if self.is_quantum:
            return Attribute(substrate, pieces=self._pieces, label=self.label, source=self._source)
        return Attribute(substrate, states=self._states, label=self.label, source=self._source)

    def with_label(self, label: str) -> "Attribute":
        a = self.rehome(self.substrate)
        a.label = label
        return a

    # -- set relations
    def _check_same(self, other: "Attribute"):
        if not self.substrate.same_shape(other.substrate):
            raise DimensionMismatch(f"{self!r} and {other!r} live on different substrates")

    def contains_state(self, state: State) -> bool:
        if self.is_quantum:
            return self.contains_ray(state.payload)
        return state.payload in self._states

    def contains_ray(self, vec) -> bool:
        v = la.normalize(la.as_vector(vec, self.substrate.size))
        return any(_ray_in_piece(v, p, self.substrate.dims) for p in self._pieces)

    def issubset(self, other: "Attribute") -> bool:
        self._check_same(other)
        if not self.is_quantum:
            return self._states <= other._states
        dims = self.substrate.dims
        return all(any(_piece_contains(q, p, dims) for q in other._pieces) for p in self._pieces)

    def isdisjoint(self, other: "Attribute") -> bool:
        self._check_same(other)
        if not self.is_quantum:
            return self._states.isdisjoint(other._states)
        dims = self.substrate.dims
        return all(_piece_disjoint(p, q, dims) for p in self._pieces for q in other._pieces)

    def same_as(self, other: "Attribute") -> bool:
        if self is other:
            return True
        if not self.substrate.same_shape(other.substrate):
            return False
        if self.fingerprint() == other.fingerprint():
            return True
        return self.issubset(other) and other.issubset(self)

    def __repr__(self):
        name = self.label or "?"
        if self.is_quantum:
            return f"Attribute({name} on {self.substrate.name}, {len(self._pieces)} piece(s))"
        return f"Attribute({name} on {self.substrate.name}, {sorted(self._states, key=repr)})"


def overlap(a: Attribute, b: Attribute) -> float:
    """Largest |<u|v>| over states u in a and v in b (quantum only)."""
    if not a.pieces or not b.pieces:
        return 0.0
    return max(piece_bound(p, q) for p in a.pieces for q in b.pieces)


# --------------------------------------------------------------------------- variables


@dataclass(frozen=True, eq=False)
class Variable:
    """A set of pairwise-disjoint attributes of one substrate."""

    attributes: tuple[Attribute, ...]
    labels: tuple[str, ...] | None = None
    name: str | None = None

    def __post_init__(self):
        attrs = tuple(self.attributes)
        object.__setattr__(self, "attributes", attrs)
        if not attrs:
            raise ValidationError("Nonempty", "a variable needs at least one attribute")
        sub = attrs[0].substrate
        for a in attrs[1:]:
            if not a.substrate.same_shape(sub):
                raise ValidationError("Substrate", "variable attributes must share a substrate")
        for i, j in itertools.combinations(range(len(attrs)), 2):
            if not attrs[i].isdisjoint(attrs[j]):
                raise ValidationError(
                    "Disjoint", f"attributes {attrs[i]!r} and {attrs[j]!r} overlap")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(attrs):
                raise ValidationError("Labels", "one output label per attribute is required")
            object.__setattr__(self, "labels", labels)

    @property
    def substrate(self) -> Substrate:
        return self.attributes[0].substrate

    def __len__(self):
        return len(self.attributes)

    def __iter__(self):
        return iter(self.attributes)

    def __getitem__(self, i):
        return self.attributes[i]

    def label_of(self, i: int) -> str:
        if self.labels is not None:
            return self.labels[i]
        return self.attributes[i].label or str(i)

    def union(self) -> Attribute:
        return Attribute.union(*self.attributes, label="U" + (self.name or ""))

    def __repr__(self):
        return f"Variable({self.name or ''}[{', '.join(self.label_of(i) for i in range(len(self)))}])"


@dataclass(frozen=True)
class Permutation:
    """A bijection on ``range(n)``; ``mapping[i]`` is the image of ``i``."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(i) for i in self.mapping)
        if sorted(m) != list(range(len(m))):
            raise ValidationError("Bijection", f"{m} is not a permutation")
        object.__setattr__(self, "mapping", m)

    def __call__(self, i: int) -> int:
        return self.mapping[i]

    def __len__(self):
        return len(self.mapping)

    @property
    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.mapping))

    @property
    def is_fixed_point_free(self) -> bool:
        return all(i != j for i, j in enumerate(self.mapping))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def cycle(cls, n: int) -> "Permutation":
        return cls(tuple((i + 1) % n for i in range(n)))

    @classmethod
    def transposition(cls, n: int, i: int, j: int) -> "Permutation":
        m = list(range(n))
        m[i], m[j] = m[j], m[i]
        return cls(tuple(m))

    @classmethod
    def all(cls, n: int):
        return (cls(p) for p in itertools.permutations(range(n)))

    def compose(self, other: "Permutation") -> "Permutation":
        """``self`` after ``other``."""
        return Permutation(tuple(self.mapping[other.mapping[i]] for i in range(len(self))))


# --------------------------------------------------------------------------- tasks


@dataclass(frozen=True, eq=False)
class Task:
    """A finite set of ``input -> output`` attribute pairs.

    Distinct inputs must be disjoint.  An input may appear in several pairs;
    a constructor must then deliver an output satisfying every one of them.
    ``tag`` is free-form metadata (``"cloning"``, ``"ensemble-distinguish"``)
    that oracles use only to name certificates and recognize task families.
    """

    pairs: tuple[tuple[Attribute, Attribute], ...]
    tag: str | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pairs = tuple((a, b) for a, b in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if not pairs:
            return
        sin, sout = pairs[0][0].substrate, pairs[0][1].substrate
        for a, b in pairs:
            if not a.substrate.same_shape(sin) or not b.substrate.same_shape(sout):
                raise DimensionMismatch("all inputs (and all outputs) must share one substrate")
            if a.is_quantum != b.is_quantum:
                raise KindMismatch("task mixes classical and quantum attributes")
        groups = _group(p[0] for p in pairs)
        for i, j in itertools.combinations(range(len(groups)), 2):
            if not groups[i].isdisjoint(groups[j]):
                raise ValidationError(
                    "Disjoint", f"task inputs {groups[i]!r} and {groups[j]!r} overlap")

    @property
    def inputs(self) -> list[Attribute]:
        return _group(p[0] for p in self.pairs)

    @property
    def outputs(self) -> list[Attribute]:
        return _group(p[1] for p in self.pairs)

    @property
    def in_substrate(self) -> Substrate:
        return self.pairs[0][0].substrate

    @property
    def out_substrate(self) -> Substrate:
        return self.pairs[0][1].substrate

    @property
    def is_quantum(self) -> bool:
        return bool(self.pairs) and self.pairs[0][0].is_quantum

    def fingerprint(self) -> str:
        h = hashlib.sha256((self.tag or "").encode())
        for a, b in self.pairs:
            h.update(a.fingerprint().encode())
            h.update(b.fingerprint().encode())
        return h.hexdigest()

    def union(self, other: "Task", tag: str | None = None) -> "Task":
        return Task(self.pairs + other.pairs, tag=tag)

    def __len__(self):
        return len(self.pairs)

    def __repr__(self):
        body = ", ".join(f"{a.label or '?'}->{b.label or '?'}" for a, b in self.pairs)
        return f"Task({{{body}}})"


def _group(attrs: Iterable[Attribute]) -> list[Attribute]:
    out: list[Attribute] = []
    for a in attrs:
        if not any(a.same_as(b) for b in out):
            out.append(a)
    return out


def transpose(task: Task) -> Task:
    """``{y_i -> x_i}`` for ``{x_i -> y_i}``."""
    pairs = task.pairs
    for (x1, y1), (x2, y2) in itertools.combinations(pairs, 2):
        if y1.same_as(y2) and x1.same_as(x2):
            continue
        if not y1.isdisjoint(y2):
            raise OverlappingOutputs(f"outputs {y1!r} and {y2!r} are not disjoint")
    return Task(tuple((y, x) for x, y in pairs), tag=task.tag)


def _check_distinct(a: Substrate, b: Substrate):
    shared = {x.name for x in a.atoms} & {x.name for x in b.atoms}
    if shared:
        raise SharedSubstrate(f"substrates share components {sorted(shared)}")


def parallel_compose(a: Task, b: Task) -> Task:
    """``a (x) b`` on the composite of the two tasks' substrates."""
    _check_distinct(a.in_substrate, b.in_substrate)
    _check_distinct(a.out_substrate, b.out_substrate)
    sin = Substrate.compose(a.in_substrate, b.in_substrate)
    sout = Substrate.compose(a.out_substrate, b.out_substrate)
    pairs = tuple(
        (Attribute.product(x, z, substrate=sin), Attribute.product(y, w, substrate=sout))
        for (x, y) in a.pairs for (z, w) in b.pairs)
    return Task(pairs)


def serial_compose(b: Task, a: Task) -> Task:
    """``b a``: perform ``a`` then ``b``.  Requires ``Out(a) = In(b)``."""
    outs, ins = a.outputs, b.inputs
    if len(outs) != len(ins) or not all(any(o.same_as(i) for i in ins) for o in outs):
        raise InterfaceMismatch("Out(a) differs from In(b)")
    pairs = []
    for x, y in a.pairs:
        for y2, z in b.pairs:
            if y.same_as(y2):
                pairs.append((x, z))
    return Task(tuple(pairs))


def product_variable(s1: Variable, s2: Variable) -> Variable:
    """``S1 x S2`` on the composite of the two variables' substrates."""
    _check_distinct(s1.substrate, s2.substrate)
    sub = Substrate.compose(s1.substrate, s2.substrate)
    attrs, labels = [], []
    for i, x in enumerate(s1):
        for j, y in enumerate(s2):
            attrs.append(Attribute.product(x, y, substrate=sub))
            labels.append(f"({s1.label_of(i)},{s2.label_of(j)})")
    return Variable(tuple(attrs), tuple(labels))


def coarsen(x: Variable, partition: Sequence[Sequence[int]]) -> Variable:
    """Variable whose attributes are unions of the grouped attributes of ``x``."""
    flat = [i for g in partition for i in g]
    if sorted(flat) != list(range(len(x))) or any(len(g) == 0 for g in partition):
        raise BadPartition(f"{partition!r} is not a partition of range({len(x)})")
    attrs, labels = [], []
    for g in partition:
        attrs.append(x[g[0]] if len(g) == 1 else Attribute.union(*(x[i] for i in g)))
        labels.append("|".join(x.label_of(i) for i in g))
    return Variable(tuple(attrs), tuple(labels))


def is_sharp(state: State, v: Variable) -> int | None:
    """Index of the attribute of ``v`` the state lies in, or ``None``."""
    if not state.substrate.same_shape(v.substrate):
        raise DimensionMismatch("state and variable live on different substrates")
    hits = [i for i, a in enumerate(v) if a.contains_state(state)]
    return hits[0] if hits else None


# --------------------------------------------------------------------------- networks


@dataclass(frozen=True)
class Node:
    """A task whose input and output substrates are split into named slots."""

    name: str
    task: Task
    in_slots: tuple[Substrate, ...] = ()
    out_slots: tuple[Substrate, ...] = ()

    def __post_init__(self):
        if not self.in_slots:
            object.__setattr__(self, "in_slots", (self.task.in_substrate,))
        if not self.out_slots:
            object.__setattr__(self, "out_slots", (self.task.out_substrate,))
        for slots, sub in ((self.in_slots, self.task.in_substrate),
                           (self.out_slots, self.task.out_substrate)):
            dims = tuple(d for s in slots for d in s.dims)
            if dims != sub.dims:
                raise DimensionMismatch(f"node {self.name}: slots do not tile {sub!r}")


@dataclass(frozen=True)
class Edge:
    src: str
    src_slot: int
    dst: str
    dst_slot: int


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...] = ()

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)


def _slot_ranges(slots: Sequence[Substrate]) -> list[tuple[int, int]]:
    out, start = [], 0
    for s in slots:
        out.append((start, start + len(s.atoms)))
        start += len(s.atoms)
    return out


def split_attribute(attr: Attribute, slots: Sequence[Substrate]) -> list[Attribute]:
    """Write a product attribute as one factor attribute per slot."""
    if len(slots) == 1:
        return [attr.rehome(slots[0])]
    ranges = _slot_ranges(slots)
    if not attr.is_quantum:
        labels = [x if isinstance(x, tuple) else (x,) for x in attr.state_set]
        proj = []
        for (lo, hi), s in zip(ranges, slots):
            vals = {x[lo:hi] if hi - lo > 1 else x[lo] for x in labels}
            proj.append(Attribute.states(s, vals))
        if prod(len(p.state_set) for p in proj) != len(labels):
            raise InterfaceMismatch(f"{attr!r} is not a product across node slots")
        return proj
    if len(attr.pieces) != 1:
        raise InterfaceMismatch(f"{attr!r} is a union and cannot be split across slots")
    piece = attr.pieces[0]
    need = frozenset(hi for _, hi in ranges[:-1])
    have = _cuts(piece)
    if not need <= have:
        if piece_is_ray(piece):
            vec = piece_dense(piece)[:, 0]
            parts = la.split_product(vec, [prod(s.dims) for s in slots])
            if parts is None:
                raise InterfaceMismatch(f"{attr!r} is entangled across node slots")
            return [Attribute.rays(s, [v]) for s, v in zip(slots, parts)]
        raise InterfaceMismatch(f"{attr!r} does not factor across node slots")
    out = []
    for (lo, hi), s in zip(ranges, slots):
        fs = [f for f in piece if lo <= f.start and f.stop <= hi]
        sub_piece = tuple(Factor(f.start - lo, f.stop - lo, f.basis) for f in fs)
        out.append(Attribute(s, pieces=[sub_piece]))
    return out


def validate_network(n: Network) -> Task:
    """Check that ``n`` is a regular network and flatten it into one task.

    The flattened task maps the product of the source-line attributes to the
    product of the sink-line attributes, following every consistent run of
    node pairs in topological order.
    """
    names = [x.name for x in n.nodes]
    if len(set(names)) != len(names):
        raise InterfaceMismatch("duplicate node names")
    deps: dict[str, set] = {x: set() for x in names}
    fed, used = {}, set()
    for e in n.edges:
        if e.src not in deps or e.dst not in deps:
            raise InterfaceMismatch(f"edge {e} references an unknown node", e)
        if e.src == e.dst:
            raise CycleDetected(f"node {e.src} feeds itself: a substrate on a loop is a constructor")
        if (e.dst, e.dst_slot) in fed or (e.src, e.src_slot) in used:
            raise InterfaceMismatch(f"slot connected twice at {e}", e)
        fed[(e.dst, e.dst_slot)] = e
        used.add((e.src, e.src_slot))
        deps[e.dst].add(e.src)
    try:
        order = list(graphlib.TopologicalSorter(deps).static_order())
    except graphlib.CycleError as exc:
        raise CycleDetected(f"network has a loop through {exc.args[1]}") from None

    splits = {x.name: [(split_attribute(a, x.in_slots), split_attribute(b, x.out_slots))
                       for a, b in x.task.pairs] for x in n.nodes}
    for e in n.edges:
        src, dst = n.node(e.src), n.node(e.dst)
        if not src.out_slots[e.src_slot].same_shape(dst.in_slots[e.dst_slot]):
            raise InterfaceMismatch(f"substrate mismatch on edge {e}", e)
        ups = [outs[e.src_slot] for _, outs in splits[e.src]]
        downs = [ins[e.dst_slot] for ins, _ in splits[e.dst]]
        for u in ups:
            if not any(u.issubset(d) for d in downs):
                raise InterfaceMismatch(
                    f"output {u!r} of {e.src} is not a legitimate input of {e.dst}", e)

    sources = [(x.name, i) for x in n.nodes for i in range(len(x.in_slots)) if (x.name, i) not in fed]
    sinks = [(x.name, i) for x in n.nodes for i in range(len(x.out_slots)) if (x.name, i) not in used]
    runs: list[tuple[dict, dict]] = [({}, {})]  # (source assignment, live out-slot values)
    for name in order:
        nxt = []
        for src_vals, live in runs:
            matched = False
            for ins, outs in splits[name]:
                ok, new_src = True, dict(src_vals)
                for s, a in enumerate(ins):
                    e = fed.get((name, s))
                    if e is None:
                        new_src[(name, s)] = a
                    elif not live[(e.src, e.src_slot)].issubset(a):
                        ok = False
                        break
                if ok:
                    matched = True
                    new_live = dict(live)
                    new_live.update({(name, s): b for s, b in enumerate(outs)})
                    nxt.append((new_src, new_live))
            if not matched:
                raise InterfaceMismatch(f"a run reaching node {name} matches none of its pairs")
        runs = nxt

    def slot_sub(key, inbound):
        node = n.node(key[0])
        return (node.in_slots if inbound else node.out_slots)[key[1]]

    sin = Substrate.compose(*(slot_sub(k, True) for k in sources))
    sout = Substrate.compose(*(slot_sub(k, False) for k in sinks))
    pairs = []
    for src_vals, live in runs:
        x = Attribute.product(*(src_vals[k] for k in sources), substrate=sin)
        y = Attribute.product(*(live[k] for k in sinks), substrate=sout)
        if not any(x.same_as(p) and y.same_as(q) for p, q in pairs):
            pairs.append((x, y))
    return Task(tuple(pairs), meta={"sources": sources, "sinks": sinks})
