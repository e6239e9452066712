"""Superinformation media and the theorems that follow from them.

Each ``verify_*`` function builds the relevant task, asks the oracle, and
raises :class:`TheoremViolation` if the oracle contradicts the theorem on a
genuine superinformation witness.  Contrast cases (classical models) simply
return their verdicts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _linalg as la
from .core import (
    Attribute,
    Edge,
    Network,
    Node,
    Permutation,
    Substrate,
    Task,
    Variable,
    transpose,
    validate_network,
)
from .errors import (
    KindMismatch,
    NoFixedPointFreePermutation,
    PreconditionFailed,
    TheoremViolation,
)
from .info import (
    bar_bar,
    cloning_verdict,
    distinguishing_task,
    is_computation_variable,
    is_information_variable,
    is_maximal,
    is_observable,
    non_perturbing_spec,
    measurement_task,
    perp,
    pointer_attributes,
    pointer_medium,
    verdict_bool,
)
from .oracles import (
    DEFAULT_CONFIG,
    IMPOSSIBLE,
    POSSIBLE,
    Certificate,
    OracleConfig,
    Verdict,
    classical_possible,
    limit_verdict,
    possible_with_side_effects,
    quantum_possible,
    unitary_from_witness,
)


@dataclass
class SuperinfoWitness:
    medium: Substrate
    x_var: Variable
    y_var: Variable
    union_failure: dict
    pair: tuple[Attribute, Attribute]
    overlap: float | None = None


@dataclass
class SuperinfoScan:
    witness: SuperinfoWitness | None
    observables: list[str]
    pairs_checked: int
    undecided: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.undecided


def _attr_overlap(x: Attribute, y: Attribute) -> float | None:
    if not x.is_quantum:
        return None
    from .core import overlap
    return overlap(x, y)


def _union_failure(attrs: list[Attribute], preparables, config) -> dict | None:
    comp = is_computation_variable(attrs, config)
    if comp is False:
        return {"check": "computation"}
    v = cloning_verdict(attrs, preparables, config)
    if v.impossible:
        return {"check": "clonable", "certificate": v.certificate.name}
    if comp is None or v.unknown:
        return {"check": "undecided"}
    return None


def scan_superinformation(candidates: Sequence[Variable], preparables=None,
                          config: OracleConfig | None = None) -> SuperinfoScan:
    """Look for two information observables with disjoint attributes whose union is not one."""
    observables, undecided = [], []
    for v in candidates:
        info = is_information_variable(v, preparables, config)
        obs = is_observable(v, config) if info else info
        if info is None or obs is None:
            undecided.append(v.name or repr(v))
        elif info and obs:
            observables.append(v)
    checked = 0
    for X, Y in itertools.combinations(observables, 2):
        if not X.substrate.same_shape(Y.substrate):
            continue
        if not all(x.isdisjoint(y) for x in X for y in Y):
            continue
        checked += 1
        failure = _union_failure(list(X) + list(Y), preparables, config)
        if failure is None:
            continue
        if failure["check"] == "undecided":
            undecided.append(f"{X.name}|{Y.name}")
            continue
        x, y = find_indistinguishable_pair(X, Y, config)
        w = SuperinfoWitness(X.substrate, X, Y, failure, (x, y), _attr_overlap(x, y))
        return SuperinfoScan(w, [o.name or repr(o) for o in observables], checked, undecided)
    return SuperinfoScan(None, [o.name or repr(o) for o in observables], checked, undecided)


def detect_superinformation(candidates: Sequence[Variable], preparables=None,
                            config: OracleConfig | None = None) -> SuperinfoWitness | None:
    return scan_superinformation(candidates, preparables, config).witness


def find_indistinguishable_pair(x_var: Variable, y_var: Variable,
                                config: OracleConfig | None = None) -> tuple[Attribute, Attribute]:
    for x in x_var:
        for y in y_var:
            if not x.isdisjoint(y):
                raise PreconditionFailed(f"{x!r} and {y!r} are not disjoint")
    for x in x_var:
        for y in y_var:
            if perp(x, y, config) is False:
                return x, y
    raise TheoremViolation("no indistinguishable pair between the two observables")


def _xy(w_or_x, y_var):
    if isinstance(w_or_x, SuperinfoWitness):
        return w_or_x.x_var, w_or_x.y_var, True
    return w_or_x, y_var, False


# --------------------------------------------------------------------------- sharpness, cloning, complementarity


def verify_undetectable_sharpness(w_or_x, y_var: Variable | None = None,
                                  config: OracleConfig | None = None) -> Verdict:
    """Whether X or Y is sharp cannot be measured; with ensembles it can."""
    X, Y, strict = _xy(w_or_x, y_var)
    kind = X.substrate.kind
    medium = pointer_medium(2, kind, name="sharpness")
    p_x, p_y = pointer_attributes(medium, ["X-sharp", "Y-sharp"])
    task = Task(tuple((a, p_x) for a in X) + tuple((a, p_y) for a in Y), tag="sharpness")
    v = possible_with_side_effects(task, config)
    if strict:
        if v.possible:
            raise TheoremViolation("sharpness of X versus Y was measurable", v)
        x, y = w_or_x.pair
        v.detail["ensemble"] = ensemble_distinguishable(x, y, config)
    return v


def verify_no_cloning(w_or_x, y_var: Variable | None = None, preparables=None,
                      config: OracleConfig | None = None) -> Verdict:
    X, Y, strict = _xy(w_or_x, y_var)
    v = cloning_verdict(list(X) + list(Y or ()), preparables, config)
    if strict and v.possible:
        raise TheoremViolation("the union of the two observables was clonable", v)
    return v


def joint_measurement_task(X: Variable, Y: Variable) -> Task:
    """One constructor reporting sharp values of both X and Y.

    When X and Y share states (classical refinements) the inputs are the
    nonempty cells ``x & y``; otherwise every attribute of ``X u Y`` must be
    sent to a sharp pair of labels.
    """
    kind = X.substrate.kind
    px, py = pointer_medium(len(X), kind, "PX"), pointer_medium(len(Y), kind, "PY")
    both = Substrate.compose(px, py)
    ptr_x = pointer_attributes(px, [X.label_of(i) for i in range(len(X))])
    ptr_y = pointer_attributes(py, [Y.label_of(j) for j in range(len(Y))])
    pairs = []
    if not X.substrate.is_quantum:
        for i, x in enumerate(X):
            for j, y in enumerate(Y):
                cell = x.state_set & y.state_set
                if cell:
                    pairs.append((Attribute.states(X.substrate, cell),
                                  Attribute.product(ptr_x[i], ptr_y[j], substrate=both)))
        if pairs:
            return Task(tuple(pairs), tag="joint-measurement")
    any_x, any_y = Attribute.union(*ptr_x), Attribute.union(*ptr_y)
    for i, x in enumerate(X):
        pairs.append((x, Attribute.product(ptr_x[i], any_y, substrate=both)))
    for j, y in enumerate(Y):
        pairs.append((y, Attribute.product(any_x, ptr_y[j], substrate=both)))
    return Task(tuple(pairs), tag="joint-measurement")


def verify_complementarity(w_or_x, y_var: Variable | None = None,
                           config: OracleConfig | None = None) -> Verdict:
    """No state makes X and Y both sharp, and no constructor measures both."""
    X, Y, strict = _xy(w_or_x, y_var)
    if X.substrate.is_quantum:
        empty = all(x.isdisjoint(y) for x in X for y in Y)
    else:
        empty = all(not (x.state_set & y.state_set) for x in X for y in Y)
    v = possible_with_side_effects(joint_measurement_task(X, Y), config)
    v.detail["intersections_empty"] = empty
    if strict and (not empty or v.possible):
        raise TheoremViolation("X and Y were jointly sharp or jointly measurable", v)
    return v


# --------------------------------------------------------------------------- unpredictability and perturbation


@dataclass
class UnpredictabilityCertificate:
    x_var: Variable
    y: Attribute
    chi_y: Attribute
    x_y: Variable
    containment: bool
    containment_residual: float
    size: int
    no_sharp_prediction: bool
    overlaps: list[float]

    def recheck(self) -> bool:
        return (self.size >= 2 and self.y.issubset(bar_bar(self.chi_y))
                and all(not self.y.issubset(x) for x in self.x_y))


def _non_perp(x_var: Variable, y: Attribute, config) -> list[int]:
    out = []
    for i, x in enumerate(x_var):
        r = perp(x, y, config)
        if r is None:
            raise PreconditionFailed(f"could not decide whether {x!r} is distinguishable from y")
        if r is False:
            out.append(i)
    return out


def unpredictability_certificate(x_var: Variable, y: Attribute,
                                 config: OracleConfig | None = None) -> UnpredictabilityCertificate:
    if not is_maximal(x_var):
        raise PreconditionFailed("X must be maximal")
    if not all(y.isdisjoint(x) for x in x_var):
        raise PreconditionFailed("y must be disjoint from every attribute of X")
    idx = _non_perp(x_var, y, config)
    if len(idx) < 2:
        raise TheoremViolation(f"only {len(idx)} attribute(s) of X are not distinguishable from y")
    x_y = Variable(tuple(x_var[i] for i in idx), tuple(x_var.label_of(i) for i in idx), name="X_y")
    chi = Attribute.union(*x_y.attributes, label="chi_y")
    closure = bar_bar(chi)
    contained = y.issubset(closure)
    resid = 0.0
    overlaps = []
    if y.is_quantum:
        span, ys = closure.span(), y.span()
        resid = float(np.max(np.abs(ys - span @ (span.conj().T @ ys)))) if ys.size else 0.0
        from .core import overlap
        overlaps = [float(overlap(x, y)) for x in x_y]
    if not contained:
        raise TheoremViolation("y is not contained in the closure of chi_y")
    no_pred = all(not y.issubset(x) for x in x_y)
    if not no_pred:
        raise TheoremViolation("some value of X is predictable on y")
    return UnpredictabilityCertificate(x_var, y, chi, x_y, contained, resid, len(idx), no_pred,
                                       overlaps)


def perturbation_task(x_y: Variable, y: Attribute, x0: Attribute | None = None,
                      medium: Substrate | None = None,
                      config: OracleConfig | None = None) -> tuple[Task, Verdict]:
    """Measure X_y without disturbing it, and leave y undisturbed, in one constructor.

    The record left for input ``y`` is unconstrained (``k`` ranges over the
    whole output medium), so an ``Impossible`` verdict covers every ``k``.
    """
    if len(x_y) < 2:
        raise PreconditionFailed("X_y needs at least two attributes")
    spec = non_perturbing_spec(x_y, medium)
    medium = spec.output_medium
    x0 = x0 or spec.receptive
    both = Substrate.compose(x_y.substrate, medium)
    pairs = [(Attribute.product(x, x0, substrate=both), Attribute.product(x, p, substrate=both))
             for x, p in zip(x_y, spec.output_variable)]
    k = Attribute.full(medium, label="k")
    pairs.append((Attribute.product(y, x0, substrate=both), Attribute.product(y, k, substrate=both)))
    task = Task(tuple(pairs), tag="perturbation")
    v = possible_with_side_effects(task, config)
    if v.possible and y.is_quantum and all(perp(x, y, config) is False for x in x_y):
        raise TheoremViolation("measured X_y without perturbing y", v)
    return task, v


# --------------------------------------------------------------------------- consecutive measurements


@dataclass
class ConsecutiveMeasurement:
    network: Network
    flattened: Task
    x_y_labels: list[str]
    permutation: Permutation
    r_true_probability: float
    r_deviation: float
    record_sharp: dict
    verdict: Verdict


def _basis_rays(x_var: Variable) -> np.ndarray:
    if not all(a.is_ray for a in x_var) or len(x_var) != x_var.substrate.size:
        raise PreconditionFailed("X must be a complete basis of single rays")
    u = np.stack([a.ray() for a in x_var], axis=1)
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))) > 1e-9:
        raise PreconditionFailed("X must be orthonormal")
    return u


def _copy_unitary(u: np.ndarray, d: int) -> np.ndarray:
    """|u_i>|m> -> |u_i>|m + i mod d> on S (x) M."""
    shift = np.zeros((d * d, d * d), dtype=np.complex128)
    for i in range(d):
        for m in range(d):
            shift[i * d + (m + i) % d, i * d + m] = 1.0
    basis = np.kron(u, np.eye(d))
    return basis @ shift @ basis.conj().T


def _label_network(x_var, perm, d, medium_m, medium_mp, medium_r):
    labels = [x_var.label_of(i) for i in range(len(x_var))]
    spec1 = non_perturbing_spec(x_var, medium_m)
    spec2 = non_perturbing_spec(x_var, medium_mp)
    t1, t2 = measurement_task(spec1), measurement_task(spec2)
    ptr_mp = list(spec2.output_variable)
    computer = Task(tuple((ptr_mp[i], ptr_mp[perm(i)]) for i in range(d)), tag="computation")
    ptr_m = list(spec1.output_variable)
    r_false, r_true = pointer_attributes(medium_r, ["false", "true"])
    cmp_sub = Substrate.compose(medium_m, medium_mp, medium_r)
    cmp_pairs = []
    for i in range(d):
        for j in range(d):
            out = r_true if i == j else r_false
            cmp_pairs.append((Attribute.product(ptr_m[i], ptr_mp[j], r_false, substrate=cmp_sub),
                              Attribute.product(ptr_m[i], ptr_mp[j], out, substrate=cmp_sub)))
    comparator = Task(tuple(cmp_pairs), tag="comparator")
    S = x_var.substrate
    nodes = (
        Node("measure-1", t1, (S, medium_m), (S, medium_m)),
        Node("measure-2", t2, (S, medium_mp), (S, medium_mp)),
        Node("permute", computer, (medium_mp,), (medium_mp,)),
        Node("compare", comparator, (medium_m, medium_mp, medium_r), (medium_m, medium_mp, medium_r)),
    )
    edges = (
        Edge("measure-1", 0, "measure-2", 0),
        Edge("measure-2", 1, "permute", 0),
        Edge("measure-1", 1, "compare", 0),
        Edge("permute", 0, "compare", 1),
    )
    return Network(nodes, edges), labels


def consecutive_measurement_network(x_var: Variable, y: Attribute,
                                    config: OracleConfig | None = None,
                                    tau_sharp: float = 1e-9,
                                    allow_fixed_points: bool = False) -> ConsecutiveMeasurement:
    """Two non-perturbing measurements of X, a relabelling and an equality test.

    On input ``y`` the equality flag comes out sharp 'true' although neither
    record is sharp.  The relabelling is the identity on the values not
    distinguishable from ``y`` and a cyclic shift on the rest.  With a single
    remaining value no fixed-point-free shift exists; that raises unless
    ``allow_fixed_points`` is set, in which case the value is left fixed.
    """
    if not x_var.substrate.is_quantum:
        raise KindMismatch("the consecutive-measurement simulation needs a quantum model")
    if not y.is_ray:
        raise PreconditionFailed("y must be a single ray")
    u = _basis_rays(x_var)
    d = u.shape[0]
    idx = _non_perp(x_var, y, config)
    rest = [i for i in range(d) if i not in idx]
    sharp_input = any(y.issubset(x) for x in x_var)
    mapping = list(range(d))
    if len(rest) == 1 and not sharp_input and not allow_fixed_points:
        raise NoFixedPointFreePermutation("exactly one value of X is distinguishable from y")
    if len(rest) >= 2:
        for a, b in zip(rest, rest[1:] + rest[:1]):
            mapping[a] = b
    perm = Permutation(tuple(mapping))

    m, mp, r = (Substrate.quantum("M", d), Substrate.quantum("M'", d), Substrate.quantum("R", 2))
    network, labels = _label_network(x_var, perm, d, m, mp, r)
    flat = validate_network(network)

    # State-vector run on S (x) M (x) M' (x) R.
    psi = np.kron(y.ray(), np.eye(d * d * 2)[0])
    copy = _copy_unitary(u, d)
    u1 = np.kron(np.kron(copy, np.eye(d)), np.eye(2))
    # second copy targets M': swap roles by permuting tensor factors
    u2 = _permute_factors(np.kron(np.kron(copy, np.eye(d)), np.eye(2)), [d, d, d, 2], [0, 2, 1, 3])
    perm_m = np.zeros((d, d))
    for i in range(d):
        perm_m[perm(i), i] = 1.0
    u3 = np.kron(np.kron(np.eye(d * d), perm_m), np.eye(2))
    cmp = np.zeros((d * d * 2, d * d * 2))
    for i in range(d):
        for j in range(d):
            for b in range(2):
                nb = b ^ (1 if i == j else 0)
                cmp[(i * d + j) * 2 + nb, (i * d + j) * 2 + b] = 1.0
    u4 = np.kron(np.eye(d), cmp)
    out = u4 @ u3 @ u2 @ u1 @ psi
    dims = [d, d, d, 2]
    rho_r = la.reduced_density(out, dims, [3])
    p_true = float(np.real(rho_r[1, 1]))
    deviation = float(np.max(np.abs(rho_r - np.diag([0.0, 1.0]))))
    sharp = {}
    for name, k in (("M", 1), ("M'", 2)):
        rho = la.reduced_density(out, dims, [k])
        sharp[name] = bool(np.max(np.real(np.diag(rho))) >= 1.0 - tau_sharp
                           and np.max(np.abs(rho - np.diag(np.diag(rho)))) <= tau_sharp)
    ok = deviation < tau_sharp
    verdict = Verdict(POSSIBLE if ok else IMPOSSIBLE,
                      detail={"r_true_probability": p_true, "r_deviation": deviation,
                              "records_sharp": sharp})
    if not ok:
        verdict.certificate = Certificate("ComparatorNotSharp", {"deviation": deviation})
    result = ConsecutiveMeasurement(network, flat, [labels[i] for i in idx], perm, p_true,
                                    deviation, sharp, verdict)
    if not ok:
        raise TheoremViolation("comparator output was not sharp 'true'", verdict)
    if not sharp_input and any(sharp.values()):
        raise TheoremViolation("an individual record was sharp on a non-sharp input", verdict)
    return result


def _permute_factors(op: np.ndarray, dims: list[int], order: list[int]) -> np.ndarray:
    """Conjugate ``op`` by the tensor-factor permutation ``order`` (an involution here)."""
    n = int(np.prod(dims))
    p = np.zeros((n, n))
    for idx in itertools.product(*(range(x) for x in dims)):
        src = np.ravel_multi_index(idx, dims)
        new = tuple(idx[o] for o in order)
        dst = np.ravel_multi_index(new, [dims[o] for o in order])
        p[dst, src] = 1.0
    return p.T @ op @ p


# --------------------------------------------------------------------------- ensembles


@dataclass(frozen=True)
class EnsembleAttribute:
    """``x^(n)``: every one of ``n`` copies of the substrate has attribute ``x``."""

    base: Attribute
    copies: int | float

    def attribute(self) -> Attribute:
        if self.copies == math.inf:
            raise ValueError("the infinite ensemble has no finite attribute")
        n = int(self.copies)
        sub = self.base.substrate
        parts = [sub.renamed(f"{sub.name}#{i + 1}") for i in range(n)]
        big = Substrate.compose(*parts, name=f"{sub.name}^({n})") if n > 1 else parts[0]
        label = f"{self.base.label}^({n})" if self.base.label else None
        if n == 1:
            return self.base.rehome(big).with_label(label) if label else self.base.rehome(big)
        return Attribute.product(*(self.base.rehome(p) for p in parts), substrate=big, label=label)


def ensemble_attribute(x: Attribute, n) -> EnsembleAttribute:
    return EnsembleAttribute(x, n)


def ensemble_task(x: Attribute, y: Attribute, n: int) -> Task:
    return distinguishing_task([ensemble_attribute(x, n).attribute(),
                                ensemble_attribute(y, n).attribute()], tag="ensemble-distinguish")


def _ensemble_probe_bound(x: Attribute, y: Attribute, cfg: OracleConfig) -> int:
    if not x.is_quantum:
        return cfg.n_probe
    pieces = max(len(x.pieces), len(y.pieces), 1)
    if pieces == 1:
        return cfg.n_probe
    return max(1, min(cfg.n_probe, int(math.log(512) / math.log(pieces))))


def ensemble_distinguishable(x: Attribute, y: Attribute,
                             config: OracleConfig | None = None) -> Verdict:
    """Limit verdict on distinguishing ``x^(n)`` from ``y^(n)``."""
    if not x.isdisjoint(y):
        raise PreconditionFailed("ensemble distinguishability needs disjoint attributes")
    cfg = config or DEFAULT_CONFIG
    if not x.is_quantum:
        v = classical_possible(distinguishing_task([x, y]))
        if v.possible:
            v.detail["n"] = 1
            return v
    probe = _ensemble_probe_bound(x, y, cfg)
    return limit_verdict(lambda n: ensemble_task(x, y, n), replace(cfg, n_probe=probe),
                         tag="ensemble-distinguish")


def ensemble_residual(x: Attribute, y: Attribute, n: int,
                      config: OracleConfig | None = None) -> float:
    """Certified defect of the n-copy distinguishing task (0 when possible)."""
    v = possible_with_side_effects(ensemble_task(x, y, n), config)
    if v.possible:
        return 0.0
    if v.certificate is None or v.certificate.payload.get("defect") is None:
        raise PreconditionFailed("defect not certified")
    return float(v.certificate.payload["defect"])


# --------------------------------------------------------------------------- local inaccessibility


def coherence_verdict(c: Task, config: OracleConfig | None = None) -> Verdict:
    """Reversible implementability of ``c`` on all states of its medium."""
    if c.is_quantum:
        return quantum_possible(c, side_effects=False, config=config)
    return classical_possible(c, reversible=True)


def coherence_check(c: Task, config: OracleConfig | None = None) -> bool | None:
    return verdict_bool(coherence_verdict(c, config))


@dataclass
class LocalInaccessibility:
    unitary: np.ndarray
    psi: list[np.ndarray]
    cnot_image: np.ndarray
    psi1_matches: bool
    overlap_00: float
    overlap_11: float
    pullback_overlaps: dict
    C: Variable
    D: Variable
    C_information: bool | None
    D_information: bool | None
    C_adaptive_measurement: bool
    transpose_possible: bool | None


def _product_ray(sub, a, b):
    return Attribute.rays(sub, [np.kron(a, b)])


def verify_locally_inaccessible(a1: Variable, b1: Variable, a2: Variable,
                                config: OracleConfig | None = None) -> tuple[Verdict, LocalInaccessibility]:
    """Replay the controlled-not construction of a locally inaccessible information variable.

    ``a1 = {0, 1}`` and ``b1 = {0', 1'}`` are on the first medium, ``a2 =
    {0, 1}`` on the second; both ``0`` and ``1`` must be indistinguishable
    from ``0'``.
    """
    zero, one = a1[0], a1[1]
    zp, op = b1[0], b1[1]
    if perp(zero, zp, config) is not False or perp(one, zp, config) is not False:
        raise PreconditionFailed("0 and 1 must both be indistinguishable from 0'")
    s1, s2 = a1.substrate, a2.substrate
    s12 = Substrate.compose(s1, s2)
    r = {k: v.ray() for k, v in (("0", zero), ("1", one), ("0'", zp), ("1'", op))}
    q = {"0": a2[0].ray(), "1": a2[1].ray()}

    def pr(x, y):
        return _product_ray(s12, r[x], q[y])

    T = Task(((pr("0", "0"), pr("0", "0")), (pr("1", "0"), pr("1", "1")),
              (pr("0", "1"), pr("0", "1")), (pr("1", "1"), pr("1", "0"))), tag="cnot")
    vt = coherence_verdict(T, config)
    if not vt.possible:
        raise TheoremViolation("the controlled-not computation is not coherent", vt)
    U = unitary_from_witness(T, vt)
    inputs = [("0'", "0"), ("0'", "1"), ("1'", "0"), ("1'", "1")]
    psi = [U @ np.kron(r[a], q[b]) for a, b in inputs]
    cnot_image = U @ np.kron(r["0'"], q["0"])
    # Independent image: controlled-not written out in the declared bases.
    proj = {k: np.vdot(r[k], r["0'"]) for k in ("0", "1")}
    expected = proj["0"] * np.kron(r["0"], q["0"]) + proj["1"] * np.kron(r["1"], q["1"])
    matches = la.rays_equal(la.normalize(expected), psi[0])
    ket00, ket11 = np.kron(r["0"], q["0"]), np.kron(r["1"], q["1"])
    ov00, ov11 = abs(np.vdot(psi[0], ket00)), abs(np.vdot(psi[0], ket11))
    pull = {
        "(0',0)|(0,0)": abs(np.vdot(np.kron(r["0'"], q["0"]), U.conj().T @ ket00)),
        "(0',0)|(1,0)": abs(np.vdot(np.kron(r["0'"], q["0"]), U.conj().T @ ket11)),
        "0'|0": abs(np.vdot(r["0'"], r["0"])),
        "0'|1": abs(np.vdot(r["0'"], r["1"])),
    }
    psi_attr = [Attribute.rays(s12, [v], label=f"psi{i + 1}") for i, v in enumerate(psi)]
    C = Variable((pr("0", "1"), pr("1", "1"), pr("0'", "0"), pr("1'", "0")),
                 ("(0,1)", "(1,1)", "(0',0)", "(1',0)"), name="C")
    D = Variable((pr("0", "1"), pr("1", "0"), psi_attr[0], psi_attr[2]),
                 ("(0,1)", "(1,0)", "psi1", "psi3"), name="D")
    c_info = is_information_variable(C, config=config)
    d_info = is_information_variable(D, config=config)
    # Adaptive local measurement of C: A2 first, then A1 or B1.
    adaptive = True
    for c in C:
        f1, f2 = la.split_product(c.ray(), [s1.size, s2.size])
        hits2 = [i for i in range(2) if la.rays_equal(f2, q[str(i)])]
        if len(hits2) != 1:
            adaptive = False
            continue
        first = a1 if hits2[0] == 1 else b1
        if sum(la.rays_equal(f1, a.ray()) for a in first) != 1:
            adaptive = False
    Tp = Task(tuple((pr(a, b), psi_attr[i]) for i, (a, b) in enumerate(inputs)), tag="cnot")
    union = Task(T.pairs + Tp.pairs)
    tv = coherence_check(transpose(union), config)
    pe00 = perp(psi_attr[0], pr("0", "0"), config)
    pe11 = perp(psi_attr[0], pr("1", "1"), config)
    record = LocalInaccessibility(U, psi, cnot_image, matches, ov00, ov11, pull, C, D, c_info,
                                  d_info, adaptive, tv)
    ok = (matches and pe00 is False and pe11 is False and c_info is True and d_info is True
          and adaptive and tv is True)
    verdict = Verdict(POSSIBLE if ok else IMPOSSIBLE, witness=record,
                      detail={"overlap_00": ov00, "overlap_11": ov11})
    if not ok:
        verdict.certificate = Certificate("ConstructionFailed", {"overlap_00": ov00})
        raise TheoremViolation("the locally-inaccessible construction did not replay", verdict)
    return verdict, record
