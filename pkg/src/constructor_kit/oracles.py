"""Possibility oracles for finite classical and finite-dimensional quantum models.

The quantum oracle uses the unitary-extension (Gram) criterion.  Each input
attribute is expanded into rays ``psi_r``; a constructor exists iff one can
pick output rays ``phi_r`` inside the required output attributes and ancilla
rays ``a_r`` with

    <psi_r|psi_s> = <phi_r|phi_s> <a_r|a_s>      for all r, s.

With side effects off every ``a_r`` is the same ray.  ``Impossible`` is only
returned with an analytic certificate; a failed numerical search gives
``Unknown``.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from . import _kernels
from . import _linalg as la
from .core import Attribute, Factor, Task, _align, _cuts, _group, _merge, piece_inner
from .errors import KindMismatch

POSSIBLE = "Possible"
IMPOSSIBLE = "Impossible"
IN_LIMIT = "PossibleInLimit"
UNKNOWN = "Unknown"


@dataclass(frozen=True)
class OracleConfig:
    restarts: int = 64
    iterations: int = 500
    seed: int = 0
    n_probe: int = 24
    max_choices: int = 4096
    tau_gram: float = 1e-9
    tau_psd: float = 1e-9
    use_numba: bool | None = None


DEFAULT_CONFIG = OracleConfig()


@dataclass(frozen=True)
class Certificate:
    """A named, re-checkable reason why a task is impossible."""

    name: str
    payload: dict = field(default_factory=dict)


@dataclass
class Verdict:
    kind: str
    witness: object = None
    certificate: Certificate | None = None
    detail: dict = field(default_factory=dict)

    @property
    def possible(self) -> bool:
        return self.kind == POSSIBLE

    @property
    def impossible(self) -> bool:
        return self.kind == IMPOSSIBLE

    @property
    def unknown(self) -> bool:
        return self.kind == UNKNOWN

    def __repr__(self):
        extra = f", {self.certificate.name}" if self.certificate else ""
        return f"Verdict({self.kind}{extra})"


def possible_verdict(witness, **detail) -> Verdict:
    return Verdict(POSSIBLE, witness=witness, detail=detail)


def impossible_verdict(name: str, **payload) -> Verdict:
    return Verdict(IMPOSSIBLE, certificate=Certificate(name, payload))


def unknown_verdict(**detail) -> Verdict:
    return Verdict(UNKNOWN, detail=detail)


# --------------------------------------------------------------------------- classical


@dataclass
class ClassicalWitness:
    """A transition function on input states."""

    mapping: dict

    def validate(self, task: Task) -> bool:
        for x, y in task.pairs:
            for s in x.state_set:
                if self.mapping.get(s, _MISSING) not in y.state_set:
                    return False
        return True

    def is_injective(self) -> bool:
        return len(set(self.mapping.values())) == len(self.mapping)


_MISSING = object()


def _sorted(states):
    return sorted(states, key=repr)


def classical_possible(task: Task, reversible: bool = False) -> Verdict:
    """Decide a task on classical attributes.

    Any total function is allowed (side effects may absorb irreversibility);
    with ``reversible=True`` the function must also be injective, which is
    what a coherent (reversible) implementation needs.
    """
    if task.is_quantum:
        raise KindMismatch("classical_possible called on quantum attributes")
    groups = _group(x for x, _ in task.pairs)
    allowed = []
    for g in groups:
        outs = [y.state_set for x, y in task.pairs if x.same_as(g)]
        inter = frozenset.intersection(*outs)
        if not inter:
            return impossible_verdict("EmptyOutput", input=g.label or _sorted(g.state_set),
                                      defect=1.0)
        allowed.append((g, inter))
    if not reversible:
        mapping = {s: _sorted(inter)[0] for g, inter in allowed for s in g.state_set}
        return possible_verdict(ClassicalWitness(mapping))
    states = [s for g, _ in allowed for s in _sorted(g.state_set)]
    targets = _sorted(frozenset().union(*(inter for _, inter in allowed)))
    index = {t: j for j, t in enumerate(targets)}
    rows, cols = [], []
    i = 0
    for g, inter in allowed:
        for _ in g.state_set:
            for t in inter:
                rows.append(i)
                cols.append(index[t])
            i += 1
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(states), len(targets)))
    match = maximum_bipartite_matching(graph, perm_type="column")
    if np.any(match < 0):
        return impossible_verdict("NoInjectiveExtension", inputs=len(states),
                                  matched=int(np.sum(match >= 0)))
    return possible_verdict(ClassicalWitness({s: targets[match[i]] for i, s in enumerate(states)}),
                            reversible=True)


# --------------------------------------------------------------------------- quantum problem


@dataclass
class QuantumWitness:
    """Output rays (factored over ``cuts``) and ancilla rays, one per expanded input ray."""

    groups: list[int]
    factors: list[list[np.ndarray]]
    ancillas: np.ndarray
    spans: list[tuple[int, int]]

    def output(self, r: int) -> np.ndarray:
        return la.kron_all(self.factors[r])

    def model_gram(self) -> np.ndarray:
        n = len(self.factors)
        out = np.ones((n, n), dtype=np.complex128)
        for f in range(len(self.spans)):
            v = np.stack([self.factors[r][f] for r in range(n)])
            out *= v.conj() @ v.T
        a = self.ancillas
        return out * (a.conj() @ a.T)


@dataclass
class _Problem:
    groups: list[Attribute]
    outputs: list[list[Attribute]]
    row_group: list[int]
    rays: list
    gram: np.ndarray


def _build_problem(task: Task) -> _Problem:
    groups = _group(x for x, _ in task.pairs)
    outputs = [[y for x, y in task.pairs if x.same_as(g)] for g in groups]
    row_group, rays = [], []
    for gi, g in enumerate(groups):
        for ray in g.expand_rays():
            row_group.append(gi)
            rays.append(ray)
    n = len(rays)
    gram = np.eye(n, dtype=np.complex128)
    for r in range(n):
        for s in range(r + 1, n):
            gram[r, s] = piece_inner(rays[r], rays[s])
            gram[s, r] = np.conj(gram[r, s])
    return _Problem(groups, outputs, row_group, rays, gram)


def _intersect_basis(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    resid = a - b @ (b.conj().T @ a)
    _, s, vh = np.linalg.svd(resid, full_matrices=True)
    s = np.concatenate([s, np.zeros(a.shape[1] - s.size)])
    null = vh.conj().T[:, s <= 1e-9]
    return la.orthonormalize(a @ null)


def _intersect_pieces(p, q):
    p, q = _align(p, q)
    out = []
    for fp, fq in zip(p, q):
        basis = _intersect_basis(fp.basis, fq.basis)
        if basis.shape[1] == 0:
            return None
        out.append(Factor(fp.start, fp.stop, basis))
    return tuple(out)


def _targets(outs: list[Attribute]) -> list:
    """Candidate pieces for a group: one piece of each output attribute, intersected."""
    cands = list(outs[0].pieces)
    for y in outs[1:]:
        nxt = []
        for p in cands:
            for q in y.pieces:
                r = _intersect_pieces(p, q)
                if r is not None:
                    nxt.append(r)
        cands = nxt
    return cands


def _task_rng(task: Task, cfg: OracleConfig) -> np.random.Generator:
    digest = int(hashlib.sha256(task.fingerprint().encode()).hexdigest()[:16], 16)
    return np.random.default_rng([cfg.seed, digest])


def _bound_certificate(tag, r, s, g, bound, tau):
    if bound <= tau:
        return Certificate("ForcedOrthogonality",
                           {"rows": [r, s], "overlap": g, "bound": 0.0, "defect": g})
    if tag == "cloning":
        return Certificate("CloningGram",
                           {"rows": [r, s], "input_overlap": g, "output_overlap": bound,
                            "defect": g - bound})
    return Certificate("OverlapBound",
                       {"rows": [r, s], "overlap": g, "bound": bound, "defect": g - bound})


def _propagate(G, outs, tag, tau):
    """Bound checks plus tight-constraint forcing of subspace factors.

    ``outs[r][f]`` is an orthonormal basis; forced factors are replaced by
    rays in place.  Returns a certificate or ``None``.
    """
    n = len(outs)
    while True:
        forced: dict = {}
        for r in range(n):
            for s in range(r + 1, n):
                g = abs(G[r, s])
                if g <= tau:
                    continue
                overlaps = [la.max_overlap(a, b) for a, b in zip(outs[r], outs[s])]
                bound = float(np.prod(overlaps))
                if g > bound + tau:
                    return _bound_certificate(tag, r, s, g, bound, tau)
                if g < bound - tau:
                    continue
                for f, (a, b) in enumerate(zip(outs[r], outs[s])):
                    for (src, dst, u, sub) in ((r, s, a, b), (s, r, b, a)):
                        if u.shape[1] != 1 or sub.shape[1] == 1:
                            continue
                        ray = la.canonical_phase(la.normalize(sub @ (sub.conj().T @ u[:, 0])))
                        prev = forced.get((dst, f))
                        if prev is not None and not la.rays_equal(prev[0], ray):
                            return Certificate("UnitNormConflict", {
                                "row": dst,
                                "constraints": [
                                    {"rows": list(prev[1]), "overlap": prev[2]},
                                    {"rows": [src, dst], "overlap": g},
                                ],
                                "required_inner_product": 1.0,
                                "forced_overlap": float(abs(np.vdot(prev[0], ray))),
                            })
                        forced[(dst, f)] = (ray, (src, dst), g)
        if not forced:
            return None
        for (dst, f), (ray, _, _) in forced.items():
            outs[dst][f] = ray[:, None]


def _solve_phases(n, entries):
    """Unit phases p with conj(p_r) p_s = A_rs on the given entries, or None."""
    adj: dict = {r: [] for r in range(n)}
    for (r, s), v in entries.items():
        adj[r].append((s, v))
        adj[s].append((r, np.conj(v)))
    p = [None] * n
    comp = [-1] * n
    for root in range(n):
        if p[root] is not None:
            continue
        p[root] = 1.0 + 0j
        comp[root] = root
        stack = [root]
        while stack:
            r = stack.pop()
            for s, v in adj[r]:
                want = p[r] * v
                if p[s] is None:
                    p[s] = want / abs(want)
                    comp[s] = root
                    stack.append(s)
                elif abs(p[s] - want) > 1e-7:
                    return None, None
    return np.array(p), comp


def _fixed_rays(G, outs, side_effects, cfg):
    """All outputs are fixed rays: solve for the ancilla Gram matrix."""
    n = len(outs)
    tau = cfg.tau_gram
    vecs = [[f[:, 0] for f in row] for row in outs]
    F = np.ones((n, n), dtype=np.complex128)
    for f in range(len(outs[0]) if n else 0):
        v = np.stack([vecs[r][f] for r in range(n)])
        F *= v.conj() @ v.T
    fixed, free = {}, []
    for r in range(n):
        for s in range(r + 1, n):
            if abs(F[r, s]) <= tau:
                free.append((r, s))
            else:
                fixed[(r, s)] = G[r, s] / F[r, s]
    if not side_effects:
        for (r, s), v in fixed.items():
            if abs(abs(v) - 1.0) > 1e-7:
                return Certificate("GramMismatch", {"rows": [r, s], "overlap": abs(G[r, s]),
                                                    "output_overlap": abs(F[r, s])}), None
        p, _ = _solve_phases(n, fixed)
        if p is None:
            return Certificate("GramMismatch", {"reason": "inconsistent relative phases"}), None
        return None, QuantumWitness([], vecs, p[:, None], [])
    unimodular = {k: v / abs(v) for k, v in fixed.items() if abs(abs(v) - 1.0) <= 1e-9}
    p, comp = _solve_phases(n, unimodular)
    if p is None:
        return Certificate("AncillaNotPSD", {"reason": "inconsistent relative phases"}), None
    reps = sorted(set(comp))
    idx = {c: i for i, c in enumerate(reps)}
    m = len(reps)
    R = np.eye(m, dtype=np.complex128)
    seen = np.zeros((m, m), dtype=bool)
    for (r, s), v in fixed.items():
        i, j = idx[comp[r]], idx[comp[s]]
        val = p[r] * np.conj(p[s]) * v
        if i == j:
            if abs(val - 1.0) > 1e-7:
                return Certificate("AncillaNotPSD", {"rows": [r, s], "value": abs(v)}), None
            continue
        if seen[i, j] and abs(R[i, j] - val) > 1e-7:
            return Certificate("AncillaNotPSD", {"rows": [r, s], "reason": "conflicting forced overlaps"}), None
        R[i, j], R[j, i] = val, np.conj(val)
        seen[i, j] = seen[j, i] = True
    lam, q = np.linalg.eigh(R)
    if lam[0] < -cfg.tau_psd:
        n_free_classes = m * (m - 1) // 2 - int(np.sum(np.triu(seen, 1)))
        if n_free_classes == 0:
            return Certificate("AncillaNotPSD", {"min_eigenvalue": float(lam[0])}), None
        return None, None
    lam = np.clip(lam, 0.0, None)
    a_rep = (q * np.sqrt(lam)).conj()  # rows: ancilla rays with <a_i|a_j> = R_ij
    a_rep = a_rep / np.linalg.norm(a_rep, axis=1, keepdims=True)
    anc = np.stack([p[r] * a_rep[idx[comp[r]]] for r in range(n)])
    return None, QuantumWitness([], vecs, anc, [])


def _numeric(G, outs, side_effects, cfg, rng):
    n = len(outs)
    nf = len(outs[0])
    D = n if side_effects else 1
    ks = np.array([[b.shape[1] for b in row] + [D] for row in outs], dtype=np.int64)
    K = int(ks.max())
    nb = nf + 1
    M = np.zeros((nb, n, n, K, K), dtype=np.complex128)
    for f in range(nf):
        for r in range(n):
            for s in range(n):
                blk = outs[r][f].conj().T @ outs[s][f]
                M[f, r, s, :blk.shape[0], :blk.shape[1]] = blk
    M[nf, :, :, :D, :D] = np.eye(D)
    free = ks > 1
    free[:, nf] = True
    tol = cfg.tau_gram * 0.1
    best = np.inf
    for _ in range(cfg.restarts):
        C = np.zeros((n, nb, K), dtype=np.complex128)
        for r in range(n):
            for b in range(nb):
                k = ks[r, b]
                z = rng.standard_normal(k) + 1j * rng.standard_normal(k)
                C[r, b, :k] = z / np.linalg.norm(z) if free[r, b] else 1.0
        res, _ = _kernels.als_sweeps(G, M, ks, free, C, cfg.iterations, tol, cfg.use_numba)
        best = min(best, res)
        if res <= tol:
            vecs = [[outs[r][f] @ C[r, f, :ks[r, f]] for f in range(nf)] for r in range(n)]
            return QuantumWitness([], vecs, C[:, nf, :D].copy(), []), best
    return None, best


def quantum_possible(task: Task, side_effects: bool = True,
                     config: OracleConfig | None = None) -> Verdict:
    """Decide a quantum task by the Gram criterion.

    Discrete choices (which piece of each output union to land in) are
    enumerated; ``Impossible`` needs every choice refuted by a certificate.
    """
    cfg = config or DEFAULT_CONFIG
    if not task.is_quantum:
        raise KindMismatch("quantum_possible called on classical attributes")
    prob = _build_problem(task)
    tau = cfg.tau_gram
    per_group = []
    for gi, outs in enumerate(prob.outputs):
        cands = _targets(outs)
        if not cands:
            return impossible_verdict("EmptyOutput", input=prob.groups[gi].label or gi, defect=1.0)
        per_group.append(cands)
    total = int(np.prod([len(c) for c in per_group], dtype=float))
    rng = _task_rng(task, cfg)
    certs: list[Certificate] = []
    open_choices = 0
    best_residual = np.inf
    for combo in itertools.islice(itertools.product(*per_group), cfg.max_choices):
        pieces = [combo[g] for g in prob.row_group]
        cuts = frozenset.intersection(*(_cuts(p) for p in pieces)) if pieces else frozenset()
        merged = [_merge(p, cuts) if _cuts(p) != cuts else p for p in pieces]
        spans = [(f.start, f.stop) for f in merged[0]] if merged else []
        outs = [[f.basis for f in p] for p in merged]
        cert = _propagate(prob.gram, outs, task.tag, tau)
        if cert is None and all(b.shape[1] == 1 for row in outs for b in row):
            cert, wit = _fixed_rays(prob.gram, outs, side_effects, cfg)
            if wit is not None:
                return _finish(wit, prob, spans, total)
        if cert is None:
            wit, res = _numeric(prob.gram, outs, side_effects, cfg, rng)
            best_residual = min(best_residual, res)
            if wit is not None:
                return _finish(wit, prob, spans, total)
            open_choices += 1
            continue
        certs.append(cert)
    if open_choices == 0 and total <= cfg.max_choices:
        first = certs[0]
        payload = dict(first.payload)
        if total > 1:
            payload["choices_refuted"] = total
            payload["defect"] = min((c.payload.get("defect") or 0.0) for c in certs)
        return Verdict(IMPOSSIBLE, certificate=Certificate(first.name, payload))
    return unknown_verdict(choices=total, refuted=len(certs), open=open_choices,
                           best_residual=None if best_residual == np.inf else float(best_residual))


def _finish(wit: QuantumWitness, prob: _Problem, spans, total) -> Verdict:
    wit.groups = list(prob.row_group)
    wit.spans = spans
    return possible_verdict(wit, choices=total)


def possible_with_side_effects(task: Task, config: OracleConfig | None = None) -> Verdict:
    return possible(task, side_effects=True, config=config)


def possible(task: Task, side_effects: bool = True, config: OracleConfig | None = None) -> Verdict:
    if not task.pairs:
        return possible_verdict(ClassicalWitness({}))
    if task.is_quantum:
        return quantum_possible(task, side_effects=side_effects, config=config)
    return classical_possible(task)


def validate_witness(task: Task, verdict: Verdict, tol: float = 1e-9) -> bool:
    """Re-run the defining constraints on a Possible verdict's witness."""
    w = verdict.witness
    if verdict.kind != POSSIBLE or w is None:
        return False
    if isinstance(w, ClassicalWitness):
        return w.validate(task)
    prob = _build_problem(task)
    if len(w.factors) != len(prob.rays):
        return False
    if float(np.max(np.abs(prob.gram - w.model_gram()))) > tol:
        return False
    for r, gi in enumerate(prob.row_group):
        if task.out_substrate.size <= 1 << 14:
            vec = w.output(r)
            if not all(y.contains_ray(vec) for y in prob.outputs[gi]):
                return False
    return True


# --------------------------------------------------------------------------- limits


def _defect(v: Verdict) -> float | None:
    if v.certificate is None:
        return None
    d = v.certificate.payload.get("defect")
    return None if d is None else float(d)


def limit_verdict(task_family: Callable[[int], Task], config: OracleConfig | None = None,
                  tag: str | None = None) -> Verdict:
    """Verdict on the limit of ``task_family(n)`` as ``n`` grows.

    Probes ``n = 1 .. n_probe``.  A geometric decay of the defect is
    recognised for ensemble-distinguishing families only; other shapes that
    neither become possible nor have a constant defect return ``Unknown``.
    """
    cfg = config or DEFAULT_CONFIG
    defects: list[float] = []
    family_tag = tag
    for n in range(1, cfg.n_probe + 1):
        t = task_family(n)
        family_tag = family_tag or t.tag
        v = possible_with_side_effects(t, cfg)
        if v.possible:
            return Verdict(POSSIBLE, witness=v.witness, detail={"n": n, "defects": defects})
        d = _defect(v)
        if v.unknown or d is None:
            return unknown_verdict(n=n, defects=defects, reason="defect not certified")
        defects.append(d)
        if n == 1 and d >= 1.0 - cfg.tau_gram:
            return Verdict(IMPOSSIBLE, certificate=Certificate(
                "ConstantDefect", {"defect": d, "reason": v.certificate.name}),
                detail={"defects": defects})
    decreasing = all(b < a for a, b in zip(defects, defects[1:]))
    ratios = [b / a for a, b in zip(defects, defects[1:]) if a > 0]
    geometric = bool(ratios) and max(ratios) - min(ratios) <= 1e-9 * max(1.0, max(ratios))
    if family_tag == "ensemble-distinguish" and decreasing and geometric and ratios[0] < 1.0:
        return Verdict(IN_LIMIT, detail={"defects": defects, "ratio": ratios[0]})
    if defects and min(defects) >= defects[0] - cfg.tau_gram:
        return Verdict(IMPOSSIBLE, certificate=Certificate(
            "ConstantDefect", {"defect": min(defects)}), detail={"defects": defects})
    return unknown_verdict(defects=defects, reason="unrecognised family")


def unitary_from_witness(task: Task, verdict: Verdict) -> np.ndarray:
    """A unitary on the input space realising a side-effect-free witness.

    Requires equal input and output dimensions.  The map is fixed on the span
    of the input rays (polar factor of ``Phi Psi^+``) and completed on the
    orthogonal complement.
    """
    w: QuantumWitness = verdict.witness
    prob = _build_problem(task)
    psi = np.stack([la.kron_all([f.basis[:, 0] for f in ray]) for ray in prob.rays], axis=1)
    phi = np.stack([w.output(r) * w.ancillas[r, 0] for r in range(len(prob.rays))], axis=1)
    if psi.shape[0] != phi.shape[0]:
        raise KindMismatch("input and output dimensions differ")
    u, s, vh = np.linalg.svd(phi @ np.linalg.pinv(psi, rcond=1e-10))
    # Singular vectors with s ~ 0 live on the complement; their pairing is arbitrary.
    return u @ vh
