"""Checks of principles II-IX on loaded models and exhaustive classical falsification."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

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
    parallel_compose,
    product_variable,
    split_attribute,
    validate_network,
)
from .errors import BudgetExceeded
from .info import (
    bar_bar,
    computation_task,
    demolition_spec,
    distinguish,
    is_information_variable,
    measurement_task,
    non_perturbing_spec,
    perp,
    verdict_bool,
    MeasurementSpec,
)
from .model import Model
from .oracles import ClassicalWitness, OracleConfig, _build_problem, possible_with_side_effects
from .superinfo import ensemble_distinguishable, scan_superinformation

HOLDS = "Holds"
FAILS = "Fails"
AXIOMATIC = "Axiomatic"
PARTIAL = "PartiallyChecked"

PRINCIPLES = ("II", "III", "IV", "V", "VI", "VII", "VIII", "IX")


@dataclass
class PrincipleReport:
    principle: str
    status: str
    evidence: list = field(default_factory=list)
    coverage: str = ""
    counterexample: dict | None = None

    @property
    def ok(self) -> bool:
        return self.status in (HOLDS, AXIOMATIC)


def _finish(p, checked, failures, unknown, scope) -> PrincipleReport:
    cov = f"{checked} instance(s) checked; {scope}"
    if failures:
        return PrincipleReport(p, FAILS, checked_evidence(failures), cov, failures[0])
    if unknown:
        return PrincipleReport(p, PARTIAL, checked_evidence(unknown), cov + f"; {len(unknown)} undecided")
    return PrincipleReport(p, HOLDS, [], cov)


def checked_evidence(items):
    return list(items)[:20]


def _substrate_attrs(model: Model):
    by_shape: dict = {}
    for name, a in model.intrinsic_attributes():
        by_shape.setdefault((a.substrate.kind, a.substrate.dims), []).append((name, a))
    return by_shape


# --------------------------------------------------------------------------- II


def _check_ii(model: Model, cfg) -> PrincipleReport:
    checked, failures = 0, []
    for sname, sub in model.substrates.items():
        if not sub.is_composite:
            continue
        if int(np.prod(sub.dims)) != sub.size:
            failures.append({"substrate": sname, "reason": "state space does not factor"})
            continue
        for i, part in enumerate(sub.parts):
            vars_here = [v for v in model.variables.values() if v.substrate.same_shape(part)]
            others = [p for j, p in enumerate(sub.parts) if j != i]
            rest = Substrate.compose(*others) if len(others) > 1 else others[0]
            rest_full = Attribute.full(rest)
            for v in vars_here:
                if len(v) < 2:
                    continue
                t = computation_task(list(v), Permutation.cycle(len(v)))
                ident = Task(((rest_full, rest_full),))
                pc = parallel_compose(_rehome_task(t, part), _rehome_task(ident, rest))
                checked += 1
                for (x, y), (px, py) in zip(t.pairs, pc.pairs):
                    parts_in = split_attribute(px, [part, rest])
                    parts_out = split_attribute(py, [part, rest])
                    if not (parts_in[0].same_as(x) and parts_out[0].same_as(y)
                            and parts_out[1].same_as(parts_in[1])):
                        failures.append({"substrate": sname, "variable": v.name})
    return _finish("II", checked, failures, [], "composite state spaces factor; local tasks leave "
                   "the other component's attribute unchanged")


def _rehome_task(t: Task, sub: Substrate) -> Task:
    return Task(tuple((x.rehome(sub), y.rehome(sub)) for x, y in t.pairs), tag=t.tag)


# --------------------------------------------------------------------------- III


def _check_iii(model: Model, cfg) -> PrincipleReport:
    checked, failures, unknown = 0, [], []
    infos = [v for v in model.variables.values()
             if not v.substrate.is_composite and is_information_variable(v, model.preparables(), cfg)]
    for v in infos:
        copy_sub = v.substrate.renamed(v.substrate.name + "*")
        w = Variable(tuple(a.rehome(copy_sub) for a in v), v.labels, name=(v.name or "") + "*")
        prod = product_variable(v, w)
        r = is_information_variable(prod, config=cfg)
        checked += 1
        entry = {"variables": [v.name, w.name], "size": len(prod)}
        if r is False:
            failures.append(entry)
        elif r is None:
            unknown.append(entry)
    return _finish("III", checked, failures, unknown,
                   "each declared information variable paired with a copy of itself")


# --------------------------------------------------------------------------- IV / V


def _disjoint_families(attrs, max_size=4, limit=2000):
    n = len(attrs)
    out = []
    for k in range(2, min(max_size, n) + 1):
        for combo in itertools.combinations(range(n), k):
            if all(attrs[i][1].isdisjoint(attrs[j][1]) for i, j in itertools.combinations(combo, 2)):
                out.append(combo)
                if len(out) >= limit:
                    return out
    return out


def _check_iv_family(names_attrs, cfg, failures, unknown):
    attrs = [a for _, a in names_attrs]
    pair = [perp(x, y, cfg) for x, y in itertools.combinations(attrs, 2)]
    if not all(p is True for p in pair):
        if any(p is None for p in pair):
            unknown.append({"attributes": [n for n, _ in names_attrs]})
        return
    r = verdict_bool(distinguish(attrs, cfg))
    entry = {"attributes": [n for n, _ in names_attrs]}
    if r is False:
        failures.append(entry)
    elif r is None:
        unknown.append(entry)


def _check_iv(model: Model, cfg) -> PrincipleReport:
    checked, failures, unknown = 0, [], []
    for group in _substrate_attrs(model).values():
        for combo in _disjoint_families(group):
            checked += 1
            _check_iv_family([group[i] for i in combo], cfg, failures, unknown)
    return _finish("IV", checked, failures, unknown,
                   "all pairwise-disjoint families of declared attributes up to size 4")


def _singletons(y: Attribute) -> list[Attribute]:
    if y.is_quantum:
        return [Attribute(y.substrate, pieces=[r]) for r in y.expand_rays()]
    return [Attribute.states(y.substrate, [s]) for s in y.state_set]


def _check_v_pair(x, y, cfg):
    """Returns None when the antecedent fails, else the consequent's truth value."""
    for s in _singletons(y):
        r = perp(s, x, cfg)
        if r is not True:
            return "skip" if r is False else "unknown"
    r = perp(y, x, cfg)
    return "holds" if r is True else ("fails" if r is False else "unknown")


def _check_v(model: Model, cfg) -> PrincipleReport:
    checked, failures, unknown = 0, [], []
    for group in _substrate_attrs(model).values():
        for (nx, x), (ny, y) in itertools.permutations(group, 2):
            if not x.isdisjoint(y):
                continue
            checked += 1
            r = _check_v_pair(x, y, cfg)
            if r == "fails":
                failures.append({"x": nx, "y": ny})
            elif r == "unknown":
                unknown.append({"x": nx, "y": ny})
    return _finish("V", checked, failures, unknown,
                   "ordered pairs of disjoint declared attributes; quantum attributes via spanning rays")


# --------------------------------------------------------------------------- VII


def _classical_compose(wb: ClassicalWitness, wa: ClassicalWitness) -> ClassicalWitness:
    return ClassicalWitness({s: wb.mapping[t] for s, t in wa.mapping.items()})


def _check_vii(model: Model, cfg) -> PrincipleReport:
    checked, failures, unknown = 0, [], []
    for v in model.variables.values():
        if len(v) < 2:
            continue
        perms = [Permutation.cycle(len(v)), Permutation.transposition(len(v), 0, 1)]
        ta, tb = (computation_task(list(v), p) for p in perms)
        va, vb = possible_with_side_effects(ta, cfg), possible_with_side_effects(tb, cfg)
        if not (va.possible and vb.possible):
            continue
        sub = v.substrate
        chain = Network((Node("a", ta), Node("b", tb)), (Edge("a", 0, "b", 0),))
        copy = sub.renamed(sub.name + "*")
        tb_copy = _rehome_task(tb, copy)
        side = Network((Node("a", ta), Node("b", tb_copy)), ())
        for label, net in (("serial", chain), ("parallel", side)):
            checked += 1
            flat = validate_network(net)
            r = possible_with_side_effects(flat, cfg)
            entry = {"variable": v.name, "network": label, "pairs": len(flat)}
            if r.impossible:
                failures.append(entry)
            elif r.unknown:
                unknown.append(entry)
            elif isinstance(va.witness, ClassicalWitness) and label == "serial":
                composed = _classical_compose(vb.witness, va.witness)
                if not composed.validate(flat):
                    failures.append({**entry, "reason": "composed witness does not validate"})
    return _finish("VII", checked, failures, unknown,
                   "two-node serial and parallel networks of computation tasks on declared variables")


# --------------------------------------------------------------------------- VIII


def measurer_family(x_var: Variable) -> list[MeasurementSpec]:
    """Constructible measurers of ``x_var``: non-perturbing and demolition, every pointer order."""
    base = [non_perturbing_spec(x_var), demolition_spec(x_var)]
    out = []
    n = len(x_var)
    orders = list(itertools.permutations(range(n))) if n <= 3 else [tuple(range(n)),
                                                                       tuple(reversed(range(n)))]
    for spec in base:
        ptrs = list(spec.output_variable)
        for order in orders:
            out_var = Variable(tuple(ptrs[i] for i in order),
                               tuple(spec.output_variable.label_of(i) for i in order))
            out.append(MeasurementSpec(spec.input_variable, spec.output_medium, spec.receptive,
                                       out_var, spec.residuals))
    return out


def pointer_sharpness(spec: MeasurementSpec, a: Attribute, cfg, tau: float = 1e-9) -> bool | None:
    """Whether the measurer's output variable ends sharp when fed attribute ``a``.

    Uses the oracle's witness for the measurement task, extended linearly
    (quantum) or applied pointwise (classical).
    """
    task = measurement_task(spec)
    v = possible_with_side_effects(task, cfg)
    if not v.possible:
        return None
    ptrs = list(spec.output_variable)
    if not a.is_quantum:
        blank = next(iter(spec.receptive.state_set))
        hit = set()
        for s in a.state_set:
            key = (s if isinstance(s, tuple) else (s,)) + (blank if isinstance(blank, tuple) else (blank,))
            out = v.witness.mapping.get(key)
            if out is None:
                return None
            ptr = out[-1]
            hit.add(next((i for i, p in enumerate(ptrs) if ptr in p.state_set), None))
        return len(hit) == 1 and None not in hit
    w = v.witness
    prob = _build_problem(task)
    psi = np.stack([la.kron_all([f.basis[:, 0] for f in ray]) for ray in prob.rays], axis=1)
    dS, dM = spec.input_variable.substrate.size, spec.output_medium.size
    blank = spec.receptive.ray()
    verdicts = set()
    for ray in a.expand_rays():
        alpha = np.kron(la.kron_all([f.basis[:, 0] for f in ray]), blank)
        coef, *_ = np.linalg.lstsq(psi, alpha, rcond=None)
        if np.max(np.abs(psi @ coef - alpha)) > 1e-8:
            return None
        D = w.ancillas.shape[1]
        out = sum(c * np.kron(w.output(r), w.ancillas[r]) for r, c in enumerate(coef))
        rho = la.reduced_density(out, [dS, dM, D], [1])
        sharp = False
        for p in ptrs:
            proj = p.span()
            if abs(np.real(np.trace(proj.conj().T @ rho @ proj)) - 1.0) <= 1e-7:
                sharp = True
        verdicts.add(sharp)
    return verdicts.pop() if len(verdicts) == 1 else False


def _viii_candidates(x_var: Variable, pool):
    closure = bar_bar(x_var.union())
    out = []
    for name, a in pool:
        if not a.substrate.same_shape(x_var.substrate) or a.is_empty:
            continue
        if any(a.issubset(x) for x in x_var):
            continue
        if a.issubset(closure):
            out.append((name, a))
    return out


def _check_viii_variable(x_var, pool, cfg, failures, unknown, evidence):
    checked = 0
    for name, a in _viii_candidates(x_var, pool):
        results = []
        for spec in measurer_family(x_var):
            results.append(pointer_sharpness(spec, a, cfg))
        decided = [r for r in results if r is not None]
        checked += 1
        entry = {"variable": x_var.name, "attribute": name, "measurers": len(results),
                 "sharp": sorted(set(decided))}
        if len(set(decided)) > 1:
            failures.append(entry)
        elif len(decided) < len(results):
            unknown.append(entry)
        else:
            evidence.append(entry)
    return checked


def _check_viii(model: Model, cfg) -> PrincipleReport:
    checked, failures, unknown, evidence = 0, [], [], []
    pool = model.intrinsic_attributes()
    for v in model.variables.values():
        if len(v) < 2 or verdict_bool(distinguish(v, cfg)) is not True:
            continue
        checked += _check_viii_variable(v, pool, cfg, failures, unknown, evidence)
    rep = _finish("VIII", checked, failures, unknown,
                  "declared attributes inside the closure of a measurable variable, over the "
                  "constructible measurer family")
    rep.evidence = rep.evidence or evidence[:20]
    return rep


# --------------------------------------------------------------------------- IX


def _check_ix(model: Model, cfg) -> PrincipleReport:
    checked, failures, unknown, evidence = 0, [], [], []
    for group in _substrate_attrs(model).values():
        for (nx, x), (ny, y) in itertools.combinations(group, 2):
            if not x.isdisjoint(y):
                continue
            checked += 1
            v = ensemble_distinguishable(x, y, cfg)
            entry = {"x": nx, "y": ny, "verdict": v.kind}
            if v.impossible:
                failures.append(entry)
            elif v.unknown:
                unknown.append(entry)
            else:
                evidence.append(entry)
    rep = _finish("IX", checked, failures, unknown, "all disjoint pairs of declared attributes")
    rep.evidence = rep.evidence or evidence[:20]
    return rep


def check_principle(p: str, model: Model, config: OracleConfig | None = None) -> PrincipleReport:
    cfg = config or model.config
    p = p.upper()
    if p == "VI":
        return PrincipleReport("VI", AXIOMATIC, [{"preparable": list(model.preparable)}],
                               "declared in the model file")
    checks = {"II": _check_ii, "III": _check_iii, "IV": _check_iv, "V": _check_v,
              "VII": _check_vii, "VIII": _check_viii, "IX": _check_ix}
    if p not in checks:
        raise ValueError(f"unknown principle {p!r}; expected one of {', '.join(PRINCIPLES)}")
    return checks[p](model, cfg)


# --------------------------------------------------------------------------- falsification


@lru_cache(maxsize=None)
def bell_number(n: int) -> int:
    """Bell numbers via the Bell triangle."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def analytic_coverage(max_states: int) -> int:
    """Number of (model, variable) pairs: nonempty families of disjoint nonempty subsets.

    A family on ``n`` states is a set partition of ``n + 1`` points whose
    extra point collects the unused states, so there are ``Bell(n+1) - 1``.
    """
    return sum(bell_number(n + 1) - 1 for n in range(2, max_states + 1))


def enumerate_variables(n: int):
    """Every nonempty family of pairwise-disjoint nonempty subsets of ``range(n)``."""
    def rec(i, blocks, unused):
        if i == n:
            if blocks:
                yield [tuple(b) for b in blocks]
            return
        yield from rec(i + 1, blocks, unused + [i])
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks, unused)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks, unused)
        blocks.pop()
    yield from rec(0, [], [])


@dataclass
class FalsifyResult:
    failures: list[PrincipleReport]
    coverage: int
    expected_coverage: int
    counts: dict
    superinfo_media: int

    @property
    def clean(self) -> bool:
        return not self.failures and self.superinfo_media == 0


def falsify(max_states: int, principles=("IV", "V", "VIII", "superinfo"), bound: int = 4,
            config: OracleConfig | None = None) -> FalsifyResult:
    """Sweep all classical models with 2..max_states states and every variable on them."""
    if max_states > bound:
        raise BudgetExceeded(f"max_states={max_states} exceeds the bound {bound}",
                             coverage=analytic_coverage(bound))
    wanted = {p.upper() if p != "superinfo" else p for p in principles}
    failures: list[PrincipleReport] = []
    counts = {p: 0 for p in sorted(wanted)}
    coverage = 0
    media = 0
    for n in range(2, max_states + 1):
        sub = Substrate.classical(f"c{n}", n)
        variables = []
        for blocks in enumerate_variables(n):
            coverage += 1
            attrs = tuple(Attribute.states(sub, b, label="".join(map(str, b))) for b in blocks)
            v = Variable(attrs, name="{" + ",".join(a.label for a in attrs) + "}")
            variables.append(v)
            named = [(a.label, a) for a in attrs]
            if "IV" in wanted and len(attrs) >= 2:
                fl, un = [], []
                _check_iv_family(named, config, fl, un)
                counts["IV"] += 1
                failures += [_fail("IV", n, v, f) for f in fl + un]
            if "V" in wanted:
                for (nx, x), (ny, y) in itertools.permutations(named, 2):
                    counts["V"] += 1
                    if _check_v_pair(x, y, config) in ("fails", "unknown"):
                        failures.append(_fail("V", n, v, {"x": nx, "y": ny}))
            if "VIII" in wanted and len(attrs) >= 2:
                union = set().union(*(a.state_set for a in attrs))
                pool = [("".join(map(str, s)), Attribute.states(sub, s))
                        for k in range(2, len(union) + 1)
                        for s in itertools.combinations(sorted(union), k)]
                fl, un, ev = [], [], []
                counts["VIII"] += _check_viii_variable(v, pool, config, fl, un, ev)
                failures += [_fail("VIII", n, v, f) for f in fl + un]
        if "superinfo" in wanted:
            scan = scan_superinformation([v for v in variables if len(v) >= 2], config=config)
            counts["superinfo"] += scan.pairs_checked
            if scan.witness is not None or scan.undecided:
                media += 1
    return FalsifyResult(failures, coverage, analytic_coverage(max_states), counts, media)


def _fail(p, n, v, detail) -> PrincipleReport:
    return PrincipleReport(p, FAILS, [detail], f"classical model with {n} states",
                           {"states": n, "variable": v.name, **detail})
