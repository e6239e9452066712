"""Command-line interface: ``constructor-kit <verb> [options]``.

Exit status: 0 when every check passes, 1 when a theorem or principle fails,
2 on usage or model-file errors, 3 when some verdict is Unknown.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import FIXTURES, __version__, fixture_path
from .core import Attribute, Substrate, Variable
from .errors import (
    BudgetExceeded,
    ConstructorKitError,
    ParseError,
    PreconditionFailed,
    TheoremViolation,
    ValidationError,
)
from .info import (
    cloning_verdict,
    demolition_spec,
    distinguish,
    info_capacity,
    is_information_variable,
    is_measurer_of,
    is_observable,
    measurement_task,
    non_perturbing_spec,
    verdict_bool,
)
from .model import Model, load_model
from .oracles import OracleConfig, Verdict, possible_with_side_effects
from .principles import AXIOMATIC, FAILS, HOLDS, PRINCIPLES, check_principle, falsify
from .report import FAIL, PASS, UNKNOWN, Record, Report, emit_report
from .superinfo import (
    consecutive_measurement_network,
    find_indistinguishable_pair,
    perturbation_task,
    scan_superinformation,
    unpredictability_certificate,
    verify_complementarity,
    verify_locally_inaccessible,
    verify_no_cloning,
    verify_undetectable_sharpness,
)

SECTIONS = ("8.1", "8.2", "8.3", "8.4", "8.5", "8.6", "8.7", "8.9")
ALIASES = {"qubit": "qubit_zx", "qutrit": "qutrit_mub", "bit": "classical_bit",
           "trit": "classical_trit"}


class UsageError(ConstructorKitError):
    pass


def resolve_model_path(arg: str) -> Path:
    """A file path, or the name of a bundled fixture (``qubit_zx``, ``qubit.ctm``...)."""
    p = Path(arg)
    if p.exists():
        return p
    stem = p.name[:-4] if p.name.endswith(".ctm") else p.name
    stem = ALIASES.get(stem, stem)
    if stem in FIXTURES:
        return fixture_path(stem)
    raise UsageError(f"model file {arg!r} not found (bundled fixtures: {', '.join(FIXTURES)})")


def _status(v: Verdict | bool | None) -> str:
    if isinstance(v, Verdict):
        return UNKNOWN if v.unknown else PASS
    return UNKNOWN if v is None else PASS


def _timed(fn):
    t0 = time.perf_counter()
    rec = fn()
    rec.seconds = time.perf_counter() - t0
    return rec


def _lookup_attrs(model: Model, names: list[str]) -> list[Attribute]:
    if len(names) == 1 and names[0] in model.variables:
        return list(model.variables[names[0]])
    out = []
    for n in names:
        if n not in model.attributes:
            raise UsageError(f"unknown attribute {n!r} in model {model.name!r}")
        out.append(model.attributes[n])
    return out


def _lookup_var(model: Model, name: str) -> Variable:
    if name not in model.variables:
        raise UsageError(f"unknown variable {name!r} in model {model.name!r}")
    return model.variables[name]


def _variables(model: Model, names: list[str]) -> list[tuple[str, Variable]]:
    if not names:
        return list(model.variables.items())
    return [(n, _lookup_var(model, n)) for n in names]


# --------------------------------------------------------------------------- verbs


def cmd_distinguish(args, model, cfg, report):
    attrs = _lookup_attrs(model, args.names)
    v = distinguish(attrs, cfg)
    report.add(Record("distinguish", {"attributes": [model.attribute_name(a) for a in attrs]},
                      _status(v), v))


def cmd_clone_check(args, model, cfg, report):
    attrs = _lookup_attrs(model, args.names)
    v = cloning_verdict(attrs, model.preparables(), cfg)
    report.add(Record("clone-check", {"attributes": [model.attribute_name(a) for a in attrs]},
                      _status(v), v, result={"clonable": verdict_bool(v)}))


def cmd_info_var(args, model, cfg, report):
    for name, var in _variables(model, args.variables):
        r = is_information_variable(var, model.preparables(), cfg)
        report.add(Record("info-var", {"variable": name}, _status(r),
                          result={"information_variable": r}))


def cmd_observable(args, model, cfg, report):
    for name, var in _variables(model, args.variables):
        r = is_observable(var, cfg)
        report.add(Record("observable", {"variable": name}, _status(r), result={"observable": r}))


def cmd_measure(args, model, cfg, report):
    var = _lookup_var(model, args.variable)
    spec = demolition_spec(var) if args.demolition else non_perturbing_spec(var)
    v = possible_with_side_effects(measurement_task(spec), cfg)
    kind = "demolition" if args.demolition else "non-perturbing"
    report.add(Record("measure", {"variable": args.variable, "kind": kind}, _status(v), v))
    for other in args.of:
        r = is_measurer_of(spec, _lookup_var(model, other), cfg)
        report.add(Record("measurer-of", {"variable": args.variable, "kind": kind, "of": other},
                          _status(r), result={"measures": r}))


def _witness_summary(model, w):
    if w is None:
        return None
    x, y = w.pair
    return {"medium": w.medium.name, "X": w.x_var.name, "Y": w.y_var.name,
            "union_failure": w.union_failure,
            "pair": [model.attribute_name(x), model.attribute_name(y)], "overlap": w.overlap}


def cmd_superinfo(args, model, cfg, report):
    scan = scan_superinformation(model.candidates(), model.preparables(), cfg)
    status = PASS if scan.complete or scan.witness is not None else UNKNOWN
    report.add(Record("superinfo", {"model": model.name}, status,
                      result={"witness": _witness_summary(model, scan.witness),
                              "observables": scan.observables,
                              "pairs_checked": scan.pairs_checked,
                              "undecided": scan.undecided}))


def _pick_xy(args, model, witness) -> tuple[Variable, Attribute]:
    if args.x or args.y:
        if not (args.x and args.y):
            raise UsageError("--x and --y go together")
        if args.y not in model.attributes:
            raise UsageError(f"unknown attribute {args.y!r}")
        return _lookup_var(model, args.x), model.attributes[args.y]
    if witness is None:
        raise PreconditionFailed("no superinformation witness; pass --x VARIABLE --y ATTRIBUTE")
    for X, Y in ((witness.x_var, witness.y_var), (witness.y_var, witness.x_var)):
        for y in Y:
            if y.is_quantum and y.is_ray and all(y.isdisjoint(x) for x in X):
                return X, y
    raise PreconditionFailed("the witness offers no single-ray y disjoint from X")


def _theorem(section, args, model, cfg, scan) -> Record:
    w = scan.witness
    inputs = {"section": section, "model": model.name}
    if section in ("8.1", "8.2", "8.3", "8.4") and w is None:
        return Record(f"theorem {section}", inputs, FAIL,
                      note="no superinformation witness in this model")
    if section == "8.1":
        x, y = find_indistinguishable_pair(w.x_var, w.y_var, cfg)
        return Record("theorem 8.1", inputs, PASS,
                      result={"witness": _witness_summary(model, w),
                              "pair": [model.attribute_name(x), model.attribute_name(y)]})
    if section == "8.2":
        v = verify_undetectable_sharpness(w, config=cfg)
        ens = v.detail.get("ensemble")
        ok = v.impossible and ens is not None and not ens.impossible
        return Record("theorem 8.2", inputs, UNKNOWN if v.unknown else (PASS if ok else FAIL), v,
                      result={"ensemble": ens.kind if ens is not None else None})
    if section == "8.3":
        v = verify_no_cloning(w, preparables=model.preparables(), config=cfg)
        return Record("theorem 8.3", inputs, UNKNOWN if v.unknown else PASS, v)
    if section == "8.4":
        v = verify_complementarity(w, config=cfg)
        return Record("theorem 8.4", inputs, UNKNOWN if v.unknown else PASS, v)
    if section == "8.9":
        names = (args.a1, args.b1, args.a2)
        if any(n not in model.variables for n in names):
            return Record("theorem 8.9", {**inputs, "variables": list(names)}, FAIL,
                          note="model lacks the variables " + ", ".join(names))
        v, rec = verify_locally_inaccessible(*(model.variables[n] for n in names), config=cfg)
        return Record("theorem 8.9", {**inputs, "variables": list(names)}, PASS, v,
                      result={"overlap_00": rec.overlap_00, "overlap_11": rec.overlap_11,
                              "C_information": rec.C_information,
                              "D_information": rec.D_information,
                              "adaptive_measurement": rec.C_adaptive_measurement,
                              "transpose_possible": rec.transpose_possible})
    X, y = _pick_xy(args, model, w)
    inputs = {**inputs, "X": X.name, "y": model.attribute_name(y)}
    if section == "8.5":
        c = unpredictability_certificate(X, y, cfg)
        return Record("theorem 8.5", inputs, PASS,
                      result={"X_y": [c.x_y.label_of(i) for i in range(len(c.x_y))],
                              "size": c.size, "containment_residual": c.containment_residual,
                              "overlaps": c.overlaps, "no_sharp_prediction": c.no_sharp_prediction})
    if section == "8.6":
        c = unpredictability_certificate(X, y, cfg)
        _, v = perturbation_task(c.x_y, y, config=cfg)
        return Record("theorem 8.6", inputs, UNKNOWN if v.unknown else PASS, v)
    c = consecutive_measurement_network(X, y, cfg, allow_fixed_points=args.allow_fixed_points)
    return Record("theorem 8.7", inputs, PASS, c.verdict,
                  result={"X_y": c.x_y_labels, "permutation": list(c.permutation.mapping),
                          "r_true_probability": c.r_true_probability,
                          "records_sharp": c.record_sharp})


def _run_theorem(section, args, model, cfg, scan) -> Record:
    try:
        return _theorem(section, args, model, cfg, scan)
    except TheoremViolation as exc:
        return Record(f"theorem {section}", {"section": section, "model": model.name}, FAIL,
                      exc.verdict, note=str(exc))
    except PreconditionFailed as exc:
        return Record(f"theorem {section}", {"section": section, "model": model.name}, FAIL,
                      note=f"precondition: {exc}")


def _applicable_sections(args, model, scan) -> list[str]:
    """Without --section: the superinformation theorems if the model has a witness
    (or --x/--y), plus the local-inaccessibility replay if its variables exist."""
    out = []
    if scan.witness is not None:
        out += ["8.1", "8.2", "8.3", "8.4"]
    if (scan.witness is not None and model.substrates and
            all(s.is_quantum for s in model.substrates.values())) or (args.x and args.y):
        out += ["8.5", "8.6", "8.7"]
    if all(n in model.variables for n in (args.a1, args.b1, args.a2)):
        out.append("8.9")
    return out


def cmd_theorems(args, model, cfg, report):
    scan = scan_superinformation(model.candidates(), model.preparables(), cfg)
    sections = args.section or _applicable_sections(args, model, scan)
    recs = _parallel(args.jobs, [lambda s=s: _timed(lambda: _run_theorem(s, args, model, cfg, scan))
                                 for s in sections])
    for r in recs:
        report.add(r)
    if not sections:
        report.add(Record("theorems", {"model": model.name}, PASS,
                          note="no superinformation witness and no --x/--y; nothing to check"))


def _principle_record(p, model, cfg) -> Record:
    rep = check_principle(p, model, cfg)
    status = PASS if rep.status in (HOLDS, AXIOMATIC) else FAIL if rep.status == FAILS else UNKNOWN
    return Record(f"principle {rep.principle}", {"principle": rep.principle, "model": model.name},
                  status, result={"status": rep.status, "coverage": rep.coverage,
                                  "counterexample": rep.counterexample,
                                  "evidence": rep.evidence})


def cmd_check(args, model, cfg, report):
    wanted = args.principle or list(PRINCIPLES)
    recs = _parallel(args.jobs, [lambda p=p: _timed(lambda: _principle_record(p, model, cfg))
                                 for p in wanted])
    for r in recs:
        report.add(r)


def cmd_falsify(args, model, cfg, report):
    res = falsify(args.max_states, tuple(args.principles), bound=args.bound, config=cfg)
    ok = res.clean and res.coverage == res.expected_coverage
    report.add(Record("falsify", {"max_states": args.max_states, "principles": args.principles},
                      PASS if ok else FAIL,
                      result={"coverage": res.coverage, "expected_coverage": res.expected_coverage,
                              "checks": res.counts, "superinformation_media": res.superinfo_media,
                              "failures": [f.counterexample for f in res.failures[:20]]}))


def cmd_capacity(args, model, cfg, report):
    names = args.substrates or list(model.substrates)
    caps = {}
    for n in names:
        if n not in model.substrates:
            raise UsageError(f"unknown substrate {n!r}")
        caps[n] = info_capacity(model.substrates[n], model.candidates(), cfg)
        report.add(Record("capacity", {"substrate": n}, PASS, result={"bits": caps[n]}))
    for n in names:
        sub: Substrate = model.substrates[n]
        parts = [p.name for p in sub.parts] if sub.is_composite else []
        if parts and all(p in model.substrates for p in parts):
            total = sum(info_capacity(model.substrates[p], model.candidates(), cfg) for p in parts)
            ok = abs(caps[n] - total) <= 1e-9
            report.add(Record("capacity-additivity", {"substrate": n, "parts": parts},
                              PASS if ok else FAIL, result={"composite": caps[n], "sum": total}))


def _parallel(jobs: int, thunks):
    """Run thunks, possibly on threads; results come back in submission order."""
    if jobs <= 1 or len(thunks) <= 1:
        return [t() for t in thunks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda t: t(), thunks))


VERBS = {
    "distinguish": cmd_distinguish, "clone-check": cmd_clone_check, "info-var": cmd_info_var,
    "observable": cmd_observable, "measure": cmd_measure, "superinfo": cmd_superinfo,
    "theorems": cmd_theorems, "check": cmd_check, "falsify": cmd_falsify,
    "capacity": cmd_capacity,
}


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="oracle seed (overrides the model file)")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json",
                     default=argparse.SUPPRESS, help="machine-readable JSON report")
    fmt.add_argument("--text", dest="format", action="store_const", const="text",
                     default=argparse.SUPPRESS, help="human-readable report (default)")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS,
                        help="write the report to this file instead of stdout")
    common.add_argument("--timings", action="store_true", default=argparse.SUPPRESS,
                        help="include wall-clock times (makes output non-reproducible)")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="worker threads for independent checks")

    parser = argparse.ArgumentParser(prog="constructor-kit", parents=[common],
                                     description="Decide tasks and check information theorems "
                                                 "on classical and quantum model files.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    def verb(name, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        return p

    p = verb("distinguish", "can the given attributes be told apart")
    p.add_argument("model")
    p.add_argument("names", nargs="+", help="attribute names, or one variable name")
    p = verb("clone-check", "can the given attributes be cloned")
    p.add_argument("model")
    p.add_argument("names", nargs="+", help="attribute names, or one variable name")
    p = verb("info-var", "is each variable an information variable")
    p.add_argument("model")
    p.add_argument("variables", nargs="*")
    p = verb("observable", "is each variable an information observable")
    p.add_argument("model")
    p.add_argument("variables", nargs="*")
    p = verb("measure", "non-perturbing or demolition measurement of a variable")
    p.add_argument("model")
    p.add_argument("variable")
    p.add_argument("--demolition", action="store_true")
    p.add_argument("--of", action="append", default=[], metavar="VARIABLE",
                   help="also ask whether the measurer measures this variable")
    p = verb("superinfo", "search the model for superinformation")
    p.add_argument("model")
    p = verb("theorems", "check the superinformation theorems on a model")
    p.add_argument("model")
    p.add_argument("--section", action="append", choices=SECTIONS)
    p.add_argument("--x", metavar="VARIABLE", help="maximal variable for 8.5-8.7")
    p.add_argument("--y", metavar="ATTRIBUTE", help="ray attribute for 8.5-8.7")
    p.add_argument("--allow-fixed-points", action="store_true",
                   help="8.7: leave a lone non-X_y value fixed instead of failing")
    p.add_argument("--a1", default="A1")
    p.add_argument("--b1", default="B1")
    p.add_argument("--a2", default="A2")
    p = verb("check", "check structural principles on a model")
    p.add_argument("model")
    p.add_argument("--principle", action="append", type=str.upper, choices=PRINCIPLES)
    p = verb("falsify", "sweep every small classical model for counterexamples")
    p.add_argument("--max-states", type=int, required=True)
    p.add_argument("--bound", type=int, default=4)
    p.add_argument("--principles", nargs="+", default=["IV", "V", "VIII", "superinfo"],
                   choices=["IV", "V", "VIII", "superinfo"])
    p = verb("capacity", "information capacity of substrates")
    p.add_argument("model")
    p.add_argument("substrates", nargs="*")
    return parser


def _options(ns) -> dict:
    return {"seed": getattr(ns, "seed", None), "format": getattr(ns, "format", "text"),
            "out": getattr(ns, "out", None), "timings": getattr(ns, "timings", False),
            "jobs": getattr(ns, "jobs", 1)}


def _echo(argv: list[str]) -> list[str]:
    """Command echo without output-only flags, so it replays to the same report."""
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out=") or a in ("--json", "--text", "--timings"):
            continue
        out.append(a)
    return out


def build_report(argv: list[str]) -> tuple[Report, dict]:
    """Parse ``argv`` and run the command; errors propagate to the caller."""
    ns = build_parser().parse_args(argv)
    opts = _options(ns)
    ns.jobs = max(1, opts["jobs"])
    model = load_model(resolve_model_path(ns.model)) if hasattr(ns, "model") else None
    cfg = model.config if model is not None else OracleConfig()
    if opts["seed"] is not None:
        cfg = dataclasses.replace(cfg, seed=opts["seed"])
    report = Report(_echo(argv), cfg.seed, __version__, model.name if model else None)
    VERBS[ns.verb](ns, model, cfg, report)
    return report, opts


def replay(report_json: str | bytes) -> bool:
    """Re-run the command echoed in a JSON report and compare the serialised records."""
    data = json.loads(report_json)
    fresh, _ = build_report(list(data["command"]))
    redo = json.loads(emit_report(fresh, "json"))
    strip = [{k: v for k, v in r.items() if k != "wall_seconds"} for r in data["records"]]
    return redo["records"] == strip and redo["seed"] == data["seed"]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        report, opts = build_report(argv)
    except SystemExit as exc:  # argparse: --help/--version exit 0, usage errors exit 2
        return int(exc.code or 0)
    except (ParseError, ValidationError, UsageError, BudgetExceeded, KeyError) as exc:
        where = ""
        if isinstance(exc, ParseError) and exc.line is not None:
            where = f" (line {exc.line}, column {exc.column})"
        extra = f"; coverage so far {exc.coverage}" if isinstance(exc, BudgetExceeded) else ""
        print(f"constructor-kit: error: {exc}{where}{extra}", file=sys.stderr)
        return 2
    except ConstructorKitError as exc:
        print(f"constructor-kit: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - keep exit 1 for genuine Fails only
        print(f"constructor-kit: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    data = emit_report(report, opts["format"], opts["timings"])
    if opts["out"] is not None:
        try:
            opts["out"].write_bytes(data)
        except OSError as exc:
            print(f"constructor-kit: error: cannot write report: {exc}", file=sys.stderr)
            return 2
        s = report.summary()
        print(f"{s['pass']} pass, {s['fail']} fail, {s['unknown']} unknown -> {opts['out']}")
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return report.exit_code()


if __name__ == "__main__":
    sys.exit(main())
