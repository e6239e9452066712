"""Deterministic reports: records of checks, serialised as sorted JSON or plain text."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import json

import numpy as np

from .core import Attribute, Variable
from .oracles import Certificate, ClassicalWitness, QuantumWitness, Verdict

PASS = "pass"
FAIL = "fail"
UNKNOWN = "unknown"

SIG_DIGITS = 12


def _num(x: float):
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    r = float(f"{x:.{SIG_DIGITS}g}")
    return 0.0 if r == 0 else r


def to_plain(obj):
    """Convert values into JSON-ready builtins with fixed float precision."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = [to_plain(v) for v in obj]
        if isinstance(obj, (set, frozenset)):
            items.sort(key=repr)
        return items
    if isinstance(obj, Certificate):
        return {"name": obj.name, "payload": to_plain(obj.payload)}
    if isinstance(obj, Verdict):
        return verdict_dict(obj)
    if isinstance(obj, Attribute):
        return obj.label or obj.fingerprint()[:12]
    if isinstance(obj, Variable):
        return obj.name or [to_plain(a) for a in obj]
    return repr(obj)


def witness_dict(w) -> dict | None:
    if w is None:
        return None
    if isinstance(w, ClassicalWitness):
        items = sorted(w.mapping.items(), key=lambda kv: repr(kv[0]))
        return {"kind": "function", "mapping": [[to_plain(k), to_plain(v)] for k, v in items]}
    if isinstance(w, QuantumWitness):
        out = {"kind": "gram", "rows": len(w.factors),
               "ancilla_dimension": int(w.ancillas.shape[1])}
        if all(w.output(r).size <= 64 for r in range(len(w.factors))):
            out["outputs"] = [to_plain(w.output(r)) for r in range(len(w.factors))]
        out["ancilla_gram"] = to_plain(w.ancillas.conj() @ w.ancillas.T)
        return out
    return {"kind": type(w).__name__}


def verdict_dict(v: Verdict) -> dict:
    detail = {k: val for k, val in v.detail.items()}
    return {
        "kind": v.kind,
        "certificate": to_plain(v.certificate),
        "witness": witness_dict(v.witness),
        "detail": to_plain(detail),
    }


@dataclass
class Record:
    operation: str
    inputs: dict
    status: str
    verdict: Verdict | None = None
    result: object = None
    note: str = ""
    seconds: float | None = None

    def as_dict(self, timings: bool) -> dict:
        d = {"operation": self.operation, "inputs": to_plain(self.inputs), "status": self.status,
             "verdict": verdict_dict(self.verdict) if self.verdict is not None else None,
             "result": to_plain(self.result), "note": self.note}
        if timings and self.seconds is not None:
            d["wall_seconds"] = _num(self.seconds)
        return d


@dataclass
class Report:
    command: list[str]
    seed: int
    version: str
    model: str | None = None
    records: list[Record] = field(default_factory=list)

    def add(self, record: Record) -> Record:
        self.records.append(record)
        return record

    def summary(self) -> dict:
        counts = {PASS: 0, FAIL: 0, UNKNOWN: 0}
        for r in self.records:
            counts[r.status] = counts.get(r.status, 0) + 1
        counts["total"] = len(self.records)
        return counts

    def exit_code(self) -> int:
        s = self.summary()
        if s[FAIL]:
            return 1
        if s[UNKNOWN]:
            return 3
        return 0

    def as_dict(self, timings: bool = False) -> dict:
        return {"tool": "constructor-kit", "version": self.version, "command": self.command,
                "seed": self.seed, "model": self.model,
                "records": [r.as_dict(timings) for r in self.records],
                "summary": self.summary()}


def emit_report(report: Report, fmt: str = "text", timings: bool = False) -> bytes:
    """Serialise a report; identical inputs give identical bytes."""
    data = report.as_dict(timings)
    if fmt == "json":
        return (json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()
    lines = [f"constructor-kit {data['version']}  seed={data['seed']}  model={data['model']}",
             "command: " + " ".join(data["command"])]
    for r in data["records"]:
        head = f"[{r['status'].upper()}] {r['operation']}"
        if r["inputs"]:
            head += " " + json.dumps(r["inputs"], sort_keys=True, ensure_ascii=False)
        lines.append(head)
        v = r["verdict"]
        if v is not None:
            line = f"    verdict: {v['kind']}"
            if v["certificate"]:
                line += f"  certificate: {v['certificate']['name']} " + json.dumps(
                    v["certificate"]["payload"], sort_keys=True, ensure_ascii=False)
            lines.append(line)
        if r["result"] is not None:
            lines.append("    result: " + json.dumps(r["result"], sort_keys=True, ensure_ascii=False))
        if r["note"]:
            lines.append(f"    note: {r['note']}")
        if "wall_seconds" in r:
            lines.append(f"    wall: {r['wall_seconds']}s")
    s = data["summary"]
    lines.append(f"summary: {s['pass']} pass, {s['fail']} fail, {s['unknown']} unknown "
                 f"({s['total']} total)")
    return ("\n".join(lines) + "\n").encode()
