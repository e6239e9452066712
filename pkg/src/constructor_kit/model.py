"""JSON model files (``.ctm``): substrates, states, attributes, variables and oracle settings.

Example::

    {
      "name": "qubit",
      "substrates": [{"name": "q", "kind": "quantum", "dimension": 2}],
      "states": [{"name": "plus", "substrate": "q", "vector": [[0.7071067811865476, 0], [0.7071067811865476, 0]]}],
      "attributes": [
        {"name": "0", "substrate": "q", "rays": [[1, 0]], "preparable": true},
        {"name": "+", "substrate": "q", "rays": ["plus"]}
      ],
      "variables": [{"name": "Z", "attributes": ["0", "1"]}],
      "oracle": {"seed": 0, "restarts": 64}
    }

Vector entries are ``[re, im]`` pairs or plain reals.  Classical states are
integer labels (lists for composites).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Attribute, Substrate, Variable, piece_dense
from .errors import ParseError, ValidationError
from .oracles import OracleConfig

_CONFIG_KEYS = {f.name for f in dataclasses.fields(OracleConfig)} - {"use_numba"}


@dataclass
class Model:
    name: str
    substrates: dict[str, Substrate] = field(default_factory=dict)
    attributes: dict[str, Attribute] = field(default_factory=dict)
    variables: dict[str, Variable] = field(default_factory=dict)
    preparable: list[str] = field(default_factory=list)
    generic: list[str] = field(default_factory=list)
    config: OracleConfig = field(default_factory=OracleConfig)
    description: str = ""

    def preparables(self) -> list[Attribute]:
        return [self.attributes[n] for n in self.preparable]

    def attribute_name(self, attr: Attribute) -> str:
        for n, a in self.attributes.items():
            if a is attr:
                return n
        return attr.label or "?"

    def intrinsic_attributes(self) -> list[tuple[str, Attribute]]:
        """Declared nonempty attributes other than generic-resource markers."""
        return [(n, a) for n, a in self.attributes.items()
                if n not in self.generic and not a.is_empty]

    def candidates(self) -> list[Variable]:
        return list(self.variables.values())


def _complex_vector(raw, where: str) -> np.ndarray:
    vals = []
    for x in raw:
        if isinstance(x, (list, tuple)):
            if len(x) != 2:
                raise ValidationError("Vector", f"{where}: complex entries are [re, im] pairs")
            vals.append(complex(float(x[0]), float(x[1])))
        else:
            vals.append(complex(float(x)))
    return np.array(vals, dtype=np.complex128)


def _checked_vector(raw, sub: Substrate, where: str) -> np.ndarray:
    v = _complex_vector(raw, where)
    if v.shape[0] != sub.size:
        raise ValidationError("Dimension", f"{where}: expected {sub.size} entries, got {v.shape[0]}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValidationError("Norm", f"{where}: vector norm {np.linalg.norm(v):.12g} is not 1")
    return v


def _label(x):
    return tuple(x) if isinstance(x, list) else x


def _require(mapping, name, kind, where):
    if name not in mapping:
        raise ValidationError("UnresolvedName", f"{where}: unknown {kind} {name!r}")
    return mapping[name]


def _unique(names, kind):
    seen = set()
    for n in names:
        if n in seen:
            raise ValidationError("DuplicateName", f"duplicate {kind} name {n!r}")
        seen.add(n)


def model_from_dict(doc: dict, name: str = "model") -> Model:
    if not isinstance(doc, dict):
        raise ValidationError("Schema", "a model file must contain a JSON object")
    m = Model(doc.get("name", name), description=doc.get("description", ""))
    subs = doc.get("substrates", [])
    _unique([s.get("name") for s in subs], "substrate")
    for s in subs:
        where = f"substrate {s.get('name')!r}"
        if "composite" in s:
            parts = [_require(m.substrates, p, "substrate", where) for p in s["composite"]]
            m.substrates[s["name"]] = Substrate.compose(*parts, name=s["name"])
        elif s.get("kind") == "quantum":
            m.substrates[s["name"]] = Substrate.quantum(s["name"], int(s["dimension"]))
        elif s.get("kind") == "classical":
            m.substrates[s["name"]] = Substrate.classical(s["name"], int(s["states"]))
        else:
            raise ValidationError("Kind", f"{where}: kind must be 'quantum' or 'classical'")

    states: dict = {}
    _unique([s.get("name") for s in doc.get("states", [])], "state")
    for s in doc.get("states", []):
        where = f"state {s.get('name')!r}"
        sub = _require(m.substrates, s.get("substrate"), "substrate", where)
        if sub.is_quantum:
            states[s["name"]] = (sub, _checked_vector(s["vector"], sub, where))
        else:
            lab = _label(s["label"])
            if lab not in set(sub.state_labels()):
                raise ValidationError("Label", f"{where}: {lab!r} is not a state of {sub.name}")
            states[s["name"]] = (sub, lab)

    attrs = doc.get("attributes", [])
    _unique([a.get("name") for a in attrs], "attribute")
    for a in attrs:
        nm = a.get("name")
        where = f"attribute {nm!r}"
        if "product" in a:
            parts = [_require(m.attributes, p, "attribute", where) for p in a["product"]]
            sub = m.substrates.get(a.get("substrate")) if a.get("substrate") else None
            attr = Attribute.product(*parts, substrate=sub, label=nm)
        elif "union" in a:
            parts = [_require(m.attributes, p, "attribute", where) for p in a["union"]]
            attr = Attribute.union(*parts, label=nm)
        else:
            sub = _require(m.substrates, a.get("substrate"), "substrate", where)
            attr = _leaf_attribute(a, sub, states, where)
        m.attributes[nm] = attr
        if a.get("preparable"):
            m.preparable.append(nm)
        if a.get("generic"):
            m.generic.append(nm)

    vars_ = doc.get("variables", [])
    _unique([v.get("name") for v in vars_], "variable")
    for v in vars_:
        where = f"variable {v.get('name')!r}"
        members = tuple(_require(m.attributes, n, "attribute", where) for n in v["attributes"])
        labels = tuple(v["labels"]) if "labels" in v else tuple(v["attributes"])
        m.variables[v["name"]] = Variable(members, labels, name=v["name"])

    cfg = doc.get("oracle", {})
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ValidationError("Schema", f"unknown oracle settings {sorted(unknown)}")
    m.config = OracleConfig(**cfg)
    return m


def _leaf_attribute(a: dict, sub: Substrate, states: dict, where: str) -> Attribute:
    nm = a.get("name")
    if a.get("full"):
        return Attribute.full(sub, label=nm)
    if a.get("empty"):
        return Attribute.empty(sub, label=nm)
    if sub.is_quantum:
        def vec(entry):
            if isinstance(entry, str):
                ssub, v = _require(states, entry, "state", where)
                if not ssub.same_shape(sub):
                    raise ValidationError("Substrate", f"{where}: state {entry!r} lives elsewhere")
                return v
            return _checked_vector(entry, sub, where)
        if "rays" in a:
            return Attribute.rays(sub, [vec(e) for e in a["rays"]], label=nm)
        if "subspace" in a:
            basis = np.stack([vec(e) for e in a["subspace"]], axis=1)
            if np.max(np.abs(basis.conj().T @ basis - np.eye(basis.shape[1]))) > 1e-9:
                raise ValidationError("Orthonormal", f"{where}: subspace basis is not orthonormal")
            return Attribute.subspace(sub, basis, label=nm)
        raise ValidationError("Schema", f"{where}: quantum attributes need rays, subspace, full or empty")
    if "states" not in a:
        raise ValidationError("Schema", f"{where}: classical attributes need a states list")
    labels = []
    for e in a["states"]:
        if isinstance(e, str):
            ssub, lab = _require(states, e, "state", where)
            labels.append(lab)
        else:
            labels.append(_label(e))
    return Attribute.states(sub, labels, label=nm)


def loads(text: str, name: str = "model") -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return model_from_dict(doc, name)


def load_model(path) -> Model:
    p = Path(path)
    return loads(p.read_text(), name=p.stem)


# --------------------------------------------------------------------------- dumping


def _enc_vector(v: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in v]


def _enc_substrate(s: Substrate) -> dict:
    if s.is_composite:
        return {"name": s.name, "composite": [p.name for p in s.parts]}
    if s.is_quantum:
        return {"name": s.name, "kind": "quantum", "dimension": s.size}
    return {"name": s.name, "kind": "classical", "states": s.size}


def _enc_label(x):
    return list(x) if isinstance(x, tuple) else x


def model_to_dict(m: Model) -> dict:
    subs, seen = [], set()
    for s in m.substrates.values():
        for part in (s.parts if s.is_composite else ()):
            if part.name not in seen:
                subs.append(_enc_substrate(part))
                seen.add(part.name)
        if s.name not in seen:
            subs.append(_enc_substrate(s))
            seen.add(s.name)
    sub_name = {}
    for n, s in m.substrates.items():
        sub_name.setdefault((s.kind, s.dims), n)
    attrs = []
    for n, a in m.attributes.items():
        entry = {"name": n, "substrate": sub_name.get((a.substrate.kind, a.substrate.dims),
                                                     a.substrate.name)}
        if a.is_empty:
            entry["empty"] = True
        elif not a.is_quantum:
            entry["states"] = [_enc_label(x) for x in sorted(a.state_set, key=repr)]
        elif len(a.pieces) == 1 and len(a.pieces[0]) == 1 and a.pieces[0][0].basis.shape[1] > 1:
            entry["subspace"] = [_enc_vector(c) for c in a.pieces[0][0].basis.T]
        elif all(all(f.basis.shape[1] == 1 for f in p) for p in a.pieces):
            entry["rays"] = [_enc_vector(piece_dense(p)[:, 0]) for p in a.pieces]
        else:
            entry["subspace"] = [_enc_vector(c) for c in a.span().T]
        if n in m.preparable:
            entry["preparable"] = True
        if n in m.generic:
            entry["generic"] = True
        attrs.append(entry)
    names = {id(a): n for n, a in m.attributes.items()}
    variables = []
    for n, v in m.variables.items():
        variables.append({"name": n, "attributes": [names[id(a)] for a in v],
                          "labels": [v.label_of(i) for i in range(len(v))]})
    cfg = {k: getattr(m.config, k) for k in sorted(_CONFIG_KEYS)}
    return {"name": m.name, "description": m.description, "substrates": subs,
            "attributes": attrs, "variables": variables, "oracle": cfg}


def dumps(m: Model) -> str:
    return json.dumps(model_to_dict(m), indent=2, sort_keys=True)


def semantically_equal(a: Model, b: Model) -> bool:
    if set(a.attributes) != set(b.attributes) or set(a.variables) != set(b.variables):
        return False
    if any(not a.attributes[n].same_as(b.attributes[n]) for n in a.attributes):
        return False
    for n, v in a.variables.items():
        w = b.variables[n]
        if len(v) != len(w) or any(not x.same_as(y) for x, y in zip(v, w)):
            return False
    return (set(a.preparable) == set(b.preparable) and a.config == b.config)
