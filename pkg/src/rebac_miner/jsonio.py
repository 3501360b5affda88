"""JSON document formats and CSV dataset format.

Encodings: the unknown placeholder is the reserved object
``{"$unknown": true}``; None is JSON null; many-valued fields are sorted
arrays; paths are dot-joined text with the implicit trailing id omitted;
rules carry explicit "negated" booleans; an authorization list is an array
of [subjectId, resourceId, action] triples.  Serialization is canonical
(sorted keys, sorted collections), so identical inputs produce identical
bytes.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Iterable

from rebac_miner.metrics import SimilarityReport
from rebac_miner.model import (
    UNKNOWN,
    AclPolicy,
    AtomicCondition,
    AtomicConstraint,
    ClassModel,
    FieldDecl,
    ModelError,
    Multiplicity,
    ObjectInstance,
    ObjectModel,
    Rule,
    SraTuple,
    validate_object_model,
    validate_rule,
    value_sort_key,
)
from rebac_miner.tvl import (
    FeatureId,
    FeatureVector,
    LabeledDataset,
    LabeledRow,
    TruthValue,
)

UNKNOWN_JSON = {"$unknown": True}


class SchemaError(ValueError):
    """An input document does not match its expected shape."""


def dumps(document) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def _require(condition: bool, message: str):
    if not condition:
        raise SchemaError(message)


def _as_obj(value, what: str) -> dict:
    _require(isinstance(value, dict), f"{what}: expected an object")
    return value


# --- class model -----------------------------------------------------------


def class_model_to_json(cm: ClassModel) -> dict:
    return {
        "classes": {
            cls: {
                "fields": {
                    name: {"type": decl.type, "multiplicity": decl.multiplicity.value}
                    for name, decl in fields.items()
                }
            }
            for cls, fields in cm.classes.items()
        }
    }


def class_model_from_json(document) -> ClassModel:
    doc = _as_obj(document, "class model")
    classes = _as_obj(doc.get("classes"), "class model: classes")
    out = {}
    for cls, body in classes.items():
        fields = _as_obj(body, f"class {cls}").get("fields", {})
        decls = {}
        for name, spec in _as_obj(fields, f"class {cls}: fields").items():
            spec = _as_obj(spec, f"field {cls}.{name}")
            _require("type" in spec, f"field {cls}.{name}: missing type")
            mult = spec.get("multiplicity", "one")
            try:
                decls[name] = FieldDecl(str(spec["type"]), Multiplicity(mult))
            except ValueError:
                raise SchemaError(
                    f"field {cls}.{name}: bad multiplicity {mult!r}"
                ) from None
        out[cls] = decls
    try:
        return ClassModel(out)
    except ModelError as exc:
        raise SchemaError(str(exc)) from exc


# --- object model ----------------------------------------------------------


def _value_to_json(value):
    if value is UNKNOWN:
        return UNKNOWN_JSON
    if isinstance(value, frozenset):
        return sorted(value, key=value_sort_key)
    return value


def _value_from_json(raw):
    if isinstance(raw, dict):
        _require(raw == UNKNOWN_JSON, f"bad value object: {raw!r}")
        return UNKNOWN
    if isinstance(raw, list):
        for el in raw:
            _require(
                isinstance(el, (str, bool)), f"bad set element: {el!r}"
            )
        return frozenset(raw)
    _require(
        raw is None or isinstance(raw, (str, bool)), f"bad field value: {raw!r}"
    )
    return raw


def object_model_to_json(om: ObjectModel) -> dict:
    return {
        "objects": [
            {
                "id": obj.id,
                "type": obj.type,
                "fields": {
                    name: _value_to_json(value)
                    for name, value in sorted(obj.fields.items())
                },
            }
            for obj in om.objects()
        ]
    }


def object_model_from_json(document, cm: ClassModel | None = None) -> ObjectModel:
    doc = _as_obj(document, "object model")
    raw_objects = doc.get("objects")
    _require(isinstance(raw_objects, list), "object model: objects must be a list")
    instances = []
    for raw in raw_objects:
        raw = _as_obj(raw, "object")
        _require(isinstance(raw.get("id"), str), "object: missing id")
        _require(isinstance(raw.get("type"), str), f"object {raw.get('id')}: missing type")
        fields = {
            name: _value_from_json(value)
            for name, value in _as_obj(raw.get("fields", {}), "object fields").items()
        }
        instances.append(ObjectInstance(raw["id"], raw["type"], fields))
    try:
        om = ObjectModel(instances)
        if cm is not None:
            validate_object_model(cm, om)
    except ModelError as exc:
        raise SchemaError(str(exc)) from exc
    return om


# --- policies --------------------------------------------------------------


def _path_to_text(path) -> str:
    return ".".join(path)


def _path_from_text(text) -> tuple[str, ...]:
    _require(isinstance(text, str), f"bad path: {text!r}")
    return tuple(p for p in text.split(".") if p)


def _condition_to_json(ac: AtomicCondition) -> dict:
    value = (
        sorted(ac.value, key=value_sort_key)
        if isinstance(ac.value, frozenset)
        else ac.value
    )
    return {
        "path": _path_to_text(ac.path),
        "op": ac.op,
        "value": value,
        "negated": ac.negated,
    }


def _condition_from_json(raw) -> AtomicCondition:
    raw = _as_obj(raw, "condition")
    for key in ("path", "op", "value"):
        _require(key in raw, f"condition: missing {key}")
    value = raw["value"]
    if raw["op"] == "in":
        _require(isinstance(value, list), "'in' conditions take a list of atoms")
        value = frozenset(value)
    try:
        return AtomicCondition(
            _path_from_text(raw["path"]), raw["op"], value, bool(raw.get("negated"))
        )
    except ModelError as exc:
        raise SchemaError(str(exc)) from exc


def _constraint_to_json(con: AtomicConstraint) -> dict:
    return {
        "path1": _path_to_text(con.path1),
        "op": con.op,
        "path2": _path_to_text(con.path2),
        "negated": con.negated,
    }


def _constraint_from_json(raw) -> AtomicConstraint:
    raw = _as_obj(raw, "constraint")
    for key in ("path1", "op", "path2"):
        _require(key in raw, f"constraint: missing {key}")
    try:
        return AtomicConstraint(
            _path_from_text(raw["path1"]),
            raw["op"],
            _path_from_text(raw["path2"]),
            bool(raw.get("negated")),
        )
    except ModelError as exc:
        raise SchemaError(str(exc)) from exc


def rule_to_json(rule: Rule) -> dict:
    return {
        "subjectType": rule.subject_type,
        "subjectCondition": [
            _condition_to_json(c)
            for c in sorted(rule.subject_condition, key=lambda c: c.sort_key)
        ],
        "resourceType": rule.resource_type,
        "resourceCondition": [
            _condition_to_json(c)
            for c in sorted(rule.resource_condition, key=lambda c: c.sort_key)
        ],
        "constraint": [
            _constraint_to_json(c)
            for c in sorted(rule.constraint, key=lambda c: c.sort_key)
        ],
        "actions": sorted(rule.actions),
    }


def rule_from_json(raw) -> Rule:
    raw = _as_obj(raw, "rule")
    for key in ("subjectType", "resourceType", "actions"):
        _require(key in raw, f"rule: missing {key}")
    actions = raw["actions"]
    _require(
        isinstance(actions, list) and actions, "rule: actions must be a non-empty list"
    )
    try:
        return Rule(
            raw["subjectType"],
            frozenset(_condition_from_json(c) for c in raw.get("subjectCondition", [])),
            raw["resourceType"],
            frozenset(_condition_from_json(c) for c in raw.get("resourceCondition", [])),
            frozenset(_constraint_from_json(c) for c in raw.get("constraint", [])),
            frozenset(actions),
        )
    except ModelError as exc:
        raise SchemaError(str(exc)) from exc


def rules_to_json(actions: Iterable[str], rules: Iterable[Rule]) -> dict:
    return {
        "actions": sorted(actions),
        "rules": [rule_to_json(r) for r in rules],
    }


def rules_from_json(document, cm: ClassModel | None = None):
    doc = _as_obj(document, "policy")
    _require(isinstance(doc.get("rules"), list), "policy: rules must be a list")
    rules = tuple(rule_from_json(r) for r in doc["rules"])
    actions = frozenset(doc.get("actions", []))
    if cm is not None:
        try:
            for rule in rules:
                validate_rule(cm, rule)
        except ModelError as exc:
            raise SchemaError(str(exc)) from exc
    return actions, rules


# --- authorizations --------------------------------------------------------


def au_to_json(au: Iterable[SraTuple]) -> list:
    return [[t.subject, t.resource, t.action] for t in sorted(au)]


def au_from_json(document, om: ObjectModel | None = None) -> frozenset[SraTuple]:
    _require(isinstance(document, list), "authorizations: expected an array of triples")
    out = []
    for raw in document:
        _require(
            isinstance(raw, list)
            and len(raw) == 3
            and all(isinstance(x, str) for x in raw),
            f"authorizations: bad triple {raw!r}",
        )
        t = SraTuple(*raw)
        if om is not None:
            _require(om.has(t.subject), f"authorizations: unknown subject {t.subject}")
            _require(om.has(t.resource), f"authorizations: unknown resource {t.resource}")
        out.append(t)
    return frozenset(out)


def acl_from_documents(cm_doc, om_doc, au_doc) -> AclPolicy:
    cm = class_model_from_json(cm_doc)
    om = object_model_from_json(om_doc, cm)
    au = au_from_json(au_doc, om)
    actions = frozenset(t.action for t in au)
    return AclPolicy(cm, om, actions, au)


# --- similarity report ------------------------------------------------------


def report_to_json(report: SimilarityReport) -> dict:
    return {
        "syntactic": report.syntactic,
        "semantic": report.semantic,
        "wscMined": report.wsc_mined,
        "wscReference": report.wsc_reference,
        "perRuleBestMatch": [
            {"rule": rule, "bestMatch": match, "score": score}
            for rule, match, score in report.per_rule_best_match
        ],
    }


def report_from_json(document) -> SimilarityReport:
    doc = _as_obj(document, "report")
    return SimilarityReport(
        syntactic=float(doc["syntactic"]),
        semantic=float(doc["semantic"]),
        per_rule_best_match=tuple(
            (m["rule"], m["bestMatch"], float(m["score"]))
            for m in doc.get("perRuleBestMatch", [])
        ),
        wsc_mined=int(doc["wscMined"]),
        wsc_reference=int(doc["wscReference"]),
    )


# --- datasets as CSV ---------------------------------------------------------


def dataset_to_csv(dataset: LabeledDataset) -> str:
    """Header row of feature labels plus a final label column."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([f.label or f"f{f.index}" for f in dataset.features] + ["label"])
    for row in dataset.rows:
        writer.writerow([str(v) for v in row.vector.values] + [str(row.label)])
    return buffer.getvalue()


def dataset_from_csv(text: str) -> LabeledDataset:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r]
    _require(len(rows) >= 1, "dataset: missing header row")
    header = rows[0]
    _require(len(header) >= 2, "dataset: need at least one feature and the label")
    features = tuple(
        FeatureId(i, label.strip(), 1) for i, label in enumerate(header[:-1])
    )
    out = []
    for line, raw in enumerate(rows[1:], start=2):
        _require(
            len(raw) == len(header), f"dataset line {line}: expected {len(header)} cells"
        )
        try:
            cells = tuple(TruthValue.from_text(c) for c in raw[:-1])
            label = TruthValue.from_text(raw[-1])
        except ValueError as exc:
            raise SchemaError(f"dataset line {line}: {exc}") from exc
        out.append(LabeledRow(FeatureVector(cells), label))
    return LabeledDataset(features, tuple(out))
