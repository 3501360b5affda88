"""Object-oriented policy model and rule semantics with unknown values.

Classes declare reference-typed or Boolean fields with multiplicities one,
optional, or many; every class implicitly carries a String ``id`` field.
Any stored field value may be the ``unknown`` placeholder (the value exists
but is not known), which is distinct from None (an optional field holding
nothing).  Path navigation and the truth values of atomic conditions and
constraints propagate unknowns into the three-valued logic of
:mod:`rebac_miner.tvl`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Union

from rebac_miner.tvl import TruthValue, kleene_not

F, U, T = TruthValue.F, TruthValue.U, TruthValue.T

BOOLEAN = "Boolean"
STRING = "String"
ID_FIELD = "id"


class ModelError(ValueError):
    """A class model, object model, or rule fails its well-formedness rules."""


class _Unknown:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "unknown"


UNKNOWN = _Unknown()

# A field/navigation value: an object id or Boolean atom, None (optional
# field holding nothing), UNKNOWN, or a frozenset of atoms for many-valued
# fields (navigation results may additionally contain UNKNOWN in sets).
Atom = Union[str, bool]
Value = Union[str, bool, None, _Unknown, frozenset]

PathT = tuple[str, ...]


def path_text(path: PathT) -> str:
    return ".".join(path) if path else "<self>"


class Multiplicity(str, enum.Enum):
    ONE = "one"
    OPTIONAL = "optional"
    MANY = "many"


@dataclass(frozen=True)
class FieldDecl:
    type: str
    multiplicity: Multiplicity


@dataclass(frozen=True)
class ClassModel:
    """Class name -> field name -> declaration.  ``id`` is implicit."""

    classes: Mapping[str, Mapping[str, FieldDecl]]

    def __post_init__(self):
        for cls, fields in self.classes.items():
            if cls in (BOOLEAN, STRING):
                raise ModelError(f"reserved class name: {cls}")
            for name, decl in fields.items():
                if name == ID_FIELD:
                    raise ModelError(f"{cls}.{name}: 'id' is implicit and reserved")
                if decl.type == BOOLEAN:
                    if decl.multiplicity is not Multiplicity.ONE:
                        raise ModelError(
                            f"{cls}.{name}: Boolean fields must have multiplicity one"
                        )
                elif decl.type not in self.classes:
                    raise ModelError(f"{cls}.{name}: unknown type {decl.type!r}")

    def has_class(self, name: str) -> bool:
        return name in self.classes

    def field(self, cls: str, name: str) -> FieldDecl:
        if cls not in self.classes:
            raise ModelError(f"unknown class: {cls}")
        if name == ID_FIELD:
            return FieldDecl(STRING, Multiplicity.ONE)
        try:
            return self.classes[cls][name]
        except KeyError:
            raise ModelError(f"unknown field: {cls}.{name}") from None

    def fields_of(self, cls: str) -> tuple[tuple[str, FieldDecl], ...]:
        if cls not in self.classes:
            raise ModelError(f"unknown class: {cls}")
        return tuple(sorted(self.classes[cls].items()))


def path_type(cm: ClassModel, start: str, path: PathT) -> tuple[str, Multiplicity]:
    """Terminal type and overall multiplicity of a path from ``start``.

    The empty path denotes the object itself.  The overall multiplicity is
    many if any hop is many, one if all hops are one, optional otherwise.
    """
    if not cm.has_class(start):
        raise ModelError(f"unknown class: {start}")
    current = start
    mult = Multiplicity.ONE
    for i, name in enumerate(path):
        if current in (BOOLEAN, STRING):
            raise ModelError(
                f"path {path_text(path)} navigates through non-class type {current}"
            )
        decl = cm.field(current, name)
        if decl.multiplicity is Multiplicity.MANY:
            mult = Multiplicity.MANY
        elif decl.multiplicity is Multiplicity.OPTIONAL and mult is not Multiplicity.MANY:
            mult = Multiplicity.OPTIONAL
        current = decl.type
    return current, mult


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    type: str
    fields: Mapping[str, Value]


class ObjectModel:
    """A set of objects with globally unique ids.

    Immutable after construction; navigation results are memoized.
    """

    def __init__(self, objects: Iterable[ObjectInstance]):
        self._by_id: dict[str, ObjectInstance] = {}
        by_type: dict[str, list[ObjectInstance]] = {}
        for obj in objects:
            if obj.id in self._by_id:
                raise ModelError(f"duplicate object id: {obj.id}")
            self._by_id[obj.id] = obj
            by_type.setdefault(obj.type, []).append(obj)
        self._by_type = {
            cls: tuple(sorted(objs, key=lambda o: o.id))
            for cls, objs in by_type.items()
        }
        self._nav_cache: dict[tuple[str, PathT], Value] = {}

    def __iter__(self):
        return iter(self.objects())

    def __len__(self):
        return len(self._by_id)

    def objects(self) -> tuple[ObjectInstance, ...]:
        return tuple(self._by_id[i] for i in sorted(self._by_id))

    def get(self, oid: str) -> ObjectInstance:
        try:
            return self._by_id[oid]
        except KeyError:
            raise ModelError(f"unknown object id: {oid}") from None

    def has(self, oid: str) -> bool:
        return oid in self._by_id

    def objects_of(self, cls: str) -> tuple[ObjectInstance, ...]:
        return self._by_type.get(cls, ())

    def field_value(self, oid: str, name: str) -> Value:
        obj = self.get(oid)
        if name == ID_FIELD:
            return obj.id
        try:
            return obj.fields[name]
        except KeyError:
            raise ModelError(f"object {oid} has no field {name!r}") from None


def validate_object_model(cm: ClassModel, om: ObjectModel) -> None:
    """Check every object against the class model's shape rules."""
    for obj in om.objects():
        if not cm.has_class(obj.type):
            raise ModelError(f"object {obj.id} has unknown type {obj.type}")
        declared = dict(cm.fields_of(obj.type))
        for name in obj.fields:
            if name not in declared:
                raise ModelError(f"object {obj.id} has undeclared field {name!r}")
        for name, decl in declared.items():
            if name not in obj.fields:
                raise ModelError(f"object {obj.id} is missing field {name!r}")
            value = obj.fields[name]
            if value is UNKNOWN:
                continue
            if decl.multiplicity is Multiplicity.MANY:
                if not isinstance(value, frozenset):
                    raise ModelError(f"{obj.id}.{name}: many-valued field needs a set")
                if UNKNOWN in value:
                    raise ModelError(
                        f"{obj.id}.{name}: unknown cannot appear inside a stored set"
                    )
                for el in value:
                    _check_atom(cm, om, obj, name, decl, el)
            elif value is None:
                if decl.multiplicity is not Multiplicity.OPTIONAL:
                    raise ModelError(f"{obj.id}.{name}: None needs multiplicity optional")
            else:
                _check_atom(cm, om, obj, name, decl, value)


def _check_atom(cm, om, obj, name, decl, value) -> None:
    if decl.type == BOOLEAN:
        if not isinstance(value, bool):
            raise ModelError(f"{obj.id}.{name}: expected a Boolean, got {value!r}")
    else:
        if not isinstance(value, str) or not om.has(value):
            raise ModelError(f"{obj.id}.{name}: dangling reference {value!r}")
        if om.get(value).type != decl.type:
            raise ModelError(
                f"{obj.id}.{name}: reference {value!r} has type "
                f"{om.get(value).type}, expected {decl.type}"
            )


def nav(cm: ClassModel, om: ObjectModel, oid: str, path: PathT) -> Value:
    """Dereference ``path`` starting from the object ``oid``.

    Hitting unknown yields unknown for one/optional paths and contributes
    an unknown element for many paths; hitting None yields None for
    one/optional paths and contributes nothing for many paths.  The empty
    path is the object itself.
    """
    path = tuple(path)
    key = (oid, path)
    try:
        return om._nav_cache[key]
    except KeyError:
        pass
    start = om.get(oid).type
    _, mult = path_type(cm, start, path)
    result = _nav_scalar(cm, om, oid, start, path)
    if mult is Multiplicity.MANY and not isinstance(result, frozenset):
        if result is UNKNOWN:
            result = frozenset({UNKNOWN})
        elif result is None:
            result = frozenset()
        else:  # unreachable: a many path always crosses a many hop
            result = frozenset({result})
    om._nav_cache[key] = result
    return result


def _nav_scalar(cm, om, oid: str, cls: str, path: PathT) -> Value:
    if not path:
        return oid
    decl = cm.field(cls, path[0])
    value = om.field_value(oid, path[0])
    rest = path[1:]
    if value is UNKNOWN:
        return frozenset({UNKNOWN}) if decl.multiplicity is Multiplicity.MANY else UNKNOWN
    if value is None:
        return None
    if decl.multiplicity is Multiplicity.MANY:
        out: set = set()
        for el in value:
            _merge_into(out, _nav_scalar(cm, om, el, decl.type, rest)
                        if el is not UNKNOWN else UNKNOWN)
        return frozenset(out)
    if decl.type == BOOLEAN:
        return value  # type-checking guarantees rest is empty
    return _nav_scalar(cm, om, value, decl.type, rest)


def _merge_into(out: set, sub: Value) -> None:
    if sub is UNKNOWN:
        out.add(UNKNOWN)
    elif sub is None:
        pass
    elif isinstance(sub, frozenset):
        out |= sub
    else:
        out.add(sub)


@dataclass(frozen=True)
class AtomicCondition:
    """path op value, where op is ``in`` (one/optional path, set of atoms)
    or ``contains`` (many path, single atom)."""

    path: PathT
    op: str
    value: object  # frozenset[Atom] for "in", Atom for "contains"
    negated: bool = False

    def __post_init__(self):
        if not self.path:
            raise ModelError("condition paths must be non-empty")
        if self.op == "in":
            if not isinstance(self.value, frozenset):
                raise ModelError("'in' conditions take a set of atoms")
        elif self.op == "contains":
            if isinstance(self.value, (frozenset, set)):
                raise ModelError("'contains' conditions take a single atom")
        else:
            raise ModelError(f"unknown condition operator: {self.op!r}")

    @property
    def sort_key(self):
        return (self.path, self.op, self.negated, value_sort_key(self.value))

    def text(self, prefix: str) -> str:
        p = f"{prefix}.{'.'.join(self.path)}"
        if self.op == "contains":
            body = f"{p} contains {_atom_text(self.value)}"
        else:
            atoms = sorted(self.value, key=value_sort_key)
            if len(atoms) == 1:
                body = f"{p}={_atom_text(atoms[0])}"
            else:
                body = f"{p} in {{{','.join(_atom_text(a) for a in atoms)}}}"
        return f"not({body})" if self.negated else body


CONSTRAINT_OPS = ("equal", "in", "contains", "supseteq", "subseteq")


@dataclass(frozen=True)
class AtomicConstraint:
    """Relates a subject-side path to a resource-side path."""

    path1: PathT
    op: str
    path2: PathT
    negated: bool = False

    def __post_init__(self):
        if self.op not in CONSTRAINT_OPS:
            raise ModelError(f"unknown constraint operator: {self.op!r}")

    @property
    def sort_key(self):
        return (self.path1, self.op, self.path2, self.negated)

    def text(self, s_prefix: str = "subject", r_prefix: str = "resource") -> str:
        symbol = {
            "equal": "=", "in": "in", "contains": "contains",
            "supseteq": "supseteq", "subseteq": "subseteq",
        }[self.op]
        p1 = s_prefix + ("." + ".".join(self.path1) if self.path1 else "")
        p2 = r_prefix + ("." + ".".join(self.path2) if self.path2 else "")
        body = f"{p1} {symbol} {p2}"
        return f"not({body})" if self.negated else body


def value_sort_key(value) -> tuple:
    """Stable ordering over mixed Boolean/id atoms and sets of them."""
    if isinstance(value, bool):
        return (0, str(value))
    if isinstance(value, frozenset):
        return (2, tuple(sorted(value_sort_key(v) for v in value)))
    return (1, str(value))


def _atom_text(atom: Atom) -> str:
    if isinstance(atom, bool):
        return "true" if atom else "false"
    return str(atom)


@dataclass(frozen=True)
class Rule:
    subject_type: str
    subject_condition: frozenset[AtomicCondition]
    resource_type: str
    resource_condition: frozenset[AtomicCondition]
    constraint: frozenset[AtomicConstraint]
    actions: frozenset[str]

    def __post_init__(self):
        if not self.actions:
            raise ModelError("rules must carry at least one action")

    @property
    def sort_key(self):
        return (
            self.subject_type,
            self.resource_type,
            tuple(sorted(c.sort_key for c in self.subject_condition)),
            tuple(sorted(c.sort_key for c in self.resource_condition)),
            tuple(sorted(c.sort_key for c in self.constraint)),
            tuple(sorted(self.actions)),
        )

    def atomics(self):
        """(slot, atomic) pairs in canonical order: conditions, constraints."""
        out = [("subject", c) for c in sorted(self.subject_condition, key=lambda c: c.sort_key)]
        out += [("resource", c) for c in sorted(self.resource_condition, key=lambda c: c.sort_key)]
        out += [("constraint", c) for c in sorted(self.constraint, key=lambda c: c.sort_key)]
        return tuple(out)

    def text(self) -> str:
        sc = "; ".join(c.text("subject") for c in sorted(self.subject_condition, key=lambda c: c.sort_key)) or "true"
        rc = "; ".join(c.text("resource") for c in sorted(self.resource_condition, key=lambda c: c.sort_key)) or "true"
        con = "; ".join(c.text() for c in sorted(self.constraint, key=lambda c: c.sort_key)) or "true"
        acts = ",".join(sorted(self.actions))
        return f"<{self.subject_type}; {sc}; {self.resource_type}; {rc}; {con}; {{{acts}}}>"


class SraTuple(NamedTuple):
    subject: str
    resource: str
    action: str


@dataclass(frozen=True)
class Policy:
    class_model: ClassModel
    object_model: ObjectModel
    actions: frozenset[str]
    rules: tuple[Rule, ...]


@dataclass(frozen=True)
class AclPolicy:
    class_model: ClassModel
    object_model: ObjectModel
    actions: frozenset[str]
    au: frozenset[SraTuple]


def validate_rule(cm: ClassModel, rule: Rule) -> None:
    for cls, conditions in (
        (rule.subject_type, rule.subject_condition),
        (rule.resource_type, rule.resource_condition),
    ):
        if not cm.has_class(cls):
            raise ModelError(f"unknown class in rule: {cls}")
        for ac in conditions:
            ptype, mult = path_type(cm, cls, ac.path)
            expected = "contains" if mult is Multiplicity.MANY else "in"
            if ac.op != expected:
                raise ModelError(
                    f"condition {ac.text('x')}: operator {ac.op!r} does not match"
                    f" path multiplicity {mult.value}"
                )
            atoms = ac.value if isinstance(ac.value, frozenset) else {ac.value}
            for atom in atoms:
                if (ptype == BOOLEAN) != isinstance(atom, bool):
                    raise ModelError(
                        f"condition {ac.text('x')}: constant {atom!r} does not"
                        f" match path type {ptype}"
                    )
    for con in rule.constraint:
        t1, m1 = path_type(cm, rule.subject_type, con.path1)
        t2, m2 = path_type(cm, rule.resource_type, con.path2)
        if t1 != t2:
            raise ModelError(f"constraint {con.text()}: path types differ ({t1} vs {t2})")
        expected = _constraint_op(m1, m2)
        if con.op not in expected:
            raise ModelError(
                f"constraint {con.text()}: operator {con.op!r} incompatible with"
                f" multiplicities ({m1.value}, {m2.value})"
            )


def _constraint_op(m1: Multiplicity, m2: Multiplicity) -> tuple[str, ...]:
    many1 = m1 is Multiplicity.MANY
    many2 = m2 is Multiplicity.MANY
    if many1 and many2:
        return ("supseteq", "subseteq")
    if many1:
        return ("contains",)
    if many2:
        return ("in",)
    return ("equal",)


def _contains_unknown(value: Value) -> bool:
    return isinstance(value, frozenset) and UNKNOWN in value


def tval_condition(
    cm: ClassModel, om: ObjectModel, oid: str, ac: AtomicCondition
) -> TruthValue:
    """Three-valued truth of an atomic condition for one object."""
    value = nav(cm, om, oid, ac.path)
    if isinstance(value, frozenset):
        if ac.value in value:
            base = T
        elif UNKNOWN in value:
            base = U
        else:
            base = F
    elif value is UNKNOWN:
        base = U
    else:
        base = T if value in ac.value else F
    if not ac.negated:
        return base
    if base is T and _contains_unknown(value):
        return U
    return kleene_not(base)


def _membership(atom: Value, atoms: frozenset) -> TruthValue:
    if atom is UNKNOWN:
        # Undecidable unless the set is definitely empty.
        return F if not atoms else U
    if atom is None:
        return F  # sets hold atoms only; nothing-at-all is never a member
    if atom in atoms:
        return T
    return U if UNKNOWN in atoms else F


def _subset(a: frozenset, b: frozenset) -> TruthValue:
    """a subseteq b over sets that may contain unknown elements.

    Definitely true when a is fully known and already inside b's known
    part; definitely false when b is fully known and a known element of a
    falls outside it; everything else is unknown.
    """
    a_known = a - {UNKNOWN}
    b_known = b - {UNKNOWN}
    if UNKNOWN not in a and a_known <= b_known:
        return T
    if UNKNOWN not in b and not (a_known <= b_known):
        return F
    return U


def tval_constraint(
    cm: ClassModel, om: ObjectModel, s_oid: str, r_oid: str, con: AtomicConstraint
) -> TruthValue:
    """Three-valued truth of an atomic constraint for a subject/resource pair."""
    v1 = nav(cm, om, s_oid, con.path1)
    v2 = nav(cm, om, r_oid, con.path2)
    base = _constraint_base(con.op, v1, v2)
    if not con.negated:
        return base
    if base is T and (_contains_unknown(v1) or _contains_unknown(v2)):
        return U
    return kleene_not(base)


def _constraint_base(op: str, v1: Value, v2: Value) -> TruthValue:
    if op == "equal":
        if v1 is UNKNOWN or v2 is UNKNOWN:
            return U
        return T if v1 == v2 else F
    if op == "in":
        return _membership(v1, v2)
    if op == "contains":
        return _membership(v2, v1)
    if op == "supseteq":
        return _subset(v2, v1)
    if op == "subseteq":
        return _subset(v1, v2)
    raise ModelError(f"unknown constraint operator: {op!r}")


def _all_true(values) -> bool:
    return all(v is T for v in values)


def satisfies(cm: ClassModel, om: ObjectModel, t: SraTuple, rule: Rule) -> bool:
    """True iff every condition and constraint evaluates to exactly T and
    the types and action match; an unknown verdict never grants."""
    if t.action not in rule.actions:
        return False
    if om.get(t.subject).type != rule.subject_type:
        return False
    if om.get(t.resource).type != rule.resource_type:
        return False
    return (
        _all_true(tval_condition(cm, om, t.subject, ac) for ac in rule.subject_condition)
        and _all_true(tval_condition(cm, om, t.resource, ac) for ac in rule.resource_condition)
        and _all_true(tval_constraint(cm, om, t.subject, t.resource, c) for c in rule.constraint)
    )


def rule_meaning(cm: ClassModel, om: ObjectModel, rule: Rule) -> frozenset[SraTuple]:
    granted = []
    for s in om.objects_of(rule.subject_type):
        if not _all_true(
            tval_condition(cm, om, s.id, ac) for ac in rule.subject_condition
        ):
            continue
        for r in om.objects_of(rule.resource_type):
            if not _all_true(
                tval_condition(cm, om, r.id, ac) for ac in rule.resource_condition
            ):
                continue
            if _all_true(
                tval_constraint(cm, om, s.id, r.id, c) for c in rule.constraint
            ):
                granted.extend(SraTuple(s.id, r.id, a) for a in rule.actions)
    return frozenset(granted)


def meaning(policy: Policy) -> frozenset[SraTuple]:
    out: set[SraTuple] = set()
    for rule in policy.rules:
        out |= rule_meaning(policy.class_model, policy.object_model, rule)
    return frozenset(out)


def wsc(x) -> int:
    """Weighted structural complexity: path lengths plus constant counts,
    plus one per negation; rules add their action count; policies sum rules."""
    if isinstance(x, AtomicCondition):
        size = len(x.value) if isinstance(x.value, frozenset) else 1
        return len(x.path) + size + (1 if x.negated else 0)
    if isinstance(x, AtomicConstraint):
        return len(x.path1) + len(x.path2) + (1 if x.negated else 0)
    if isinstance(x, Rule):
        return (
            sum(wsc(c) for c in x.subject_condition)
            + sum(wsc(c) for c in x.resource_condition)
            + sum(wsc(c) for c in x.constraint)
            + len(x.actions)
        )
    if isinstance(x, Policy):
        return sum(wsc(r) for r in x.rules)
    raise TypeError(f"wsc undefined for {type(x).__name__}")


def policy_wsc(rules: Iterable[Rule]) -> int:
    return sum(wsc(r) for r in rules)


def sort_rules(rules: Iterable[Rule]) -> tuple[Rule, ...]:
    unique = {r.sort_key: r for r in rules}
    return tuple(unique[k] for k in sorted(unique))
