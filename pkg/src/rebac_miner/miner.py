"""The mining pipeline: authorization lists in, concise rule sets out.

Phase 1 decomposes the problem per (subject type, resource type, action),
learns one DNF formula per task, and turns its conjunctions into rules.
Identity conditions stay out of the first attempt; when a task's dataset
cannot be exactly characterized without them, the configured strategy
either relearns over a table that includes identity conditions or covers
stray rows with per-pair identity conjunctions.

Phase 2 optionally eliminates negated atomics (producing negation-free
policies) and then merges and simplifies rules to a fixpoint.  Every
phase-2 transformation is committed only if the policy's meaning is
preserved exactly, so the mined policy keeps granting precisely the input
authorizations.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

from rebac_miner.features import (
    ExtractionLimits,
    FeatureKind,
    FeatureTable,
    build_dataset,
    enumerate_condition_features,
    extend_with_id_columns,
    observed_constants,
    prune_useless,
)
from rebac_miner.learner import (
    IdStrategy,
    LearnResult,
    LearnerConfig,
    LearningError,
    learn_formula,
)
from rebac_miner.model import (
    BOOLEAN,
    ID_FIELD,
    AclPolicy,
    AtomicCondition,
    ModelError,
    Policy,
    Rule,
    SraTuple,
    nav,
    path_type,
    rule_meaning,
    sort_rules,
    wsc,
)
from rebac_miner.tvl import (
    DnfFormula,
    LabeledDataset,
    Polarity,
    TruthValue,
)

Observer = Callable[[str, tuple[Rule, ...]], None]


class MinerError(Exception):
    """The pipeline cannot produce a consistent policy for this input."""


@dataclass(frozen=True)
class MinerConfig:
    """allow_negation=True mines the negation-bearing language; False adds
    the negative-feature elimination step."""

    allow_negation: bool = True
    id_strategy: IdStrategy = IdStrategy.PER_VECTOR_ID_CONJUNCTION
    limits: ExtractionLimits = ExtractionLimits()
    learner: LearnerConfig = LearnerConfig()
    seed: int = 0

    def __post_init__(self):
        # id_strategy is authoritative; keep the learner config in step.
        if self.learner.id_fallback is not self.id_strategy:
            object.__setattr__(
                self, "learner", replace(self.learner, id_fallback=self.id_strategy)
            )


@dataclass(frozen=True)
class TaskReport:
    subject_type: str
    resource_type: str
    action: str
    table: FeatureTable
    dataset: LabeledDataset
    result: LearnResult
    retried_with_ids: bool


@dataclass(frozen=True)
class MineResult:
    policy: Policy
    tasks: tuple[TaskReport, ...]


def mine(acl: AclPolicy, cfg: MinerConfig = MinerConfig()) -> Policy:
    """Mine a policy whose meaning equals the input authorizations."""
    return mine_detailed(acl, cfg).policy


def naive_unknown_as_false_diagnostic(
    acl: AclPolicy, cfg: MinerConfig = MinerConfig()
) -> Policy:
    """Run the pipeline with every unknown cell coerced to F.

    A diagnostic only: collapsing the third truth value loses exactly the
    information that makes unknown-bearing data minable, and the result is
    generally inconsistent with the input authorizations.
    """
    return mine_detailed(acl, cfg, unknown_as_false=True).policy


def mine_detailed(
    acl: AclPolicy,
    cfg: MinerConfig = MinerConfig(),
    unknown_as_false: bool = False,
    jobs: int = 1,
    observer: Optional[Observer] = None,
) -> MineResult:
    cm, om = acl.class_model, acl.object_model
    for t in acl.au:
        if not om.has(t.subject) or not om.has(t.resource):
            raise ModelError(f"authorization references unknown object: {t}")
        if t.action not in acl.actions:
            raise ModelError(f"authorization uses undeclared action: {t}")

    keys = sorted(
        {
            (om.get(t.subject).type, om.get(t.resource).type, t.action)
            for t in acl.au
        }
    )

    def run(key):
        return _run_task(acl, cfg, key, unknown_as_false)

    if jobs > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run, keys))
    else:
        reports = [run(key) for key in keys]

    rules = []
    tables = {}
    for report in reports:
        key = (report.subject_type, report.resource_type, report.action)
        tables[key] = report.table
        rules.extend(
            extract_rules(
                report.result.formula,
                report.table,
                report.subject_type,
                report.resource_type,
                report.action,
            )
        )
    rules = sort_rules(rules)

    if not cfg.allow_negation:
        rules = _eliminate_all_negatives(rules, acl, tables)
    rules = merge_and_simplify(rules, acl, limits=cfg.limits, observer=observer)

    policy = Policy(cm, om, acl.actions, sort_rules(rules))
    if not unknown_as_false:
        granted = _policy_meaning(policy.rules, acl)
        if granted != acl.au:
            diff = sorted(granted ^ acl.au)[0]
            raise MinerError(f"mined policy disagrees with input at {diff}")
    return MineResult(policy, tuple(reports))


def _run_task(acl, cfg, key, unknown_as_false) -> TaskReport:
    subject_type, resource_type, action = key
    cm, om = acl.class_model, acl.object_model

    def prepare(limits):
        table = FeatureTable.build(cm, om, subject_type, resource_type, limits)
        dataset = build_dataset(acl, subject_type, resource_type, action, table)
        if unknown_as_false:
            dataset = dataset.map_cells(
                lambda tv: TruthValue.F if tv is TruthValue.U else tv
            )
        return prune_useless(table, dataset)

    table, dataset = prepare(cfg.limits)
    retried = False
    try:
        result = learn_formula(dataset, cfg.learner)
    except LearningError:
        retried = True
        if cfg.id_strategy is IdStrategy.RETRY_WITH_ID_FEATURES:
            table, dataset = prepare(replace(cfg.limits, include_id_conditions=True))
            try:
                result = learn_formula(dataset, cfg.learner)
            except LearningError as exc:
                raise MinerError(
                    f"task {key}: inconsistent even with identity conditions"
                    f" ({exc})"
                ) from exc
        else:
            table, dataset, supplier, hidden = extend_with_id_columns(table, dataset)
            try:
                result = learn_formula(
                    dataset, cfg.learner, fallback_conj=supplier, hidden=hidden
                )
            except LearningError as exc:
                raise MinerError(
                    f"task {key}: inconsistent even with per-pair identity"
                    f" conjunctions ({exc})"
                ) from exc
    return TaskReport(
        subject_type, resource_type, action, table, dataset, result, retried
    )


def extract_rules(
    formula: DnfFormula,
    table: FeatureTable,
    subject_type: str,
    resource_type: str,
    action: str,
) -> tuple[Rule, ...]:
    """One rule per disjunct; negative literals become negated atomics."""
    rules = []
    for conjunction in formula.disjuncts:
        subject_conds, resource_conds, constraints = [], [], []
        for literal in conjunction.sorted_literals:
            if literal.polarity is Polarity.IS_UNKNOWN:
                raise MinerError(
                    f"cannot extract a rule from an is-unknown literal: {literal}"
                )
            entry = table.entry(literal.feature)
            payload = entry.payload
            if literal.polarity is Polarity.NEGATIVE:
                payload = replace(payload, negated=True)
            if entry.kind is FeatureKind.SUBJECT_CONDITION:
                subject_conds.append(payload)
            elif entry.kind is FeatureKind.RESOURCE_CONDITION:
                resource_conds.append(payload)
            else:
                constraints.append(payload)
        rules.append(
            Rule(
                subject_type,
                frozenset(subject_conds),
                resource_type,
                frozenset(resource_conds),
                frozenset(constraints),
                frozenset({action}),
            )
        )
    return sort_rules(rules)


# ---------------------------------------------------------------------------
# Phase 2a: negative-feature elimination (negation-free mode only)


def _without_atomic(rule: Rule, slot: str, atomic) -> Rule:
    if slot == "subject":
        return replace(rule, subject_condition=rule.subject_condition - {atomic})
    if slot == "resource":
        return replace(rule, resource_condition=rule.resource_condition - {atomic})
    return replace(rule, constraint=rule.constraint - {atomic})


def _with_atomic(rule: Rule, slot: str, atomic) -> Rule:
    if slot == "subject":
        return replace(rule, subject_condition=rule.subject_condition | {atomic})
    if slot == "resource":
        return replace(rule, resource_condition=rule.resource_condition | {atomic})
    return replace(rule, constraint=rule.constraint | {atomic})


def _slot_for_kind(kind: FeatureKind) -> str:
    if kind is FeatureKind.SUBJECT_CONDITION:
        return "subject"
    if kind is FeatureKind.RESOURCE_CONDITION:
        return "resource"
    return "constraint"


def eliminate_negative_features(
    rule: Rule,
    acl: AclPolicy,
    table: FeatureTable,
    others: Iterable[Rule] = (),
) -> tuple[Rule, ...]:
    """Rewrite one rule until it carries no negated atomics.

    Substeps per negated atomic, first success wins: (1) drop it if the
    rule stays valid; (2) swap in the cheapest positive table feature that
    keeps the rule valid without shrinking its granted set; (3) for a
    negated membership condition, flip to the complement of its constants
    over the observed domain; (4) flip to the constants actually navigated
    by the rule's granted subjects/resources.  If some negated atomic
    survives all four, the rule is replaced by per-pair identity rules for
    the tuples no other rule grants.
    """
    cm, om, au = acl.class_model, acl.object_model, acl.au
    current = rule
    while True:
        negated = [(slot, ac) for slot, ac in current.atomics() if ac.negated]
        if not negated:
            return (current,)
        slot, atomic = negated[0]
        rewritten = _eliminate_one(current, slot, atomic, acl, table)
        if rewritten is None:
            return _id_split(current, acl, others)
        current = rewritten


def _eliminate_one(rule, slot, atomic, acl, table) -> Optional[Rule]:
    cm, om, au = acl.class_model, acl.object_model, acl.au
    base = _without_atomic(rule, slot, atomic)
    own = rule_meaning(cm, om, rule) & au

    def acceptable(candidate: Rule) -> bool:
        # Valid, and still granting everything the rule granted before.
        granted = rule_meaning(cm, om, candidate)
        return granted <= au and granted >= own

    # (1) plain removal
    if rule_meaning(cm, om, base) <= au:
        return base

    # (2) cheapest positive replacement from the feature table
    candidates = sorted(
        (entry for entry in table.entries),
        key=lambda e: (wsc(e.payload), e.sort_key),
    )
    for entry in candidates:
        candidate = _with_atomic(base, _slot_for_kind(entry.kind), entry.payload)
        if candidate != rule and acceptable(candidate):
            return candidate

    if slot in ("subject", "resource") and atomic.op == "in":
        cls = rule.subject_type if slot == "subject" else rule.resource_type
        terminal = path_type(cm, cls, atomic.path)[0]

        # (3) complement over the observed constant domain
        if terminal == BOOLEAN:
            domain = {True, False}
        else:
            domain = observed_constants(cm, om, cls, atomic.path)
        complement = frozenset(domain) - atomic.value
        if complement:
            candidate = _with_atomic(
                base, slot, AtomicCondition(atomic.path, "in", complement)
            )
            if acceptable(candidate):
                return candidate

        # (4) constants navigated by the rule's currently granted tuples
        atoms = set()
        for t in sorted(own):
            oid = t.subject if slot == "subject" else t.resource
            value = nav(cm, om, oid, atomic.path)
            if isinstance(value, (str, bool)):
                atoms.add(value)
        if atoms:
            candidate = _with_atomic(
                base, slot, AtomicCondition(atomic.path, "in", frozenset(atoms))
            )
            if acceptable(candidate):
                return candidate

    return None


def _id_split(rule: Rule, acl: AclPolicy, others: Iterable[Rule]) -> tuple[Rule, ...]:
    cm, om = acl.class_model, acl.object_model
    covered_elsewhere = set()
    for other in others:
        covered_elsewhere |= rule_meaning(cm, om, other)
    out = []
    for t in sorted(rule_meaning(cm, om, rule) - covered_elsewhere):
        out.append(
            Rule(
                rule.subject_type,
                frozenset({AtomicCondition((ID_FIELD,), "in", frozenset({t.subject}))}),
                rule.resource_type,
                frozenset({AtomicCondition((ID_FIELD,), "in", frozenset({t.resource}))}),
                frozenset(),
                frozenset({t.action}),
            )
        )
    return tuple(out)


def _eliminate_all_negatives(rules, acl, tables) -> tuple[Rule, ...]:
    current = list(sort_rules(rules))
    out = []
    for i, rule in enumerate(current):
        action = next(iter(rule.actions))
        table = tables.get((rule.subject_type, rule.resource_type, action))
        if table is None:
            table = FeatureTable.from_entries([])
        others = out + current[i + 1:]
        out.extend(eliminate_negative_features(rule, acl, table, others))
    return sort_rules(out)


# ---------------------------------------------------------------------------
# Phase 2b: merge and simplify to a fixpoint


class _Phase2:
    def __init__(self, acl: AclPolicy, limits: ExtractionLimits, observer):
        self.cm = acl.class_model
        self.om = acl.object_model
        self.au = acl.au
        self.limits = limits
        self.observer = observer
        self._meanings: dict[Rule, frozenset[SraTuple]] = {}

    def meaning_of(self, rule: Rule) -> frozenset[SraTuple]:
        got = self._meanings.get(rule)
        if got is None:
            got = rule_meaning(self.cm, self.om, rule)
            self._meanings[rule] = got
        return got

    def policy_meaning(self, rules) -> frozenset[SraTuple]:
        out: set[SraTuple] = set()
        for rule in rules:
            out |= self.meaning_of(rule)
        return frozenset(out)

    def commit(self, step: str, old_rules, new_rules) -> Optional[list[Rule]]:
        """Accept a transformation only if the policy meaning is unchanged."""
        if self.policy_meaning(new_rules) != self.policy_meaning(old_rules):
            return None
        new_rules = list(sort_rules(new_rules))
        if self.observer is not None:
            self.observer(step, tuple(new_rules))
        return new_rules


def merge_and_simplify(
    rules: Iterable[Rule],
    acl: AclPolicy,
    limits: ExtractionLimits = ExtractionLimits(),
    observer: Optional[Observer] = None,
) -> tuple[Rule, ...]:
    """Fixpoint of meaning-preserving merges and simplifications.

    Rounds apply: Boolean-negation rewriting, merging rules identical up
    to actions, merging rules identical up to one condition's constant
    set, dropping rules whose grants other rules already cover, greedily
    dropping atomics that validity allows, and swapping constraints for
    strictly cheaper conditions of identical effect.  Policy meaning and
    the non-increase of structural complexity are enforced per commit.
    """
    ctx = _Phase2(acl, limits, observer)
    current = list(sort_rules(rules))
    steps = (
        _rewrite_bool_negations,
        _merge_actions,
        _merge_value_sets,
        _drop_covered_rules,
        _drop_atomics,
        _constraints_to_conditions,
    )
    changed = True
    while changed:
        changed = False
        for step in steps:
            updated = step(current, ctx)
            if updated is not None:
                current = updated
                changed = True
    return sort_rules(current)


def _rewrite_bool_negations(rules, ctx) -> Optional[list[Rule]]:
    changed = None
    current = list(rules)
    for i, rule in enumerate(list(current)):
        new_rule = rule
        for slot, cls in (("subject", rule.subject_type), ("resource", rule.resource_type)):
            conds = (
                new_rule.subject_condition if slot == "subject" else new_rule.resource_condition
            )
            for ac in sorted(conds, key=lambda c: c.sort_key):
                if not (ac.negated and ac.op == "in" and len(ac.value) == 1):
                    continue
                atom = next(iter(ac.value))
                if not isinstance(atom, bool):
                    continue
                flipped = AtomicCondition(ac.path, "in", frozenset({not atom}))
                new_rule = _with_atomic(
                    _without_atomic(new_rule, slot, ac), slot, flipped
                )
        if new_rule != rule:
            proposal = current[:i] + [new_rule] + current[i + 1:]
            committed = ctx.commit("rewrite-bool-negation", current, proposal)
            if committed is not None:
                current = committed
                changed = current
    return changed


def _merge_actions(rules, ctx) -> Optional[list[Rule]]:
    groups: dict[tuple, list[Rule]] = {}
    for rule in rules:
        key = (
            rule.subject_type,
            rule.resource_type,
            tuple(sorted(c.sort_key for c in rule.subject_condition)),
            tuple(sorted(c.sort_key for c in rule.resource_condition)),
            tuple(sorted(c.sort_key for c in rule.constraint)),
        )
        groups.setdefault(key, []).append(rule)
    if all(len(g) == 1 for g in groups.values()):
        return None
    current = list(rules)
    changed = None
    for group in groups.values():
        if len(group) == 1:
            continue
        actions = frozenset().union(*(r.actions for r in group))
        merged = replace(group[0], actions=actions)
        proposal = [r for r in current if r not in group] + [merged]
        committed = ctx.commit("merge-actions", current, proposal)
        if committed is not None:
            current = committed
            changed = current
    return changed


def _value_set_merge_key(rule: Rule, slot: str, ac: AtomicCondition):
    rest = _without_atomic(rule, slot, ac)
    return (rest.sort_key, slot, ac.path, ac.op, ac.negated)


def _merge_value_sets(rules, ctx) -> Optional[list[Rule]]:
    groups: dict[tuple, list[tuple[Rule, str, AtomicCondition]]] = {}
    for rule in rules:
        for slot, ac in rule.atomics():
            if slot == "constraint" or ac.op != "in" or ac.negated:
                continue
            groups.setdefault(_value_set_merge_key(rule, slot, ac), []).append(
                (rule, slot, ac)
            )
    candidates = [g for g in groups.values() if len(g) > 1]
    if not candidates:
        return None
    # Most-granting pairs first.
    candidates.sort(
        key=lambda g: (
            -len(frozenset().union(*(ctx.meaning_of(r) for r, _, _ in g))),
            g[0][0].sort_key,
        )
    )
    current = list(rules)
    changed = None
    for group in candidates:
        members = [(r, slot, ac) for r, slot, ac in group if r in current]
        if len(members) < 2:
            continue
        rule0, slot, ac0 = members[0]
        union = frozenset().union(*(ac.value for _, _, ac in members))
        merged = _with_atomic(
            _without_atomic(rule0, slot, ac0),
            slot,
            AtomicCondition(ac0.path, "in", union),
        )
        if not ctx.meaning_of(merged) <= ctx.au:
            continue
        proposal = [r for r in current if r not in {m[0] for m in members}] + [merged]
        committed = ctx.commit("merge-value-sets", current, proposal)
        if committed is not None:
            current = committed
            changed = current
    return changed


def _drop_covered_rules(rules, ctx) -> Optional[list[Rule]]:
    current = list(rules)
    changed = None
    # Narrow rules first; on equal coverage drop the structurally heavier
    # one, so identity-laden fallback rules lose to general ones.
    for rule in sorted(
        current, key=lambda r: (len(ctx.meaning_of(r)), -wsc(r), r.sort_key)
    ):
        if rule not in current:
            continue
        rest = [r for r in current if r != rule]
        if ctx.meaning_of(rule) <= ctx.policy_meaning(rest):
            committed = ctx.commit("drop-covered-rule", current, rest)
            if committed is not None:
                current = committed
                changed = current
    return changed


def _drop_atomics(rules, ctx) -> Optional[list[Rule]]:
    current = list(rules)
    changed = None
    for rule in list(current):
        if rule not in current:
            continue
        working = rule
        progressed = True
        while progressed:
            progressed = False
            base_meaning = ctx.meaning_of(working)
            candidates = []
            for slot, atomic in working.atomics():
                shrunk = _without_atomic(working, slot, atomic)
                contribution = len(ctx.meaning_of(shrunk)) - len(base_meaning)
                is_constraint = 1 if slot == "constraint" else 0
                candidates.append(
                    (is_constraint, contribution, atomic.sort_key, slot, atomic)
                )
            for _, _, _, slot, atomic in sorted(candidates, key=lambda c: c[:3]):
                shrunk = _without_atomic(working, slot, atomic)
                if not ctx.meaning_of(shrunk) <= ctx.au:
                    continue
                proposal = [r for r in current if r != working] + [shrunk]
                committed = ctx.commit("drop-atomic", current, proposal)
                if committed is not None:
                    current = committed
                    changed = current
                    working = shrunk
                    progressed = True
                    break
    return changed


def _constraints_to_conditions(rules, ctx) -> Optional[list[Rule]]:
    current = list(rules)
    changed = None
    for rule in list(current):
        if rule not in current:
            continue
        working = rule
        for constraint in sorted(rule.constraint, key=lambda c: c.sort_key):
            if constraint not in working.constraint:
                continue
            base = _without_atomic(working, "constraint", constraint)
            target = ctx.meaning_of(working)
            options = []
            for slot, cls in (
                ("subject", working.subject_type),
                ("resource", working.resource_type),
            ):
                for cond in enumerate_condition_features(
                    ctx.cm, ctx.om, cls, ctx.limits
                ):
                    if wsc(cond) < wsc(constraint):
                        options.append((wsc(cond), slot, cond))
            options.sort(key=lambda o: (o[0], o[1], o[2].sort_key))
            for _, slot, cond in options:
                candidate = _with_atomic(base, slot, cond)
                if ctx.meaning_of(candidate) != target:
                    continue
                proposal = [r for r in current if r != working] + [candidate]
                committed = ctx.commit("constraint-to-condition", current, proposal)
                if committed is not None:
                    current = committed
                    changed = current
                    working = candidate
                    break
    return changed


def _policy_meaning(rules, acl: AclPolicy) -> frozenset[SraTuple]:
    out: set[SraTuple] = set()
    for rule in rules:
        out |= rule_meaning(acl.class_model, acl.object_model, rule)
    return frozenset(out)
