import pytest

from rebac_miner.datagen import (
    builtin_spec,
    generate,
    inject_unknowns,
    running_example,
    running_example_rules,
)
from rebac_miner.features import ExtractionLimits, FeatureTable
from rebac_miner.learner import IdStrategy
from rebac_miner.metrics import jaccard, semantic_similarity
from rebac_miner.miner import (
    MinerConfig,
    eliminate_negative_features,
    extract_rules,
    merge_and_simplify,
    mine,
    mine_detailed,
    naive_unknown_as_false_diagnostic,
)
from rebac_miner.model import (
    UNKNOWN,
    AclPolicy,
    AtomicCondition,
    AtomicConstraint,
    ClassModel,
    FieldDecl,
    Multiplicity,
    ObjectInstance,
    ObjectModel,
    Policy,
    Rule,
    SraTuple,
    meaning,
    policy_wsc,
    rule_meaning,
    sort_rules,
)
from rebac_miner.tvl import Conjunction, DnfFormula, Literal, Polarity


def cond(path, *atoms, negated=False):
    return AtomicCondition(tuple(path), "in", frozenset(atoms), negated=negated)


class TestMineRunningExample:
    def test_exact_recovery(self):
        acl = running_example()
        result = mine_detailed(acl, MinerConfig())
        want = sort_rules(running_example_rules())
        assert result.policy.rules == want
        assert meaning(result.policy) == acl.au

    def test_intermediate_formula(self):
        acl = running_example()
        result = mine_detailed(acl, MinerConfig())
        (task,) = result.tasks
        labels = {
            frozenset(str(l) for l in c.literals) for c in task.result.formula.disjuncts
        }
        assert labels == {
            frozenset({"res.type=Handbook"}),
            frozenset({"sub.dept = res.dept"}),
        }
        assert task.result.used_fallback is False
        assert task.result.iterations == 1

    def test_both_id_strategies_agree_here(self):
        acl = running_example()
        a = mine(acl, MinerConfig(id_strategy=IdStrategy.RETRY_WITH_ID_FEATURES))
        b = mine(acl, MinerConfig(id_strategy=IdStrategy.PER_VECTOR_ID_CONJUNCTION))
        assert a.rules == b.rules

    def test_empty_au(self):
        acl = running_example()
        empty = AclPolicy(acl.class_model, acl.object_model, acl.actions, frozenset())
        assert mine(empty, MinerConfig()).rules == ()


class TestExtractRules:
    def make_table(self):
        acl = running_example()
        return acl, FeatureTable.build(
            acl.class_model, acl.object_model, "Student", "Document",
            ExtractionLimits(),
        )

    def test_paper_formula_yields_paper_rules(self):
        acl, table = self.make_table()
        handbook = table.feature_ids[2]
        constraint = table.feature_ids[3]
        formula = DnfFormula.of(
            [
                Conjunction.of([Literal(handbook, Polarity.POSITIVE)]),
                Conjunction.of([Literal(constraint, Polarity.POSITIVE)]),
            ]
        )
        rules = extract_rules(formula, table, "Student", "Document", "read")
        assert rules == sort_rules(running_example_rules())

    def test_empty_conjunction_grants_all(self):
        acl, table = self.make_table()
        rules = extract_rules(
            DnfFormula.of([Conjunction()]), table, "Student", "Document", "read"
        )
        (rule,) = rules
        assert not rule.subject_condition and not rule.resource_condition
        assert not rule.constraint
        assert len(rule_meaning(acl.class_model, acl.object_model, rule)) == 6

    def test_negative_literal_becomes_negated_atomic(self):
        acl, table = self.make_table()
        handbook = table.feature_ids[2]
        constraint = table.feature_ids[3]
        formula = DnfFormula.of(
            [
                Conjunction.of(
                    [
                        Literal(handbook, Polarity.NEGATIVE),
                        Literal(constraint, Polarity.POSITIVE),
                    ]
                )
            ]
        )
        (rule,) = extract_rules(formula, table, "Student", "Document", "read")
        assert rule.resource_condition == frozenset(
            {cond(("type",), "Handbook", negated=True)}
        )
        assert rule.constraint == frozenset(
            {AtomicConstraint(("dept",), "equal", ("dept",))}
        )


def status_model():
    """Tasks with a three-valued status domain, for negation elimination."""
    cm = ClassModel(
        {
            "Status": {},
            "User": {},
            "Task": {"status": FieldDecl("Status", Multiplicity.ONE)},
        }
    )
    statuses = ["completed", "in_progress", "not_started"]
    objs = [ObjectInstance(s, "Status", {}) for s in statuses]
    objs += [ObjectInstance("u1", "User", {})]
    objs += [
        ObjectInstance("t1", "Task", {"status": "not_started"}),
        ObjectInstance("t2", "Task", {"status": "in_progress"}),
        ObjectInstance("t3", "Task", {"status": "completed"}),
    ]
    om = ObjectModel(objs)
    au = frozenset(
        {SraTuple("u1", "t1", "edit"), SraTuple("u1", "t2", "edit")}
    )
    return AclPolicy(cm, om, frozenset({"edit"}), au)


class TestEliminateNegatives:
    def test_complement_substep(self):
        acl = status_model()
        rule = Rule(
            "User",
            frozenset(),
            "Task",
            frozenset({cond(("status",), "completed", negated=True)}),
            frozenset(),
            frozenset({"edit"}),
        )
        assert rule_meaning(acl.class_model, acl.object_model, rule) == acl.au
        table = FeatureTable.from_entries([])  # force substep 3, not 2
        (out,) = eliminate_negative_features(rule, acl, table)
        assert out.resource_condition == frozenset(
            {cond(("status",), "in_progress", "not_started")}
        )
        assert rule_meaning(acl.class_model, acl.object_model, out) == acl.au

    def test_droppable_negation_dropped(self):
        acl = status_model()
        # The negated atomic is redundant: every task the rule grants is
        # already authorized without it.
        rule = Rule(
            "User",
            frozenset(),
            "Task",
            frozenset(
                {
                    cond(("status",), "in_progress", "not_started"),
                    cond(("status",), "completed", negated=True),
                }
            ),
            frozenset(),
            frozenset({"edit"}),
        )
        (out,) = eliminate_negative_features(
            rule, acl, FeatureTable.from_entries([])
        )
        assert out.resource_condition == frozenset(
            {cond(("status",), "in_progress", "not_started")}
        )

    def test_id_split_fallback_preserves_meaning(self):
        # A negated constraint cannot be dropped (the weakened rule grants
        # too much) and no substep applies to constraints beyond the table
        # search, so the rule splits into per-pair identity rules.
        cm = ClassModel(
            {
                "Dept": {},
                "User": {"dept": FieldDecl("Dept", Multiplicity.ONE)},
                "Doc": {"dept": FieldDecl("Dept", Multiplicity.ONE)},
            }
        )
        om = ObjectModel(
            [
                ObjectInstance("d1", "Dept", {}),
                ObjectInstance("d2", "Dept", {}),
                ObjectInstance("u1", "User", {"dept": "d1"}),
                ObjectInstance("doc1", "Doc", {"dept": "d2"}),
                ObjectInstance("doc2", "Doc", {"dept": "d1"}),
            ]
        )
        au = frozenset({SraTuple("u1", "doc1", "read")})
        acl = AclPolicy(cm, om, frozenset({"read"}), au)
        rule = Rule(
            "User",
            frozenset(),
            "Doc",
            frozenset(),
            frozenset({AtomicConstraint(("dept",), "equal", ("dept",), negated=True)}),
            frozenset({"read"}),
        )
        assert rule_meaning(cm, om, rule) == au
        out = eliminate_negative_features(rule, acl, FeatureTable.from_entries([]))
        granted = frozenset().union(*(rule_meaning(cm, om, r) for r in out))
        assert granted == au
        assert all(not ac.negated for r in out for _, ac in r.atomics())
        assert any(ac.path == ("id",) for r in out for _, ac in r.atomics())

    def test_unknown_bearing_complement_keeps_meaning(self):
        # With one task's status unknown, the complement rewrite must keep
        # granting exactly the pairs the negated condition granted.
        acl = status_model()
        om2 = ObjectModel(
            list(acl.object_model.objects())
            + [ObjectInstance("t4", "Task", {"status": UNKNOWN})]
        )
        acl = AclPolicy(acl.class_model, om2, acl.actions, acl.au)
        rule = Rule(
            "User",
            frozenset(),
            "Task",
            frozenset({cond(("status",), "completed", negated=True)}),
            frozenset(),
            frozenset({"edit"}),
        )
        before = rule_meaning(acl.class_model, om2, rule)
        out = eliminate_negative_features(rule, acl, FeatureTable.from_entries([]))
        granted = frozenset().union(
            *(rule_meaning(acl.class_model, om2, r) for r in out)
        )
        assert granted == before


class TestMergeAndSimplify:
    def make_acl(self):
        return running_example()

    def test_action_union(self):
        acl = self.make_acl()
        acl = AclPolicy(
            acl.class_model,
            acl.object_model,
            frozenset({"read", "write"}),
            acl.au | {SraTuple(t.subject, t.resource, "write") for t in acl.au},
        )
        base = running_example_rules()
        rules = [replace_actions(r, {"read"}) for r in base]
        rules += [replace_actions(r, {"write"}) for r in base]
        merged = merge_and_simplify(rules, acl)
        assert len(merged) == 2
        assert all(r.actions == frozenset({"read", "write"}) for r in merged)

    def test_redundant_condition_dropped(self):
        acl = self.make_acl()
        same_dept, handbook = running_example_rules()
        # A subject condition implied by the constraint for every granted
        # tuple: dropping it preserves the rule's meaning.
        bloated = Rule(
            same_dept.subject_type,
            frozenset({cond(("dept",), "CS")}),
            same_dept.resource_type,
            frozenset(),
            same_dept.constraint,
            same_dept.actions,
        )
        out = merge_and_simplify([bloated, handbook], acl)
        assert sort_rules(out) == sort_rules(running_example_rules())

    def test_boolean_negation_rewritten(self):
        cm = ClassModel(
            {
                "User": {},
                "Doc": {"secret": FieldDecl("Boolean", Multiplicity.ONE)},
            }
        )
        om = ObjectModel(
            [
                ObjectInstance("u1", "User", {}),
                ObjectInstance("d1", "Doc", {"secret": False}),
                ObjectInstance("d2", "Doc", {"secret": True}),
            ]
        )
        au = frozenset({SraTuple("u1", "d1", "read")})
        acl = AclPolicy(cm, om, frozenset({"read"}), au)
        rule = Rule(
            "User",
            frozenset(),
            "Doc",
            frozenset({cond(("secret",), True, negated=True)}),
            frozenset(),
            frozenset({"read"}),
        )
        (out,) = merge_and_simplify([rule], acl)
        assert out.resource_condition == frozenset({cond(("secret",), False)})

    def test_overlapping_rule_dropped(self):
        acl = self.make_acl()
        same_dept, handbook = running_example_rules()
        narrow = Rule(
            "Student",
            frozenset({AtomicCondition(("id",), "in", frozenset({"CS-student-1"}))}),
            "Document",
            frozenset({AtomicCondition(("id",), "in", frozenset({"CS-doc-2"}))}),
            frozenset(),
            frozenset({"read"}),
        )
        out = merge_and_simplify([same_dept, handbook, narrow], acl)
        assert sort_rules(out) == sort_rules((same_dept, handbook))

    def test_meaning_never_changes_and_wsc_never_grows(self):
        spec = builtin_spec("org-chart")
        om, acl = generate(spec, 3, seed=4)
        degraded = inject_unknowns(om, spec, 2, seed=4)
        acl = AclPolicy(spec.class_model, degraded, acl.actions, acl.au)
        seen = []

        def observer(step, rules):
            seen.append((step, rules))

        result = mine_detailed(acl, MinerConfig(), observer=observer)
        assert meaning(result.policy) == acl.au
        last_wsc = None
        for step, rules in seen:
            got = frozenset().union(
                *(rule_meaning(acl.class_model, degraded, r) for r in rules)
            ) if rules else frozenset()
            assert got == acl.au
            current = policy_wsc(rules)
            if last_wsc is not None:
                assert current <= last_wsc
            last_wsc = current


def replace_actions(rule, actions):
    return Rule(
        rule.subject_type,
        rule.subject_condition,
        rule.resource_type,
        rule.resource_condition,
        rule.constraint,
        frozenset(actions),
    )


class TestNaiveDiagnostic:
    def test_denies_the_unknown_typed_document(self):
        acl = running_example()
        policy = naive_unknown_as_false_diagnostic(acl, MinerConfig())
        granted = meaning(policy)
        assert SraTuple("CS-student-1", "CS-doc-2", "read") not in granted
        assert jaccard(granted, acl.au) == pytest.approx(2 / 3)

    def test_identity_on_fully_known_data(self):
        spec = builtin_spec("univ-mini")
        om, acl = generate(spec, 3, seed=8)
        a = mine(acl, MinerConfig())
        b = naive_unknown_as_false_diagnostic(acl, MinerConfig())
        assert a.rules == b.rules


class TestRoundTrips:
    @pytest.mark.parametrize("spec_name", ["univ-mini", "org-chart"])
    @pytest.mark.parametrize("allow_negation", [True, False])
    def test_mined_policy_grants_exactly_au(self, spec_name, allow_negation):
        spec = builtin_spec(spec_name)
        for seed in (0, 1):
            om, acl = generate(spec, 3, seed=seed)
            degraded = inject_unknowns(om, spec, 2, seed=seed)
            acl = AclPolicy(spec.class_model, degraded, acl.actions, acl.au)
            cfg = MinerConfig(allow_negation=allow_negation)
            policy = mine(acl, cfg)
            assert meaning(policy) == acl.au
            if not allow_negation:
                assert all(
                    not ac.negated for r in policy.rules for _, ac in r.atomics()
                )

    def test_semantic_similarity_one_for_ground_truth(self):
        spec = builtin_spec("univ-mini")
        om, acl = generate(spec, 4, seed=17)
        policy = mine(acl, MinerConfig())
        truth = Policy(spec.class_model, om, spec.actions, spec.rules)
        assert semantic_similarity(policy, truth) == 1.0

    def test_jobs_parallel_same_result(self):
        spec = builtin_spec("org-chart")
        om, acl = generate(spec, 3, seed=12)
        a = mine_detailed(acl, MinerConfig(), jobs=1).policy
        b = mine_detailed(acl, MinerConfig(), jobs=4).policy
        assert a.rules == b.rules
