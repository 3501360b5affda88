"""DNF formula learning over three-valued data by iterated tree induction.

The learner repeatedly grows a multi-way tree over the not-yet-covered
portion of the dataset, harvests the conjunctions of its T paths, and
scrubs them of is-unknown literals: each such literal is removed when the
conjunction stays valid, otherwise replaced by the first ordinary literal
that keeps the conjunction valid and the batch covering.  Features whose
is-unknown tests resist both are blacklisted from later trees.  Rows still
uncovered after the iteration budget are covered one at a time with
per-vector conjunctions.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Union

from rebac_miner.tree import build_tree, extract_true_paths
from rebac_miner.tvl import (
    Conjunction,
    DnfFormula,
    FeatureId,
    FeatureVector,
    LabeledDataset,
    LabeledRow,
    Literal,
    Polarity,
    TruthValue,
    covers,
    eval_conjunction,
    eval_dnf,
    first_validity_violation,
    remove_redundant,
    uncovered_t_rows,
)

log = logging.getLogger(__name__)

T = TruthValue.T

REPLACEMENT_ORDERS = ("positive-first",)


class IdStrategy(enum.Enum):
    """How identity conditions enter when ordinary features do not suffice."""

    RETRY_WITH_ID_FEATURES = "retry"
    PER_VECTOR_ID_CONJUNCTION = "per-vector"


@dataclass(frozen=True)
class LearnerConfig:
    max_iter: int = 5
    id_fallback: IdStrategy = IdStrategy.PER_VECTOR_ID_CONJUNCTION
    replacement_order: str = "positive-first"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.replacement_order not in REPLACEMENT_ORDERS:
            raise ValueError(f"unknown replacement order: {self.replacement_order!r}")


@dataclass(frozen=True)
class LearnResult:
    formula: DnfFormula
    used_fallback: bool
    blacklisted: frozenset[FeatureId]
    iterations: int


@dataclass(frozen=True)
class FailedFeatures:
    """Features whose is-unknown tests could not be eliminated."""

    features: frozenset[FeatureId]


class LearningError(Exception):
    """The learned formula mis-evaluates a row; the dataset cannot be
    exactly characterized with the available features (it is not monotonic
    or lacks separating features)."""

    def __init__(self, row: LabeledRow):
        self.row = row
        super().__init__(
            f"formula would grant a row labeled {row.label}"
            + (f" (pair {row.provenance})" if row.provenance else "")
        )


def _conj_valid(conjunction: Conjunction, dataset: LabeledDataset) -> bool:
    return all(
        eval_conjunction(conjunction, row.vector) is not T
        for row in dataset.rows
        if row.label is not T
    )


def default_cover_conjunction(
    vector: FeatureVector, features: tuple[FeatureId, ...]
) -> Conjunction:
    """Positive literal per T cell, negative per F cell; U cells contribute
    nothing.  Evaluates to T on ``vector`` by construction."""
    literals = []
    for feature in features:
        cell = vector[feature]
        if cell is TruthValue.T:
            literals.append(Literal(feature, Polarity.POSITIVE))
        elif cell is TruthValue.F:
            literals.append(Literal(feature, Polarity.NEGATIVE))
    return Conjunction.of(literals)


def _replacement_literals(
    original: Conjunction,
    features: tuple[FeatureId, ...],
    hidden: frozenset[FeatureId],
    order: str,
) -> tuple[Literal, ...]:
    used = original.feature_indices()
    free = [f for f in features if f.index not in used and f not in hidden]
    literals = [Literal(f, Polarity.POSITIVE) for f in free]
    literals += [Literal(f, Polarity.NEGATIVE) for f in free]
    # "positive-first": positive polarity, then ascending cost, then index.
    literals.sort(key=lambda l: (l.polarity.value, l.feature.cost, l.feature.index))
    return tuple(literals)


def eliminate_unknown_literal(
    conjunction: Conjunction,
    dataset: LabeledDataset,
    batch: Iterable[Conjunction],
    working: LabeledDataset,
    config: LearnerConfig = LearnerConfig(),
    hidden: frozenset[FeatureId] = frozenset(),
) -> Union[Conjunction, FailedFeatures]:
    """Scrub is-unknown literals out of one conjunction.

    Each is-unknown literal is first dropped outright if the conjunction
    stays valid on the full dataset; failing that, it is swapped for the
    first candidate literal (over features unused in the original
    conjunction) that keeps the conjunction valid and lets the batch still
    cover the working rows.  If any is-unknown literal survives, the
    features of the original conjunction's is-unknown literals are
    reported for blacklisting.
    """
    batch = tuple(batch)
    current = conjunction
    candidates = _replacement_literals(
        conjunction, dataset.features, hidden, config.replacement_order
    )
    for unknown_lit in conjunction.unknown_literals():
        attempt = current.without(unknown_lit)
        if _conj_valid(attempt, dataset):
            current = attempt
            continue
        for candidate in candidates:
            if candidate.feature.index in current.feature_indices():
                continue
            attempt = current.without(unknown_lit).with_literal(candidate)
            if _conj_valid(attempt, dataset) and covers(
                DnfFormula.of(batch + (attempt,)), working
            ):
                current = attempt
                break
        # No removal and no replacement: the literal stays, which will
        # trigger the blacklist path below.
    if current.unknown_literals():
        return FailedFeatures(
            frozenset(l.feature for l in conjunction.unknown_literals())
        )
    return current


def _t_cover_count(conjunction: Conjunction, dataset: LabeledDataset) -> int:
    return sum(
        1
        for row in dataset.rows
        if row.label is T and eval_conjunction(conjunction, row.vector) is T
    )


def learn_formula(
    dataset: LabeledDataset,
    config: LearnerConfig = LearnerConfig(),
    fallback_conj: Optional[Callable[[LabeledRow], Conjunction]] = None,
    hidden: frozenset[FeatureId] = frozenset(),
) -> LearnResult:
    """Learn a DNF formula that evaluates to T exactly on the T-labeled rows.

    ``hidden`` features never appear in trees or replacement candidates;
    they exist only so that conjunctions supplied by ``fallback_conj`` (the
    per-vector identity route) can be evaluated against the rows.

    Raises LearningError when the final formula would grant a row labeled
    F or U; monotonicity is not checked up front, the post-verification is
    the cheaper and stronger check.
    """
    disjuncts: dict = {}
    blacklist: set[FeatureId] = set()
    iterations = 0

    def formula() -> DnfFormula:
        return DnfFormula.of(disjuncts.values())

    while not covers(formula(), dataset) and iterations < config.max_iter:
        current = formula()
        working = LabeledDataset(
            dataset.features,
            tuple(
                row
                for row in dataset.rows
                if not (row.label is T and eval_dnf(current, row.vector) is T)
            ),
        )
        tree = build_tree(working, excluded=frozenset(blacklist) | hidden)
        batch = {c.sort_key: c for c in extract_true_paths(tree)}
        pending = [c for c in batch.values() if c.unknown_literals()]
        # Most-covering conjunctions first, so the features that end up
        # blacklisted do not depend on hash order.
        pending.sort(key=lambda c: (-_t_cover_count(c, working), c.sort_key))
        for conjunction in pending:
            del batch[conjunction.sort_key]
            outcome = eliminate_unknown_literal(
                conjunction, dataset, batch.values(), working, config, hidden
            )
            if isinstance(outcome, FailedFeatures):
                blacklist.update(outcome.features)
            else:
                batch[outcome.sort_key] = outcome
        for conjunction in batch.values():
            disjuncts.setdefault(conjunction.sort_key, conjunction)
        iterations += 1

    used_fallback = False
    remaining = uncovered_t_rows(formula(), dataset)
    if remaining:
        used_fallback = True
        visible = tuple(f for f in dataset.features if f not in hidden)
        for row in remaining:
            if fallback_conj is not None:
                conjunction = fallback_conj(row)
            else:
                conjunction = default_cover_conjunction(row.vector, visible)
            if not conjunction.literals:
                log.warning(
                    "fallback produced an empty conjunction (all-unknown row"
                    " %s); the formula becomes always-true",
                    row.provenance,
                )
            disjuncts.setdefault(conjunction.sort_key, conjunction)

    final = remove_redundant(formula())
    violation = first_validity_violation(final, dataset)
    if violation is not None:
        raise LearningError(violation)
    if not covers(final, dataset):  # unreachable with the fallbacks above
        raise LearningError(uncovered_t_rows(final, dataset)[0])
    return LearnResult(final, used_fallback, frozenset(blacklist), iterations)
