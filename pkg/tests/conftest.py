import pytest

from rebac_miner.tvl import (
    FeatureId,
    FeatureVector,
    LabeledDataset,
    LabeledRow,
    TruthValue,
)

F, U, T = TruthValue.F, TruthValue.U, TruthValue.T

# The two-student/three-document worked example: features are
# sub.dept=CS, res.dept=CS, res.type=Handbook, sub.dept=res.dept.
EXAMPLE_FEATURES = (
    FeatureId(0, "sub.dept=CS", 2),
    FeatureId(1, "res.dept=CS", 2),
    FeatureId(2, "res.type=Handbook", 2),
    FeatureId(3, "sub.dept=res.dept", 2),
)

EXAMPLE_ROWS = (
    (("CS-student-1", "CS-doc-1"), (T, U, T, U), T),
    (("CS-student-1", "CS-doc-2"), (T, T, U, T), T),
    (("CS-student-1", "CS-doc-3"), (T, U, U, U), F),
    (("EE-student-1", "CS-doc-1"), (U, U, T, U), T),
    (("EE-student-1", "CS-doc-2"), (U, T, U, U), F),
    (("EE-student-1", "CS-doc-3"), (U, U, U, U), F),
)


def make_dataset(features, rows):
    return LabeledDataset(
        tuple(features),
        tuple(
            LabeledRow(FeatureVector(tuple(cells)), label, prov)
            for prov, cells, label in rows
        ),
    )


@pytest.fixture
def example_dataset():
    return make_dataset(EXAMPLE_FEATURES, EXAMPLE_ROWS)
