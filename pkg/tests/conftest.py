import numpy as np
import pytest

from dialoglens.grouping import GroupFeatureTable, GroupMarks, GroupWeekRow


def make_table(values_by_row, marks=None):
    """Build a GroupFeatureTable from {(group, week): {feature: value}}."""
    rows = tuple(
        GroupWeekRow(group_id=g, week=w, values=dict(vals))
        for (g, w), vals in sorted(values_by_row.items())
    )
    table = GroupFeatureTable(rows)
    if marks is not None:
        table = table.with_outcomes(marks)
    return table


def simple_marks(group_scores):
    """Marks out of 100/100 whose outcome score equals score/100."""
    return {
        g: GroupMarks(midterm=s, midterm_full=100.0, final=s, final_full=100.0)
        for g, s in group_scores.items()
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
