from __future__ import annotations

import numpy as np
import pytest

from fibmon.errors import UsageError
from fibmon.recipes import BY_CRITERION, Check, entropy_peak, reproduce


def test_every_criterion_has_a_recipe():
    assert sorted(BY_CRITERION) == list(range(1, 13))


@pytest.mark.parametrize("figure_id", ["oracle-equivalence", "stabilizer-percolation", "fig2a", "properties"])
def test_quick_recipes_pass(figure_id):
    rep = reproduce(figure_id, quick=True)
    assert rep.passed, rep.text()
    assert rep.budget is None


@pytest.mark.parametrize("figure_id", ["fig2b", "fig2c", "fig4d", "fourier-projective", "record-stats", "fss"])
def test_quick_recipes_report(figure_id):
    rep = reproduce(figure_id, quick=True)
    assert rep.checks
    assert all(np.isfinite(c.measured) for c in rep.checks)
    assert rep.to_dict()["figure_id"] == figure_id


def test_lookup_by_number():
    assert reproduce(1).figure_id == "gap-line"


def test_unknown_id():
    with pytest.raises(UsageError):
        reproduce("fig7")


def test_check_helpers():
    assert Check.near("x", 1.04, 1.0, 0.05, relative=True).passed
    assert not Check.below("y", 2.0, 1.0).passed
    assert Check.within("z", 1.6, 1.5, 2.3).passed


def test_entropy_peak_parabola():
    x = np.linspace(0, 1, 11)
    assert entropy_peak(x, -(x - 0.43) ** 2) == pytest.approx(0.43)
