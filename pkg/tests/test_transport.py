"""Tests for Wasserstein worst cases on nodes with more children than the permutation cap."""

from __future__ import annotations

import numpy as np
import pytest

from dynrisk.distances import law_wasserstein
from dynrisk.riskmeasures import risk_of_law
from dynrisk.risk_types import ConstantRule, CVaR, Entropic, WassersteinBall, use_settings
from dynrisk.sampling import trial_rng
from dynrisk.space import AdaptedVector, ScenarioTree
from dynrisk.transport import wasserstein_domination_gap, wasserstein_worst_case
from dynrisk.uncertainty import contains, dominated_gap, worst_case
from tests.helpers import process

SKEWED = [0.1] * 5 + [0.5]
CENTRE = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
MAXIMISER = [1.0, 1.0, 1.0, 6.0, 1.0, 0.0]


@pytest.fixture
def wide_tree() -> ScenarioTree:
    """Six children, one of them carrying half the mass, T = 1."""
    return ScenarioTree.regular(6, 1, probs=SKEWED)


class TestWideNodes:
    """Above the permutation cap the search still reaches the best ordering."""

    def test_heavy_atom_can_drop_to_the_bottom(self, wide_tree: ScenarioTree) -> None:
        x = process(wide_tree, [0.0], CENTRE)
        kind = WassersteinBall(rule=ConstantRule(eps=0.5))
        got = worst_case(kind, CVaR(alpha=0.9), wide_tree, x, 0)
        assert got.values.tolist() == pytest.approx([6.0], abs=1e-9)
        with use_settings(max_permutation_children=6):
            exhaustive = worst_case(kind, CVaR(alpha=0.9), wide_tree, x, 0)
        assert got.allclose(exhaustive, atol=1e-9)

    def test_the_maximiser_is_a_member(self, wide_tree: ScenarioTree) -> None:
        x = process(wide_tree, [0.0], CENTRE)
        kind = WassersteinBall(rule=ConstantRule(eps=0.5))
        y = AdaptedVector(wide_tree, 1, np.array(MAXIMISER))
        assert contains(kind, wide_tree, y, x, 1).all()
        gap = dominated_gap(kind, wide_tree, y, x, 1)
        assert gap is not None
        assert gap.values.tolist() == pytest.approx([0.0], abs=1e-9)

    def test_domination_gap_matches_full_enumeration(self) -> None:
        probs, centre = np.array(SKEWED), np.array(CENTRE)
        floor = np.array(MAXIMISER)
        searched = wasserstein_domination_gap(floor, centre, probs, 0.5, 1.0)
        with use_settings(max_permutation_children=6):
            exhaustive = wasserstein_domination_gap(floor, centre, probs, 0.5, 1.0)
        assert searched == pytest.approx(exhaustive, abs=1e-9)
        assert searched == pytest.approx(0.0, abs=1e-9)

    def test_random_wide_nodes_are_bracketed(self) -> None:
        kind, order = CVaR(alpha=0.8), 1.0
        for trial in range(5):
            rng = trial_rng(11, trial)
            probs = rng.dirichlet(np.ones(6))
            centre = np.round(rng.uniform(-1.0, 1.0, size=6), 3)
            value, y = wasserstein_worst_case(kind, centre, probs, 0.3, order)
            with use_settings(max_permutation_children=6):
                exhaustive, _ = wasserstein_worst_case(kind, centre, probs, 0.3, order)
            assert risk_of_law(kind, centre, probs) + 0.3 - 1e-9 <= value <= exhaustive + 1e-9
            assert law_wasserstein(y, probs, centre, probs, order) <= 0.3 + 1e-9

    def test_entropic_stays_inside_the_ball(self) -> None:
        probs, centre = np.array(SKEWED), np.array(CENTRE)
        kind = Entropic(beta=2.0)
        value, y = wasserstein_worst_case(kind, centre, probs, 0.5, 1.0)
        assert law_wasserstein(y, probs, centre, probs, 1.0) <= 0.5 + 1e-9
        assert value >= risk_of_law(kind, centre + 0.5, probs) - 1e-12
        assert value == pytest.approx(risk_of_law(kind, y, probs))
