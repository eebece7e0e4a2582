"""Production worst cases against the brute-force grid oracles."""

from __future__ import annotations

import numpy as np
import pytest

from dynrisk.oracle import (
    GridSpec,
    cvar_simplex_sup,
    enumerate_conditional_expectation,
    enumerate_expected_tail,
    grid_worst_case,
    kl_simplex_sup,
    sandwich,
)
from dynrisk.risk_types import (
    ConstantRule,
    CVaR,
    Expectation,
    KLBall,
    OracleCapError,
    RiskKind,
    SupNormBall,
    WassersteinBall,
)
from dynrisk.sampling import random_process, random_tree, random_vector, trial_rng
from dynrisk.space import (
    AdaptedVector,
    ScenarioTree,
    conditional_expectation,
    expected_tail_sum,
)
from dynrisk.uncertainty import SetKind, worst_case
from tests.helpers import processes

INSTANCES = 100
KL_AGREEMENT = 1e-4


def _sandwich_case(index: int) -> tuple[SetKind, RiskKind]:
    eps = (0.1, 0.25)[index % 2]
    rule = ConstantRule(eps=eps)
    cases: list[tuple[SetKind, RiskKind]] = [
        (WassersteinBall(order=1.0, rule=rule), Expectation()),
        (WassersteinBall(order=2.0, rule=rule), Expectation()),
        (WassersteinBall(order=1.0, rule=rule), CVaR(alpha=0.5)),
        (WassersteinBall(order=2.0, rule=rule), CVaR(alpha=0.5)),
        (KLBall(rule=rule), Expectation()),
    ]
    return cases[(index // 2) % len(cases)]


class TestSandwich:
    """Grid value <= production value <= grid value + grid modulus."""

    def test_random_instances(self) -> None:
        for index in range(INSTANCES):
            rng = trial_rng(401, index)
            tree = random_tree(rng, 1, max_children=3)
            x = random_process(rng, tree)
            kind, rho = _sandwich_case(index)
            result = sandwich(kind, rho, tree, x, 0)
            assert result.holds(1e-9), (index, kind, rho, result.gaps, result.bound)

    def test_sup_norm_ball_is_exact_on_the_grid(self, binary_tree: ScenarioTree) -> None:
        kind = SupNormBall(rule=ConstantRule(eps=0.25))
        for x in processes(binary_tree, 5):
            result = sandwich(kind, CVaR(alpha=0.5), binary_tree, x, 1)
            assert result.holds()
            assert result.atoms == binary_tree.atom_ids(1)

    def test_grid_value_is_a_lower_bound(self, skewed_tree: ScenarioTree) -> None:
        kind = WassersteinBall(rule=ConstantRule(eps=0.1))
        x = processes(skewed_tree, 1)[0]
        grid = grid_worst_case(kind, Expectation(), skewed_tree, x, 0, GridSpec(points=11))
        production = worst_case(kind, Expectation(), skewed_tree, x, 0)
        assert np.all(grid.values <= production.values + 1e-12)


class TestKLSimplex:
    """The convex dual agrees with a zooming simplex grid over reweightings."""

    @pytest.mark.parametrize("eps", [0.0, 0.05, 0.1, 0.25, 1.0, 10.0])
    def test_dual_matches_the_grid(self, eps: float) -> None:
        kind = KLBall(rule=ConstantRule(eps=eps))
        for index in range(INSTANCES // 5):
            rng = trial_rng(409, index)
            tree = random_tree(rng, 1, max_children=3)
            x = random_process(rng, tree)
            production = worst_case(kind, Expectation(), tree, x, 0)
            grid = kl_simplex_sup(tree, x[1], eps)
            assert production.max_abs_gap(grid) <= KL_AGREEMENT

    def test_zero_radius_is_the_mean(self, skewed_tree: ScenarioTree) -> None:
        z = random_vector(trial_rng(3, 0), skewed_tree, 1)
        assert kl_simplex_sup(skewed_tree, z, 0.0).allclose(conditional_expectation(z, 0), 1e-12)

    def test_large_radius_reaches_the_largest_child(self, skewed_tree: ScenarioTree) -> None:
        z = AdaptedVector(skewed_tree, 1, np.array([0.1, -0.4, 0.7]))
        assert kl_simplex_sup(skewed_tree, z, 10.0).values == pytest.approx([0.7], abs=1e-12)
        kind = KLBall(rule=ConstantRule(eps=10.0))
        x = processes(skewed_tree, 1)[0].replace(1, z)
        assert worst_case(kind, Expectation(), skewed_tree, x, 0).values == pytest.approx(
            [0.7], abs=1e-12
        )

    def test_argument_errors(self, skewed_tree: ScenarioTree) -> None:
        z = AdaptedVector.zeros(skewed_tree, 1)
        with pytest.raises(ValueError, match="too coarse"):
            kl_simplex_sup(skewed_tree, z, 0.1, resolution=0.01)
        with pytest.raises(ValueError, match="eps must be >= 0"):
            kl_simplex_sup(skewed_tree, z, -0.1)
        with pytest.raises(ValueError, match="time >= 1"):
            kl_simplex_sup(skewed_tree, AdaptedVector.zeros(skewed_tree, 0), 0.1)

    def test_cvar_as_a_capped_reweighting(self) -> None:
        probs = np.array([0.2, 0.3, 0.5])
        values = np.array([0.9, -0.2, 0.4])
        # q <= p / (1 - alpha) puts 0.4 on 0.9 and 0.6 on 0.4
        assert cvar_simplex_sup(values, probs, 0.5) == pytest.approx(0.6, abs=1e-9)
        with pytest.raises(ValueError, match="alpha"):
            cvar_simplex_sup(values, probs, 1.0)


class TestEnumeration:
    """Path enumeration reproduces the conditional operations of `space`."""

    def test_expected_tail(self) -> None:
        for index in range(20):
            rng = trial_rng(419, index)
            tree = random_tree(rng, 3)
            x = random_process(rng, tree)
            for t in range(tree.horizon + 1):
                assert enumerate_expected_tail(x, t).allclose(expected_tail_sum(x, t), 1e-12)
                last = x[tree.horizon]
                assert enumerate_conditional_expectation(tree, last, t).allclose(
                    conditional_expectation(last, t), 1e-12
                )

    def test_time_and_tree_are_checked(self, binary_tree: ScenarioTree) -> None:
        z = AdaptedVector.zeros(binary_tree, 1)
        with pytest.raises(IndexError):
            enumerate_conditional_expectation(binary_tree, z, 2)
        with pytest.raises(ValueError, match="different scenario tree"):
            enumerate_conditional_expectation(ScenarioTree.regular(2, 2), z, 0)


class TestCaps:
    """Oracles refuse grids they cannot enumerate."""

    def test_too_many_children(self) -> None:
        tree = ScenarioTree.regular(4, 1)
        x = processes(tree, 1)[0]
        with pytest.raises(OracleCapError, match="exceed the oracle limit 3"):
            grid_worst_case(WassersteinBall(rule=ConstantRule(eps=0.1)), Expectation(), tree, x, 0)
        with pytest.raises(OracleCapError):
            kl_simplex_sup(tree, x[1], 0.1)

    def test_grid_cap(self, skewed_tree: ScenarioTree) -> None:
        kind = SupNormBall(rule=ConstantRule(eps=0.1))
        x = processes(skewed_tree, 1)[0]
        grid = GridSpec(points=101, cap=1000)
        with pytest.raises(OracleCapError, match="exceed the cap 1000"):
            grid_worst_case(kind, Expectation(), skewed_tree, x, 0, grid)

    def test_grid_spec_validation(self) -> None:
        with pytest.raises(ValueError, match="points must be >= 2"):
            GridSpec(points=1)
        with pytest.raises(ValueError, match="resolution"):
            GridSpec(resolution=1.5)
        with pytest.raises(IndexError):
            grid_worst_case(
                KLBall(rule=ConstantRule(eps=0.1)),
                Expectation(),
                ScenarioTree.regular(2, 1),
                processes(ScenarioTree.regular(2, 1), 1)[0],
                1,
            )
