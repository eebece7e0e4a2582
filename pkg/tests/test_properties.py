"""Tests for the randomized set and measure property checks."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from dynrisk.adversarial import ReflectedKind
from dynrisk.properties import (
    MEASURE_PROPERTIES,
    SET_PROPERTIES,
    check_measure_property,
    check_set_property,
)
from dynrisk.recursive import construct_recursive
from dynrisk.riskmeasures import evaluate_one_step
from dynrisk.risk_types import (
    CheckSpec,
    ConstantRule,
    CVaR,
    Expectation,
    IdentitySet,
    KLBall,
    ProportionalRule,
    RiskFamily,
    RiskKind,
    SumHalfspace,
    SupNormBall,
)
from dynrisk.robust import RobustRiskMeasure
from dynrisk.space import AdaptedProcess, AdaptedVector, FloatArray, ScenarioTree
from dynrisk.uncertainty import CustomSetKind, DynamicUncertaintySet, SetKind
from tests.helpers import fixture

SPEC = CheckSpec(trials=200)
CONSTANT = SupNormBall(rule=ConstantRule(eps=0.1))
PROPORTIONAL = SupNormBall(rule=ProportionalRule(eps=0.25))


def _measure(tree: ScenarioTree, kind: RiskKind, set_kind: SetKind) -> RobustRiskMeasure:
    family = RiskFamily.uniform(kind, tree.horizon)
    return RobustRiskMeasure(tree, family, DynamicUncertaintySet.uniform(set_kind, tree.horizon))


class EmptySet(CustomSetKind):
    """No members at all."""

    def membership_gap(
        self, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray:
        return np.full(tree.size(t - 1), np.inf)

    def worst_case(
        self, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
    ) -> FloatArray:
        return np.full(tree.size(t - 1), -np.inf)

    def sample_member(
        self,
        tree: ScenarioTree,
        x: AdaptedProcess,
        t: int,
        rng: np.random.Generator,
        boundary: bool,
    ) -> AdaptedVector | None:
        return None


class PooledBall(CustomSetKind):
    """Sup-norm ball around X_t whose radius averages |X_t| over every atom of time t."""

    def radius(self, x: AdaptedProcess, t: int) -> float:
        return 0.1 + float(np.abs(x[t].values).mean())

    def membership_gap(
        self, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray:
        out = np.full(tree.size(t - 1), -np.inf)
        np.maximum.at(out, tree.parent_index(t), np.abs(y.values - x[t].values))
        return out - self.radius(x, t)

    def worst_case(
        self, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
    ) -> FloatArray:
        return evaluate_one_step(rho, tree, x[t]).values + self.radius(x, t)

    def sample_member(
        self,
        tree: ScenarioTree,
        x: AdaptedProcess,
        t: int,
        rng: np.random.Generator,
        boundary: bool,
    ) -> AdaptedVector | None:
        r = self.radius(x, t)
        step = np.full(tree.size(t), r) if boundary else rng.uniform(-r, r, size=tree.size(t))
        return AdaptedVector(tree, t, x[t].values + step)


def _reflected(tree: ScenarioTree) -> SetKind:
    return ReflectedKind(_measure(tree, CVaR(alpha=0.5), CONSTANT))


SetFactory = Callable[[ScenarioTree], SetKind]

# prop -> (a set that has it, a set that lacks it)
SET_PAIRS: dict[str, tuple[SetFactory, SetFactory]] = {
    "proper": (lambda _: CONSTANT, lambda _: EmptySet()),
    "normalised": (lambda _: PROPORTIONAL, lambda _: CONSTANT),
    "zero_in_zero": (
        lambda _: CONSTANT,
        lambda _: SumHalfspace(offsets={"root": -0.5, "root.0": -0.5, "root.1": -0.5}),
    ),
    "order_preserving": (lambda _: IdentitySet(), _reflected),
    "monotone": (lambda _: SumHalfspace(), lambda _: IdentitySet()),
    "translation_invariant": (lambda _: CONSTANT, lambda _: PROPORTIONAL),
    "static": (lambda _: CONSTANT, lambda _: SumHalfspace()),
    "local": (lambda _: CONSTANT, lambda _: PooledBall()),
    "positive_homogeneous": (lambda _: PROPORTIONAL, lambda _: CONSTANT),
    "star_shaped": (lambda _: PROPORTIONAL, lambda _: CONSTANT),
}

# prop -> ((risk, set) that has it, (risk, set) that lacks it)
MEASURE_PAIRS: dict[str, tuple[tuple[RiskKind, SetKind], tuple[RiskKind, SetKind]]] = {
    "additive": ((Expectation(), IdentitySet()), (CVaR(alpha=0.5), IdentitySet())),
    "superadditive": ((Expectation(), IdentitySet()), (CVaR(alpha=0.5), IdentitySet())),
    "monotone": (
        (Expectation(), CONSTANT),
        (Expectation(), SupNormBall(rule=ProportionalRule(eps=2.0))),
    ),
    "local": ((Expectation(), CONSTANT), (Expectation(), PooledBall())),
}


class TestSetProperties:
    """Verdicts of the set checks on variants whose properties are known."""

    @pytest.mark.parametrize(
        ("prop", "expected"),
        [
            ("proper", "corroborated"),
            ("normalised", "counterexample"),
            ("zero_in_zero", "corroborated"),
            ("translation_invariant", "corroborated"),
            ("positive_homogeneous", "counterexample"),
            ("static", "corroborated"),
            ("local", "corroborated"),
        ],
    )
    def test_constant_sup_norm_ball(
        self, prop: str, expected: str, binary_tree: ScenarioTree
    ) -> None:
        assert check_set_property(CONSTANT, binary_tree, prop, SPEC).status == expected

    @pytest.mark.parametrize(
        ("prop", "expected"),
        [
            ("normalised", "corroborated"),
            ("translation_invariant", "counterexample"),
            ("positive_homogeneous", "corroborated"),
            ("star_shaped", "corroborated"),
        ],
    )
    def test_proportional_sup_norm_ball(
        self, prop: str, expected: str, binary_tree: ScenarioTree
    ) -> None:
        assert check_set_property(PROPORTIONAL, binary_tree, prop, SPEC).status == expected

    def test_identity_is_normalised_and_order_preserving(self, skewed_tree: ScenarioTree) -> None:
        for prop in ("normalised", "order_preserving", "positive_homogeneous"):
            assert check_set_property(IdentitySet(), skewed_tree, prop, SPEC).corroborated

    def test_sum_halfspace_reads_the_tail(self, binary_tree: ScenarioTree) -> None:
        verdict = check_set_property(SumHalfspace(), binary_tree, "static", SPEC)
        assert verdict.status == "counterexample"
        assert verdict.witness is not None
        assert "X" in verdict.witness.processes

    def test_counterexample_is_replayable(self, binary_tree: ScenarioTree) -> None:
        first = check_set_property(CONSTANT, binary_tree, "normalised", SPEC)
        again = check_set_property(CONSTANT, binary_tree, "normalised", SPEC)
        assert first == again
        assert first.witness is not None
        assert first.witness.trial == first.trials - 1

    def test_unknown_property(self, binary_tree: ScenarioTree) -> None:
        with pytest.raises(ValueError, match="unknown property 'convexity'"):
            check_set_property(CONSTANT, binary_tree, "convexity")

    def test_every_handler_runs(self, skewed_tree: ScenarioTree) -> None:
        for prop in SET_PROPERTIES:
            kind = KLBall(rule=ConstantRule(eps=0.1))
            verdict = check_set_property(kind, skewed_tree, prop, CheckSpec(trials=5))
            assert verdict.check == f"set.{prop}"


class TestMeasureProperties:
    """Verdicts of the measure checks on robust measures with known behaviour."""

    def test_sum_halfspace_axioms(self) -> None:
        measure = fixture("sum_halfspace_centred").measure()
        for prop in ("monotone", "translation_invariant", "local", "cash_shift"):
            assert check_measure_property(measure, prop, SPEC).corroborated, prop
        assert check_measure_property(measure, "normalised", SPEC).status == "counterexample"

    @pytest.mark.parametrize(
        ("name", "expected"),
        [("sum_halfspace_centred", "corroborated"), ("sum_halfspace_drift", "counterexample")],
    )
    def test_strong_shift_invariance_follows_the_offsets(self, name: str, expected: str) -> None:
        measure = fixture(name).measure()
        verdict = check_measure_property(measure, "strong_shift_invariance", SPEC)
        assert verdict.status == expected

    def test_plain_sup_norm_does_not_move_cash(self, binary_tree: ScenarioTree) -> None:
        measure = _measure(binary_tree, CVaR(alpha=0.5), CONSTANT)
        assert check_measure_property(measure, "translation_invariant", SPEC).corroborated
        verdict = check_measure_property(measure, "cash_shift", SPEC)
        assert verdict.status == "counterexample"
        assert verdict.witness is not None
        assert verdict.witness.horizon == 1

    def test_homogeneity_follows_the_radius_rule(self, binary_tree: ScenarioTree) -> None:
        constant = _measure(binary_tree, CVaR(alpha=0.5), CONSTANT)
        proportional = _measure(binary_tree, CVaR(alpha=0.5), PROPORTIONAL)
        for prop in ("positive_homogeneous", "positive_homogeneous_offset"):
            assert check_measure_property(constant, prop, SPEC).status == "counterexample"
            assert check_measure_property(proportional, prop, SPEC).corroborated
        assert check_measure_property(constant, "zero_nonpositive", SPEC).status == (
            "counterexample"
        )
        assert check_measure_property(proportional, "normalised", SPEC).corroborated

    def test_prudence_chain(self, binary_tree: ScenarioTree) -> None:
        family = RiskFamily.uniform(Expectation(), binary_tree.horizon)
        derived = construct_recursive(IdentitySet(), family, binary_tree)
        plain = _measure(binary_tree, Expectation(), IdentitySet())
        assert check_measure_property(derived, "prudence_chain", SPEC).corroborated
        assert check_measure_property(plain, "prudence_chain", SPEC).status == "counterexample"

    def test_zero_is_acceptance(self, binary_tree: ScenarioTree) -> None:
        kl = _measure(binary_tree, Expectation(), KLBall(rule=ConstantRule(eps=0.1)))
        sup = _measure(binary_tree, Expectation(), CONSTANT)
        assert check_measure_property(kl, "zero_is_acceptance", SPEC).corroborated
        assert check_measure_property(sup, "zero_is_acceptance", SPEC).status == "counterexample"

    def test_coherent_base_is_convex_and_subadditive(self, skewed_tree: ScenarioTree) -> None:
        measure = _measure(skewed_tree, CVaR(alpha=0.5), PROPORTIONAL)
        for prop in ("convex", "subadditive", "star_shaped"):
            assert check_measure_property(measure, prop, SPEC).corroborated, prop
        assert check_measure_property(measure, "concave", SPEC).status == "counterexample"

    @pytest.mark.parametrize("prop", ["strong_shift_invariance", "cash_shift"])
    def test_inner_time_checks_need_two_periods(self, prop: str) -> None:
        tree = ScenarioTree.regular(2, 1)
        verdict = check_measure_property(_measure(tree, Expectation(), CONSTANT), prop, SPEC)
        assert verdict.status == "vacuous"
        assert verdict.trials == 0
        assert verdict.corroborated

    def test_unknown_property(self, binary_tree: ScenarioTree) -> None:
        measure = _measure(binary_tree, Expectation(), IdentitySet())
        with pytest.raises(ValueError, match="unknown property"):
            check_measure_property(measure, "coherent")

    def test_every_handler_runs(self, binary_tree: ScenarioTree) -> None:
        measure = _measure(binary_tree, Expectation(), PROPORTIONAL)
        for prop in MEASURE_PROPERTIES:
            assert check_measure_property(measure, prop, CheckSpec(trials=5)).check == (
                f"measure.{prop}"
            )


class TestChecksSeparate:
    """Every check passes a variant known to have its property and fails one known to lack it."""

    def test_every_set_property_has_a_pair(self) -> None:
        assert set(SET_PAIRS) == set(SET_PROPERTIES)

    @pytest.mark.parametrize("prop", sorted(SET_PAIRS))
    def test_set_pairs(self, prop: str, binary_tree: ScenarioTree) -> None:
        satisfying, violating = (make(binary_tree) for make in SET_PAIRS[prop])
        assert check_set_property(satisfying, binary_tree, prop, SPEC).status == "corroborated"
        verdict = check_set_property(violating, binary_tree, prop, SPEC)
        assert verdict.status == "counterexample"
        assert verdict.witness is not None
        assert verdict.witness.gap > 0.0

    @pytest.mark.parametrize("prop", sorted(MEASURE_PAIRS))
    def test_measure_pairs(self, prop: str, binary_tree: ScenarioTree) -> None:
        (kind, set_kind), (bad_kind, bad_set) = MEASURE_PAIRS[prop]
        satisfying = _measure(binary_tree, kind, set_kind)
        violating = _measure(binary_tree, bad_kind, bad_set)
        assert check_measure_property(satisfying, prop, SPEC).status == "corroborated"
        verdict = check_measure_property(violating, prop, SPEC)
        assert verdict.status == "counterexample"
        assert verdict.witness is not None
