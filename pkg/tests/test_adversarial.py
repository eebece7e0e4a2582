"""Sets with unchanged robust values but a deliberately missing property."""

from __future__ import annotations

import pytest

from dynrisk.adversarial import TARGETS, ReflectedKind, adversarial_equivalent_set
from dynrisk.properties import check_set_property
from dynrisk.risk_types import (
    CheckSpec,
    ConstantRule,
    CVaR,
    Expectation,
    KLBall,
    RiskFamily,
    RiskKind,
    SupNormBall,
)
from dynrisk.robust import RobustRiskMeasure
from dynrisk.space import ScenarioTree
from dynrisk.uncertainty import DynamicUncertaintySet, SetKind
from tests.helpers import processes

VALUE_PROCESSES = 200
SPEC = CheckSpec(trials=200)

CASES: list[tuple[str, SetKind, RiskKind]] = [
    ("break-normalisation", KLBall(rule=ConstantRule(eps=0.1)), Expectation()),
    ("break-order", SupNormBall(rule=ConstantRule(eps=0.1)), CVaR(alpha=0.5)),
    ("break-translation", SupNormBall(rule=ConstantRule(eps=0.1)), CVaR(alpha=0.5)),
]


def _measure(tree: ScenarioTree, set_kind: SetKind, kind: RiskKind) -> RobustRiskMeasure:
    family = RiskFamily.uniform(kind, tree.horizon)
    return RobustRiskMeasure(tree, family, DynamicUncertaintySet.uniform(set_kind, tree.horizon))


class TestAdversarialSets:
    """Each flavor keeps R and removes exactly the property it targets."""

    @pytest.mark.parametrize(
        ("flavor", "set_kind", "kind"), CASES, ids=[flavor for flavor, _, _ in CASES]
    )
    def test_values_survive_and_property_flips(
        self, flavor: str, set_kind: SetKind, kind: RiskKind, binary_tree: ScenarioTree
    ) -> None:
        original = _measure(binary_tree, set_kind, kind)
        swapped = adversarial_equivalent_set(original, flavor, SPEC)
        rebuilt = RobustRiskMeasure(binary_tree, original.family, swapped)
        for x in processes(binary_tree, VALUE_PROCESSES, seed=17):
            for t in range(binary_tree.horizon):
                assert rebuilt.value(t, x).max_abs_gap(original.value(t, x)) <= 1e-9

        prop = TARGETS[flavor]
        before = check_set_property(original.uset, binary_tree, prop, SPEC)
        after = check_set_property(swapped, binary_tree, prop, SPEC)
        assert before.status == "corroborated"
        assert after.status == "counterexample"
        assert after.witness is not None

    def test_reflected_point_reproduces_the_value(self, skewed_tree: ScenarioTree) -> None:
        measure = _measure(skewed_tree, SupNormBall(rule=ConstantRule(eps=0.2)), CVaR(alpha=0.5))
        kind = ReflectedKind(measure)
        assert kind.describe() == "reflected[10]"
        for x in processes(skewed_tree, 10):
            for t in range(1, skewed_tree.horizon + 1):
                values = kind.worst_case(CVaR(alpha=0.5), skewed_tree, x, t)
                assert values == pytest.approx(measure.value(t - 1, x).values, abs=1e-9)
                gap = kind.membership_gap(skewed_tree, kind.point(skewed_tree, x, t), x, t)
                assert gap.max() == 0.0

    def test_flavor_needs_the_property_in_the_original(self, binary_tree: ScenarioTree) -> None:
        measure = _measure(binary_tree, SupNormBall(rule=ConstantRule(eps=0.1)), Expectation())
        with pytest.raises(ValueError, match="needs a normalised set"):
            adversarial_equivalent_set(measure, "break-normalisation", SPEC)

    def test_unknown_flavor(self, binary_tree: ScenarioTree) -> None:
        measure = _measure(binary_tree, KLBall(rule=ConstantRule(eps=0.1)), Expectation())
        with pytest.raises(ValueError, match="unknown flavor"):
            adversarial_equivalent_set(measure, "break-locality")
