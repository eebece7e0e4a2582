"""Tests for the backward-recursive construction and its time consistency."""

from __future__ import annotations

import pytest

from dynrisk.consistency import check_time_consistency
from dynrisk.recursive import (
    RecursiveEvaluator,
    construct_recursive,
    nested_robust_evaluate,
    round_trip_gap,
    static_representation,
)
from dynrisk.riskmeasures import nested_evaluate
from dynrisk.risk_types import (
    CheckSpec,
    ConstantRule,
    CVaR,
    Expectation,
    FamilyMeasure,
    IdentitySet,
    KLBall,
    MeasureFamily,
    ProportionalRule,
    RepresentationError,
    RiskFamily,
    RiskKind,
    SumHalfspace,
    SupNormBall,
    Verdict,
    WassersteinBall,
    Witness,
)
from dynrisk.robust import RobustRiskMeasure
from dynrisk.space import AdaptedProcess, ScenarioTree, expected_tail_sum
from dynrisk.uncertainty import DynamicUncertaintySet, SetKind
from tests.helpers import processes

IDENTITY_PROCESSES = 200
EPS = 0.1


def _tree() -> ScenarioTree:
    return ScenarioTree.regular(2, 3)


def _family_set(tree: ScenarioTree) -> MeasureFamily:
    terminal = tree.atom_ids(tree.horizon)
    tilted = {a: 1.0 + k for k, a in enumerate(terminal)}
    return MeasureFamily(
        measures=(
            FamilyMeasure(density={a: 1.0 for a in terminal}, penalty=0.0),
            FamilyMeasure(density=tilted, penalty=0.2),
        )
    )


STATIC_BASES: list[tuple[str, SetKind, RiskKind]] = [
    ("identity", IdentitySet(), CVaR(alpha=0.5)),
    ("sup_constant", SupNormBall(rule=ConstantRule(eps=EPS)), CVaR(alpha=0.5)),
    ("sup_proportional", SupNormBall(rule=ProportionalRule(eps=0.25)), CVaR(alpha=0.5)),
    ("wasserstein1", WassersteinBall(rule=ConstantRule(eps=EPS)), Expectation()),
    ("wasserstein2", WassersteinBall(order=2.0, rule=ConstantRule(eps=EPS)), Expectation()),
    ("kl", KLBall(rule=ConstantRule(eps=EPS)), Expectation()),
    ("measure_family", _family_set(_tree()), CVaR(alpha=0.5)),
]


class TestRecursionIdentity:
    """The constructed measure equals the nested robust chain over recentred positions."""

    @pytest.mark.parametrize(
        ("base", "kind"),
        [(base, kind) for _, base, kind in STATIC_BASES],
        ids=[name for name, _, _ in STATIC_BASES],
    )
    def test_construction_matches_nested_evaluation(self, base: SetKind, kind: RiskKind) -> None:
        tree = _tree()
        family = RiskFamily.uniform(kind, tree.horizon)
        measure = construct_recursive(base, family, tree)
        for x in processes(tree, IDENTITY_PROCESSES, seed=3):
            for t in range(tree.horizon):
                nested = nested_robust_evaluate(base, family, tree, x, t)
                assert measure.value(t, x).max_abs_gap(nested) <= 1e-9

    def test_identity_base_gives_the_nested_risk(self, skewed_tree: ScenarioTree) -> None:
        family = RiskFamily.uniform(CVaR(alpha=0.5), skewed_tree.horizon)
        measure = construct_recursive(IdentitySet(), family, skewed_tree)
        for x in processes(skewed_tree, 20):
            assert measure.value(0, x).allclose(nested_evaluate(family, skewed_tree, x, 0), 1e-12)

    def test_constant_radius_is_charged_once(self) -> None:
        tree = _tree()
        family = RiskFamily.uniform(Expectation(), tree.horizon)
        measure = construct_recursive(SupNormBall(rule=ConstantRule(eps=EPS)), family, tree)
        for x in processes(tree, 20):
            for t in range(tree.horizon):
                expected = expected_tail_sum(x, t) + EPS
                assert measure.value(t, x).allclose(expected, atol=1e-12)

    def test_zero_process_telescopes_to_the_base_radius(self) -> None:
        tree = _tree()
        base = SupNormBall(rule=ConstantRule(eps=EPS))
        family = RiskFamily.uniform(Expectation(), tree.horizon)
        measure = construct_recursive(base, family, tree)
        zeros = AdaptedProcess.zeros(tree)
        for t in range(tree.horizon):
            nested = nested_robust_evaluate(base, family, tree, zeros, t)
            assert nested.values == pytest.approx(EPS)
            assert measure.zero_value(t).values == pytest.approx(EPS)

    def test_evaluator_and_measure_agree(self) -> None:
        tree = _tree()
        family = RiskFamily.uniform(Expectation(), tree.horizon)
        base = KLBall(rule=ConstantRule(eps=EPS))
        evaluator = RecursiveEvaluator(tree, family, base)
        measure = construct_recursive(base, family, tree)
        for x in processes(tree, 10):
            assert measure.value(0, x).allclose(evaluator.value(0, x), atol=1e-12)


class TestConstructionErrors:
    def test_non_static_base_is_rejected(self, binary_tree: ScenarioTree) -> None:
        family = RiskFamily.uniform(Expectation(), binary_tree.horizon)
        with pytest.raises(ValueError, match="must be static"):
            construct_recursive(SumHalfspace(), family, binary_tree)

    def test_nested_evaluation_checks_time(self, binary_tree: ScenarioTree) -> None:
        family = RiskFamily.uniform(Expectation(), binary_tree.horizon)
        x = AdaptedProcess.zeros(binary_tree)
        with pytest.raises(IndexError):
            nested_robust_evaluate(IdentitySet(), family, binary_tree, x, 2)


class TestConstructedConsistency:
    """Normalised bases give strong consistency; any base gives weak recursiveness."""

    @pytest.mark.parametrize(
        ("base", "kind"),
        [
            (KLBall(rule=ConstantRule(eps=EPS)), Expectation()),
            (SupNormBall(rule=ProportionalRule(eps=0.25)), CVaR(alpha=0.5)),
        ],
        ids=["kl", "sup_proportional"],
    )
    def test_normalised_base_is_strongly_consistent(self, base: SetKind, kind: RiskKind) -> None:
        tree = _tree()
        measure = construct_recursive(base, RiskFamily.uniform(kind, tree.horizon), tree)
        verdict = check_time_consistency(measure, "strong", CheckSpec(trials=500))
        assert verdict.status == "corroborated"
        assert verdict.trials == 500

    def test_normalised_derived_sets_are_strongly_consistent(self) -> None:
        tree = _tree()
        family = RiskFamily.uniform(CVaR(alpha=0.5), tree.horizon)
        measure = construct_recursive(SupNormBall(rule=ProportionalRule(eps=0.25)), family, tree)
        verdict = check_time_consistency(measure, "strong", CheckSpec(trials=100), level="set")
        assert verdict.status == "corroborated"

    def test_constant_radius_base_is_only_weakly_recursive(self) -> None:
        tree = _tree()
        family = RiskFamily.uniform(Expectation(), tree.horizon)
        measure = construct_recursive(SupNormBall(rule=ConstantRule(eps=EPS)), family, tree)
        spec = CheckSpec(trials=500)
        weak = check_time_consistency(measure, "weak_recursive", spec)
        strong = check_time_consistency(measure, "strong", spec)
        assert weak.status == "corroborated"
        assert strong.status == "counterexample"
        assert strong.trials <= 500
        assert strong.witness is not None
        assert strong.witness.gap == pytest.approx(EPS)

    def test_plain_static_set_fails_at_the_current_time(self, binary_tree: ScenarioTree) -> None:
        family = RiskFamily.uniform(Expectation(), binary_tree.horizon)
        uset = DynamicUncertaintySet.uniform(
            SupNormBall(rule=ConstantRule(eps=EPS)), binary_tree.horizon
        )
        measure = RobustRiskMeasure(binary_tree, family, uset)
        verdict = check_time_consistency(measure, "strong", CheckSpec(trials=100), level="set")
        assert verdict.status == "counterexample"
        assert verdict.trials <= 100
        assert verdict.witness is not None
        assert verdict.witness.horizon == verdict.witness.time


class TestStaticRepresentation:
    """Representations exist only for weakly recursive measures and rebuild them."""

    @pytest.mark.parametrize(
        ("base", "kind"),
        [
            (IdentitySet(), CVaR(alpha=0.5)),
            (SupNormBall(rule=ConstantRule(eps=EPS)), Expectation()),
            (KLBall(rule=ConstantRule(eps=EPS)), Expectation()),
        ],
        ids=["identity", "sup_constant", "kl"],
    )
    def test_round_trip(self, base: SetKind, kind: RiskKind) -> None:
        tree = _tree()
        measure = construct_recursive(base, RiskFamily.uniform(kind, tree.horizon), tree)
        verdict = check_time_consistency(measure, "weak_recursive", CheckSpec(trials=100))
        representation = static_representation(measure, verdict)
        assert representation.is_static()
        assert round_trip_gap(measure, representation, processes(tree, 10)) <= 1e-9

    def test_plain_static_measure_is_refused(self) -> None:
        tree = _tree()
        family = RiskFamily.uniform(Expectation(), tree.horizon)
        uset = DynamicUncertaintySet.uniform(SupNormBall(rule=ConstantRule(eps=EPS)), 3)
        measure = RobustRiskMeasure(tree, family, uset)
        verdict = check_time_consistency(measure, "weak_recursive", CheckSpec(trials=100))
        assert verdict.status == "counterexample"
        with pytest.raises(RepresentationError, match="not weakly recursive"):
            static_representation(measure, verdict)

    def test_other_checks_do_not_qualify(self, binary_tree: ScenarioTree) -> None:
        family = RiskFamily.uniform(Expectation(), binary_tree.horizon)
        measure = construct_recursive(IdentitySet(), family, binary_tree)
        verdict = Verdict(check="measure.order", status="corroborated", trials=1)
        with pytest.raises(RepresentationError, match="needs one of"):
            static_representation(measure, verdict)

    def test_failed_verdict_is_refused(self, binary_tree: ScenarioTree) -> None:
        family = RiskFamily.uniform(Expectation(), binary_tree.horizon)
        measure = construct_recursive(IdentitySet(), family, binary_tree)
        verdict = Verdict(
            check="measure.weak_recursive",
            status="counterexample",
            trials=1,
            witness=Witness(time=0, gap=1.0),
        )
        with pytest.raises(RepresentationError):
            static_representation(measure, verdict)
