"""Uncertainty sets with the same robust values as a given measure but fewer properties.

Robust values only see the consolidated set, so a set can be swapped for another
with the same consolidated set while losing normalisation, order preservation or
translation invariance. The set-property checkers must notice; the values must not.
"""

from __future__ import annotations

import logging

import numpy as np

from .riskmeasures import evaluate_one_step
from .risk_types import CheckSpec, RiskKind
from .properties import check_set_property
from .robust import ConsolidatedKind, RiskEvaluator, RobustRiskMeasure, consolidated_gap
from .space import AdaptedProcess, AdaptedVector, FloatArray, ScenarioTree
from .uncertainty import (
    CustomSetKind,
    DynamicUncertaintySet,
    SetKind,
    describe_set,
    dominated_gap,
    membership_gap,
    sample_member,
    worst_case_values,
)

logger = logging.getLogger(__name__)

# Property each flavor removes from the original set.
TARGETS: dict[str, str] = {
    "break-normalisation": "normalised",
    "break-order": "order_preserving",
    "break-translation": "translation_invariant",
}

REFLECTION = 10.0


def _group_max(tree: ScenarioTree, t: int, values: FloatArray) -> FloatArray:
    out = np.full(tree.size(t - 1), -np.inf)
    np.maximum.at(out, tree.parent_index(t), values)
    return out


class ReflectedKind(CustomSetKind):
    """u*_t(X) = {Z_X}: a reflected copy of X_t shifted so that rho_{t-1}(Z_X) = R_{t-1}(X)."""

    def __init__(self, measure: RiskEvaluator, reflection: float = REFLECTION) -> None:
        self.measure = measure
        self.reflection = reflection

    def describe(self) -> str:
        return f"reflected[{self.reflection:g}]"

    def point(self, tree: ScenarioTree, x: AdaptedProcess, t: int) -> AdaptedVector:
        shape = x[t] * -self.reflection
        rho = self.measure.family.at(t - 1)
        level = self.measure.value(t - 1, x) - evaluate_one_step(rho, tree, shape)
        return shape + level.lift(t)

    def membership_gap(
        self, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray:
        return _group_max(tree, t, np.abs(y.values - self.point(tree, x, t).values))

    def worst_case(
        self, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
    ) -> FloatArray:
        return evaluate_one_step(rho, tree, self.point(tree, x, t)).values

    def sample_member(
        self,
        tree: ScenarioTree,
        x: AdaptedProcess,
        t: int,
        rng: np.random.Generator,
        boundary: bool,
    ) -> AdaptedVector | None:
        return self.point(tree, x, t)

    def dominated_gap(
        self, tree: ScenarioTree, z: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray | None:
        excess = z.values - self.point(tree, x, t).values
        return np.maximum(_group_max(tree, t, excess), 0.0)


class ThresholdKind(CustomSetKind):
    """u_t(X) below each parent where every child of X_t is <= threshold, U_t(X) elsewhere."""

    def __init__(self, base: SetKind, measure: RiskEvaluator, threshold: float = 0.0) -> None:
        self.base = base
        self.consolidated = ConsolidatedKind(measure)
        self.threshold = threshold

    def describe(self) -> str:
        return f"threshold[{describe_set(self.base)}, {self.threshold:g}]"

    def below(self, tree: ScenarioTree, x: AdaptedProcess, t: int) -> np.ndarray:
        return _group_max(tree, t, x[t].values) <= self.threshold

    def membership_gap(
        self, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray:
        inner = membership_gap(self.base, tree, y, x, t).values
        outer = self.consolidated.membership_gap(tree, y, x, t)
        return np.where(self.below(tree, x, t), inner, outer)

    def worst_case(
        self, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
    ) -> FloatArray:
        inner = worst_case_values(self.base, rho, tree, x, t - 1)
        outer = self.consolidated.worst_case(rho, tree, x, t)
        return np.where(self.below(tree, x, t), inner, outer)

    def sample_member(
        self,
        tree: ScenarioTree,
        x: AdaptedProcess,
        t: int,
        rng: np.random.Generator,
        boundary: bool,
    ) -> AdaptedVector | None:
        inner = sample_member(self.base, tree, x, t, rng, boundary)
        outer = self.consolidated.sample_member(tree, x, t, rng, boundary)
        if inner is None or outer is None:
            return None
        mask = self.below(tree, x, t)[tree.parent_index(t)]
        return AdaptedVector(tree, t, np.where(mask, inner.values, outer.values))

    def dominated_gap(
        self, tree: ScenarioTree, z: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray | None:
        inner = dominated_gap(self.base, tree, z, x, t)
        if inner is None:
            return None
        outer = np.maximum(consolidated_gap(self.consolidated.measure, t, z, x).values, 0.0)
        return np.where(self.below(tree, x, t), inner.values, outer)


def adversarial_equivalent_set(
    measure: RobustRiskMeasure, flavor: str, spec: CheckSpec | None = None
) -> DynamicUncertaintySet:
    """A set with the robust values of `measure` that lacks the property `flavor` targets.

    Raises ValueError when the measure's own sets already lack that property.
    """
    prop = TARGETS.get(flavor)
    if prop is None:
        raise ValueError(f"adversarial_equivalent_set: unknown flavor {flavor!r}")
    verdict = check_set_property(measure.uset, measure.tree, prop, spec)
    if not verdict.corroborated:
        raise ValueError(
            f"adversarial_equivalent_set: {flavor} needs a {prop} set, "
            f"but the check found a counterexample"
        )
    horizon = measure.horizon
    if flavor == "break-normalisation":
        return DynamicUncertaintySet.uniform(ConsolidatedKind(measure), horizon)
    if flavor == "break-order":
        return DynamicUncertaintySet.uniform(ReflectedKind(measure), horizon)
    kinds = tuple(ThresholdKind(kind, measure) for kind in measure.uset.kinds)
    logger.debug("threshold sets over %s", [describe_set(kind) for kind in measure.uset.kinds])
    return DynamicUncertaintySet(kinds)
