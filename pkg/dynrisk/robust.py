"""Dynamic robust risk measures, their acceptance sets and consolidated uncertainty sets."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod

import numpy as np

from .riskmeasures import conjugate_offset, evaluate_one_step, nested_evaluate
from .risk_types import RiskFamily, RiskKind, TreeStructureError, current_tolerance
from .space import AdaptedProcess, AdaptedVector, EventSet, FloatArray, ScenarioTree
from .uncertainty import (
    CustomSetKind,
    DynamicUncertaintySet,
    describe_set,
    validate_set,
    worst_case,
)

logger = logging.getLogger(__name__)


# ------------------------------
# Evaluator contract
# ------------------------------


class RiskEvaluator(ABC):
    """A dynamic risk measure R_{t,T} on one tree, paired with its one-step family."""

    tree: ScenarioTree
    family: RiskFamily

    @property
    def horizon(self) -> int:
        return self.tree.horizon

    @abstractmethod
    def value(self, t: int, x: AdaptedProcess) -> AdaptedVector:
        """R_{t,T}(X_{t+1:T}); components of X at times <= t are ignored."""

    @abstractmethod
    def zero_value(self, t: int) -> AdaptedVector:
        """R_{t,T}(0)."""

    def _check_args(self, t: int, x: AdaptedProcess, *, where: str) -> None:
        if not 0 <= t < self.tree.horizon:
            raise IndexError(f"{where}: t = {t} must satisfy 0 <= t < T = {self.tree.horizon}")
        if x.tree is not self.tree:
            raise ValueError(f"{where}: process lives on a different scenario tree")


class RobustRiskMeasure(RiskEvaluator):
    """R_{t,T}(X) = esssup{rho_t(Y) : Y in u_{t+1}(X_{t+1:T})}.

    R_{t,T}(0) is computed once per time, backwards, at construction.
    """

    def __init__(
        self, tree: ScenarioTree, family: RiskFamily, uset: DynamicUncertaintySet
    ) -> None:
        if family.horizon != tree.horizon:
            raise TreeStructureError(
                f"RobustRiskMeasure: {family.horizon} risk kinds for a tree of horizon "
                f"{tree.horizon}"
            )
        validate_set(uset, tree)
        self.tree = tree
        self.family = family
        self.uset = uset
        self._zero: dict[int, AdaptedVector] = {}
        zeros = AdaptedProcess.zeros(tree)
        for t in range(tree.horizon - 1, -1, -1):
            self._zero[t] = self.value(t, zeros)
        logger.debug(
            "robust measure over %s: R_0(0) = %s",
            [describe_set(kind) for kind in uset.kinds],
            self._zero[0].values.tolist(),
        )

    def value(self, t: int, x: AdaptedProcess) -> AdaptedVector:
        self._check_args(t, x, where="robust_value")
        return worst_case(self.uset.at(t + 1), self.family.at(t), self.tree, x, t)

    def zero_value(self, t: int) -> AdaptedVector:
        if t not in self._zero:
            raise IndexError(f"zero_value: t = {t} must satisfy 0 <= t < T = {self.tree.horizon}")
        return self._zero[t]

    def normalize(self) -> NormalizedRiskMeasure:
        return NormalizedRiskMeasure(self)


class NormalizedRiskMeasure(RiskEvaluator):
    """R_{t,T}(X) - R_{t,T}(0)."""

    def __init__(self, base: RiskEvaluator) -> None:
        self.base = base
        self.tree = base.tree
        self.family = base.family

    def value(self, t: int, x: AdaptedProcess) -> AdaptedVector:
        return self.base.value(t, x) - self.base.zero_value(t)

    def zero_value(self, t: int) -> AdaptedVector:
        if not 0 <= t < self.tree.horizon:
            raise IndexError(f"zero_value: t = {t} must satisfy 0 <= t < T = {self.tree.horizon}")
        return AdaptedVector.zeros(self.tree, t)


def normalize(measure: RiskEvaluator) -> NormalizedRiskMeasure:
    return NormalizedRiskMeasure(measure)


# ------------------------------
# Values and acceptance
# ------------------------------


def robust_value(measure: RiskEvaluator, t: int, x: AdaptedProcess) -> AdaptedVector:
    return measure.value(t, x)


def robust_accepts(measure: RiskEvaluator, t: int, x: AdaptedProcess) -> EventSet:
    """Atoms of time t on which the robust capital requirement is non-positive."""
    return EventSet(measure.tree, t, measure.value(t, x).values <= current_tolerance())


def tilde_value(
    measure: RiskEvaluator, t: int, x: AdaptedProcess, s: int | None = None
) -> AdaptedVector:
    """R_{t,s}(X_{t+1:s}) + X_t."""
    end = measure.horizon if s is None else s
    return measure.value(t, x.slice(t, end)) + x[t]


def prudence_gap(
    measure: RiskEvaluator, family: RiskFamily, x: AdaptedProcess, t: int
) -> AdaptedVector:
    """R_{t,T}(X) minus the nested one-step chain rho_t(X_{t+1} + … rho_{T-1}(X_T))."""
    return measure.value(t, x) - nested_evaluate(family, measure.tree, x, t)


# ------------------------------
# Consolidated sets
# ------------------------------


def _check_member_time(measure: RiskEvaluator, s: int, y: AdaptedVector, *, where: str) -> None:
    if not 1 <= s <= measure.horizon:
        raise IndexError(f"{where}: s = {s} outside 1..{measure.horizon}")
    if y.tree is not measure.tree or y.time != s:
        raise ValueError(f"{where}: candidate must be measured at {s} on the measure's tree")


def consolidated_gap(
    measure: RiskEvaluator, s: int, y: AdaptedVector, x: AdaptedProcess
) -> AdaptedVector:
    """rho_{s-1}(Y) - R_{s-1,T}(X_{s:T}) per atom of time s-1."""
    _check_member_time(measure, s, y, where="consolidated_contains")
    rho = measure.family.at(s - 1)
    return evaluate_one_step(rho, measure.tree, y) - measure.value(s - 1, x)


def consolidated_contains(
    measure: RiskEvaluator, s: int, y: AdaptedVector, x: AdaptedProcess
) -> EventSet:
    """Y in U_s(X_{s:T}) per atom of time s-1, through the dual description."""
    gap = consolidated_gap(measure, s, y, x)
    return EventSet(measure.tree, s - 1, gap.values <= current_tolerance())


def consolidated_contains_repr(
    measure: RiskEvaluator, s: int, y: AdaptedVector, x: AdaptedProcess
) -> EventSet:
    """Y in A^rho_{s-1} + R_{s-1,T}(X_{s:T}) per atom of time s-1."""
    _check_member_time(measure, s, y, where="consolidated_contains_repr")
    shifted = y - measure.value(s - 1, x).lift(s)
    risk = evaluate_one_step(measure.family.at(s - 1), measure.tree, shifted)
    return EventSet(measure.tree, s - 1, risk.values <= current_tolerance())


class ConsolidatedKind(CustomSetKind):
    """U_t(X_{t:T}) = {Y : rho_{t-1}(Y) <= R_{t-1,T}(X_{t:T})}."""

    def __init__(self, measure: RiskEvaluator) -> None:
        self.measure = measure

    def describe(self) -> str:
        return "consolidated"

    def membership_gap(
        self, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray:
        return consolidated_gap(self.measure, t, y, x).values

    def worst_case(
        self, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
    ) -> FloatArray:
        bound = self.measure.value(t - 1, x).values
        base = self.measure.family.at(t - 1)
        if rho == base:
            return bound.copy()
        probs = tree.conditional_probs(t)
        groups = tree.child_groups(t - 1)
        offsets = np.array([conjugate_offset(rho, base, probs[g]) for g in groups])
        return bound + offsets

    def sample_member(
        self,
        tree: ScenarioTree,
        x: AdaptedProcess,
        t: int,
        rng: np.random.Generator,
        boundary: bool,
    ) -> AdaptedVector | None:
        shape = AdaptedVector(tree, t, x[t].values + rng.normal(size=tree.size(t)))
        bound = self.measure.value(t - 1, x)
        excess = evaluate_one_step(self.measure.family.at(t - 1), tree, shape) - bound
        slack = 0.0 if boundary else float(rng.exponential(0.5))
        return shape - (excess + slack).lift(t)

    def dominated_gap(
        self, tree: ScenarioTree, z: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray | None:
        return np.maximum(consolidated_gap(self.measure, t, z, x).values, 0.0)


def consolidated_set(measure: RiskEvaluator) -> DynamicUncertaintySet:
    kind = ConsolidatedKind(measure)
    return DynamicUncertaintySet.uniform(kind, measure.horizon)
