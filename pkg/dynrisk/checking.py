"""Shared machinery of the randomized checkers: trial loops, witnesses and set comparisons.

A check is a sequence of independent trials, each with its own generator derived
from (seed, trial index). The first trial whose violation exceeds the tolerance
produces the witness, so equal seeds give equal verdicts.

Set equality and inclusion are decided on a sample: the worst cases of both sets
under the gauge panel must agree, and sampled members of one side must belong
to the other.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .risk_types import (
    GAUGE_PANEL,
    CheckSpec,
    RiskKind,
    Verdict,
    Witness,
    current_settings,
    current_tolerance,
    use_settings,
)
from .sampling import trial_rng
from .space import AdaptedProcess, AdaptedVector, EventSet, FloatArray, ScenarioTree
from .uncertainty import (
    SetKind,
    dominated_gap,
    membership_gap,
    sample_members,
    worst_case_values,
)

logger = logging.getLogger(__name__)

GAUGE_TOLERANCE = 1e-7
MUTANT_FAMILY = "weak_recursive"

Trial = Callable[[np.random.Generator], "Witness | None"]
Relation = Literal["eq", "sub"]


# ------------------------------
# Trial loop
# ------------------------------


def run_trials(check: str, spec: CheckSpec, trial: Trial) -> Verdict:
    """Run `spec.trials` trials; the first violation above tolerance wins."""
    tolerance = current_tolerance()
    verdict = Verdict(check=check, status="corroborated", trials=spec.trials)
    with use_settings(value_box=spec.value_box):
        for index in range(spec.trials):
            found = trial(trial_rng(spec.seed, index))
            if found is not None and found.gap > tolerance:
                logger.info("%s: counterexample in trial %d, gap %.3g", check, index, found.gap)
                witness = found.model_copy(update={"trial": index})
                verdict = Verdict(
                    check=check, status="counterexample", trials=index + 1, witness=witness
                )
                break
    return _mutate(verdict, spec)


def vacuous(check: str, reason: str) -> Verdict:
    logger.info("%s: vacuous (%s)", check, reason)
    return Verdict(check=check, status="vacuous", trials=0)


def _mutate(verdict: Verdict, spec: CheckSpec) -> Verdict:
    if not spec.mutant or not verdict.check.endswith(MUTANT_FAMILY):
        return verdict
    if verdict.status == "counterexample":
        return Verdict(check=verdict.check, status="corroborated", trials=verdict.trials)
    witness = Witness(time=0, gap=1.0, detail="mutant checker")
    return Verdict(check=verdict.check, status="counterexample", trials=0, witness=witness)


def members_per_trial(spec: CheckSpec) -> int:
    """Membership samples of one comparison, spread over the trials of a check."""
    return max(4, math.ceil(current_settings().membership_samples / spec.trials))


# ------------------------------
# Witnesses
# ------------------------------


def witness(
    tree: ScenarioTree,
    at: int,
    gaps: FloatArray,
    processes: Mapping[str, AdaptedProcess],
    *,
    time: int,
    horizon: int | None = None,
    event: EventSet | None = None,
    scale: AdaptedVector | None = None,
    detail: str = "",
) -> Witness | None:
    """Witness at the atom of time `at` with the largest gap; None when within tolerance."""
    clean = np.where(np.isnan(gaps), 0.0, gaps)
    k = int(np.argmax(clean))
    gap = float(clean[k])
    if not gap > current_tolerance():
        return None
    return Witness(
        time=time,
        horizon=horizon,
        atom=tree.atom_ids(at)[k],
        gap=gap,
        processes={name: x.to_lists() for name, x in processes.items()},
        event=event.ids() if event is not None else None,
        scale=scale.values.tolist() if scale is not None else None,
        detail=detail,
    )


# ------------------------------
# Set views and comparisons
# ------------------------------


@dataclass(frozen=True)
class SetView:
    """shift + scale * u_t(X_{t:T}); shift and scale are per parent atom (time t-1)."""

    kind: SetKind
    x: AdaptedProcess
    t: int
    shift: FloatArray | None = None
    scale: FloatArray | None = None

    @property
    def tree(self) -> ScenarioTree:
        return self.x.tree

    def _scale(self) -> FloatArray:
        if self.scale is None:
            return np.ones(self.tree.size(self.t - 1))
        return np.where(self.scale > 0.0, self.scale, 1.0)

    def _shift(self) -> FloatArray:
        return np.zeros(self.tree.size(self.t - 1)) if self.shift is None else self.shift

    def _forward(self, y: AdaptedVector) -> AdaptedVector:
        parents = self.tree.parent_index(self.t)
        values = y.values * self._scale()[parents] + self._shift()[parents]
        return AdaptedVector(self.tree, self.t, values)

    def _backward(self, y: AdaptedVector) -> AdaptedVector:
        parents = self.tree.parent_index(self.t)
        values = (y.values - self._shift()[parents]) / self._scale()[parents]
        return AdaptedVector(self.tree, self.t, values)

    def members(self, rng: np.random.Generator, count: int) -> list[AdaptedVector]:
        base = sample_members(self.kind, self.tree, self.x, self.t, rng, count)
        return [self._forward(y) for y in base]

    def gap(self, y: AdaptedVector) -> FloatArray:
        return membership_gap(self.kind, self.tree, self._backward(y), self.x, self.t).values

    def sup(self, rho: RiskKind) -> FloatArray:
        raw = worst_case_values(self.kind, rho, self.tree, self.x, self.t - 1)
        return raw * self._scale() + self._shift()

    def dominated(self, z: AdaptedVector) -> FloatArray | None:
        gap = dominated_gap(self.kind, self.tree, self._backward(z), self.x, self.t)
        return None if gap is None else gap.values


def sup_gaps(a: SetView, b: SetView, relation: Relation) -> FloatArray:
    """Per parent atom, how far the gauge suprema break `a = b` or `a ⊆ b`."""
    gaps = np.zeros(a.tree.size(a.t - 1))
    for rho in GAUGE_PANEL:
        left, right = a.sup(rho), b.sup(rho)
        with np.errstate(invalid="ignore"):
            diff = left - right if relation == "sub" else np.abs(left - right)
        diff = np.where(np.isnan(diff), 0.0, diff)
        gaps = np.maximum(gaps, diff - GAUGE_TOLERANCE)
    return gaps


def compare_views(
    a: SetView, b: SetView, relation: Relation, rng: np.random.Generator, count: int
) -> FloatArray:
    """Per parent atom, the largest violation of `a = b` (eq) or `a ⊆ b` (sub)."""
    gaps = sup_gaps(a, b, relation)
    for y in a.members(rng, count):
        gaps = np.maximum(gaps, b.gap(y))
    if relation == "eq":
        for y in b.members(rng, count):
            gaps = np.maximum(gaps, a.gap(y))
    return gaps


def domination_gaps(
    a: SetView, b: SetView, rng: np.random.Generator, count: int
) -> FloatArray:
    """Per parent atom, violation of "every member of a lies below some member of b"."""
    gaps = sup_gaps(a, b, "sub")
    for z in a.members(rng, count):
        dominated = b.dominated(z)
        if dominated is not None:
            gaps = np.maximum(gaps, dominated)
    return gaps


def parent_max(tree: ScenarioTree, t: int, values: FloatArray) -> FloatArray:
    """Largest of the time-t `values` below each atom of time t-1."""
    out = np.zeros(tree.size(t - 1))
    np.maximum.at(out, tree.parent_index(t), values)
    return out
