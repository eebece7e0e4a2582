"""Randomized time-consistency checks at set, consolidated-set and measure level.

The substitution X_{t:s} + R_{s,T}(X_{s+1:T}) replaces the tail after s by its
risk, collapsed onto component s. Set levels take s in {t, …, T-1} and compare
u_t views; the measure level takes s in {t+1, …, T-1} and compares values.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .checking import SetView, compare_views, members_per_trial, run_trials, vacuous, witness
from .risk_types import CheckSpec, Verdict, Witness, current_tolerance
from .robust import RiskEvaluator, RobustRiskMeasure, consolidated_set
from .sampling import random_process, raise_tail
from .space import AdaptedProcess, AdaptedVector, EventSet, FloatArray, ScenarioTree, mix
from .uncertainty import DynamicUncertaintySet

logger = logging.getLogger(__name__)

ConsistencyLevel = Literal["set", "consolidated", "measure"]

NOTIONS = ("strong", "order", "rejection", "weak_recursive", "weak", "prudent")
SET_LEVELS: tuple[ConsistencyLevel, ...] = ("set", "consolidated")


def collapse(
    measure: RiskEvaluator, x: AdaptedProcess, s: int, *, recentre: bool = False
) -> AdaptedProcess:
    """X_{0:s} + R_{s,T}(X_{s+1:T}) on component s, minus R_{s,T}(0) when recentred."""
    tail = measure.value(s, x)
    if recentre:
        tail = tail - measure.zero_value(s)
    return x.slice(0, s).replace(s, x[s] + tail)


def _all_children(tree: ScenarioTree, t: int, mask: np.ndarray) -> np.ndarray:
    """Per atom of time t-1: whether `mask` holds on every child."""
    out = np.ones(tree.size(t - 1), dtype=bool)
    np.logical_and.at(out, tree.parent_index(t), mask)
    return out


def _fresh_tail(rng: np.random.Generator, x: AdaptedProcess, s: int) -> AdaptedProcess:
    """X up to s followed by either a raised or an independent tail."""
    if rng.uniform() < 0.5:
        return raise_tail(rng, x, s + 1)
    return x.slice(0, s) + random_process(rng, x.tree).tail(s + 1)


# ------------------------------
# Measure level
# ------------------------------


@dataclass(frozen=True)
class _MeasureCase:
    measure: RiskEvaluator
    rng: np.random.Generator
    t: int
    s: int

    @property
    def tree(self) -> ScenarioTree:
        return self.measure.tree

    def value(self, x: AdaptedProcess) -> FloatArray:
        return self.measure.value(self.t, x).values

    def found(
        self, gaps: FloatArray, processes: dict[str, AdaptedProcess], detail: str
    ) -> Witness | None:
        return witness(
            self.tree, self.t, gaps, processes, time=self.t, horizon=self.s, detail=detail
        )


def _measure_strong(c: _MeasureCase) -> Witness | None:
    x = random_process(c.rng, c.tree)
    gaps = np.abs(c.value(x) - c.value(collapse(c.measure, x, c.s)))
    return c.found(gaps, {"X": x}, "R(X) != R(X_{t+1:s} + R_s(X))")


def _equal_tail_partner(c: _MeasureCase, x: AdaptedProcess) -> AdaptedProcess | None:
    """Y with X_{t+1:s} + R_s(X) = Y_{t+1:s} + R_s(Y) for every s, or None."""
    last = c.measure.horizon - 1
    w = random_process(c.rng, c.tree)[last + 1]
    y = x.replace(last + 1, w)
    moved = x[last] + c.measure.value(last, x) - c.measure.value(last, y)
    y = y.replace(last, moved)
    for s in range(c.t + 1, last):
        if c.measure.value(s, x).max_abs_gap(c.measure.value(s, y)) > current_tolerance():
            return None
    return y


def _measure_weak_recursive(c: _MeasureCase) -> Witness | None:
    x = random_process(c.rng, c.tree)
    gaps = np.abs(c.value(x) - c.value(collapse(c.measure, x, c.s, recentre=True)))
    found = c.found(gaps, {"X": x}, "R(X) != R(X_{t+1:s} + R_s(X) - R_s(0))")
    if found is not None:
        return found
    y = _equal_tail_partner(c, x)
    if y is None:
        return None
    gaps = np.abs(c.value(x) - c.value(y))
    return c.found(gaps, {"X": x, "Y": y}, "equal collapsed tails but R(X) != R(Y)")


def _measure_weak(c: _MeasureCase) -> Witness | None:
    x = random_process(c.rng, c.tree)
    gaps = c.value(collapse(c.measure, x, c.s)) - c.value(x)
    return c.found(gaps, {"X": x}, "R(X_{t+1:s} + R_s(X)) > R(X)")


def _measure_order(c: _MeasureCase) -> Witness | None:
    x = random_process(c.rng, c.tree)
    candidate = _fresh_tail(c.rng, x, c.s)
    tol = current_tolerance()
    higher = c.measure.value(c.s, x).values <= c.measure.value(c.s, candidate).values + tol
    y = mix(EventSet(c.tree, c.s, higher), candidate, x)
    premise = c.measure.value(c.s, x).values - c.measure.value(c.s, y).values
    if np.any(premise > tol):
        return None
    gaps = c.value(x) - c.value(y)
    return c.found(gaps, {"X": x, "Y": y}, "R_s(X) <= R_s(Y) but R(X) > R(Y)")


def _measure_rejection(c: _MeasureCase) -> Witness | None:
    tree, t = c.tree, c.t
    x = random_process(c.rng, tree)
    x = x.replace(t + 1, AdaptedVector(tree, t + 1, np.abs(x[t + 1].values)))
    if t + 1 < tree.horizon and c.rng.uniform() < 0.5:
        lift = float(c.rng.uniform(0.0, 1.0))
        x = x.replace(tree.horizon, x[tree.horizon] + lift)
    if t + 1 < tree.horizon:
        later = c.measure.value(t + 1, x).values
    else:
        later = np.zeros(tree.size(t + 1))
    premise = _all_children(tree, t + 1, later >= -current_tolerance())
    gaps = np.where(premise, -c.value(x), 0.0)
    return c.found(gaps, {"X": x}, "R_{t+1}(X) >= 0 but R_t(X) < 0")


_MeasureCheck = Callable[[_MeasureCase], "Witness | None"]

_MEASURE_NOTIONS: dict[str, _MeasureCheck] = {
    "strong": _measure_strong,
    "weak_recursive": _measure_weak_recursive,
    "weak": _measure_weak,
    "order": _measure_order,
    "rejection": _measure_rejection,
}


def _check_measure(measure: RiskEvaluator, notion: str, spec: CheckSpec) -> Verdict:
    handler = _MEASURE_NOTIONS.get(notion)
    if handler is None:
        raise ValueError(f"check_time_consistency: notion {notion!r} has no measure-level form")
    check = f"measure.{notion}"
    horizon = measure.horizon
    if notion == "rejection":

        def rejection_trial(rng: np.random.Generator) -> Witness | None:
            t = int(rng.integers(0, horizon))
            return handler(_MeasureCase(measure, rng, t, t + 1))

        return run_trials(check, spec, rejection_trial)
    if horizon < 2:
        return vacuous(check, "no intermediate time s with t < s < T")

    def trial(rng: np.random.Generator) -> Witness | None:
        t = int(rng.integers(0, horizon - 1))
        s = int(rng.integers(t + 1, horizon))
        return handler(_MeasureCase(measure, rng, t, s))

    return run_trials(check, spec, trial)


# ------------------------------
# Set levels
# ------------------------------


@dataclass(frozen=True)
class _SetCase:
    measure: RiskEvaluator
    uset: DynamicUncertaintySet
    rng: np.random.Generator
    t: int
    s: int
    count: int

    @property
    def tree(self) -> ScenarioTree:
        return self.measure.tree

    def view(self, x: AdaptedProcess, at: int | None = None) -> SetView:
        time = self.t if at is None else at
        return SetView(self.uset.at(time), x, time)

    def found(
        self, gaps: FloatArray, processes: dict[str, AdaptedProcess], detail: str
    ) -> Witness | None:
        return witness(
            self.tree, self.t - 1, gaps, processes, time=self.t, horizon=self.s, detail=detail
        )


def _substitution(c: _SetCase, *, recentre: bool) -> Witness | None:
    x = random_process(c.rng, c.tree)
    y = collapse(c.measure, x, c.s, recentre=recentre)
    gaps = compare_views(c.view(x), c.view(y), "eq", c.rng, c.count)
    return c.found(gaps, {"X": x, "collapsed": y}, "u_t(X) changes under the substitution")


def _set_strong(c: _SetCase) -> Witness | None:
    return _substitution(c, recentre=False)


def _set_weak_recursive(c: _SetCase) -> Witness | None:
    return _substitution(c, recentre=True)


def _set_weak(c: _SetCase) -> Witness | None:
    x = random_process(c.rng, c.tree)
    y = collapse(c.measure, x, c.s)
    gaps = compare_views(c.view(y), c.view(x), "sub", c.rng, c.count)
    return c.found(gaps, {"X": x, "collapsed": y}, "u_t(collapsed X) not inside u_t(X)")


def _set_order(c: _SetCase) -> Witness | None:
    x = random_process(c.rng, c.tree)
    candidate = _fresh_tail(c.rng, x, c.s)
    after = c.s + 1
    inclusion = compare_views(c.view(x, after), c.view(candidate, after), "sub", c.rng, c.count)
    included = inclusion <= current_tolerance()
    y = mix(EventSet(c.tree, c.s, included), candidate, x)
    premise = compare_views(c.view(x, after), c.view(y, after), "sub", c.rng, c.count)
    if np.any(premise > current_tolerance()):
        return None
    gaps = compare_views(c.view(x), c.view(y), "sub", c.rng, c.count)
    return c.found(gaps, {"X": x, "Y": y}, "u_{s+1} inclusion not carried back to u_t")


def _set_rejection(c: _SetCase) -> Witness | None:
    tree, t = c.tree, c.t
    x = random_process(c.rng, tree)
    x = x.replace(t, AdaptedVector(tree, t, np.abs(x[t].values)))
    if t == tree.horizon:
        # u_{T+1} is {0}, the set counterpart of R_{T,T} = 0
        premise = np.ones(tree.size(t - 1), dtype=bool)
    else:
        if c.rng.uniform() < 0.5:
            x = x.replace(t + 1, AdaptedVector.zeros(tree, t + 1))
        zero_next = c.view(x, t + 1).gap(AdaptedVector.zeros(tree, t + 1))
        premise = _all_children(tree, t, zero_next <= current_tolerance())
    gaps = np.where(premise, c.view(x).gap(AdaptedVector.zeros(tree, t)), 0.0)
    return c.found(gaps, {"X": x}, "0 in u_{t+1}(X) but not in u_t(X)")


def _set_prudent(c: _SetCase) -> Witness | None:
    x = random_process(c.rng, c.tree)
    if c.t == c.tree.horizon:
        candidate = x[c.t]
    else:
        candidate = x[c.t] + c.measure.value(c.t, x) - c.measure.zero_value(c.t)
    gaps = c.view(x).gap(candidate)
    return c.found(gaps, {"X": x}, "recentred future risk outside u_t(X)")


_SetCheck = Callable[[_SetCase], "Witness | None"]

_SET_NOTIONS: dict[str, _SetCheck] = {
    "strong": _set_strong,
    "weak_recursive": _set_weak_recursive,
    "weak": _set_weak,
    "order": _set_order,
    "rejection": _set_rejection,
    "prudent": _set_prudent,
}


def _level_sets(measure: RiskEvaluator, level: ConsistencyLevel) -> DynamicUncertaintySet:
    if level == "consolidated":
        return consolidated_set(measure)
    if not isinstance(measure, RobustRiskMeasure):
        raise TypeError(
            f"check_time_consistency: set level needs a RobustRiskMeasure, "
            f"got {type(measure).__name__}"
        )
    return measure.uset


def _check_sets(
    measure: RiskEvaluator, notion: str, spec: CheckSpec, level: ConsistencyLevel
) -> Verdict:
    handler = _SET_NOTIONS.get(notion)
    if handler is None:
        raise ValueError(f"check_time_consistency: unknown notion {notion!r}")
    uset = _level_sets(measure, level)
    check = f"{level}.{notion}"
    horizon = measure.horizon
    count = members_per_trial(spec)
    if notion in ("prudent", "rejection"):

        def single_time_trial(rng: np.random.Generator) -> Witness | None:
            t = int(rng.integers(1, horizon + 1))
            return handler(_SetCase(measure, uset, rng, t, t, count))

        return run_trials(check, spec, single_time_trial)
    if horizon < 2:
        return vacuous(check, "no time t < T with a later substitution")

    def trial(rng: np.random.Generator) -> Witness | None:
        t = int(rng.integers(1, horizon))
        s = int(rng.integers(t, horizon))
        return handler(_SetCase(measure, uset, rng, t, s, count))

    return run_trials(check, spec, trial)


def check_time_consistency(
    measure: RiskEvaluator,
    notion: str,
    spec: CheckSpec | None = None,
    *,
    level: ConsistencyLevel = "measure",
) -> Verdict:
    """Search for a violation of time-consistency `notion` at the requested level.

    `set` checks the measure's own uncertainty sets, `consolidated` its consolidated
    sets and `measure` the robust values. Prudence exists only at set levels.
    """
    plan = spec if spec is not None else CheckSpec.from_settings()
    if level == "measure":
        return _check_measure(measure, notion, plan)
    if level not in SET_LEVELS:
        raise ValueError(f"check_time_consistency: unknown level {level!r}")
    return _check_sets(measure, notion, plan, level)
