"""Randomized property checks for uncertainty sets and robust risk measures.

Set properties are judged per parent atom by comparing sampled set views; measure
properties compare robust values atom by atom. Every check is keyed by an id and
dispatched through a handler table; a verdict id is `set.<id>` or `measure.<id>`.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from .checking import (
    Relation,
    SetView,
    compare_views,
    domination_gaps,
    members_per_trial,
    parent_max,
    run_trials,
    vacuous,
    witness,
)
from .riskmeasures import evaluate_one_step
from .risk_types import GAUGE_PANEL, CheckSpec, Expectation, Verdict, Witness, current_tolerance
from .robust import RiskEvaluator, consolidated_contains, prudence_gap
from .sampling import random_event, random_process, random_scale, random_vector, raise_tail
from .space import AdaptedProcess, AdaptedVector, EventSet, FloatArray, ScenarioTree, mix
from .uncertainty import CustomSetKind, DynamicUncertaintySet, SetKind, validate_set

logger = logging.getLogger(__name__)


# ------------------------------
# Set properties
# ------------------------------


@dataclass(frozen=True)
class SetTrial:
    """One trial against u_t: the set, the time and the trial's generator."""

    uset: DynamicUncertaintySet
    tree: ScenarioTree
    spec: CheckSpec
    rng: np.random.Generator
    t: int
    count: int

    @property
    def kind(self) -> SetKind:
        return self.uset.at(self.t)

    def view(
        self, x: AdaptedProcess, *, shift: FloatArray | None = None, scale: FloatArray | None = None
    ) -> SetView:
        return SetView(self.kind, x, self.t, shift, scale)

    def process(self) -> AdaptedProcess:
        return random_process(self.rng, self.tree)

    def compare(self, a: SetView, b: SetView, relation: Relation = "eq") -> FloatArray:
        return compare_views(a, b, relation, self.rng, self.count)

    def found(
        self,
        gaps: FloatArray,
        processes: Mapping[str, AdaptedProcess],
        *,
        detail: str,
        horizon: int | None = None,
        event: EventSet | None = None,
        scale: AdaptedVector | None = None,
    ) -> Witness | None:
        return witness(
            self.tree,
            self.t - 1,
            gaps,
            processes,
            time=self.t,
            horizon=horizon,
            event=event,
            scale=scale,
            detail=detail,
        )


SetCheck = Callable[[SetTrial], "Witness | None"]


def _set_proper(c: SetTrial) -> Witness | None:
    x = c.process()
    sup = c.view(x).sup(Expectation())
    gaps = np.where(np.isfinite(sup), 0.0, np.inf)
    detail = "unbounded above"
    if isinstance(c.kind, CustomSetKind) and not c.view(x).members(c.rng, 1):
        gaps = np.full(c.tree.size(c.t - 1), np.inf)
        detail = "no member found"
    return c.found(gaps, {"X": x}, detail=detail)


def _set_normalised(c: SetTrial) -> Witness | None:
    zeros = AdaptedProcess.zeros(c.tree)
    view = c.view(zeros)
    gaps = np.zeros(c.tree.size(c.t - 1))
    for rho in GAUGE_PANEL:
        gaps = np.maximum(gaps, np.abs(view.sup(rho)))
    for y in view.members(c.rng, c.count):
        gaps = np.maximum(gaps, parent_max(c.tree, c.t, np.abs(y.values)))
    return c.found(gaps, {}, detail="u_t(0) differs from {0}")


def _set_zero_in_zero(c: SetTrial) -> Witness | None:
    view = c.view(AdaptedProcess.zeros(c.tree))
    return c.found(view.gap(AdaptedVector.zeros(c.tree, c.t)), {}, detail="0 not in u_t(0)")


def _set_order_preserving(c: SetTrial) -> Witness | None:
    x = c.process()
    y = raise_tail(c.rng, x, c.t)
    gaps = domination_gaps(c.view(x), c.view(y), c.rng, c.count)
    return c.found(gaps, {"X": x, "Y": y}, detail="member of u(X) not dominated in u(Y)")


def _set_monotone(c: SetTrial) -> Witness | None:
    x = c.process()
    y = raise_tail(c.rng, x, c.t)
    gaps = c.compare(c.view(x), c.view(y), "sub")
    return c.found(gaps, {"X": x, "Y": y}, detail="u(X) not inside u(Y)")


def _set_translation_invariant(c: SetTrial) -> Witness | None:
    x = c.process()
    s = int(c.rng.integers(0, c.t))
    z = random_vector(c.rng, c.tree, s)
    shift = z.lift(c.t - 1)
    moved = x.replace(c.t, x[c.t] + shift.lift(c.t))
    gaps = c.compare(c.view(moved), c.view(x, shift=shift.values))
    z_process = AdaptedProcess.zeros(c.tree).replace(s, z)
    return c.found(gaps, {"X": x, "Z": z_process}, horizon=s, detail="u(X + Z) != u(X) + Z")


def _set_static(c: SetTrial) -> Witness | None:
    x = c.process()
    gaps = c.compare(c.view(x), c.view(x.slice(c.t, c.t)))
    return c.found(gaps, {"X": x}, detail="u(X_{t:T}) != u(X_t)")


def _set_local(c: SetTrial) -> Witness | None:
    x, y = c.process(), c.process()
    event = random_event(c.rng, c.tree, c.t - 1, density=c.spec.event_density)
    mixed = c.view(mix(event, x, y))
    gaps = np.where(
        event.mask, c.compare(mixed, c.view(x)), c.compare(mixed, c.view(y))
    )
    return c.found(gaps, {"X": x, "Y": y}, event=event, detail="mixing changed the set")


def _homogeneity(c: SetTrial, upper: float, relation: Relation) -> Witness | None:
    x = c.process()
    lam = random_scale(c.rng, c.tree, c.t - 1, upper=upper)
    scaled = c.view(x.scale(lam))
    positive = c.compare(scaled, c.view(x, scale=lam.values), relation)
    at_zero = c.compare(scaled, c.view(AdaptedProcess.zeros(c.tree)), relation)
    gaps = np.where(lam.values > 0.0, positive, at_zero)
    return c.found(gaps, {"X": x}, scale=lam, detail=f"u(lambda X) vs lambda u(X) ({relation})")


def _set_positive_homogeneous(c: SetTrial) -> Witness | None:
    return _homogeneity(c, c.spec.scale_upper, "eq")


def _set_star_shaped(c: SetTrial) -> Witness | None:
    return _homogeneity(c, 1.0, "sub")


SET_PROPERTIES: dict[str, SetCheck] = {
    "proper": _set_proper,
    "normalised": _set_normalised,
    "zero_in_zero": _set_zero_in_zero,
    "order_preserving": _set_order_preserving,
    "monotone": _set_monotone,
    "translation_invariant": _set_translation_invariant,
    "static": _set_static,
    "local": _set_local,
    "positive_homogeneous": _set_positive_homogeneous,
    "star_shaped": _set_star_shaped,
}


def check_set_property(
    target: DynamicUncertaintySet | SetKind,
    tree: ScenarioTree,
    prop: str,
    spec: CheckSpec | None = None,
) -> Verdict:
    """Search for a violation of set property `prop` at a random time of every trial."""
    handler = SET_PROPERTIES.get(prop)
    if handler is None:
        raise ValueError(f"check_set_property: unknown property {prop!r}")
    uset = (
        target
        if isinstance(target, DynamicUncertaintySet)
        else DynamicUncertaintySet.uniform(target, tree.horizon)
    )
    validate_set(uset, tree)
    plan = spec if spec is not None else CheckSpec.from_settings()
    count = members_per_trial(plan)

    def trial(rng: np.random.Generator) -> Witness | None:
        t = int(rng.integers(1, tree.horizon + 1))
        return handler(SetTrial(uset, tree, plan, rng, t, count))

    return run_trials(f"set.{prop}", plan, trial)


# ------------------------------
# Measure properties
# ------------------------------


@dataclass(frozen=True)
class MeasureTrial:
    """One trial against R_{t,T}."""

    measure: RiskEvaluator
    spec: CheckSpec
    rng: np.random.Generator
    t: int

    @property
    def tree(self) -> ScenarioTree:
        return self.measure.tree

    def process(self) -> AdaptedProcess:
        return random_process(self.rng, self.tree)

    def value(self, x: AdaptedProcess) -> FloatArray:
        return self.measure.value(self.t, x).values

    def weight(self, upper: float) -> AdaptedVector:
        return random_scale(self.rng, self.tree, self.t, upper=upper)

    def found(
        self,
        gaps: FloatArray,
        processes: Mapping[str, AdaptedProcess],
        *,
        detail: str,
        horizon: int | None = None,
        event: EventSet | None = None,
        scale: AdaptedVector | None = None,
    ) -> Witness | None:
        return witness(
            self.tree,
            self.t,
            gaps,
            processes,
            time=self.t,
            horizon=horizon,
            event=event,
            scale=scale,
            detail=detail,
        )


MeasureCheck = Callable[[MeasureTrial], "Witness | None"]


def _measure_normalised(c: MeasureTrial) -> Witness | None:
    gaps = np.abs(c.measure.zero_value(c.t).values)
    return c.found(gaps, {}, detail="R(0) != 0")


def _measure_zero_nonpositive(c: MeasureTrial) -> Witness | None:
    gaps = np.maximum(c.measure.zero_value(c.t).values, 0.0)
    return c.found(gaps, {}, detail="R(0) > 0")


def _measure_monotone(c: MeasureTrial) -> Witness | None:
    x = c.process()
    y = raise_tail(c.rng, x, c.t + 1)
    return c.found(c.value(x) - c.value(y), {"X": x, "Y": y}, detail="X <= Y but R(X) > R(Y)")


def _measure_translation_invariant(c: MeasureTrial) -> Witness | None:
    x = c.process()
    z = random_vector(c.rng, c.tree, c.t)
    moved = x.replace(c.t + 1, x[c.t + 1] + z.lift(c.t + 1))
    gaps = np.abs(c.value(moved) - c.value(x) - z.values)
    z_process = AdaptedProcess.zeros(c.tree).replace(c.t, z)
    return c.found(gaps, {"X": x, "Z": z_process}, detail="R(X + Z) != R(X) + Z")


def _measure_local(c: MeasureTrial) -> Witness | None:
    x, y = c.process(), c.process()
    event = random_event(c.rng, c.tree, c.t, density=c.spec.event_density)
    expected = np.where(event.mask, c.value(x), c.value(y))
    gaps = np.abs(c.value(mix(event, x, y)) - expected)
    return c.found(gaps, {"X": x, "Y": y}, event=event, detail="R(1_B X + 1_B^c Y) not mixed")


def _scaled(c: MeasureTrial, upper: float) -> tuple[AdaptedProcess, AdaptedVector, FloatArray]:
    x = c.process()
    lam = c.weight(upper)
    lhs = c.value(x.scale(lam))
    return x, lam, lhs


def _measure_positive_homogeneous(c: MeasureTrial) -> Witness | None:
    x, lam, lhs = _scaled(c, c.spec.scale_upper)
    gaps = np.abs(lhs - lam.values * c.value(x))
    return c.found(gaps, {"X": x}, scale=lam, detail="R(lambda X) != lambda R(X)")


def _offset(c: MeasureTrial, lam: AdaptedVector) -> FloatArray:
    return np.where(lam.values == 0.0, c.measure.zero_value(c.t).values, 0.0)


def _measure_positive_homogeneous_offset(c: MeasureTrial) -> Witness | None:
    x, lam, lhs = _scaled(c, c.spec.scale_upper)
    gaps = np.abs(lhs - lam.values * c.value(x) - _offset(c, lam))
    return c.found(gaps, {"X": x}, scale=lam, detail="R(lambda X) != lambda R(X) + 1 R(0)")


def _measure_star_shaped(c: MeasureTrial) -> Witness | None:
    x, lam, lhs = _scaled(c, 1.0)
    gaps = lhs - lam.values * c.value(x) - _offset(c, lam)
    return c.found(gaps, {"X": x}, scale=lam, detail="R(lambda X) > lambda R(X) + 1 R(0)")


def _combination(c: MeasureTrial, sign: float) -> Witness | None:
    x, y = c.process(), c.process()
    lam = random_scale(c.rng, c.tree, c.t, upper=1.0, zero_share=0.1)
    mixed = x.scale(lam) + y.scale(1.0 - lam)
    rhs = lam.values * c.value(x) + (1.0 - lam.values) * c.value(y)
    gaps = sign * (c.value(mixed) - rhs)
    name = "convex" if sign > 0 else "concave"
    return c.found(gaps, {"X": x, "Y": y}, scale=lam, detail=f"not {name} along lambda")


def _measure_convex(c: MeasureTrial) -> Witness | None:
    return _combination(c, 1.0)


def _measure_concave(c: MeasureTrial) -> Witness | None:
    return _combination(c, -1.0)


def _sum(c: MeasureTrial, sign: float | None) -> Witness | None:
    x, y = c.process(), c.process()
    diff = c.value(x + y) - c.value(x) - c.value(y)
    gaps = np.abs(diff) if sign is None else sign * diff
    return c.found(gaps, {"X": x, "Y": y}, detail="R(X + Y) vs R(X) + R(Y)")


def _measure_subadditive(c: MeasureTrial) -> Witness | None:
    return _sum(c, 1.0)


def _measure_superadditive(c: MeasureTrial) -> Witness | None:
    return _sum(c, -1.0)


def _measure_additive(c: MeasureTrial) -> Witness | None:
    return _sum(c, None)


def _measure_zero_is_acceptance(c: MeasureTrial) -> Witness | None:
    tree, t = c.tree, c.t
    rho = c.measure.family.at(t)
    zero = c.measure.zero_value(t).values
    shape = random_vector(c.rng, tree, t + 1)
    level = evaluate_one_step(rho, tree, shape).values
    # rho_t(Y) equals `offset` by translation invariance
    offset = c.rng.uniform(-1.0, 1.0, size=tree.size(t)) * (np.abs(zero) + 0.1)
    y = shape + AdaptedVector(tree, t, offset - level).lift(t + 1)
    in_u = consolidated_contains(c.measure, t + 1, y, AdaptedProcess.zeros(tree)).mask
    in_a = evaluate_one_step(rho, tree, y).values <= current_tolerance()
    gaps = np.where(in_u != in_a, np.abs(zero), 0.0)
    return c.found(gaps, {}, detail="U_{t+1}(0) differs from the acceptance set")


def _measure_prudence_chain(c: MeasureTrial) -> Witness | None:
    x = c.process()
    gaps = -prudence_gap(c.measure, c.measure.family, x, c.t).values
    return c.found(gaps, {"X": x}, detail="R below the nested one-step chain")


def _measure_cash_shift(c: MeasureTrial) -> Witness | None:
    x = c.process()
    s = int(c.rng.integers(c.t + 1, c.measure.horizon))
    cash = random_vector(c.rng, c.tree, s)
    head = x.slice(0, s)
    later = head.replace(s + 1, cash.lift(s + 1))
    merged = head.replace(s, x[s] + cash)
    gaps = np.abs(c.value(later) - c.value(merged))
    detail = "F_s cash paid at s + 1 valued differently from cash paid at s"
    return c.found(gaps, {"X": later, "Y": merged}, horizon=s, detail=detail)


def _measure_strong_shift_invariance(c: MeasureTrial) -> Witness | None:
    x = c.process()
    s = int(c.rng.integers(c.t + 1, c.measure.horizon))
    lam = float(c.rng.choice([-2.0, -1.0, 1.0, 2.0]))
    moved = x.replace(s, x[s] + c.measure.zero_value(s) * lam)
    gaps = np.abs(c.value(moved) - c.value(x))
    return c.found(gaps, {"X": x}, horizon=s, detail=f"R(X + {lam:g} R_s(0)) != R(X)")


MEASURE_PROPERTIES: dict[str, MeasureCheck] = {
    "normalised": _measure_normalised,
    "zero_nonpositive": _measure_zero_nonpositive,
    "monotone": _measure_monotone,
    "translation_invariant": _measure_translation_invariant,
    "local": _measure_local,
    "positive_homogeneous": _measure_positive_homogeneous,
    "positive_homogeneous_offset": _measure_positive_homogeneous_offset,
    "star_shaped": _measure_star_shaped,
    "convex": _measure_convex,
    "concave": _measure_concave,
    "subadditive": _measure_subadditive,
    "superadditive": _measure_superadditive,
    "additive": _measure_additive,
    "zero_is_acceptance": _measure_zero_is_acceptance,
    "prudence_chain": _measure_prudence_chain,
    "strong_shift_invariance": _measure_strong_shift_invariance,
    "cash_shift": _measure_cash_shift,
}

# Checks that compare R_{t,T} against R_{s,T} for some later s < T.
_NEEDS_INNER_TIME = frozenset({"strong_shift_invariance", "cash_shift"})


def check_measure_property(
    measure: RiskEvaluator, prop: str, spec: CheckSpec | None = None
) -> Verdict:
    """Search for a violation of measure property `prop` at a random time of every trial."""
    handler = MEASURE_PROPERTIES.get(prop)
    if handler is None:
        raise ValueError(f"check_measure_property: unknown property {prop!r}")
    plan = spec if spec is not None else CheckSpec.from_settings()
    check = f"measure.{prop}"
    last = measure.horizon - 1
    if prop in _NEEDS_INNER_TIME:
        last -= 1
        if last < 0:
            return vacuous(check, "no intermediate time before the horizon")

    def trial(rng: np.random.Generator) -> Witness | None:
        t = int(rng.integers(0, last + 1))
        return handler(MeasureTrial(measure, plan, rng, t))

    return run_trials(check, plan, trial)
