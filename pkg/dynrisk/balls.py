"""Analytic uncertainty-set variants: tolerance rules and the per-variant handlers.

Each handler answers per parent atom. Gaps of members are within tolerance;
worst cases take the evaluation time t and query the set acting at t+1.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.optimize import brentq

from .distances import kl_worst_case, law_wasserstein
from .riskmeasures import evaluate_one_step, kl_divergence, risk_of_law
from .risk_types import (
    ConstantRule,
    FamilyMeasure,
    HorizonRule,
    KLBall,
    MeasureFamily,
    ProportionalRule,
    RiskKind,
    SumHalfspace,
    SupNormBall,
    ToleranceRule,
    TreeStructureError,
    VarScaledRule,
    WassersteinBall,
    ZeroRule,
    current_tolerance,
)
from .space import (
    AdaptedProcess,
    AdaptedVector,
    FloatArray,
    ScenarioTree,
    conditional_expectation,
    conditional_variance,
    expected_tail_sum,
)
from .transport import wasserstein_domination_gap, wasserstein_worst_case

logger = logging.getLogger(__name__)

SAMPLE_ATTEMPTS = 20


# ------------------------------
# Tolerance rules
# ------------------------------


def tolerance_eval(
    rule: ToleranceRule, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> AdaptedVector:
    """eps_{X_t} per atom of time t-1."""
    if not 1 <= t <= tree.horizon:
        raise IndexError(f"tolerance_eval: time {t} outside 1..{tree.horizon}")
    if isinstance(rule, ZeroRule):
        return AdaptedVector.zeros(tree, t - 1)
    if isinstance(rule, ConstantRule):
        return AdaptedVector.constant(tree, t - 1, rule.eps)
    if isinstance(rule, HorizonRule):
        return AdaptedVector.constant(tree, t - 1, rule.eps * (tree.horizon - t))
    if isinstance(rule, VarScaledRule):
        return conditional_variance(x[t]) * rule.eps
    if isinstance(rule, ProportionalRule):
        largest = np.zeros(tree.size(t - 1))
        np.maximum.at(largest, tree.parent_index(t), np.abs(x[t].values))
        return AdaptedVector(tree, t - 1, rule.eps * largest)
    raise TypeError(f"tolerance_eval: unsupported rule {type(rule).__name__}")


# ------------------------------
# Per-parent helpers
# ------------------------------


def _per_parent(
    tree: ScenarioTree, t: int, fn: Callable[[int, np.ndarray], float]
) -> FloatArray:
    return np.array([fn(i, group) for i, group in enumerate(tree.child_groups(t - 1))])


def _group_max(tree: ScenarioTree, t: int, values: FloatArray) -> FloatArray:
    out = np.full(tree.size(t - 1), -np.inf)
    np.maximum.at(out, tree.parent_index(t), values)
    return out


def _radius(rule: ToleranceRule, tree: ScenarioTree, x: AdaptedProcess, t: int) -> FloatArray:
    return tolerance_eval(rule, tree, x, t).values


# ------------------------------
# Identity and sup-norm ball
# ------------------------------


def _identity_gap(
    kind: Any, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    return _group_max(tree, t, np.abs(y.values - x[t].values))


def _identity_worst(
    kind: Any, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> FloatArray:
    return evaluate_one_step(rho, tree, x[t + 1]).values


def _identity_sample(
    kind: Any,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    rng: np.random.Generator,
    boundary: bool,
) -> AdaptedVector | None:
    return x[t]


def _identity_dominated(
    kind: Any, tree: ScenarioTree, z: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    return np.maximum(_group_max(tree, t, z.values - x[t].values), 0.0)


def _sup_gap(
    kind: SupNormBall, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    return _identity_gap(kind, tree, y, x, t) - _radius(kind.rule, tree, x, t)


def _sup_worst(
    kind: SupNormBall, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> FloatArray:
    return evaluate_one_step(rho, tree, x[t + 1]).values + _radius(kind.rule, tree, x, t + 1)


def _sup_sample(
    kind: SupNormBall,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    rng: np.random.Generator,
    boundary: bool,
) -> AdaptedVector | None:
    eps = _radius(kind.rule, tree, x, t)[tree.parent_index(t)]
    n = tree.size(t)
    direction = rng.choice((-1.0, 1.0), size=n) if boundary else rng.uniform(-1.0, 1.0, size=n)
    return AdaptedVector(tree, t, x[t].values + eps * direction)


def _sup_dominated(
    kind: SupNormBall, tree: ScenarioTree, z: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    excess = _identity_dominated(kind, tree, z, x, t) - _radius(kind.rule, tree, x, t)
    return np.maximum(excess, 0.0)


# ------------------------------
# Wasserstein ball
# ------------------------------


def _wasserstein_gap(
    kind: WassersteinBall, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    probs = tree.conditional_probs(t)
    eps = _radius(kind.rule, tree, x, t)
    return _per_parent(
        tree,
        t,
        lambda i, g: law_wasserstein(y.values[g], probs[g], x[t].values[g], probs[g], kind.order)
        - eps[i],
    )


def _wasserstein_worst(
    kind: WassersteinBall, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> FloatArray:
    probs = tree.conditional_probs(t + 1)
    eps = _radius(kind.rule, tree, x, t + 1)
    centre = x[t + 1].values
    return _per_parent(
        tree,
        t + 1,
        lambda i, g: wasserstein_worst_case(rho, centre[g], probs[g], float(eps[i]), kind.order)[0],
    )


def _wasserstein_sample(
    kind: WassersteinBall,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    rng: np.random.Generator,
    boundary: bool,
) -> AdaptedVector | None:
    probs = tree.conditional_probs(t)
    eps = _radius(kind.rule, tree, x, t)
    out = x[t].values.copy()
    for i, g in enumerate(tree.child_groups(t - 1)):
        target = float(eps[i]) * (1.0 if boundary else float(rng.uniform()))
        if target <= 0.0:
            continue
        centre = x[t].values[g]
        direction = rng.normal(size=g.size)

        def distance(step: float, c: FloatArray = centre, d: FloatArray = direction) -> float:
            return law_wasserstein(c + step * d, probs[g], c, probs[g], kind.order) - target

        high = 1.0
        while distance(high) < 0.0:
            high *= 2.0
        out[g] = centre + brentq(distance, 0.0, high, xtol=1e-14) * direction
    return AdaptedVector(tree, t, out)


def _wasserstein_dominated(
    kind: WassersteinBall, tree: ScenarioTree, z: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    probs = tree.conditional_probs(t)
    eps = _radius(kind.rule, tree, x, t)
    return _per_parent(
        tree,
        t,
        lambda i, g: max(
            wasserstein_domination_gap(
                z.values[g], x[t].values[g], probs[g], float(eps[i]), kind.order
            ),
            0.0,
        ),
    )


# ------------------------------
# KL ball (law closure of reweightings)
# ------------------------------


def _kl_parent_gap(y: FloatArray, centre: FloatArray, probs: FloatArray, eps: float) -> float:
    support, inverse = np.unique(centre, return_inverse=True)
    nearest = np.abs(y[:, None] - support[None, :])
    off_support = float(nearest.min(axis=1).max())
    if off_support > current_tolerance():
        return off_support
    assigned = np.bincount(nearest.argmin(axis=1), weights=probs, minlength=support.size)
    reference = np.bincount(inverse.ravel(), weights=probs, minlength=support.size)
    return kl_divergence(assigned, reference) - eps


def _kl_gap(
    kind: KLBall, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    probs = tree.conditional_probs(t)
    eps = _radius(kind.rule, tree, x, t)
    return _per_parent(
        tree, t, lambda i, g: _kl_parent_gap(y.values[g], x[t].values[g], probs[g], float(eps[i]))
    )


def _kl_worst(
    kind: KLBall, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> FloatArray:
    probs = tree.conditional_probs(t + 1)
    eps = _radius(kind.rule, tree, x, t + 1)
    centre = x[t + 1].values
    return _per_parent(
        tree, t + 1, lambda i, g: kl_worst_case(rho, centre[g], probs[g], float(eps[i]))
    )


def _kl_sample(
    kind: KLBall,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    rng: np.random.Generator,
    boundary: bool,
) -> AdaptedVector | None:
    # Members are reassignments of the centre's values; KL is discrete in them.
    probs = tree.conditional_probs(t)
    eps = _radius(kind.rule, tree, x, t)
    out = x[t].values.copy()
    for i, g in enumerate(tree.child_groups(t - 1)):
        centre = x[t].values[g]
        chosen = centre
        for _ in range(SAMPLE_ATTEMPTS):
            candidate = centre[rng.integers(0, g.size, size=g.size)]
            if _kl_parent_gap(candidate, centre, probs[g], float(eps[i])) <= 0.0:
                chosen = candidate
                break
        out[g] = chosen
    return AdaptedVector(tree, t, out)


# ------------------------------
# Measure family
# ------------------------------


def family_conditionals(measure: FamilyMeasure, tree: ScenarioTree, t: int) -> FloatArray:
    """Conditional probabilities of the atoms of time t under the measure."""
    terminal = tree.atom_ids(tree.horizon)
    missing = sorted(set(terminal) - set(measure.density))
    extra = sorted(set(measure.density) - set(terminal))
    if missing or extra:
        raise TreeStructureError(
            f"MeasureFamily: densities must cover terminal atoms; missing {missing}, extra {extra}"
        )
    density = np.array([measure.density[a] for a in terminal])
    density = AdaptedVector(tree, tree.horizon, density / (tree.marginal(tree.horizon) @ density))
    here = conditional_expectation(density, t).values
    before = conditional_expectation(density, t - 1).values
    return tree.conditional_probs(t) * here / before[tree.parent_index(t)]


def _family_gap(
    kind: MeasureFamily, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    probs = tree.conditional_probs(t)
    gaps = []
    for measure in kind.measures:
        q = family_conditionals(measure, tree, t)
        gaps.append(
            _per_parent(
                tree,
                t,
                lambda i, g, q=q, shift=measure.penalty: law_wasserstein(
                    y.values[g] + shift, probs[g], x[t].values[g], q[g], float("inf")
                ),
            )
        )
    return np.min(np.array(gaps), axis=0)


def _family_worst(
    kind: MeasureFamily, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> FloatArray:
    centre = x[t + 1].values
    values = []
    for measure in kind.measures:
        q = family_conditionals(measure, tree, t + 1)
        values.append(
            _per_parent(tree, t + 1, lambda i, g, q=q: risk_of_law(rho, centre[g], q[g]))
            - measure.penalty
        )
    return np.max(np.array(values), axis=0)


def _family_sample(
    kind: MeasureFamily,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    rng: np.random.Generator,
    boundary: bool,
) -> AdaptedVector | None:
    measure = kind.measures[int(rng.integers(0, len(kind.measures)))]
    q = family_conditionals(measure, tree, t)
    probs = tree.conditional_probs(t)
    tol = current_tolerance()
    out = np.empty(tree.size(t))
    for g in tree.child_groups(t - 1):
        centre = x[t].values[g]
        for attempt in range(SAMPLE_ATTEMPTS):
            order = np.arange(g.size) if attempt == 0 else rng.permutation(g.size)
            candidate = centre[order] - measure.penalty
            shifted = candidate + measure.penalty
            if law_wasserstein(shifted, probs[g], centre, q[g], float("inf")) <= tol:
                out[g] = candidate
                break
        else:
            return None
    return AdaptedVector(tree, t, out)


# ------------------------------
# Sum half-space (non-static)
# ------------------------------


def halfspace_bound(
    kind: SumHalfspace, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> FloatArray:
    """X_t + E[sum_{i>t} X_i | F_t] + offset of the parent atom."""
    offsets = np.array([kind.offsets.get(a, 0.0) for a in tree.atom_ids(t - 1)])
    return x[t].values + expected_tail_sum(x, t).values + offsets[tree.parent_index(t)]


def _half_gap(
    kind: SumHalfspace, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    return _group_max(tree, t, y.values - halfspace_bound(kind, tree, x, t))


def _half_worst(
    kind: SumHalfspace, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> FloatArray:
    bound = AdaptedVector(tree, t + 1, halfspace_bound(kind, tree, x, t + 1))
    return evaluate_one_step(rho, tree, bound).values


def _half_sample(
    kind: SumHalfspace,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    rng: np.random.Generator,
    boundary: bool,
) -> AdaptedVector | None:
    bound = halfspace_bound(kind, tree, x, t)
    slack = 0.0 if boundary else rng.exponential(0.5, size=bound.size)
    return AdaptedVector(tree, t, bound - slack)


def _half_dominated(
    kind: SumHalfspace, tree: ScenarioTree, z: AdaptedVector, x: AdaptedProcess, t: int
) -> FloatArray:
    return np.maximum(_half_gap(kind, tree, z, x, t), 0.0)


# ------------------------------
# Dispatch
# ------------------------------


@dataclass(frozen=True)
class SetHandler:
    gap: Callable[..., FloatArray]
    worst: Callable[..., FloatArray]
    sample: Callable[..., AdaptedVector | None]
    dominated: Callable[..., FloatArray] | None


SET_HANDLERS: dict[str, SetHandler] = {
    "identity": SetHandler(_identity_gap, _identity_worst, _identity_sample, _identity_dominated),
    "sup_norm": SetHandler(_sup_gap, _sup_worst, _sup_sample, _sup_dominated),
    "wasserstein": SetHandler(
        _wasserstein_gap, _wasserstein_worst, _wasserstein_sample, _wasserstein_dominated
    ),
    "kl": SetHandler(_kl_gap, _kl_worst, _kl_sample, None),
    "measure_family": SetHandler(_family_gap, _family_worst, _family_sample, None),
    "sum_halfspace": SetHandler(_half_gap, _half_worst, _half_sample, _half_dominated),
}
