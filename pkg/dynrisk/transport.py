"""Worst-case one-step risk over a conditional Wasserstein ball.

The distance from a candidate y to the centre law is the minimum, over orderings
of y's atoms, of the cost of the coupling that ordering induces with the sorted
centre. A ball is therefore a union of convex pieces, one per ordering, and a
coherent risk is a maximum of linear functionals. Maximising each envelope vertex
over each piece gives the exact supremum. Above `max_permutation_children`
children the pieces come from a pairwise-swap search seeded with the centre's
ordering and, per envelope vertex q, the ordering by q_j / p_j.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import softmax

from .distances import law_wasserstein, ordered_coupling
from .riskmeasures import envelope_vertices, risk_of_law
from .risk_types import CVaR, Entropic, Expectation, RiskKind, current_settings
from .space import FloatArray, IntArray

logger = logging.getLogger(__name__)

MAX_ALTERNATIONS = 100
MAX_SWAP_ROUNDS = 50


@dataclass(frozen=True)
class _ChildCost:
    """f_j(y) = sum_k weights[k] * |y - anchors[k]|^order for one candidate atom."""

    anchors: FloatArray
    weights: FloatArray

    def cost(self, y: float, order: float) -> float:
        return float(self.weights @ np.abs(y - self.anchors) ** order)

    def slope(self, y: float, order: float) -> float:
        gaps = y - self.anchors
        return float(order * (self.weights @ (np.sign(gaps) * np.abs(gaps) ** (order - 1.0))))


def _child_costs(ordering: IntArray, centre: FloatArray, probs: FloatArray) -> list[_ChildCost]:
    centre_order = np.argsort(centre, kind="stable").astype(np.intp)
    iy, ix, widths = ordered_coupling(ordering, probs, centre_order, probs)
    costs = []
    for j in range(probs.size):
        mask = iy == j
        anchors = centre[ix[mask]]
        order = np.argsort(anchors, kind="stable")
        costs.append(_ChildCost(anchors[order], widths[mask][order]))
    return costs


# ------------------------------
# Linear maximisation over one ordering piece
# ------------------------------


def _maximise_linear_l1(
    q: FloatArray, costs: list[_ChildCost], budget: float
) -> FloatArray | None:
    y = np.empty(len(costs))
    base_cost = 0.0
    segments: list[tuple[float, int, float, float, float]] = []
    for j, child in enumerate(costs):
        cum = np.cumsum(child.weights)
        total = float(cum[-1])
        k = int(np.searchsorted(cum, total / 2.0 - 1e-15))
        y[j] = child.anchors[k]
        base_cost += child.cost(y[j], 1.0)
        if q[j] <= 0.0:
            continue
        bounds = [*child.anchors[k:].tolist(), math.inf]
        for level in range(len(bounds) - 1):
            slope = 2.0 * float(cum[k + level]) - total
            ratio = math.inf if slope <= 1e-15 else q[j] / slope
            segments.append((ratio, j, bounds[level], bounds[level + 1], slope))
    remaining = budget - base_cost
    if remaining < -1e-12:
        return None
    remaining = max(remaining, 0.0)
    segments.sort(key=lambda seg: (-seg[0], seg[1], seg[2]))
    for _ratio, j, start, end, slope in segments:
        if slope <= 1e-15:
            y[j] = end
            continue
        if math.isinf(end) or slope * (end - start) >= remaining:
            y[j] = start + remaining / slope
            break
        y[j] = end
        remaining -= slope * (end - start)
    return y


def _minimiser(child: _ChildCost, order: float) -> float:
    low, high = float(child.anchors[0]), float(child.anchors[-1])
    if high - low <= 1e-15:
        return low
    return float(brentq(child.slope, low, high, args=(order,), xtol=1e-15))


def _response(child: _ChildCost, target_slope: float, order: float) -> float:
    total = float(child.weights.sum())
    low = float(child.anchors[0])
    high = float(child.anchors[-1]) + (target_slope / (order * total)) ** (1.0 / (order - 1.0))
    if high - low <= 1e-15:
        return low
    return float(brentq(lambda y: child.slope(y, order) - target_slope, low, high, xtol=1e-15))


def _maximise_linear_lp(
    q: FloatArray, costs: list[_ChildCost], budget: float, order: float
) -> FloatArray | None:
    floor = np.array([_minimiser(child, order) for child in costs])
    base_cost = sum(child.cost(float(v), order) for child, v in zip(costs, floor))
    if base_cost > budget + 1e-12:
        return None
    if budget - base_cost <= 1e-14:
        return floor

    def respond(log_mu: float) -> FloatArray:
        mu = math.exp(log_mu)
        return np.array(
            [
                _response(child, q[j] / mu, order) if q[j] > 0.0 else floor[j]
                for j, child in enumerate(costs)
            ]
        )

    def excess(log_mu: float) -> float:
        y = respond(log_mu)
        return sum(child.cost(float(v), order) for child, v in zip(costs, y)) - budget

    low, high = -1.0, 1.0
    while excess(low) <= 0.0:
        low -= 4.0
    while excess(high) > 0.0:
        high += 4.0
    return respond(float(brentq(excess, low, high, xtol=1e-13)))


def _maximise_linear(
    q: FloatArray, costs: list[_ChildCost], budget: float, order: float
) -> FloatArray | None:
    if order == 1.0:
        return _maximise_linear_l1(q, costs, budget)
    return _maximise_linear_lp(q, costs, budget, order)


# ------------------------------
# Ordering search
# ------------------------------

Score = Callable[[IntArray], float]


def _distinct(orderings: list[IntArray]) -> list[IntArray]:
    seen: set[tuple[int, ...]] = set()
    out = []
    for ordering in orderings:
        key = tuple(ordering.tolist())
        if key not in seen:
            seen.add(key)
            out.append(ordering)
    return out


def _swap_search(seed: IntArray, score: Score) -> IntArray:
    """Pairwise-swap hill climb from `seed`; returns a local maximiser of `score`."""
    best, best_score = seed, score(seed)
    for _ in range(MAX_SWAP_ROUNDS):
        improved = False
        for i, j in itertools.combinations(range(best.size), 2):
            candidate = best.copy()
            candidate[[i, j]] = candidate[[j, i]]
            value = score(candidate)
            if value > best_score + 1e-13:
                best, best_score, improved = candidate, value, True
        if not improved:
            break
    return best


def _search_orderings(
    centre: FloatArray, seeds: list[IntArray], score: Score
) -> list[IntArray]:
    """Every ordering up to the permutation cap, else local optima grown from the best seeds."""
    n = centre.size
    if n <= current_settings().max_permutation_children:
        return [np.array(perm, dtype=np.intp) for perm in itertools.permutations(range(n))]
    starts = [np.argsort(centre, kind="stable").astype(np.intp), *seeds]
    starts = sorted(_distinct(starts), key=lambda ordering: -score(ordering))
    starts = starts[: current_settings().multi_starts]
    found = _distinct([*starts, *(_swap_search(seed, score) for seed in starts)])
    logger.debug("ordering search: %d children, %d pieces kept", n, len(found))
    return found


def _ratio_orderings(
    directions: FloatArray, centre: FloatArray, probs: FloatArray
) -> list[IntArray]:
    # heavy q_j / p_j last, so the atoms the direction rewards sit at the top
    return [np.lexsort((centre, q / probs)).astype(np.intp) for q in directions]


def _piece_score(
    kind: RiskKind,
    directions: FloatArray,
    centre: FloatArray,
    probs: FloatArray,
    budget: float,
    order: float,
) -> Score:
    def score(ordering: IntArray) -> float:
        costs = _child_costs(ordering, centre, probs)
        best = -math.inf
        for q in directions:
            y = _maximise_linear(q, costs, budget, order)
            if y is not None:
                best = max(best, risk_of_law(kind, y, probs))
        return best

    return score


# ------------------------------
# Public entry point
# ------------------------------


def wasserstein_worst_case(
    kind: RiskKind, centre: FloatArray, probs: FloatArray, eps: float, order: float
) -> tuple[float, FloatArray]:
    """Supremum of the risk over candidates within distance eps of the centre, and a maximiser."""
    if eps <= 0.0:
        return risk_of_law(kind, centre, probs), centre.copy()
    if isinstance(kind, Expectation) or (isinstance(kind, CVaR) and kind.alpha == 0.0):
        return float(probs @ centre) + eps, centre + eps
    budget = eps**order
    if isinstance(kind, Entropic):
        directions = np.vstack([np.eye(probs.size), probs])
    else:
        found = envelope_vertices(kind, probs)
        assert found is not None
        directions = found
    score = _piece_score(kind, directions, centre, probs, budget, order)
    orderings = _search_orderings(centre, _ratio_orderings(directions, centre, probs), score)
    pieces = [_child_costs(ordering, centre, probs) for ordering in orderings]
    if isinstance(kind, Entropic):
        return _entropic_ascent(kind, centre, probs, eps, order, pieces)

    vertices = directions
    best_value, best_y = -math.inf, centre.copy()
    for costs in pieces:
        for q in vertices:
            y = _maximise_linear(q, costs, budget, order)
            if y is None:
                continue
            value = risk_of_law(kind, y, probs)
            if value > best_value:
                best_value, best_y = value, y
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(
            "wasserstein sup: %d orderings x %d vertices -> %.12g (distance %.3g of %.3g)",
            len(pieces),
            len(vertices),
            best_value,
            law_wasserstein(best_y, probs, centre, probs, order),
            eps,
        )
    return best_value, best_y


def _best_linear(
    q: FloatArray, pieces: list[list[_ChildCost]], budget: float, order: float
) -> FloatArray | None:
    best: FloatArray | None = None
    best_value = -math.inf
    for costs in pieces:
        y = _maximise_linear(q, costs, budget, order)
        if y is not None and float(q @ y) > best_value:
            best, best_value = y, float(q @ y)
    return best


def _entropic_ascent(
    kind: Entropic,
    centre: FloatArray,
    probs: FloatArray,
    eps: float,
    order: float,
    pieces: list[list[_ChildCost]],
) -> tuple[float, FloatArray]:
    # Alternate Gibbs reweighting and linear maximisation; each step cannot decrease the risk.
    budget = eps**order
    starts: list[FloatArray] = [centre + eps]
    for q in np.eye(probs.size):
        y = _best_linear(q, pieces, budget, order)
        if y is not None:
            starts.append(y)
    starts.sort(key=lambda y: -risk_of_law(kind, y, probs))
    starts = starts[: current_settings().multi_starts]

    best_value, best_y = -math.inf, centre.copy()
    for y in starts:
        value = risk_of_law(kind, y, probs)
        for _ in range(MAX_ALTERNATIONS):
            q = softmax(kind.beta * y + np.log(probs))
            candidate = _best_linear(q, pieces, budget, order)
            if candidate is None:
                break
            candidate_value = risk_of_law(kind, candidate, probs)
            if candidate_value <= value + 1e-13:
                break
            y, value = candidate, candidate_value
        if value > best_value:
            best_value, best_y = value, y
    logger.debug("wasserstein entropic ascent: %d starts -> %.12g", len(starts), best_value)
    return best_value, best_y


def wasserstein_domination_gap(
    floor_values: FloatArray, centre: FloatArray, probs: FloatArray, eps: float, order: float
) -> float:
    """Distance from the centre to the closest candidate dominating `floor_values`, minus eps."""

    def saving(ordering: IntArray) -> float:
        total = 0.0
        for j, child in enumerate(_child_costs(ordering, centre, probs)):
            if order == 1.0:
                cum = np.cumsum(child.weights)
                lowest = float(child.anchors[int(np.searchsorted(cum, cum[-1] / 2.0 - 1e-15))])
            else:
                lowest = _minimiser(child, order)
            total += child.cost(max(float(floor_values[j]), lowest), order)
        return -total

    seeds = [np.lexsort((centre, floor_values)).astype(np.intp)]
    best = max(saving(ordering) for ordering in _search_orderings(centre, seeds, saving))
    return (-best) ** (1.0 / order) - eps
