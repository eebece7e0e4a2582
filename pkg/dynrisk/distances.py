"""Conditional Wasserstein and KL kernels, and the KL worst-case duals."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp
from scipy.stats import wasserstein_distance

from .riskmeasures import kl_divergence, risk_of_law
from .risk_types import CVaR, Entropic, Expectation, RiskKind, WorstCase
from .space import AdaptedVector, FloatArray, IntArray, ScenarioTree

logger = logging.getLogger(__name__)

DUAL_XATOL = 1e-10


# ------------------------------
# Quantile coupling
# ------------------------------


def quantile_coupling(
    y_values: FloatArray, y_probs: FloatArray, x_values: FloatArray, x_probs: FloatArray
) -> tuple[IntArray, IntArray, FloatArray]:
    """Comonotone coupling of two discrete laws.

    Returns (i, j, w): on a quantile interval of length w[k] the first law sits at
    y_values[i[k]] and the second at x_values[j[k]].
    """
    y_order = np.argsort(y_values, kind="stable")
    x_order = np.argsort(x_values, kind="stable")
    return ordered_coupling(y_order, y_probs, x_order, x_probs)


def ordered_coupling(
    y_order: IntArray, y_probs: FloatArray, x_order: IntArray, x_probs: FloatArray
) -> tuple[IntArray, IntArray, FloatArray]:
    """Coupling that matches the two laws along the given orderings of their atoms."""
    cum_y = np.cumsum(y_probs[y_order])
    cum_x = np.cumsum(x_probs[x_order])
    cum_y[-1] = cum_x[-1] = 1.0
    breaks = np.unique(np.concatenate(([0.0], cum_y, cum_x)))
    widths = np.diff(breaks)
    keep = widths > 1e-15
    mids = (breaks[:-1] + breaks[1:])[keep] / 2.0
    iy = np.minimum(np.searchsorted(cum_y, mids), y_order.size - 1)
    ix = np.minimum(np.searchsorted(cum_x, mids), x_order.size - 1)
    return y_order[iy], x_order[ix], widths[keep]


def law_wasserstein(
    y_values: FloatArray,
    y_probs: FloatArray,
    x_values: FloatArray,
    x_probs: FloatArray,
    order: float,
) -> float:
    """p-Wasserstein distance between two discrete laws on the real line; order may be inf."""
    if order < 1.0:
        raise ValueError(f"law_wasserstein: order must be >= 1, got {order}")
    if order == 1.0:
        return float(wasserstein_distance(y_values, x_values, y_probs, x_probs))
    i, j, w = quantile_coupling(y_values, y_probs, x_values, x_probs)
    gaps = np.abs(y_values[i] - x_values[j])
    if math.isinf(order):
        return float(gaps.max())
    return float((w @ gaps**order) ** (1.0 / order))


def conditional_wasserstein(
    order: float, tree: ScenarioTree, y: AdaptedVector, z: AdaptedVector
) -> AdaptedVector:
    """Per parent atom, the distance between the conditional laws of Y and Z."""
    if order < 1.0:
        raise ValueError(f"conditional_wasserstein: order must be >= 1, got {order}")
    if y.tree is not tree or z.tree is not tree:
        raise ValueError("conditional_wasserstein: operands live on a different scenario tree")
    if y.time != z.time or y.time < 1:
        raise ValueError(f"conditional_wasserstein: time mismatch ({y.time} vs {z.time})")
    t = y.time - 1
    probs = tree.conditional_probs(y.time)
    out = [
        law_wasserstein(y.values[g], probs[g], z.values[g], probs[g], order)
        for g in tree.child_groups(t)
    ]
    return AdaptedVector(tree, t, np.array(out))


def conditional_kl(tree: ScenarioTree, q: FloatArray, parent_id: str) -> float:
    """KL(q || p) for a reweighting q of the parent's children."""
    t, i = tree.locate(parent_id)
    group = tree.child_groups(t)[i]
    weights = np.asarray(q, dtype=np.float64)
    if weights.shape != group.shape:
        raise ValueError(
            f"conditional_kl: {parent_id!r} has {group.size} children, got {weights.size} weights"
        )
    if np.any(weights < 0.0) or abs(float(weights.sum()) - 1.0) > 1e-12:
        raise ValueError("conditional_kl: q must be a probability vector")
    return kl_divergence(weights, tree.conditional_probs(t + 1)[group])


# ------------------------------
# KL worst cases
# ------------------------------


def kl_dual_expectation(values: FloatArray, probs: FloatArray, eps: float) -> float:
    """sup{E_q[x] : KL(q || p) <= eps} through inf_lam lam (log E_p e^{x/lam} + eps).

    Every dual point bounds the supremum from above, so inexact minimisation errs upward.
    """
    mean = float(probs @ values)
    if eps <= 0.0:
        return mean
    top = float(values.max())
    span = top - float(values.min())
    if span <= 0.0:
        return top
    top_mass = float(probs[values >= top].sum())
    if eps >= -math.log(top_mass):
        return top

    def dual(log_lam: float) -> float:
        lam = math.exp(log_lam)
        return top + lam * (float(logsumexp((values - top) / lam, b=probs)) + eps)

    bounds = (math.log(span * 1e-6), math.log(span * 1e6))
    result = minimize_scalar(dual, bounds=bounds, method="bounded", options={"xatol": DUAL_XATOL})
    value = min(float(result.fun), dual(bounds[0]), top)
    logger.debug("kl dual: eps=%g lam=%g value=%.12g", eps, math.exp(result.x), value)
    return max(value, mean)


def kl_worst_case(kind: RiskKind, values: FloatArray, probs: FloatArray, eps: float) -> float:
    """sup of the law-level risk over all reweightings within KL radius eps."""
    if eps <= 0.0:
        return risk_of_law(kind, values, probs)
    if isinstance(kind, Expectation) or (isinstance(kind, CVaR) and kind.alpha == 0.0):
        return kl_dual_expectation(values, probs, eps)
    if isinstance(kind, WorstCase):
        return float(values.max())
    if isinstance(kind, Entropic):
        top = float(values.max())
        scaled = np.exp(kind.beta * (values - top))
        return top + math.log(kl_dual_expectation(scaled, probs, eps)) / kind.beta
    if isinstance(kind, CVaR):
        return _kl_cvar(values, probs, eps, kind.alpha)
    raise TypeError(f"kl_worst_case: unsupported risk kind {type(kind).__name__}")


def _kl_cvar(values: FloatArray, probs: FloatArray, eps: float, alpha: float) -> float:
    # min over m of m + sup_q E_q[(x - m)^+] / (1 - alpha); convex in m.
    def objective(m: float) -> float:
        return m + kl_dual_expectation(np.maximum(values - m, 0.0), probs, eps) / (1.0 - alpha)

    low, high = float(values.min()), float(values.max())
    if high <= low:
        return low
    result = minimize_scalar(
        objective, bounds=(low, high), method="bounded", options={"xatol": 1e-12}
    )
    candidates = [float(result.fun), *(objective(float(m)) for m in np.unique(values))]
    return min(candidates)
