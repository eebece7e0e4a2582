"""One-step conditional risk measures, their acceptance sets and nested composition."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.special import logsumexp, rel_entr

from .risk_types import (
    CVaR,
    Entropic,
    Expectation,
    RiskFamily,
    RiskKind,
    WorstCase,
    current_tolerance,
)
from .space import AdaptedProcess, AdaptedVector, EventSet, FloatArray, ScenarioTree

MAX_ENVELOPE_CHILDREN = 16


def risk_of_law(kind: RiskKind, values: FloatArray, probs: FloatArray) -> float:
    """Risk of the law putting mass `probs[i]` on `values[i]`; zero weights are allowed."""
    if isinstance(kind, Expectation) or (isinstance(kind, CVaR) and kind.alpha == 0.0):
        return float(probs @ values)
    if isinstance(kind, CVaR):
        # Rockafellar-Uryasev; the minimiser sits on a support point.
        tails = np.maximum(values[None, :] - values[:, None], 0.0) @ probs
        return float(np.min(values + tails / (1.0 - kind.alpha)))
    if isinstance(kind, Entropic):
        return float(logsumexp(kind.beta * values, b=probs) / kind.beta)
    if isinstance(kind, WorstCase):
        return float(np.max(values[probs > 0.0]))
    raise TypeError(f"risk_of_law: unsupported risk kind {type(kind).__name__}")


def evaluate_one_step(kind: RiskKind, tree: ScenarioTree, z: AdaptedVector) -> AdaptedVector:
    """rho_t(Z) for Z measured at t+1, one value per atom of time t."""
    if z.tree is not tree:
        raise ValueError("evaluate_one_step: Z lives on a different scenario tree")
    if z.time < 1:
        raise ValueError("evaluate_one_step: Z must be measured at a time >= 1")
    t = z.time - 1
    if isinstance(kind, Expectation):
        return AdaptedVector(tree, t, tree.expect_one_step(z.values, t))
    probs = tree.conditional_probs(t + 1)
    out = np.array([risk_of_law(kind, z.values[g], probs[g]) for g in tree.child_groups(t)])
    return AdaptedVector(tree, t, out)


def nested_evaluate(
    family: RiskFamily, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> AdaptedVector:
    """rho_t(X_{t+1} + rho_{t+1}(X_{t+2} + … + rho_{T-1}(X_T)))."""
    if not 0 <= t < tree.horizon:
        raise IndexError(f"nested_evaluate: t = {t} must satisfy 0 <= t < T = {tree.horizon}")
    value = AdaptedVector.zeros(tree, tree.horizon)
    for s in range(tree.horizon - 1, t - 1, -1):
        value = evaluate_one_step(family.at(s), tree, x[s + 1] + value)
    return value


def acceptance_indicator(kind: RiskKind, tree: ScenarioTree, z: AdaptedVector) -> EventSet:
    """Atoms of time t where Z lies in the one-step acceptance set."""
    risk = evaluate_one_step(kind, tree, z)
    return EventSet(tree, risk.time, risk.values <= current_tolerance())


# ------------------------------
# Dual description
# ------------------------------


def envelope_vertices(kind: RiskKind, probs: FloatArray) -> FloatArray | None:
    """Extreme points of the risk envelope, one per row; None for the entropic kind."""
    n = probs.size
    if isinstance(kind, Expectation) or (isinstance(kind, CVaR) and kind.alpha == 0.0):
        return probs[None, :].copy()
    if isinstance(kind, WorstCase):
        return np.eye(n)
    if isinstance(kind, CVaR):
        return _cvar_vertices(probs, kind.alpha)
    return None


def _cvar_vertices(probs: FloatArray, alpha: float) -> FloatArray:
    n = probs.size
    if n > MAX_ENVELOPE_CHILDREN:
        raise ValueError(f"envelope_vertices: {n} children exceed {MAX_ENVELOPE_CHILDREN}")
    cap = probs / (1.0 - alpha)
    found: dict[tuple[float, ...], FloatArray] = {}
    for chosen in itertools.product((False, True), repeat=n):
        full = np.array(chosen)
        remainder = 1.0 - float(cap[full].sum())
        if remainder < -1e-12:
            continue
        base = np.where(full, cap, 0.0)
        if remainder <= 1e-12:
            candidates = [base]
        else:
            candidates = []
            for j in np.flatnonzero(~full):
                if cap[j] > remainder:
                    vertex = base.copy()
                    vertex[j] = remainder
                    candidates.append(vertex)
        for vertex in candidates:
            found.setdefault(tuple(np.round(vertex, 12)), vertex / vertex.sum())
    return np.array([found[key] for key in sorted(found)])


def kl_divergence(q: FloatArray, p: FloatArray) -> float:
    return float(np.sum(rel_entr(q, p)))


def minimal_penalty(kind: RiskKind, q: FloatArray, probs: FloatArray) -> float:
    """Minimal penalty of the one-step measure at the reweighting q (support function of A)."""
    tol = 1e-12
    if isinstance(kind, Expectation) or (isinstance(kind, CVaR) and kind.alpha == 0.0):
        return 0.0 if np.allclose(q, probs, atol=tol, rtol=0.0) else float("inf")
    if isinstance(kind, CVaR):
        return 0.0 if np.all(q <= probs / (1.0 - kind.alpha) + tol) else float("inf")
    if isinstance(kind, WorstCase):
        return 0.0
    if isinstance(kind, Entropic):
        return kl_divergence(q, probs) / kind.beta
    raise TypeError(f"minimal_penalty: unsupported risk kind {type(kind).__name__}")


def conjugate_offset(gauge: RiskKind, base: RiskKind, probs: FloatArray) -> float:
    """sup{gauge(Z) - r : base(Z) <= r}; infinite when the gauge is not dominated."""
    vertices = envelope_vertices(gauge, probs)
    if vertices is not None:
        return max(minimal_penalty(base, vertex, probs) for vertex in vertices)
    assert isinstance(gauge, Entropic)
    # sup over q of penalty_base(q) - KL(q || p) / beta
    if probs.size == 1 or isinstance(base, WorstCase):
        return 0.0
    if isinstance(base, Entropic):
        if base.beta >= gauge.beta:
            return 0.0
        return (1.0 / base.beta - 1.0 / gauge.beta) * float(-np.log(probs.min()))
    return float("inf")
