"""Brute-force reference values for the worst-case solvers.

Everything here enumerates: candidate child values on a grid, probability
vectors on a simplex grid, or paths of the tree. The results are feasible-point
maxima, so they bound the true suprema from below; `sandwich` pairs them with
the production solvers and the grid modulus that bounds the gap from above.

These routines are exponential in the number of children and only meant for
atoms with a handful of children.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, rel_entr

from .riskmeasures import evaluate_one_step, risk_of_law
from .risk_types import (
    CVaR,
    Entropic,
    Expectation,
    IdentitySet,
    KLBall,
    MeasureFamily,
    OracleCapError,
    RiskKind,
    SupNormBall,
    WassersteinBall,
    WorstCase,
    current_settings,
    current_tolerance,
)
from .space import AdaptedProcess, AdaptedVector, FloatArray, ScenarioTree
from .uncertainty import (
    SetKind,
    describe_set,
    family_conditionals,
    membership_gap,
    tolerance_eval,
    worst_case,
)

logger = logging.getLogger(__name__)

KL_RESOLUTION = 1e-3
ZOOM_ROUNDS = 3
ZOOM_CELLS = 2
ZOOM_FACTOR = 10
# Grid points count as feasible only up to rounding, keeping the oracle a lower bound.
GRID_SLACK = 1e-12

Objective = Callable[[FloatArray], FloatArray]
Feasible = Callable[[FloatArray], np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    """Resolution of the brute-force oracles.

    Value grids span [min X - margin * eps, max X + margin * eps] per parent atom
    unless `box` fixes the range; law grids step through the simplex by `resolution`.
    """

    points: int = 41
    margin: float = 2.0
    max_children: int = 3
    box: tuple[float, float] | None = None
    resolution: float = KL_RESOLUTION
    cap: int = 10_000_000

    def __post_init__(self) -> None:
        if self.points < 2:
            raise ValueError(f"GridSpec: points must be >= 2, got {self.points}")
        if self.margin < 0.0:
            raise ValueError(f"GridSpec: margin must be >= 0, got {self.margin}")
        if self.max_children < 1:
            raise ValueError(f"GridSpec: max_children must be >= 1, got {self.max_children}")
        if not 0.0 < self.resolution < 1.0:
            raise ValueError(f"GridSpec: resolution must lie in (0, 1), got {self.resolution}")
        if self.box is not None and not self.box[0] <= self.box[1]:
            raise ValueError(f"GridSpec: box {self.box} has lower > upper")

    @classmethod
    def from_settings(cls, **overrides: object) -> GridSpec:
        settings = current_settings()
        values: dict[str, object] = {"points": settings.grid_points, "cap": settings.grid_cap}
        values.update(overrides)
        return cls(**values)  # type: ignore[arg-type]


# ------------------------------
# Batched law-level risk
# ------------------------------


def batch_risk(kind: RiskKind, values: FloatArray, weights: FloatArray) -> FloatArray:
    """risk_of_law row by row; `weights` broadcasts against the (m, n) `values`."""
    values, weights = np.broadcast_arrays(values, weights)
    if isinstance(kind, Expectation) or (isinstance(kind, CVaR) and kind.alpha == 0.0):
        return np.asarray((values * weights).sum(axis=1))
    if isinstance(kind, CVaR):
        excess = np.maximum(values[:, None, :] - values[:, :, None], 0.0)
        tails = np.einsum("kji,ki->kj", excess, weights)
        return np.asarray(np.min(values + tails / (1.0 - kind.alpha), axis=1))
    if isinstance(kind, Entropic):
        return np.asarray(logsumexp(kind.beta * values, b=weights, axis=1) / kind.beta)
    if isinstance(kind, WorstCase):
        return np.asarray(np.where(weights > 0.0, values, -np.inf).max(axis=1))
    raise TypeError(f"batch_risk: unsupported risk kind {type(kind).__name__}")


def batch_wasserstein(
    candidates: FloatArray, centre: FloatArray, probs: FloatArray, order: float
) -> FloatArray:
    """p-Wasserstein distance of every candidate row to the centre, both weighted by probs."""
    m, n = candidates.shape
    y_order = np.argsort(candidates, axis=1, kind="stable")
    y_sorted = np.take_along_axis(candidates, y_order, axis=1)
    cum_y = np.cumsum(probs[y_order], axis=1)
    cum_y[:, -1] = 1.0
    x_order = np.argsort(centre, kind="stable")
    x_sorted = centre[x_order]
    cum_x = np.cumsum(probs[x_order])
    cum_x[-1] = 1.0
    breaks = np.sort(
        np.concatenate([np.zeros((m, 1)), cum_y, np.broadcast_to(cum_x, (m, n))], axis=1),
        axis=1,
    )
    widths = np.diff(breaks, axis=1)
    mids = (breaks[:, :-1] + breaks[:, 1:]) / 2.0
    iy = np.minimum((cum_y[:, None, :] < mids[:, :, None]).sum(axis=2), n - 1)
    ix = np.minimum((cum_x[None, None, :] < mids[:, :, None]).sum(axis=2), n - 1)
    gaps = np.abs(np.take_along_axis(y_sorted, iy, axis=1) - x_sorted[ix])
    if math.isinf(order):
        return np.asarray(np.where(widths > 1e-15, gaps, 0.0).max(axis=1))
    return np.asarray((widths * gaps**order).sum(axis=1) ** (1.0 / order))


# ------------------------------
# Grids
# ------------------------------


def _check_children(n: int, grid: GridSpec, *, where: str) -> None:
    if n > grid.max_children:
        raise OracleCapError(f"{where}: {n} children exceed the oracle limit {grid.max_children}")


def _value_grid(low: float, high: float, n: int, grid: GridSpec) -> FloatArray:
    if grid.points**n > grid.cap:
        raise OracleCapError(f"value grid: {grid.points}^{n} points exceed the cap {grid.cap}")
    axis = np.linspace(low, high, grid.points)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, n)


def _simplex_grid(n: int, step: float, cap: int) -> FloatArray:
    total = round(1.0 / step)
    if (total + 1) ** (n - 1) > cap:
        raise OracleCapError(f"simplex grid: resolution {step:g} over {n} children exceeds {cap}")
    if n == 1:
        return np.ones((1, 1))
    mesh = np.meshgrid(*([np.arange(total + 1)] * (n - 1)), indexing="ij")
    head = np.stack(mesh, axis=-1).reshape(-1, n - 1)
    head = head[head.sum(axis=1) <= total]
    counts = np.concatenate([head, total - head.sum(axis=1, keepdims=True)], axis=1)
    return np.asarray(counts / total)


def _zoom(best: FloatArray, step: float) -> FloatArray:
    n = best.size
    offsets = np.arange(-ZOOM_CELLS * ZOOM_FACTOR, ZOOM_CELLS * ZOOM_FACTOR + 1) * step
    mesh = np.meshgrid(*([offsets] * (n - 1)), indexing="ij")
    head = best[:-1] + np.stack(mesh, axis=-1).reshape(-1, n - 1)
    q = np.concatenate([head, 1.0 - head.sum(axis=1, keepdims=True)], axis=1)
    return np.asarray(q[np.all(q >= 0.0, axis=1)])


def simplex_sup(
    objective: Objective,
    feasible: Feasible,
    probs: FloatArray,
    resolution: float,
    cap: int,
) -> float:
    """Largest objective over feasible probability vectors on a zooming simplex grid.

    The reference probabilities `probs` are always a candidate.
    """
    q = np.vstack([probs[None, :], _simplex_grid(probs.size, resolution, cap)])
    keep = feasible(q)
    scores = objective(q[keep])
    k = int(np.argmax(scores))
    best_q, best = q[keep][k], float(scores[k])
    step = resolution
    for _ in range(ZOOM_ROUNDS if probs.size > 1 else 0):
        step /= ZOOM_FACTOR
        window = _zoom(best_q, step)
        ok = feasible(window)
        if not np.any(ok):
            break
        scores = objective(window[ok])
        k = int(np.argmax(scores))
        if scores[k] > best:
            best_q, best = window[ok][k], float(scores[k])
    return best


def _kl_feasible(probs: FloatArray, eps: float) -> Feasible:
    limit = eps + GRID_SLACK
    return lambda q: np.asarray(rel_entr(q, probs[None, :]).sum(axis=1) <= limit)


# ------------------------------
# Oracles
# ------------------------------


def kl_simplex_sup(
    tree: ScenarioTree,
    x: AdaptedVector,
    eps: float,
    resolution: float = KL_RESOLUTION,
    *,
    max_children: int = 3,
) -> AdaptedVector:
    """max of E_q[X] over q on a simplex grid with KL(q || p) <= eps, per parent atom."""
    if resolution > KL_RESOLUTION:
        raise ValueError(
            f"kl_simplex_sup: resolution {resolution:g} is too coarse, need <= {KL_RESOLUTION:g}"
        )
    if eps < 0.0:
        raise ValueError(f"kl_simplex_sup: eps must be >= 0, got {eps}")
    if x.time < 1:
        raise ValueError("kl_simplex_sup: X must be measured at a time >= 1")
    grid = GridSpec(max_children=max_children, resolution=resolution)
    probs = tree.conditional_probs(x.time)
    out = []
    for group in tree.child_groups(x.time - 1):
        _check_children(group.size, grid, where="kl_simplex_sup")
        values = x.values[group]
        out.append(
            simplex_sup(
                lambda q, v=values: np.asarray(q @ v),
                _kl_feasible(probs[group], eps),
                probs[group],
                resolution,
                grid.cap,
            )
        )
    return AdaptedVector(tree, x.time - 1, np.array(out))


def cvar_simplex_sup(
    values: FloatArray, probs: FloatArray, alpha: float, resolution: float = KL_RESOLUTION
) -> float:
    """CVaR_alpha of a child law as the max of E_q over the grid of q <= p / (1 - alpha)."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"cvar_simplex_sup: alpha must lie in [0, 1), got {alpha}")
    bound = probs / (1.0 - alpha) + GRID_SLACK
    return simplex_sup(
        lambda q: np.asarray(q @ values),
        lambda q: np.all(q <= bound[None, :], axis=1),
        probs,
        resolution,
        GridSpec().cap,
    )


def _parent_box(centre: FloatArray, eps: float, grid: GridSpec) -> tuple[float, float]:
    if grid.box is not None:
        return grid.box
    return float(centre.min()) - grid.margin * eps, float(centre.max()) + grid.margin * eps


def _distances(
    kind: SetKind, cand: FloatArray, centre: FloatArray, probs: FloatArray
) -> FloatArray:
    if isinstance(kind, WassersteinBall):
        return batch_wasserstein(cand, centre, probs, kind.order)
    return np.asarray(np.abs(cand - centre[None, :]).max(axis=1))


def _value_oracle(
    kind: IdentitySet | SupNormBall | WassersteinBall,
    rho: RiskKind,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    grid: GridSpec,
) -> tuple[FloatArray, FloatArray]:
    probs = tree.conditional_probs(t + 1)
    centre = x[t + 1].values
    if isinstance(kind, IdentitySet):
        eps = np.zeros(tree.size(t))
    else:
        eps = tolerance_eval(kind.rule, tree, x, t + 1).values
    values, spacing = [], []
    for i, group in enumerate(tree.child_groups(t)):
        low, high = _parent_box(centre[group], float(eps[i]), grid)
        cand = np.vstack([centre[group][None, :], _value_grid(low, high, group.size, grid)])
        keep = _distances(kind, cand, centre[group], probs[group]) <= eps[i] + GRID_SLACK
        values.append(float(batch_risk(rho, cand[keep], probs[group]).max()))
        spacing.append(0.0 if isinstance(kind, IdentitySet) else (high - low) / (grid.points - 1))
    return np.array(values), np.array(spacing)


def _law_oracle(
    kind: KLBall | MeasureFamily,
    rho: RiskKind,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    grid: GridSpec,
) -> tuple[FloatArray, FloatArray]:
    probs = tree.conditional_probs(t + 1)
    centre = x[t + 1].values
    groups = tree.child_groups(t)
    if isinstance(kind, MeasureFamily):
        options = []
        for measure in kind.measures:
            q = family_conditionals(measure, tree, t + 1)
            options.append(
                [risk_of_law(rho, centre[g], q[g]) - measure.penalty for g in groups]
            )
        return np.max(np.array(options), axis=0), np.zeros(len(groups))
    eps = tolerance_eval(kind.rule, tree, x, t + 1).values
    values, spacing = [], []
    for i, group in enumerate(groups):
        c = centre[group]
        values.append(
            simplex_sup(
                lambda q, c=c: batch_risk(rho, np.broadcast_to(c, q.shape), q),
                _kl_feasible(probs[group], float(eps[i])),
                probs[group],
                grid.resolution,
                grid.cap,
            )
        )
        spacing.append(group.size * grid.resolution * float(c.max() - c.min()))
    return np.array(values), np.array(spacing)


def _generic_oracle(
    kind: SetKind,
    rho: RiskKind,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    grid: GridSpec,
) -> tuple[FloatArray, FloatArray]:
    # One membership query per grid index, shared by every parent atom.
    if grid.box is None:
        raise ValueError(f"grid_worst_case: {describe_set(kind)} needs an explicit grid box")
    groups = tree.child_groups(t)
    widest = max(g.size for g in groups)
    if grid.points**widest > grid.cap:
        raise OracleCapError(f"value grid: {grid.points}^{widest} points exceed the cap {grid.cap}")
    axis = np.linspace(grid.box[0], grid.box[1], grid.points)
    digits = np.zeros(tree.size(t + 1), dtype=np.intp)
    for g in groups:
        digits[g] = np.arange(g.size)
    strides = grid.points**digits
    best = np.full(tree.size(t), -np.inf)
    for index in range(-1, grid.points**widest):
        if index < 0:
            y = x[t + 1]
        else:
            y = AdaptedVector(tree, t + 1, axis[(index // strides) % grid.points])
        ok = membership_gap(kind, tree, y, x, t + 1).values <= current_tolerance()
        best = np.where(ok, np.maximum(best, evaluate_one_step(rho, tree, y).values), best)
    step = (grid.box[1] - grid.box[0]) / (grid.points - 1)
    return best, np.full(tree.size(t), step)


def _oracle(
    kind: SetKind,
    rho: RiskKind,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    grid: GridSpec,
) -> tuple[FloatArray, FloatArray]:
    if not 0 <= t < tree.horizon:
        raise IndexError(f"grid_worst_case: t = {t} must satisfy 0 <= t < T = {tree.horizon}")
    for group in tree.child_groups(t):
        _check_children(group.size, grid, where="grid_worst_case")
    if isinstance(kind, (IdentitySet, SupNormBall, WassersteinBall)):
        return _value_oracle(kind, rho, tree, x, t, grid)
    if isinstance(kind, (KLBall, MeasureFamily)):
        return _law_oracle(kind, rho, tree, x, t, grid)
    return _generic_oracle(kind, rho, tree, x, t, grid)


def grid_worst_case(
    kind: SetKind,
    rho: RiskKind,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    grid: GridSpec | None = None,
) -> AdaptedVector:
    """Grid lower bound of sup{rho_t(Y) : Y in u_{t+1}(X_{t+1:T})} per atom of time t."""
    plan = grid if grid is not None else GridSpec.from_settings()
    values, _ = _oracle(kind, rho, tree, x, t, plan)
    return AdaptedVector(tree, t, values)


def enumerate_conditional_expectation(
    tree: ScenarioTree, z: AdaptedVector, t: int
) -> AdaptedVector:
    """E[Z | F_t] summed over the paths below each atom of time t."""
    if z.tree is not tree:
        raise ValueError("enumerate_conditional_expectation: Z lives on a different scenario tree")
    if not 0 <= t <= z.time:
        raise IndexError(f"enumerate_conditional_expectation: t = {t} outside 0..{z.time}")
    ancestors = tree.ancestor_index(t, z.time)
    mass = tree.marginal(z.time)
    total = np.bincount(ancestors, weights=mass * z.values, minlength=tree.size(t))
    weight = np.bincount(ancestors, weights=mass, minlength=tree.size(t))
    return AdaptedVector(tree, t, total / weight)


def enumerate_expected_tail(x: AdaptedProcess, t: int) -> AdaptedVector:
    """E[X_{t+1} + … + X_T | F_t] by path enumeration."""
    tree = x.tree
    out = AdaptedVector.zeros(tree, t)
    for s in range(t + 1, tree.horizon + 1):
        out = out + enumerate_conditional_expectation(tree, x[s], t)
    return out


# ------------------------------
# Solver against oracle
# ------------------------------


@dataclass(frozen=True)
class Sandwich:
    """Production worst case next to the grid lower bound and the grid modulus."""

    atoms: tuple[str, ...]
    production: FloatArray
    oracle: FloatArray
    bound: FloatArray

    @property
    def gaps(self) -> FloatArray:
        return np.asarray(self.production - self.oracle)

    def within(self, tolerance: float | None = None) -> np.ndarray:
        """Per atom: grid value <= production <= grid value + bound, up to tolerance."""
        tol = current_tolerance() if tolerance is None else tolerance
        gaps = self.gaps
        return np.asarray((gaps >= -tol) & (gaps <= self.bound + tol))

    def holds(self, tolerance: float | None = None) -> bool:
        return bool(np.all(self.within(tolerance)))


def sandwich(
    kind: SetKind,
    rho: RiskKind,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    grid: GridSpec | None = None,
) -> Sandwich:
    plan = grid if grid is not None else GridSpec.from_settings()
    oracle, bound = _oracle(kind, rho, tree, x, t, plan)
    production = worst_case(kind, rho, tree, x, t).values
    result = Sandwich(tree.atom_ids(t), production, oracle, bound)
    logger.debug(
        "sandwich %s at t=%d: gaps %s, bounds %s",
        describe_set(kind),
        t,
        np.round(result.gaps, 12).tolist(),
        np.round(bound, 12).tolist(),
    )
    return result
