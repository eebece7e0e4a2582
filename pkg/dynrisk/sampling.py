"""Random trees, processes, events and scales for the randomized checkers.

Every checker trial draws from its own generator spawned off the configured seed,
so a single trial can be replayed from (seed, trial index).
"""

from __future__ import annotations

import numpy as np

from .risk_types import current_settings
from .space import AdaptedProcess, AdaptedVector, EventSet, ScenarioTree
from .tree import Atom

MIN_CONDITIONAL_PROB = 0.05


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Generator of trial `index`, the index-th child of SeedSequence(seed)."""
    child = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.default_rng(child)


def random_tree(
    rng: np.random.Generator, horizon: int, *, min_children: int = 2, max_children: int = 3
) -> ScenarioTree:
    """Tree with a random child count per atom and probabilities bounded away from zero."""
    if not 1 <= min_children <= max_children:
        raise ValueError(f"random_tree: bad child range [{min_children}, {max_children}]")
    atoms = [Atom("root", 0, None, 1.0)]
    frontier = ["root"]
    for t in range(1, horizon + 1):
        next_frontier: list[str] = []
        for parent in frontier:
            n = int(rng.integers(min_children, max_children + 1))
            weights = np.maximum(rng.dirichlet(np.full(n, 2.0)), MIN_CONDITIONAL_PROB)
            weights /= weights.sum()
            for k, weight in enumerate(weights):
                atom_id = f"{parent}.{k}"
                atoms.append(Atom(atom_id, t, parent, float(weight)))
                next_frontier.append(atom_id)
        frontier = next_frontier
    return ScenarioTree(atoms)


def _draw(rng: np.random.Generator, size: int) -> np.ndarray:
    settings = current_settings()
    low, high = settings.value_box
    return np.round(rng.uniform(low, high, size=size), settings.value_decimals)


def random_vector(rng: np.random.Generator, tree: ScenarioTree, t: int) -> AdaptedVector:
    """Values drawn from the configured box, rounded to the configured decimals."""
    return AdaptedVector(tree, t, _draw(rng, tree.size(t)))


def random_process(rng: np.random.Generator, tree: ScenarioTree) -> AdaptedProcess:
    return AdaptedProcess(
        tree, tuple(random_vector(rng, tree, t) for t in range(tree.horizon + 1))
    )


def raise_tail(rng: np.random.Generator, x: AdaptedProcess, t: int) -> AdaptedProcess:
    """X plus a non-negative perturbation on components t..T, at least one strict."""
    tree = x.tree
    out = x
    for i in range(t, tree.horizon + 1):
        decimals = current_settings().value_decimals
        bump = np.round(rng.uniform(0.0, 0.5, size=tree.size(i)), decimals)
        bump *= rng.uniform(size=bump.size) < 0.7
        out = out.replace(i, x[i] + AdaptedVector(tree, i, np.maximum(bump, 0.0)))
    if np.allclose(out[tree.horizon].values, x[tree.horizon].values):
        k = int(rng.integers(0, tree.size(tree.horizon)))
        bump = np.zeros(tree.size(tree.horizon))
        bump[k] = 0.25
        last = out[tree.horizon] + AdaptedVector(tree, tree.horizon, bump)
        out = out.replace(tree.horizon, last)
    return out


def random_event(
    rng: np.random.Generator, tree: ScenarioTree, t: int, *, density: float = 0.5
) -> EventSet:
    return EventSet(tree, t, rng.uniform(size=tree.size(t)) < density)


def random_scale(
    rng: np.random.Generator,
    tree: ScenarioTree,
    t: int,
    *,
    upper: float = 2.0,
    zero_share: float = 0.2,
) -> AdaptedVector:
    """Non-negative F_t-measurable factor; some atoms are exactly zero."""
    values = np.round(rng.uniform(0.0, upper, size=tree.size(t)), 3)
    values[rng.uniform(size=values.size) < zero_share] = 0.0
    return AdaptedVector(tree, t, values)
