"""Scenario trees: a finite filtration as refining partitions with conditional probabilities."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .risk_types import (
    ABSOLUTE_CONTINUITY_DIAGNOSTIC,
    AbsoluteContinuityError,
    TreeStructureError,
)

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.intp]
BoolArray = NDArray[np.bool_]

PROBABILITY_SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Atom:
    """One partition cell: `parent` is None exactly for the root."""

    id: str
    time: int
    parent: str | None
    prob: float


class ScenarioTree:
    """Refining partitions F_0 ⊆ … ⊆ F_T with strictly positive conditional probabilities.

    Atoms of each time are ordered by id; every per-atom array in the package uses
    that order. Instances are immutable after construction.
    """

    __slots__ = (
        "_children",
        "_horizon",
        "_ids",
        "_marginal",
        "_parent",
        "_position",
        "_prob",
    )

    def __init__(self, atoms: Iterable[Atom]) -> None:
        records = list(atoms)
        by_id: dict[str, Atom] = {}
        for atom in records:
            if atom.id in by_id:
                raise TreeStructureError(f"ScenarioTree: duplicate atom id {atom.id!r}")
            by_id[atom.id] = atom
        if not records:
            raise TreeStructureError("ScenarioTree: no atoms")
        horizon = max(atom.time for atom in records)
        if horizon < 1:
            raise TreeStructureError("ScenarioTree: horizon must be >= 1")

        roots = [atom for atom in records if atom.time == 0]
        if len(roots) != 1:
            raise TreeStructureError(
                f"ScenarioTree: expected exactly one atom at t = 0, found {len(roots)}"
            )
        if roots[0].parent is not None:
            raise TreeStructureError(f"ScenarioTree: root {roots[0].id!r} must not have a parent")

        ids = tuple(
            tuple(sorted(atom.id for atom in records if atom.time == t)) for t in range(horizon + 1)
        )
        position = {
            atom_id: (t, i) for t, level in enumerate(ids) for i, atom_id in enumerate(level)
        }

        parents: list[IntArray] = [np.full(1, -1, dtype=np.intp)]
        probs: list[FloatArray] = [np.ones(1)]
        for t in range(1, horizon + 1):
            parent_idx = np.empty(len(ids[t]), dtype=np.intp)
            prob = np.empty(len(ids[t]))
            for i, atom_id in enumerate(ids[t]):
                atom = by_id[atom_id]
                _check_link(atom, by_id)
                parent_idx[i] = position[atom.parent][1]  # type: ignore[index]
                prob[i] = atom.prob
            parents.append(parent_idx)
            probs.append(prob)

        children: list[tuple[IntArray, ...]] = []
        for t in range(horizon):
            groups = tuple(
                np.flatnonzero(parents[t + 1] == i).astype(np.intp) for i in range(len(ids[t]))
            )
            for i, group in enumerate(groups):
                if group.size == 0:
                    raise TreeStructureError(
                        f"ScenarioTree: atom {ids[t][i]!r} at t = {t} < T has no children"
                    )
                total = float(probs[t + 1][group].sum())
                if abs(total - 1.0) > PROBABILITY_SUM_TOLERANCE:
                    raise TreeStructureError(
                        f"ScenarioTree: children of {ids[t][i]!r} have probabilities "
                        f"summing to {total!r}, expected 1"
                    )
            children.append(groups)

        marginal = [np.ones(1)]
        for t in range(1, horizon + 1):
            marginal.append(marginal[t - 1][parents[t]] * probs[t])

        for array in (*parents, *probs, *marginal):
            array.setflags(write=False)
        self._horizon = horizon
        self._ids = ids
        self._position = position
        self._parent = tuple(parents)
        self._prob = tuple(probs)
        self._children = tuple(children)
        self._marginal = tuple(marginal)

    # ------------------------------
    # Constructors
    # ------------------------------

    @classmethod
    def regular(
        cls, branching: int, horizon: int, probs: Sequence[float] | None = None
    ) -> ScenarioTree:
        """Tree where every non-terminal atom has `branching` children with `probs`."""
        weights = list(probs) if probs is not None else [1.0 / branching] * branching
        if len(weights) != branching:
            raise ValueError("ScenarioTree.regular: probs must have one entry per child")
        atoms = [Atom("root", 0, None, 1.0)]
        frontier = ["root"]
        for t in range(1, horizon + 1):
            next_frontier = []
            for parent in frontier:
                for k, weight in enumerate(weights):
                    atom_id = f"{parent}.{k}"
                    atoms.append(Atom(atom_id, t, parent, weight))
                    next_frontier.append(atom_id)
            frontier = next_frontier
        return cls(atoms)

    @classmethod
    def chain(cls, horizon: int) -> ScenarioTree:
        return cls.regular(1, horizon)

    # ------------------------------
    # Structure queries
    # ------------------------------

    @property
    def horizon(self) -> int:
        return self._horizon

    def size(self, t: int) -> int:
        return len(self._ids[self._check_time(t)])

    def atom_ids(self, t: int) -> tuple[str, ...]:
        return self._ids[self._check_time(t)]

    def locate(self, atom_id: str) -> tuple[int, int]:
        try:
            return self._position[atom_id]
        except KeyError:
            raise KeyError(f"ScenarioTree: unknown atom {atom_id!r}") from None

    def parent_index(self, t: int) -> IntArray:
        if not 1 <= t <= self._horizon:
            raise IndexError(f"ScenarioTree.parent_index: time {t} outside 1..{self._horizon}")
        return self._parent[t]

    def conditional_probs(self, t: int) -> FloatArray:
        return self._prob[self._check_time(t)]

    def marginal(self, t: int) -> FloatArray:
        return self._marginal[self._check_time(t)]

    def child_groups(self, t: int) -> tuple[IntArray, ...]:
        """Indices (at t+1) of the children of every atom at t."""
        if not 0 <= t < self._horizon:
            raise IndexError(f"ScenarioTree.child_groups: time {t} outside 0..{self._horizon - 1}")
        return self._children[t]

    def ancestor_index(self, t: int, s: int) -> IntArray:
        """For each atom at time s, the index of its ancestor at time t <= s."""
        self._check_time(t)
        self._check_time(s)
        if t > s:
            raise IndexError(f"ScenarioTree.ancestor_index: t = {t} > s = {s}")
        index = np.arange(self.size(s), dtype=np.intp)
        for level in range(s, t, -1):
            index = self._parent[level][index]
        return index

    def expect_one_step(self, values: FloatArray, t: int) -> FloatArray:
        """E[Z | F_t] for Z given per atom of time t+1."""
        return np.bincount(
            self._parent[t + 1], weights=self._prob[t + 1] * values, minlength=self.size(t)
        )

    def _check_time(self, t: int) -> int:
        if not 0 <= t <= self._horizon:
            raise IndexError(f"ScenarioTree: time {t} outside 0..{self._horizon}")
        return t


def _check_link(atom: Atom, by_id: Mapping[str, Atom]) -> None:
    if atom.parent is None:
        raise TreeStructureError(f"ScenarioTree: atom {atom.id!r} at t = {atom.time} has no parent")
    parent = by_id.get(atom.parent)
    if parent is None:
        raise TreeStructureError(
            f"ScenarioTree: atom {atom.id!r} has unknown parent {atom.parent!r}"
        )
    if parent.time != atom.time - 1:
        raise TreeStructureError(
            f"ScenarioTree: parent {parent.id!r} of {atom.id!r} is not at t = {atom.time - 1}"
        )
    if not np.isfinite(atom.prob) or atom.prob > 1.0:
        raise TreeStructureError(f"ScenarioTree: atom {atom.id!r} has probability {atom.prob!r}")
    if atom.prob <= 0.0:
        raise AbsoluteContinuityError(
            f"{ABSOLUTE_CONTINUITY_DIAGNOSTIC}: atom {atom.id!r} has probability {atom.prob!r}"
        )
