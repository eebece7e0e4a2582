"""Adapted vectors, adapted processes, events and conditional operations on a scenario tree."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from .risk_types import TreeStructureError
from .tree import (
    PROBABILITY_SUM_TOLERANCE,
    Atom,
    BoolArray,
    FloatArray,
    IntArray,
    ScenarioTree,
)

__all__ = [
    "PROBABILITY_SUM_TOLERANCE",
    "AdaptedProcess",
    "AdaptedVector",
    "Atom",
    "BoolArray",
    "DiscreteLaw",
    "EventSet",
    "FloatArray",
    "IntArray",
    "ScenarioTree",
    "children",
    "conditional_expectation",
    "conditional_law",
    "conditional_variance",
    "expected_tail_sum",
    "law_of",
    "lift",
    "mix",
    "sup_norm",
]

# ------------------------------
# Adapted random variables
# ------------------------------

Scalar = Union[int, float]


def _same_tree(left: ScenarioTree, right: ScenarioTree, *, where: str) -> None:
    if left is not right:
        raise ValueError(f"{where}: operands live on different scenario trees")


@dataclass(frozen=True, eq=False)
class AdaptedVector:
    """An F_t-measurable random variable: one finite value per atom of time t."""

    tree: ScenarioTree
    time: int
    values: FloatArray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        expected = self.tree.size(self.time)
        if values.shape != (expected,):
            raise TreeStructureError(
                f"AdaptedVector: time {self.time} needs {expected} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError(f"AdaptedVector: non-finite value at time {self.time}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, tree: ScenarioTree, time: int) -> AdaptedVector:
        return cls(tree, time, np.zeros(tree.size(time)))

    @classmethod
    def constant(cls, tree: ScenarioTree, time: int, value: float) -> AdaptedVector:
        return cls(tree, time, np.full(tree.size(time), float(value)))

    @classmethod
    def from_mapping(
        cls, tree: ScenarioTree, time: int, mapping: Mapping[str, float]
    ) -> AdaptedVector:
        ids = tree.atom_ids(time)
        missing = sorted(set(ids) - set(mapping))
        extra = sorted(set(mapping) - set(ids))
        if missing or extra:
            raise TreeStructureError(
                f"AdaptedVector.from_mapping: time {time} missing {missing}, unexpected {extra}"
            )
        return cls(tree, time, np.array([mapping[atom_id] for atom_id in ids]))

    def as_mapping(self) -> dict[str, float]:
        return dict(zip(self.tree.atom_ids(self.time), self.values.tolist()))

    def lift(self, s: int) -> AdaptedVector:
        """The same random variable seen at a later time s."""
        return AdaptedVector(self.tree, s, self.values[self.tree.ancestor_index(self.time, s)])

    def max_abs_gap(self, other: AdaptedVector) -> float:
        self._check(other, where="AdaptedVector.max_abs_gap")
        return float(np.max(np.abs(self.values - other.values)))

    def allclose(self, other: AdaptedVector, atol: float) -> bool:
        return self.max_abs_gap(other) <= atol

    def _check(self, other: AdaptedVector, *, where: str) -> None:
        _same_tree(self.tree, other.tree, where=where)
        if self.time != other.time:
            raise ValueError(f"{where}: time mismatch ({self.time} vs {other.time})")

    def _operand(self, other: AdaptedVector | Scalar, *, where: str) -> FloatArray | float:
        if isinstance(other, AdaptedVector):
            self._check(other, where=where)
            return other.values
        if isinstance(other, (int, float, np.floating)):
            return float(other)
        raise TypeError(f"{where}: expected AdaptedVector or real scalar")

    def __add__(self, other: AdaptedVector | Scalar) -> AdaptedVector:
        return AdaptedVector(self.tree, self.time, self.values + self._operand(other, where="+"))

    __radd__ = __add__

    def __sub__(self, other: AdaptedVector | Scalar) -> AdaptedVector:
        return AdaptedVector(self.tree, self.time, self.values - self._operand(other, where="-"))

    def __rsub__(self, other: Scalar) -> AdaptedVector:
        return AdaptedVector(self.tree, self.time, self._operand(other, where="-") - self.values)

    def __mul__(self, other: AdaptedVector | Scalar) -> AdaptedVector:
        return AdaptedVector(self.tree, self.time, self.values * self._operand(other, where="*"))

    __rmul__ = __mul__

    def __neg__(self) -> AdaptedVector:
        return AdaptedVector(self.tree, self.time, -self.values)

    def __repr__(self) -> str:
        return f"AdaptedVector(t={self.time}, {self.as_mapping()})"


@dataclass(frozen=True, eq=False)
class AdaptedProcess:
    """X = (X_0, …, X_T); component i is an AdaptedVector at time i."""

    tree: ScenarioTree
    components: tuple[AdaptedVector, ...]

    def __post_init__(self) -> None:
        components = tuple(self.components)
        if len(components) != self.tree.horizon + 1:
            raise TreeStructureError(
                f"AdaptedProcess: expected {self.tree.horizon + 1} components, "
                f"got {len(components)}"
            )
        for i, component in enumerate(components):
            _same_tree(self.tree, component.tree, where="AdaptedProcess")
            if component.time != i:
                raise TreeStructureError(
                    f"AdaptedProcess: component {i} is measured at time {component.time}"
                )
        object.__setattr__(self, "components", components)

    @classmethod
    def zeros(cls, tree: ScenarioTree) -> AdaptedProcess:
        return cls(tree, tuple(AdaptedVector.zeros(tree, t) for t in range(tree.horizon + 1)))

    @classmethod
    def from_values(cls, tree: ScenarioTree, values: Sequence[ArrayLike]) -> AdaptedProcess:
        return cls(
            tree,
            tuple(
                AdaptedVector(tree, t, np.asarray(component, dtype=np.float64))
                for t, component in enumerate(values)
            ),
        )

    def __getitem__(self, t: int) -> AdaptedVector:
        return self.component(t)

    def component(self, t: int) -> AdaptedVector:
        if not 0 <= t <= self.tree.horizon:
            raise IndexError(f"AdaptedProcess: time {t} outside 0..{self.tree.horizon}")
        return self.components[t]

    def slice(self, t: int, s: int) -> AdaptedProcess:
        """X_{t:s}: components outside [t, s] replaced by zero vectors."""
        if t > s:
            raise IndexError(f"AdaptedProcess.slice: t = {t} > s = {s}")
        if t < 0 or s > self.tree.horizon:
            raise IndexError(f"AdaptedProcess.slice: [{t}, {s}] outside 0..{self.tree.horizon}")
        return AdaptedProcess(
            self.tree,
            tuple(
                component if t <= i <= s else AdaptedVector.zeros(self.tree, i)
                for i, component in enumerate(self.components)
            ),
        )

    def tail(self, t: int) -> AdaptedProcess:
        return self.slice(t, self.tree.horizon)

    def replace(self, t: int, component: AdaptedVector) -> AdaptedProcess:
        if component.time != t:
            raise ValueError(
                f"AdaptedProcess.replace: component measured at {component.time}, not {t}"
            )
        parts = list(self.components)
        parts[t] = component
        return AdaptedProcess(self.tree, tuple(parts))

    def scale(self, factor: AdaptedVector | float) -> AdaptedProcess:
        """Multiply by a scalar, or by an F_r-measurable factor on components i >= r."""
        if isinstance(factor, AdaptedVector):
            _same_tree(self.tree, factor.tree, where="AdaptedProcess.scale")
            return AdaptedProcess(
                self.tree,
                tuple(
                    component * factor.lift(i) if i >= factor.time else component
                    for i, component in enumerate(self.components)
                ),
            )
        return AdaptedProcess(self.tree, tuple(c * float(factor) for c in self.components))

    def _combine(self, other: AdaptedProcess, sign: float) -> AdaptedProcess:
        _same_tree(self.tree, other.tree, where="AdaptedProcess")
        return AdaptedProcess(
            self.tree,
            tuple(a + sign * b for a, b in zip(self.components, other.components)),
        )

    def __add__(self, other: AdaptedProcess) -> AdaptedProcess:
        return self._combine(other, 1.0)

    def __sub__(self, other: AdaptedProcess) -> AdaptedProcess:
        return self._combine(other, -1.0)

    def __neg__(self) -> AdaptedProcess:
        return self.scale(-1.0)

    def to_lists(self) -> list[list[float]]:
        return [component.values.tolist() for component in self.components]

    @classmethod
    def from_lists(cls, tree: ScenarioTree, values: Sequence[Sequence[float]]) -> AdaptedProcess:
        return cls.from_values(tree, [np.asarray(v, dtype=np.float64) for v in values])


@dataclass(frozen=True, eq=False)
class EventSet:
    """A union of atoms of time t, i.e. an event B ∈ F_t."""

    tree: ScenarioTree
    time: int
    mask: BoolArray

    def __post_init__(self) -> None:
        mask = np.array(self.mask, dtype=bool)
        if mask.shape != (self.tree.size(self.time),):
            raise TreeStructureError(f"EventSet: mask does not match the atoms of time {self.time}")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_ids(cls, tree: ScenarioTree, time: int, atom_ids: Iterable[str]) -> EventSet:
        chosen = set(atom_ids)
        unknown = sorted(chosen - set(tree.atom_ids(time)))
        if unknown:
            raise TreeStructureError(f"EventSet.from_ids: atoms {unknown} are not at time {time}")
        return cls(tree, time, np.array([a in chosen for a in tree.atom_ids(time)], dtype=bool))

    @classmethod
    def everything(cls, tree: ScenarioTree, time: int) -> EventSet:
        return cls(tree, time, np.ones(tree.size(time), dtype=bool))

    def ids(self) -> list[str]:
        return [a for a, inside in zip(self.tree.atom_ids(self.time), self.mask) if inside]

    def complement(self) -> EventSet:
        return EventSet(self.tree, self.time, ~self.mask)

    def indicator(self) -> AdaptedVector:
        return AdaptedVector(self.tree, self.time, self.mask.astype(np.float64))

    def lift_mask(self, s: int) -> BoolArray:
        return self.mask[self.tree.ancestor_index(self.time, s)]

    def all(self) -> bool:
        return bool(self.mask.all())


@dataclass(frozen=True)
class DiscreteLaw:
    """Finitely supported law: sorted distinct values with their probabilities."""

    values: FloatArray
    probs: FloatArray

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.values.tolist(), self.probs.tolist()))


# ------------------------------
# Elementary conditional operations
# ------------------------------


def children(tree: ScenarioTree, atom_id: str) -> list[tuple[str, float]]:
    """Children of `atom_id` with their conditional probabilities."""
    t, i = tree.locate(atom_id)
    if t >= tree.horizon:
        raise TreeStructureError(f"children: terminal atom {atom_id!r} has no children")
    group = tree.child_groups(t)[i]
    ids = tree.atom_ids(t + 1)
    probs = tree.conditional_probs(t + 1)
    return [(ids[j], float(probs[j])) for j in group]


def mix(event: EventSet, x: AdaptedProcess, y: AdaptedProcess) -> AdaptedProcess:
    """1_B X + 1_{B^c} Y; an earlier atom follows X only if it lies entirely inside B."""
    tree = event.tree
    _same_tree(tree, x.tree, where="mix")
    _same_tree(tree, y.tree, where="mix")
    parts: list[AdaptedVector] = []
    for i in range(tree.horizon + 1):
        if i >= event.time:
            mask = event.lift_mask(i)
        else:
            ancestor = tree.ancestor_index(i, event.time)
            inside = np.ones(tree.size(i), dtype=bool)
            np.logical_and.at(inside, ancestor, event.mask)
            mask = inside
        parts.append(AdaptedVector(tree, i, np.where(mask, x[i].values, y[i].values)))
    return AdaptedProcess(tree, tuple(parts))


def sup_norm(x: AdaptedProcess, t: int, s: int) -> AdaptedVector:
    """Per time-t atom, max of |X_i| over descendants and i in [t, s]."""
    tree = x.tree
    if t > s:
        raise IndexError(f"sup_norm: t = {t} > s = {s}")
    if t < 0 or s > tree.horizon:
        raise IndexError(f"sup_norm: [{t}, {s}] outside 0..{tree.horizon}")
    running = np.abs(x[s].values)
    for i in range(s - 1, t - 1, -1):
        upper = np.zeros(tree.size(i))
        np.maximum.at(upper, tree.parent_index(i + 1), running)
        running = np.maximum(np.abs(x[i].values), upper)
    return AdaptedVector(tree, t, running)


def conditional_law(tree: ScenarioTree, x: AdaptedVector, parent_id: str) -> DiscreteLaw:
    """Law of X_t given the parent atom (time t-1), equal values merged."""
    _same_tree(tree, x.tree, where="conditional_law")
    t, i = tree.locate(parent_id)
    if x.time != t + 1:
        raise ValueError(f"conditional_law: parent {parent_id!r} is not at time {x.time - 1}")
    group = tree.child_groups(t)[i]
    return law_of(x.values[group], tree.conditional_probs(t + 1)[group])


def law_of(values: FloatArray, probs: FloatArray) -> DiscreteLaw:
    support, inverse = np.unique(values, return_inverse=True)
    return DiscreteLaw(support, np.bincount(inverse.ravel(), weights=probs))


def lift(vector: AdaptedVector, s: int) -> AdaptedVector:
    return vector.lift(s)


def conditional_expectation(z: AdaptedVector, t: int) -> AdaptedVector:
    """E[Z | F_t] by the tower of one-step expectations."""
    if t > z.time:
        raise IndexError(f"conditional_expectation: t = {t} > time of Z = {z.time}")
    values = z.values
    for level in range(z.time - 1, t - 1, -1):
        values = z.tree.expect_one_step(values, level)
    return AdaptedVector(z.tree, t, values)


def conditional_variance(x: AdaptedVector) -> AdaptedVector:
    """Var(X_t | F_{t-1})."""
    if x.time < 1:
        raise IndexError("conditional_variance: needs a vector at time >= 1")
    tree = x.tree
    mean = tree.expect_one_step(x.values, x.time - 1)
    centred = x.values - mean[tree.parent_index(x.time)]
    return AdaptedVector(tree, x.time - 1, tree.expect_one_step(centred**2, x.time - 1))


def expected_tail_sum(x: AdaptedProcess, t: int) -> AdaptedVector:
    """E[X_{t+1} + … + X_T | F_t]."""
    tree = x.tree
    if not 0 <= t <= tree.horizon:
        raise IndexError(f"expected_tail_sum: time {t} outside 0..{tree.horizon}")
    acc = np.zeros(tree.size(tree.horizon))
    for i in range(tree.horizon, t, -1):
        acc = tree.expect_one_step(x[i].values + acc, i - 1)
    return AdaptedVector(tree, t, acc)
