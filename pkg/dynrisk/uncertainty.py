"""Dynamic uncertainty sets: membership, worst cases and member sampling.

Analytic variants are the pydantic models of `risk_types`, handled in `balls`.
Variants that need a robust evaluator at runtime subclass `CustomSetKind` and
carry their own behaviour.

Time conventions: a set u_t acts on candidates Y measured at t, and every
membership answer is one value per parent atom (time t-1). `worst_case` takes the
evaluation time t of rho_t and queries u_{t+1}.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TypeAlias, Union

import numpy as np

from .balls import SET_HANDLERS, SetHandler, family_conditionals, halfspace_bound, tolerance_eval
from .risk_types import (
    STATIC_ANALYTIC_TYPES,
    IdentitySet,
    KLBall,
    MeasureFamily,
    RiskKind,
    SumHalfspace,
    SupNormBall,
    TreeStructureError,
    WassersteinBall,
    current_settings,
    current_tolerance,
)
from .space import AdaptedProcess, AdaptedVector, EventSet, FloatArray, ScenarioTree

__all__ = [
    "CustomSetKind",
    "DynamicUncertaintySet",
    "SetKind",
    "contains",
    "describe_set",
    "dominated_gap",
    "family_conditionals",
    "halfspace_bound",
    "is_static",
    "membership_gap",
    "sample_member",
    "sample_members",
    "tolerance_eval",
    "validate_set",
    "worst_case",
    "worst_case_values",
]

logger = logging.getLogger(__name__)


class CustomSetKind(ABC):
    """Set variant evaluated at runtime; membership answers are per parent atom."""

    static: bool = False

    @abstractmethod
    def membership_gap(
        self, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray:
        """Numeric gap per parent atom; Y is a member where the gap is within tolerance."""

    @abstractmethod
    def worst_case(
        self, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
    ) -> FloatArray:
        """sup of rho_{t-1}(Y) over members of u_t(X_{t:T}), per atom of time t-1."""

    @abstractmethod
    def sample_member(
        self,
        tree: ScenarioTree,
        x: AdaptedProcess,
        t: int,
        rng: np.random.Generator,
        boundary: bool,
    ) -> AdaptedVector | None:
        """One member, pushed onto the boundary when `boundary` is set."""

    def dominated_gap(
        self, tree: ScenarioTree, z: AdaptedVector, x: AdaptedProcess, t: int
    ) -> FloatArray | None:
        """Gap of "Z lies below some member"; None when only gauges can decide."""
        del tree, z, x, t
        return None

    def describe(self) -> str:
        return type(self).__name__


SetKind: TypeAlias = Union[
    IdentitySet, SupNormBall, WassersteinBall, KLBall, MeasureFamily, SumHalfspace, CustomSetKind
]


@dataclass(frozen=True)
class DynamicUncertaintySet:
    """u_1, …, u_T."""

    kinds: tuple[SetKind, ...]

    @classmethod
    def uniform(cls, kind: SetKind, horizon: int) -> DynamicUncertaintySet:
        return cls(tuple(kind for _ in range(horizon)))

    @property
    def horizon(self) -> int:
        return len(self.kinds)

    def at(self, t: int) -> SetKind:
        if not 1 <= t <= len(self.kinds):
            raise IndexError(f"DynamicUncertaintySet.at: time {t} outside 1..{len(self.kinds)}")
        return self.kinds[t - 1]

    def is_static(self) -> bool:
        return all(is_static(kind) for kind in self.kinds)


def is_static(kind: SetKind) -> bool:
    if isinstance(kind, CustomSetKind):
        return kind.static
    return kind.type in STATIC_ANALYTIC_TYPES


def describe_set(kind: SetKind) -> str:
    if isinstance(kind, CustomSetKind):
        return kind.describe()
    if isinstance(kind, (SupNormBall, KLBall)):
        return f"{kind.type}[{kind.rule.type}]"
    if isinstance(kind, WassersteinBall):
        return f"wasserstein{kind.order:g}[{kind.rule.type}]"
    return kind.type


def _handler(kind: SetKind) -> SetHandler:
    handler = SET_HANDLERS.get(kind.type) if not isinstance(kind, CustomSetKind) else None
    if handler is None:
        raise TypeError(f"uncertainty: no handler for set variant {type(kind).__name__}")
    return handler


def _check_candidate(tree: ScenarioTree, y: AdaptedVector, t: int, *, where: str) -> None:
    if y.tree is not tree:
        raise ValueError(f"{where}: candidate lives on a different scenario tree")
    if y.time != t:
        raise ValueError(f"{where}: candidate measured at {y.time}, set acts at {t}")


def membership_gap(
    kind: SetKind, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
) -> AdaptedVector:
    _check_candidate(tree, y, t, where="membership_gap")
    if isinstance(kind, CustomSetKind):
        return AdaptedVector(tree, t - 1, kind.membership_gap(tree, y, x, t))
    return AdaptedVector(tree, t - 1, _handler(kind).gap(kind, tree, y, x, t))


def contains(
    kind: SetKind, tree: ScenarioTree, y: AdaptedVector, x: AdaptedProcess, t: int
) -> EventSet:
    """Parent atoms (time t-1) on which Y belongs to u_t(X_{t:T})."""
    gap = membership_gap(kind, tree, y, x, t)
    return EventSet(tree, t - 1, gap.values <= current_tolerance())


def worst_case_values(
    kind: SetKind, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> FloatArray:
    """Raw per-atom suprema at time t; may be +inf for sets unbounded above."""
    if not 0 <= t < tree.horizon:
        raise IndexError(f"worst_case: t = {t} must satisfy 0 <= t < T = {tree.horizon}")
    if isinstance(kind, CustomSetKind):
        values = kind.worst_case(rho, tree, x, t + 1)
    else:
        values = _handler(kind).worst(kind, rho, tree, x, t)
    return np.asarray(values, dtype=np.float64)


def worst_case(
    kind: SetKind, rho: RiskKind, tree: ScenarioTree, x: AdaptedProcess, t: int
) -> AdaptedVector:
    """sup{rho_t(Y) : Y in u_{t+1}(X_{t+1:T})} per atom of time t."""
    return AdaptedVector(tree, t, worst_case_values(kind, rho, tree, x, t))


def sample_member(
    kind: SetKind,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    rng: np.random.Generator,
    boundary: bool = False,
) -> AdaptedVector | None:
    """One member of u_t(X_{t:T}), or None when the sampler found none."""
    if isinstance(kind, CustomSetKind):
        return kind.sample_member(tree, x, t, rng, boundary)
    return _handler(kind).sample(kind, tree, x, t, rng, boundary)


def sample_members(
    kind: SetKind,
    tree: ScenarioTree,
    x: AdaptedProcess,
    t: int,
    rng: np.random.Generator,
    count: int,
) -> list[AdaptedVector]:
    """Up to `count` members of u_t(X_{t:T}); a configured share sits on the boundary."""
    boundary_count = round(count * current_settings().boundary_fraction)
    members: list[AdaptedVector] = []
    for k in range(count):
        member = sample_member(kind, tree, x, t, rng, k >= count - boundary_count)
        if member is not None:
            members.append(member)
    if len(members) < count:
        logger.debug(
            "sample_members: %s produced %d of %d", describe_set(kind), len(members), count
        )
    return members


def dominated_gap(
    kind: SetKind, tree: ScenarioTree, z: AdaptedVector, x: AdaptedProcess, t: int
) -> AdaptedVector | None:
    """Per parent atom, how far Z is from lying below some member; None if undecidable."""
    _check_candidate(tree, z, t, where="dominated_gap")
    if isinstance(kind, CustomSetKind):
        values = kind.dominated_gap(tree, z, x, t)
    else:
        dominated = _handler(kind).dominated
        values = dominated(kind, tree, z, x, t) if dominated is not None else None
    return AdaptedVector(tree, t - 1, values) if values is not None else None


def validate_set(uset: DynamicUncertaintySet, tree: ScenarioTree) -> None:
    """Reject set specifications that do not fit the tree."""
    if uset.horizon != tree.horizon:
        raise TreeStructureError(
            f"validate_set: {uset.horizon} set entries for a tree of horizon {tree.horizon}"
        )
    known = {a for s in range(tree.horizon) for a in tree.atom_ids(s)}
    for t in range(1, tree.horizon + 1):
        kind = uset.at(t)
        if isinstance(kind, MeasureFamily):
            for measure in kind.measures:
                family_conditionals(measure, tree, t)
        if isinstance(kind, SumHalfspace):
            unknown = sorted(set(kind.offsets) - known)
            if unknown:
                raise TreeStructureError(f"validate_set: offsets name unknown atoms {unknown}")
