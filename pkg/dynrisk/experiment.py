"""Experiment documents: JSON description of a tree, processes, risk family and sets.

Documents carry `"schema": 1`. Parsing validates the whole document, builds the
tree once to surface structural problems, and checks that every reference (atom
ids in processes and offsets, the evaluation time) resolves.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal, TypeVar

from pydantic import ConfigDict, Field, model_validator

from .recursive import construct_recursive
from .risk_types import (
    AnalyticSetKind,
    Expectation,
    IdentitySet,
    RiskFamily,
    RiskKind,
    Settings,
    TreeStructureError,
    _RiskBaseModel,
)
from .robust import RobustRiskMeasure
from .space import AdaptedProcess
from .tree import Atom, ScenarioTree
from .uncertainty import DynamicUncertaintySet, validate_set

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

Construction = Literal["direct", "recursive"]
Level = Literal["set", "consolidated", "measure"]

_T = TypeVar("_T")


class AtomSpec(_RiskBaseModel):
    """One atom; `prob` is the probability conditional on the parent."""

    id: str = Field(min_length=1)
    parent: str | None = None
    prob: float = 1.0


class ExperimentDoc(_RiskBaseModel):
    model_config = ConfigDict(
        frozen=True, extra="forbid", ser_json_inf_nan="constants", populate_by_name=True
    )

    schema_version: Literal[1] = Field(default=SCHEMA_VERSION, alias="schema")
    name: str = ""
    atoms: list[AtomSpec] = Field(min_length=2)
    processes: dict[str, dict[str, float]] = Field(default_factory=dict)
    family: list[RiskKind] = Field(min_length=1)
    uncertainty: list[AnalyticSetKind] = Field(min_length=1)
    construction: Construction = "direct"
    settings: Settings = Field(default_factory=Settings)
    checks: list[str] = Field(default_factory=list)
    notions: list[str] = Field(default_factory=list)
    level: Level = "measure"
    time: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _references_resolve(self) -> ExperimentDoc:
        tree = build_tree(self.atoms)
        horizon = tree.horizon
        for field, entries in (("family", self.family), ("uncertainty", self.uncertainty)):
            if len(entries) not in (1, horizon):
                raise ValueError(
                    f"{field}: expected 1 or {horizon} entries for horizon {horizon}, "
                    f"got {len(entries)}"
                )
        validate_set(DynamicUncertaintySet(_expand(self.uncertainty, horizon)), tree)
        known = {atom.id for atom in self.atoms}
        for name, values in sorted(self.processes.items()):
            unknown = sorted(set(values) - known)
            if unknown:
                raise ValueError(f"processes.{name}: unknown atoms {unknown}")
            missing = sorted(known - set(values))
            if missing:
                raise ValueError(f"processes.{name}: no value for atoms {missing}")
        if self.time is not None and self.time >= horizon:
            raise ValueError(f"time: {self.time} must be below the horizon {horizon}")
        return self


def _expand(entries: Sequence[_T], horizon: int) -> tuple[_T, ...]:
    if len(entries) == horizon:
        return tuple(entries)
    return tuple(entries[0] for _ in range(horizon))


def build_tree(atoms: Sequence[AtomSpec]) -> ScenarioTree:
    """ScenarioTree of the document atoms; times follow from the parent links."""
    parents = {atom.id: atom.parent for atom in atoms}
    records = []
    for atom in atoms:
        depth, cursor, seen = 0, atom.parent, {atom.id}
        while cursor is not None:
            if cursor not in parents:
                raise TreeStructureError(f"atoms: {atom.id!r} has unknown ancestor {cursor!r}")
            if cursor in seen:
                raise TreeStructureError(f"atoms: parent links of {atom.id!r} form a cycle")
            seen.add(cursor)
            depth += 1
            cursor = parents[cursor]
        records.append(Atom(atom.id, depth, atom.parent, atom.prob))
    return ScenarioTree(records)


# ------------------------------
# Runtime view
# ------------------------------


@dataclass(frozen=True)
class Experiment:
    """Objects built from a validated document."""

    doc: ExperimentDoc
    tree: ScenarioTree
    family: RiskFamily
    uset: DynamicUncertaintySet
    processes: dict[str, AdaptedProcess]

    @property
    def horizon(self) -> int:
        return self.tree.horizon

    def measure(self) -> RobustRiskMeasure:
        """The robust measure over the document sets, or over their derived sets."""
        if self.doc.construction == "recursive":
            return construct_recursive(self.uset, self.family, self.tree)
        return RobustRiskMeasure(self.tree, self.family, self.uset)


def build_experiment(doc: ExperimentDoc) -> Experiment:
    tree = build_tree(doc.atoms)
    family = RiskFamily(kinds=_expand(doc.family, tree.horizon))
    uset = DynamicUncertaintySet(_expand(doc.uncertainty, tree.horizon))
    processes = {
        name: AdaptedProcess.from_values(
            tree,
            [[values[a] for a in tree.atom_ids(t)] for t in range(tree.horizon + 1)],
        )
        for name, values in sorted(doc.processes.items())
    }
    logger.debug("experiment %r: horizon %d, %d processes", doc.name, tree.horizon, len(processes))
    return Experiment(doc, tree, family, uset, processes)


# ------------------------------
# Text round trip
# ------------------------------


def parse_experiment(text: str | bytes) -> ExperimentDoc:
    """Validate a JSON document; raises pydantic.ValidationError with field paths."""
    return ExperimentDoc.model_validate_json(text)


def serialize_experiment(doc: ExperimentDoc) -> str:
    return doc.model_dump_json(by_alias=True, indent=2)


def default_document(horizon: int = 2, branching: int = 2) -> ExperimentDoc:
    """Regular tree with an Expectation family over identity sets."""
    tree = ScenarioTree.regular(branching, horizon)
    atoms = [AtomSpec(id=tree.atom_ids(0)[0])]
    for t in range(1, tree.horizon + 1):
        parents = tree.atom_ids(t - 1)
        index = tree.parent_index(t)
        probs = tree.conditional_probs(t)
        for k, atom_id in enumerate(tree.atom_ids(t)):
            atoms.append(AtomSpec(id=atom_id, parent=parents[index[k]], prob=float(probs[k])))
    return ExperimentDoc(
        name="default", atoms=atoms, family=[Expectation()], uncertainty=[IdentitySet()]
    )
