"""Implication audit over a table of time-consistency and side-condition verdicts.

Each edge says: when every premise is corroborated, the conclusion must not have a
counterexample. An edge firing points at a checker bug or at a genuine
inconsistency of the configuration. Consolidated-set verdicts carry the
time-consistency notions; measure verdicts carry the side conditions, which are
equivalent for consolidated sets.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass

from pydantic import Field

from .consistency import check_time_consistency
from .properties import check_measure_property, check_set_property
from .risk_types import (
    CheckSpec,
    IncompleteVerdictTableError,
    Verdict,
    Witness,
    _RiskBaseModel,
)
from .robust import RiskEvaluator, consolidated_set

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LatticeEdge:
    name: str
    premises: tuple[str, ...]
    conclusion: str


EDGES: tuple[LatticeEdge, ...] = (
    LatticeEdge(
        "strong implies weak recursive",
        ("consolidated.strong",),
        "consolidated.weak_recursive",
    ),
    LatticeEdge(
        "normalised weak recursive implies strong",
        ("measure.normalised", "consolidated.weak_recursive"),
        "consolidated.strong",
    ),
    LatticeEdge(
        "strong implies shift invariance",
        ("consolidated.strong",),
        "measure.strong_shift_invariance",
    ),
    LatticeEdge(
        "monotone weak recursive implies order",
        ("measure.monotone", "consolidated.weak_recursive"),
        "consolidated.order",
    ),
    LatticeEdge(
        "translation invariant order implies weak recursive",
        ("measure.translation_invariant", "measure.cash_shift", "consolidated.order"),
        "consolidated.weak_recursive",
    ),
    LatticeEdge(
        "non-positive R(0) monotone weak recursive implies weak",
        ("measure.zero_nonpositive", "measure.monotone", "consolidated.weak_recursive"),
        "consolidated.weak",
    ),
    LatticeEdge(
        "monotone weak with 0 in U(0) implies rejection",
        ("measure.monotone", "consolidated.zero_in_zero", "consolidated.weak"),
        "consolidated.rejection",
    ),
    LatticeEdge(
        "prudent implies rejection",
        ("consolidated.prudent",),
        "consolidated.rejection",
    ),
    LatticeEdge(
        "normalised order implies rejection",
        ("measure.normalised", "consolidated.order"),
        "consolidated.rejection",
    ),
)

REQUIRED_VERDICTS: frozenset[str] = frozenset(
    key for edge in EDGES for key in (*edge.premises, edge.conclusion)
)


class LatticeViolation(_RiskBaseModel):
    edge: str
    premises: list[str]
    conclusion: str
    witnesses: list[Witness] = Field(default_factory=list)


def audit_implications(table: Mapping[str, Verdict]) -> list[LatticeViolation]:
    """Edges whose premises are all corroborated while the conclusion failed."""
    missing = sorted(REQUIRED_VERDICTS - set(table))
    if missing:
        raise IncompleteVerdictTableError(f"audit_implications: missing verdicts {missing}")
    violations: list[LatticeViolation] = []
    for edge in EDGES:
        premises = [table[key] for key in edge.premises]
        conclusion = table[edge.conclusion]
        if all(v.corroborated for v in premises) and not conclusion.corroborated:
            witnesses = [v.witness for v in (*premises, conclusion) if v.witness is not None]
            violations.append(
                LatticeViolation(
                    edge=edge.name,
                    premises=list(edge.premises),
                    conclusion=edge.conclusion,
                    witnesses=witnesses,
                )
            )
            logger.info("lattice edge violated: %s", edge.name)
    return violations


def gather_verdicts(measure: RiskEvaluator, spec: CheckSpec | None = None) -> dict[str, Verdict]:
    """Run every check the audit needs, keyed the way `EDGES` names them."""
    plan = spec if spec is not None else CheckSpec.from_settings()
    table: dict[str, Verdict] = {}
    for key in sorted(REQUIRED_VERDICTS):
        level, name = key.split(".", 1)
        if key == "consolidated.zero_in_zero":
            found = check_set_property(consolidated_set(measure), measure.tree, name, plan)
            verdict = found.model_copy(update={"check": key})
        elif level == "measure":
            verdict = check_measure_property(measure, name, plan)
        else:
            verdict = check_time_consistency(measure, name, plan, level="consolidated")
        table[key] = verdict
    return table
