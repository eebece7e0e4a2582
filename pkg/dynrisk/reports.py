"""Report models, their text and JSON renderings, and the set-property matrix."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence

from pydantic import ConfigDict, Field

from .lattice import LatticeViolation
from .properties import check_set_property
from .risk_types import (
    CheckSpec,
    ConstantRule,
    FamilyMeasure,
    KLBall,
    MeasureFamily,
    ProportionalRule,
    SupNormBall,
    Verdict,
    WassersteinBall,
    _RiskBaseModel,
    current_settings,
)
from .space import ScenarioTree
from .uncertainty import SetKind

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1


# ------------------------------
# Models
# ------------------------------


class ValueRow(_RiskBaseModel):
    process: str
    time: int
    atom: str
    value: float


class OracleRow(_RiskBaseModel):
    set: str
    risk: str
    time: int
    atom: str
    production: float
    oracle: float
    bound: float
    holds: bool


class TableRow(_RiskBaseModel):
    property: str
    cells: list[str]
    expected: str
    matches: bool


class Report(_RiskBaseModel):
    """Outcome of one command; `passed` decides the exit code."""

    model_config = ConfigDict(
        frozen=True, extra="forbid", ser_json_inf_nan="constants", populate_by_name=True
    )

    schema_version: int = Field(default=REPORT_SCHEMA, alias="schema")
    command: str
    passed: bool = True
    values: list[ValueRow] = Field(default_factory=list)
    verdicts: list[Verdict] = Field(default_factory=list)
    violations: list[LatticeViolation] = Field(default_factory=list)
    columns: list[str] = Field(default_factory=list)
    table: list[TableRow] = Field(default_factory=list)
    oracle: list[OracleRow] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def outcome(
    verdicts: Sequence[Verdict] = (),
    violations: Sequence[LatticeViolation] = (),
    table: Sequence[TableRow] = (),
    oracle: Sequence[OracleRow] = (),
) -> bool:
    """True when no verdict, audit edge, matrix cell or oracle comparison failed."""
    return (
        all(v.corroborated for v in verdicts)
        and not violations
        and all(row.matches for row in table)
        and all(row.holds for row in oracle)
    )


# ------------------------------
# Set-property matrix
# ------------------------------

TABLE_PROPERTIES = (
    "proper",
    "normalised",
    "order_preserving",
    "translation_invariant",
    "static",
    "local",
    "positive_homogeneous",
)

TABLE_COLUMNS = ("SN c", "SN pi", "W c", "W pi", "MF", "KL c", "KL pi")

# P must be corroborated, F must be refuted, E accepts either.
TABLE_PATTERN: dict[str, str] = {
    "proper": "PPPPPPP",
    "normalised": "FPFPPPP",
    "order_preserving": "PEPEPPE",
    "translation_invariant": "PFPFPPF",
    "static": "PPPPPPP",
    "local": "PPPPPPP",
    "positive_homogeneous": "FPFPPPF",
}

DEFAULT_TABLE_EPS = 0.1


def table_sets(tree: ScenarioTree, eps: float = DEFAULT_TABLE_EPS) -> list[SetKind]:
    """The built-in variants, one per matrix column."""
    constant, proportional = ConstantRule(eps=eps), ProportionalRule(eps=eps)
    terminal = tree.atom_ids(tree.horizon)
    tilted = {a: 1.0 + (k % 2) for k, a in enumerate(terminal)}
    family = MeasureFamily(
        measures=(
            FamilyMeasure(density={a: 1.0 for a in terminal}),
            FamilyMeasure(density=tilted),
        )
    )
    return [
        SupNormBall(rule=constant),
        SupNormBall(rule=proportional),
        WassersteinBall(rule=constant),
        WassersteinBall(rule=proportional),
        family,
        KLBall(rule=constant),
        KLBall(rule=proportional),
    ]


def _cell(verdict: Verdict) -> str:
    return "P" if verdict.corroborated else "F"


def _matches(cells: Sequence[str], expected: str) -> bool:
    return all(want in ("E", got) for got, want in zip(cells, expected))


def property_table(
    tree: ScenarioTree, spec: CheckSpec | None = None, eps: float = DEFAULT_TABLE_EPS
) -> list[TableRow]:
    kinds = table_sets(tree, eps)
    rows = []
    for prop in TABLE_PROPERTIES:
        cells = [_cell(check_set_property(kind, tree, prop, spec)) for kind in kinds]
        expected = TABLE_PATTERN[prop]
        matches = _matches(cells, expected)
        rows.append(TableRow(property=prop, cells=cells, expected=expected, matches=matches))
        logger.debug("table row %s: %s (expected %s)", prop, "".join(cells), expected)
    return rows


# ------------------------------
# Rendering
# ------------------------------


def _aligned(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    widths = [max(len(str(r[i])) for r in (header, *rows)) for i in range(len(header))]
    return [
        "  ".join(str(cell).ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in (header, *rows)
    ]


def _number(value: float) -> str:
    return f"{value:.{current_settings().value_decimals}f}"


def _verdict_lines(verdict: Verdict) -> list[str]:
    lines = [f"{verdict.check}: {verdict.status} ({verdict.trials} trials)"]
    w = verdict.witness
    if w is not None:
        where = f"t={w.time}" + (f" s={w.horizon}" if w.horizon is not None else "")
        lines.append(f"  witness: {where} atom={w.atom} gap={w.gap:.3g} trial={w.trial}")
        if w.detail:
            lines.append(f"  detail: {w.detail}")
    return lines


def render_text(report: Report) -> str:
    lines = [f"# {report.command}"]
    if report.values:
        lines += _aligned(
            ("process", "time", "atom", "value"),
            [(r.process, str(r.time), r.atom, _number(r.value)) for r in report.values],
        )
    for verdict in report.verdicts:
        lines += _verdict_lines(verdict)
    for violation in report.violations:
        premises = " & ".join(violation.premises)
        lines.append(f"violated: {violation.edge} ({premises} => {violation.conclusion})")
    if report.table:
        lines += _aligned(
            ("property", *report.columns, "match"),
            [(r.property, *r.cells, "yes" if r.matches else "NO") for r in report.table],
        )
    if report.oracle:
        lines += _aligned(
            ("set", "risk", "time", "atom", "solver", "grid", "bound", "ok"),
            [
                (
                    r.set,
                    r.risk,
                    str(r.time),
                    r.atom,
                    _number(r.production),
                    _number(r.oracle),
                    f"{r.bound:.3g}",
                    "yes" if r.holds else "NO",
                )
                for r in report.oracle
            ],
        )
    lines += report.notes
    lines.append("passed" if report.passed else "failed")
    return "\n".join(lines) + "\n"


def render_json(report: Report) -> str:
    """Sorted, indented JSON; equal reports give equal bytes."""
    payload = json.loads(report.model_dump_json(by_alias=True))
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
