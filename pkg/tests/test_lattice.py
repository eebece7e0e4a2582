"""Tests for the implication audit over gathered verdict tables."""

from __future__ import annotations

import pytest

from dynrisk.lattice import EDGES, REQUIRED_VERDICTS, audit_implications, gather_verdicts
from dynrisk.risk_types import CheckSpec, IncompleteVerdictTableError, Verdict, Witness
from tests.helpers import FIXTURE_NAMES, fixture

SPEC = CheckSpec(trials=100)


def _table(**statuses: str) -> dict[str, Verdict]:
    """Every required verdict corroborated unless overridden by `key=status`."""
    table = {key: Verdict(check=key, status="corroborated", trials=1) for key in REQUIRED_VERDICTS}
    for name, status in statuses.items():
        key = name.replace("__", ".")
        witness = Witness(time=1, gap=0.5) if status == "counterexample" else None
        verdict = {"check": key, "status": status, "trials": 1, "witness": witness}
        table[key] = Verdict.model_validate(verdict)
    return table


class TestAudit:
    """Edges fire only when every premise holds and the conclusion failed."""

    def test_consistent_table_has_no_violations(self) -> None:
        assert audit_implications(_table()) == []

    def test_failed_conclusion_with_true_premises(self) -> None:
        violations = audit_implications(_table(consolidated__weak_recursive="counterexample"))
        names = {v.edge for v in violations}
        assert "strong implies weak recursive" in names
        fired = next(v for v in violations if v.edge == "strong implies weak recursive")
        assert fired.premises == ["consolidated.strong"]
        assert fired.witnesses == [Witness(time=1, gap=0.5)]

    def test_failed_premise_silences_the_edge(self) -> None:
        table = _table(
            consolidated__strong="counterexample",
            measure__strong_shift_invariance="counterexample",
        )
        names = {v.edge for v in audit_implications(table)}
        assert "strong implies shift invariance" not in names

    def test_vacuous_premises_count_as_holding(self) -> None:
        table = _table(
            consolidated__strong="vacuous", consolidated__weak_recursive="counterexample"
        )
        names = {v.edge for v in audit_implications(table)}
        assert "strong implies weak recursive" in names

    def test_missing_verdicts(self) -> None:
        table = _table()
        del table["measure.monotone"]
        with pytest.raises(IncompleteVerdictTableError, match="measure.monotone"):
            audit_implications(table)

    def test_every_edge_is_keyed_by_level(self) -> None:
        for edge in EDGES:
            for key in (*edge.premises, edge.conclusion):
                assert key.split(".", 1)[0] in ("measure", "consolidated")


class TestShippedFixtures:
    """Gathered verdicts of every shipped experiment satisfy every edge."""

    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    def test_no_violations(self, name: str) -> None:
        table = gather_verdicts(fixture(name).measure(), SPEC)
        assert set(table) == REQUIRED_VERDICTS
        assert audit_implications(table) == []

    def test_broken_checker_is_caught(self) -> None:
        measure = fixture("kl_recursive").measure()
        table = gather_verdicts(measure, SPEC.model_copy(update={"mutant": True}))
        assert table["consolidated.weak_recursive"].status == "counterexample"
        violations = audit_implications(table)
        assert violations
        assert {v.conclusion for v in violations} >= {"consolidated.weak_recursive"}

    def test_plain_sup_norm_leaves_the_translation_edge_open(self) -> None:
        table = gather_verdicts(fixture("supnorm_constant").measure(), SPEC)
        assert table["measure.translation_invariant"].corroborated
        assert table["consolidated.weak_recursive"].status == "counterexample"
        assert table["measure.cash_shift"].status == "counterexample"
