"""Tests for the command-line surface, its reports and exit codes."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from dynrisk.cli import HANDLERS, UsageError, main, run
from dynrisk.reports import (
    TABLE_COLUMNS,
    TABLE_PATTERN,
    Report,
    ValueRow,
    property_table,
    render_json,
    render_text,
)
from dynrisk.risk_types import CheckSpec, Verdict, Witness
from dynrisk.space import ScenarioTree
from tests.helpers import FIXTURES, fixture_doc


def _fixture_path(name: str) -> str:
    return str(FIXTURES / f"{name}.json")


def _write(tmp_path: Path, name: str, **changes: object) -> str:
    raw = json.loads((FIXTURES / f"{name}.json").read_text())
    raw.update(changes)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(raw))
    return str(path)


class TestExitCodes:
    """0 when everything passed, 1 on a counterexample, 2 on usage errors."""

    def test_evaluate(self, capsys: pytest.CaptureFixture[str]) -> None:
        code = main(["evaluate", "--input", _fixture_path("sum_halfspace_centred")])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("# evaluate")
        assert "0.750000" in out
        assert out.rstrip().endswith("passed")

    def test_counterexample_exits_one(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        path = _write(tmp_path, "sum_halfspace_drift", notions=["strong"])
        assert main(["check-tc", "--input", path, "--output", "json"]) == 1
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is False
        assert report["verdicts"][0]["status"] == "counterexample"
        assert report["verdicts"][0]["witness"]["gap"] == pytest.approx(0.2)

    def test_audit_and_construct_pass(self) -> None:
        assert main(["audit", "--input", _fixture_path("kl_recursive"), "--trials", "50"]) == 0
        assert main(["construct", "--input", _fixture_path("kl_recursive"), "--trials", "50"]) == 0

    def test_construct_of_a_radius_base_is_only_weakly_recursive(
        self, capsys: pytest.CaptureFixture[str]
    ) -> None:
        code = main(["construct", "--input", _fixture_path("supnorm_constant"), "--trials", "100"])
        out = capsys.readouterr().out
        assert code == 1
        assert "measure.strong: counterexample" in out
        assert "measure.weak_recursive: corroborated" in out
        assert "static representation round trip" in out

    def test_accept_reports_rejected_atoms(self, capsys: pytest.CaptureFixture[str]) -> None:
        code = main(["accept", "--input", _fixture_path("sum_halfspace_centred"), "--time", "0"])
        assert code == 1
        assert "X t=0: accepted [] rejected ['root']" in capsys.readouterr().out

    def test_oracle_comparison(self) -> None:
        path = _fixture_path("supnorm_constant")
        assert main(["oracle-compare", "--input", path, "--oracle"]) == 0
        assert main(["evaluate", "--input", path, "--oracle", "--output", "json"]) == 0

    @pytest.mark.parametrize(
        "argv",
        [
            ["evaluate"],
            ["oracle-compare", "--input", _fixture_path("supnorm_constant")],
            ["evaluate", "--input", _fixture_path("supnorm_constant"), "--time", "5"],
            ["evaluate", "--input", "/nonexistent/experiment.json"],
            ["explain", "--input", _fixture_path("supnorm_constant")],
            ["check", "--input", _fixture_path("supnorm_constant"), "--tol", "-1"],
        ],
        ids=["no-input", "no-oracle-flag", "bad-time", "missing-file", "bad-command", "bad-tol"],
    )
    def test_usage_errors(self, argv: list[str], capsys: pytest.CaptureFixture[str]) -> None:
        assert main(argv) == 2
        assert capsys.readouterr().out == ""

    def test_document_errors_name_the_field(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        path = _write(tmp_path, "supnorm_constant", family=[{"type": "cvar", "alpha": 2.0}])
        assert main(["evaluate", "--input", path]) == 2
        assert "family.0.cvar.alpha" in capsys.readouterr().err

    def test_unknown_check_is_a_usage_error(self, tmp_path: Path) -> None:
        path = _write(tmp_path, "supnorm_constant", checks=["set.sparkly"])
        assert main(["check", "--input", path]) == 2


class TestDeterminism:
    """Same document and seed, same bytes."""

    @pytest.mark.parametrize("command", ["evaluate", "check", "check-tc"])
    def test_repeated_runs_match(self, command: str, capsys: pytest.CaptureFixture[str]) -> None:
        argv = [command, "--input", _fixture_path("supnorm_constant"), "--output", "json"]
        argv += ["--trials", "50"]
        first_code = main(argv)
        first = capsys.readouterr().out
        assert main(argv) == first_code
        assert capsys.readouterr().out == first

    def test_run_repeats_under_a_fixed_seed(self) -> None:
        doc = fixture_doc("supnorm_constant")
        seeded = doc.model_copy(update={"settings": doc.settings.model_copy(update={"seed": 7})})
        first = run("check", seeded)
        assert first == run("check", seeded)
        assert first.command == "check"

    def test_every_command_is_wired(self) -> None:
        assert sorted(HANDLERS) == sorted(
            ["evaluate", "accept", "check", "check-tc", "construct", "audit", "table1",
             "oracle-compare"]
        )
        with pytest.raises(UsageError):
            run("explain", fixture_doc("supnorm_constant"))


class TestPropertyTable:
    """The built-in variants reproduce the expected property matrix."""

    def test_pattern_matches(self, binary_tree: ScenarioTree) -> None:
        rows = property_table(binary_tree, CheckSpec(trials=100))
        assert [row.property for row in rows] == list(TABLE_PATTERN)
        for row in rows:
            assert len(row.cells) == len(TABLE_COLUMNS)
            assert row.matches, (row.property, "".join(row.cells), row.expected)

    def test_table1_without_input(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["table1", "--trials", "100"]) == 0
        out = capsys.readouterr().out
        for column in TABLE_COLUMNS:
            assert column in out
        assert "NO" not in out


class TestRendering:
    def test_text_lists_witnesses(self) -> None:
        witness = Witness(time=1, horizon=1, atom="root", gap=0.25, trial=3, detail="shifted")
        verdict = Verdict(
            check="set.normalised", status="counterexample", trials=4, witness=witness
        )
        report = Report(command="check", verdicts=[verdict], passed=False)
        text = render_text(report)
        assert "set.normalised: counterexample (4 trials)" in text
        assert "witness: t=1 s=1 atom=root gap=0.25 trial=3" in text
        assert text.endswith("failed\n")
        assert report.exit_code == 1

    def test_json_is_sorted_and_carries_the_schema(self) -> None:
        report = Report(
            command="evaluate", values=[ValueRow(process="X", time=0, atom="root", value=0.5)]
        )
        payload = render_json(report)
        assert json.loads(payload)["schema"] == 1
        assert payload == render_json(Report.model_validate_json(report.model_dump_json()))
        keys = list(json.loads(payload))
        assert keys == sorted(keys)
