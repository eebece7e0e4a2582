"""Command-line surface: `dynrisk <command> --input <file> [options]`.

Exit codes: 0 when every requested check passed, 1 when a counterexample (or a
failed comparison) was found, 2 for usage and document errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

from pydantic import ValidationError

from .consistency import NOTIONS, check_time_consistency
from .experiment import (
    Experiment,
    ExperimentDoc,
    build_experiment,
    default_document,
    parse_experiment,
)
from .lattice import audit_implications, gather_verdicts
from .oracle import GridSpec, sandwich
from .properties import (
    MEASURE_PROPERTIES,
    SET_PROPERTIES,
    check_measure_property,
    check_set_property,
)
from .recursive import (
    construct_recursive,
    nested_robust_evaluate,
    round_trip_gap,
    static_representation,
)
from .reports import (
    TABLE_COLUMNS,
    OracleRow,
    Report,
    ValueRow,
    outcome,
    property_table,
    render_json,
    render_text,
)
from .risk_types import CheckSpec, OracleCapError, Settings, describe_risk, use_settings
from .robust import robust_accepts
from .sampling import random_process, trial_rng
from .space import AdaptedProcess, ScenarioTree
from .uncertainty import describe_set

logger = logging.getLogger(__name__)

DEFAULT_CHECKS = (
    "set.proper",
    "set.normalised",
    "set.order_preserving",
    "set.translation_invariant",
    "set.static",
    "set.local",
    "set.positive_homogeneous",
    "measure.normalised",
    "measure.monotone",
    "measure.translation_invariant",
    "measure.local",
)
CONSTRUCT_SAMPLES = 20
ROUND_TRIP_SAMPLES = 4


class UsageError(Exception):
    """Request that cannot run against the given document."""


@dataclass(frozen=True)
class RunContext:
    experiment: Experiment
    oracle: bool = False
    time: int | None = None

    @property
    def doc(self) -> ExperimentDoc:
        return self.experiment.doc

    def times(self) -> list[int]:
        chosen = self.time if self.time is not None else self.doc.time
        if chosen is not None:
            if not 0 <= chosen < self.experiment.horizon:
                raise UsageError(f"--time {chosen} outside 0..{self.experiment.horizon - 1}")
            return [chosen]
        return list(range(self.experiment.horizon))

    def processes(self) -> dict[str, AdaptedProcess]:
        if not self.experiment.processes:
            raise UsageError(f"document {self.doc.name!r} has no processes")
        return self.experiment.processes


# ------------------------------
# Commands
# ------------------------------


def _value_rows(ctx: RunContext) -> list[ValueRow]:
    measure = ctx.experiment.measure()
    rows = []
    for name, x in ctx.processes().items():
        for t in ctx.times():
            value = measure.value(t, x)
            for atom, v in zip(ctx.experiment.tree.atom_ids(t), value.values):
                rows.append(ValueRow(process=name, time=t, atom=atom, value=float(v)))
    return rows


def _oracle_rows(ctx: RunContext) -> list[OracleRow]:
    exp = ctx.experiment
    grid = GridSpec.from_settings()
    rows = []
    for x in ctx.processes().values():
        for t in ctx.times():
            kind, rho = exp.uset.at(t + 1), exp.family.at(t)
            result = sandwich(kind, rho, exp.tree, x, t, grid)
            within = result.within()
            for k, atom in enumerate(result.atoms):
                rows.append(
                    OracleRow(
                        set=describe_set(kind),
                        risk=describe_risk(rho),
                        time=t,
                        atom=atom,
                        production=float(result.production[k]),
                        oracle=float(result.oracle[k]),
                        bound=float(result.bound[k]),
                        holds=bool(within[k]),
                    )
                )
    return rows


def _evaluate(ctx: RunContext) -> Report:
    oracle = _oracle_rows(ctx) if ctx.oracle else []
    return Report(
        command="evaluate", values=_value_rows(ctx), oracle=oracle, passed=outcome(oracle=oracle)
    )


def _accept(ctx: RunContext) -> Report:
    measure = ctx.experiment.measure()
    notes, accepted = [], True
    for name, x in ctx.processes().items():
        for t in ctx.times():
            event = robust_accepts(measure, t, x)
            rejected = event.complement().ids()
            accepted = accepted and not rejected
            notes.append(f"{name} t={t}: accepted {event.ids()} rejected {rejected}")
    return Report(command="accept", values=_value_rows(ctx), notes=notes, passed=accepted)


def _check(ctx: RunContext) -> Report:
    exp, spec = ctx.experiment, CheckSpec.from_settings()
    measure = exp.measure()
    verdicts = []
    for check in ctx.doc.checks or DEFAULT_CHECKS:
        scope, _, prop = check.partition(".")
        if scope == "set" and prop in SET_PROPERTIES:
            verdicts.append(check_set_property(measure.uset, exp.tree, prop, spec))
        elif scope == "measure" and prop in MEASURE_PROPERTIES:
            verdicts.append(check_measure_property(measure, prop, spec))
        else:
            raise UsageError(f"unknown check {check!r}")
    return Report(command="check", verdicts=verdicts, passed=outcome(verdicts=verdicts))


def _check_tc(ctx: RunContext) -> Report:
    level = ctx.doc.level
    default = [n for n in NOTIONS if level != "measure" or n != "prudent"]
    notions = ctx.doc.notions or default
    unknown = sorted(set(notions) - set(NOTIONS))
    if unknown:
        raise UsageError(f"unknown notions {unknown}")
    measure, spec = ctx.experiment.measure(), CheckSpec.from_settings()
    verdicts = [check_time_consistency(measure, n, spec, level=level) for n in notions]
    return Report(command="check-tc", verdicts=verdicts, passed=outcome(verdicts=verdicts))


def _samples(ctx: RunContext, tree: ScenarioTree, seed: int) -> list[AdaptedProcess]:
    drawn = [random_process(trial_rng(seed, k), tree) for k in range(CONSTRUCT_SAMPLES)]
    return [*ctx.experiment.processes.values(), *drawn]


def _construct(ctx: RunContext) -> Report:
    exp, spec = ctx.experiment, CheckSpec.from_settings()
    if not exp.uset.is_static():
        raise UsageError("construct needs static base sets")
    measure = construct_recursive(exp.uset, exp.family, exp.tree)
    samples = _samples(ctx, exp.tree, spec.seed)
    agreement = max(
        measure.value(t, x).max_abs_gap(
            nested_robust_evaluate(exp.uset, exp.family, exp.tree, x, t)
        )
        for x in samples
        for t in range(exp.horizon)
    )
    verdicts = [
        check_time_consistency(measure, "strong", spec),
        check_time_consistency(measure, "weak_recursive", spec),
    ]
    notes = [f"recursion identity: max gap {agreement:.3g} over {len(samples)} processes"]
    if verdicts[1].corroborated:
        representation = static_representation(measure, verdicts[1])
        gap = round_trip_gap(measure, representation, samples[:ROUND_TRIP_SAMPLES])
        notes.append(f"static representation round trip: max gap {gap:.3g}")
    passed = agreement <= ctx.doc.settings.tolerance and outcome(verdicts=verdicts)
    return Report(command="construct", verdicts=verdicts, notes=notes, passed=passed)


def _audit(ctx: RunContext) -> Report:
    table = gather_verdicts(ctx.experiment.measure(), CheckSpec.from_settings())
    violations = audit_implications(table)
    verdicts = [table[key] for key in sorted(table)]
    return Report(
        command="audit", verdicts=verdicts, violations=violations, passed=not violations
    )


def _table1(ctx: RunContext) -> Report:
    rows = property_table(ctx.experiment.tree, CheckSpec.from_settings())
    return Report(
        command="table1", columns=list(TABLE_COLUMNS), table=rows, passed=outcome(table=rows)
    )


def _oracle_compare(ctx: RunContext) -> Report:
    if not ctx.oracle:
        raise UsageError("oracle-compare runs the brute-force oracles only with --oracle")
    rows = _oracle_rows(ctx)
    return Report(command="oracle-compare", oracle=rows, passed=outcome(oracle=rows))


HANDLERS: dict[str, Callable[[RunContext], Report]] = {
    "evaluate": _evaluate,
    "accept": _accept,
    "check": _check,
    "check-tc": _check_tc,
    "construct": _construct,
    "audit": _audit,
    "table1": _table1,
    "oracle-compare": _oracle_compare,
}


def run(
    command: str, doc: ExperimentDoc, *, oracle: bool = False, time: int | None = None
) -> Report:
    """Run one command against a document under the document's settings."""
    handler = HANDLERS.get(command)
    if handler is None:
        raise UsageError(f"unknown command {command!r}")
    with use_settings(doc.settings):
        return handler(RunContext(build_experiment(doc), oracle=oracle, time=time))


# ------------------------------
# Entry point
# ------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynrisk", description="Dynamic robust risk measures on scenario trees."
    )
    parser.add_argument("command", choices=sorted(HANDLERS))
    parser.add_argument("--input", type=Path, help="experiment document (JSON, schema 1)")
    parser.add_argument("--time", type=int, help="evaluate at this time only")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--oracle", action="store_true", help="compare against grid oracles")
    parser.add_argument("--output", choices=("text", "json"), default="text")
    parser.add_argument("--verbose", action="store_true")
    return parser


def _with_flags(doc: ExperimentDoc, args: argparse.Namespace) -> ExperimentDoc:
    flags = {"seed": args.seed, "trials": args.trials, "tolerance": args.tol}
    overrides = {key: value for key, value in flags.items() if value is not None}
    if not overrides:
        return doc
    settings = Settings.model_validate({**doc.settings.model_dump(), **overrides})
    return doc.model_copy(update={"settings": settings})


def _load(args: argparse.Namespace) -> ExperimentDoc:
    if args.input is None:
        if args.command != "table1":
            raise UsageError(f"{args.command} needs --input")
        return _with_flags(default_document(), args)
    return _with_flags(parse_experiment(args.input.read_bytes()), args)


def _report_errors(exc: ValidationError) -> None:
    for error in exc.errors():
        loc = ".".join(str(part) for part in error["loc"]) or "<document>"
        print(f"dynrisk: {loc}: {error['msg']}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        doc = _load(args)
        report = run(args.command, doc, oracle=args.oracle, time=args.time)
    except ValidationError as exc:
        _report_errors(exc)
        return 2
    except (UsageError, OracleCapError, OSError, ValueError) as exc:
        print(f"dynrisk: {exc}", file=sys.stderr)
        return 2
    with use_settings(doc.settings):
        text = render_json(report) if args.output == "json" else render_text(report)
    sys.stdout.write(text)
    return report.exit_code
