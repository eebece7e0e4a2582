"""Small builders shared by several test modules."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numpy as np

from dynrisk.experiment import Experiment, ExperimentDoc, build_experiment, parse_experiment
from dynrisk.sampling import random_process, trial_rng
from dynrisk.space import AdaptedProcess, ScenarioTree

FIXTURES = Path(__file__).resolve().parents[1] / "docs" / "fixtures"
FIXTURE_NAMES = sorted(path.stem for path in FIXTURES.glob("*.json"))


def process(tree: ScenarioTree, *levels: Sequence[float]) -> AdaptedProcess:
    """AdaptedProcess from per-time value lists in atom-id order."""
    return AdaptedProcess.from_values(tree, [np.asarray(v, dtype=float) for v in levels])


def processes(tree: ScenarioTree, count: int, seed: int = 0) -> list[AdaptedProcess]:
    """`count` reproducible random processes with values in the configured box."""
    return [random_process(trial_rng(seed, k), tree) for k in range(count)]


def fixture_doc(name: str) -> ExperimentDoc:
    return parse_experiment((FIXTURES / f"{name}.json").read_bytes())


def fixture(name: str) -> Experiment:
    """A shipped experiment document, built."""
    return build_experiment(fixture_doc(name))
