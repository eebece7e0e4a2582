"""Shared trees and helpers for the dynrisk test suite."""

from __future__ import annotations

import pytest

from dynrisk.space import ScenarioTree
from dynrisk.tree import Atom


@pytest.fixture
def binary_tree() -> ScenarioTree:
    """Two equally likely children per atom, T = 2."""
    return ScenarioTree.regular(2, 2)


@pytest.fixture
def skewed_tree() -> ScenarioTree:
    """Three children with probabilities 0.2 / 0.3 / 0.5, T = 2."""
    return ScenarioTree.regular(3, 2, probs=[0.2, 0.3, 0.5])


@pytest.fixture
def uneven_tree() -> ScenarioTree:
    """Root with two children; one has a single child, the other three, T = 2."""
    return ScenarioTree(
        [
            Atom("r", 0, None, 1.0),
            Atom("a", 1, "r", 0.4),
            Atom("b", 1, "r", 0.6),
            Atom("a0", 2, "a", 1.0),
            Atom("b0", 2, "b", 0.25),
            Atom("b1", 2, "b", 0.25),
            Atom("b2", 2, "b", 0.5),
        ]
    )
