"""Architecture boundary tests -- dependency layer lock.

Uses grimp to enforce a strict layered architecture where imports only flow
downward. If a test here fails, someone added an import that violates the
layer map.

Layer map (top to bottom -- higher may import lower, never reverse):

    Layer 9: cli, __main__                              (command surface)
    Layer 8: experiment, reports                        (documents, rendering)
    Layer 7: lattice, adversarial                       (audits)
    Layer 6: consistency                                (time-consistency notions)
    Layer 5: properties, oracle                         (property checks, brute force)
    Layer 4: recursive, checking                        (construction, trial loop)
    Layer 3: robust                                     (robust measures)
    Layer 2: uncertainty > balls > transport >
             distances > riskmeasures, sampling         (sets and one-step risk)
    Layer 1: space > tree                               (scenario trees)
    Layer 0: risk_types                                 (foundation)

Sibling modules within the same layer are independent (cannot import each
other) unless there is an explicit reason to allow it.

__init__.py is excluded (grimp's container mechanism handles this).
"""

from __future__ import annotations

import grimp
import pytest

PKG = "dynrisk"

# Layers from highest to lowest (grimp convention).
# independent=True means siblings within a layer cannot import each other.
LAYERS = [
    grimp.Layer("__main__"),
    grimp.Layer("cli"),
    grimp.Layer("experiment", "reports", independent=True),
    grimp.Layer("lattice", "adversarial", independent=True),
    grimp.Layer("consistency"),
    grimp.Layer("properties", "oracle", independent=True),
    grimp.Layer("recursive", "checking", independent=True),
    grimp.Layer("robust"),
    grimp.Layer("uncertainty"),
    grimp.Layer("balls"),
    grimp.Layer("transport"),
    grimp.Layer("distances"),
    grimp.Layer("riskmeasures", "sampling", independent=True),
    grimp.Layer("space"),
    grimp.Layer("tree"),
    grimp.Layer("risk_types"),
]

# Every module that should be governed by the layer map.
GOVERNED_MODULES = {
    f"{PKG}.{name}"
    for name in (
        "__main__",
        "cli",
        "experiment",
        "reports",
        "lattice",
        "adversarial",
        "consistency",
        "properties",
        "oracle",
        "recursive",
        "checking",
        "robust",
        "uncertainty",
        "balls",
        "transport",
        "distances",
        "riskmeasures",
        "sampling",
        "space",
        "tree",
        "risk_types",
    )
}


@pytest.fixture(scope="module")
def graph() -> grimp.ImportGraph:
    return grimp.build_graph(PKG)


class TestLayerBoundaries:
    """No module may import from a higher layer or from a sibling."""

    def test_no_illegal_dependencies(self, graph: grimp.ImportGraph) -> None:
        violations = graph.find_illegal_dependencies_for_layers(LAYERS, containers={PKG})
        if violations:
            lines = [str(v) for v in sorted(violations, key=str)]
            pytest.fail("Layer violations found:\n" + "\n".join(lines))


class TestFoundationIsLeaf:
    """risk_types must not import any other dynrisk module."""

    def test_risk_types_has_no_internal_imports(self, graph: grimp.ImportGraph) -> None:
        others = GOVERNED_MODULES - {f"{PKG}.risk_types"}
        for dep in sorted(others):
            chain = graph.find_shortest_chain(imported=dep, importer=f"{PKG}.risk_types")
            assert chain is None, (
                f"risk_types must be a leaf, but it imports {dep} via: {' -> '.join(chain)}"
            )


class TestCoreStaysOffTheSurface:
    """Nothing below the command surface may reach the CLI or report rendering."""

    @pytest.mark.parametrize("surface", ["cli", "reports"])
    def test_library_does_not_import_surface(
        self, graph: grimp.ImportGraph, surface: str
    ) -> None:
        importers = graph.find_modules_that_directly_import(f"{PKG}.{surface}")
        allowed = {f"{PKG}.cli", f"{PKG}.__main__"}
        assert importers <= allowed, f"{surface} imported from {sorted(importers - allowed)}"


class TestAllModulesGoverned:
    """Every non-package module must appear in the layer map.

    Catches new modules added without a layer assignment.
    """

    def test_no_ungoverned_modules(self, graph: grimp.ImportGraph) -> None:
        ungoverned = graph.modules - GOVERNED_MODULES - {PKG}
        assert not ungoverned, (
            f"Module(s) found without a layer assignment: {sorted(ungoverned)}. "
            f"Add them to LAYERS and GOVERNED_MODULES in {__file__}"
        )
