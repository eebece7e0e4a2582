#!/usr/bin/env python3
"""Package hygiene for `dynrisk/` and `tests/`.

Rules:
- PKG001  a Python file exceeds `[tool.lint] max-file-lines` (default 500)
- PKG002  a `__pycache__` directory sits under `dynrisk/`
- PKG003  an empty (or cache-only) directory sits under `dynrisk/`
- PKG004  `dynrisk/py.typed` is missing
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ImportError:
    import tomli as tomllib  # type: ignore[no-redef]  # Py<3.11 fallback

PACKAGE = Path("dynrisk")
LENGTH_ROOTS = (PACKAGE, Path("tests"), Path("scripts"))
MAX_LINES = 500


@dataclass(frozen=True)
class Violation:
    path: Path
    code: str
    message: str


def max_lines() -> int:
    pyproject = Path("pyproject.toml")
    if not pyproject.exists():
        return MAX_LINES
    config = tomllib.loads(pyproject.read_text())
    return int(config.get("tool", {}).get("lint", {}).get("max-file-lines", MAX_LINES))


def _python_files(roots: tuple[Path, ...]) -> list[Path]:
    return sorted(
        path
        for root in roots
        if root.is_dir()
        for path in root.rglob("*.py")
        if "__pycache__" not in path.parts
    )


def check_lengths(
    roots: tuple[Path, ...] = LENGTH_ROOTS, limit: int | None = None
) -> list[Violation]:
    cap = limit if limit is not None else max_lines()
    violations = []
    for path in _python_files(roots):
        count = len(path.read_text(encoding="utf-8").splitlines())
        if count > cap:
            violations.append(Violation(path, "PKG001", f"{count} lines (+{count - cap})"))
    return violations


def check_tree(root: Path = PACKAGE) -> list[Violation]:
    if not root.is_dir():
        return [Violation(root, "PKG000", "package directory not found")]
    violations = []
    for directory in sorted(p for p in root.rglob("*") if p.is_dir()):
        if directory.name == "__pycache__":
            violations.append(Violation(directory, "PKG002", "remove __pycache__ directory"))
        elif not any(child.name != "__pycache__" for child in directory.iterdir()):
            violations.append(Violation(directory, "PKG003", "remove empty directory"))
    if not (root / "py.typed").exists():
        violations.append(Violation(root / "py.typed", "PKG004", "typing marker missing"))
    return violations


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--max-lines", type=int, default=None)
    args = parser.parse_args(argv)

    violations = [*check_lengths(limit=args.max_lines), *check_tree()]
    if not violations:
        print("pkglint: all checks passed")
        return 0
    for violation in violations:
        print(f"  {violation.path}  {violation.code}  {violation.message}")
    print(f"\npkglint: {len(violations)} violation(s) found")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
