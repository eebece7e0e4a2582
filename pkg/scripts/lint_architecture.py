#!/usr/bin/env python3
"""Boundary rules for the dynrisk package that ruff and mypy do not cover.

ARCH001  no environment reads under the package; numeric settings travel
         through `Settings` and the experiment document
ARCH002  console output only from the command-line surface
ARCH003  `__init__.py` re-exports core modules only
ARCH004  no hand-rolled stand-ins for numpy/scipy routines
ARCH005  random generators are created in `sampling.py` only, so every draw
         of a check comes from `trial_rng(seed, index)`

Settings are read from `[tool.archlint]` in pyproject.toml.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ImportError:
    import tomli as tomllib  # type: ignore[no-redef]  # Py<3.11 fallback

_DEFAULTS: dict[str, object] = {
    "library_root": "dynrisk",
    "core_modules": ["risk_types", "tree", "space", "riskmeasures", "uncertainty", "robust"],
    "surface_modules": ["cli.py", "__main__.py"],
    "nih_filenames": ["compat.py"],
    "rng_module": "sampling.py",
}

_SKIP_DIRS = {".git", ".venv", "__pycache__", ".mypy_cache", ".ruff_cache", "examples"}


@dataclass(frozen=True)
class Finding:
    path: str
    line: int
    rule: str
    message: str

    def render(self) -> str:
        where = f"{self.path}:{self.line}" if self.line else self.path
        return f"  {where}  {self.rule}  {self.message}"


@dataclass(frozen=True)
class LineRule:
    rule: str
    pattern: re.Pattern[str]
    message: str
    exempt: str  # config key naming the files the rule skips, or ""


_LINE_RULES = (
    LineRule("ARCH001", re.compile(r"\bos\.(environ|getenv)\b"), "reads the environment", ""),
    LineRule(
        "ARCH001",
        re.compile(r"from\s+os\s+import\s+.*\b(environ|getenv)\b"),
        "imports os.environ",
        "",
    ),
    LineRule("ARCH002", re.compile(r"^print\s*\("), "prints instead of logging", "surface"),
    LineRule(
        "ARCH002", re.compile(r"\bsys\.(stdout|stderr)\b"), "writes to the console", "surface"
    ),
    LineRule(
        "ARCH005",
        re.compile(r"\b(default_rng|RandomState|SeedSequence)\s*\(|np\.random\.seed\b"),
        "creates a generator outside the sampling module",
        "rng",
    ),
    LineRule("ARCH005", re.compile(r"^import\s+random\b"), "uses the stdlib random module", "rng"),
)

_INIT_IMPORT = re.compile(r"from\s+\.(\w+)\s+import")


def load_config(root: Path) -> dict[str, object]:
    pyproject = root / "pyproject.toml"
    if not pyproject.exists():
        return dict(_DEFAULTS)
    data = tomllib.loads(pyproject.read_text(encoding="utf-8"))
    return {**_DEFAULTS, **data.get("tool", {}).get("archlint", {})}


def _exempt(rule: LineRule, name: str, cfg: dict[str, object]) -> bool:
    if rule.exempt == "surface":
        return name in cfg["surface_modules"]  # type: ignore[operator]
    if rule.exempt == "rng":
        return name == cfg["rng_module"]
    return False


def lint_module(rel: Path, source: str, cfg: dict[str, object]) -> list[Finding]:
    """Findings for one file under the library root."""
    findings: list[Finding] = []
    rules = [rule for rule in _LINE_RULES if not _exempt(rule, rel.name, cfg)]
    core = cfg["core_modules"]
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        findings.extend(
            Finding(str(rel), lineno, rule.rule, f"library code {rule.message}")
            for rule in rules
            if rule.pattern.search(line)
        )
        match = _INIT_IMPORT.match(line) if rel.name == "__init__.py" else None
        if match and match.group(1) not in core:  # type: ignore[operator]
            findings.append(
                Finding(
                    str(rel),
                    lineno,
                    "ARCH003",
                    f"re-exports non-core module '.{match.group(1)}'; "
                    "callers import it directly",
                )
            )
    if rel.name in cfg["nih_filenames"]:  # type: ignore[operator]
        findings.append(
            Finding(str(rel), 0, "ARCH004", "hand-rolled module; use numpy/scipy instead")
        )
    return findings


def check(root: Path) -> list[Finding]:
    cfg = load_config(root)
    library = root / str(cfg["library_root"])
    findings: list[Finding] = []
    for path in sorted(library.rglob("*.py")):
        if _SKIP_DIRS.intersection(path.parts):
            continue
        try:
            source = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError):
            continue
        findings.extend(lint_module(path.relative_to(root), source, cfg))
    return findings


def main() -> int:
    findings = check(Path.cwd())
    for finding in findings:
        print(finding.render())
    if findings:
        print(f"\narchlint: {len(findings)} finding(s)")
        return 1
    print("archlint: clean")
    return 0


if __name__ == "__main__":
    sys.exit(main())
