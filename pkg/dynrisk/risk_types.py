"""Shared type definitions: risk kinds, tolerance rules, set variants, settings, verdicts."""

from __future__ import annotations

import contextvars
import math
from collections.abc import Iterator
from contextlib import contextmanager
from typing import Annotated, Literal, TypeAlias, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# ------------------------------
# Errors
# ------------------------------


class TreeStructureError(ValueError):
    """Scenario tree or adapted object violates a structural invariant."""


class AbsoluteContinuityError(ValueError):
    """A measure in a family puts zero mass where the base measure does not."""


class OracleCapError(RuntimeError):
    """Brute-force oracle refused because the grid would be too large."""


class RepresentationError(RuntimeError):
    """Static representation requested for a measure that is not weakly recursive."""


class IncompleteVerdictTableError(ValueError):
    """Implication audit requested without the verdicts it needs."""


ABSOLUTE_CONTINUITY_DIAGNOSTIC = "measure not absolutely continuous w.r.t. base"


class _RiskBaseModel(BaseModel):
    """Shared model configuration for immutable specification models."""

    model_config = ConfigDict(frozen=True, extra="forbid", ser_json_inf_nan="constants")


# ------------------------------
# Settings knob
# ------------------------------


class Settings(_RiskBaseModel):
    """Numeric and sampling configuration shared by every evaluator and checker."""

    tolerance: float = Field(default=1e-9, ge=0.0)
    seed: int = 0
    trials: int = Field(default=500, ge=1)
    membership_samples: int = Field(default=500, ge=1)
    boundary_fraction: float = Field(default=0.2, ge=0.0, le=1.0)
    value_box: tuple[float, float] = (-1.0, 1.0)
    value_decimals: int = Field(default=6, ge=0)
    multi_starts: int = Field(default=8, ge=1)
    max_permutation_children: int = Field(default=5, ge=1)
    grid_points: int = Field(default=41, ge=2)
    grid_cap: int = Field(default=10_000_000, ge=1)

    @field_validator("value_box")
    @classmethod
    def _box_is_ordered(cls, value: tuple[float, float]) -> tuple[float, float]:
        low, high = value
        if not low < high:
            raise ValueError("value_box: lower bound must be below upper bound")
        return value


_ACTIVE_SETTINGS: contextvars.ContextVar[Settings] = contextvars.ContextVar(
    "dynrisk_settings", default=Settings()
)


def current_settings() -> Settings:
    """Return the settings active in this context."""
    return _ACTIVE_SETTINGS.get()


def current_tolerance() -> float:
    return _ACTIVE_SETTINGS.get().tolerance


@contextmanager
def use_settings(settings: Settings | None = None, **overrides: object) -> Iterator[Settings]:
    """Scope a settings override; keyword overrides are applied on top of `settings`."""
    base = settings if settings is not None else _ACTIVE_SETTINGS.get()
    scoped = base.model_copy(update=overrides) if overrides else base
    token = _ACTIVE_SETTINGS.set(Settings.model_validate(scoped.model_dump()))
    try:
        yield _ACTIVE_SETTINGS.get()
    finally:
        _ACTIVE_SETTINGS.reset(token)


# ------------------------------
# One-step risk kinds
# ------------------------------


class Expectation(_RiskBaseModel):
    type: Literal["expectation"] = "expectation"


class CVaR(_RiskBaseModel):
    type: Literal["cvar"] = "cvar"
    alpha: float = Field(ge=0.0, lt=1.0)


class Entropic(_RiskBaseModel):
    type: Literal["entropic"] = "entropic"
    beta: float = Field(gt=0.0)


class WorstCase(_RiskBaseModel):
    type: Literal["worst_case"] = "worst_case"


RiskKind: TypeAlias = Annotated[
    Union[Expectation, CVaR, Entropic, WorstCase], Field(discriminator="type")
]

# Positively homogeneous gauges used to compare uncertainty sets.
GAUGE_PANEL: tuple[Expectation | CVaR | WorstCase, ...] = (
    Expectation(),
    CVaR(alpha=0.5),
    CVaR(alpha=0.9),
    WorstCase(),
)


def describe_risk(kind: RiskKind) -> str:
    if isinstance(kind, CVaR):
        return f"CVaR_{kind.alpha:g}"
    if isinstance(kind, Entropic):
        return f"Entropic_{kind.beta:g}"
    if isinstance(kind, WorstCase):
        return "WorstCase"
    return "Expectation"


class RiskFamily(_RiskBaseModel):
    """One-step risk kind per evaluation time t in {0..T-1}."""

    kinds: tuple[RiskKind, ...] = Field(min_length=1)

    @classmethod
    def uniform(cls, kind: RiskKind, horizon: int) -> RiskFamily:
        if horizon < 1:
            raise ValueError(f"RiskFamily.uniform: horizon must be >= 1, got {horizon}")
        return cls(kinds=tuple(kind for _ in range(horizon)))

    @property
    def horizon(self) -> int:
        return len(self.kinds)

    def at(self, t: int) -> RiskKind:
        if not 0 <= t < len(self.kinds):
            raise IndexError(f"RiskFamily.at: time {t} outside 0..{len(self.kinds) - 1}")
        return self.kinds[t]


# ------------------------------
# Tolerance rules
# ------------------------------


class ConstantRule(_RiskBaseModel):
    type: Literal["constant"] = "constant"
    eps: float = Field(ge=0.0)


class HorizonRule(_RiskBaseModel):
    type: Literal["horizon"] = "horizon"
    eps: float = Field(ge=0.0)


class VarScaledRule(_RiskBaseModel):
    type: Literal["var_scaled"] = "var_scaled"
    eps: float = Field(ge=0.0)


class ProportionalRule(_RiskBaseModel):
    type: Literal["proportional"] = "proportional"
    eps: float = Field(ge=0.0)


class ZeroRule(_RiskBaseModel):
    type: Literal["zero"] = "zero"


ToleranceRule: TypeAlias = Annotated[
    Union[ConstantRule, HorizonRule, VarScaledRule, ProportionalRule, ZeroRule],
    Field(discriminator="type"),
]


# ------------------------------
# Analytic uncertainty set variants
# ------------------------------


class IdentitySet(_RiskBaseModel):
    type: Literal["identity"] = "identity"


class SupNormBall(_RiskBaseModel):
    type: Literal["sup_norm"] = "sup_norm"
    rule: ToleranceRule


class WassersteinBall(_RiskBaseModel):
    type: Literal["wasserstein"] = "wasserstein"
    order: float = Field(default=1.0, ge=1.0)
    rule: ToleranceRule


class KLBall(_RiskBaseModel):
    type: Literal["kl"] = "kl"
    rule: ToleranceRule


class FamilyMeasure(_RiskBaseModel):
    """Density per terminal atom (normalised against the base) and a penalty."""

    density: dict[str, float] = Field(min_length=1)
    penalty: float = Field(default=0.0, ge=0.0)

    @field_validator("density")
    @classmethod
    def _density_is_positive(cls, value: dict[str, float]) -> dict[str, float]:
        for atom_id, weight in sorted(value.items()):
            if not weight > 0.0:
                raise AbsoluteContinuityError(
                    f"{ABSOLUTE_CONTINUITY_DIAGNOSTIC}: density {weight!r} at atom {atom_id!r}"
                )
        return value


class MeasureFamily(_RiskBaseModel):
    type: Literal["measure_family"] = "measure_family"
    measures: tuple[FamilyMeasure, ...] = Field(min_length=1)


class SumHalfspace(_RiskBaseModel):
    """Candidates dominated by X_t + E[sum of later X | F_t] + offset of the parent atom."""

    type: Literal["sum_halfspace"] = "sum_halfspace"
    offsets: dict[str, float] = Field(default_factory=dict)


AnalyticSetKind: TypeAlias = Annotated[
    Union[IdentitySet, SupNormBall, WassersteinBall, KLBall, MeasureFamily, SumHalfspace],
    Field(discriminator="type"),
]

STATIC_ANALYTIC_TYPES = frozenset({"identity", "sup_norm", "wasserstein", "kl", "measure_family"})


# ------------------------------
# Verdicts
# ------------------------------

VerdictStatus: TypeAlias = Literal["corroborated", "counterexample", "vacuous"]


class Witness(_RiskBaseModel):
    """Replayable description of a violation; processes are per-time value lists."""

    time: int
    horizon: int | None = None
    atom: str | None = None
    gap: float
    processes: dict[str, list[list[float]]] = Field(default_factory=dict)
    event: list[str] | None = None
    scale: list[float] | None = None
    trial: int | None = None
    detail: str = ""


class Verdict(_RiskBaseModel):
    check: str
    status: VerdictStatus
    trials: int = Field(ge=0)
    witness: Witness | None = None

    @model_validator(mode="after")
    def _witness_matches_status(self) -> Verdict:
        if self.status == "counterexample" and self.witness is None:
            raise ValueError(f"Verdict {self.check}: counterexample requires a witness")
        return self

    @property
    def corroborated(self) -> bool:
        return self.status != "counterexample"


class CheckSpec(_RiskBaseModel):
    """Sampling plan of one randomized check; `mutant` is a test-only fault injector."""

    trials: int = Field(default=500, ge=1)
    seed: int = 0
    value_box: tuple[float, float] = (-1.0, 1.0)
    scale_upper: float = Field(default=2.0, gt=0.0, allow_inf_nan=False)
    event_density: float = Field(default=0.5, gt=0.0, lt=1.0)
    mutant: bool = False

    @field_validator("value_box")
    @classmethod
    def _box_is_finite(cls, value: tuple[float, float]) -> tuple[float, float]:
        low, high = value
        if not (math.isfinite(low) and math.isfinite(high) and low < high):
            raise ValueError("value_box: needs finite bounds with lower < upper")
        return value

    @classmethod
    def from_settings(cls, **overrides: object) -> CheckSpec:
        """Spec seeded from the active settings; keyword overrides win."""
        settings = current_settings()
        values: dict[str, object] = {
            "trials": settings.trials,
            "seed": settings.seed,
            "value_box": settings.value_box,
        }
        values.update(overrides)
        return cls.model_validate(values)
