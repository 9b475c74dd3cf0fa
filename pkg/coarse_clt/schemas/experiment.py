from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from coarse_clt.schemas.automaton import AutomatonDocument

Observable = Literal["displacement", "translation"]


class ActionSpec(BaseModel):
    """Model for the action part of an experiment config."""

    kind: str = Field(
        ...,
        description=(
            "cayley-tree, hyperplane-count, matrix-H2, homomorphism-word-metric "
            "or word-length"
        ),
    )
    params: Dict[str, Any] = Field(
        default_factory=dict, description="Kind specific parameters"
    )

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {"kind": "hyperplane-count", "params": {"letter": "a"}}
        },
    )


class ExperimentConfig(BaseModel):
    """Model for a CLT experiment config file."""

    automaton: Union[str, AutomatonDocument] = Field(
        ..., description="Path to an automaton document (relative to the config) or the document itself"
    )
    action: ActionSpec = Field(..., description="Isometric action to evaluate")
    n: Union[int, List[int]] = Field(..., description="Sphere radius or list of radii")
    samples: int = Field(default=10_000, ge=1, description="Monte Carlo sample count per radius")
    seed: Optional[int] = Field(
        default=None, description="Master seed; the command line seed takes precedence"
    )
    mode: Literal["mc", "exact"] = Field(
        default="mc", description="Monte Carlo sampling or exhaustive enumeration"
    )
    observables: List[Observable] = Field(
        default_factory=lambda: ["displacement"],
        description="Observables to collect",
    )
    per_component: bool = Field(
        default=False, description="Rerun on every maximal component and compare"
    )
    probe_maxlen: Optional[int] = Field(
        default=None, ge=3, description="Length bound for the zero-variance probe"
    )

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "automaton": "f2.json",
                "action": {"kind": "hyperplane-count", "params": {"letter": "a"}},
                "n": 2000,
                "samples": 100000,
                "seed": 1,
                "mode": "mc",
                "observables": ["displacement", "translation"],
                "per_component": False,
            }
        },
    )

    @field_validator("n")
    @classmethod
    def check_lengths(cls, value: Union[int, List[int]]) -> Union[int, List[int]]:
        lengths = value if isinstance(value, list) else [value]
        if not lengths:
            raise ValueError("at least one length is required")
        if any(n < 2 for n in lengths):
            raise ValueError("lengths must be at least 2")
        return value

    @field_validator("observables")
    @classmethod
    def check_observables(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one observable is required")
        return list(dict.fromkeys(value))

    @property
    def lengths(self) -> List[int]:
        return self.n if isinstance(self.n, list) else [self.n]
