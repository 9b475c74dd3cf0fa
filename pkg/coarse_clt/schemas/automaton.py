from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

MatrixEntry = Union[int, float, str]


class GroupSpec(BaseModel):
    """Evaluation context of an automaton: the group its labels live in."""

    kind: Literal["free", "raag", "racg", "matrix", "opaque"] = Field(
        ..., description="Kind of group the edge labels evaluate into"
    )
    generators: Optional[List[str]] = Field(
        default=None, description="Ordered generator names (lower case)"
    )
    commutations: Optional[List[List[str]]] = Field(
        default=None, description="Pairs of commuting generators (raag/racg)"
    )
    matrices: Optional[Dict[str, List[List[MatrixEntry]]]] = Field(
        default=None,
        description="Row-major 2x2 images of the generators, rational or decimal",
    )
    letters: Optional[List[str]] = Field(
        default=None, description="Letters of an opaque alphabet"
    )

    model_config = ConfigDict(extra="forbid")


class EdgeSpec(BaseModel):
    """Model for one labeled edge of an automaton document."""

    source: int = Field(..., alias="from", description="Source vertex index")
    target: int = Field(..., alias="to", description="Target vertex index")
    label: str = Field(
        ..., description="Letter, or space separated letters for product labels"
    )

    model_config = ConfigDict(populate_by_name=True, extra="forbid")


class AutomatonDocument(BaseModel):
    """Model for the automaton file format."""

    vertices: int = Field(..., ge=1, description="Number of vertices")
    initial: int = Field(..., description="Index of the initial vertex")
    group: GroupSpec = Field(..., description="Group the labels evaluate into")
    edges: List[EdgeSpec] = Field(default_factory=list, description="Edge list")
    name: Optional[str] = Field(default=None, description="Optional display name")

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "vertices": 2,
                "initial": 0,
                "group": {"kind": "opaque", "letters": ["x", "y", "z"]},
                "edges": [
                    {"from": 0, "to": 0, "label": "x"},
                    {"from": 0, "to": 1, "label": "y"},
                    {"from": 1, "to": 0, "label": "z"},
                ],
            }
        },
    )
