import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import orjson
from pydantic import ValidationError

from coarse_clt.core.graph import Edge, GraphStructure
from coarse_clt.core.groups import build_group
from coarse_clt.exceptions import AutomatonFormatException, GroupException
from coarse_clt.schemas.automaton import AutomatonDocument, EdgeSpec
from coarse_clt.utils.serialization import dumps

logger = logging.getLogger(__name__)

DocumentSource = Union[str, Path, bytes, Dict[str, Any], AutomatonDocument]


def _read_document(source: DocumentSource) -> AutomatonDocument:
    if isinstance(source, AutomatonDocument):
        return source
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            source = path.read_bytes()
        except OSError as e:
            raise AutomatonFormatException(f"cannot read automaton {path}: {e}")
    if isinstance(source, bytes):
        try:
            source = orjson.loads(source)
        except orjson.JSONDecodeError as e:
            raise AutomatonFormatException(f"malformed document: {e}")
    try:
        return AutomatonDocument.model_validate(source)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise AutomatonFormatException(f"malformed document at '{location}': {first['msg']}")


def load_graph_structure(source: DocumentSource) -> GraphStructure:
    """Parse an automaton document (path, bytes, dict or model) into a structure."""
    doc = _read_document(source)
    try:
        group = build_group(doc.group)
    except GroupException as e:
        raise AutomatonFormatException(f"invalid group: {e.detail}")
    if not 0 <= doc.initial < doc.vertices:
        raise AutomatonFormatException(f"dangling vertex {doc.initial} used as initial vertex")
    edges: List[Edge] = []
    for i, spec in enumerate(doc.edges):
        for v in (spec.source, spec.target):
            if not 0 <= v < doc.vertices:
                raise AutomatonFormatException(
                    f"dangling vertex {v} in edge {i} ({doc.vertices} vertices)"
                )
        label = tuple(spec.label.split())
        if not label:
            raise AutomatonFormatException(f"empty label in edge {i}")
        for letter in label:
            if letter not in group.letter_index:
                raise AutomatonFormatException(f"unknown label '{letter}' in edge {i}")
        edges.append(Edge(i, spec.source, spec.target, label))
    logger.debug(f"loaded automaton: {doc.vertices} vertices, {len(edges)} edges")
    return GraphStructure(doc.vertices, doc.initial, tuple(edges), group, doc.name)


def dump_graph_structure(structure: GraphStructure) -> AutomatonDocument:
    return AutomatonDocument(
        vertices=structure.num_vertices,
        initial=structure.initial_vertex,
        group=structure.group.to_spec(),
        edges=[
            EdgeSpec(source=e.source, target=e.target, label=" ".join(e.label))
            for e in structure.edges
        ],
        name=structure.name,
    )


def graph_structure_bytes(structure: GraphStructure) -> bytes:
    return dumps(dump_graph_structure(structure), rounded=False)


def save_graph_structure(structure: GraphStructure, path: Union[str, Path]) -> Path:
    target = Path(path)
    target.write_bytes(graph_structure_bytes(structure))
    logger.info(f"wrote automaton to {target}")
    return target
