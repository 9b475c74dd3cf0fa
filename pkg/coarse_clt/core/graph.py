"""Graph structures (Γ, v₀, ev): labeled digraphs with an initial vertex.

Counts are exact Python integers; growth makes fixed width integers overflow
long before the lengths the sampler works with.
"""

import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from math import gcd
from typing import FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from coarse_clt.config import settings
from coarse_clt.core.groups import Group, Word
from coarse_clt.exceptions import (
    AutomatonFormatException,
    BudgetExceededException,
    GraphStructureException,
)

logger = logging.getLogger(__name__)

CountTable = List[List[int]]


@dataclass(frozen=True)
class Edge:
    index: int
    source: int
    target: int
    label: Word


@dataclass(frozen=True, eq=False)
class GraphStructure:
    """Immutable graph structure; safe to share between worker threads."""

    num_vertices: int
    initial_vertex: int
    edges: Tuple[Edge, ...]
    group: Group
    name: Optional[str] = None

    def __post_init__(self):
        if self.num_vertices < 1:
            raise AutomatonFormatException("structure needs at least one vertex")
        if not 0 <= self.initial_vertex < self.num_vertices:
            raise AutomatonFormatException(
                f"dangling vertex {self.initial_vertex} used as initial vertex"
            )
        for position, edge in enumerate(self.edges):
            if edge.index != position:
                raise GraphStructureException(
                    f"edge at position {position} carries index {edge.index}"
                )
            for v in (edge.source, edge.target):
                if not 0 <= v < self.num_vertices:
                    raise AutomatonFormatException(
                        f"dangling vertex {v} in edge {position} "
                        f"({self.num_vertices} vertices)"
                    )

    @property
    def vertices(self) -> range:
        return range(self.num_vertices)

    def check_vertex(self, v: int) -> int:
        if not 0 <= v < self.num_vertices:
            raise GraphStructureException(f"invalid vertex {v}")
        return v

    @cached_property
    def out_edges(self) -> Tuple[Tuple[Edge, ...], ...]:
        buckets: List[List[Edge]] = [[] for _ in self.vertices]
        for edge in self.edges:
            buckets[edge.source].append(edge)
        return tuple(tuple(b) for b in buckets)

    @cached_property
    def adjacency(self) -> List[List[int]]:
        """Transition matrix M as exact integers; M[i][j] counts edges i -> j."""
        m = [[0] * self.num_vertices for _ in self.vertices]
        for edge in self.edges:
            m[edge.source][edge.target] += 1
        return m

    @cached_property
    def float_matrix(self) -> np.ndarray:
        return np.array(self.adjacency, dtype=float)

    @cached_property
    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from((e.source, e.target) for e in self.edges)
        return g

    @cached_property
    def label_length(self) -> Optional[int]:
        """Common label length of all edges, None when labels differ."""
        lengths = {len(e.label) for e in self.edges}
        if len(lengths) == 1:
            return lengths.pop()
        return None

    @cached_property
    def edge_targets(self) -> np.ndarray:
        return np.array([e.target for e in self.edges], dtype=np.int64)

    @cached_property
    def edge_letters(self) -> np.ndarray:
        """Letter indices of every edge label, shape (edges, label_length)."""
        width = self.label_length
        if width is None:
            raise GraphStructureException("edge labels have different lengths")
        return np.array(
            [[self.group.letter_index[x] for x in e.label] for e in self.edges],
            dtype=np.int64,
        ).reshape(len(self.edges), width)


@dataclass(frozen=True)
class Path:
    """Finite path: start vertex plus composable edges."""

    start: int
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self):
        current = self.start
        for i, edge in enumerate(self.edges):
            if edge.source != current:
                raise GraphStructureException(
                    f"edge {edge.index} at step {i} leaves {edge.source}, expected {current}"
                )
            current = edge.target

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def end(self) -> int:
        return self.edges[-1].target if self.edges else self.start

    @property
    def edge_indices(self) -> Tuple[int, ...]:
        return tuple(e.index for e in self.edges)

    def word(self) -> Word:
        """The evaluated label ḡ as a sequence of letters."""
        return tuple(x for e in self.edges for x in e.label)


def make_path(structure: GraphStructure, indices: Iterable[int], start: Optional[int] = None) -> Path:
    edges = tuple(structure.edges[int(i)] for i in indices)
    if start is None:
        start = edges[0].source if edges else structure.initial_vertex
    return Path(start, edges)


def count_table(structure: GraphStructure, n: int) -> CountTable:
    """c[k][v] = number of length-k paths from v, for k = 0..n."""
    if n < 0:
        raise GraphStructureException(f"path length must be nonnegative, got {n}")
    table: CountTable = [[1] * structure.num_vertices]
    out = structure.out_edges
    for _ in range(n):
        prev = table[-1]
        table.append([sum(prev[e.target] for e in out[v]) for v in structure.vertices])
    return table


def count_paths(structure: GraphStructure, v: int, n: int) -> int:
    """Exact number of length-n paths starting at v."""
    structure.check_vertex(v)
    return count_table(structure, n)[n][v]


def _matmul(a: List[List[int]], b: List[List[int]]) -> List[List[int]]:
    size = len(a)
    cols = list(zip(*b))
    return [[sum(x * y for x, y in zip(a[i], cols[j])) for j in range(size)] for i in range(size)]


def path_count_matrix(structure: GraphStructure, n: int) -> List[List[int]]:
    """Exact Mⁿ; entry (i, j) counts length-n paths from i to j."""
    if n < 0:
        raise GraphStructureException(f"matrix power must be nonnegative, got {n}")
    size = structure.num_vertices
    result = [[int(i == j) for j in range(size)] for i in range(size)]
    base = structure.adjacency
    while n:
        if n & 1:
            result = _matmul(result, base)
        base = _matmul(base, base)
        n >>= 1
    return result


def iter_paths(structure: GraphStructure, start: int, length: int) -> Iterator[Path]:
    """All length-n paths from start, lexicographic by edge index."""
    structure.check_vertex(start)
    table = count_table(structure, length)
    if length == 0:
        yield Path(start)
        return
    if table[length][start] == 0:
        return
    stack: List[Edge] = []
    choices = [iter(structure.out_edges[start])]
    while choices:
        edge = next(choices[-1], None)
        if edge is None:
            choices.pop()
            if stack:
                stack.pop()
            continue
        remaining = length - len(stack) - 1
        if table[remaining][edge.target] == 0:
            continue
        if remaining == 0:
            yield Path(start, tuple(stack) + (edge,))
            continue
        stack.append(edge)
        choices.append(iter(structure.out_edges[edge.target]))


def strongly_connected_components(structure: GraphStructure) -> List[FrozenSet[int]]:
    """Strongly connected components, ordered by smallest vertex."""
    comps = [frozenset(c) for c in nx.strongly_connected_components(structure.digraph)]
    return sorted(comps, key=min)


def internal_edges(structure: GraphStructure, component: Iterable[int]) -> List[Edge]:
    comp = set(component)
    return [e for e in structure.edges if e.source in comp and e.target in comp]


def reachable_from(structure: GraphStructure, v: int) -> FrozenSet[int]:
    structure.check_vertex(v)
    return frozenset(nx.descendants(structure.digraph, v)) | {v}


def period(structure: GraphStructure, component: Iterable[int]) -> int:
    """gcd of the cycle lengths through any vertex of a strongly connected component."""
    comp = set(component)
    if not comp:
        raise GraphStructureException("empty component")
    edges = internal_edges(structure, comp)
    if not edges:
        raise GraphStructureException(f"transient component {sorted(comp)} has no cycle")
    root = min(comp)
    level = {root: 0}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for e in structure.out_edges[v]:
            if e.target in comp and e.target not in level:
                level[e.target] = level[v] + 1
                queue.append(e.target)
    if len(level) != len(comp):
        raise GraphStructureException(f"vertices {sorted(comp)} are not strongly connected")
    g = 0
    for e in edges:
        g = gcd(g, level[e.source] + 1 - level[e.target])
    return g


def power_graph(structure: GraphStructure, p: int, budget: Optional[int] = None) -> GraphStructure:
    """The p-step structure Γᵖ: one edge per length-p path, labeled by the product word."""
    if p < 1:
        raise GraphStructureException(f"power must be positive, got {p}")
    budget = settings.BUDGET if budget is None else budget
    total = sum(count_table(structure, p)[p])
    if total > budget:
        raise BudgetExceededException(f"Γ^{p} would have {total} edges", budget)
    edges: List[Edge] = []
    for v in structure.vertices:
        for path in iter_paths(structure, v, p):
            edges.append(Edge(len(edges), v, path.end, path.word()))
    logger.debug(f"power graph p={p}: {len(edges)} edges")
    return GraphStructure(
        structure.num_vertices, structure.initial_vertex, tuple(edges), structure.group, structure.name
    )


def induced_substructure(
    structure: GraphStructure, vertices: Iterable[int], initial: Optional[int] = None
) -> GraphStructure:
    """Restriction to a vertex set, vertices renumbered in increasing order."""
    order = sorted(set(vertices))
    if not order:
        raise GraphStructureException("cannot restrict to an empty vertex set")
    for v in order:
        structure.check_vertex(v)
    initial = order[0] if initial is None else initial
    if initial not in order:
        raise GraphStructureException(f"initial vertex {initial} is outside the restriction")
    renumber = {v: i for i, v in enumerate(order)}
    edges: List[Edge] = []
    for e in structure.edges:
        if e.source in renumber and e.target in renumber:
            edges.append(Edge(len(edges), renumber[e.source], renumber[e.target], e.label))
    return GraphStructure(len(order), renumber[initial], tuple(edges), structure.group, structure.name)


def relabel_vertices(structure: GraphStructure, permutation: Sequence[int]) -> GraphStructure:
    """Apply a vertex permutation (old vertex v becomes permutation[v])."""
    if sorted(permutation) != list(structure.vertices):
        raise GraphStructureException(f"not a permutation of the vertices: {list(permutation)}")
    edges = tuple(
        Edge(e.index, permutation[e.source], permutation[e.target], e.label) for e in structure.edges
    )
    return GraphStructure(
        structure.num_vertices, permutation[structure.initial_vertex], edges, structure.group, structure.name
    )
