"""Small reference structures with known closed-form answers."""

from typing import List, Sequence, Tuple

from coarse_clt.core.graph import Edge, GraphStructure
from coarse_clt.core.groups import FreeGroup, Group, OpaqueGroup
from coarse_clt.services.combings import free_group_combing

EdgeTuple = Tuple[int, int, str]


def _structure(
    vertices: int, edges: Sequence[EdgeTuple], group: Group, name: str, initial: int = 0
) -> GraphStructure:
    built = tuple(Edge(i, s, t, tuple(label.split())) for i, (s, t, label) in enumerate(edges))
    return GraphStructure(vertices, initial, built, group, name)


def golden_mean() -> GraphStructure:
    """Words in a, b with no "b b"; λ is the golden ratio."""
    edges = [(0, 0, "a"), (0, 1, "b"), (1, 0, "a")]
    return _structure(2, edges, FreeGroup("ab"), "golden-mean")


def free_rank_two() -> GraphStructure:
    return free_group_combing(2)


def two_cycle() -> GraphStructure:
    return _structure(2, [(0, 1, "a"), (1, 0, "b")], FreeGroup("ab"), "two-cycle")


def self_loop() -> GraphStructure:
    return _structure(1, [(0, 0, "a")], FreeGroup("a"), "self-loop")


def jordan_block() -> GraphStructure:
    """M = [[1, 1], [0, 1]]: two components of growth 1 in series."""
    edges = [(0, 0, "x"), (0, 1, "y"), (1, 1, "z")]
    return _structure(2, edges, OpaqueGroup("xyz"), "jordan")


def period_two_branching() -> GraphStructure:
    """Period 2 with unequal branches: ρ = (1, 2/3, 4/3) after normalization."""
    edges = [(0, 1, "x"), (0, 2, "y"), (1, 0, "z"), (2, 0, "z"), (2, 0, "w")]
    return _structure(3, edges, OpaqueGroup("xyzw"), "period-two")


def doubled_free_rank_two() -> GraphStructure:
    """Two isomorphic copies of the rank 2 no-backtracking component behind one start vertex."""
    group = FreeGroup("ab")
    letters = group.letters
    edges: List[EdgeTuple] = []
    copies = [{x: 1 + c * len(letters) + i for i, x in enumerate(letters)} for c in range(2)]
    for vertex_of in copies:
        for x in letters:
            edges.append((0, vertex_of[x], x))
    for vertex_of in copies:
        for x in letters:
            for y in letters:
                if y != group.inverse_letter(x):
                    edges.append((vertex_of[x], vertex_of[y], y))
    return _structure(1 + 2 * len(letters), edges, group, "doubled-F2")
