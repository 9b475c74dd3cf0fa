"""Built-in geodesic combings: free groups and right-angled Artin/Coxeter
groups with shortlex normal forms, plus empirical fellow-traveler checks.
"""

import logging
import string
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from coarse_clt.config import settings
from coarse_clt.core.documents import dump_graph_structure
from coarse_clt.core.graph import Edge, GraphStructure, Path, count_table, iter_paths
from coarse_clt.core.groups import (
    CommutationGraph,
    FreeGroup,
    RightAngledGroup,
    Word,
    format_word,
    parse_word,
)
from coarse_clt.exceptions import BudgetExceededException, CombingException
from coarse_clt.schemas.automaton import AutomatonDocument

logger = logging.getLogger(__name__)


def free_group_combing(rank: int, generators: Optional[Sequence[str]] = None) -> GraphStructure:
    """No-backtracking automaton: start vertex plus one vertex per letter."""
    if rank < 2:
        raise CombingException(f"free group combing needs rank ≥ 2, got {rank}")
    if generators is None:
        if rank > len(string.ascii_lowercase):
            raise CombingException(f"rank {rank} needs explicit generator names")
        generators = string.ascii_lowercase[:rank]
    if len(generators) != rank:
        raise CombingException(f"expected {rank} generator names, got {list(generators)}")
    group = FreeGroup(generators)
    vertex_of = {x: i + 1 for i, x in enumerate(group.letters)}
    edges: List[Edge] = []
    for x in group.letters:
        edges.append(Edge(len(edges), 0, vertex_of[x], (x,)))
    for x in group.letters:
        for y in group.letters:
            if y != group.inverse_letter(x):
                edges.append(Edge(len(edges), vertex_of[x], vertex_of[y], (y,)))
    return GraphStructure(len(group.letters) + 1, 0, tuple(edges), group, f"F{rank}")


def raag_shortlex_combing(graph: CommutationGraph) -> GraphStructure:
    """Automaton accepting exactly the shortlex-least geodesics.

    States are blocker sets F of letters that may not come next. Reading a
    letter a from F moves to

        {a⁻¹} ∪ {x ∈ F : x commutes with a} ∪ {x : x commutes with a, x < a}

    where a⁻¹ = a for Coxeter groups; a letter is readable iff it is not in F.
    The first part forbids cancellation, the last forbids a smaller letter
    that could be shuffled in front of a.
    """
    if not graph.generators:
        raise CombingException("commutation graph has no generators")
    if graph.is_join():
        logger.warning(
            f"commutation graph on {list(graph.generators)} is a join; "
            "the group splits as a direct product"
        )
    group = RightAngledGroup(graph)
    order = group.letter_index
    states: Dict[FrozenSet[str], int] = {frozenset(): 0}
    queue: List[FrozenSet[str]] = [frozenset()]
    edges: List[Edge] = []
    head = 0
    while head < len(queue):
        state = queue[head]
        head += 1
        for a in group.letters:
            if a in state:
                continue
            successor = {group.inverse_letter(a)}
            successor.update(x for x in state if group.commute_letters(x, a))
            successor.update(
                x for x in group.letters if group.commute_letters(x, a) and order[x] < order[a]
            )
            frozen = frozenset(successor)
            if frozen not in states:
                states[frozen] = len(states)
                queue.append(frozen)
            edges.append(Edge(len(edges), states[state], states[frozen], (a,)))
    logger.info(f"shortlex combing ({graph.kind}): {len(states)} states, {len(edges)} edges")
    return GraphStructure(len(states), 0, tuple(edges), group, f"{group.kind}-shortlex")


def geodesic_representative(structure: GraphStructure, word: Union[str, Sequence[str]]) -> Path:
    """Accepted path evaluating to the same element as the word."""
    group = structure.group
    letters = parse_word(group, word)
    normal = group.normal_form(letters)
    vertex = structure.initial_vertex
    edges: List[Edge] = []
    for x in normal:
        edge = next((e for e in structure.out_edges[vertex] if e.label == (x,)), None)
        if edge is None:
            raise CombingException(
                f"normal form '{format_word(normal)}' is not accepted at vertex {vertex}; "
                "structure is not a built-in combing"
            )
        edges.append(edge)
        vertex = edge.target
    return Path(structure.initial_vertex, tuple(edges))


@dataclass(frozen=True)
class FellowTravelerReport:
    constant: int
    length_defect: int
    maxlen: int
    elements: Tuple[Word, ...]
    paths_checked: int
    witness: Optional[Tuple[Word, Word, Word]]


def fellow_traveler_constant(
    structure: GraphStructure,
    elements: Sequence[Union[str, Sequence[str]]],
    maxlen: int,
    budget: Optional[int] = None,
) -> FellowTravelerReport:
    """max_i d(ḡ(i), b₁h̄(i)) over paths h with ‖h‖ ≤ maxlen and g the combing
    path of b₁h̄b₂, for b₁, b₂ in the given elements; also max |‖g‖ - ‖h‖|.
    """
    budget = settings.BUDGET if budget is None else budget
    group = structure.group
    bounded = [parse_word(group, b) for b in elements]
    table = count_table(structure, maxlen)
    total = sum(table[n][structure.initial_vertex] for n in range(maxlen + 1))
    work = total * len(bounded) ** 2
    if work > budget:
        raise BudgetExceededException(f"{work} fellow-traveler comparisons", budget)

    constant = 0
    defect = 0
    witness = None
    for n in range(maxlen + 1):
        for path in iter_paths(structure, structure.initial_vertex, n):
            h = path.word()
            for b1 in bounded:
                for b2 in bounded:
                    g = geodesic_representative(structure, b1 + h + b2).word()
                    for i in range(max(len(g), len(h)) + 1):
                        d = group.distance(g[: min(i, len(g))], b1 + h[: min(i, len(h))])
                        if d > constant:
                            constant = d
                            witness = (b1, h, b2)
                    defect = max(defect, abs(len(g) - len(h)))
    logger.info(f"fellow-traveler constant {constant} up to length {maxlen}")
    return FellowTravelerReport(constant, defect, maxlen, tuple(bounded), total, witness)


def combing_for(
    free: Optional[int] = None,
    raag: Optional[Sequence[str]] = None,
    racg: Optional[Sequence[str]] = None,
    commutations: Sequence[Sequence[str]] = (),
) -> GraphStructure:
    """Dispatch used by the command line `comb` subcommand."""
    chosen = [x is not None for x in (free, raag, racg)]
    if sum(chosen) != 1:
        raise CombingException("choose exactly one of free, raag or racg")
    if free is not None:
        return free_group_combing(free)
    generators = raag if raag is not None else racg
    graph = CommutationGraph.from_pairs(generators, commutations, coxeter=racg is not None)
    return raag_shortlex_combing(graph)


def combing_document(structure: GraphStructure) -> AutomatonDocument:
    return dump_graph_structure(structure)
