"""Parry Markov chain, first-return loop measures, prefix distributions and
the counting-versus-Markov total variation.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from coarse_clt.config import settings
from coarse_clt.core.graph import (
    GraphStructure,
    Path,
    count_table,
    iter_paths,
    path_count_matrix,
)
from coarse_clt.core.spectral import SpectralData, require_vectors
from coarse_clt.exceptions import BudgetExceededException, MarkovException

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Initial distribution π on vertices and transition probabilities per edge."""

    structure: GraphStructure
    pi: np.ndarray
    edge_prob: np.ndarray
    rho: np.ndarray
    growth_rate: float
    start_vertex: int
    backward: bool = False

    @cached_property
    def transition_matrix(self) -> np.ndarray:
        size = self.structure.num_vertices
        p = np.zeros((size, size))
        for e in self.structure.edges:
            if self.backward:
                p[e.target, e.source] += self.edge_prob[e.index]
            else:
                p[e.source, e.target] += self.edge_prob[e.index]
        return p

    def outgoing_mass(self) -> np.ndarray:
        return self.transition_matrix.sum(axis=1)

    def path_probability(self, path: Path) -> float:
        """Probability of a forward path, starting vertex included."""
        prob = float(self.pi[path.start])
        for e in path.edges:
            prob *= float(self.edge_prob[e.index])
        return prob


def vertex_started_chain(structure: GraphStructure, data: SpectralData, vertex: int) -> MarkovChain:
    """Parry chain begun at a large-growth vertex: π_i = u_i ρ_i / ρ_v with u = e_vᵀM∞."""
    if not data.report.semisimple:
        raise MarkovException(
            f"structure is {data.label}; build the chain on power_graph(Γ, {data.period})"
        )
    rho, _, limit = require_vectors(data)
    structure.check_vertex(vertex)
    if rho[vertex] <= 0.0:
        raise MarkovException(f"vertex {vertex} has small growth (ρ = 0)")
    u = limit[vertex]
    pi = u * rho / rho[vertex]
    lam = data.lam
    edge_prob = np.zeros(len(structure.edges))
    for e in structure.edges:
        if rho[e.source] > 0.0:
            edge_prob[e.index] = rho[e.target] / (lam * rho[e.source])
    return MarkovChain(structure, pi, edge_prob, rho, lam, vertex)


def parry_chain(structure: GraphStructure, data: SpectralData) -> MarkovChain:
    """The Parry measure of the structure, started from the initial vertex."""
    chain = vertex_started_chain(structure, data, structure.initial_vertex)
    logger.info(f"Parry chain: λ={data.lam}, residual {stationarity_residual(chain):.2e}")
    return chain


def reversed_parry_chain(structure: GraphStructure, data: SpectralData) -> MarkovChain:
    """Time reversal: edge s -> t is walked backwards with probability u_s / (λ u_t)."""
    forward = parry_chain(structure, data)
    u = data.u
    edge_prob = np.zeros(len(structure.edges))
    for e in structure.edges:
        if u[e.target] > 0.0:
            edge_prob[e.index] = u[e.source] / (data.lam * u[e.target])
    return MarkovChain(
        structure, forward.pi, edge_prob, forward.rho, data.lam, structure.initial_vertex, True
    )


def stationarity_residual(chain: MarkovChain) -> float:
    """max_j |Σ_i π_i p_ij - π_j|."""
    flow = chain.pi @ chain.transition_matrix
    return float(np.max(np.abs(flow - chain.pi)))


def prime_loops(
    structure: GraphStructure, v: int, cutoff: int, budget: Optional[int] = None
) -> List[Path]:
    """Loops at v of length ≤ cutoff visiting v only at their endpoints."""
    structure.check_vertex(v)
    budget = settings.BUDGET if budget is None else budget
    loops: List[Path] = []
    explored = 0
    stack: List = [(v, ())]
    while stack:
        vertex, edges = stack.pop()
        if len(edges) >= cutoff:
            continue
        for e in reversed(structure.out_edges[vertex]):
            explored += 1
            if explored > budget:
                raise BudgetExceededException(f"prime loop search at vertex {v}", budget)
            extended = edges + (e,)
            if e.target == v:
                loops.append(Path(v, extended))
            else:
                stack.append((e.target, extended))
    loops.sort(key=lambda path: (path.length, path.edge_indices))
    return loops


@dataclass(frozen=True)
class LoopMeasure:
    vertex: int
    cutoff: int
    loops: Tuple[Tuple[Path, float], ...]

    @property
    def captured_mass(self) -> float:
        return math.fsum(prob for _, prob in self.loops)


def _require_maximal(chain: MarkovChain, v: int) -> None:
    chain.structure.check_vertex(v)
    if chain.pi[v] <= 0.0:
        raise MarkovException(f"vertex {v} is outside the maximal components")


def first_return_measure(
    chain: MarkovChain, v: int, cutoff: int, budget: Optional[int] = None
) -> LoopMeasure:
    """μ_v on prime loops at v: products of Parry edge probabilities."""
    _require_maximal(chain, v)
    loops = prime_loops(chain.structure, v, cutoff, budget)
    weighted = []
    for loop in loops:
        prob = 1.0
        for e in loop.edges:
            prob *= float(chain.edge_prob[e.index])
        weighted.append((loop, prob))
    return LoopMeasure(v, cutoff, tuple(weighted))


@dataclass(frozen=True)
class ReturnTimeIdentities:
    vertex: int
    cutoff: int
    return_time: float
    inverse_pi: float
    captured_mass: float
    visits: Tuple[float, ...]
    return_residual: float
    visit_residuals: Tuple[float, ...]

    @property
    def max_visit_residual(self) -> float:
        return max(self.visit_residuals)


def return_time_identities(chain: MarkovChain, v: int, cutoff: int) -> ReturnTimeIdentities:
    """Truncated R = Σ ‖l‖ μ_v(l) and n_w, checked against R = 1/π_v and π_w = n_w/R.

    Taboo paths (from v, avoiding v in between) are propagated one step at a
    time, so no loop enumeration is needed.
    """
    _require_maximal(chain, v)
    p = chain.transition_matrix
    mass = np.zeros(chain.structure.num_vertices)
    mass[v] = 1.0
    visits = np.zeros_like(mass)
    return_time = 0.0
    captured = 0.0
    for k in range(1, cutoff + 1):
        mass = mass @ p
        returned = mass[v]
        return_time += k * returned
        captured += returned
        visits += mass
        mass[v] = 0.0
    pi = chain.pi
    residuals = tuple(float(abs(pi[w] - visits[w] / return_time)) for w in chain.structure.vertices)
    return ReturnTimeIdentities(
        vertex=v,
        cutoff=cutoff,
        return_time=float(return_time),
        inverse_pi=float(1.0 / pi[v]),
        captured_mass=float(captured),
        visits=tuple(float(x) for x in visits),
        return_residual=float(abs(return_time - 1.0 / pi[v])),
        visit_residuals=residuals,
    )


def prefix_distribution(
    structure: GraphStructure, data: SpectralData, r: int
) -> List[Tuple[Path, float]]:
    """μ(g₀) = ρ_i / Σ_j (Mʳ)_{0j} ρ_j for prefixes g₀ of length r ending at v_i."""
    if not 0 <= r < data.period:
        raise MarkovException(f"prefix length {r} must lie in [0, {data.period - 1}]")
    rho, _, _ = require_vectors(data)
    v0 = structure.initial_vertex
    powers = path_count_matrix(structure, r)
    norm = math.fsum(powers[v0][j] * rho[j] for j in structure.vertices)
    if norm <= 0.0:
        raise MarkovException(f"initial vertex {v0} has small growth")
    return [(path, float(rho[path.end] / norm)) for path in iter_paths(structure, v0, r)]


@dataclass(frozen=True)
class TotalVariation:
    n: int
    trim: int
    middle_length: int
    value: float
    log_base: str = field(default="e")


def tv_counting_vs_markov(
    structure: GraphStructure, chain: MarkovChain, n: int, budget: Optional[int] = None
) -> TotalVariation:
    """Exact TV between the middle of a uniform length-n path and the chain's path law.

    The middle subpath runs from position ⌊ln n⌋ to n - ⌊ln n⌋. Both laws
    depend only on the endpoints (i, j) of the middle subpath: the counting
    law gives a_i·b_j/N and the chain gives π_i ρ_j / (ρ_i λᵐ), so the sum
    over paths groups into (Mᵐ)_ij copies of one term per endpoint pair.
    """
    budget = settings.BUDGET if budget is None else budget
    if n < 1:
        raise MarkovException(f"length must be positive, got {n}")
    trim = int(math.floor(math.log(n)))
    middle = n - 2 * trim
    if middle < 1:
        raise MarkovException(f"n={n} leaves no middle subpath after trimming {trim}")
    v0 = structure.initial_vertex
    table = count_table(structure, n)
    total = table[n][v0]
    if total == 0:
        raise MarkovException(f"no paths of length {n} from the initial vertex")
    if total > budget:
        raise BudgetExceededException(f"{total} paths of length {n}", budget)

    heads = path_count_matrix(structure, trim)[v0]
    tails = table[trim]
    middles = path_count_matrix(structure, middle)
    rho = chain.rho
    log_lam = math.log(chain.growth_rate)

    terms: List[float] = []
    for i in structure.vertices:
        for j in structure.vertices:
            paths = middles[i][j]
            if paths == 0:
                continue
            counting = Fraction(paths * heads[i] * tails[j], total)
            markov = 0.0
            if chain.pi[i] > 0.0 and rho[i] > 0.0 and rho[j] > 0.0:
                markov = math.exp(
                    math.log(paths) + math.log(chain.pi[i]) + math.log(rho[j])
                    - math.log(rho[i]) - middle * log_lam
                )
            terms.append(abs(float(counting) - markov))
    value = 0.5 * math.fsum(terms)
    logger.debug(f"TV n={n} trim={trim}: {value}")
    return TotalVariation(n, trim, middle, value)

