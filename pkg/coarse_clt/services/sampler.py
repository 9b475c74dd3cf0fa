"""Exact uniform sampling and enumeration of spheres, and Markov path sampling.

Uniformity is exact: every choice compares a uniform draw against integer
count thresholds. Block sampling draws 53 bits per step and only falls back
to extending the draw with more bits when those 53 bits straddle a
threshold.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from coarse_clt.config import settings
from coarse_clt.core.graph import (
    CountTable,
    GraphStructure,
    Path,
    count_table,
    iter_paths,
    make_path,
)
from coarse_clt.core.markov import MarkovChain, prefix_distribution
from coarse_clt.core.spectral import SpectralData
from coarse_clt.exceptions import BudgetExceededException, SamplingException

logger = logging.getLogger(__name__)

T = TypeVar("T")

UNIT_BITS = 53
UNIT = 1 << UNIT_BITS
EXTRA_BITS = 32
NO_EDGE = UNIT + 1


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream, block)))


def _uniform_below(rng: np.random.Generator, bound: int) -> int:
    """Exact uniform integer in [0, bound) by rejection on 32-bit chunks."""
    if bound < 1:
        raise SamplingException(f"cannot draw below {bound}")
    bits = (bound - 1).bit_length()
    if bits == 0:
        return 0
    chunks = -(-bits // EXTRA_BITS)
    while True:
        x = 0
        for _ in range(chunks):
            x = (x << EXTRA_BITS) | int(rng.integers(0, 1 << EXTRA_BITS))
        x >>= chunks * EXTRA_BITS - bits
        if x < bound:
            return x


@dataclass
class SamplerState:
    """Count tables plus a seeded stream for single-path sampling."""

    structure: GraphStructure
    seed: int
    stream: int = 0
    position: int = 0
    table: CountTable = field(default_factory=list, repr=False)
    _rng: Optional[np.random.Generator] = field(default=None, repr=False)

    @property
    def depth(self) -> int:
        return len(self.table) - 1

    def ensure(self, n: int) -> CountTable:
        if self.depth < n:
            self.table = count_table(self.structure, n)
        return self.table

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
            self._rng = np.random.default_rng(sequence)
        return self._rng


def unrank_path(structure: GraphStructure, table: CountTable, start: int, n: int, rank: int) -> Path:
    """The rank-th length-n path from start in lexicographic edge order."""
    edges = []
    vertex = start
    for remaining in range(n, 0, -1):
        for e in structure.out_edges[vertex]:
            weight = table[remaining - 1][e.target]
            if rank < weight:
                edges.append(e)
                vertex = e.target
                break
            rank -= weight
        else:
            raise SamplingException(f"rank out of range at vertex {vertex}")
    return Path(start, tuple(edges))


def sample_sphere_uniform(state: SamplerState, n: int) -> Path:
    """One path drawn with probability exactly 1/c(v₀, n)."""
    if n < 0:
        raise SamplingException(f"length must be nonnegative, got {n}")
    structure = state.structure
    table = state.ensure(n)
    v0 = structure.initial_vertex
    total = table[n][v0]
    if total == 0:
        raise SamplingException(f"empty sphere: no paths of length {n} from vertex {v0}")
    rank = _uniform_below(state.rng, total)
    state.position += 1
    return unrank_path(structure, table, v0, n, rank)


@dataclass(frozen=True, eq=False)
class StepThresholds:
    """Per-step 53-bit thresholds; edge j of v is certain iff lo[v, j] ≤ u < hi[v, j]."""

    out_index: np.ndarray
    edge_targets: np.ndarray
    lo: List[np.ndarray]
    hi: List[np.ndarray]
    cumulative: List[List[List[int]]]
    totals: List[List[int]]


def _out_index(structure: GraphStructure) -> np.ndarray:
    width = max((len(out) for out in structure.out_edges), default=0)
    index = np.full((structure.num_vertices, max(width, 1)), -1, dtype=np.int64)
    for v, out in enumerate(structure.out_edges):
        for j, e in enumerate(out):
            index[v, j] = e.index
    return index


def step_thresholds(structure: GraphStructure, table: CountTable, n: int) -> StepThresholds:
    """Thresholds for steps with n, n-1, ..., 1 remaining edges (list index = remaining)."""
    out_index = _out_index(structure)
    width = out_index.shape[1]
    lo: List[np.ndarray] = [np.empty(0)]
    hi: List[np.ndarray] = [np.empty(0)]
    cumulative: List[List[List[int]]] = [[]]
    totals: List[List[int]] = [[]]
    for remaining in range(1, n + 1):
        lo_r = np.full((structure.num_vertices, width), NO_EDGE, dtype=np.int64)
        hi_r = np.zeros((structure.num_vertices, width), dtype=np.int64)
        cum_r: List[List[int]] = []
        for v, out in enumerate(structure.out_edges):
            total = table[remaining][v]
            running = 0
            bounds = []
            for j, e in enumerate(out):
                before = running
                running += table[remaining - 1][e.target]
                bounds.append(running)
                if total == 0 or running == before:
                    continue
                lo_r[v, j] = -((-before << UNIT_BITS) // total)
                hi_r[v, j] = (running << UNIT_BITS) // total
            cum_r.append(bounds)
        lo.append(lo_r)
        hi.append(hi_r)
        cumulative.append(cum_r)
        totals.append(list(table[remaining]))
    return StepThresholds(out_index, structure.edge_targets, lo, hi, cumulative, totals)


def _resolve_exact(
    rng: np.random.Generator, u: int, bounds: Sequence[int], total: int
) -> int:
    """Bucket of the uniform real whose first 53 bits are u."""
    numerator = u
    bits = UNIT_BITS
    while True:
        numerator = (numerator << EXTRA_BITS) | int(rng.integers(0, 1 << EXTRA_BITS))
        bits += EXTRA_BITS
        left = numerator * total
        previous = 0
        for j, bound in enumerate(bounds):
            if left < bound << bits:
                if previous << bits <= left and (numerator + 1) * total <= bound << bits:
                    return j
                break
            previous = bound


def index_dtype(size: int) -> type:
    """Smallest signed integer type that holds every index below size."""
    for dtype in (np.int16, np.int32):
        if size <= np.iinfo(dtype).max:
            return dtype
    return np.int64


def edge_dtype(structure: GraphStructure) -> type:
    return index_dtype(len(structure.edges))


def letters_per_path(structure: GraphStructure, n: int) -> int:
    """Word length spelled by every length-n path; all labels share one length."""
    return n * structure.edge_letters.shape[1]


def _sample_block(
    thresholds: StepThresholds,
    n: int,
    starts: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    rows = len(starts)
    edges = np.empty((rows, n), dtype=index_dtype(len(thresholds.edge_targets)))
    current = starts.copy()
    straddled = 0
    for step in range(n):
        remaining = n - step
        u = rng.integers(0, UNIT, size=rows, dtype=np.int64)
        lo = thresholds.lo[remaining][current]
        hi = thresholds.hi[remaining][current]
        match = (u[:, None] >= lo) & (u[:, None] < hi)
        found = match.any(axis=1)
        choice = match.argmax(axis=1)
        for i in np.flatnonzero(~found):
            v = int(current[i])
            choice[i] = _resolve_exact(
                rng, int(u[i]), thresholds.cumulative[remaining][v], thresholds.totals[remaining][v]
            )
            straddled += 1
        chosen = thresholds.out_index[current, choice]
        edges[:, step] = chosen
        current = thresholds.edge_targets[chosen]
    if straddled:
        logger.debug(f"block of {rows}: {straddled} draws resolved with extra bits")
    return edges


def _block_sizes(count: int, block_size: int) -> List[int]:
    full, rest = divmod(count, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _map_blocks(
    structure: GraphStructure,
    n: int,
    count: int,
    seed: int,
    reduce: Callable[[np.ndarray, int, int], T],
    stream: int,
    jobs: Optional[int],
    starts: Optional[Union[int, np.ndarray]],
    table: Optional[CountTable],
) -> List[T]:
    jobs = settings.DEFAULT_JOBS if jobs is None else jobs
    if count < 0 or n < 0:
        raise SamplingException(f"invalid request: {count} paths of length {n}")
    table = count_table(structure, n) if table is None or len(table) <= n else table
    if starts is None:
        starts = structure.initial_vertex
    starts = np.broadcast_to(np.asarray(starts, dtype=np.int64), (count,)).copy()
    for v in np.unique(starts):
        if table[n][int(v)] == 0:
            raise SamplingException(f"empty sphere: no paths of length {n} from vertex {int(v)}")
    thresholds = step_thresholds(structure, table, n)

    sizes = _block_sizes(count, settings.SAMPLE_BLOCK_SIZE)
    offsets = np.cumsum([0] + sizes)

    def run(block: int) -> T:
        rng = block_generator(seed, stream, block)
        lo, hi = int(offsets[block]), int(offsets[block + 1])
        return reduce(_sample_block(thresholds, n, starts[lo:hi], rng), lo, hi)

    if jobs > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, range(len(sizes))))
    else:
        results = [run(b) for b in range(len(sizes))]
    logger.info(f"sampled {count} paths of length {n} in {len(sizes)} blocks")
    return results


def map_sphere_blocks(
    structure: GraphStructure,
    n: int,
    count: int,
    seed: int,
    reduce: Callable[[np.ndarray], T],
    stream: int = 0,
    jobs: Optional[int] = None,
    starts: Optional[Union[int, np.ndarray]] = None,
    table: Optional[CountTable] = None,
) -> List[T]:
    """reduce applied to every block of count uniform length-n paths, in block order.

    Block b of SAMPLE_BLOCK_SIZE rows uses its own generator seeded with
    spawn key (stream, b), so the results do not depend on jobs. Only the
    reduced values outlive their block.
    """
    return _map_blocks(
        structure, n, count, seed, lambda edges, lo, hi: reduce(edges), stream, jobs, starts, table
    )


def sample_sphere_block(
    structure: GraphStructure,
    n: int,
    count: int,
    seed: int,
    stream: int = 0,
    jobs: Optional[int] = None,
    starts: Optional[Union[int, np.ndarray]] = None,
    table: Optional[CountTable] = None,
) -> np.ndarray:
    """count uniform length-n paths as a (count, n) matrix of edge indices."""
    blocks = map_sphere_blocks(structure, n, count, seed, lambda edges: edges, stream, jobs, starts, table)
    if not blocks:
        return np.empty((0, n), dtype=edge_dtype(structure))
    return np.concatenate(blocks, axis=0)


def map_prefix_stratified(
    structure: GraphStructure,
    data: SpectralData,
    n: int,
    count: int,
    seed: int,
    reduce: Callable[[np.ndarray], T],
    stream: int = 0,
    jobs: Optional[int] = None,
) -> List[T]:
    """Prefix of length r = n mod p drawn from the ρ-weighted prefix law, then
    a uniform continuation of length n - r from the prefix's end vertex.
    """
    r = n % data.period
    if r == 0:
        return map_sphere_blocks(structure, n, count, seed, reduce, stream, jobs)
    prefixes = prefix_distribution(structure, data, r)
    probs = np.array([prob for _, prob in prefixes])
    probs = probs / probs.sum()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
    chosen = rng.choice(len(prefixes), size=count, p=probs)
    dtype = edge_dtype(structure)
    heads = np.array([path.edge_indices for path, _ in prefixes], dtype=dtype)[chosen]
    ends = np.array([path.end for path, _ in prefixes], dtype=np.int64)[chosen]
    logger.info(f"prefix-stratified sampling with r={r} over {len(prefixes)} prefixes")

    def joined(tails: np.ndarray, lo: int, hi: int) -> T:
        return reduce(np.concatenate([heads[lo:hi], tails.astype(dtype, copy=False)], axis=1))

    return _map_blocks(structure, n - r, count, seed, joined, stream, jobs, ends, None)


def sample_prefix_stratified(
    structure: GraphStructure,
    data: SpectralData,
    n: int,
    count: int,
    seed: int,
    stream: int = 0,
    jobs: Optional[int] = None,
) -> np.ndarray:
    blocks = map_prefix_stratified(structure, data, n, count, seed, lambda edges: edges, stream, jobs)
    if not blocks:
        return np.empty((0, n), dtype=edge_dtype(structure))
    return np.concatenate(blocks, axis=0)


def enumerate_sphere(
    structure: GraphStructure, n: int, budget: Optional[int] = None
) -> Iterator[Path]:
    """All length-n paths from v₀ in lexicographic edge order."""
    budget = settings.BUDGET if budget is None else budget
    total = count_table(structure, n)[n][structure.initial_vertex]
    if total > budget:
        raise BudgetExceededException(f"sphere of radius {n} has {total} paths", budget)
    return iter_paths(structure, structure.initial_vertex, n)


def sphere_matrix(
    structure: GraphStructure, n: int, budget: Optional[int] = None
) -> np.ndarray:
    """enumerate_sphere as a (c(v₀, n), n) edge index matrix, built breadth first."""
    budget = settings.BUDGET if budget is None else budget
    table = count_table(structure, n)
    v0 = structure.initial_vertex
    total = table[n][v0]
    if total > budget:
        raise BudgetExceededException(f"sphere of radius {n} has {total} paths", budget)
    dtype = edge_dtype(structure)
    if total == 0:
        return np.empty((0, n), dtype=dtype)
    out_index = _out_index(structure)
    targets = structure.edge_targets
    paths = np.empty((1, 0), dtype=dtype)
    current = np.array([v0], dtype=np.int64)
    for step in range(n):
        alive = np.array([c > 0 for c in table[n - step - 1]])
        candidates = out_index[current]
        valid = candidates >= 0
        valid[valid] = alive[targets[candidates[valid]]]
        rows, cols = np.nonzero(valid)
        chosen = candidates[rows, cols]
        paths = np.concatenate([paths[rows], chosen[:, None].astype(dtype)], axis=1)
        current = targets[chosen]
    return paths


def letter_matrix(structure: GraphStructure, edges: np.ndarray) -> np.ndarray:
    """Letter indices of the words of edge-index rows, shape (rows, n·label length)."""
    table = structure.edge_letters
    table = table.astype(index_dtype(len(structure.group.letters)), copy=False)
    return table[edges].reshape(edges.shape[0], edges.shape[1] * table.shape[1])


def paths_from_matrix(structure: GraphStructure, edges: np.ndarray, start: Optional[int] = None) -> List[Path]:
    return [make_path(structure, row, start) for row in edges]


def sample_markov(chain: MarkovChain, n: int, seed: Union[int, np.random.Generator]) -> Path:
    """Start from π, then follow edge probabilities (backwards for reversed chains)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    structure = chain.structure
    pi = np.asarray(chain.pi, dtype=float)
    if pi.sum() <= 0.0:
        raise SamplingException("chain has no initial mass")
    vertex = int(rng.choice(structure.num_vertices, p=pi / pi.sum()))
    first = vertex
    moves: List[Tuple] = []
    for v in structure.vertices:
        if chain.backward:
            options = [e for e in structure.edges if e.target == v]
        else:
            options = list(structure.out_edges[v])
        weights = np.array([chain.edge_prob[e.index] for e in options], dtype=float)
        moves.append((options, np.cumsum(weights)))
    draws = rng.random(n)
    walked = []
    for x in draws:
        options, cumulative = moves[vertex]
        if not options or cumulative[-1] <= 0.0:
            raise SamplingException(f"chain is stuck at vertex {vertex}")
        j = min(int(np.searchsorted(cumulative, x * cumulative[-1], side="right")), len(options) - 1)
        e = options[j]
        walked.append(e)
        vertex = e.source if chain.backward else e.target
    if chain.backward:
        walked.reverse()
        return Path(vertex, tuple(walked))
    return Path(first, tuple(walked))
