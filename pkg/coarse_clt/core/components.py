import logging
import math
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Tuple

import networkx as nx
import numpy as np

from coarse_clt.config import settings
from coarse_clt.core.graph import GraphStructure, internal_edges, period, strongly_connected_components
from coarse_clt.exceptions import SpectralException

logger = logging.getLogger(__name__)

MAX_SQUARINGS = 64


@dataclass(frozen=True)
class ComponentInfo:
    vertices: FrozenSet[int]
    growth_rate: float
    period: Optional[int]
    maximal: bool

    @property
    def recurrent(self) -> bool:
        return self.period is not None


@dataclass(frozen=True)
class ComponentReport:
    components: Tuple[ComponentInfo, ...]
    growth_rate: float
    large_growth: FrozenSet[int]
    small_growth: FrozenSet[int]

    @property
    def maximal_components(self) -> List[ComponentInfo]:
        return [c for c in self.components if c.maximal]

    @property
    def acyclic(self) -> bool:
        return not any(c.recurrent for c in self.components)

    def component_of(self, v: int) -> ComponentInfo:
        for c in self.components:
            if v in c.vertices:
                return c
        raise KeyError(v)


def component_growth_rate(
    structure: GraphStructure,
    component: FrozenSet[int],
    component_period: int,
    tolerance: Optional[float] = None,
) -> float:
    """Growth rate of paths inside a component.

    The component's p-th power is squared and renormalized until its row sums
    x give a Collatz-Wielandt bracket min(Sx/x) <= λ^p <= max(Sx/x) narrower
    than the tolerance. Every cyclic class of S is primitive with the same
    radius, so the bracket closes on all of them together.
    """
    tolerance = settings.SPECTRAL_TOLERANCE if tolerance is None else tolerance
    order = sorted(component)
    position = {v: i for i, v in enumerate(order)}
    m = np.zeros((len(order), len(order)))
    for e in internal_edges(structure, component):
        m[position[e.source], position[e.target]] += 1.0
    step = np.linalg.matrix_power(m, component_period)

    power = step / step.max()
    low, high = 0.0, math.inf
    for squaring in range(MAX_SQUARINGS):
        x = power.sum(axis=1)
        if np.all(x > 0):
            ratios = (step @ x) / x
            low, high = float(ratios.min()), float(ratios.max())
            if high - low <= tolerance * 1e-3 * high:
                logger.debug(f"component {order}: bracket closed after {squaring} squarings")
                return ((low + high) / 2) ** (1.0 / component_period)
        power = power @ power
        power /= power.max()
    if not math.isfinite(high):
        raise SpectralException(f"component {order}: no positive growth vector")
    logger.warning(
        f"component {order}: bracket [{low}, {high}] still open after "
        f"{MAX_SQUARINGS} squarings, using its midpoint"
    )
    return ((low + high) / 2) ** (1.0 / component_period)


def components(structure: GraphStructure, tolerance: Optional[float] = None) -> ComponentReport:
    """Strongly connected components with growth, period and growth classification."""
    tolerance = settings.SPECTRAL_TOLERANCE if tolerance is None else tolerance
    raw = []
    for comp in strongly_connected_components(structure):
        if internal_edges(structure, comp):
            p = period(structure, comp)
            rate = component_growth_rate(structure, comp, p, tolerance)
            raw.append((comp, rate, p))
        else:
            raw.append((comp, 0.0, None))

    lam = max((rate for _, rate, p in raw if p is not None), default=0.0)
    infos = []
    for comp, rate, p in raw:
        maximal = p is not None and abs(rate - lam) <= tolerance * max(lam, 1.0)
        infos.append(ComponentInfo(comp, rate, p, maximal))

    large = set()
    for info in infos:
        if info.maximal:
            for v in info.vertices:
                large.add(v)
                large.update(nx.ancestors(structure.digraph, v))
    small = frozenset(structure.vertices) - large
    logger.debug(
        f"{len(infos)} components, λ={lam}, "
        f"{sum(1 for c in infos if c.maximal)} maximal"
    )
    return ComponentReport(tuple(infos), lam, frozenset(large), small)
