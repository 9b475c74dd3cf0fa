"""Perron-Frobenius data of the transition matrix.

λ comes from a Collatz-Wielandt bracket per component; ρ, u and M∞ come from
iterating Mᵖ/λᵖ until the iterates stop moving.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from coarse_clt.config import settings
from coarse_clt.core.components import ComponentReport, components
from coarse_clt.core.graph import GraphStructure
from coarse_clt.exceptions import SpectralException

logger = logging.getLogger(__name__)


class Diagnosis(str, Enum):
    PRIMITIVE = "primitive"
    SEMISIMPLE = "semisimple"
    ALMOST_SEMISIMPLE = "almost-semisimple"
    NOT_ALMOST_SEMISIMPLE = "not-almost-semisimple"


@dataclass(frozen=True)
class SemisimplicityReport:
    diagnosis: Diagnosis
    period: int
    growth_rate: Optional[float]
    window_growth: float
    growth_vs_n5: float
    horizon: int
    tolerance: float
    note: Optional[str] = None

    @property
    def label(self) -> str:
        if self.diagnosis == Diagnosis.ALMOST_SEMISIMPLE:
            return f"{self.diagnosis.value}({self.period})"
        return self.diagnosis.value

    @property
    def semisimple(self) -> bool:
        return self.diagnosis in (Diagnosis.PRIMITIVE, Diagnosis.SEMISIMPLE)

    @property
    def almost_semisimple(self) -> bool:
        return self.diagnosis != Diagnosis.NOT_ALMOST_SEMISIMPLE


@dataclass(frozen=True, eq=False)
class SpectralData:
    growth_rate: float
    rho: Optional[np.ndarray]
    u: Optional[np.ndarray]
    limit_matrix: Optional[np.ndarray]
    period: int
    report: SemisimplicityReport
    components: ComponentReport
    tolerance: float

    @property
    def lam(self) -> float:
        return self.growth_rate

    @property
    def diagnosis(self) -> Diagnosis:
        return self.report.diagnosis

    @property
    def label(self) -> str:
        return self.report.label


def structure_period(report: ComponentReport) -> int:
    """lcm of the periods of the maximal components."""
    periods = sorted({c.period for c in report.maximal_components if c.period})
    if len(periods) > 1:
        logger.warning(f"maximal components have different periods {periods}; using their lcm")
    p = 1
    for q in periods:
        p = p * q // math.gcd(p, q)
    return p


def leading_eigenvalue(structure: GraphStructure, tolerance: Optional[float] = None) -> float:
    report = components(structure, tolerance)
    if report.acyclic:
        raise SpectralException("finite language, λ undefined")
    return report.growth_rate


def _log_norm_profile(structure: GraphStructure, lam: float, horizon: int) -> np.ndarray:
    """g(n) = log ‖Mⁿ‖∞ - n log λ for n = 0..horizon."""
    m = structure.float_matrix
    x = np.ones(structure.num_vertices)
    log_scale = 0.0
    log_lam = math.log(lam)
    profile = np.zeros(horizon + 1)
    for n in range(1, horizon + 1):
        x = m @ x
        top = x.max()
        x = x / top
        log_scale += math.log(top)
        profile[n] = log_scale - n * log_lam
    return profile


def semisimplicity_report(
    structure: GraphStructure,
    report: Optional[ComponentReport] = None,
    tolerance: Optional[float] = None,
    horizon: Optional[int] = None,
) -> SemisimplicityReport:
    """Diagnose (almost) semisimplicity from the growth of ‖Mⁿ‖∞/λⁿ.

    A Jordan block at λ makes the normalized norm grow polynomially, so its
    maximum over (N/2, N] exceeds the maximum over (N/4, N/2] by a factor
    close to 2 per block; semisimple matrices keep both windows level. Longer
    chains also show up as a large rise of the norm over its value at n = 5.
    """
    tolerance = settings.SPECTRAL_TOLERANCE if tolerance is None else tolerance
    horizon = settings.JORDAN_HORIZON if horizon is None else horizon
    report = components(structure, tolerance) if report is None else report
    if report.acyclic:
        return SemisimplicityReport(
            Diagnosis.NOT_ALMOST_SEMISIMPLE, 1, None, 1.0, 1.0, horizon, tolerance,
            note="finite language, λ undefined",
        )
    lam = report.growth_rate
    profile = _log_norm_profile(structure, lam, horizon)
    early = profile[horizon // 4 + 1 : horizon // 2 + 1].max()
    late = profile[horizon // 2 + 1 :].max()
    window_growth = math.exp(late - early)
    growth_vs_n5 = math.exp(profile[5:].max() - profile[5]) if horizon >= 5 else 1.0
    p = structure_period(report)

    if (
        window_growth > settings.JORDAN_GROWTH_FACTOR
        or growth_vs_n5 > settings.JORDAN_N5_FACTOR
    ):
        diagnosis = Diagnosis.NOT_ALMOST_SEMISIMPLE
    elif p > 1:
        diagnosis = Diagnosis.ALMOST_SEMISIMPLE
    elif len(report.components) == 1:
        diagnosis = Diagnosis.PRIMITIVE
    else:
        diagnosis = Diagnosis.SEMISIMPLE
    logger.info(f"diagnosis {diagnosis.value} (period {p}, window growth {window_growth:.4f})")
    return SemisimplicityReport(diagnosis, p, lam, window_growth, growth_vs_n5, horizon, tolerance)


def _limit_matrix(
    structure: GraphStructure, lam: float, p: int, tolerance: float, iteration_cap: int
) -> np.ndarray:
    step = np.linalg.matrix_power(structure.float_matrix, p) / lam**p
    current = step
    iterations = 1
    while True:
        squared = current @ current
        iterations *= 2
        if not np.all(np.isfinite(squared)):
            break
        diff = np.max(np.abs(squared - current))
        scale = max(1.0, float(np.max(np.abs(squared))))
        current = squared
        if diff <= tolerance * scale:
            logger.debug(f"M∞ converged after {iterations} powers")
            return current
        if iterations >= iteration_cap:
            break
    raise SpectralException("not almost semisimple at tolerance", {"tolerance": tolerance})


def pf_vectors(
    structure: GraphStructure,
    lam: float,
    p: int = 1,
    tolerance: Optional[float] = None,
    iteration_cap: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (ρ, u, M∞) with ρ = M∞·1 and u = e₀ᵀM∞."""
    tolerance = settings.SPECTRAL_TOLERANCE if tolerance is None else tolerance
    iteration_cap = settings.ITERATION_CAP if iteration_cap is None else iteration_cap
    limit = _limit_matrix(structure, lam, p, tolerance, iteration_cap)
    floor = 1e-14 * max(1.0, float(np.abs(limit).max()))
    limit = np.where(np.abs(limit) < floor, 0.0, limit)
    rho = limit.sum(axis=1)
    u = limit[structure.initial_vertex].copy()
    return rho, u, limit


def analyze(structure: GraphStructure, tolerance: Optional[float] = None) -> SpectralData:
    """Full spectral pass; vectors are None when the structure is not almost semisimple."""
    tolerance = settings.SPECTRAL_TOLERANCE if tolerance is None else tolerance
    report = components(structure, tolerance)
    if report.acyclic:
        raise SpectralException("finite language, λ undefined")
    diagnosis = semisimplicity_report(structure, report, tolerance)
    rho = u = limit = None
    if diagnosis.almost_semisimple:
        rho, u, limit = pf_vectors(structure, report.growth_rate, diagnosis.period, tolerance)
    return SpectralData(
        report.growth_rate, rho, u, limit, diagnosis.period, diagnosis, report, tolerance
    )


def require_vectors(data: SpectralData) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if data.rho is None or data.u is None or data.limit_matrix is None:
        raise SpectralException(f"structure is {data.label}; Perron-Frobenius vectors undefined")
    return data.rho, data.u, data.limit_matrix


def eigen_residuals(structure: GraphStructure, data: SpectralData) -> Tuple[float, float]:
    """max |Mᵖρ - λᵖρ| and max |uᵀMᵖ - λᵖuᵀ|, relative to the vector sizes."""
    rho, u, _ = require_vectors(data)
    step = np.linalg.matrix_power(structure.float_matrix, data.period)
    scale = data.lam**data.period
    right = np.max(np.abs(step @ rho - scale * rho)) / max(1.0, rho.max() * scale)
    left = np.max(np.abs(u @ step - scale * u)) / max(1.0, u.max() * scale)
    return float(right), float(left)
