"""Empirical CLT harness: drift and variance estimates, normalized values,
KS distances, the zero-variance probe and the full experiment pipeline.
"""

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy import stats

from coarse_clt.config import settings
from coarse_clt.core.documents import load_graph_structure
from coarse_clt.core.graph import GraphStructure, Path, induced_substructure, iter_paths
from coarse_clt.core.spectral import SpectralData, analyze
from coarse_clt.exceptions import (
    ActionException,
    BudgetExceededException,
    CoarseCltException,
    ExperimentException,
    GroupException,
    SamplingException,
)
from coarse_clt.schemas.experiment import ExperimentConfig
from coarse_clt.schemas.reports import (
    CltReport,
    ComponentRun,
    DriftVariance,
    ExperimentReport,
    TranslationAgreement,
    Verdict,
    ZeroVarianceReport,
)
from coarse_clt.services.actions import IsometricAction, build_action
from coarse_clt.services.sampler import (
    letter_matrix,
    letters_per_path,
    map_prefix_stratified,
    map_sphere_blocks,
    sphere_matrix,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

SampleRow = Tuple[int, int, str, float]

GROMOV_TAIL_FACTOR = 0.5


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Re-raise library errors as ExperimentException annotated with the stage."""
    try:
        yield
    except ExperimentException:
        raise
    except CoarseCltException as e:
        raise ExperimentException(name, e.detail) from e


def normalized_value(path: Path, action: IsometricAction, drift: float) -> float:
    """φ(g) = (d(o, go) - ℓ‖g‖)/√‖g‖."""
    word = path.word()
    if not word:
        raise ActionException("normalized value is undefined for the empty path")
    n = len(word)
    return (action.displacement(word) - drift * n) / math.sqrt(n)


def is_geodesic_structure(structure: GraphStructure, maxlen: int, budget: Optional[int] = None) -> bool:
    """Every path of length ≤ maxlen from v₀ spells a geodesic word."""
    group = structure.group
    if not group.has_word_problem:
        return False
    budget = settings.BUDGET if budget is None else budget
    checked = 0
    for n in range(1, maxlen + 1):
        for path in iter_paths(structure, structure.initial_vertex, n):
            checked += 1
            if checked > budget:
                raise BudgetExceededException("geodesic check", budget)
            word = path.word()
            if group.word_length(word) != len(word):
                logger.info(f"path {path.edge_indices} is not geodesic")
                return False
    return True


def observe(
    structure: GraphStructure,
    action: IsometricAction,
    edges: np.ndarray,
    observable: str = "displacement",
    geodesic: bool = False,
) -> np.ndarray:
    letters = letter_matrix(structure, edges)
    if observable == "translation":
        return action.translation_lengths(letters, geodesic)
    return action.displacements(letters, geodesic)


def summarize(values: np.ndarray, n: int, mode: str) -> DriftVariance:
    """ℓ̂ = mean/n and σ̂² = var/n with delta-method standard errors."""
    m = len(values)
    if m == 0:
        raise SamplingException("no samples to summarize")
    mean = float(np.mean(values))
    centered = values - mean
    if mode == "exact":
        var = float(np.mean(centered**2))
        drift_se = variance_se = 0.0
    else:
        var = float(np.var(values, ddof=1)) if m > 1 else 0.0
        fourth = float(np.mean(centered**4))
        drift_se = math.sqrt(var / m) / n
        variance_se = math.sqrt(max(fourth - var**2, 0.0) / m) / n
    return DriftVariance(
        n=n,
        samples=m,
        mode=mode,
        mean=mean,
        drift=mean / n,
        variance=var / n,
        drift_se=drift_se,
        variance_se=variance_se,
    )


@dataclass(frozen=True)
class BlockObservations:
    """Per-sample values of one block; the block's edges are dropped after observing."""

    displacement: np.ndarray
    middle: Optional[np.ndarray] = None
    translation: Optional[np.ndarray] = None
    products: Optional[np.ndarray] = None


def map_sphere(
    structure: GraphStructure,
    n: int,
    samples: int,
    seed: int,
    reduce: Callable[[np.ndarray], T],
    mode: str = "mc",
    stream: int = 0,
    jobs: Optional[int] = None,
    data: Optional[SpectralData] = None,
) -> List[T]:
    """reduce over the sampled sphere one block of edge rows at a time.

    Exact mode walks the enumerated sphere in chunks of SAMPLE_BLOCK_SIZE
    rows; Monte Carlo mode stratifies by prefix when the period exceeds 1.
    """
    if mode == "exact":
        edges = sphere_matrix(structure, n)
        size = settings.SAMPLE_BLOCK_SIZE
        return [reduce(edges[i : i + size]) for i in range(0, len(edges), size)]
    if samples < settings.MIN_MC_SAMPLES:
        raise SamplingException(
            f"Monte Carlo needs at least {settings.MIN_MC_SAMPLES} samples, got {samples}"
        )
    if data is not None and data.period > 1:
        return map_prefix_stratified(structure, data, n, samples, seed, reduce, stream, jobs)
    return map_sphere_blocks(structure, n, samples, seed, reduce, stream, jobs)


def _trim_width(n: int) -> Optional[int]:
    """⌊ln n⌋ edges cut from each end, None when nothing would be left."""
    trim = int(math.floor(math.log(n)))
    return None if n - 2 * trim < 1 else trim


def _return_products(
    action: IsometricAction, letters: np.ndarray, geodesic: bool
) -> Optional[np.ndarray]:
    try:
        return action.return_gromov_products(letters, geodesic)
    except (ActionException, GroupException) as e:
        logger.debug(f"Gromov products unavailable: {e.detail}")
        return None


def sphere_observer(
    structure: GraphStructure,
    action: IsometricAction,
    n: int,
    observables: Sequence[str],
    geodesic: bool,
) -> Callable[[np.ndarray], BlockObservations]:
    """Everything run_experiment needs from a block of length-n paths."""
    trim = _trim_width(n)

    def observe_block(edges: np.ndarray) -> BlockObservations:
        with stage("observe"):
            letters = letter_matrix(structure, edges)
            middle = None
            if trim is not None:
                middle = observe(structure, action, edges[:, trim : n - trim], "displacement", geodesic)
            translation = None
            if "translation" in observables:
                translation = action.translation_lengths(letters, geodesic)
            return BlockObservations(
                displacement=action.displacements(letters, geodesic),
                middle=middle,
                translation=translation,
                products=_return_products(action, letters, geodesic),
            )

    return observe_block


def _joined(blocks: Sequence[BlockObservations], name: str) -> Optional[np.ndarray]:
    parts = [getattr(block, name) for block in blocks]
    if any(part is None for part in parts):
        return None
    return np.concatenate(parts)


def estimate_drift_variance(
    structure: GraphStructure,
    action: IsometricAction,
    n: int,
    samples: int,
    seed: int,
    mode: str = "mc",
    jobs: Optional[int] = None,
    geodesic: bool = False,
) -> DriftVariance:
    """(ℓ̂, σ̂²) from uniform sphere samples, or from the whole sphere in exact mode."""
    if n < 2:
        raise SamplingException(f"drift estimates need n ≥ 2, got {n}")
    values = map_sphere(
        structure, n, samples, seed,
        lambda edges: observe(structure, action, edges, "displacement", geodesic),
        mode, jobs=jobs,
    )
    if not values:
        raise SamplingException(f"empty sphere of radius {n}")
    return summarize(np.concatenate(values), letters_per_path(structure, n), mode)


def exact_regression(
    structure: GraphStructure,
    action: IsometricAction,
    lengths: Sequence[int],
    geodesic: bool = False,
) -> Tuple[float, float]:
    """Slopes of the exact sphere mean and variance against n."""
    means, variances = [], []
    for n in lengths:
        values = observe(structure, action, sphere_matrix(structure, n), "displacement", geodesic)
        means.append(float(np.mean(values)))
        variances.append(float(np.var(values)))
    drift = float(np.polyfit(lengths, means, 1)[0])
    variance = float(np.polyfit(lengths, variances, 1)[0])
    return drift, variance


def ks_statistic(values: Sequence[float], sigma: float, tolerance: Optional[float] = None) -> float:
    """Sup distance between the empirical CDF and N(0, σ²), or δ₀ when σ = 0."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise SamplingException("KS statistic needs at least one value")
    if sigma < 0.0:
        raise SamplingException(f"σ must be nonnegative, got {sigma}")
    if sigma == 0.0:
        tolerance = settings.ZERO_TOLERANCE if tolerance is None else tolerance
        below = float(np.mean(values < -tolerance))
        above = float(np.mean(values > tolerance))
        return max(below, above)
    return float(stats.kstest(values, stats.norm(loc=0.0, scale=sigma).cdf).statistic)


def zero_variance_probe(
    structure: GraphStructure,
    action: IsometricAction,
    maxlen: Optional[int] = None,
    geodesic: bool = False,
    tolerance: Optional[float] = None,
) -> ZeroVarianceReport:
    """Maximal defect D(n) = max over Sₙ of |d(o, go) - ℓ̂‖g‖| for n ≤ maxlen.

    ℓ̂ comes from the exact sphere at maxlen. The verdict is zero when
    D(maxlen) and D(maxlen - 2) agree; otherwise the witness is the path of
    largest defect at maxlen, ties going to the smallest displacement and
    then to enumeration order.
    """
    maxlen = settings.PROBE_MAXLEN if maxlen is None else maxlen
    tolerance = settings.ZERO_TOLERANCE if tolerance is None else tolerance
    if maxlen < 3:
        raise SamplingException(f"probe needs maxlen ≥ 3, got {maxlen}")
    spheres = [sphere_matrix(structure, n) for n in range(1, maxlen + 1)]
    last = spheres[-1]
    if len(last) == 0:
        raise SamplingException(f"empty sphere of radius {maxlen}")
    values = [observe(structure, action, edges, "displacement", geodesic) for edges in spheres]
    lengths = [letter_matrix(structure, edges).shape[1] for edges in spheres]
    drift = float(np.mean(values[-1])) / lengths[-1]

    defects: List[float] = []
    for edges, obs, length in zip(spheres, values, lengths):
        defects.append(float(np.max(np.abs(obs - drift * length))) if len(edges) else 0.0)
    scale = max(1.0, defects[-1])
    plateau = abs(defects[-1] - defects[-3]) <= tolerance * scale
    verdict = "zero" if plateau else "positive"

    final = np.abs(values[-1] - drift * lengths[-1])
    tied = np.flatnonzero(final >= defects[-1] - tolerance * scale)
    best = tied[np.lexsort((tied, values[-1][tied]))[0]]
    witness_letters = letter_matrix(structure, last[best : best + 1])[0]
    witness = " ".join(structure.group.decode(witness_letters))

    translation_defect = None
    if plateau and structure.group.has_word_problem:
        try:
            letters = letter_matrix(structure, last)
            taus = action.translation_lengths(letters, geodesic)
            stable = np.array(
                [structure.group.stable_length(structure.group.decode(row)) for row in letters],
                dtype=float,
            )
            translation_defect = float(np.max(np.abs(taus - drift * stable)))
        except (ActionException, GroupException) as e:
            logger.info(f"translation defect unavailable: {e.detail}")

    logger.info(f"zero-variance probe: D={defects[-3]:.4g}→{defects[-1]:.4g}, verdict {verdict}")
    return ZeroVarianceReport(
        verdict=verdict,
        maxlen=maxlen,
        drift=drift,
        defects=defects,
        plateau=plateau,
        certified_range=[1, maxlen],
        max_defect=defects[-1],
        witness=witness,
        witness_defect=float(final[best]),
        translation_defect=translation_defect,
    )


def variance_verdict(summary: DriftVariance, probe: Optional[ZeroVarianceReport]) -> Verdict:
    """Combine the plateau probe with the variance estimate; disagreement is indeterminate."""
    small = summary.variance <= max(3.0 * summary.variance_se, settings.ZERO_TOLERANCE)
    if probe is None:
        return "indeterminate" if small else "positive"
    if probe.verdict == "zero":
        return "zero" if small else "indeterminate"
    return "indeterminate" if small else "positive"


def _normalized(values: np.ndarray, drift: float, n: int) -> np.ndarray:
    return (values - drift * n) / math.sqrt(n)


def _ks_for(normalized: np.ndarray, variance: float, verdict: Verdict, drift: float, n: int) -> float:
    if verdict == "zero" or variance <= 0.0:
        tolerance = settings.ZERO_TOLERANCE * max(1.0, abs(drift) * math.sqrt(n))
        return ks_statistic(normalized, 0.0, tolerance)
    return ks_statistic(normalized, math.sqrt(variance))


def _log_trim_shift(
    structure: GraphStructure,
    n: int,
    middle: Optional[np.ndarray],
    normalized: np.ndarray,
    drift: float,
) -> Tuple[Optional[float], Optional[float]]:
    """Change of φ when ⌊ln n⌋ edges are cut from both ends of every path."""
    trim = _trim_width(n)
    if middle is None or trim is None:
        return None, None
    middle_length = letters_per_path(structure, n - 2 * trim)
    shift = np.abs(_normalized(middle, drift, middle_length) - normalized)
    return float(np.mean(shift)), float(np.max(shift))


def _gromov_tail(products: Optional[np.ndarray], length: int) -> Optional[float]:
    if products is None:
        return None
    return float(np.mean(products > GROMOV_TAIL_FACTOR * math.sqrt(length)))


def _agrees(a: float, b: float, se_a: float, se_b: float) -> bool:
    return abs(a - b) <= max(2.0 * math.sqrt(se_a**2 + se_b**2), 1e-9)


def _component_runs(
    structure: GraphStructure,
    data: SpectralData,
    action: IsometricAction,
    config: ExperimentConfig,
    n: int,
    seed: int,
    jobs: Optional[int],
    geodesic: bool,
) -> List[ComponentRun]:
    summaries = []
    for ci, component in enumerate(data.components.maximal_components):
        vertices = sorted(component.vertices)
        with stage("components"):
            sub = induced_substructure(structure, vertices, vertices[0])
            blocks = map_sphere(
                sub, n, config.samples, seed,
                lambda edges: observe(sub, action, edges, "displacement", geodesic),
                config.mode, ci + 1, jobs,
            )
            if not blocks:
                raise SamplingException(f"empty sphere of radius {n} in component {vertices}")
            values = np.concatenate(blocks)
            summaries.append((vertices, ci + 1, summarize(values, letters_per_path(sub, n), config.mode)))
    if not summaries:
        return []
    _, _, reference = summaries[0]
    runs = []
    for vertices, stream, s in summaries:
        run = ComponentRun(
            component=vertices,
            stream=stream,
            drift=s.drift,
            variance=s.variance,
            drift_se=s.drift_se,
            variance_se=s.variance_se,
            drift_agrees=_agrees(s.drift, reference.drift, s.drift_se, reference.drift_se),
            variance_agrees=_agrees(
                s.variance, reference.variance, s.variance_se, reference.variance_se
            ),
        )
        if not (run.drift_agrees and run.variance_agrees):
            logger.warning(f"component {vertices} disagrees with component {summaries[0][0]}")
        runs.append(run)
    return runs


def load_experiment_structure(config: ExperimentConfig, base_dir: Optional[FilePath] = None) -> GraphStructure:
    source = config.automaton
    if isinstance(source, str):
        path = FilePath(source)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return load_graph_structure(path)
    return load_graph_structure(source)


def run_experiment(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    base_dir: Optional[FilePath] = None,
    sample_rows: Optional[List[SampleRow]] = None,
) -> ExperimentReport:
    """Spectral pass, probe, sampling and statistics for every radius and observable."""
    seed = config.seed if seed is None else seed
    if seed is None:
        raise ExperimentException("config", "a seed is required")

    with stage("load"):
        structure = load_experiment_structure(config, base_dir)
    with stage("spectral"):
        data = analyze(structure)
        if not data.report.almost_semisimple:
            raise ExperimentException("spectral", f"structure is {data.label}")
    with stage("action"):
        action = build_action(config.action, structure.group)

    maxlen = config.probe_maxlen or settings.PROBE_MAXLEN
    with stage("observe"):
        try:
            geodesic = is_geodesic_structure(structure, maxlen)
        except BudgetExceededException:
            geodesic = False
    probe = None
    with stage("probe"):
        try:
            probe = zero_variance_probe(structure, action, maxlen, geodesic)
        except BudgetExceededException as e:
            logger.warning(f"zero-variance probe skipped: {e.detail}")

    runs: List[CltReport] = []
    for n in config.lengths:
        observer = sphere_observer(structure, action, n, config.observables, geodesic)
        with stage("sample"):
            blocks = map_sphere(structure, n, config.samples, seed, observer, config.mode, 0, jobs, data)
        if not blocks:
            raise ExperimentException("sample", f"empty sphere of radius {n}")
        with stage("observe"):
            length = letters_per_path(structure, n)
            displacement = _joined(blocks, "displacement")
            products = _joined(blocks, "products")
            summary = summarize(displacement, length, config.mode)
            verdict = variance_verdict(summary, probe)
            normalized = _normalized(displacement, summary.drift, length)
            ks = _ks_for(normalized, summary.variance, verdict, summary.drift, length)
            shift_mean, shift_max = _log_trim_shift(
                structure, n, _joined(blocks, "middle"), normalized, summary.drift
            )
            tail = _gromov_tail(products, length)
        components = None
        if config.per_component:
            components = _component_runs(structure, data, action, config, n, seed, jobs, geodesic)

        base = dict(
            n=n,
            samples=len(displacement),
            mode=config.mode,
            seed=seed,
            period=data.period,
            verdict=verdict,
            max_defect=probe.max_defect if probe else None,
        )
        if "displacement" in config.observables:
            runs.append(
                CltReport(
                    observable="displacement",
                    drift=summary.drift,
                    variance=summary.variance,
                    drift_se=summary.drift_se,
                    variance_se=summary.variance_se,
                    ks=ks,
                    gromov_tail_fraction=tail,
                    log_trim_shift_mean=shift_mean,
                    log_trim_shift_max=shift_max,
                    components=components,
                    **base,
                )
            )
            _collect(sample_rows, length, "displacement", normalized)

        if "translation" in config.observables:
            with stage("observe"):
                taus = _joined(blocks, "translation")
                tau_summary = summarize(taus, length, config.mode)
                tau_normalized = _normalized(taus, summary.drift, length)
                tau_ks = _ks_for(tau_normalized, summary.variance, verdict, summary.drift, length)
                proxy_gap = None
                if products is not None:
                    proxy_gap = float(np.max(np.abs(taus - (displacement - 2.0 * products))))
            runs.append(
                CltReport(
                    observable="translation",
                    drift=tau_summary.drift,
                    variance=tau_summary.variance,
                    drift_se=tau_summary.drift_se,
                    variance_se=tau_summary.variance_se,
                    ks=tau_ks,
                    translation=TranslationAgreement(
                        drift_gap=abs(tau_summary.drift - summary.drift),
                        variance_gap=abs(tau_summary.variance - summary.variance),
                        ks_against_displacement=tau_ks,
                        proxy_gap_max=proxy_gap,
                    ),
                    **base,
                )
            )
            _collect(sample_rows, length, "translation", tau_normalized)
        logger.info(
            f"n={n}: ℓ̂={summary.drift:.6f} σ̂²={summary.variance:.6f} KS={ks:.4f} ({verdict})"
        )

    label = config.automaton if isinstance(config.automaton, str) else "inline"
    return ExperimentReport(
        automaton=structure.name or label,
        action=action.describe(),
        seed=seed,
        growth_rate=data.lam,
        diagnosis=data.label,
        period=data.period,
        probe=probe,
        runs=runs,
    )


def _collect(rows: Optional[List[SampleRow]], length: int, observable: str, values: np.ndarray) -> None:
    if rows is None:
        return
    rows.extend((i, length, observable, float(v)) for i, v in enumerate(values))
