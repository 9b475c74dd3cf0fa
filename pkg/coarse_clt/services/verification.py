"""Desk-scale oracle suite behind `coarse-clt verify --fixtures`."""

import logging
import math
from typing import Callable, List, Tuple

import numpy as np

from coarse_clt.core.graph import count_paths
from coarse_clt.core.groups import CommutationGraph, FreeGroup
from coarse_clt.core.markov import (
    parry_chain,
    return_time_identities,
    stationarity_residual,
    tv_counting_vs_markov,
)
from coarse_clt.core.spectral import Diagnosis, analyze, semisimplicity_report
from coarse_clt.exceptions import CoarseCltException
from coarse_clt.schemas.reports import CheckResult, VerificationReport
from coarse_clt.services import fixtures
from coarse_clt.services.actions import (
    SANOV_MATRICES,
    CayleyTreeAction,
    HyperplaneCountAction,
    MatrixH2Action,
)
from coarse_clt.services.clt_harness import exact_regression, zero_variance_probe
from coarse_clt.services.combings import (
    fellow_traveler_constant,
    free_group_combing,
    raag_shortlex_combing,
)
from coarse_clt.services.sampler import sample_sphere_block

logger = logging.getLogger(__name__)

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0

Check = Callable[[], Tuple[bool, str]]


def check_sphere_counts() -> Tuple[bool, str]:
    f2 = free_group_combing(2)
    z2 = raag_shortlex_combing(CommutationGraph.from_pairs("ab", [("a", "b")]))
    dihedral = raag_shortlex_combing(CommutationGraph.from_pairs("ab", coxeter=True))
    bad = [n for n in range(1, 21) if count_paths(f2, 0, n) != 4 * 3 ** (n - 1)]
    bad += [n for n in range(1, 21) if count_paths(z2, 0, n) != 4 * n]
    bad += [n for n in range(1, 21) if count_paths(dihedral, 0, n) != 2]
    return not bad, "F2 4·3ⁿ⁻¹, Z² 4n, D∞ 2 for n ≤ 20" if not bad else f"mismatch at n={bad}"


def check_growth_rates() -> Tuple[bool, str]:
    gm = analyze(fixtures.golden_mean()).lam
    f2 = analyze(fixtures.free_rank_two()).lam
    ok = abs(gm - GOLDEN_RATIO) < 1e-9 and abs(f2 - 3.0) < 1e-9
    return ok, f"λ(golden mean)={gm:.12f}, λ(F2)={f2:.12f}"


def check_diagnoses() -> Tuple[bool, str]:
    jordan = semisimplicity_report(fixtures.jordan_block())
    cycle = semisimplicity_report(fixtures.two_cycle())
    ok = jordan.diagnosis == Diagnosis.NOT_ALMOST_SEMISIMPLE and cycle.label == "almost-semisimple(2)"
    return ok, f"jordan: {jordan.label}, two-cycle: {cycle.label}"


def check_return_times() -> Tuple[bool, str]:
    structure = fixtures.golden_mean()
    chain = parry_chain(structure, analyze(structure))
    identities = return_time_identities(chain, 0, 30)
    ok = identities.return_residual < 1e-6 and identities.max_visit_residual < 1e-6
    residual = stationarity_residual(chain)
    ok = ok and residual < 1e-9
    return ok, (
        f"|R - 1/π₀|={identities.return_residual:.2e}, "
        f"max |π_w - n_w/R|={identities.max_visit_residual:.2e}, stationarity {residual:.2e}"
    )


def check_total_variation() -> Tuple[bool, str]:
    gm = fixtures.golden_mean()
    gm_chain = parry_chain(gm, analyze(gm))
    tv = {n: tv_counting_vs_markov(gm, gm_chain, n).value for n in (4, 6, 8, 12)}
    f2 = fixtures.free_rank_two()
    f2_chain = parry_chain(f2, analyze(f2))
    f2_tv = max(tv_counting_vs_markov(f2, f2_chain, n).value for n in (4, 6, 8))
    ok = tv[8] < tv[6] and tv[12] < tv[4] and f2_tv < 1e-12
    shown = ", ".join(f"TV({n})={v:.4f}" for n, v in tv.items())
    return ok, f"golden mean {shown}; F2 max {f2_tv:.1e}"


def check_zero_variance() -> Tuple[bool, str]:
    f2 = fixtures.free_rank_two()
    tree = zero_variance_probe(f2, CayleyTreeAction(f2.group), 8, geodesic=True)
    count = zero_variance_probe(f2, HyperplaneCountAction(f2.group, "a"), 8, geodesic=True)
    ok = tree.verdict == "zero" and max(tree.defects) == 0.0 and count.verdict == "positive"
    return ok, f"tree {tree.verdict}, hyperplane(a) {count.verdict} witness '{count.witness}'"


def check_variance_regression() -> Tuple[bool, str]:
    f2 = fixtures.free_rank_two()
    action = HyperplaneCountAction(f2.group, "a")
    drift, variance = exact_regression(f2, action, range(4, 9), geodesic=True)
    ok = abs(drift - 0.5) < 1e-9 and abs(variance - 0.125) < 0.01
    return ok, f"exact slopes ℓ={drift:.6f}, σ²={variance:.6f}"


def check_matrix_action() -> Tuple[bool, str]:
    sanov = MatrixH2Action(FreeGroup("ab"), SANOV_MATRICES)
    displacement = sanov.displacement("a")
    parabolic = sanov.translation_length("a").value
    diagonal = MatrixH2Action(FreeGroup("ab"), {"a": [[2, 0], [0, "1/2"]], "b": [[1, 0], [0, 1]]})
    hyperbolic = diagonal.translation_length("a").value
    ok = (
        abs(displacement - math.acosh(3.0)) < 1e-12
        and parabolic == 0.0
        and abs(hyperbolic - 2.0 * math.log(2.0)) < 1e-12
    )
    return ok, f"d(a)={displacement:.6f}, τ(a)={parabolic}, τ(diag(2, 1/2))={hyperbolic:.6f}"


def check_fellow_travelers() -> Tuple[bool, str]:
    details = []
    ok = True
    f2 = free_group_combing(2)
    z2 = raag_shortlex_combing(CommutationGraph.from_pairs("ab", [("a", "b")]))
    for name, structure in (("F2", f2), ("Z2", z2)):
        short = fellow_traveler_constant(structure, ["1", "a"], 4).constant
        long = fellow_traveler_constant(structure, ["1", "a"], 6).constant
        ok = ok and short == long
        details.append(f"{name} K={long}")
    return ok, ", ".join(details)


def check_sampler_determinism() -> Tuple[bool, str]:
    f2 = fixtures.free_rank_two()
    single = sample_sphere_block(f2, 12, 10_000, seed=7, jobs=1)
    threaded = sample_sphere_block(f2, 12, 10_000, seed=7, jobs=2)
    return bool(np.array_equal(single, threaded)), "10000 paths of length 12, jobs 1 vs 2"


CHECKS: List[Tuple[str, Check]] = [
    ("sphere counts", check_sphere_counts),
    ("growth rates", check_growth_rates),
    ("semisimplicity diagnoses", check_diagnoses),
    ("return-time identities", check_return_times),
    ("counting vs Markov TV", check_total_variation),
    ("zero-variance probe", check_zero_variance),
    ("variance regression", check_variance_regression),
    ("matrix action", check_matrix_action),
    ("fellow travelers", check_fellow_travelers),
    ("sampler determinism", check_sampler_determinism),
]


def run_verification() -> VerificationReport:
    results = []
    for name, check in CHECKS:
        try:
            passed, detail = check()
        except CoarseCltException as e:
            passed, detail = False, f"raised {type(e).__name__}: {e.detail}"
        logger.info(f"{name}: {'pass' if passed else 'FAIL'} ({detail})")
        results.append(CheckResult(name=name, passed=passed, detail=detail))
    return VerificationReport(checks=results, passed=all(r.passed for r in results))
