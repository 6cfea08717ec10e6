from __future__ import annotations

import logging
import math
from time import perf_counter
from typing import Callable, Dict, Tuple

import numpy as np

from .errors import OptimizationError, ValidationError
from .logic import check_pair, exact_common_neighbors
from .mechanisms import flip_probability, laplace_sample, phi
from .models import (
    BipartiteGraph,
    BudgetPlan,
    DeviationBound,
    EstimateReport,
    NoisyNeighborSet,
    PrivacyBudget,
    PrivacyLedger,
    QueryPair,
    RandomSource,
    Transcript,
)
from .optimizer import optimize_plan
from .protocol import (
    LAYER_STREAM,
    curator_combine,
    curator_degree_correction,
    curator_naive,
    curator_oner,
    download_noisy_edges,
    perturb_neighbors,
    report_degrees,
    report_estimator,
    single_source_report,
)

logger = logging.getLogger(__name__)

DEGREE_FRACTION = 0.05


def _check_fraction(eps1_fraction: float) -> None:
    if not 0.0 < eps1_fraction < 1.0:
        raise ValidationError(f"eps1 fraction must lie in (0, 1), got {eps1_fraction}")


class _Clock:
    """Splits wall time between vertex-side and curator-side work."""

    def __init__(self):
        self.vertex = 0.0
        self.curator = 0.0
        self._mark = perf_counter()

    def vertex_done(self) -> None:
        now = perf_counter()
        self.vertex += now - self._mark
        self._mark = now

    def curator_done(self) -> None:
        now = perf_counter()
        self.curator += now - self._mark
        self._mark = now


def _perturb_pair(
    g: BipartiteGraph,
    q: QueryPair,
    eps: float,
    rng: RandomSource,
    transcript: Transcript,
    ledger: PrivacyLedger,
    round: int,
) -> Tuple[NoisyNeighborSet, NoisyNeighborSet]:
    noisy_u = perturb_neighbors(g, q.u, eps, rng.at(q.u.index, round), transcript, round)
    noisy_w = perturb_neighbors(g, q.w, eps, rng.at(q.w.index, round), transcript, round)
    # u and w perturb disjoint neighbor lists.
    ledger.spend(round, "randomized_response", eps, "parallel", party="u")
    ledger.spend(round, "randomized_response", eps, "parallel", party="w")
    return noisy_u, noisy_w


def naive_estimate(g: BipartiteGraph, q: QueryPair, eps: float, rng: RandomSource) -> EstimateReport:
    """Common neighbors counted directly on the noisy graph; biased upwards on sparse graphs."""
    check_pair(g, q)
    budget = PrivacyBudget.of(eps).epsilon
    transcript, ledger, clock = Transcript(), PrivacyLedger(), _Clock()

    noisy_u, noisy_w = _perturb_pair(g, q, budget, rng, transcript, ledger, round=1)
    clock.vertex_done()
    value = curator_naive(noisy_u, noisy_w)
    clock.curator_done()

    return EstimateReport(
        algorithm="naive",
        value=value,
        ledger=ledger,
        comm_bytes=transcript.total_bytes,
        rounds=1,
        transcript=transcript,
        vertex_seconds=clock.vertex,
        curator_seconds=clock.curator,
    )


def oner_estimate(g: BipartiteGraph, q: QueryPair, eps: float, rng: RandomSource) -> EstimateReport:
    check_pair(g, q)
    budget = PrivacyBudget.of(eps).epsilon
    transcript, ledger, clock = Transcript(), PrivacyLedger(), _Clock()

    noisy_u, noisy_w = _perturb_pair(g, q, budget, rng, transcript, ledger, round=1)
    clock.vertex_done()
    value = curator_oner(noisy_u, noisy_w)
    clock.curator_done()

    return EstimateReport(
        algorithm="oner",
        value=value,
        ledger=ledger,
        comm_bytes=transcript.total_bytes,
        rounds=1,
        transcript=transcript,
        vertex_seconds=clock.vertex,
        curator_seconds=clock.curator,
    )


def oner_direct_sum(noisy_u: NoisyNeighborSet, noisy_w: NoisyNeighborSet) -> float:
    """Brute-force sum of phi(u, v) * phi(v, w) over every opposite-layer vertex."""
    p = flip_probability(noisy_u.epsilon_used)
    return float(np.sum(phi(noisy_u.bits(), p) * phi(noisy_w.bits(), p)))


def single_source_estimate(
    g: BipartiteGraph,
    q: QueryPair,
    eps: float,
    rng: RandomSource,
    eps1_fraction: float = 0.5,
) -> EstimateReport:
    """
    Two rounds: w publishes its noisy row under eps1; u downloads it, sums phi
    over its own true neighbors and releases the sum with Laplace noise under
    eps2 = eps - eps1.
    """
    check_pair(g, q)
    _check_fraction(eps1_fraction)
    total = PrivacyBudget.of(eps).epsilon
    eps1 = eps1_fraction * total
    plan = BudgetPlan(eps0=0.0, eps1=eps1, eps2=total - eps1, alpha=1.0)
    transcript, ledger, clock = Transcript(), PrivacyLedger(), _Clock()

    noisy_w = perturb_neighbors(g, q.w, plan.eps1, rng.at(q.w.index, 1), transcript, 1)
    ledger.spend(1, "randomized_response", plan.eps1, party="w")
    clock.vertex_done()

    download_noisy_edges(transcript, noisy_w, 2)
    clock.curator_done()

    value = single_source_report(g, q.u, noisy_w, plan.eps2, rng.at(q.u.index, 2))
    report_estimator(transcript, 2)
    ledger.spend(2, "laplace", plan.eps2, party="u")
    clock.vertex_done()

    return EstimateReport(
        algorithm="ss",
        value=value,
        ledger=ledger,
        comm_bytes=transcript.total_bytes,
        rounds=2,
        plan=plan,
        transcript=transcript,
        vertex_seconds=clock.vertex,
        curator_seconds=clock.curator,
    )


def _double_source_rounds(
    g: BipartiteGraph,
    q: QueryPair,
    plan: BudgetPlan,
    rng: RandomSource,
    transcript: Transcript,
    ledger: PrivacyLedger,
    clock: _Clock,
    first_round: int,
) -> float:
    noisy_u, noisy_w = _perturb_pair(g, q, plan.eps1, rng, transcript, ledger, first_round)
    clock.vertex_done()

    second = first_round + 1
    download_noisy_edges(transcript, noisy_w, second)
    download_noisy_edges(transcript, noisy_u, second)
    clock.curator_done()

    f_u = single_source_report(g, q.u, noisy_w, plan.eps2, rng.at(q.u.index, second))
    f_w = single_source_report(g, q.w, noisy_u, plan.eps2, rng.at(q.w.index, second))
    report_estimator(transcript, second)
    report_estimator(transcript, second)
    # f_u reads only u's list, f_w only w's.
    ledger.spend(second, "laplace", plan.eps2, "parallel", party="u")
    ledger.spend(second, "laplace", plan.eps2, "parallel", party="w")
    clock.vertex_done()

    value = curator_combine(f_u, f_w, plan.alpha)
    clock.curator_done()
    logger.debug("double source: f_u=%.4f f_w=%.4f alpha=%.4f", f_u, f_w, plan.alpha)
    return value


def _fallback_plan(total: float, eps0: float) -> BudgetPlan:
    eps1 = 0.5 * (total - eps0)
    return BudgetPlan(eps0=eps0, eps1=eps1, eps2=total - eps0 - eps1, alpha=0.5, solver="fallback")


def double_source_estimate(g: BipartiteGraph, q: QueryPair, eps: float, rng: RandomSource) -> EstimateReport:
    """
    Three rounds. Round 1 spends eps0 = 0.05 eps on noisy degrees from every
    vertex of the query layer; the curator corrects the query vertices'
    degrees and picks (eps1, alpha). Rounds 2 and 3 build both single-source
    estimators and return their weighted average.
    """
    check_pair(g, q)
    total = PrivacyBudget.of(eps).epsilon
    eps0 = DEGREE_FRACTION * total
    transcript, ledger, clock = Transcript(), PrivacyLedger(), _Clock()

    reports = report_degrees(g, q.layer, eps0, rng.at(LAYER_STREAM, 1), transcript, 1)
    ledger.spend(1, "laplace_degree", eps0, "parallel", party="layer")
    clock.vertex_done()

    d_u, d_w, _ = curator_degree_correction(reports, q.u, q.w)
    fallback = False
    try:
        plan = optimize_plan(d_u, d_w, total, eps0)
    except (OptimizationError, ValidationError) as exc:
        logger.warning("budget optimisation failed (%s); using an even split", exc)
        plan, fallback = _fallback_plan(total, eps0), True
    clock.curator_done()

    value = _double_source_rounds(g, q, plan, rng, transcript, ledger, clock, first_round=2)
    return EstimateReport(
        algorithm="ds",
        value=value,
        ledger=ledger,
        comm_bytes=transcript.total_bytes,
        rounds=3,
        plan=plan,
        transcript=transcript,
        fallback=fallback,
        vertex_seconds=clock.vertex,
        curator_seconds=clock.curator,
    )


def double_source_basic_estimate(
    g: BipartiteGraph,
    q: QueryPair,
    eps: float,
    rng: RandomSource,
    eps1_fraction: float = 0.5,
) -> EstimateReport:
    """Plain average of the two single-source estimators; no degree round."""
    check_pair(g, q)
    _check_fraction(eps1_fraction)
    total = PrivacyBudget.of(eps).epsilon
    eps1 = eps1_fraction * total
    plan = BudgetPlan(eps0=0.0, eps1=eps1, eps2=total - eps1, alpha=0.5)
    transcript, ledger, clock = Transcript(), PrivacyLedger(), _Clock()

    value = _double_source_rounds(g, q, plan, rng, transcript, ledger, clock, first_round=1)
    return EstimateReport(
        algorithm="ds_basic",
        value=value,
        ledger=ledger,
        comm_bytes=transcript.total_bytes,
        rounds=2,
        plan=plan,
        transcript=transcript,
        vertex_seconds=clock.vertex,
        curator_seconds=clock.curator,
    )


def double_source_public_estimate(g: BipartiteGraph, q: QueryPair, eps: float, rng: RandomSource) -> EstimateReport:
    """Double source with degrees treated as public: the whole budget goes to rounds 1-2."""
    check_pair(g, q)
    total = PrivacyBudget.of(eps).epsilon
    transcript, ledger, clock = Transcript(), PrivacyLedger(), _Clock()

    d_u, d_w = max(g.degree(q.u), 1), max(g.degree(q.w), 1)
    fallback = False
    try:
        plan = optimize_plan(float(d_u), float(d_w), total, 0.0)
    except (OptimizationError, ValidationError) as exc:
        logger.warning("budget optimisation failed (%s); using an even split", exc)
        plan, fallback = _fallback_plan(total, 0.0), True
    clock.curator_done()

    value = _double_source_rounds(g, q, plan, rng, transcript, ledger, clock, first_round=1)
    return EstimateReport(
        algorithm="ds_public",
        value=value,
        ledger=ledger,
        comm_bytes=transcript.total_bytes,
        rounds=2,
        plan=plan,
        transcript=transcript,
        fallback=fallback,
        vertex_seconds=clock.vertex,
        curator_seconds=clock.curator,
    )


def central_dp_estimate(g: BipartiteGraph, q: QueryPair, eps: float, rng: RandomSource) -> EstimateReport:
    """Baseline in the central model: exact count + Lap(1/eps), sensitivity 1."""
    check_pair(g, q)
    total = PrivacyBudget.of(eps).epsilon
    ledger = PrivacyLedger(model="central")
    clock = _Clock()

    value = exact_common_neighbors(g, q) + laplace_sample(1.0 / total, rng.at(q.u.index, 1))
    ledger.spend(1, "central_laplace", total)
    clock.curator_done()

    return EstimateReport(
        algorithm="central",
        value=value,
        ledger=ledger,
        comm_bytes=0,
        rounds=1,
        curator_seconds=clock.curator,
    )


def chebyshev_bound(variance: float, k: float) -> DeviationBound:
    """P(|estimate - C2| >= k * sqrt(variance)) <= 1 / k^2 for an unbiased estimate."""
    if variance < 0:
        raise ValidationError(f"variance must be >= 0, got {variance}")
    if not k > 0:
        raise ValidationError(f"k must be > 0, got {k}")
    return DeviationBound(radius=k * math.sqrt(variance), probability_bound=1.0 / k ** 2)


Estimator = Callable[..., EstimateReport]

ESTIMATORS: Dict[str, Estimator] = {
    "naive": naive_estimate,
    "oner": oner_estimate,
    "ss": single_source_estimate,
    "ds": double_source_estimate,
    "ds_basic": double_source_basic_estimate,
    "ds_public": double_source_public_estimate,
    "central": central_dp_estimate,
}

_TAKES_FRACTION = ("ss", "ds_basic")


def run_estimator(
    algorithm: str,
    g: BipartiteGraph,
    q: QueryPair,
    eps: float,
    rng: RandomSource,
    eps1_fraction: float = 0.5,
) -> EstimateReport:
    try:
        estimator = ESTIMATORS[algorithm]
    except KeyError:
        raise ValidationError(f"unknown algorithm {algorithm!r}") from None
    if algorithm in _TAKES_FRACTION:
        return estimator(g, q, eps, rng, eps1_fraction=eps1_fraction)
    return estimator(g, q, eps, rng)
