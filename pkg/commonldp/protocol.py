"""
In-process simulation of the vertex/curator split.

Vertex-side routines may read the true graph; curator-side routines only ever
receive what was delivered through the transcript (noisy neighbor sets and
scalar reports).
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .mechanisms import flip_probability, laplace_sample, laplace_samples, randomized_response
from .models import (
    EDGE_BYTES,
    SCALAR_BYTES,
    BipartiteGraph,
    BudgetPlan,
    Direction,
    Layer,
    Message,
    MessageKind,
    NoisyNeighborSet,
    RandomSource,
    Transcript,
    VertexRef,
)

logger = logging.getLogger(__name__)

# Vertex key of the stream that carries a whole layer's degree noise.
LAYER_STREAM = 2**32 - 1


def record(transcript: Transcript, message: Message) -> Transcript:
    return transcript.record(message)


def upload_noisy_edges(transcript: Transcript, noisy: NoisyNeighborSet, round: int) -> None:
    record(transcript, Message(Direction.TO_CURATOR, MessageKind.NOISY_EDGES, EDGE_BYTES * len(noisy), round))


def download_noisy_edges(transcript: Transcript, noisy: NoisyNeighborSet, round: int) -> None:
    record(
        transcript,
        Message(Direction.TO_VERTEX, MessageKind.NOISY_GRAPH_DOWNLOAD, EDGE_BYTES * len(noisy), round),
    )


def report_estimator(transcript: Transcript, round: int) -> None:
    record(transcript, Message(Direction.TO_CURATOR, MessageKind.ESTIMATOR_REPORT, SCALAR_BYTES, round))


# -- vertex side -------------------------------------------------------------

def perturb_neighbors(
    g: BipartiteGraph,
    v: VertexRef,
    eps: float,
    rng: RandomSource,
    transcript: Transcript,
    round: int,
) -> NoisyNeighborSet:
    noisy = randomized_response(g, v, eps, rng)
    upload_noisy_edges(transcript, noisy, round)
    return noisy


def report_degrees(
    g: BipartiteGraph,
    layer: Layer,
    eps0: float,
    rng: RandomSource,
    transcript: Transcript,
    round: int,
) -> np.ndarray:
    """Every vertex of ``layer`` releases degree + Lap(1/eps0); degree sensitivity is 1."""
    degrees = g.degrees(layer)
    reports = degrees + laplace_samples(1.0 / eps0, rng, degrees.size)
    message = Message(Direction.TO_CURATOR, MessageKind.DEGREE_REPORT, SCALAR_BYTES, round)
    for _ in range(degrees.size):
        record(transcript, message)
    return reports


def single_source_statistic(g: BipartiteGraph, source: VertexRef, noisy_other: NoisyNeighborSet) -> float:
    """Sum of phi over the source's true neighbors against the other vertex's noisy row."""
    flip = flip_probability(noisy_other.epsilon_used)
    own = g.neighbors(source)
    s1 = np.intersect1d(own, noisy_other.members, assume_unique=True).size
    s2 = own.size - s1
    return (s1 * (1.0 - flip.p) - s2 * flip.p) / flip.scale


def single_source_sensitivity(noisy_other: NoisyNeighborSet) -> float:
    flip = flip_probability(noisy_other.epsilon_used)
    return (1.0 - flip.p) / flip.scale


def single_source_report(
    g: BipartiteGraph,
    source: VertexRef,
    noisy_other: NoisyNeighborSet,
    eps2: float,
    rng: RandomSource,
) -> float:
    scale = single_source_sensitivity(noisy_other) / eps2
    return single_source_statistic(g, source, noisy_other) + laplace_sample(scale, rng)


# -- curator side ------------------------------------------------------------

def _check_same_budget(noisy_u: NoisyNeighborSet, noisy_w: NoisyNeighborSet) -> None:
    if noisy_u.universe != noisy_w.universe:
        raise ValidationError("noisy rows cover different opposite layers")
    if noisy_u.epsilon_used != noisy_w.epsilon_used:
        raise ValidationError("noisy rows were perturbed under different budgets")


def curator_naive(noisy_u: NoisyNeighborSet, noisy_w: NoisyNeighborSet) -> float:
    _check_same_budget(noisy_u, noisy_w)
    return float(np.intersect1d(noisy_u.members, noisy_w.members, assume_unique=True).size)


def curator_oner(noisy_u: NoisyNeighborSet, noisy_w: NoisyNeighborSet) -> float:
    """Unbiased count from intersection N1 and union N2 sizes of the noisy rows."""
    _check_same_budget(noisy_u, noisy_w)
    p = flip_probability(noisy_u.epsilon_used).p
    n1 = np.intersect1d(noisy_u.members, noisy_w.members, assume_unique=True).size
    n2 = np.union1d(noisy_u.members, noisy_w.members).size
    denom = (1.0 - 2.0 * p) ** 2
    return (
        n1 * (1 - p) ** 2 / denom
        - (n2 - n1) * (1 - p) * p / denom
        + (noisy_u.universe - n2) * p ** 2 / denom
    )


def curator_degree_correction(reports: np.ndarray, u: VertexRef, w: VertexRef) -> Tuple[float, float, float]:
    """Replace non-positive noisy degrees by the layer mean, then clamp to >= 1."""
    mean = float(np.mean(reports))
    d_u, d_w = float(reports[u.index]), float(reports[w.index])
    if d_u <= 0 or d_w <= 0:
        logger.debug("correcting noisy degrees (%.3f, %.3f) with layer mean %.3f", d_u, d_w, mean)
    d_u = mean if d_u <= 0 else d_u
    d_w = mean if d_w <= 0 else d_w
    return max(d_u, 1.0), max(d_w, 1.0), mean


def curator_combine(f_u: float, f_w: float, alpha: float) -> float:
    return alpha * f_u + (1.0 - alpha) * f_w


# -- accounting --------------------------------------------------------------

def _expected_noisy(d: float, n_opp: int, p: float) -> float:
    return d * (1.0 - p) + (n_opp - d) * p


def expected_comm_bytes(
    algorithm: str,
    d_u: float,
    d_w: float,
    n1: int,
    n2: int,
    plan: Optional[BudgetPlan] = None,
    *,
    eps: Optional[float] = None,
    downloads: bool = True,
) -> float:
    """
    Expected transcript bytes of one run. ``n1`` is the opposite-layer size
    and ``n2`` the query-layer size. With ``downloads=False`` only the uplink
    of noisy edges is counted.
    """
    legs = 2 if downloads else 1
    if algorithm == "central":
        return 0.0
    if algorithm in ("naive", "oner"):
        if eps is None:
            raise ValidationError(f"{algorithm} needs eps")
        p = float(expit(-eps))
        return EDGE_BYTES * (_expected_noisy(d_u, n1, p) + _expected_noisy(d_w, n1, p))
    if plan is None:
        raise ValidationError(f"{algorithm} needs its budget plan")
    p = float(expit(-plan.eps1))
    if algorithm == "ss":
        return legs * EDGE_BYTES * _expected_noisy(d_w, n1, p) + SCALAR_BYTES
    if algorithm in ("ds", "ds_basic", "ds_public"):
        edges = legs * EDGE_BYTES * (_expected_noisy(d_u, n1, p) + _expected_noisy(d_w, n1, p))
        degree_round = SCALAR_BYTES * n2 if algorithm == "ds" else 0
        return degree_round + edges + 2 * SCALAR_BYTES
    raise ValidationError(f"unknown algorithm {algorithm!r}")
