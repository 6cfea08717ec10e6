from __future__ import annotations

import logging
import math
from typing import List, Optional, Set, Tuple

import numpy as np

from .errors import InfeasibleSamplingError, ValidationError
from .models import BipartiteGraph, Layer, QueryPair, VertexRef

logger = logging.getLogger(__name__)

MAX_SAMPLING_ATTEMPTS = 1_000_000
_BATCH = 4096


def generate_synthetic(n1: int, n2: int, edge_density: float, seed: int) -> BipartiteGraph:
    """
    Random bipartite graph where each of the n1*n2 potential edges is present
    independently with probability ``edge_density``; a pure function of its
    arguments.
    """
    if n1 < 1 or n2 < 1:
        raise ValidationError(f"layer sizes must be >= 1, got n1={n1}, n2={n2}")
    if not 0.0 < edge_density <= 1.0:
        raise ValidationError(f"edge density must lie in (0, 1], got {edge_density}")

    rng = np.random.default_rng(seed)
    population = n1 * n2
    # Binomial edge count, then a uniform subset of that size: the same law as
    # independent per-edge coins without materialising n1*n2 draws.
    m = int(rng.binomial(population, edge_density))
    keys = rng.choice(population, size=m, replace=False)
    graph = BipartiteGraph.from_edges(n1, n2, keys // n2, keys % n2)
    logger.debug("generated synthetic graph n1=%d n2=%d m=%d seed=%d", n1, n2, graph.m, seed)
    return graph


def _accepts(da: int, db: int, kappa: Optional[float]) -> bool:
    if kappa is None:
        return True
    return max(da, db) > kappa * min(da, db)


def sample_query_pairs(
    g: BipartiteGraph,
    layer: Layer,
    count: int,
    kappa: Optional[float] = None,
    seed: int = 0,
    max_attempts: int = MAX_SAMPLING_ATTEMPTS,
) -> List[QueryPair]:
    """
    Uniformly sample ``count`` distinct unordered same-layer pairs. With
    ``kappa`` only pairs with max(d_u, d_w) > kappa * min(d_u, d_w) are kept.
    """
    layer = Layer.parse(layer)
    n = g.layer_size(layer)
    if n < 2:
        raise ValidationError(f"{layer.value} layer has fewer than two vertices")
    if count < 1:
        raise ValidationError("pair count must be >= 1")
    if kappa is not None and kappa < 1:
        raise ValidationError("kappa must be >= 1")

    rng = np.random.default_rng(seed)
    degrees = g.degrees(layer).tolist()
    seen: Set[Tuple[int, int]] = set()
    pairs: List[QueryPair] = []
    attempts = 0

    while len(pairs) < count and attempts < max_attempts:
        draws = rng.integers(0, n, size=(min(_BATCH, max_attempts - attempts), 2))
        for a, b in draws.tolist():
            attempts += 1
            if a == b:
                continue
            key = (a, b) if a < b else (b, a)
            if key in seen or not _accepts(degrees[a], degrees[b], kappa):
                continue
            seen.add(key)
            pairs.append(QueryPair(VertexRef(layer, a), VertexRef(layer, b)))
            if len(pairs) == count:
                break

    if len(pairs) < count:
        raise InfeasibleSamplingError(len(pairs), count, kappa)
    logger.debug("sampled %d pairs in %d attempts", len(pairs), attempts)
    return pairs


def induced_subgraph(g: BipartiteGraph, fraction: float) -> BipartiteGraph:
    """Keep the first ceil(fraction * n) vertices of each layer; nested in ``fraction``."""
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    k1 = max(1, math.ceil(fraction * g.n1))
    k2 = max(1, math.ceil(fraction * g.n2))
    upper, lower = g.edges()
    keep = (upper < k1) & (lower < k2)
    return BipartiteGraph.from_edges(k1, k2, upper[keep], lower[keep])
