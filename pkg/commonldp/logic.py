from __future__ import annotations

from typing import Tuple

import numpy as np

from .errors import ValidationError
from .models import BipartiteGraph, QueryPair


def check_pair(g: BipartiteGraph, q: QueryPair) -> None:
    if q.u.layer != q.w.layer:
        raise ValidationError("query vertices must lie on the same layer")
    g.check_vertex(q.u)
    g.check_vertex(q.w)


def exact_common_neighbors(g: BipartiteGraph, q: QueryPair) -> int:
    """|N(u) ∩ N(w)| by sorted-list intersection; the ground truth C2(u, w)."""
    check_pair(g, q)
    return int(np.intersect1d(g.neighbors(q.u), g.neighbors(q.w), assume_unique=True).size)


def pair_degrees(g: BipartiteGraph, q: QueryPair) -> Tuple[int, int]:
    return g.degree(q.u), g.degree(q.w)
