from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from .errors import GraphFormatError, ValidationError
from .models import BipartiteGraph, Layer

logger = logging.getLogger(__name__)

COMMENT_PREFIXES = ("%", "#")
SUPPORTED_FORMATS = ("konect",)

PathLike = Union[str, Path]


def _parse_size_header(line: str) -> tuple[int, int] | None:
    # KONECT's second header line reads "% m n1 n2".
    tokens = line.lstrip("%#").split()
    if len(tokens) != 3 or not all(t.isdigit() for t in tokens):
        return None
    _, n1, n2 = (int(t) for t in tokens)
    return n1, n2


def load_edge_list(path: PathLike, format: str = "konect") -> BipartiteGraph:
    """
    Read a KONECT bipartite edge list.

    Column one is the 1-based upper id, column two the 1-based lower id; extra
    columns (weight, timestamp) are ignored and repeated edges collapse. Layer
    sizes grow to cover a ``% m n1 n2`` size header when present.
    """
    if format not in SUPPORTED_FORMATS:
        raise ValidationError(f"unsupported graph format {format!r}")
    path = Path(path)
    upper: List[int] = []
    lower: List[int] = []
    header_sizes: tuple[int, int] | None = None

    with path.open("rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("utf-8").strip()
            except UnicodeDecodeError as exc:
                raise GraphFormatError(f"not valid UTF-8 ({exc.reason})", line_no, str(path)) from None
            if not line:
                continue
            if line.startswith(COMMENT_PREFIXES):
                if header_sizes is None:
                    header_sizes = _parse_size_header(line)
                continue
            tokens = line.split()
            if len(tokens) < 2:
                raise GraphFormatError("expected at least two columns", line_no, str(path))
            try:
                a, b = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise GraphFormatError(
                    f"non-integer vertex id in {line!r}", line_no, str(path)
                ) from None
            if a <= 0 or b <= 0:
                raise ValidationError(f"{path}:{line_no}: vertex ids are 1-based, got {a} {b}")
            upper.append(a - 1)
            lower.append(b - 1)

    if not upper:
        raise ValidationError(f"{path}: graph has no edges")

    n1 = max(upper) + 1
    n2 = max(lower) + 1
    if header_sizes is not None:
        n1 = max(n1, header_sizes[0])
        n2 = max(n2, header_sizes[1])

    graph = BipartiteGraph.from_edges(n1, n2, upper, lower)
    if graph.m < len(upper):
        logger.debug("collapsed %d duplicate edges in %s", len(upper) - graph.m, path)
    logger.info("loaded %s: n1=%d n2=%d m=%d", path, graph.n1, graph.n2, graph.m)
    return graph


def write_edge_list(graph: BipartiteGraph, path: PathLike) -> None:
    """Write ``graph`` in KONECT form, with the size header ``load_edge_list`` honours."""
    path = Path(path)
    upper, lower = graph.edges()
    with path.open("w", encoding="utf-8") as fh:
        fh.write("% bip unweighted\n")
        fh.write(f"% {graph.m} {graph.n1} {graph.n2}\n")
        if graph.m:
            np.savetxt(fh, np.column_stack((upper + 1, lower + 1)), fmt="%d", delimiter=" ")


def graph_summary(graph: BipartiteGraph) -> Dict[str, int]:
    return {
        "n1": graph.n1,
        "n2": graph.n2,
        "m": graph.m,
        "max_deg_upper": graph.max_degree(Layer.UPPER),
        "max_deg_lower": graph.max_degree(Layer.LOWER),
    }


def summary_json(graph: BipartiteGraph) -> str:
    return json.dumps(graph_summary(graph), sort_keys=True)
