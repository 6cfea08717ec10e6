from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from .errors import UnknownVertexError, UsageError, ValidationError
from .estimators import run_estimator
from .generator import induced_subgraph, sample_query_pairs
from .logic import exact_common_neighbors
from .models import (
    ALGORITHMS,
    BipartiteGraph,
    EstimateReport,
    MetricRow,
    QueryPair,
    RandomSource,
    RunConfig,
    VertexRef,
)
from .optimizer import analytic_loss

logger = logging.getLogger(__name__)

CSV_HEADER: Tuple[str, ...] = tuple(f.name for f in fields(MetricRow))
MIN_DISTRIBUTION_TRIALS = 100
FRACTION_ALGORITHMS = ("ss", "ds_basic")


@dataclass(frozen=True)
class TrialResult:
    pair_index: int
    row: MetricRow
    vertex_seconds: float
    curator_seconds: float
    fallback: bool


@dataclass(frozen=True)
class SummaryRow:
    algo: str
    epsilon: float
    eps1_fraction: Optional[float]
    pairs: int
    trials: int
    mae: float
    mean_l2: float
    mean_comm_bytes: float
    analytic_loss: float
    vertex_seconds: float
    curator_seconds: float


SUMMARY_HEADER: Tuple[str, ...] = tuple(f.name for f in fields(SummaryRow))
TIMING_COLUMNS = ("vertex_seconds", "curator_seconds")


@dataclass(frozen=True)
class _PairFacts:
    pair: QueryPair
    true_c2: int
    d_u: int
    d_w: int
    n_opp: int


def _facts(g: BipartiteGraph, pair: QueryPair) -> _PairFacts:
    return _PairFacts(
        pair=pair,
        true_c2=exact_common_neighbors(g, pair),
        d_u=g.degree(pair.u),
        d_w=g.degree(pair.w),
        n_opp=g.layer_size(pair.layer.opposite),
    )


def make_row(facts: _PairFacts, report: EstimateReport, eps: float, trial: int, seed: int) -> MetricRow:
    plan = report.plan
    if plan is not None:
        eps0, eps1, eps2, alpha = plan.eps0, plan.eps1, plan.eps2, plan.alpha
    elif report.algorithm == "central":
        eps0, eps1, eps2, alpha = 0.0, 0.0, eps, None
    else:
        eps0, eps1, eps2, alpha = 0.0, eps, 0.0, None
    return MetricRow(
        algo=report.algorithm,
        epsilon=eps,
        u_id=facts.pair.u.external_id,
        w_id=facts.pair.w.external_id,
        true_c2=facts.true_c2,
        estimate=report.value,
        abs_error=abs(report.value - facts.true_c2),
        comm_bytes=report.comm_bytes,
        eps0=eps0,
        eps1=eps1,
        eps2=eps2,
        alpha=alpha,
        trial=trial,
        seed=seed,
        analytic_loss=analytic_loss(
            report.algorithm,
            c=facts.true_c2,
            d_u=facts.d_u,
            d_w=facts.d_w,
            n_opp=facts.n_opp,
            eps=eps,
            plan=plan,
        ),
    )


def run_trials(
    g: BipartiteGraph,
    pairs: Sequence[QueryPair],
    algorithms: Sequence[str],
    eps: float,
    trials: int,
    seed: int,
    eps1_fraction: float = 0.5,
    workers: int = 1,
) -> List[TrialResult]:
    """
    Run every (pair, algorithm, trial) on its own random stream. Results come
    back ordered by (pair index, algorithm, trial) whatever the worker count.
    """
    facts = [_facts(g, q) for q in pairs]
    tasks = [
        (i, algo, trial)
        for i in range(len(pairs))
        for algo in algorithms
        for trial in range(trials)
    ]

    def _one(task: Tuple[int, str, int]) -> TrialResult:
        i, algo, trial = task
        rng = RandomSource(seed, trial=trial).with_context(i, ALGORITHMS.index(algo))
        report = run_estimator(algo, g, facts[i].pair, eps, rng, eps1_fraction=eps1_fraction)
        return TrialResult(
            pair_index=i,
            row=make_row(facts[i], report, eps, trial, seed),
            vertex_seconds=report.vertex_seconds,
            curator_seconds=report.curator_seconds,
            fallback=report.fallback,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, tasks))
    else:
        results = [_one(t) for t in tasks]
    logger.info("ran %d trials at eps=%g on %d pairs", len(results), eps, len(pairs))
    return results


def summarize(results: Iterable[TrialResult], eps1_fraction: Optional[float] = None) -> List[SummaryRow]:
    grouped: Dict[str, List[TrialResult]] = {}
    for r in results:
        grouped.setdefault(r.row.algo, []).append(r)

    out: List[SummaryRow] = []
    for algo, group in grouped.items():
        errors = np.array([r.row.estimate - r.row.true_c2 for r in group])
        out.append(
            SummaryRow(
                algo=algo,
                epsilon=group[0].row.epsilon,
                eps1_fraction=eps1_fraction if algo in FRACTION_ALGORITHMS else None,
                pairs=len({r.pair_index for r in group}),
                trials=len(group),
                mae=float(np.mean(np.abs(errors))),
                mean_l2=float(np.mean(errors ** 2)),
                mean_comm_bytes=float(np.mean([r.row.comm_bytes for r in group])),
                analytic_loss=float(np.mean([r.row.analytic_loss for r in group])),
                vertex_seconds=float(sum(r.vertex_seconds for r in group)),
                curator_seconds=float(sum(r.curator_seconds for r in group)),
            )
        )
    return out


def resolve_pair(g: BipartiteGraph, config: RunConfig) -> QueryPair:
    if config.u is None or config.w is None:
        raise UsageError("an explicit pair needs both --u and --w")
    u = VertexRef.from_external(config.layer, config.u)
    w = VertexRef.from_external(config.layer, config.w)
    for v in (u, w):
        if not g.contains(v):
            raise UnknownVertexError(f"unknown {v.layer.value} vertex id {v.external_id}")
    return QueryPair(u, w)


def _fractions_for(algo: str, config: RunConfig) -> Sequence[float]:
    # only the fixed-split algorithms read eps1_fraction
    return config.eps1_fractions if algo in FRACTION_ALGORITHMS else config.eps1_fractions[:1]


def _single_setting(config: RunConfig, command: str) -> None:
    if len(config.epsilons) > 1:
        raise UsageError(f"{command} takes one epsilon; use sweep for several")
    if len(config.eps1_fractions) > 1:
        raise UsageError(f"{command} takes one eps1 fraction; use sweep for several")


def estimate(g: BipartiteGraph, config: RunConfig) -> List[MetricRow]:
    pair = resolve_pair(g, config)
    rows: List[MetricRow] = []
    for eps in config.epsilons:
        for algo in config.algorithms:
            for fraction in _fractions_for(algo, config):
                results = run_trials(
                    g, [pair], (algo,), eps, config.trials_per_pair, config.seed,
                    eps1_fraction=fraction, workers=config.workers,
                )
                rows.extend(r.row for r in results)
    return rows


@dataclass(frozen=True)
class BenchResult:
    pairs: List[QueryPair]
    results: List[TrialResult]
    summary: List[SummaryRow]

    @property
    def rows(self) -> List[MetricRow]:
        return [r.row for r in self.results]


def sample_pairs(g: BipartiteGraph, config: RunConfig) -> List[QueryPair]:
    return sample_query_pairs(g, config.layer, config.pairs, config.kappa, config.seed)


def bench(
    g: BipartiteGraph,
    config: RunConfig,
    pairs: Optional[List[QueryPair]] = None,
    eps: Optional[float] = None,
    eps1_fraction: Optional[float] = None,
) -> BenchResult:
    """MAE benchmark on sampled pairs; every algorithm sees the same pairs."""
    if eps is None or eps1_fraction is None:
        _single_setting(config, "bench")
    pairs = pairs if pairs is not None else sample_pairs(g, config)
    eps = config.epsilons[0] if eps is None else eps
    fraction = config.eps1_fractions[0] if eps1_fraction is None else eps1_fraction
    results = run_trials(
        g, pairs, config.algorithms, eps, config.trials_per_pair, config.seed,
        eps1_fraction=fraction, workers=config.workers,
    )
    return BenchResult(pairs=pairs, results=results, summary=summarize(results, fraction))


def sweep(g: BipartiteGraph, config: RunConfig) -> List[SummaryRow]:
    """One summary row per (algorithm, eps[, eps1 fraction]) on a fixed pair sample."""
    if len(config.epsilons) < 2 and len(config.eps1_fractions) < 2:
        raise ValidationError("a sweep needs at least two epsilon values or eps1 fractions")
    pairs = sample_pairs(g, config)
    plain = tuple(a for a in config.algorithms if a not in FRACTION_ALGORITHMS)
    swept = tuple(a for a in config.algorithms if a in FRACTION_ALGORITHMS)

    out: List[SummaryRow] = []
    for eps in config.epsilons:
        if plain:
            results = run_trials(g, pairs, plain, eps, config.trials_per_pair, config.seed, workers=config.workers)
            out.extend(summarize(results))
        for fraction in config.eps1_fractions if swept else ():
            results = run_trials(
                g, pairs, swept, eps, config.trials_per_pair, config.seed,
                eps1_fraction=fraction, workers=config.workers,
            )
            out.extend(summarize(results, fraction))
    order = {a: i for i, a in enumerate(config.algorithms)}
    out.sort(key=lambda s: (order[s.algo], s.epsilon, s.eps1_fraction or 0.0))
    return out


def distribution(g: BipartiteGraph, config: RunConfig) -> List[MetricRow]:
    """Raw per-trial estimates for one explicit pair, for external histogramming."""
    if config.trials_per_pair < MIN_DISTRIBUTION_TRIALS:
        raise ValidationError(f"a distribution needs at least {MIN_DISTRIBUTION_TRIALS} trials")
    _single_setting(config, "distribution")
    pair = resolve_pair(g, config)
    results = run_trials(
        g, [pair], config.algorithms, config.epsilons[0], config.trials_per_pair, config.seed,
        eps1_fraction=config.eps1_fractions[0], workers=config.workers,
    )
    return [r.row for r in results]


@dataclass(frozen=True)
class ScaleRow:
    fraction: float
    n_opposite: int
    summary: SummaryRow


def scale(g: BipartiteGraph, config: RunConfig, fractions: Sequence[float]) -> List[ScaleRow]:
    """Benchmark on nested induced subgraphs; pairs are drawn on the smallest one."""
    if not fractions:
        raise ValidationError("need at least one vertex fraction")
    fractions = sorted(fractions)
    smallest = induced_subgraph(g, fractions[0])
    pairs = sample_pairs(smallest, config)
    out: List[ScaleRow] = []
    for fraction in fractions:
        sub = induced_subgraph(g, fraction)
        result = bench(sub, config, pairs=pairs)
        n_opp = sub.layer_size(config.layer.opposite)
        out.extend(ScaleRow(fraction, n_opp, s) for s in result.summary)
    return out


# -- output ------------------------------------------------------------------

def _cell(value) -> str:
    return "" if value is None else str(value)


def write_rows(rows: Iterable[MetricRow], fh: TextIO, as_json: bool = False) -> None:
    if as_json:
        for row in rows:
            fh.write(json.dumps(asdict(row)) + "\n")
        return
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_cell(getattr(row, name)) for name in CSV_HEADER])


def write_summary(
    summary: Iterable[SummaryRow],
    fh: TextIO,
    as_json: bool = False,
    comment: bool = True,
    timing: bool = True,
) -> None:
    """Summary table; with ``comment`` every line is prefixed by '# '. Wall times vary run to run."""
    columns = SUMMARY_HEADER if timing else tuple(c for c in SUMMARY_HEADER if c not in TIMING_COLUMNS)
    summary = list(summary)
    if as_json:
        records = [{c: getattr(s, c) for c in columns} for s in summary]
        fh.write(json.dumps({"summary": records}) + "\n")
        return
    prefix = "# " if comment else ""
    fh.write(prefix + ",".join(columns) + "\n")
    for s in summary:
        fh.write(prefix + ",".join(_cell(getattr(s, name)) for name in columns) + "\n")


def write_scale(rows: Iterable[ScaleRow], fh: TextIO) -> None:
    columns = tuple(c for c in SUMMARY_HEADER if c not in TIMING_COLUMNS)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("fraction", "n_opposite") + columns)
    for r in rows:
        writer.writerow([r.fraction, r.n_opposite] + [_cell(getattr(r.summary, n)) for n in columns])
