from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, TextIO

import yaml

from . import __version__
from .bench import bench, distribution, estimate, scale, sweep, write_rows, write_scale, write_summary
from .errors import InfeasibleSamplingError, UsageError, ValidationError
from .generator import generate_synthetic
from .graph_loader import load_edge_list, summary_json, write_edge_list
from .models import ALGORITHMS, BipartiteGraph, RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4

DEFAULT_DISTRIBUTION_TRIALS = 1000
DEFAULT_SCALE_FRACTIONS = (0.2, 0.6, 1.0)

# argparse dest -> RunConfig field
_FLAG_FIELDS = {
    "graph": "graph",
    "format": "format",
    "algo": "algorithms",
    "epsilon": "epsilons",
    "pairs": "pairs",
    "kappa": "kappa",
    "trials": "trials_per_pair",
    "trials_per_pair": "trials_per_pair",
    "eps1_fraction": "eps1_fractions",
    "seed": "seed",
    "out": "out",
    "layer": "layer",
    "u": "u",
    "w": "w",
    "json": "json",
    "workers": "workers",
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", help="KONECT edge list")
    common.add_argument("--format", choices=("konect",), help="graph file format (default konect)")
    common.add_argument("--algo", action="append", choices=ALGORITHMS, help="algorithm (repeatable)")
    common.add_argument("--epsilon", action="append", type=float, help="privacy budget (repeatable)")
    common.add_argument("--eps1-fraction", action="append", type=float, dest="eps1_fraction",
                        help="share of eps spent on randomized response by ss / ds_basic (repeatable)")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--layer", choices=("upper", "lower"), help="query layer (default upper)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--json", action="store_true", default=None, help="JSON lines instead of CSV")
    common.add_argument("--workers", type=int, help="worker threads for trials")
    common.add_argument("--config", help="YAML file with RunConfig fields; flags override it")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    return common


def _sampling_parser() -> argparse.ArgumentParser:
    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument("--pairs", type=int, help="number of sampled query pairs (default 100)")
    sampling.add_argument("--kappa", type=float, help="degree-imbalance filter")
    sampling.add_argument("--trials-per-pair", type=int, dest="trials_per_pair", help="trials per pair (default 1)")
    return sampling


def _pair_parser() -> argparse.ArgumentParser:
    pair = argparse.ArgumentParser(add_help=False)
    pair.add_argument("--u", type=int, help="external id of the first query vertex")
    pair.add_argument("--w", type=int, help="external id of the second query vertex")
    pair.add_argument("--trials", type=int, help="number of trials")
    return pair


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commonldp",
        description="Common-neighbor estimation on bipartite graphs under edge local differential privacy.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, sampling, pair = _common_parser(), _sampling_parser(), _pair_parser()

    sub.add_parser("estimate", parents=[common, pair], help="estimate C2 for one pair")
    sub.add_parser("bench", parents=[common, sampling], help="MAE benchmark on sampled pairs")
    sub.add_parser("sweep", parents=[common, sampling], help="benchmark across eps / eps1 fractions")
    sub.add_parser("distribution", parents=[common, pair], help="per-trial estimates for one pair")
    scale_p = sub.add_parser("scale", parents=[common, sampling], help="benchmark on nested induced subgraphs")
    scale_p.add_argument("--fraction", action="append", type=float, help="vertex fraction (repeatable)")

    gen = sub.add_parser("gen-synthetic", parents=[common], help="write a random bipartite edge list")
    gen.add_argument("--n1", type=int, required=True)
    gen.add_argument("--n2", type=int, required=True)
    gen.add_argument("--density", type=float, required=True)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _load_yaml(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a mapping of RunConfig fields")
    return data


def config_from_args(args: argparse.Namespace, **defaults: Any) -> RunConfig:
    values: Dict[str, Any] = dict(defaults)
    if getattr(args, "config", None):
        values.update(_load_yaml(args.config))
    for dest, name in _FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            values[name] = value
    for name in ("algorithms", "epsilons", "eps1_fractions"):
        if name in values and not isinstance(values[name], (list, tuple)):
            values[name] = (values[name],)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


def _graph(config: RunConfig) -> BipartiteGraph:
    if not config.graph:
        raise UsageError("--graph is required")
    return load_edge_list(config.graph, config.format)


@contextlib.contextmanager
def _output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        yield fh


def cmd_estimate(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    rows = estimate(_graph(config), config)
    with _output(config.out) as fh:
        write_rows(rows, fh, as_json=config.json)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    result = bench(_graph(config), config)
    with _output(config.out) as fh:
        write_rows(result.rows, fh, as_json=config.json)
        write_summary(result.summary, fh, as_json=config.json)
    for s in result.summary:
        logger.info("%-9s mae=%.4g l2=%.4g bytes=%.1f", s.algo, s.mae, s.mean_l2, s.mean_comm_bytes)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    summary = sweep(_graph(config), config)
    with _output(config.out) as fh:
        write_summary(summary, fh, as_json=config.json, comment=False, timing=False)
    return EXIT_OK


def cmd_distribution(args: argparse.Namespace) -> int:
    config = config_from_args(args, trials_per_pair=DEFAULT_DISTRIBUTION_TRIALS)
    rows = distribution(_graph(config), config)
    with _output(config.out) as fh:
        write_rows(rows, fh, as_json=config.json)
    return EXIT_OK


def cmd_scale(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    rows = scale(_graph(config), config, args.fraction or DEFAULT_SCALE_FRACTIONS)
    with _output(config.out) as fh:
        write_scale(rows, fh)
    return EXIT_OK


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    if not args.out:
        raise UsageError("--out is required")
    graph = generate_synthetic(args.n1, args.n2, args.density, args.seed or 0)
    write_edge_list(graph, Path(args.out))
    print(summary_json(graph))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "estimate": cmd_estimate,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "distribution": cmd_distribution,
    "scale": cmd_scale,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except yaml.YAMLError as exc:
        print(f"error: bad config file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleSamplingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def run(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))


if __name__ == "__main__":
    run()
