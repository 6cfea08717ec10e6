import csv
import io
import json
import math
import unittest

import numpy as np

from commonldp.bench import (
    CSV_HEADER,
    TIMING_COLUMNS,
    bench,
    distribution,
    estimate,
    run_trials,
    sample_pairs,
    scale,
    sweep,
    write_rows,
    write_scale,
    write_summary,
)
from commonldp.errors import InfeasibleSamplingError, UnknownVertexError, UsageError, ValidationError
from commonldp.generator import generate_synthetic
from commonldp.models import BipartiteGraph, MetricRow, RunConfig


def by_algo(summary):
    return {s.algo: s for s in summary}


class TestRunTrials(unittest.TestCase):
    def setUp(self):
        self.g = generate_synthetic(80, 120, 0.08, seed=31)
        self.config = RunConfig(algorithms=("naive", "oner", "ss", "ds", "central"), pairs=6, trials_per_pair=3)
        self.pairs = sample_pairs(self.g, self.config)

    def test_worker_count_does_not_change_rows(self):
        serial = run_trials(self.g, self.pairs, self.config.algorithms, 2.0, 3, seed=4)
        pooled = run_trials(self.g, self.pairs, self.config.algorithms, 2.0, 3, seed=4, workers=4)
        self.assertEqual([r.row for r in serial], [r.row for r in pooled])

    def test_row_order_and_fields(self):
        results = run_trials(self.g, self.pairs, ("oner", "ds"), 2.0, 2, seed=0)
        keys = [(r.pair_index, r.row.algo, r.row.trial) for r in results]
        expected = [(i, a, t) for i in range(len(self.pairs)) for a in ("oner", "ds") for t in range(2)]
        self.assertEqual(keys, expected)
        for r in results:
            self.assertAlmostEqual(r.row.abs_error, abs(r.row.estimate - r.row.true_c2))
            if r.row.algo == "ds":
                self.assertAlmostEqual(r.row.eps0 + r.row.eps1 + r.row.eps2, 2.0, delta=1e-9)
                self.assertTrue(0.0 <= r.row.alpha <= 1.0)
            else:
                self.assertIsNone(r.row.alpha)

    def test_algorithms_see_the_same_pairs(self):
        result = bench(self.g, self.config)
        seen = {}
        for r in result.results:
            seen.setdefault(r.row.algo, []).append((r.row.u_id, r.row.w_id))
        self.assertEqual(len({tuple(v) for v in seen.values()}), 1)

    def test_bench_is_deterministic(self):
        a = bench(self.g, self.config)
        b = bench(self.g, self.config)
        self.assertEqual(a.rows, b.rows)
        self.assertEqual([s.mae for s in a.summary], [s.mae for s in b.summary])

    def test_infeasible_kappa(self):
        complete = generate_synthetic(6, 6, 1.0, seed=0)
        with self.assertRaises(InfeasibleSamplingError):
            bench(complete, RunConfig(pairs=2, kappa=1000))


class TestDeskScaleOrdering(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        g = generate_synthetic(10_000, 10_000, 1e-3, seed=17)
        config = RunConfig(
            algorithms=("naive", "oner", "ss", "ds", "central"),
            epsilons=(2.0,),
            pairs=100,
            trials_per_pair=20,
            seed=3,
        )
        cls.summary = by_algo(bench(g, config).summary)

    def test_analytic_ordering(self):
        s = self.summary
        self.assertLessEqual(s["ds"].analytic_loss, s["ss"].analytic_loss)
        self.assertLessEqual(s["ss"].analytic_loss, s["oner"].analytic_loss)
        self.assertLessEqual(s["oner"].analytic_loss, s["naive"].analytic_loss)
        self.assertLessEqual(s["central"].analytic_loss, s["ds"].analytic_loss)

    def test_empirical_ordering(self):
        s = self.summary
        self.assertLessEqual(s["ds"].mae, s["ss"].mae)
        self.assertLessEqual(s["ss"].mae, s["oner"].mae)
        self.assertLessEqual(s["oner"].mae, s["naive"].mae)
        self.assertLessEqual(s["ss"].mae, s["naive"].mae / 10)
        self.assertLessEqual(s["central"].mae, s["ds"].mae)

    def test_communication(self):
        s = self.summary
        self.assertEqual(s["central"].mean_comm_bytes, 0.0)
        self.assertGreater(s["ds"].mean_comm_bytes, s["ss"].mean_comm_bytes)


def heavy_tailed_graph(n: int, seed: int) -> BipartiteGraph:
    rng = np.random.default_rng(seed)
    degrees = np.ceil(np.minimum(2 * (1 + rng.pareto(1.0, n)), n)).astype(int)
    upper = np.repeat(np.arange(n), degrees)
    lower = np.concatenate([rng.choice(n, size=d, replace=False) for d in degrees])
    return BipartiteGraph.from_edges(n, n, upper, lower)


class TestDegreeImbalance(unittest.TestCase):
    def test_double_source_gains_with_imbalance(self):
        g = heavy_tailed_graph(2000, seed=8)
        ratios = []
        for kappa in (1.0, 10.0, 100.0):
            config = RunConfig(algorithms=("ss", "ds"), pairs=30, kappa=kappa, trials_per_pair=2, seed=int(kappa))
            s = by_algo(bench(g, config).summary)
            ratios.append(s["ds"].analytic_loss / s["ss"].analytic_loss)
        self.assertTrue(all(r <= 1.0 for r in ratios), msg=str(ratios))
        self.assertTrue(ratios[0] > ratios[1] > ratios[2], msg=str(ratios))


class TestSweep(unittest.TestCase):
    def setUp(self):
        self.g = generate_synthetic(300, 300, 0.03, seed=41)

    def test_rows_per_algorithm_and_monotone_loss(self):
        config = RunConfig(
            algorithms=("naive", "oner", "ss", "ds", "central"),
            epsilons=(1.0, 1.5, 2.0, 2.5, 3.0),
            pairs=10,
            trials_per_pair=2,
        )
        summary = sweep(self.g, config)
        self.assertEqual(len(summary), 25)
        for algo in config.algorithms:
            rows = [s for s in summary if s.algo == algo]
            self.assertEqual([s.epsilon for s in rows], list(config.epsilons))
            losses = [s.analytic_loss for s in rows]
            self.assertTrue(all(a > b for a, b in zip(losses, losses[1:])), msg=f"{algo}: {losses}")

    def test_auto_plan_beats_fixed_fractions(self):
        fractions = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
        config = RunConfig(algorithms=("ss", "ds"), epsilons=(2.0,), eps1_fractions=fractions, pairs=20)
        summary = sweep(self.g, config)
        ss = [s for s in summary if s.algo == "ss"]
        ds = [s for s in summary if s.algo == "ds"]
        self.assertEqual([s.eps1_fraction for s in ss], list(fractions))
        self.assertEqual(len(ds), 1)
        self.assertIsNone(ds[0].eps1_fraction)
        self.assertLessEqual(ds[0].analytic_loss, min(s.analytic_loss for s in ss) * 1.01)
        # too little or too much randomized-response budget both hurt
        losses = [s.analytic_loss for s in ss]
        best = int(np.argmin(losses))
        self.assertLess(losses[best], losses[0])
        self.assertLess(losses[best], losses[-1])

    def test_needs_two_settings(self):
        with self.assertRaises(ValidationError):
            sweep(self.g, RunConfig(epsilons=(2.0,)))


class TestSinglePair(unittest.TestCase):
    def setUp(self):
        self.g = generate_synthetic(50, 80, 0.1, seed=2)

    def test_estimate_rows(self):
        rows = estimate(self.g, RunConfig(algorithms=("central", "ds"), u=1, w=2, trials_per_pair=3, seed=1))
        self.assertEqual(len(rows), 6)
        self.assertEqual({(r.u_id, r.w_id) for r in rows}, {(1, 2)})
        central = [r for r in rows if r.algo == "central"]
        self.assertTrue(all(r.comm_bytes == 0 and r.eps2 == 2.0 for r in central))

    def test_fractions_only_repeat_split_algorithms(self):
        config = RunConfig(algorithms=("oner", "ss", "ds"), u=1, w=2, eps1_fractions=(0.3, 0.6))
        rows = estimate(self.g, config)
        self.assertEqual([r.algo for r in rows], ["oner", "ss", "ss", "ds"])
        ss = [r for r in rows if r.algo == "ss"]
        self.assertEqual([round(r.eps1, 9) for r in ss], [0.6, 1.2])

    def test_bench_takes_one_setting(self):
        with self.assertRaises(UsageError):
            bench(self.g, RunConfig(epsilons=(1.0, 2.0), pairs=2))
        with self.assertRaises(UsageError):
            bench(self.g, RunConfig(eps1_fractions=(0.3, 0.6), pairs=2))
        with self.assertRaises(UsageError):
            distribution(self.g, RunConfig(u=3, w=4, trials_per_pair=100, epsilons=(1.0, 2.0)))

    def test_unknown_vertex(self):
        with self.assertRaises(UnknownVertexError):
            estimate(self.g, RunConfig(u=1, w=51))

    def test_missing_pair(self):
        with self.assertRaises(UsageError):
            estimate(self.g, RunConfig(u=1))

    def test_distribution_shape(self):
        config = RunConfig(algorithms=("naive", "oner"), u=3, w=4, trials_per_pair=100, epsilons=(1.0,))
        rows = distribution(self.g, config)
        self.assertEqual(len(rows), 200)
        self.assertEqual(len({r.true_c2 for r in rows}), 1)

    def test_distribution_needs_trials(self):
        with self.assertRaises(ValidationError):
            distribution(self.g, RunConfig(u=3, w=4, trials_per_pair=99))


class TestScale(unittest.TestCase):
    def test_losses_follow_opposite_layer_size(self):
        rng = np.random.default_rng(5)
        # upper 0..99 only touch lower 0..99, so their degrees survive every subgraph
        core = np.argwhere(rng.random((100, 100)) < 0.05)
        rest = np.argwhere(rng.random((400, 500)) < 0.02) + np.array([100, 0])
        edges = np.vstack((core, rest))
        g = BipartiteGraph.from_edges(500, 500, edges[:, 0], edges[:, 1])

        config = RunConfig(algorithms=("naive", "oner", "ss", "central"), pairs=20, trials_per_pair=2, seed=1)
        rows = scale(g, config, [1.0, 0.2, 0.6])
        self.assertEqual([r.fraction for r in rows[::4]], [0.2, 0.6, 1.0])
        self.assertEqual([r.n_opposite for r in rows[::4]], [100, 300, 500])

        def losses(algo):
            return [r.summary.analytic_loss for r in rows if r.summary.algo == algo]

        for algo in ("ss", "central"):
            first, *others = losses(algo)
            for value in others:
                self.assertAlmostEqual(value, first, places=9, msg=algo)
        oner = losses("oner")
        self.assertAlmostEqual((oner[2] - oner[1]) / 200, (oner[1] - oner[0]) / 200, places=9)
        self.assertGreater(oner[1], oner[0])
        naive = losses("naive")
        self.assertGreater(naive[2] / naive[0], 5.0)


class TestWriters(unittest.TestCase):
    def setUp(self):
        g = generate_synthetic(30, 30, 0.2, seed=6)
        self.result = bench(g, RunConfig(algorithms=("oner", "ss"), pairs=3, trials_per_pair=2))

    def test_csv_header_follows_metric_row(self):
        buf = io.StringIO()
        write_rows(self.result.rows, buf)
        reader = csv.reader(io.StringIO(buf.getvalue()))
        header = next(reader)
        self.assertEqual(tuple(header), CSV_HEADER)
        self.assertEqual(header[:5], ["algo", "epsilon", "u_id", "w_id", "true_c2"])
        self.assertEqual(len(list(reader)), 12)
        self.assertEqual(len(CSV_HEADER), len(MetricRow.__dataclass_fields__))

    def test_json_rows(self):
        buf = io.StringIO()
        write_rows(self.result.rows, buf, as_json=True)
        records = [json.loads(line) for line in buf.getvalue().splitlines()]
        self.assertEqual(len(records), 12)
        self.assertEqual(list(records[0]), list(CSV_HEADER))

    def test_summary_block_is_commented(self):
        buf = io.StringIO()
        write_summary(self.result.summary, buf)
        lines = buf.getvalue().splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(all(line.startswith("# ") for line in lines))

    def test_summary_without_timing(self):
        buf = io.StringIO()
        write_summary(self.result.summary, buf, comment=False, timing=False)
        header = buf.getvalue().splitlines()[0].split(",")
        self.assertFalse(set(TIMING_COLUMNS) & set(header))
        self.assertIn("mae", header)

    def test_scale_writer(self):
        g = generate_synthetic(40, 40, 0.2, seed=6)
        rows = scale(g, RunConfig(algorithms=("central",), pairs=2), [0.5, 1.0])
        buf = io.StringIO()
        write_scale(rows, buf)
        lines = buf.getvalue().splitlines()
        self.assertEqual(lines[0].split(",")[:3], ["fraction", "n_opposite", "algo"])
        self.assertEqual(len(lines), 3)
        self.assertTrue(math.isclose(float(lines[1].split(",")[0]), 0.5))


if __name__ == "__main__":
    unittest.main()
