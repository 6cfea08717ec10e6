import math
import unittest

from commonldp.errors import InfeasibleSamplingError, ValidationError
from commonldp.generator import generate_synthetic, induced_subgraph, sample_query_pairs
from commonldp.models import Layer


class TestGenerateSynthetic(unittest.TestCase):
    def test_density_one_is_complete(self):
        g = generate_synthetic(3, 3, 1.0, seed=123)
        self.assertEqual(g.m, 9)

    def test_edge_count_concentrates(self):
        g = generate_synthetic(100, 100, 0.1, seed=7)
        self.assertLessEqual(abs(g.m - 1000), 4 * 30)

    def test_same_seed_same_edges(self):
        a = generate_synthetic(40, 60, 0.2, seed=9)
        b = generate_synthetic(40, 60, 0.2, seed=9)
        self.assertTrue(a.same_structure(b))
        c = generate_synthetic(40, 60, 0.2, seed=10)
        self.assertFalse(a.same_structure(c))

    def test_bad_density(self):
        for density in (0.0, -0.1, 1.5):
            with self.assertRaises(ValidationError):
                generate_synthetic(3, 3, density, seed=0)


class TestSampleQueryPairs(unittest.TestCase):
    def setUp(self):
        self.g = generate_synthetic(60, 80, 0.1, seed=2)

    def test_distinct_unordered_pairs(self):
        pairs = sample_query_pairs(self.g, Layer.UPPER, 100, seed=3)
        self.assertEqual(len(pairs), 100)
        keys = {tuple(sorted((p.u.index, p.w.index))) for p in pairs}
        self.assertEqual(len(keys), 100)
        for p in pairs:
            self.assertEqual(p.layer, Layer.UPPER)
            self.assertLess(p.u.index, 60)

    def test_lower_layer(self):
        pairs = sample_query_pairs(self.g, "lower", 10, seed=3)
        self.assertTrue(all(p.layer is Layer.LOWER for p in pairs))

    def test_deterministic(self):
        a = sample_query_pairs(self.g, Layer.UPPER, 20, seed=4)
        b = sample_query_pairs(self.g, Layer.UPPER, 20, seed=4)
        self.assertEqual(a, b)

    def test_kappa_filter(self):
        pairs = sample_query_pairs(self.g, Layer.UPPER, 20, kappa=1.5, seed=5)
        for p in pairs:
            du, dw = self.g.degree(p.u), self.g.degree(p.w)
            self.assertGreater(max(du, dw), 1.5 * min(du, dw))

    def test_infeasible_kappa_reports_found(self):
        complete = generate_synthetic(5, 5, 1.0, seed=0)
        with self.assertRaises(InfeasibleSamplingError) as ctx:
            sample_query_pairs(complete, Layer.UPPER, 3, kappa=1000, seed=0, max_attempts=5000)
        self.assertEqual(ctx.exception.found, 0)
        self.assertEqual(ctx.exception.requested, 3)
        self.assertIn("infeasible kappa", str(ctx.exception))

    def test_more_pairs_than_exist(self):
        g = generate_synthetic(3, 3, 0.5, seed=0)
        with self.assertRaises(InfeasibleSamplingError) as ctx:
            sample_query_pairs(g, Layer.UPPER, 4, seed=0, max_attempts=2000)
        self.assertEqual(ctx.exception.found, 3)


class TestInducedSubgraph(unittest.TestCase):
    def test_nested_prefixes(self):
        g = generate_synthetic(50, 70, 0.1, seed=8)
        small = induced_subgraph(g, 0.2)
        large = induced_subgraph(g, 0.6)
        self.assertEqual((small.n1, small.n2), (10, 14))
        self.assertEqual((large.n1, large.n2), (math.ceil(0.6 * 50), math.ceil(0.6 * 70)))
        small_edges = set(zip(*(a.tolist() for a in small.edges())))
        large_edges = set(zip(*(a.tolist() for a in large.edges())))
        self.assertTrue(small_edges <= large_edges)
        self.assertTrue(induced_subgraph(g, 1.0).same_structure(g))

    def test_bad_fraction(self):
        g = generate_synthetic(5, 5, 0.5, seed=0)
        with self.assertRaises(ValidationError):
            induced_subgraph(g, 0.0)


if __name__ == "__main__":
    unittest.main()
