import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from commonldp.errors import ValidationError
from commonldp.generator import generate_synthetic
from commonldp.mechanisms import (
    flip_probability,
    laplace_density,
    laplace_from_uniform,
    laplace_log_density_ratio,
    laplace_sample,
    laplace_samples,
    phi,
    phi_variance,
    randomized_response,
    rr_max_ratio,
    transition_matrix,
)
from commonldp.models import BipartiteGraph, FlipProbability, Layer, RandomSource, VertexRef


class TestFlipProbability(unittest.TestCase):
    def test_ln3_gives_quarter(self):
        self.assertAlmostEqual(flip_probability(math.log(3)).p, 0.25, places=15)

    def test_large_budget(self):
        self.assertLess(flip_probability(50).p, 1e-20)
        self.assertEqual(flip_probability(1e6).p, 0.0)

    def test_non_positive_budget(self):
        for eps in (0.0, -1.0, float("nan")):
            with self.assertRaises(ValidationError):
                flip_probability(eps)

    def test_half_is_not_a_flip_probability(self):
        with self.assertRaises(ValidationError):
            FlipProbability(0.5, 0.0)

    def test_output_ratio_is_e_to_eps(self):
        for eps in (0.1, 0.5, 1.0, 2.0, 3.0):
            self.assertAlmostEqual(rr_max_ratio(eps) / math.exp(eps), 1.0, delta=1e-12)
            t = transition_matrix(eps)
            np.testing.assert_allclose(t.sum(axis=1), [1.0, 1.0])


class TestRandomizedResponse(unittest.TestCase):
    def test_only_opposite_layer(self):
        g = generate_synthetic(20, 35, 0.2, seed=1)
        noisy = randomized_response(g, VertexRef(Layer.UPPER, 4), 1.0, RandomSource(0))
        self.assertEqual(noisy.universe, 35)
        self.assertTrue(np.all(np.diff(noisy.members) > 0))
        self.assertTrue(np.all((noisy.members >= 0) & (noisy.members < 35)))
        self.assertEqual(noisy.epsilon_used.epsilon, 1.0)

    def test_large_budget_is_identity(self):
        g = generate_synthetic(20, 35, 0.2, seed=1)
        v = VertexRef(Layer.LOWER, 3)
        noisy = randomized_response(g, v, 1e6, RandomSource(0))
        self.assertEqual(noisy.members.tolist(), g.neighbors(v).tolist())

    def test_same_stream_same_output(self):
        g = generate_synthetic(20, 35, 0.2, seed=1)
        v = VertexRef(Layer.UPPER, 2)
        a = randomized_response(g, v, 0.5, RandomSource(7, trial=3).at(2, 1))
        b = randomized_response(g, v, 0.5, RandomSource(7, trial=3).at(2, 1))
        c = randomized_response(g, v, 0.5, RandomSource(7, trial=4).at(2, 1))
        self.assertEqual(a.members.tolist(), b.members.tolist())
        self.assertNotEqual(a.members.tolist(), c.members.tolist())

    def test_expected_noisy_degree(self):
        n, d, eps, trials = 200, 10, 1.0, 10_000
        g = BipartiteGraph.from_edges(1, n, [0] * d, range(d))
        v = VertexRef(Layer.UPPER, 0)
        p = flip_probability(eps).p
        sizes = np.array([len(randomized_response(g, v, eps, RandomSource(3, trial=t))) for t in range(trials)])
        expected = d * (1 - p) + (n - d) * p
        sigma = math.sqrt(n * p * (1 - p) / trials)
        self.assertLessEqual(abs(sizes.mean() - expected), 4 * sigma)


class TestLaplace(unittest.TestCase):
    def test_sample_mean_and_variance(self):
        x = laplace_samples(1.0, np.random.default_rng(11), 1_000_000)
        self.assertLess(abs(x.mean()), 0.01)
        self.assertAlmostEqual(x.var() / 2.0, 1.0, delta=0.02)

    def test_scalar_sampler_uses_stream(self):
        a = laplace_sample(2.0, RandomSource(1).at(5, 2))
        b = laplace_sample(2.0, RandomSource(1).at(5, 2))
        self.assertEqual(a, b)

    def test_bad_scale(self):
        for scale in (0.0, -1.0, float("inf")):
            with self.assertRaises(ValidationError):
                laplace_sample(scale, np.random.default_rng(0))

    def test_density_ratio_bounded_by_budget(self):
        sensitivity, eps2 = 1.5, 0.7
        scale = sensitivity / eps2
        x = np.linspace(-20, 20, 4001)
        ratio = laplace_log_density_ratio(x, sensitivity, scale)
        self.assertLessEqual(float(np.max(np.abs(ratio))), eps2 + 1e-12)
        direct = np.log(laplace_density(x, scale)) - np.log(laplace_density(x + sensitivity, scale))
        np.testing.assert_allclose(ratio, direct, atol=1e-12)

    @given(st.floats(min_value=-0.4999, max_value=0.4999), st.floats(min_value=0.01, max_value=100))
    def test_inverse_transform_is_odd(self, u, scale):
        self.assertAlmostEqual(laplace_from_uniform(u, scale), -laplace_from_uniform(-u, scale), places=9)

    def test_inverse_transform_quantiles(self):
        # P(X <= median) = 1/2 and P(X <= b ln 2) = 3/4 for Laplace(0, b)
        self.assertEqual(laplace_from_uniform(0.0, 3.0), 0.0)
        self.assertAlmostEqual(laplace_from_uniform(0.25, 3.0), 3.0 * math.log(2), places=12)


class TestPhi(unittest.TestCase):
    def test_quarter(self):
        self.assertAlmostEqual(phi(1, 0.25), 1.5)
        self.assertAlmostEqual(phi(0, 0.25), -0.5)
        self.assertAlmostEqual(phi_variance(0.25), 0.75)

    @settings(max_examples=200)
    @given(st.floats(min_value=0.0, max_value=0.49))
    def test_unbiased_for_both_bits(self, p):
        one = (1 - p) * phi(1, p) + p * phi(0, p)
        zero = p * phi(1, p) + (1 - p) * phi(0, p)
        self.assertAlmostEqual(one, 1.0, places=9)
        self.assertAlmostEqual(zero, 0.0, places=9)
        second = (1 - p) * phi(1, p) ** 2 + p * phi(0, p) ** 2
        self.assertAlmostEqual(second - 1.0, phi_variance(p), delta=1e-9 * max(1.0, phi_variance(p)))

    def test_rejects_half(self):
        with self.assertRaises(ValidationError):
            phi(1, 0.5)


class TestRandomSource(unittest.TestCase):
    def test_paths_are_independent_streams(self):
        base = RandomSource(42)
        draws = {
            "a": base.at(1, 1).generator().random(),
            "b": base.at(2, 1).generator().random(),
            "c": base.at(1, 2).generator().random(),
            "d": base.for_trial(1).at(1, 1).generator().random(),
            "e": base.with_context(3).at(1, 1).generator().random(),
        }
        self.assertEqual(len(set(draws.values())), 5)
        self.assertEqual(base.at(1, 1).generator().random(), draws["a"])

    def test_negative_seed(self):
        with self.assertRaises(ValidationError):
            RandomSource(-1)


if __name__ == "__main__":
    unittest.main()
