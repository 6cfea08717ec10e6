from __future__ import annotations

import math
from typing import Union

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .models import (
    BipartiteGraph,
    FlipProbability,
    NoisyNeighborSet,
    PrivacyBudget,
    RandomSource,
    VertexRef,
)

RandomLike = Union[RandomSource, np.random.Generator]


def _generator(rng: RandomLike) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RandomSource) else rng


def flip_probability(eps: Union[float, PrivacyBudget]) -> FlipProbability:
    """p = 1 / (1 + e^eps), evaluated without overflow for large budgets."""
    budget = PrivacyBudget.of(eps)
    return FlipProbability(p=float(expit(-budget.epsilon)), epsilon=budget.epsilon)


def _as_p(p: Union[FlipProbability, float]) -> float:
    value = p.p if isinstance(p, FlipProbability) else float(p)
    if not 0.0 <= value < 0.5:
        raise ValidationError(f"flip probability must lie in [0, 1/2), got {value}")
    return value


def transition_matrix(eps: Union[float, PrivacyBudget]) -> np.ndarray:
    """P[out | in] for one adjacency entry; rows index the true bit."""
    p = flip_probability(eps).p
    return np.array([[1.0 - p, p], [p, 1.0 - p]])


def rr_max_ratio(eps: Union[float, PrivacyBudget]) -> float:
    """Largest P(out | in) / P(out | in') over both outputs; equals e^eps."""
    t = transition_matrix(eps)
    return float(max(t[a, out] / t[1 - a, out] for a in (0, 1) for out in (0, 1)))


def randomized_response(
    g: BipartiteGraph,
    v: VertexRef,
    eps: Union[float, PrivacyBudget],
    rng: RandomLike,
) -> NoisyNeighborSet:
    """
    Perturb v's row of the adjacency matrix over the opposite layer only:
    each bit flips with probability p and is kept with probability 1 - p.
    """
    g.check_vertex(v)
    budget = PrivacyBudget.of(eps)
    p = flip_probability(budget).p
    universe = g.layer_size(v.layer.opposite)

    truth = np.zeros(universe, dtype=bool)
    truth[g.neighbors(v)] = True
    flips = _generator(rng).random(universe) < p
    members = np.flatnonzero(truth ^ flips)
    members.setflags(write=False)
    return NoisyNeighborSet(owner=v, epsilon_used=budget, members=members, universe=universe)


def laplace_from_uniform(u, scale: float):
    """Inverse transform of U ~ Uniform(-1/2, 1/2) into Laplace(0, scale)."""
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def _check_scale(scale: float) -> None:
    if not scale > 0 or math.isinf(scale):
        raise ValidationError(f"Laplace scale must be a positive finite number, got {scale}")


def laplace_sample(scale: float, rng: RandomLike) -> float:
    _check_scale(scale)
    gen = _generator(rng)
    u = gen.random() - 0.5
    while u <= -0.5:
        u = gen.random() - 0.5
    return float(laplace_from_uniform(u, scale))


def laplace_samples(scale: float, rng: RandomLike, size: int) -> np.ndarray:
    _check_scale(scale)
    gen = _generator(rng)
    u = gen.random(size) - 0.5
    bad = u <= -0.5
    while bad.any():
        u[bad] = gen.random(int(bad.sum())) - 0.5
        bad = u <= -0.5
    return laplace_from_uniform(u, scale)


def laplace_density(x, scale: float):
    _check_scale(scale)
    return np.exp(-np.abs(x) / scale) / (2.0 * scale)


def laplace_log_density_ratio(x, shift: float, scale: float):
    """log f(x) - log f(x + shift); bounded by |shift| / scale."""
    _check_scale(scale)
    return (np.abs(np.asarray(x) + shift) - np.abs(x)) / scale


def phi(noisy_bit, p: Union[FlipProbability, float]):
    """Unbiased estimate of a true adjacency bit from its perturbed value."""
    p = _as_p(p)
    return (noisy_bit - p) / (1.0 - 2.0 * p)


def phi_variance(p: Union[FlipProbability, float]) -> float:
    p = _as_p(p)
    return p * (1.0 - p) / (1.0 - 2.0 * p) ** 2
