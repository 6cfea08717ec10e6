from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.special import expit

from .errors import OptimizationError, ValidationError
from .models import BudgetPlan, LossModel

logger = logging.getLogger(__name__)

GRID_POINTS = 256
BOX = (0.01, 0.99)
FD_STEP = 1e-5
NEWTON_MAX_ITER = 20
NEWTON_TOL = 1e-8


def _rr_term(p):
    return p * (1.0 - p) / (1.0 - 2.0 * p) ** 2


def _laplace_term(p, eps2):
    return 2.0 * (1.0 - p) ** 2 / ((1.0 - 2.0 * p) ** 2 * eps2 ** 2)


def _check_budgets(eps1: float, eps2: float) -> None:
    if not (eps1 > 0 and eps2 > 0):
        raise ValidationError(f"budgets must be > 0, got eps1={eps1}, eps2={eps2}")


def ss_loss(d: float, eps1: float, eps2: float) -> float:
    """Expected L2 loss of the single-source estimator with source degree d."""
    if d < 0:
        raise ValidationError(f"degree must be >= 0, got {d}")
    _check_budgets(eps1, eps2)
    p = float(expit(-eps1))
    return float(_rr_term(p) * d + _laplace_term(p, eps2))


def weighted_loss(d_u: float, d_w: float, eps1: float, eps2: float, alpha: float) -> float:
    """Loss of alpha * f_u + (1 - alpha) * f_w; the two estimators are independent."""
    _check_budgets(eps1, eps2)
    p = float(expit(-eps1))
    a2, b2 = alpha ** 2, (1.0 - alpha) ** 2
    return float(_rr_term(p) * (a2 * d_u + b2 * d_w) + _laplace_term(p, eps2) * (a2 + b2))


def ds_loss(model: LossModel, eps1: float, alpha: float) -> float:
    if not 0 < eps1 < model.available:
        raise ValidationError(f"eps1 must lie in (0, {model.available}), got {eps1}")
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    return weighted_loss(model.d_u, model.d_w, eps1, model.available - eps1, alpha)


def optimal_alpha(A: float, B: float) -> float:
    """argmin over alpha of alpha^2 A + (1 - alpha)^2 B."""
    if not (A > 0 and B > 0):
        raise ValidationError(f"variances must be > 0, got A={A}, B={B}")
    return B / (A + B)


def reduced_loss(model: LossModel, eps1):
    """min over alpha of F(eps1, alpha) = A B / (A + B); accepts arrays."""
    eps1 = np.asarray(eps1, dtype=float)
    p = expit(-eps1)
    noise = _laplace_term(p, model.available - eps1)
    a = _rr_term(p) * model.d_u + noise
    b = _rr_term(p) * model.d_w + noise
    out = a * b / (a + b)
    return float(out) if out.ndim == 0 else out


def _newton(model: LossModel, x: float, lo: float, hi: float) -> Optional[float]:
    h = FD_STEP
    for it in range(NEWTON_MAX_ITER):
        gm, g0, gp = (reduced_loss(model, t) for t in (x - h, x, x + h))
        d1 = (gp - gm) / (2.0 * h)
        d2 = (gp - 2.0 * g0 + gm) / (h * h)
        if not (math.isfinite(d2) and d2 > 0):
            return None
        step = d1 / d2
        x -= step
        if not lo <= x <= hi:
            return None
        if abs(step) < NEWTON_TOL:
            logger.debug("newton converged after %d iterations at eps1=%.10g", it + 1, x)
            return x
    return None


def optimize_plan(d_u: float, d_w: float, eps: float, eps0: float) -> BudgetPlan:
    """
    Find (eps1, alpha) minimising the double-source loss for working degrees
    d_u, d_w. alpha is closed-form for each eps1; eps1 is located on a coarse
    grid inside the box and refined by finite-difference Newton on the reduced
    objective. When Newton leaves the box or stalls the best grid cell is
    refined by a bounded scalar search instead.
    """
    if not all(math.isfinite(v) for v in (d_u, d_w, eps, eps0)):
        raise ValidationError("optimizer inputs must be finite")
    model = LossModel(d_u, d_w, eps, eps0)
    lo, hi = BOX[0] * model.available, BOX[1] * model.available

    grid = np.linspace(lo, hi, GRID_POINTS)
    values = reduced_loss(model, grid)
    if not np.isfinite(values).any():
        raise OptimizationError(f"loss is not finite anywhere on the grid for {model}")
    i = int(np.nanargmin(values))
    best_x, best_g, solver = float(grid[i]), float(values[i]), "grid"

    refined = _newton(model, best_x, lo, hi)
    if refined is not None and reduced_loss(model, refined) <= best_g:
        best_x, best_g, solver = refined, reduced_loss(model, refined), "newton"
    else:
        left, right = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, GRID_POINTS - 1)])
        res = optimize.minimize_scalar(
            lambda t: reduced_loss(model, t),
            bounds=(left, right),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if res.success and res.fun <= best_g:
            best_x, best_g, solver = float(res.x), float(res.fun), "bounded"
        logger.debug("newton did not converge for %s; using %s search", model, solver)

    p = float(expit(-best_x))
    noise = _laplace_term(p, model.available - best_x)
    alpha = optimal_alpha(_rr_term(p) * d_u + noise, _rr_term(p) * d_w + noise)
    return BudgetPlan(
        eps0=eps0,
        eps1=best_x,
        eps2=model.available - best_x,
        alpha=alpha,
        solver=solver,
    )


def naive_expectation(c: float, d_u: float, d_w: float, n_opp: int, p: float) -> float:
    return c * (1 - p) ** 2 + (d_u + d_w - 2 * c) * p * (1 - p) + (n_opp - d_u - d_w + c) * p ** 2


def naive_loss(c: float, d_u: float, d_w: float, n_opp: int, p: float) -> float:
    """Exact mean squared error of the noisy-graph count: variance plus squared bias."""
    both, one, neither = (1 - p) ** 2, p * (1 - p), p ** 2
    variance = (
        c * both * (1 - both)
        + (d_u + d_w - 2 * c) * one * (1 - one)
        + (n_opp - d_u - d_w + c) * neither * (1 - neither)
    )
    bias = naive_expectation(c, d_u, d_w, n_opp, p) - c
    return variance + bias ** 2


def oner_loss(d_u: float, d_w: float, n_opp: int, p: float) -> float:
    v = _rr_term(p)
    return n_opp * v ** 2 + v * (d_u + d_w)


def central_loss(eps: float) -> float:
    return 2.0 / eps ** 2


def analytic_loss(
    algorithm: str,
    *,
    c: int,
    d_u: int,
    d_w: int,
    n_opp: int,
    eps: float,
    plan: Optional[BudgetPlan] = None,
) -> float:
    """Closed-form expected L2 loss of one estimate, given its realised plan."""
    if algorithm in ("naive", "oner"):
        p = float(expit(-eps))
        if algorithm == "naive":
            return naive_loss(c, d_u, d_w, n_opp, p)
        return oner_loss(d_u, d_w, n_opp, p)
    if algorithm == "central":
        return central_loss(eps)
    if plan is None:
        raise ValidationError(f"{algorithm} loss needs its budget plan")
    if algorithm == "ss":
        return ss_loss(d_u, plan.eps1, plan.eps2)
    if algorithm in ("ds", "ds_basic", "ds_public"):
        return weighted_loss(d_u, d_w, plan.eps1, plan.eps2, plan.alpha)
    raise ValidationError(f"unknown algorithm {algorithm!r}")
