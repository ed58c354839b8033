"""Gradient descent with exact line search on the squared-variable objective.

In SQUARE coordinates the objective

    SE = sum_i || R_i - G'^2 S_i'^2 G'^2T ||^2        (squares element-wise)

is a polynomial, so along the negative gradient it restricts to a degree-12
univariate polynomial p(t) = SE(G' - t dG', S_i' - t dS_i') whose thirteen
coefficients can be assembled exactly: the residual of the trial point
expands as Z_i(t) = sum_{j=0..6} A_ij t^j, its element-wise square is the
discrete convolution B_ij = sum_r A_ir * A_i,j-r, and c_j sums the entries of
B_ij over i.  Every iteration steps all variables by the global minimizer of
p, so SE never increases.

The seven A matrices per data matrix are n x n; the solver refuses to start
when 7 N n^2 doubles exceed the memory budget (configurable; environment
variable SNMTF_MEMORY_BUDGET, default 16 GiB).
"""

from __future__ import annotations

import itertools
import os

import numpy as np

from .gradients import grads_from_residuals
from .model import (
    DataBundle,
    Factorization,
    LinePolynomial,
    MemoryBudgetError,
    SolverConfig,
    TraceBuilder,
    Transform,
    check_compatible,
    residuals,
)

MEMORY_BUDGET_ENV = "SNMTF_MEMORY_BUDGET"
DEFAULT_MEMORY_BUDGET = 16 * 2**30

# Coefficient below 1e-14 of the largest are treated as zero when the
# derivative's companion matrix is formed.
LEADING_COEFF_RTOL = 1e-14
REAL_ROOT_IMAG_RTOL = 1e-8

# (X + t D)^2 = X^2 + 2t (X*D) + t^2 D^2: per-power factors and weights.
_POWER_WEIGHTS = (1.0, 2.0, 1.0)


def resolve_memory_budget(config: SolverConfig) -> int:
    if config.memory_budget_bytes is not None:
        return int(config.memory_budget_bytes)
    env = os.environ.get(MEMORY_BUDGET_ENV)
    if env:
        return int(env)
    return DEFAULT_MEMORY_BUDGET


def _require_square_coords(fact: Factorization, what: str) -> None:
    if fact.coords is not Transform.SQUARE:
        raise ValueError(f"{what} expects square-transform coordinates, got {fact.coords.value}")


def _line_poly_coefficients(r_list, g, s_list, step_g, step_s, residual_list) -> np.ndarray:
    """Ascending coefficients of p(t) = SE(G + t step_G, S_i + t step_S_i).

    ``residual_list`` must hold the residuals of the current point (they are
    the constant terms A_i0).  All squares/products below are element-wise;
    the matrix products assemble the 27 expansion terms of the trial-point
    residual grouped by total power of t.
    """
    n = g.shape[0]
    g_pow = (g * g, g * step_g, step_g * step_g)
    coeffs = np.zeros(13)
    a_stack = np.empty((7, n, n))
    for r, s, ds, z in zip(r_list, s_list, step_s, residual_list):
        s_pow = (s * s, s * ds, ds * ds)
        left = [[g_pow[ai] @ s_pow[bi] for bi in range(3)] for ai in range(3)]
        a_stack[0] = z
        a_stack[1:] = 0.0
        for ai, bi, ci in itertools.product(range(3), repeat=3):
            if ai == bi == ci == 0:
                continue
            weight = _POWER_WEIGHTS[ai] * _POWER_WEIGHTS[bi] * _POWER_WEIGHTS[ci]
            a_stack[ai + bi + ci] -= weight * (left[ai][bi] @ g_pow[ci].T)
        gram = np.tensordot(a_stack, a_stack, axes=([1, 2], [1, 2]))
        for j in range(13):
            for rr in range(max(0, j - 6), min(j, 6) + 1):
                coeffs[j] += gram[rr, j - rr]
    return coeffs


def line_poly_coeffs(bundle: DataBundle, fact: Factorization, grad_g, grad_s) -> LinePolynomial:
    """Degree-12 polynomial p(t) = SE(G - t dG, S_i - t dS_i).

    ``grad_g`` / ``grad_s`` are the gradients at the current point; the sign
    flip to the descent direction happens here, so p describes exactly the
    trial step the solver takes.
    """
    _require_square_coords(fact, "line_poly_coeffs")
    check_compatible(bundle, fact)
    z = residuals(bundle, fact)
    step_g = -np.asarray(grad_g, dtype=float)
    step_s = [-np.asarray(d, dtype=float) for d in grad_s]
    c = _line_poly_coefficients(bundle.R, fact.G, fact.S, step_g, step_s, z)
    return LinePolynomial(c)


def poly_minimize(poly: LinePolynomial) -> float:
    """Global minimizer of p among {0} and the real stationary points.

    Stationary points are the roots of p', found as eigenvalues of the
    balanced companion matrix after stripping leading coefficients below
    1e-14 of the largest.  Near-real roots (|imag| <= 1e-8 (1 + |real|)) are
    kept.  Ties prefer smaller p, then smaller |t|, then the negative sign.
    """
    dc = poly.derivative_coeffs()
    if dc.size == 0:
        return 0.0
    scale = float(np.abs(dc).max())
    if scale == 0.0:
        return 0.0
    keep = np.nonzero(np.abs(dc) > LEADING_COEFF_RTOL * scale)[0]
    dc = dc[: keep[-1] + 1]
    if len(dc) == 1:
        # p' is a nonzero constant: p is effectively linear; stay at 0.
        return 0.0
    roots = np.roots(dc[::-1])
    real = [float(r.real) for r in roots if abs(r.imag) <= REAL_ROOT_IMAG_RTOL * (1.0 + abs(r.real))]
    candidates = np.array([0.0] + real)
    values = poly(candidates)
    order = np.lexsort((candidates, np.abs(candidates), values))
    return float(candidates[order[0]])


def working_set_bytes(bundle: DataBundle) -> int:
    """Budgeted size of the per-iteration expansion matrices: 7 N n^2 doubles."""
    return 7 * bundle.N * bundle.n * bundle.n * 8


def gmels_solve(bundle: DataBundle, config: SolverConfig, start: Factorization):
    """Run the exact line search from a SQUARE-coordinates starting point.

    Returns (native factorization, trace); the native factors are the
    element-wise squares of the final variables.  Raises MemoryBudgetError
    before the first iteration when the coefficient working set would exceed
    the configured budget.
    """
    if config.method != "gmels":
        raise ValueError(f"config.method is {config.method!r}, expected 'gmels'")
    _require_square_coords(start, "gmels_solve")
    check_compatible(bundle, start)
    budget = resolve_memory_budget(config)
    required = working_set_bytes(bundle)
    if required > budget:
        raise MemoryBudgetError(required, budget)

    fact = start.copy()
    tracer = TraceBuilder(bundle, config)
    z = residuals(bundle, fact)
    tracer.start(sum(float(zi.ravel() @ zi.ravel()) for zi in z))

    stop = None
    for it in range(1, config.max_iterations + 1):
        dg, ds = grads_from_residuals(fact, z)
        step_g = -dg
        step_s = [-d for d in ds]
        poly = LinePolynomial(
            _line_poly_coefficients(bundle.R, fact.G, fact.S, step_g, step_s, z)
        )
        t = poly_minimize(poly)
        if t != 0.0:
            fact.G += t * step_g
            for s, d in zip(fact.S, step_s):
                s += t * d
        z = residuals(bundle, fact)
        stop = tracer.step(it, sum(float(zi.ravel() @ zi.ravel()) for zi in z))
        if stop is not None:
            break
    return fact.to_native(), tracer.finish(stop)
