"""Adaptive moment estimation on the absolute-value-transformed objective.

Per step and per variable matrix X (X ranges over G' and every S_i'):

    M_X <- beta1 M_X + (1 - beta1) dX
    V_X <- beta2 V_X + (1 - beta2) dX * dX
    X   <- X - eta * M_X / (sqrt(V_X) + eps)

with element-wise products, division and square root.  The step size follows
the schedule eta = alpha * sqrt(1 - (1 - beta2)^i) / (1 - (1 - beta1)^i); a
config switch selects the conventional beta^i correction factors instead.
No descent guarantee holds, so no monotonicity is asserted anywhere.

Also hosts the random-search hyper-parameter tuner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gradients import grads_from_residuals
from .initialization import lift_to_transformed, random_init
from .model import (
    DataBundle,
    Factorization,
    SolverConfig,
    SolverDivergedError,
    TraceBuilder,
    Transform,
    check_compatible,
    residuals,
)

TUNE_ALPHA_RANGE = (1e-4, 1e-1)
TUNE_BETA1_RANGE = (0.2, 0.999)
TUNE_BETA2_RANGE = (0.1, 0.999)
TUNE_RUNS_PER_PROBLEM = 3


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per variable matrix."""

    m_g: np.ndarray
    v_g: np.ndarray
    m_s: list[np.ndarray]
    v_s: list[np.ndarray]
    step_index: int = 0

    @classmethod
    def zeros_like(cls, fact: Factorization) -> "AdamState":
        return cls(
            m_g=np.zeros_like(fact.G),
            v_g=np.zeros_like(fact.G),
            m_s=[np.zeros_like(s) for s in fact.S],
            v_s=[np.zeros_like(s) for s in fact.S],
        )


def adam_eta(alpha: float, beta1: float, beta2: float, i: int,
             standard_bias_correction: bool = False) -> float:
    """Step size at step i >= 1; tends to alpha as i grows."""
    if standard_bias_correction:
        return alpha * math.sqrt(1.0 - beta2**i) / (1.0 - beta1**i)
    return alpha * math.sqrt(1.0 - (1.0 - beta2) ** i) / (1.0 - (1.0 - beta1) ** i)


def _moment_update(m, v, grad, eta, beta1, beta2, eps, x):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    x -= eta * m / (np.sqrt(v) + eps)


def adam_step(state: AdamState, fact: Factorization, grads, eta: float,
              beta1: float, beta2: float, eps: float):
    """Advance moments and variables one step, in place.

    ``grads`` is the (dG, [dS_i]) pair at the current point.  Returns the
    mutated (state, fact) for convenience.
    """
    dg, ds = grads
    _moment_update(state.m_g, state.v_g, dg, eta, beta1, beta2, eps, fact.G)
    for m, v, d, s in zip(state.m_s, state.v_s, ds, fact.S):
        _moment_update(m, v, d, eta, beta1, beta2, eps, s)
    state.step_index += 1
    return state, fact


def adam_solve(bundle: DataBundle, config: SolverConfig, start: Factorization):
    """Run adam from an ABS-coordinates starting point.

    Returns (native factorization, trace); the native factors are the
    element-wise absolute values of the final variables.  A non-finite
    gradient aborts with the partial trace attached to the raised error.
    """
    if config.method != "adam":
        raise ValueError(f"config.method is {config.method!r}, expected 'adam'")
    if start.coords is not Transform.ABS:
        raise ValueError(f"adam_solve expects abs-transform coordinates, got {start.coords.value}")
    check_compatible(bundle, start)

    fact = start.copy()
    state = AdamState.zeros_like(fact)
    tracer = TraceBuilder(bundle, config)
    z = residuals(bundle, fact)
    tracer.start(sum(float(zi.ravel() @ zi.ravel()) for zi in z))

    stop = None
    for it in range(1, config.max_iterations + 1):
        eta = adam_eta(
            config.adam_alpha, config.adam_beta1, config.adam_beta2, it,
            config.standard_bias_correction,
        )
        dg, ds = grads_from_residuals(fact, z)
        if not (np.isfinite(dg).all() and all(np.isfinite(d).all() for d in ds)):
            raise SolverDivergedError(
                f"gradient became non-finite at iteration {it}", records=tracer.records
            )
        adam_step(state, fact, (dg, ds), eta, config.adam_beta1,
                  config.adam_beta2, config.adam_epsilon)
        z = residuals(bundle, fact)
        stop = tracer.step(it, sum(float(zi.ravel() @ zi.ravel()) for zi in z))
        if stop is not None:
            break
    return fact.to_native(), tracer.finish(stop)


def _score_point(problems, alpha, beta1, beta2, run_seeds, max_iterations, mse_stop):
    """Max over problems of the mean final MSE of seeded random-start runs."""
    per_problem = []
    for (bundle, k), seeds in zip(problems, run_seeds):
        finals = []
        for seed in seeds:
            config = SolverConfig(
                method="adam", k=k, seed=int(seed),
                adam_alpha=alpha, adam_beta1=beta1, adam_beta2=beta2,
                max_iterations=max_iterations, mse_stop=mse_stop,
            )
            native = random_init(bundle.n, k, bundle.N, int(seed))
            start = lift_to_transformed(native, Transform.ABS)
            _, trace = adam_solve(bundle, config, start)
            finals.append(trace.final.mse)
        per_problem.append(float(np.mean(finals)))
    return float(max(per_problem)), per_problem


def tune_adam(problems, trials: int, seed: int, *, points=None,
              runs_per_problem: int = TUNE_RUNS_PER_PROBLEM,
              max_iterations: int | None = None, mse_stop: float = 1e-2):
    """Random-search tuning of (alpha, beta1, beta2) over a problem suite.

    ``problems`` is a sequence of (bundle, k) pairs, normally with k equal to
    the planted inner dimension.  Each trial triple is scored by the maximum
    over problems of the mean final MSE of ``runs_per_problem`` adam runs
    from seeded random starting points.  alpha is sampled log-uniformly on
    [1e-4, 1e-1] (three decades; uniform sampling would oversample the top
    decade), beta1 uniformly on [0.2, 0.999], beta2 on [0.1, 0.999].

    ``points`` replaces the random sampling with explicit (alpha, beta1,
    beta2) triples.  Returns trial dicts sorted by score (ties by trial
    index); deterministic for a fixed seed.
    """
    problems = [(b, int(k)) for b, k in problems]
    rng = np.random.default_rng(seed)
    if points is not None:
        triples = [tuple(float(x) for x in p) for p in points]
    else:
        triples = []
        for _ in range(trials):
            log_alpha = rng.uniform(math.log10(TUNE_ALPHA_RANGE[0]), math.log10(TUNE_ALPHA_RANGE[1]))
            beta1 = rng.uniform(*TUNE_BETA1_RANGE)
            beta2 = rng.uniform(*TUNE_BETA2_RANGE)
            triples.append((10.0**log_alpha, beta1, beta2))
    run_seeds = rng.integers(2**63, size=(len(triples), len(problems), runs_per_problem))

    rows = []
    for idx, (alpha, beta1, beta2) in enumerate(triples):
        score, per_problem = _score_point(
            problems, alpha, beta1, beta2, run_seeds[idx], max_iterations, mse_stop
        )
        rows.append(
            {
                "trial": idx,
                "alpha": alpha,
                "beta1": beta1,
                "beta2": beta2,
                "per_problem_mse": per_problem,
                "score": score,
            }
        )
    return sorted(rows, key=lambda row: (row["score"], row["trial"]))
