"""Multiplicative-update solver (fixed-point iteration on the KKT system).

Updates, with element-wise product/division/square root and A = G^T G:

    G   <- G   * sqrt( (sum_i R_i G S_i) / (sum_i G S_i A S_i) )
    S_i <- S_i * sqrt( (G^T R_i G) / (A S_i A) )

Machine epsilon is added to every denominator entry (and only there).  Both
updates preserve non-negativity and zeros exactly; at a strictly positive
exact factorization both ratios are all-ones and the update is the identity.
Each iteration updates G first, then every S_i using the new G.
"""

from __future__ import annotations

import numpy as np

from .model import (
    MACHINE_EPS,
    DataBundle,
    Factorization,
    SolverConfig,
    TraceBuilder,
    _require_native,
    check_compatible,
    se_from_gram,
)


def fpm_step_g(bundle: DataBundle, fact: Factorization) -> np.ndarray:
    """One multiplicative update of G (S blocks held fixed)."""
    _require_native(fact, "fpm_step_g")
    check_compatible(bundle, fact)
    g = fact.G
    gram = g.T @ g
    num = np.zeros_like(g)
    sas = np.zeros_like(gram)
    for r, s in zip(bundle.R, fact.S):
        num += (r @ g) @ s
        sas += s @ gram @ s
    den = g @ sas + MACHINE_EPS
    return g * np.sqrt(num / den)


def fpm_step_s(bundle: DataBundle, fact: Factorization, i: int) -> np.ndarray:
    """One multiplicative update of S_i (G held fixed)."""
    _require_native(fact, "fpm_step_s")
    check_compatible(bundle, fact)
    g = fact.G
    gram = g.T @ g
    num = g.T @ (bundle.R[i] @ g)
    den = gram @ fact.S[i] @ gram + MACHINE_EPS
    return fact.S[i] * np.sqrt(num / den)


def fpm_solve(bundle: DataBundle, config: SolverConfig, start: Factorization):
    """Iterate the multiplicative updates from a native starting point.

    Returns (native factorization, trace).  SE is evaluated once per
    iteration after the S sweep, reusing the G^T G and G^T R_i G products of
    the S updates.  A non-finite objective aborts with the partial trace
    attached to the raised error.
    """
    if config.method != "fpm":
        raise ValueError(f"config.method is {config.method!r}, expected 'fpm'")
    _require_native(start, "fpm_solve")
    check_compatible(bundle, start)
    g = start.G.copy()
    s_list = [s.copy() for s in start.S]
    norms = bundle.norms_sq

    tracer = TraceBuilder(bundle, config)
    gram = g.T @ g
    mid = [g.T @ (r @ g) for r in bundle.R]
    tracer.start(se_from_gram(norms, gram, mid, s_list))

    stop = None
    for it in range(1, config.max_iterations + 1):
        num = np.zeros_like(g)
        sas = np.zeros_like(gram)
        for r, s in zip(bundle.R, s_list):
            num += (r @ g) @ s
            sas += s @ gram @ s
        g = g * np.sqrt(num / (g @ sas + MACHINE_EPS))

        gram = g.T @ g
        mid = [g.T @ (r @ g) for r in bundle.R]
        for i in range(bundle.N):
            den = gram @ s_list[i] @ gram + MACHINE_EPS
            s_list[i] = s_list[i] * np.sqrt(mid[i] / den)

        stop = tracer.step(it, se_from_gram(norms, gram, mid, s_list))
        if stop is not None:
            break
    return Factorization(g, s_list), tracer.finish(stop)
