"""Starting points: spectral deterministic G, seeded random factors, lifts."""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg

from . import bcd
from .model import DataBundle, Factorization, Transform, ValidationError

# Above this order the dense eigendecomposition of sum_i R_i is replaced by an
# iterative largest-magnitude eigensolver.
DENSE_EIG_MAX_ORDER = 2000

ZERO_COLUMN_FILL = 1e-8

# Below this fraction of the top eigenvalue magnitude an eigenvalue counts as
# numerically zero and its eigenvector as arbitrary nullspace noise.
NULL_EIGENVALUE_RTOL = 1e-12


def _dominant_part(x: np.ndarray) -> np.ndarray:
    """Positive or negative part of an eigenvector, whichever has the larger
    euclidean norm (ties keep the positive part)."""
    pos = np.maximum(x, 0.0)
    neg = np.maximum(-x, 0.0)
    part = pos if np.linalg.norm(pos) >= np.linalg.norm(neg) else neg
    if not part.any():
        # Unreachable for a nonzero eigenvector; guards degenerate solver output.
        part = part + ZERO_COLUMN_FILL
    return part


def deterministic_g(bundle: DataBundle, k: int) -> np.ndarray:
    """Non-negative starting G from the spectrum of R = sum_i R_i.

    Takes the eigenvectors of the k largest-magnitude eigenvalues of R and
    keeps each vector's dominant sign part, concatenated column-wise.
    Deterministic: identical bundle and k give identical output.

    When k exceeds the numerical rank of R, the surplus eigenvectors are
    direction-free nullspace noise; those columns use the element-wise
    absolute value instead of a sign part, because a sign part is half exact
    zeros and zero entries are permanently frozen by both the multiplicative
    updates and the transformed-coordinates dynamics.
    """
    if not 1 <= k <= bundle.n:
        raise ValueError(f"k must be in [1, {bundle.n}], got {k}")
    total = np.zeros((bundle.n, bundle.n))
    for r in bundle.R:
        total += r
    if bundle.n <= DENSE_EIG_MAX_ORDER:
        w, v = np.linalg.eigh(total)
    else:
        v0 = np.full(bundle.n, 1.0 / np.sqrt(bundle.n))
        w, v = scipy.sparse.linalg.eigsh(total, k=k, which="LM", v0=v0)
    order = np.argsort(-np.abs(w))[:k]
    floor = NULL_EIGENVALUE_RTOL * float(np.abs(w).max())
    cols = []
    for j in order:
        if abs(w[j]) <= floor:
            cols.append(np.abs(v[:, j]))
        else:
            cols.append(_dominant_part(v[:, j]))
    return np.column_stack(cols)


def random_symmetric_list(rng: np.random.Generator, k: int, count: int) -> list[np.ndarray]:
    """``count`` symmetric k x k matrices, uniform(0,1) entries symmetrized."""
    out = []
    for _ in range(count):
        s = rng.random((k, k))
        out.append((s + s.T) / 2.0)
    return out


def random_init(n: int, k: int, N: int, seed: int) -> Factorization:
    """Uniform(0,1) starting factors; S_i symmetrized as (S + S^T)/2."""
    rng = np.random.default_rng(seed)
    g = rng.random((n, k))
    return Factorization(g, random_symmetric_list(rng, k, N))


def init_s_from_g(bundle: DataBundle, g: np.ndarray, iterations: int = 10) -> list[np.ndarray]:
    """S blocks fitted to a fixed G by the projected-gradient inner solve.

    Starts every S_i from a constant matrix (entries 0.5).  With G = 0 the
    gradient vanishes and the constant start is returned unchanged.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != bundle.n:
        raise ValueError(f"G has shape {g.shape}, expected ({bundle.n}, k)")
    if g.size and float(g.min()) < 0.0:
        raise ValueError("G must be non-negative")
    k = g.shape[1]
    gram = g.T @ g
    out = []
    for r in bundle.R:
        mid = g.T @ (r @ g)
        s0 = np.full((k, k), bcd.INITIAL_S_VALUE)
        out.append(bcd._s_inner_solve(gram, mid, s0, iterations))
    return out


def lift_to_transformed(fact: Factorization, transform: Transform) -> Factorization:
    """Re-express a native factorization so ``transform.apply`` recovers it.

    ABS keeps the entries (they are already the non-negative representatives);
    SQUARE takes element-wise square roots and rejects negative input.
    """
    if fact.coords is not Transform.IDENTITY:
        raise ValueError("lift_to_transformed expects native coordinates")
    mats = [fact.G] + list(fact.S)
    for name, m in zip(["G"] + [f"S_{i + 1}" for i in range(len(fact.S))], mats):
        if m.size and float(m.min()) < 0.0:
            raise ValidationError(f"{name} has a negative entry; cannot lift")
    if transform is Transform.IDENTITY:
        return fact.copy()
    if transform is Transform.ABS:
        return Factorization(fact.G.copy(), [s.copy() for s in fact.S], Transform.ABS)
    return Factorization(np.sqrt(fact.G), [np.sqrt(s) for s in fact.S], Transform.SQUARE)
