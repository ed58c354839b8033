"""Shared problem model: data bundles, factorizations, configs and traces.

The problem solved throughout this package is

    minimize   sum_i || R_i - G S_i G^T ||_F^2
    subject to G >= 0 (n x k),  S_i >= 0 symmetric (k x k),

for an N-tuple of symmetric non-negative data matrices R_1 .. R_N.  ``SE``
denotes the objective value and ``MSE = SE / sum_i ||R_i||_F^2`` its value
relative to the size of the data.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# Matches the double-precision machine epsilon used to guard denominators.
MACHINE_EPS = 2.220446049250313e-16

METHODS = ("fpm", "bcd", "gmels", "adam")

DEFAULT_MAX_ITERATIONS = {"fpm": 4000, "bcd": 300, "gmels": 1000, "adam": 3000}

# Stop reasons recorded on a ConvergenceTrace.
MSE_THRESHOLD = "mse_threshold"
DELTA_THRESHOLD = "delta_threshold"
MAX_ITERATIONS = "max_iterations"
OUT_OF_MEMORY_GUARD = "out_of_memory_guard"
STOP_REASONS = (MSE_THRESHOLD, DELTA_THRESHOLD, MAX_ITERATIONS, OUT_OF_MEMORY_GUARD)

# Input matrices must be symmetric to this relative tolerance; iterates are
# allowed to drift one hundred times further before anything is considered
# broken.
SYMMETRY_INPUT_RTOL = 1e-12
SYMMETRY_ITERATE_RTOL = 1e-10


class DimensionError(ValueError):
    """Shape mismatch between a factorization and a data bundle."""


class ValidationError(ValueError):
    """Input data violates the model invariants (symmetry, sign, format)."""


class MemoryBudgetError(RuntimeError):
    """A solver refused to start because its working set exceeds the budget."""

    def __init__(self, required_bytes: int, budget_bytes: int):
        self.required_bytes = int(required_bytes)
        self.budget_bytes = int(budget_bytes)
        super().__init__(
            f"working set of {required_bytes} bytes exceeds the memory budget "
            f"of {budget_bytes} bytes"
        )


class SolverDivergedError(RuntimeError):
    """The objective or a gradient became non-finite during a run.

    ``records`` carries the per-iteration records collected before the abort,
    for diagnosis.
    """

    def __init__(self, message: str, records=None):
        self.records = list(records or [])
        super().__init__(message)


class Transform(enum.Enum):
    """Element-wise change of variables that absorbs the sign constraint.

    ``IDENTITY`` means native (non-negative) coordinates.  ``ABS`` substitutes
    X = |X'| and ``SQUARE`` substitutes X = X' * X' element-wise; under either
    substitution the feasible set becomes all real matrices and the objective
    is minimized without projections.
    """

    IDENTITY = "identity"
    ABS = "abs"
    SQUARE = "square"

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self is Transform.IDENTITY:
            return x.copy()
        if self is Transform.ABS:
            return np.abs(x)
        return x * x

    def derivative(self, x: np.ndarray) -> np.ndarray:
        """Element-wise derivative; the ABS subgradient at 0 is taken as 0."""
        x = np.asarray(x, dtype=float)
        if self is Transform.IDENTITY:
            return np.ones_like(x)
        if self is Transform.ABS:
            return np.sign(x)
        return 2.0 * x


def _check_square(r: np.ndarray, name: str) -> None:
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValidationError(f"{name} is not square: shape {r.shape}")


def _check_symmetric(r: np.ndarray, name: str, rtol: float) -> None:
    scale = float(np.abs(r).max()) if r.size else 0.0
    asym = float(np.abs(r - r.T).max()) if r.size else 0.0
    if asym > rtol * scale:
        raise ValidationError(
            f"{name} is not symmetric: max |R - R^T| = {asym:.3e} "
            f"exceeds {rtol:g} * max|R| = {rtol * scale:.3e} "
            "(pass symmetrize=True to average with the transpose)"
        )


def _check_nonnegative(r: np.ndarray, name: str) -> None:
    if r.size and float(r.min()) < 0.0:
        i, j = np.unravel_index(int(np.argmin(r)), r.shape)
        raise ValidationError(
            f"{name} has negative entry {r[i, j]!r} at ({i}, {j})"
        )


@dataclass(frozen=True, eq=False)
class DataBundle:
    """An N-tuple of symmetric non-negative n x n matrices plus cached norms.

    Instances are immutable (the stored arrays are marked read-only) and can
    be shared freely across concurrent solver runs.
    """

    n: int
    N: int
    R: tuple[np.ndarray, ...]
    norm_sq_total: float
    label: str = ""

    @classmethod
    def from_matrices(cls, matrices, label: str = "", symmetrize: bool = False) -> "DataBundle":
        """Validate and wrap raw matrices.

        Raises ValidationError on non-square, asymmetric (beyond 1e-12
        relative, unless ``symmetrize``) or negative input.
        """
        mats = []
        for i, raw in enumerate(matrices):
            name = f"R_{i + 1}"
            r = np.array(raw, dtype=float)
            _check_square(r, name)
            if symmetrize:
                r = (r + r.T) / 2.0
            _check_symmetric(r, name, SYMMETRY_INPUT_RTOL)
            _check_nonnegative(r, name)
            r.setflags(write=False)
            mats.append(r)
        if not mats:
            raise ValidationError("a bundle needs at least one matrix")
        n = mats[0].shape[0]
        for i, r in enumerate(mats):
            if r.shape[0] != n:
                raise ValidationError(
                    f"R_{i + 1} has order {r.shape[0]}, expected {n}"
                )
        norm = sum(float(r.ravel() @ r.ravel()) for r in mats)
        return cls(n=n, N=len(mats), R=tuple(mats), norm_sq_total=norm, label=label)

    @cached_property
    def norms_sq(self) -> tuple[float, ...]:
        """Per-matrix squared Frobenius norms ||R_i||^2."""
        return tuple(float(r.ravel() @ r.ravel()) for r in self.R)


@dataclass
class Factorization:
    """Factor pair (G, [S_1 .. S_N]) in native or transformed coordinates.

    ``coords`` records the transform mapping the stored variables back to the
    native factors: the native pair is ``coords.apply(G)``,
    ``[coords.apply(S_i)]``.  In native coordinates all entries are
    non-negative; in transformed coordinates they are unrestricted, but every
    S_i stays symmetric either way.
    """

    G: np.ndarray
    S: list[np.ndarray]
    coords: Transform = Transform.IDENTITY

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        self.S = [np.asarray(s, dtype=float) for s in self.S]

    @property
    def k(self) -> int:
        return self.G.shape[1]

    @property
    def N(self) -> int:
        return len(self.S)

    def copy(self) -> "Factorization":
        return Factorization(self.G.copy(), [s.copy() for s in self.S], self.coords)

    def to_native(self) -> "Factorization":
        """Apply the coordinate transform, yielding non-negative factors."""
        f = self.coords
        return Factorization(f.apply(self.G), [f.apply(s) for s in self.S])


def check_compatible(bundle: DataBundle, fact: Factorization) -> None:
    """Raise DimensionError naming the offending matrix on any shape clash."""
    if fact.G.ndim != 2 or fact.G.shape[0] != bundle.n:
        raise DimensionError(
            f"G has shape {fact.G.shape}, expected ({bundle.n}, k)"
        )
    if len(fact.S) != bundle.N:
        raise DimensionError(
            f"factorization has {len(fact.S)} S matrices, bundle has N = {bundle.N}"
        )
    k = fact.G.shape[1]
    for i, s in enumerate(fact.S):
        if s.shape != (k, k):
            raise DimensionError(
                f"S_{i + 1} has shape {s.shape}, expected ({k}, {k})"
            )


def _require_native(fact: Factorization, what: str) -> None:
    if fact.coords is not Transform.IDENTITY:
        raise ValueError(f"{what} expects native coordinates, got {fact.coords.value}")


def se(bundle: DataBundle, fact: Factorization) -> float:
    """Objective sum_i ||R_i - G S_i G^T||_F^2 at a native-coordinates point."""
    _require_native(fact, "se")
    check_compatible(bundle, fact)
    total = 0.0
    for r, s in zip(bundle.R, fact.S):
        z = r - (fact.G @ s) @ fact.G.T
        total += float(z.ravel() @ z.ravel())
    return total


def mse(bundle: DataBundle, fact: Factorization) -> float:
    """SE divided by the total squared norm of the data."""
    if bundle.norm_sq_total <= 0.0:
        raise ValidationError("all-zero bundle: MSE is undefined")
    return se(bundle, fact) / bundle.norm_sq_total


def residuals(bundle: DataBundle, fact: Factorization, transform: Transform | None = None):
    """Residual matrices Z_i = R_i - f(G) f(S_i) f(G)^T, f = fact.coords.

    ``transform``, when given, must agree with the factorization coordinates;
    it exists so call sites can state the space they believe they are in.
    """
    if transform is not None and transform is not fact.coords:
        raise ValueError(
            f"transform {transform.value} does not match factorization "
            f"coordinates {fact.coords.value}"
        )
    check_compatible(bundle, fact)
    f = fact.coords
    fg = f.apply(fact.G)
    return [r - (fg @ f.apply(s)) @ fg.T for r, s in zip(bundle.R, fact.S)]


def se_from_gram(norms_sq, gram, mid, s_list) -> float:
    """SE via ||R - G S G^T||^2 = ||R||^2 - 2<M, S> + <A S A, S>.

    ``gram`` is A = G^T G and ``mid[i]`` is M_i = G^T R_i G; this evaluates the
    objective in O(N k^3) without forming n x n residuals.  Clamped at zero:
    cancellation can push the exact-fit value a few ulps negative.
    """
    total = 0.0
    for nrm, m, s in zip(norms_sq, mid, s_list):
        asa = gram @ s @ gram
        total += nrm - 2.0 * float(np.vdot(m, s)) + float(np.vdot(asa, s))
    return max(total, 0.0)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    se: float
    mse: float
    elapsed_seconds: float


@dataclass
class ConvergenceTrace:
    """Per-iteration (iteration, SE, MSE, wall clock) records for one run."""

    records: list[TraceRecord] = field(default_factory=list)
    stop_reason: str = MAX_ITERATIONS

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    def mse_at(self, iteration: int) -> float:
        """MSE of the last record at or before ``iteration``."""
        best = None
        for rec in self.records:
            if rec.iteration <= iteration:
                best = rec
            else:
                break
        if best is None:
            raise ValueError(f"no record at or before iteration {iteration}")
        return best.mse


class TraceBuilder:
    """Collects trace records and applies the stopping rules for one run.

    After every iteration the rules are checked in the order: plateau
    (|MSE_t - MSE_{t-1}| < delta_stop), threshold (MSE_t < mse_stop),
    iteration cap.  The plateau check runs first so a run started at a fixed
    point terminates with ``delta_threshold`` rather than tripping the MSE
    threshold it already satisfies.
    """

    def __init__(self, bundle: DataBundle, config: "SolverConfig"):
        if bundle.norm_sq_total <= 0.0:
            raise ValidationError("all-zero bundle: MSE stopping rules are undefined")
        self._norm = bundle.norm_sq_total
        self._config = config
        self._t0 = time.monotonic()
        self._prev_mse: float | None = None
        self._last: tuple[int, float, float] | None = None
        self.records: list[TraceRecord] = []

    def _append(self, iteration: int, se_value: float, mse_value: float) -> None:
        if self.records and self.records[-1].iteration == iteration:
            return
        self.records.append(
            TraceRecord(iteration, se_value, mse_value, time.monotonic() - self._t0)
        )

    def start(self, se_value: float) -> float:
        """Record the starting point (iteration 0) and seed the plateau rule."""
        mse_value = se_value / self._norm
        self._append(0, se_value, mse_value)
        self._prev_mse = mse_value
        self._last = (0, se_value, mse_value)
        return mse_value

    def step(self, iteration: int, se_value: float) -> str | None:
        """Record iteration ``iteration`` and return a stop reason or None."""
        if not np.isfinite(se_value):
            raise SolverDivergedError(
                f"objective became non-finite ({se_value}) at iteration {iteration}",
                records=self.records,
            )
        mse_value = se_value / self._norm
        if iteration % self._config.trace_stride == 0:
            self._append(iteration, se_value, mse_value)
        self._last = (iteration, se_value, mse_value)
        prev, self._prev_mse = self._prev_mse, mse_value
        if prev is not None and abs(mse_value - prev) < self._config.delta_stop:
            return DELTA_THRESHOLD
        if mse_value < self._config.mse_stop:
            return MSE_THRESHOLD
        if iteration >= self._config.max_iterations:
            return MAX_ITERATIONS
        return None

    def finish(self, stop_reason: str) -> ConvergenceTrace:
        """Force-record the final iteration and build the trace."""
        if self._last is not None:
            self._append(*self._last)
        return ConvergenceTrace(records=self.records, stop_reason=stop_reason)


@dataclass
class SolverConfig:
    """Method choice plus every knob the four solvers read.

    ``max_iterations`` defaults per method: 4000 (fpm), 300 (bcd), 1000
    (gmels), 3000 (adam).  ``bcd_inner_iterations`` is the projected-gradient
    step count per block.  ``standard_bias_correction`` switches the adam
    step-size schedule from the default (1-beta)^i correction factors to the
    conventional beta^i form.  ``memory_budget_bytes`` bounds the gmels
    working set (None: environment variable SNMTF_MEMORY_BUDGET, else 16 GiB).
    """

    method: str
    k: int
    max_iterations: int | None = None
    mse_stop: float = 1e-2
    delta_stop: float = 1e-10
    seed: int = 0
    adam_alpha: float = 0.002
    adam_beta1: float = 0.95
    adam_beta2: float = 0.995
    adam_epsilon: float = 1e-8
    standard_bias_correction: bool = False
    bcd_inner_iterations: int = 10
    trace_stride: int = 1
    memory_budget_bytes: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.max_iterations is None:
            self.max_iterations = DEFAULT_MAX_ITERATIONS[self.method]
        for name in ("k", "max_iterations", "bcd_inner_iterations", "trace_stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


@dataclass
class LinePolynomial:
    """Univariate step-size polynomial p(t) = sum_j c[j] t^j.

    ``c`` holds ascending coefficients; degree 4 for the coordinate-descent
    quartic, 12 for the squared-variable exact line search.
    """

    c: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.c)

    def derivative_coeffs(self) -> np.ndarray:
        """Ascending coefficients of p'(t)."""
        return np.arange(1, len(self.c)) * self.c[1:]
