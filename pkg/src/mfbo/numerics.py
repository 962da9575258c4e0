"""Numerical primitives shared across the package.

Standard-normal helpers, Cholesky-based SPD solves, Latin hypercube
sampling, and a reproducible random stream. Everything here is
deterministic given its inputs (and, where applicable, the stream).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import log_ndtr, ndtr

from .errors import DimensionMismatch, EmptyInput, NotPositiveDefinite

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def norm_pdf(t):
    """Standard normal density, elementwise on arrays."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-0.5 * t * t) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


def norm_cdf(t):
    """Standard normal CDF, elementwise on arrays.

    Backed by ``scipy.special.ndtr`` (erf-based, accurate to machine
    precision across the real line).
    """
    out = ndtr(np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def norm_logcdf(t):
    """log of the standard normal CDF, stable far into the left tail."""
    out = log_ndtr(np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class RandomStream:
    """Deterministic random source.

    Wraps numpy's PCG64 generator seeded through a ``SeedSequence`` built
    from ``(seed, *key)``. Identical ``(seed, key)`` pairs reproduce
    identical draw sequences; ``derive`` builds statistically independent
    child streams without consuming draws from the parent.
    """

    seed: int
    key: tuple[int, ...] = ()
    rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        entropy = [int(self.seed), *(int(k) for k in self.key)]
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def derive(self, *subkeys: int) -> RandomStream:
        """Child stream keyed by ``subkeys``; independent of draws made so far."""
        return RandomStream(self.seed, self.key + tuple(int(k) for k in subkeys))

    # Thin passthroughs so call sites do not reach into .rng for the
    # common cases.
    def uniform(self, low=0.0, high=1.0, size=None):
        return self.rng.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.rng.normal(loc, scale, size)

    def standard_normal(self, size=None):
        return self.rng.standard_normal(size)

    def permutation(self, n: int) -> np.ndarray:
        return self.rng.permutation(n)

    def integers(self, low, high=None, size=None):
        return self.rng.integers(low, high, size)


def latin_hypercube(n: int, d: int, stream: RandomStream) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in the unit cube.

    Each dimension gets an independent random permutation of ``n``
    equal-width bins with one uniform draw inside each bin, so every
    one-dimensional projection hits every bin exactly once.

    Returns:
        Array of shape ``(n, d)`` with entries in ``[0, 1)``.
    """
    if n < 1 or d < 1:
        raise EmptyInput(f"latin_hypercube needs n >= 1 and d >= 1, got n={n}, d={d}")
    bins = np.empty((n, d), dtype=float)
    for j in range(d):
        bins[:, j] = stream.permutation(n)
    jitter = stream.uniform(size=(n, d))
    return (bins + jitter) / n


@dataclass(frozen=True)
class SpdFactor:
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix."""

    lower: np.ndarray

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def log_det(self) -> float:
        """log-determinant of the factored matrix (twice the log-diag sum)."""
        return float(2.0 * np.sum(np.log(np.diag(self.lower))))


def spd_factor(matrix: np.ndarray) -> SpdFactor:
    """Cholesky-factor a symmetric positive definite matrix.

    The caller is responsible for any diagonal jitter; nothing is added
    here.

    Raises:
        NotPositiveDefinite: if the factorization fails.
        DimensionMismatch: if ``matrix`` is not square.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {matrix.shape}")
    try:
        lower = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return SpdFactor(lower=lower)


def spd_solve(factor: SpdFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve ``A x = rhs`` given the Cholesky factor of ``A``."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != factor.n:
        raise DimensionMismatch(
            f"rhs has leading dimension {rhs.shape[0]}, factor is {factor.n}x{factor.n}"
        )
    return cho_solve((factor.lower, True), rhs, check_finite=False)


def solve_lower(factor: SpdFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve ``L x = rhs`` with the lower-triangular factor alone."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != factor.n:
        raise DimensionMismatch(
            f"rhs has leading dimension {rhs.shape[0]}, factor is {factor.n}x{factor.n}"
        )
    return solve_triangular(factor.lower, rhs, lower=True, check_finite=False)


def append_spd_row(factor: SpdFactor, cross: np.ndarray, diag: float) -> SpdFactor:
    """Grow a Cholesky factor by one row/column of the underlying matrix.

    Given the factor of A and the new border (cross covariances ``cross``
    and diagonal entry ``diag``), returns the factor of the bordered
    matrix in O(n^2).

    Raises:
        NotPositiveDefinite: if the bordered matrix is not positive definite.
    """
    lower = factor.lower
    n = lower.shape[0]
    cross = np.asarray(cross, dtype=float).reshape(n)
    row = solve_triangular(lower, cross, lower=True, check_finite=False)
    pivot2 = float(diag) - float(row @ row)
    if pivot2 <= 0.0 or not np.isfinite(pivot2):
        raise NotPositiveDefinite(
            f"appending a row left a non-positive pivot ({pivot2:.3e})"
        )
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = lower
    out[n, :n] = row
    out[n, n] = math.sqrt(pivot2)
    return SpdFactor(lower=out)
