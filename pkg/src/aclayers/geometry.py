"""Closed-curve geometry: curvature data, periodic grids, spectral operators.

The curve is arclength parameterized, so its Laplace-Beltrami operator is the
plain second derivative on a periodic interval of length ell. Curvature K(y)
must stay positive; the Jacobi operator d^2/dy^2 + K decides whether the
curve is nondegenerate (no periodic Jacobi fields), which every solvability
statement downstream relies on.

All fields live on uniform periodic grids and are differentiated
trigonometrically, so derivatives are exact on resolved Fourier modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

_POSITIVITY_GRID = 2048  # construction-time positivity check resolution
DEGENERACY_RATIO = 1e-8  # s_min < ratio * s_max flags a degenerate Jacobi operator


def _trig_eval(samples: np.ndarray, length: float, y: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of uniform periodic samples at y."""
    m = len(samples)
    c = np.fft.rfft(samples) / m
    k = np.arange(len(c))
    phase = np.exp(2j * np.pi * np.outer(np.asarray(y, dtype=float) / length, k))
    # interior modes count twice (conjugate pairs); mean once; Nyquist (m even) once
    w = np.full(len(c), 2.0)
    w[0] = 1.0
    if m % 2 == 0:
        w[-1] = 1.0
    return (phase * (w * c)).sum(axis=1).real


@dataclass(frozen=True)
class ClosedCurve:
    """Arclength-parameterized closed curve with positive curvature K(y).

    ``curvature`` is a callable y -> K(y) accepting arrays; use the
    constructors ``constant``, ``fourier``, ``from_samples`` rather than
    building one directly.
    """

    length: float
    curvature: Callable[[np.ndarray], np.ndarray]
    description: str = field(default="custom", compare=False)

    def __post_init__(self) -> None:
        if not self.length > 0.0:
            raise DomainError("curve length must be positive")
        y = np.linspace(0.0, self.length, _POSITIVITY_GRID, endpoint=False)
        k = np.asarray(self.curvature(y), dtype=float)
        if not np.all(np.isfinite(k)):
            raise DomainError("curvature evaluates to non-finite values")
        if np.min(k) <= 0.0:
            bad = y[int(np.argmin(k))]
            raise DomainError(
                f"curvature must be positive; K({bad:.6g}) = {np.min(k):.6g}")

    @staticmethod
    def constant(length: float, value: float) -> "ClosedCurve":
        return ClosedCurve(length, lambda y: np.full_like(np.asarray(y, dtype=float), value),
                           description=f"constant K={value}")

    @staticmethod
    def fourier(length: float, mean: float,
                cos: Sequence[float] = (), sin: Sequence[float] = ()) -> "ClosedCurve":
        """K(y) = mean + sum_k cos[k-1] cos(2 pi k y/ell) + sin[k-1] sin(2 pi k y/ell)."""
        cos_c = np.asarray(cos, dtype=float)
        sin_c = np.asarray(sin, dtype=float)

        def k_of(y: np.ndarray) -> np.ndarray:
            y = np.asarray(y, dtype=float)
            out = np.full(y.shape, float(mean))
            for k, a in enumerate(cos_c, start=1):
                out += a * np.cos(2.0 * np.pi * k * y / length)
            for k, a in enumerate(sin_c, start=1):
                out += a * np.sin(2.0 * np.pi * k * y / length)
            return out

        return ClosedCurve(length, k_of, description="fourier")

    @staticmethod
    def from_samples(length: float, values: Sequence[float]) -> "ClosedCurve":
        """Curvature given by uniform periodic samples, interpolated trigonometrically."""
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or len(vals) < 4:
            raise DomainError("need at least 4 curvature samples")
        return ClosedCurve(length, lambda y: _trig_eval(vals, length, np.asarray(y)),
                           description=f"samples n={len(vals)}")


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid: n points y_i = i * length/n, i = 0..n-1."""

    n: int
    length: float

    def __post_init__(self) -> None:
        if self.n < 16 or self.n % 2 != 0:
            raise DomainError("grid size must be even and at least 16")
        if not self.length > 0.0:
            raise DomainError("grid length must be positive")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    def points(self) -> np.ndarray:
        return np.arange(self.n) * (self.length / self.n)


@dataclass(frozen=True)
class PeriodicField:
    """Real samples f(y_i) on a periodic grid."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.grid.n,):
            raise DomainError(
                f"field has {vals.shape} values for a grid of {self.grid.n} points")
        if not np.all(np.isfinite(vals)):
            raise DomainError("field values must be finite")

    @staticmethod
    def from_function(grid: PeriodicGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "PeriodicField":
        return PeriodicField(grid, np.asarray(fn(grid.points()), dtype=float))


def _require_same_grid(a: PeriodicField, b: PeriodicField) -> None:
    if a.grid != b.grid:
        raise DomainError("fields live on different grids")


def sample_curvature(curve: ClosedCurve, grid: PeriodicGrid) -> PeriodicField:
    """Evaluate K on the grid; every sample must be positive."""
    if abs(grid.length - curve.length) > 1e-12 * curve.length:
        raise DomainError("grid length does not match curve length")
    vals = np.asarray(curve.curvature(grid.points()), dtype=float)
    if np.min(vals) <= 0.0:
        bad = grid.points()[int(np.argmin(vals))]
        raise DomainError(f"curvature must be positive; K({bad:.6g}) = {np.min(vals):.6g}")
    return PeriodicField(grid, vals)


def _fourier_multipliers(grid: PeriodicGrid) -> np.ndarray:
    """Angular wavenumbers 2 pi k / ell for the rfft layout."""
    return 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.spacing)


def first_derivative(f: PeriodicField) -> PeriodicField:
    """Spectral periodic df/dy; Nyquist mode dropped (odd derivative)."""
    k = _fourier_multipliers(f.grid)
    spec = np.fft.rfft(f.values) * (1j * k)
    if f.grid.n % 2 == 0:
        spec[-1] = 0.0
    return PeriodicField(f.grid, np.fft.irfft(spec, n=f.grid.n))


def second_derivative(f: PeriodicField) -> PeriodicField:
    """Spectral periodic d^2f/dy^2; exact on modes below n/2."""
    k = _fourier_multipliers(f.grid)
    spec = np.fft.rfft(f.values) * (-(k * k))
    return PeriodicField(f.grid, np.fft.irfft(spec, n=f.grid.n))


def jacobi_apply(f: PeriodicField, K: PeriodicField) -> PeriodicField:
    """Jacobi operator f'' + K f on the curve."""
    _require_same_grid(f, K)
    return PeriodicField(f.grid, second_derivative(f).values + K.values * f.values)


def ell0(curve: ClosedCurve, grid: PeriodicGrid) -> float:
    """Curvature-weighted length int_0^ell sqrt(K).

    Periodic trapezoid rule, spectrally accurate for smooth K.
    """
    k = sample_curvature(curve, grid)
    return float(grid.spacing * np.sum(np.sqrt(k.values)))


def second_derivative_matrix(grid: PeriodicGrid) -> np.ndarray:
    """Dense spectral d^2/dy^2 as an n x n matrix (for eigenproblems)."""
    n = grid.n
    k = _fourier_multipliers(grid)
    mult = -(k * k)
    eye = np.eye(n)
    # transform columns of the identity; D2 is symmetric circulant
    return np.fft.irfft(mult[:, None] * np.fft.rfft(eye, axis=0), n=n, axis=0)


def resample_field(f: PeriodicField, n: int) -> PeriodicField:
    """Trigonometric resampling onto an n-point grid of the same length."""
    if n == f.grid.n:
        return f
    g = PeriodicGrid(n, f.grid.length)
    return PeriodicField(g, _trig_eval(f.values, f.grid.length, g.points()))


def jacobi_singular_values(K: PeriodicField) -> tuple[float, float]:
    """(smallest, largest) singular value of the discrete Jacobi operator."""
    J = second_derivative_matrix(K.grid) + np.diag(K.values)
    s = np.linalg.svd(J, compute_uv=False)
    return float(s[-1]), float(s[0])


def jacobi_is_degenerate(K: PeriodicField) -> bool:
    """True when the Jacobi operator has a numerically periodic kernel.

    The unit circle of length 2 pi (K = 1) is the canonical degenerate case:
    cos and sin are Jacobi fields there.
    """
    s_min, s_max = jacobi_singular_values(K)
    return s_min < DEGENERACY_RATIO * s_max
