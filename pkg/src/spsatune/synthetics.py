"""Analytic test objectives on the unit cube, each with its exact gradient."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Off-diagonal coupling of the cross-term quadratic: A = 2 I + 0.5 (S + S^T)
# with S the shift matrix.  Eigenvalues are 2 + cos(k pi / (n + 1)) >= 1.
CROSS_DIAG = 2.0
CROSS_OFF = 0.5
CUBIC_CROSS = 0.5
ROSENBROCK_LO, ROSENBROCK_HI = -2.0, 2.0


@dataclass(frozen=True)
class Synthetic:
    name: str
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    minimizer: Callable[[int], np.ndarray] | None = None

    def __call__(self, theta) -> float:
        return self.value(np.asarray(theta, dtype=float))


def shifted_quadratic(center=0.3) -> Synthetic:
    def value(t):
        return float(np.sum((t - center) ** 2))

    def gradient(t):
        return 2.0 * (np.asarray(t, dtype=float) - center)

    def minimizer(n):
        return np.broadcast_to(np.asarray(center, dtype=float), (n,)).copy()

    return Synthetic("quadratic", value, gradient, minimizer)


def cross_matrix(n: int) -> np.ndarray:
    A = CROSS_DIAG * np.eye(n)
    idx = np.arange(n - 1)
    A[idx, idx + 1] = CROSS_OFF
    A[idx + 1, idx] = CROSS_OFF
    return A


def cross_quadratic() -> Synthetic:
    def value(t):
        t = np.asarray(t, dtype=float)
        return float(t @ cross_matrix(len(t)) @ t)

    def gradient(t):
        t = np.asarray(t, dtype=float)
        return 2.0 * cross_matrix(len(t)) @ t

    return Synthetic("cross_quadratic", value, gradient, lambda n: np.zeros(n))


def cubic() -> Synthetic:
    """Sum of cubes plus ``0.5 * theta_i * theta_{i+1}^2`` couplings."""

    def value(t):
        t = np.asarray(t, dtype=float)
        return float(np.sum(t ** 3) + CUBIC_CROSS * np.sum(t[:-1] * t[1:] ** 2))

    def gradient(t):
        t = np.asarray(t, dtype=float)
        g = 3.0 * t ** 2
        g[:-1] += CUBIC_CROSS * t[1:] ** 2
        g[1:] += 2.0 * CUBIC_CROSS * t[:-1] * t[1:]
        return g

    return Synthetic("cubic", value, gradient, lambda n: np.zeros(n))


def rosenbrock() -> Synthetic:
    """Rosenbrock on [-2, 2]^n, rescaled onto the unit cube (minimum at 0.75)."""
    width = ROSENBROCK_HI - ROSENBROCK_LO

    def value(t):
        x = ROSENBROCK_LO + width * np.asarray(t, dtype=float)
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def gradient(t):
        x = ROSENBROCK_LO + width * np.asarray(t, dtype=float)
        g = np.zeros_like(x)
        r = x[1:] - x[:-1] ** 2
        g[:-1] += -400.0 * x[:-1] * r - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * r
        return width * g

    def minimizer(n):
        return np.full(n, (1.0 - ROSENBROCK_LO) / width)

    return Synthetic("rosenbrock", value, gradient, minimizer)


_CATALOG = {
    "quadratic": shifted_quadratic,
    "cross_quadratic": cross_quadratic,
    "cubic": cubic,
    "rosenbrock": rosenbrock,
}


def builtin_synthetics() -> dict[str, Callable[..., Synthetic]]:
    return dict(_CATALOG)


def get_synthetic(name: str, **params) -> Synthetic:
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise LookupError(f"unknown synthetic objective {name!r}; choose from {sorted(_CATALOG)}") from None
    return factory(**params)
