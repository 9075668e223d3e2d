"""Polar-angle grid on [0, pi]: stencils, quadrature, sphere areas.

Axisymmetric fields on S^d are even about both poles, so derivatives use
ghost nodes filled by reflection.  The same quadrature is shared by the
hypersurface and conformal modules so that ratio monitors never mix rules.
"""

from __future__ import annotations

import math

import numpy as np

QUADRATURE = "composite-simpson"
STENCIL = "central-4th-order, even reflection at poles"
MIN_INTERVALS = 32


def sphere_area(d: int) -> float:
    """Area of the unit sphere S^d, 2 pi^((d+1)/2) / Gamma((d+1)/2)."""
    if d < 0:
        raise ValueError("sphere dimension must be >= 0")
    return 2.0 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)


def uniform_theta(N: int) -> np.ndarray:
    check_intervals(N)
    return np.linspace(0.0, np.pi, N + 1)


def check_intervals(N: int) -> None:
    if N < MIN_INTERVALS or N % 2:
        raise ValueError(f"need an even number of intervals >= {MIN_INTERVALS}, got {N}")


def check_theta(theta: np.ndarray) -> float:
    """Validate a uniform grid spanning [0, pi]; return the spacing."""
    theta = np.asarray(theta, dtype=float)
    N = theta.size - 1
    check_intervals(N)
    h = np.pi / N
    if abs(theta[0]) > 1e-12 or abs(theta[-1] - np.pi) > 1e-12:
        raise ValueError("theta grid must span [0, pi]")
    if np.max(np.abs(np.diff(theta) - h)) > 1e-9 * h:
        raise ValueError("theta grid must be uniform")
    return h


def _pad_even(f: np.ndarray) -> np.ndarray:
    return np.concatenate([f[2:0:-1], f, f[-2:-4:-1]])


def d1(f: np.ndarray, h: float) -> np.ndarray:
    g = _pad_even(f)
    return (-g[4:] + 8 * g[3:-1] - 8 * g[1:-3] + g[:-4]) / (12 * h)


def d2(f: np.ndarray, h: float) -> np.ndarray:
    g = _pad_even(f)
    return (-g[4:] + 16 * g[3:-1] - 30 * g[2:-2] + 16 * g[1:-3] - g[:-4]) / (12 * h * h)


def cot_times(df: np.ndarray, d2f: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """cot(theta) * f_theta, with the pole limit f_thetatheta at 0 and pi."""
    out = np.empty_like(df)
    inner = slice(1, -1)
    out[inner] = df[inner] / np.tan(theta[inner])
    out[0] = d2f[0]
    out[-1] = d2f[-1]
    return out


def simpson(f: np.ndarray, h: float) -> float:
    w = np.ones_like(f)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(h / 3.0 * np.dot(w, f))


def integrate_sphere(f: np.ndarray, theta: np.ndarray, d: int) -> float:
    """Integral over S^d of an axisymmetric function given on the grid."""
    h = check_theta(theta)
    return sphere_area(d - 1) * simpson(f * np.sin(theta) ** (d - 1), h)
