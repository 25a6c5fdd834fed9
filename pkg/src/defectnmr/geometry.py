"""Closed-form geometry factors for a tilted defect axis under a planar sample.

alpha is the angle between the defect quantization axis and the surface
normal; epsilon = d/R_max is the finite-sample correction (0 for a
half-space).
"""
import numpy as np


def _check(alpha, epsilon=0.0):
    alpha = np.asarray(alpha, dtype=float)
    epsilon = np.asarray(epsilon, dtype=float)
    if np.any((alpha < 0) | (alpha > np.pi)):
        raise ValueError("alpha must lie in [0, pi]")
    if np.any((epsilon < 0) | (epsilon > 1)):
        raise ValueError("epsilon must lie in [0, 1]")
    return alpha, epsilon


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def g_transverse(alpha, epsilon=0.0):
    """Transverse (x-y) signal factor, pi sin(2a) (1 + e^3/2 - 3e/2)."""
    alpha, epsilon = _check(alpha, epsilon)
    return _out(np.pi * np.sin(2 * alpha) * (1 + epsilon**3 / 2 - 1.5 * epsilon))


def g_longitudinal(alpha):
    """Longitudinal (z) signal factor, pi (cos 2a + 1/3)."""
    alpha, _ = _check(alpha)
    return _out(np.pi * (np.cos(2 * alpha) + 1 / 3))


def g_statistical(alpha):
    """Statistical-polarization factor 8 - 3 sin^4 a, used in the B_rms formula."""
    alpha, _ = _check(alpha)
    return _out(8 - 3 * np.sin(alpha) ** 4)


def geometry_table(n_points=181):
    """Rows of (alpha_rad, alpha_deg, G_t, G_l, G_stat) from 0 to 90 degrees."""
    if n_points < 2:
        raise ValueError("need at least 2 alpha points")
    alpha = np.linspace(0, np.pi / 2, n_points)
    return {
        "alpha_rad": alpha,
        "alpha_deg": np.degrees(alpha),
        "g_transverse": g_transverse(alpha),
        "g_longitudinal": g_longitudinal(alpha),
        "g_statistical": g_statistical(alpha),
    }
