"""Low-level quadrature rules shared by the spectral and time-domain code."""

from __future__ import annotations

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def gauss_panels(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on consecutive panels ``edges[i], edges[i+1]``."""
    x, w = roots_legendre(order)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + half * (x[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def algebraic_tail(k0: float, exponent: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_{k0}^inf f(k) dk`` with ``f ~ k**(-exponent)``, ``exponent > 1``.

    Uses ``k = k0/u`` and Gauss-Jacobi nodes carrying the weight ``u**(exponent-2)``.
    """
    b = exponent - 2.0
    x, w = roots_jacobi(order, 0.0, b)
    u = 0.5 * (1.0 + x)
    nodes = k0 / u
    weights = 2.0 ** (-b - 1.0) * w * k0 * u ** (-2.0 - b)
    return nodes[::-1], weights[::-1]


def log_panel_rule(
    lo: float = -46.0, hi: float = 46.0, width: float = 0.5, order: int = 16
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``y`` and weights for ``int_0^inf g(y) dy`` through ``y = exp(u)``.

    Suited to integrands that decay algebraically at both ends and are analytic
    in a strip around the positive axis.
    """
    n = int(np.ceil((hi - lo) / width))
    u, wu = gauss_panels(np.linspace(lo, hi, n + 1), order)
    y = np.exp(u)
    return y, wu * y


def exp_moments(z: np.ndarray, m_max: int = 2) -> list[np.ndarray]:
    """``phi_m(z) = int_0^1 v**m exp(z v) dv`` for ``m = 0..m_max``.

    Taylor series for ``|z| < 1``, upward recurrence otherwise.
    """
    z = np.asarray(z, dtype=complex)
    out = [np.empty_like(z) for _ in range(m_max + 1)]
    small = np.abs(z) < 1.0
    if np.any(small):
        zs = z[small]
        for m in range(m_max + 1):
            term = np.ones_like(zs)
            acc = term / (m + 1)
            for j in range(1, 30):
                term = term * zs / j
                acc = acc + term / (m + j + 1)
            out[m][small] = acc
    big = ~small
    if np.any(big):
        zb = z[big]
        ez = np.exp(zb)
        prev = (ez - 1.0) / zb
        out[0][big] = prev
        for m in range(1, m_max + 1):
            prev = (ez - m * prev) / zb
            out[m][big] = prev
    return out


def richardson(values: np.ndarray, steps: np.ndarray, exponents: list[float]) -> float:
    """Extrapolate ``values(step) -> step = 0`` assuming an expansion in ``step**p``.

    Solves the (square or least-squares) system for the constant term.
    """
    values = np.asarray(values)
    steps = np.asarray(steps, dtype=float)
    cols = [np.ones_like(steps)] + [steps**p for p in exponents]
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A.astype(values.dtype), values, rcond=None)
    return coef[0]
