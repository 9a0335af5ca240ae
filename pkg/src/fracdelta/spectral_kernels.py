"""Closed-form and quadrature kernels of the fractional delta model.

Conventions: unitary Fourier transform, ``(-Delta)^s`` acts as ``|k|^(2s)``, and
``kappa`` always denotes ``|k|^(2s)``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .quadrature import algebraic_tail, gauss_panels, richardson

SQRT2PI = math.sqrt(2.0 * math.pi)


class GridCalibrationError(RuntimeError):
    """The spectral grid does not reproduce the Green's function at the origin."""


class ExtrapolationError(RuntimeError):
    """A one-sided limit did not stabilize under refinement."""


@dataclass(frozen=True)
class ModelParams:
    """Fractional order ``s``, coupling ``beta``, power ``sigma``, regularizer ``lam``."""

    s: float
    beta: float
    sigma: float
    lam: float = 1.0

    def __post_init__(self):
        if not (0.5 < self.s <= 1.0):
            raise ValueError(f"s must lie in (1/2, 1], got {self.s}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")

    @property
    def alpha(self) -> float:
        """Abel exponent ``1/(2s)``."""
        return 0.5 / self.s

    @property
    def sigma_c(self) -> float:
        return 2.0 * self.s - 1.0

    def with_lambda(self, lam: float) -> "ModelParams":
        return replace(self, lam=lam)


def _s_of(p) -> float:
    return p.s if isinstance(p, ModelParams) else float(p)


# ---------------------------------------------------------------- constants


def const_a(params) -> complex:
    """``U_s(1, 0)``: Gamma closed form of the free propagator at the origin."""
    s = _s_of(params)
    return gamma(0.5 / s) * np.exp(-1j * math.pi / (4 * s)) / (2 * math.pi * s)


def const_a_quadrature(params) -> complex:
    """Direct evaluation of ``(1/2pi) int exp(-i|rho|^(2s)) d rho``.

    After ``w = rho^(2s)`` the integrand is ``exp(-i w) w^(1/(2s)-1)``; the
    endpoint singularity is integrated with an algebraic weight on ``[0, 1]`` and
    the tail with the QAWF Fourier rule (cycle-wise integration plus epsilon
    extrapolation).
    """
    s = _s_of(params)
    al = 0.5 / s
    kw = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    head_c, _ = integrate.quad(np.cos, 0.0, 1.0, weight="alg", wvar=(al - 1.0, 0.0), **kw)
    head_s, _ = integrate.quad(np.sin, 0.0, 1.0, weight="alg", wvar=(al - 1.0, 0.0), **kw)

    def g(w):
        return w ** (al - 1.0)

    tail_c, _ = integrate.quad(g, 1.0, np.inf, weight="cos", wvar=1.0, limlst=200)
    tail_s, _ = integrate.quad(g, 1.0, np.inf, weight="sin", wvar=1.0, limlst=200)
    val = (head_c + tail_c) - 1j * (head_s + tail_s)
    return val / (2 * math.pi * s)


def const_b(params) -> complex:
    """``b(s) = -i a(s) 2s/(2s-1)``."""
    s = _s_of(params)
    return -1j * const_a(s) * 2 * s / (2 * s - 1)


def const_b_quadrature(params) -> complex:
    """Direct evaluation of ``(1/2pi) int (exp(-i|rho|^(2s)) - 1)/|rho|^(2s) d rho``."""
    s = _s_of(params)
    al = 0.5 / s
    kw = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    # on [0,1]: (cos w - 1) w^(al-2) and -sin w w^(al-2), both integrable at 0
    head_c, _ = integrate.quad(lambda w: (np.cos(w) - 1.0) * w ** (al - 2.0), 0.0, 1.0, **kw)
    head_s, _ = integrate.quad(lambda w: np.sinc(w / math.pi), 0.0, 1.0, weight="alg", wvar=(al - 1.0, 0.0), **kw)

    def g(w):
        return w ** (al - 2.0)

    tail_c, _ = integrate.quad(g, 1.0, np.inf, weight="cos", wvar=1.0, limlst=200)
    tail_s, _ = integrate.quad(g, 1.0, np.inf, weight="sin", wvar=1.0, limlst=200)
    tail_one = 1.0 / (1.0 - al)  # int_1^inf w^(al-2) dw
    val = (head_c + tail_c - tail_one) - 1j * (head_s + tail_s)
    return val / (2 * math.pi * s)


def propagator_at_origin(t: float, params) -> complex:
    """``U_s(t, 0) = a(s) t^(-1/(2s))``."""
    if not t > 0:
        raise ValueError("propagator at the origin needs t > 0")
    s = _s_of(params)
    return const_a(s) * t ** (-0.5 / s)


# ----------------------------------------------------------- Green function


def green_hat(k, params: ModelParams):
    k = np.asarray(k, dtype=float)
    return 1.0 / (SQRT2PI * (np.abs(k) ** (2 * params.s) + params.lam))


def green_origin(s: float, lam: float) -> float:
    """``G_s^lam(0) = lam^(1/(2s)-1) / (2s sin(pi/(2s)))``."""
    return lam ** (0.5 / s - 1.0) / (2 * s * math.sin(math.pi / (2 * s)))


def green_at_origin(params: ModelParams) -> float:
    return green_origin(params.s, params.lam)


def green_norm_sq(s: float, lam: float) -> float:
    """``||G_s^lam||^2 = (1/pi) int_0^inf (k^(2s)+lam)^(-2) dk`` in closed form."""
    return (2 * s - 1) * lam ** (0.5 / s - 2.0) / (4 * s * s * math.sin(math.pi / (2 * s)))


def green_seminorm_sq(s: float, lam: float) -> float:
    """``||(-Delta)^(s/2) G_s^lam||^2``, i.e. ``G(0) - lam ||G||^2``."""
    return lam ** (0.5 / s - 1.0) / (4 * s * s * math.sin(math.pi / (2 * s)))


# ------------------------------------------------------------ spectral grid


@dataclass(frozen=True)
class SpectralGrid:
    """Symmetric quadrature on the frequency axis with an algebraic tail rule.

    ``k``/``w`` cover the whole real line; ``inner`` marks nodes inside
    ``[-K_max, K_max]`` (the tail nodes beyond are only accurate for
    non-oscillatory algebraically decaying integrands).
    """

    k: np.ndarray
    w: np.ndarray
    K_max: float
    inner: np.ndarray
    s: float
    t_resolve: float
    calibration_error: float = math.inf
    tol: float = 1e-8
    report: list = field(default_factory=list, compare=False)

    @property
    def calibrated(self) -> bool:
        return self.calibration_error <= self.tol

    @property
    def size(self) -> int:
        return self.k.size

    def integrate(self, values) -> complex:
        return np.sum(self.w * values, axis=-1)

    def require_calibrated(self):
        if not self.calibrated:
            raise GridCalibrationError(
                f"grid error {self.calibration_error:.3e} exceeds tolerance {self.tol:.1e}"
            )

    def dump_report(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["K_max", "nodes", "target", "achieved_error"])
            writer.writerows(self.report)


def _half_line_edges(s: float, K_max: float, t_resolve: float, density: float) -> np.ndarray:
    # geometric grading toward the kink of |k|^(2s) at the origin
    near = 1.0 * 0.25 ** np.arange(0, 18)[::-1]
    edges = [0.0, *near]
    k = 1.0
    while k < K_max:
        rate = 2 * s * k ** (2 * s - 1) * t_resolve + 1.0
        k = min(k + min(0.5, density / rate), K_max)
        edges.append(k)
    return np.asarray(edges)


def default_K_max(s: float, tail_tol: float = 1e-5) -> float:
    """Truncation where an ``|k|^(-4s)`` tail integrates to ``tail_tol``."""
    return float(min(2000.0, max(40.0, (tail_tol * (4 * s - 1)) ** (1.0 / (1.0 - 4 * s)))))


def build_grid(
    params: ModelParams,
    K_max: float | None = None,
    t_resolve: float = 1.0,
    order: int = 20,
    tail_order: int = 60,
    density: float = 8.0,
    tol: float = 1e-8,
) -> SpectralGrid:
    """Build a grid and record its self-calibration error against ``G(0)``.

    ``t_resolve`` is the largest time for which ``exp(-i |k|^(2s) t)`` must be
    resolved on ``[-K_max, K_max]``.
    """
    s = params.s
    K = default_K_max(s) if K_max is None else float(K_max)
    edges = _half_line_edges(s, K, t_resolve, density)
    kin, win = gauss_panels(edges, order)
    ktl, wtl = algebraic_tail(K, 2 * s, tail_order)
    kp = np.concatenate([kin, ktl])
    wp = np.concatenate([win, wtl])
    inner_p = np.concatenate([np.ones(kin.size, bool), np.zeros(ktl.size, bool)])
    k = np.concatenate([-kp[::-1], kp])
    w = np.concatenate([wp[::-1], wp])
    inner = np.concatenate([inner_p[::-1], inner_p])
    target = 2 * math.pi * green_at_origin(params)
    achieved = float(np.sum(w / (np.abs(k) ** (2 * s) + params.lam)))
    err = abs(achieved - target) / target
    return SpectralGrid(
        k=k, w=w, K_max=K, inner=inner, s=s, t_resolve=t_resolve,
        calibration_error=err, tol=tol, report=[[K, k.size, target, err]],
    )


def calibrate_grid(params: ModelParams, t_resolve: float = 1.0, tol: float = 1e-8, **kw) -> SpectralGrid:
    """Raise the Gauss orders until the calibration invariant holds."""
    report = []
    order, tail_order = kw.pop("order", 20), kw.pop("tail_order", 60)
    for _ in range(6):
        grid = build_grid(params, t_resolve=t_resolve, order=order, tail_order=tail_order, tol=tol, **kw)
        report.extend(grid.report)
        if grid.calibrated:
            return replace(grid, report=report)
        order, tail_order = order + 8, tail_order * 2
    raise GridCalibrationError(f"could not reach {tol:.1e}; last error {grid.calibration_error:.3e}")


# ----------------------------------------------------------- x-space values


def inverse_transform(values_hat, grid: SpectralGrid, x, inner_only: bool = True) -> np.ndarray:
    """``(1/sqrt(2pi)) int exp(ikx) values_hat(k) dk`` at each ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mask = grid.inner if inner_only else np.ones_like(grid.inner)
    k, w = grid.k[mask], grid.w[mask]
    v = np.asarray(values_hat)[..., mask]
    phase = np.exp(1j * np.outer(x, k))
    return (phase * w) @ v.T / SQRT2PI if v.ndim > 1 else (phase * w) @ v / SQRT2PI


def green_profile(x, params: ModelParams, grid: SpectralGrid) -> np.ndarray:
    """``G_s^lam(x)`` by cosine transform: grid nodes on ``[0, K]`` plus a QAWF tail."""
    grid.require_calibrated()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pos = grid.inner & (grid.k > 0)
    kk, ww = grid.k[pos], grid.w[pos]
    s, lam = params.s, params.lam
    out = np.empty(x.shape, dtype=float)
    for i, xi in enumerate(np.abs(x)):
        if xi == 0.0:
            out[i] = green_at_origin(params)
            continue
        head = np.sum(ww * np.cos(kk * xi) / (kk ** (2 * s) + lam))
        tail, _ = integrate.quad(
            lambda k: 1.0 / (k ** (2 * s) + lam), grid.K_max, np.inf, weight="cos", wvar=xi, limlst=200
        )
        out[i] = (head + tail) / math.pi
    return out


def frac_derivative(values_hat, k, mu: float) -> np.ndarray:
    """Fourier multiplier ``i |k|^mu sgn(k)`` of the odd fractional derivative ``D^mu``."""
    if not (0.0 < mu <= 1.0):
        raise ValueError("mu must lie in (0, 1]")
    k = np.asarray(k, dtype=float)
    return 1j * np.abs(k) ** mu * np.sign(k) * np.asarray(values_hat)


def green_frac_derivative(x: float, params: ModelParams) -> float:
    """``D^(2s-1) G_s^lam(x) = -(1/pi) int_0^inf sin(kx) k^(2s-1)/(k^(2s)+lam) dk``."""
    s, lam = params.s, params.lam
    if x == 0.0:
        return 0.0

    def f(k):
        return k ** (2 * s - 1) / (k ** (2 * s) + lam)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, _ = integrate.quad(f, 0.0, 1.0, weight="sin", wvar=abs(x), epsabs=1e-14, epsrel=1e-13, limit=400)
        tail, _ = integrate.quad(f, 1.0, np.inf, weight="sin", wvar=abs(x), limlst=400, epsabs=1e-14)
    return -math.copysign(1.0, x) * (head + tail) / math.pi


def one_sided_limit(fun, side: float, params: ModelParams, h0: float = 1e-2, levels: int = 6) -> float:
    """Richardson limit of ``fun(side * x)`` as ``x -> 0+`` on ``x = h0, h0/2, ...``."""
    xs = h0 * 0.5 ** np.arange(levels)
    vals = np.array([fun(side * x) for x in xs])
    exps = [1.0, 2 * params.s, 2.0, 1.0 + 2 * params.s][: levels - 2]
    lim = richardson(vals, xs, exps)
    lim2 = richardson(vals[1:], xs[1:], exps[:-1])
    if abs(lim - lim2) > 1e-5 * max(1.0, abs(lim)):
        raise ExtrapolationError(f"one-sided limit unstable: {lim} vs {lim2}")
    return float(np.real(lim)) if np.isrealobj(vals) else lim


def green_jump_check(params: ModelParams, grid: SpectralGrid | None = None) -> float:
    """``D^(2s-1)G(0+) - D^(2s-1)G(0-)``, expected to be ``-1``."""
    if grid is not None:
        grid.require_calibrated()
    plus = one_sided_limit(lambda x: green_frac_derivative(x, params), +1.0, params)
    minus = one_sided_limit(lambda x: green_frac_derivative(x, params), -1.0, params)
    return plus - minus


def green_form_identity_terms(params: ModelParams, grid: SpectralGrid) -> tuple[float, float, float]:
    """``(G(0), lam ||G||^2, ||(-Delta)^(s/2) G||^2)`` with norms by grid quadrature."""
    grid.require_calibrated()
    gh = green_hat(grid.k, params)
    norm_sq = float(grid.integrate(gh**2))
    semi_sq = float(grid.integrate(np.abs(grid.k) ** (2 * params.s) * gh**2))
    return green_at_origin(params), params.lam * norm_sq, semi_sq


def green_form_identity_check(params: ModelParams, grid: SpectralGrid) -> float:
    g0, a, b = green_form_identity_terms(params, grid)
    return abs(g0 - a - b)


def green_origin_quadrature(params: ModelParams) -> float:
    """``(1/pi) int_0^inf dk/(k^(2s)+lam)`` by adaptive quadrature (independent of the grid)."""
    s, lam = params.s, params.lam
    f = lambda k: 1.0 / (k ** (2 * s) + lam)
    head, _ = integrate.quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    # k = 1/u on the tail: int_0^1 u^(2s-2)/(1+lam u^(2s)) du
    tail, _ = integrate.quad(
        lambda u: 1.0 / (1.0 + lam * u ** (2 * s)), 0.0, 1.0,
        weight="alg", wvar=(2 * s - 2, 0.0), epsabs=0, epsrel=1e-13, limit=200,
    )
    return (head + tail) / math.pi


def conto2_quadrature(s: float, omega: float) -> float:
    """``(1/pi) int_0^inf dk/(k^(2s)+omega)^2`` by adaptive quadrature."""
    f = lambda k: 1.0 / (k ** (2 * s) + omega) ** 2
    head, _ = integrate.quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(
        lambda u: 1.0 / (1.0 + omega * u ** (2 * s)) ** 2, 0.0, 1.0,
        weight="alg", wvar=(4 * s - 2, 0.0), epsabs=0, epsrel=1e-13, limit=200,
    )
    return (head + tail) / math.pi
