"""Admissible initial data: a closed-form regular part plus a self-consistent charge."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .quadrature import gauss_panels
from .spectral_kernels import SQRT2PI, ModelParams, SpectralGrid, green_origin

FAMILIES = ("gaussian", "gaussian_packet")


class MultipleOrNoRoot(ValueError):
    """The charge consistency condition has no root on the requested branch."""

    def __init__(self, message: str, roots):
        super().__init__(message)
        self.roots = list(roots)


@dataclass(frozen=True)
class RegularPart:
    """Regular part ``phi_{lam,0}`` of the datum.

    A Gaussian packet ``amplitude * exp(-x^2/(2 width^2) + i k0 x)`` plus an
    optional combination ``sum_j c_j G_s^{lam_j}`` whose coefficients sum to zero
    (so that the combination stays in ``H^{2s}``). The Green terms arise when a
    datum is re-expressed with another regularizing parameter, and for standing
    waves.
    """

    family: str = "gaussian"
    amplitude: complex = 1.0
    width: float = 1.0
    center_frequency: float = 0.0
    green_terms: tuple = field(default=())

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not self.width > 0:
            raise ValueError("width must be positive")
        if self.family == "gaussian" and self.center_frequency != 0.0:
            raise ValueError("plain gaussian has no modulation; use gaussian_packet")
        if self.green_terms:
            total = sum(c for c, _ in self.green_terms)
            scale = max(abs(c) for c, _ in self.green_terms)
            if abs(total) > 1e-12 * max(1.0, scale):
                raise ValueError("Green-term coefficients must sum to zero")

    # Gaussian piece -------------------------------------------------------
    def gaussian_hat(self, k):
        k = np.asarray(k, dtype=float)
        w = self.width
        return self.amplitude * w * np.exp(-0.5 * w * w * (k - self.center_frequency) ** 2)

    def gaussian_support(self, n_sigma: float = 9.0) -> tuple[float, float]:
        half = n_sigma / self.width
        return self.center_frequency - half, self.center_frequency + half

    # whole regular part -----------------------------------------------------
    def phi_hat(self, k, s: float):
        out = self.gaussian_hat(k).astype(complex)
        kap = np.abs(np.asarray(k, dtype=float)) ** (2 * s)
        for c, lam in self.green_terms:
            out = out + c / (SQRT2PI * (kap + lam))
        return out

    def dphi_hat(self, k, s: float):
        k = np.asarray(k, dtype=float)
        out = -(self.width**2) * (k - self.center_frequency) * self.gaussian_hat(k)
        out = out.astype(complex)
        if self.green_terms:
            kap = np.abs(k) ** (2 * s)
            dkap = 2 * s * np.abs(k) ** (2 * s - 1) * np.sign(k)
            for c, lam in self.green_terms:
                out = out - c * dkap / (SQRT2PI * (kap + lam) ** 2)
        return out

    def value_at_origin(self, s: float) -> complex:
        """Closed form of ``phi_{lam,0}(0)``."""
        v = complex(self.amplitude)
        for c, lam in self.green_terms:
            v += c * green_origin(s, lam)
        return v

    def dilate(self, nu: float, s: float) -> "RegularPart":
        """Regular part of ``x -> phi(nu x)``; the Fourier side is ``phi_hat(k/nu)/nu``."""
        if not nu > 0:
            raise ValueError("nu must be positive")
        terms = tuple((c * nu ** (2 * s - 1), lam * nu ** (2 * s)) for c, lam in self.green_terms)
        return replace(
            self, width=self.width / nu, center_frequency=self.center_frequency * nu, green_terms=terms
        )

    def with_green_terms(self, extra) -> "RegularPart":
        merged: dict[float, complex] = {}
        for c, lam in (*self.green_terms, *extra):
            merged[lam] = merged.get(lam, 0.0) + c
        terms = tuple((c, lam) for lam, c in merged.items() if c != 0)
        return replace(self, green_terms=terms)


@dataclass(frozen=True)
class InitialDatum:
    """``psi_0 = phi_{lam,0} - beta |q0|^(2 sigma) q0 G_s^lam`` with ``q0 = psi_0(0)``."""

    regular: RegularPart
    q0: complex
    params: ModelParams

    @property
    def r0(self) -> complex:
        p = self.params
        return p.beta * abs(self.q0) ** (2 * p.sigma) * self.q0

    def consistency_residual(self, phi0: complex | None = None) -> float:
        """``|q0 + beta G(0) |q0|^(2 sigma) q0 - phi(0)|``."""
        p = self.params
        if phi0 is None:
            phi0 = self.regular.value_at_origin(p.s)
        return abs(self.q0 + green_origin(p.s, p.lam) * self.r0 - phi0)

    def phi_hat(self, k):
        return self.regular.phi_hat(k, self.params.s)

    def psi0_hat(self, k):
        p = self.params
        kap = np.abs(np.asarray(k, dtype=float)) ** (2 * p.s)
        return self.phi_hat(k) - self.r0 / (SQRT2PI * (kap + p.lam))

    def dpsi0_hat(self, k):
        p = self.params
        k = np.asarray(k, dtype=float)
        kap = np.abs(k) ** (2 * p.s)
        dkap = 2 * p.s * np.abs(k) ** (2 * p.s - 1) * np.sign(k)
        return self.regular.dphi_hat(k, p.s) + self.r0 * dkap / (SQRT2PI * (kap + p.lam) ** 2)

    def rebase(self, lam: float) -> "InitialDatum":
        """Same ``psi_0`` written with regularizing parameter ``lam``."""
        p = self.params
        if lam == p.lam:
            return self
        reg = self.regular.with_green_terms([(self.r0, lam), (-self.r0, p.lam)])
        return InitialDatum(reg, self.q0, p.with_lambda(lam))


def phi_origin_quadrature(regular: RegularPart, s: float, grid: SpectralGrid) -> complex:
    """``phi_{lam,0}(0)`` by k-quadrature of its Fourier transform."""
    return complex(grid.integrate(regular.phi_hat(grid.k, s))) / SQRT2PI


def _radial_roots(c: float, sigma: float, target: float) -> list[float]:
    """All real ``x`` with ``x + c |x|^(2 sigma) x = target`` (``target >= 0``)."""
    g = lambda x: x + c * abs(x) ** (2 * sigma) * x - target
    if c == 0.0 or sigma == 0.0:
        d = 1.0 + c
        return [target / d] if d != 0 else ([] if target != 0 else [0.0])
    roots = []
    if c > 0:
        hi = max(1.0, target)
        while g(hi) < 0:
            hi *= 2
        roots.append(optimize.brentq(g, 0.0, hi, xtol=1e-15, rtol=1e-15) if target > 0 else 0.0)
        return roots
    # c < 0: x(1 - |c| |x|^(2 sigma)) has a positive hump and a root past x_c on both sides
    xc = (1.0 / (-c)) ** (1.0 / (2 * sigma))
    xm = (1.0 / ((-c) * (2 * sigma + 1))) ** (1.0 / (2 * sigma))
    if target == 0.0:
        roots.append(0.0)
    elif g(xm) >= 0:
        roots.append(optimize.brentq(g, 0.0, xm, xtol=1e-15, rtol=1e-15))
        if g(xm) > 0:
            hi = xc
            while g(hi) > 0:
                hi *= 2
            roots.append(optimize.brentq(g, xm, hi, xtol=1e-15, rtol=1e-15))
    if target == 0.0:
        roots.extend([xc, -xc])
    else:
        lo = -2.0 * xc
        while g(lo) < 0:
            lo *= 2
        roots.append(optimize.brentq(g, lo, -xc, xtol=1e-15, rtol=1e-15))
    return sorted(roots, key=abs)


def solve_q0(regular: RegularPart, params: ModelParams, damping: float = 0.5, tol: float = 1e-12) -> complex:
    """Charge ``q0`` with ``q0 + beta G(0) |q0|^(2 sigma) q0 = phi(0)`` on the branch of ``beta = 0``.

    The root has the phase of ``phi(0)``. A damped fixed-point iteration is tried
    first; Newton polishing on the radial equation takes over if it stalls. All
    real roots along the phase line are attached to the error when the branch
    does not exist.
    """
    p = params
    phi0 = regular.value_at_origin(p.s)
    c = p.beta * green_origin(p.s, p.lam)
    if p.beta == 0.0:
        return complex(phi0)
    rho, phase = abs(phi0), (phi0 / abs(phi0) if phi0 != 0 else 1.0)
    roots = _radial_roots(c, p.sigma, rho)
    if p.sigma == 0.0:
        if not roots:
            raise MultipleOrNoRoot("1 + beta G(0) = 0: consistency condition is singular", [])
        return complex(roots[0] * phase)
    x_hump = math.inf if c > 0 else (1.0 / ((-c) * (2 * p.sigma + 1))) ** (1 / (2 * p.sigma))
    branch = [x for x in roots if 0 <= x <= x_hump * (1 + 1e-12)]
    if not branch:
        raise MultipleOrNoRoot(f"no root connected to beta=0 for |phi(0)|={rho:.6g}", [x * phase for x in roots])
    # damped fixed point x <- (1-d) x + d (rho - c x^(2 sigma+1)), Newton fallback
    x = rho
    for _ in range(200):
        x_new = (1 - damping) * x + damping * (rho - c * abs(x) ** (2 * p.sigma) * x)
        if abs(x_new - x) < tol * max(1.0, rho):
            x = x_new
            break
        x = x_new
    else:
        x = branch[0]
    for _ in range(50):
        gx = x + c * abs(x) ** (2 * p.sigma) * x - rho
        dg = 1 + c * (2 * p.sigma + 1) * abs(x) ** (2 * p.sigma)
        step = gx / dg
        x -= step
        if abs(step) < 1e-16 * max(1.0, abs(x)):
            break
    if abs(x - branch[0]) > 1e-8 * max(1.0, rho):
        x = branch[0]
    return complex(x * phase)


def make_datum(regular: RegularPart, params: ModelParams) -> InitialDatum:
    return InitialDatum(regular, solve_q0(regular, params), params)


def datum_from_config(cfg: dict, params: ModelParams) -> InitialDatum:
    """Build a datum from the documented keys ``family, amplitude_re, amplitude_im, width, center_frequency``."""
    reg = RegularPart(
        family=cfg.get("family", "gaussian"),
        amplitude=complex(cfg.get("amplitude_re", 1.0), cfg.get("amplitude_im", 0.0)),
        width=float(cfg.get("width", 1.0)),
        center_frequency=float(cfg.get("center_frequency", 0.0)),
    )
    return make_datum(reg, params)


def gaussian_free_grid(regular: RegularPart, s: float, t_max: float, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes on the Gaussian support resolving ``exp(-i|k|^(2s) t)`` up to ``t_max``."""
    lo, hi = regular.gaussian_support()
    lo, hi = min(lo, -1e-3), max(hi, 1e-3)
    edges = [0.0]
    near = 0.25 ** np.arange(1, 16)
    for side, bound in ((1.0, hi), (-1.0, lo)):
        pts = [side * x for x in near if x < abs(bound)][::-1]
        k = abs(pts[-1]) if pts else 0.0
        k = max(k, near[0])
        pts.append(side * k)
        while k < abs(bound):
            rate = 2 * s * k ** (2 * s - 1) * t_max + 1.0
            k = min(k + min(0.25, 6.0 / rate), abs(bound))
            pts.append(side * k)
        edges.extend(pts)
    edges = np.unique(np.asarray(edges))
    return gauss_panels(edges, order)
