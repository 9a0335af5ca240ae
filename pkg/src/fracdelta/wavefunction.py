"""Reconstruction of the wavefunction from a charge trajectory.

With ``r(t) = beta |q|^(2 sigma) q`` known on the time grid, the Fourier
transform of the solution is

    psi_hat(t, k) = exp(-i kap t) psi0_hat(k) - (i / sqrt(2 pi)) D(t, k),
    D(t, k) = int_0^t exp(-i kap (t - tau)) r(tau) dtau,        kap = |k|^(2s),

and, after one integration by parts,

    phi_hat(t, k) = exp(-i kap t) phi0_hat(k) + G_hat(k) int_0^t exp(-i kap (t - tau)) rho(tau) dtau,
    rho = r' - i lam r,     psi_hat = phi_hat - r(t) G_hat.

Time integrals are evaluated exactly for the piecewise-linear interpolant of
their data (Filon-type weights), so arbitrarily large ``kap h`` is harmless.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .charge_equation import ChargeTrajectory
from .initial_data import InitialDatum
from .quadrature import exp_moments
from .spectral_kernels import SQRT2PI, SpectralGrid, green_hat, green_origin, green_profile, inverse_transform


@dataclass
class WaveSnapshot:
    """``psi_hat`` and its regular part at time ``t`` on the nodes ``k`` (weights ``w``)."""

    t: float
    k: np.ndarray
    w: np.ndarray
    psi_hat: np.ndarray
    phi_hat: np.ndarray
    r_t: complex
    q_t: complex
    dpsi_hat: np.ndarray | None = None
    x: np.ndarray | None = None
    psi_x: np.ndarray | None = None
    k_tail: np.ndarray | None = None
    w_tail: np.ndarray | None = None
    phi_tail: np.ndarray | None = None

    def integrate_phi(self, weight_fn=None, other=None):
        """``int weight phi_hat other dk`` over the inner nodes plus the asymptotic tail."""
        def part(k, w, phi):
            v = w * phi
            if weight_fn is not None:
                v = v * weight_fn(k)
            if other is not None:
                v = v * other(k)
            return np.sum(v)

        total = part(self.k, self.w, self.phi_hat)
        if self.phi_tail is not None:
            total += part(self.k_tail, self.w_tail, self.phi_tail)
        return complex(total)

    def decomposition_residual(self, params) -> float:
        """``max |psi_hat - (phi_hat - r G_hat)|``; zero up to rounding."""
        return float(np.max(np.abs(self.psi_hat - (self.phi_hat - self.r_t * green_hat(self.k, params)))))

    def write_csv(self, path_k, path_x=None):
        with open(path_k, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "re_psi_hat", "im_psi_hat"])
            for row in zip(self.k, self.psi_hat.real, self.psi_hat.imag):
                wr.writerow([repr(float(v)) for v in row])
        if path_x is not None and self.psi_x is not None:
            with open(path_x, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["x", "re_psi", "im_psi", "abs_psi"])
                for row in zip(self.x, self.psi_x.real, self.psi_x.imag, np.abs(self.psi_x)):
                    wr.writerow([repr(float(v)) for v in row])


class FilonMarch:
    """Recursion for ``D(t) = int_0^t e^{-i kap (t-tau)} g dtau`` and ``M(t) = int_0^t (t-tau) e^{...} g dtau``.

    ``g`` is piecewise linear between the supplied samples. One step of length
    ``dt`` from ``g_a`` to ``g_b`` maps

        D <- e D + dt (g_a phi1 + g_b (phi0 - phi1))
        M <- e (M + dt D) + dt^2 (g_a phi2 + g_b (phi1 - phi2))

    with ``e = exp(z)``, ``z = -i kap dt`` and ``phi_m(z) = int_0^1 v^m e^{z v} dv``.
    """

    def __init__(self, kap: np.ndarray, with_moment: bool = False):
        self.kap = np.asarray(kap, dtype=float)
        self.with_moment = with_moment
        self.D = np.zeros(self.kap.shape, dtype=complex)
        self.M = np.zeros(self.kap.shape, dtype=complex) if with_moment else None
        self._cache: dict[float, tuple] = {}

    def _coeffs(self, dt: float):
        c = self._cache.get(dt)
        if c is None:
            z = -1j * self.kap * dt
            c = (np.exp(z), *exp_moments(z, 2))
            if len(self._cache) < 4:
                self._cache[dt] = c
        return c

    def step(self, g_a: complex, g_b: complex, dt: float):
        if dt <= 0:
            return
        e, p0, p1, p2 = self._coeffs(dt)
        if self.with_moment:
            self.M = e * (self.M + dt * self.D) + dt * dt * (g_a * p2 + g_b * (p1 - p2))
        self.D = e * self.D + dt * (g_a * p1 + g_b * (p0 - p1))

    def copy(self) -> "FilonMarch":
        out = FilonMarch.__new__(FilonMarch)
        out.kap, out.with_moment, out._cache = self.kap, self.with_moment, self._cache
        out.D = self.D.copy()
        out.M = None if self.M is None else self.M.copy()
        return out


def _locate(t: float, traj: ChargeTrajectory) -> tuple[int, float]:
    """Node index ``n`` with ``t_n <= t < t_{n+1}`` and the remainder ``t - t_n``."""
    if t < 0 or t > traj.t_end * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {traj.t_end}]")
    n = min(int(math.floor(t / traj.h + 1e-9)), traj.n_nodes - 1)
    return n, max(0.0, t - traj.t[n])


def _interp(vals: np.ndarray, n: int, frac: float) -> complex:
    if frac == 0.0 or n + 1 >= vals.size:
        return complex(vals[n])
    return complex(vals[n] + (vals[n + 1] - vals[n]) * frac)


def _integrate_to(t: float, k, traj: ChargeTrajectory, data: np.ndarray, with_moment: bool):
    kap = np.abs(np.asarray(k, dtype=float)) ** (2 * traj.params.s)
    fm = FilonMarch(kap, with_moment)
    n, rem = _locate(t, traj)
    for j in range(n):
        fm.step(data[j], data[j + 1], traj.h)
    if rem > 0:
        fm.step(data[n], _interp(data, n, rem / traj.h), rem)
    return fm, kap


def psi_hat_direct(t: float, k, traj: ChargeTrajectory, datum: InitialDatum) -> np.ndarray:
    """``exp(-i kap t) psi0_hat - (i/sqrt(2 pi)) int_0^t exp(-i kap (t-tau)) r dtau``."""
    fm, kap = _integrate_to(t, k, traj, traj.r, False)
    return np.exp(-1j * kap * t) * datum.psi0_hat(k) - 1j * fm.D / SQRT2PI


def regular_part_hat(t: float, k, traj: ChargeTrajectory, datum: InitialDatum) -> np.ndarray:
    """``phi_hat(t, k)`` from ``rho = r' - i lam r`` (``r'`` by finite differences)."""
    lam = datum.params.lam
    rho = traj.r_dot - 1j * lam * traj.r
    fm, kap = _integrate_to(t, k, traj, rho, False)
    return np.exp(-1j * kap * t) * datum.phi_hat(k) + green_hat(k, datum.params) * fm.D


def psi_hat_byparts(t: float, k, traj: ChargeTrajectory, datum: InitialDatum) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(psi_hat, phi_hat)`` with ``psi_hat = phi_hat - r(t) G_hat``."""
    phi = regular_part_hat(t, k, traj, datum)
    n, rem = _locate(t, traj)
    r_t = _interp(traj.r, n, rem / traj.h)
    return phi - r_t * green_hat(k, datum.params), phi


def dk_psi_hat(t: float, k, traj: ChargeTrajectory, datum: InitialDatum) -> np.ndarray:
    """``d/dk psi_hat``: exact derivative of the direct representation.

    ``exp(-i kap t)(dpsi0 - i kap' t psi0) - (kap'/sqrt(2 pi)) int_0^t (t - tau) exp(-i kap (t-tau)) r dtau``.
    """
    k = np.asarray(k, dtype=float)
    fm, kap = _integrate_to(t, k, traj, traj.r, True)
    s = datum.params.s
    dkap = 2 * s * np.abs(k) ** (2 * s - 1) * np.sign(k)
    e = np.exp(-1j * kap * t)
    return e * (datum.dpsi0_hat(k) - 1j * dkap * t * datum.psi0_hat(k)) - dkap * fm.M / SQRT2PI


def origin_value(snap: WaveSnapshot, params) -> complex:
    """``psi(t, 0)`` by k-quadrature of the regular part minus ``r G(0)``."""
    return snap.integrate_phi() / SQRT2PI - snap.r_t * green_origin(params.s, params.lam)


def phi_tail(k_tail, params, rho_t: complex) -> np.ndarray:
    """Leading non-oscillatory behaviour ``G_hat rho(t)/(i kap)`` of ``phi_hat`` at large ``|k|``."""
    kap = np.abs(k_tail) ** (2 * params.s)
    return rho_t * green_hat(k_tail, params) / (1j * kap)


def march_snapshots(
    traj: ChargeTrajectory,
    datum: InitialDatum,
    grid: SpectralGrid,
    indices=None,
    with_dk: bool = True,
):
    """Yield a :class:`WaveSnapshot` at each requested node index (default: all).

    ``psi_hat`` and ``d/dk psi_hat`` come from one recursive sweep over the
    trajectory, so the cost is ``O(N |k|)`` regardless of how many snapshots are
    taken. Only the inner grid nodes are used.
    """
    p = datum.params
    k = grid.k[grid.inner]
    w = grid.w[grid.inner]
    kap = np.abs(k) ** (2 * p.s)
    dkap = 2 * p.s * np.abs(k) ** (2 * p.s - 1) * np.sign(k)
    G = green_hat(k, p)
    k_tail, w_tail = grid.k[~grid.inner], grid.w[~grid.inner]
    psi0, dpsi0 = datum.psi0_hat(k), datum.dpsi0_hat(k) if with_dk else None
    wanted = set(range(traj.n_nodes)) if indices is None else {int(i) for i in indices}
    last = max(wanted) if wanted else -1
    fm = FilonMarch(kap, with_moment=with_dk)
    for n in range(last + 1):
        if n > 0:
            fm.step(traj.r[n - 1], traj.r[n], traj.h)
        if n not in wanted:
            continue
        t = float(traj.t[n])
        e = np.exp(-1j * kap * t)
        psi = e * psi0 - 1j * fm.D / SQRT2PI
        r_t = complex(traj.r[n])
        dpsi = None
        if with_dk:
            dpsi = e * (dpsi0 - 1j * dkap * t * psi0) - dkap * fm.M / SQRT2PI
        # slope of the interpolant on the last cell, matching the exact PL integrals
        slope = (traj.r[n] - traj.r[n - 1]) / traj.h if n > 0 else traj.r_dot[0]
        tail = phi_tail(k_tail, p, slope - 1j * p.lam * r_t) if n > 0 else np.zeros(k_tail.shape, complex)
        yield WaveSnapshot(
            t, k, w, psi, psi + r_t * G, r_t, complex(traj.q[n]), dpsi,
            k_tail=k_tail, w_tail=w_tail, phi_tail=tail,
        )


def psi_x(t: float, x, traj: ChargeTrajectory, datum: InitialDatum, grid: SpectralGrid) -> np.ndarray:
    """``psi(t, x)``: regular part by inverse quadrature, singular part ``-r G(x)`` in closed form."""
    grid.require_calibrated()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = grid.k[grid.inner]
    phi = np.zeros(grid.k.shape, dtype=complex)
    phi[grid.inner] = psi_hat_direct(t, k, traj, datum) + _r_at(t, traj) * green_hat(k, datum.params)
    reg = inverse_transform(phi, grid, x)
    return reg - _r_at(t, traj) * green_profile(x, datum.params, grid)


def snapshot_psi_x(snap: WaveSnapshot, x, params, grid: SpectralGrid) -> np.ndarray:
    """Attach and return ``psi(t, x)`` for an existing snapshot."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    phase = np.exp(1j * np.outer(x, snap.k))
    reg = (phase * snap.w) @ snap.phi_hat / SQRT2PI
    snap.x = x
    snap.psi_x = reg - snap.r_t * green_profile(x, params, grid)
    return snap.psi_x


def _r_at(t: float, traj: ChargeTrajectory) -> complex:
    n, rem = _locate(t, traj)
    return _interp(traj.r, n, rem / traj.h)
