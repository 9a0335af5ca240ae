"""Mass, energy, fractional moment of inertia and the virial and jump residuals."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .charge_equation import ChargeTrajectory
from .initial_data import InitialDatum
from .spectral_kernels import (
    ModelParams,
    SpectralGrid,
    green_hat,
    green_jump_check,
    green_norm_sq,
    green_seminorm_sq,
)
from .wavefunction import WaveSnapshot, march_snapshots, origin_value


def _split_terms(snap: WaveSnapshot, params: ModelParams, weight=None):
    """``int weight |phi|^2`` (inner nodes) and ``int weight phi G_hat`` (with the asymptotic tail)."""
    wt = snap.w if weight is None else snap.w * weight(snap.k)
    pp = float(np.sum(wt * np.abs(snap.phi_hat) ** 2))
    pg = snap.integrate_phi(weight, lambda k: green_hat(k, params))
    return pp, pg


def mass_sq(snap: WaveSnapshot, params: ModelParams) -> float:
    """``||psi||^2`` through ``psi_hat = phi_hat - r G_hat``; the ``|G_hat|^2`` term is closed form."""
    pp, pg = _split_terms(snap, params)
    r = snap.r_t
    return pp - 2 * (np.conj(r) * pg).real + abs(r) ** 2 * green_norm_sq(params.s, params.lam)


def mass(snap: WaveSnapshot, params: ModelParams) -> float:
    return math.sqrt(max(mass_sq(snap, params), 0.0))


def kinetic(snap: WaveSnapshot, params: ModelParams) -> float:
    """``int |k|^(2s) |psi_hat|^2``; the singular-singular part uses ``[G]^2 = G(0) - lam ||G||^2``."""
    pp, pg = _split_terms(snap, params, lambda k: np.abs(k) ** (2 * params.s))
    r = snap.r_t
    return pp - 2 * (np.conj(r) * pg).real + abs(r) ** 2 * green_seminorm_sq(params.s, params.lam)


def energy(snap: WaveSnapshot, params: ModelParams, q: complex | None = None) -> float:
    """Kinetic term plus ``beta/(sigma+1) |psi(t,0)|^(2 sigma + 2)``."""
    q = snap.q_t if q is None else q
    return kinetic(snap, params) + params.beta / (params.sigma + 1) * abs(q) ** (2 * params.sigma + 2)


def inertia(snap: WaveSnapshot, params: ModelParams) -> float:
    """``|| |k|^(1-s) d/dk psi_hat ||^2``."""
    if snap.dpsi_hat is None:
        raise ValueError("snapshot lacks d/dk psi_hat")
    wgt = np.abs(snap.k) ** (2 - 2 * params.s)
    return float(np.sum(snap.w * wgt * np.abs(snap.dpsi_hat) ** 2))


def inertia_dot(snap: WaveSnapshot, params: ModelParams) -> float:
    """``4 s Im int k psi_hat conj(d/dk psi_hat) dk``."""
    if snap.dpsi_hat is None:
        raise ValueError("snapshot lacks d/dk psi_hat")
    return float(4 * params.s * np.sum(snap.w * snap.k * snap.psi_hat * np.conj(snap.dpsi_hat)).imag)


def inertia_ddot_theory(q, params: ModelParams, E0: float):
    """``8 s^2 E(0) + 4 s beta (sigma - sigma_c)/(sigma + 1) |q|^(2 sigma + 2)``."""
    s, b, sg = params.s, params.beta, params.sigma
    return 8 * s * s * E0 + 4 * s * b * (sg - params.sigma_c) / (sg + 1) * np.abs(q) ** (2 * sg + 2)


_JUMP_CACHE: dict[tuple, float] = {}


def green_jump(params: ModelParams) -> float:
    """Numerical jump of ``D^(2s-1) G`` across the origin (cached per ``(s, lam)``)."""
    key = (params.s, params.lam)
    if key not in _JUMP_CACHE:
        _JUMP_CACHE[key] = green_jump_check(params)
    return _JUMP_CACHE[key]


def jump_residual(snap: WaveSnapshot, params: ModelParams, psi0: complex | None = None) -> float:
    """Normalized mismatch of the boundary condition ``[D^(2s-1) psi](0) = beta |psi(0)|^(2 sigma) psi(0)``.

    The regular part has no jump, so the left side is ``-r(t)`` times the
    numerically extrapolated jump of ``D^(2s-1) G``. ``psi0`` is the trace
    recomputed from the snapshot; it defaults to the trajectory charge.
    """
    q = snap.q_t if psi0 is None else psi0
    lhs = -snap.r_t * green_jump(params) if snap.r_t != 0 else 0.0
    rhs = params.beta * abs(q) ** (2 * params.sigma) * q
    return abs(lhs - rhs) / max(1.0, abs(params.beta) * abs(q) ** (2 * params.sigma + 1))


@dataclass
class ObservableSeries:
    t: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    inertia: np.ndarray
    inertia_dot: np.ndarray
    iddot_fd: np.ndarray
    iddot_theory: np.ndarray
    virial_residual: np.ndarray
    jump_residual: np.ndarray
    q: np.ndarray
    trace: np.ndarray
    E0: float
    stride: int
    params: ModelParams = field(repr=False, default=None)

    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass - self.mass[0])) / self.mass[0])

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])) / (1 + abs(self.energy[0])))

    def virial_error(self) -> float:
        """Max over interior nodes of ``|I''_fd - I''_theory| / |8 s^2 E(0)|``."""
        ok = np.isfinite(self.virial_residual)
        if not ok.any():
            return math.nan
        scale = abs(8 * self.params.s**2 * self.E0)
        return float(np.max(self.virial_residual[ok]) / scale)

    def to_csv(self, path):
        cols = ["t", "mass", "energy", "inertia", "inertia_dot", "iddot_fd", "iddot_theory", "virial_residual", "jump_residual"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            for row in zip(*(getattr(self, c) for c in cols)):
                wr.writerow([repr(float(v)) for v in row])


def virial_fd(t: np.ndarray, I: np.ndarray, stride: int) -> np.ndarray:
    """Centered second difference of ``I`` with spacing ``stride`` nodes; NaN near the ends."""
    out = np.full(I.shape, np.nan)
    m = stride
    if I.size > 2 * m:
        H = t[m] - t[0]
        out[m:-m] = (I[2 * m :] - 2 * I[m:-m] + I[: -2 * m]) / (H * H)
    return out


def observable_series(
    traj: ChargeTrajectory,
    datum: InitialDatum,
    grid: SpectralGrid,
    stride: int | None = None,
    every: int = 1,
) -> ObservableSeries:
    """Sweep the trajectory once and collect every monitored quantity.

    ``stride`` is the node spacing of the virial second difference; by default
    it is ``16`` nodes so that the difference step shrinks with ``h``.
    """
    grid.require_calibrated()
    p = datum.params
    stride = 16 if stride is None else int(stride)
    idx = list(range(0, traj.n_nodes, every))
    rows = []
    for snap in march_snapshots(traj, datum, grid, indices=idx):
        psi0 = origin_value(snap, p)
        rows.append(
            (snap.t, mass(snap, p), energy(snap, p), inertia(snap, p), inertia_dot(snap, p),
             jump_residual(snap, p, psi0), snap.q_t, psi0)
        )
    t, M, E, I, Id, J = (np.array([r[i] for r in rows], dtype=float) for i in range(6))
    q = np.array([r[6] for r in rows])
    trace = np.array([r[7] for r in rows])
    E0 = float(E[0])
    m = max(1, stride // every)
    fd = virial_fd(t, I, m)
    th = inertia_ddot_theory(q, p, E0)
    return ObservableSeries(
        t=t, mass=M, energy=E, inertia=I, inertia_dot=Id, iddot_fd=fd, iddot_theory=th,
        virial_residual=np.abs(fd - th), jump_residual=J, q=q, trace=trace, E0=E0, stride=m * every, params=p,
    )
