"""Standing waves ``exp(i omega t) u(x)`` with ``u`` proportional to the Green's function."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .charge_equation import SolverOptions, TimeGrid, solve_charge
from .initial_data import InitialDatum, RegularPart
from .spectral_kernels import ModelParams, SpectralGrid, green_hat, green_origin, green_profile

CLASSES = ("subcritical_negative", "critical_zero", "supercritical_positive")


class NoStandingWave(ValueError):
    """Raised for defocusing couplings or non-positive frequencies."""


@dataclass(frozen=True)
class StandingWave:
    """``u(x) = -beta u0 |u0|^(2 sigma) G_s^omega(x)`` with ``u0 = u(0) > 0``.

    ``params.lam`` equals ``omega``: with that choice the regular part of the
    profile vanishes identically.
    """

    omega: float
    params: ModelParams
    amplitude_at_zero: float

    def __post_init__(self):
        if not self.omega > 0:
            raise NoStandingWave("standing waves require omega > 0")
        if not self.params.beta < 0:
            raise NoStandingWave("no standing wave for beta >= 0")

    @property
    def charge_source(self) -> float:
        """``r = beta |u0|^(2 sigma) u0`` (negative)."""
        p = self.params
        return p.beta * self.amplitude_at_zero ** (2 * p.sigma + 1)

    def profile(self, x, grid: SpectralGrid) -> np.ndarray:
        return -self.charge_source * green_profile(x, self.params, grid)

    def profile_hat(self, k) -> np.ndarray:
        return -self.charge_source * green_hat(k, self.params)

    def as_datum(self, phase: complex = 1.0) -> InitialDatum:
        """The wave as an initial datum; ``phase`` multiplies the whole profile."""
        return InitialDatum(RegularPart(amplitude=0.0), complex(phase) * self.amplitude_at_zero, self.params)

    def consistency(self) -> float:
        """``|1 - |beta| u0^(2 sigma) G^omega(0)|`` (only meaningful for ``sigma > 0``)."""
        p = self.params
        return abs(1.0 - abs(p.beta) * self.amplitude_at_zero ** (2 * p.sigma) * green_origin(p.s, self.omega))


def amplitude_from_green(omega: float, params: ModelParams) -> float:
    """``u0 = (1 / (|beta| G^omega(0)))^(1/(2 sigma))``."""
    return (1.0 / (abs(params.beta) * green_origin(params.s, omega))) ** (1.0 / (2 * params.sigma))


def amplitude_from_prefactor(omega: float, params: ModelParams) -> float:
    """``u0`` from the explicit power-law prefactor multiplying ``G^omega``, times ``G^omega(0)``."""
    s, b, sg = params.s, abs(params.beta), params.sigma
    pref = (
        b ** (-1.0 / (2 * sg))
        * (2 * s * math.sin(math.pi / (2 * s))) ** ((2 * sg + 1) / (2 * sg))
        * omega ** ((2 * s - 1) * (2 * sg + 1) / (4 * s * sg))
    )
    return pref * green_origin(s, omega)


def linear_bound_state_frequency(params: ModelParams) -> float:
    """``omega`` solving ``1 = |beta| G_s^omega(0)`` (the ``sigma = 0`` case)."""
    s = params.s
    return (abs(params.beta) / (2 * s * math.sin(math.pi / (2 * s)))) ** (2 * s / (2 * s - 1))


def build_standing_wave(omega: float | None, params: ModelParams, amplitude: float = 1.0) -> StandingWave:
    """Construct the positive standing wave of frequency ``omega``.

    For ``sigma = 0`` the equation is linear: ``omega`` is fixed by the
    coupling (pass ``None``) and ``amplitude`` sets the free normalization.
    """
    if not params.beta < 0:
        raise NoStandingWave("no standing wave for beta >= 0")
    if params.sigma == 0.0:
        w = linear_bound_state_frequency(params)
        if omega is not None and not math.isclose(omega, w, rel_tol=1e-12):
            raise NoStandingWave(f"linear bound state has omega={w:.12g}, not {omega}")
        return StandingWave(w, params.with_lambda(w), float(amplitude))
    if omega is None or not omega > 0:
        raise NoStandingWave("standing waves require omega > 0")
    u0 = amplitude_from_green(omega, params)
    u0_alt = amplitude_from_prefactor(omega, params)
    if abs(u0 - u0_alt) > 1e-12 * u0:
        raise ArithmeticError(f"amplitude routes disagree: {u0!r} vs {u0_alt!r}")
    return StandingWave(float(omega), params.with_lambda(float(omega)), u0)


def standing_energy(wave: StandingWave) -> float:
    """Closed-form energy; its sign is that of ``1 - 2s/(sigma + 1)``."""
    p = wave.params
    s, sg, w = p.s, p.sigma, wave.omega
    if sg == 0.0:
        # linear: [u]^2 = beta^2 u0^2 G(0)/(2s) = |beta| u0^2/(2s)
        u0 = wave.amplitude_at_zero
        return abs(p.beta) * u0 * u0 * (1.0 / (2 * s) - 1.0)
    base = (
        (2 * s) ** (1 / sg)
        * math.sin(math.pi / (2 * s)) ** (1 + 1 / sg)
        * w ** ((sg + 1) * (2 * s - 1) / (2 * s * sg))
        / abs(p.beta) ** (1 / sg)
    )
    return base * (1.0 - 2 * s / (sg + 1))


def standing_energy_quadrature(wave: StandingWave, grid: SpectralGrid) -> float:
    """``int |k|^(2s) |u_hat|^2 dk + beta/(sigma+1) u0^(2 sigma + 2)`` on ``grid``."""
    p = wave.params
    grid.require_calibrated()
    kin = float(np.real(grid.integrate(np.abs(grid.k) ** (2 * p.s) * np.abs(wave.profile_hat(grid.k)) ** 2)))
    return kin + p.beta / (p.sigma + 1) * wave.amplitude_at_zero ** (2 * p.sigma + 2)


def classify(wave: StandingWave) -> str:
    p = wave.params
    if math.isclose(p.sigma, p.sigma_c, rel_tol=0.0, abs_tol=1e-12):
        return "critical_zero"
    return "subcritical_negative" if p.sigma < p.sigma_c else "supercritical_positive"


@dataclass
class StationarityReport:
    identity: float
    jump: float
    dynamic: float
    modulus_drift: float
    T: float


def dynamic_residual(wave: StandingWave, h: float = 1 / 512, periods: float = 1.0, phase: complex = 1.0,
                     opts: SolverOptions | None = None):
    """Evolve the wave and return ``(max |q(t) - phase e^{i omega t} u0|, max ||q| - u0|, trajectory)``."""
    T = periods * 2 * math.pi / wave.omega
    N = max(2, int(math.ceil(T / h)))
    datum = wave.as_datum(phase)
    traj = solve_charge(datum, TimeGrid(h, N), opts)
    exact = datum.q0 * np.exp(1j * wave.omega * traj.t)
    return (
        float(np.max(np.abs(traj.q - exact))),
        float(np.max(np.abs(np.abs(traj.q) - wave.amplitude_at_zero))),
        traj,
    )


def stationarity_residual(wave: StandingWave, grid: SpectralGrid, h: float = 1 / 512, x=None) -> StationarityReport:
    """Static identity on an x-grid, jump condition, and the dynamic check over one period."""
    from .observables import jump_residual
    from .wavefunction import march_snapshots

    p = wave.params
    x = np.linspace(-4, 4, 33) if x is None else np.asarray(x, dtype=float)
    u0 = wave.amplitude_at_zero
    u = wave.profile(x, grid)
    rhs = -p.beta * u0 * abs(u0) ** (2 * p.sigma) * green_profile(x, p, grid)
    ident = float(np.max(np.abs(u - rhs)))
    dyn, drift, traj = dynamic_residual(wave, h)
    snap = next(march_snapshots(traj, wave.as_datum(), grid, indices=[0], with_dk=False))
    jump = jump_residual(snap, p)
    return StationarityReport(ident, jump, dyn, drift, float(traj.t_end))
