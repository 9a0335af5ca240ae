"""Focusing-regime experiments: scaled data, critical mass and blow-up detection."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .charge_equation import ChargeTrajectory, SolverOptions, solve_charge_graded
from .initial_data import InitialDatum, make_datum
from .observables import energy, inertia, inertia_dot, kinetic, mass
from .spectral_kernels import ModelParams, SpectralGrid, build_grid
from .wavefunction import march_snapshots

REGIMES = ("defocusing", "subcritical", "critical", "supercritical")


def regime(params: ModelParams) -> str:
    if params.beta >= 0:
        return "defocusing"
    if math.isclose(params.sigma, params.sigma_c, rel_tol=0.0, abs_tol=1e-12):
        return "critical"
    return "subcritical" if params.sigma < params.sigma_c else "supercritical"


# ------------------------------------------------------------------ scaling


def scaled_datum(base: InitialDatum, nu: float) -> InitialDatum:
    """Dilate the regular part, ``phi_hat -> phi_hat(k/nu)/nu``, and re-solve the charge."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    if nu == 1.0:
        return base
    return make_datum(base.regular.dilate(nu, base.params.s), base.params)


def dilation_energy(datum: InitialDatum, nu: float, grid: SpectralGrid) -> tuple[float, float]:
    """``([u_nu]^2, E(u_nu))`` for the pure dilation ``u_nu(x) = psi_0(nu x)`` by k-quadrature.

    ``u_nu_hat(k) = psi0_hat(k/nu)/nu`` is sampled directly on the grid (whose
    tail rule suits the ``|k|^(-2s)`` decay of the integrand).
    """
    p = datum.params
    k = grid.k
    u_hat = datum.psi0_hat(k / nu) / nu
    semi = float(np.real(grid.integrate(np.abs(k) ** (2 * p.s) * np.abs(u_hat) ** 2)))
    return semi, semi + p.beta / (p.sigma + 1) * abs(datum.q0) ** (2 * p.sigma + 2)


@dataclass
class ScalingCheck:
    nu: list
    seminorm_ratio: list
    energy_quadrature: list
    energy_law: list

    @property
    def max_energy_error(self) -> float:
        return max(abs(a - b) / max(1.0, abs(b)) for a, b in zip(self.energy_quadrature, self.energy_law))

    @property
    def max_ratio_error(self) -> float:
        return max(abs(r - n ** (2 * self._s - 1)) for r, n in zip(self.seminorm_ratio, self.nu))

    _s: float = field(default=1.0, repr=False)


def energy_scaling_check(datum: InitialDatum, nus=(1.0, 0.5, 0.25), grid: SpectralGrid | None = None) -> ScalingCheck:
    """Compare ``E(u_nu)`` with ``nu^(2s-1)[u]^2 + beta/(sigma+1)|u(0)|^(2 sigma + 2)``."""
    p = datum.params
    grid = grid or build_grid(p, K_max=4000.0, t_resolve=0.0, order=24, tail_order=120)
    semi1, _ = dilation_energy(datum, 1.0, grid)
    pot = p.beta / (p.sigma + 1) * abs(datum.q0) ** (2 * p.sigma + 2)
    ratios, eq, law = [], [], []
    for nu in nus:
        semi, e = dilation_energy(datum, nu, grid)
        ratios.append(semi / semi1)
        eq.append(e)
        law.append(nu ** (2 * p.s - 1) * semi1 + pot)
    return ScalingCheck(list(nus), ratios, eq, law, _s=p.s)


# ----------------------------------------------------------- GN constant


def _gn_ratio_from_hat(f_hat_half, s: float) -> float:
    """``f(0) / (||f||^(1-1/(2s)) [f]^(1/(2s)))`` for an even, positive ``f_hat`` given on ``k > 0``."""
    al = 0.5 / s

    def q(g):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            head, _ = integrate.quad(g, 0.0, 1.0, limit=400, epsabs=0, epsrel=1e-12)
            tail, _ = integrate.quad(g, 1.0, np.inf, limit=400, epsabs=0, epsrel=1e-12)
        return 2.0 * (head + tail)

    f0 = q(f_hat_half) / math.sqrt(2 * math.pi)
    norm2 = q(lambda k: f_hat_half(k) ** 2)
    semi2 = q(lambda k: k ** (2 * s) * f_hat_half(k) ** 2)
    return f0 / (norm2 ** ((1 - al) / 2) * semi2 ** (al / 2))


def gn_ratio(s: float, family: str, shape: float = 1.0) -> float:
    """Gagliardo-Nirenberg quotient of one trial function.

    ``family`` is ``"gaussian"`` (``shape`` unused; the quotient is dilation
    invariant) or ``"resolvent"``: ``f_hat = (|k|^(2s) + 1)^(-shape)``, where
    ``shape = 1`` is the Green's function itself.
    """
    if family == "gaussian":
        return _gn_ratio_from_hat(lambda k: math.exp(-0.5 * k * k), s)
    if family == "resolvent":
        lo = 0.5 + 0.25 / s
        if not shape > lo:
            raise ValueError(f"resolvent shape must exceed {lo:.6g} for finite norms")
        return _gn_ratio_from_hat(lambda k: (k ** (2 * s) + 1.0) ** (-shape), s)
    raise ValueError(f"unknown trial family {family!r}")


def gn_constant_estimate(params: ModelParams | float, trial_family: str = "all") -> float:
    """Lower bound on the sharp constant ``C_s``: best quotient over the trial family."""
    s = params.s if isinstance(params, ModelParams) else float(params)
    best = 0.0
    if trial_family in ("gaussian", "all"):
        best = max(best, gn_ratio(s, "gaussian"))
    if trial_family in ("resolvent", "all"):
        lo = 0.5 + 0.25 / s
        res = optimize.minimize_scalar(
            lambda g: -gn_ratio(s, "resolvent", g), bounds=(lo + 0.02, 4.0), method="bounded",
            options={"xatol": 1e-6},
        )
        best = max(best, -res.fun, gn_ratio(s, "resolvent", 1.0))
    if best <= 0.0:
        raise ValueError(f"degenerate trial family {trial_family!r}")
    return best


def critical_mass(params: ModelParams, C_s: float) -> float:
    """``(2s / (|beta| C_s^(4s)))^(1/(2(2s-1)))``; infinite for ``beta = 0``."""
    if not C_s > 0:
        raise ValueError("C_s must be positive")
    s, b = params.s, abs(params.beta)
    if b == 0:
        return math.inf
    return (2 * s / (b * C_s ** (4 * s))) ** (1.0 / (2 * (2 * s - 1)))


# ---------------------------------------------------------- detection


@dataclass(frozen=True)
class Outcome:
    kind: str  # global_bounded | blow_up_at | inconclusive
    t_star_threshold: float = math.nan
    t_star_virial: float = math.nan
    reason: str = ""

    def __str__(self):
        if self.kind == "blow_up_at":
            return f"blow_up_at({self.t_star_threshold:.6g})"
        return self.kind


def virial_parabola_root(I0: float, I1: float, C: float) -> float:
    """Smallest positive root of ``I0 + I1 t + C t^2 / 2``; ``inf`` if there is none."""
    if C == 0.0:
        return -I0 / I1 if I1 < 0 else math.inf
    disc = I1 * I1 - 2.0 * C * I0
    if disc < 0:
        return math.inf
    roots = sorted(x for x in ((-I1 - math.sqrt(disc)) / C, (-I1 + math.sqrt(disc)) / C) if x > 0)
    return roots[0] if roots else math.inf


@dataclass
class InitialObservables:
    mass: float
    energy: float
    kinetic: float
    inertia: float
    inertia_dot: float


def initial_observables(datum: InitialDatum, grid: SpectralGrid | None = None) -> InitialObservables:
    """Observables of ``psi_0`` (no time evolution needed)."""
    p = datum.params
    grid = grid or build_grid(p, t_resolve=0.0)
    t = np.array([0.0, 1.0])
    traj = ChargeTrajectory(
        t=t, q=np.array([datum.q0, datum.q0]), r=np.array([datum.r0, datum.r0]),
        r_dot=np.zeros(2, complex), residual=np.zeros(2), residual_raw=np.zeros(2), h=1.0, params=p,
    )
    snap = next(march_snapshots(traj, datum, grid, indices=[0]))
    return InitialObservables(mass(snap, p), energy(snap, p), kinetic(snap, p), inertia(snap, p), inertia_dot(snap, p))


def detect_blowup(
    traj: ChargeTrajectory,
    init: InitialObservables,
    params: ModelParams,
    bounded_factor: float = 10.0,
    virial_factor: float = 2.0,
) -> Outcome:
    """Classify a run from its termination status and the virial parabola.

    A threshold crossing counts as blow-up when the crossing time is at most
    ``virial_factor`` times the root of ``I(0) + I'(0) t + 4 s^2 E(0) t^2``.
    """
    s = params.s
    t_vir = virial_parabola_root(init.inertia, init.inertia_dot, 8 * s * s * init.energy)
    scale = max(abs(traj.q[0]), 1e-300)
    if traj.status == "threshold":
        t_th = traj.t_end
        if math.isfinite(t_vir) and t_th <= virial_factor * t_vir:
            return Outcome("blow_up_at", t_th, t_vir)
        return Outcome("inconclusive", t_th, t_vir, "threshold crossed far from the virial bound")
    if traj.status == "stalled":
        return Outcome("inconclusive", math.nan, t_vir, f"solver stalled at t={traj.t_end:.6g}")
    if float(np.max(np.abs(traj.q))) < bounded_factor * scale:
        return Outcome("global_bounded", math.nan, t_vir)
    return Outcome("inconclusive", math.nan, t_vir, "charge grew without crossing the threshold")


@dataclass
class RegimeReport:
    params: ModelParams
    nu: float
    regime: str
    E0: float
    mass0: float
    critical_mass: float | None
    outcome: Outcome
    max_abs_q: float = math.nan

    @property
    def sigma_c(self) -> float:
        return self.params.sigma_c

    def row(self) -> list:
        o = self.outcome
        return [self.params.s, self.params.beta, self.params.sigma, self.nu, self.E0, self.mass0, str(o),
                o.t_star_threshold, o.t_star_virial]


def run_regime(
    datum: InitialDatum,
    T: float,
    h: float,
    nu: float = 1.0,
    threshold_factor: float = 20.0,
    C_s: float | None = None,
    grid: SpectralGrid | None = None,
) -> RegimeReport:
    """Scale the datum, evolve its charge up to ``T`` and classify the outcome.

    The graded march keeps the implicit step solvable while ``|q|`` grows, so
    a blow-up run ends on the threshold rather than on a fold of the step map.
    """
    d = scaled_datum(datum, nu)
    p = d.params
    init = initial_observables(d, grid)
    opts = SolverOptions(blow_up_threshold=threshold_factor * max(abs(d.q0), 1e-300))
    traj = solve_charge_graded(d, T, h, opts)
    out = detect_blowup(traj, init, p)
    cm = critical_mass(p, C_s) if (C_s is not None and p.beta < 0) else None
    return RegimeReport(p, nu, regime(p), init.energy, init.mass, cm, out, float(np.max(np.abs(traj.q))))


def sweep(points, T: float, h: float, C_s: float | None = None) -> list[RegimeReport]:
    """``points`` is an iterable of ``(datum, nu)``; each run is independent."""
    return [run_regime(d, T, h, nu, C_s=C_s) for d, nu in points]


def write_report(reports, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["s", "beta", "sigma", "nu", "E0", "mass0", "outcome", "t_star_threshold", "t_star_virial"])
        for rep in reports:
            wr.writerow(rep.row())
