"""Forcing terms and the singular Volterra equation for the charge ``q(t) = psi(t, 0)``.

The march discretizes the regularized form

    q(t) = f~(t) - i a(s) beta int_0^t (|q|^(2 sigma) q (tau) - |q0|^(2 sigma) q0) (t - tau)^(-1/(2s)) dtau

by product trapezoidal integration; the raw equation with forcing
``f = (U_s(t) psi_0)(0)`` serves as an a-posteriori residual.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .initial_data import InitialDatum, RegularPart, gaussian_free_grid
from .quadrature import log_panel_rule
from .spectral_kernels import SQRT2PI, ModelParams, const_a, const_b, green_origin

log = logging.getLogger(__name__)

_LAPLACE_Y, _LAPLACE_W = log_panel_rule(-75.0, 50.0, 1.0, 16)


class ChargeSolverError(RuntimeError):
    pass


# ------------------------------------------------------------------ forcing


def _chunks(t: np.ndarray, size: int = 256):
    for i in range(0, t.size, size):
        yield slice(i, i + size)


def forcing_f3_tilde(t, s: float, lam: float) -> np.ndarray:
    """``f3(t) - f3(0) - b(s) t^(1-1/(2s))``, smooth at ``t = 0``.

    The defining integral over ``w = |k|^(2s)`` is rotated onto the negative
    imaginary axis, which turns ``exp(-i w t)`` into ``exp(-y t)``; the
    remaining Laplace-type integral is evaluated with a Gauss rule in ``log y``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    al = 0.5 / s
    c = np.exp(-0.5j * math.pi * al) / (2 * math.pi * s)
    y, w = _LAPLACE_Y, _LAPLACE_W
    base = w * y ** (al - 2.0) / (lam - 1j * y)
    out = np.empty(t.shape, dtype=complex)
    for sl in _chunks(t):
        out[sl] = np.expm1(-np.outer(t[sl], y)) @ base
    return -1j * lam * c * out


def forcing_f3(t, s: float, lam: float) -> np.ndarray:
    """``(U_s(t) G_s^lam)(0) = G(0) + b(s) t^(1-1/(2s)) + f3~(t)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return green_origin(s, lam) + const_b(s) * t ** (1.0 - 0.5 / s) + forcing_f3_tilde(t, s, lam)


def forcing_f3_laplace(t, s: float, lam: float) -> np.ndarray:
    """``(U_s(t) G_s^lam)(0)`` from the unsubtracted rotated integral (``t > 0``)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    al = 0.5 / s
    c = np.exp(-0.5j * math.pi * al) / (2 * math.pi * s)
    y, w = _LAPLACE_Y, _LAPLACE_W
    base = w * y ** (al - 1.0) / (lam - 1j * y)
    out = np.empty(t.shape, dtype=complex)
    for sl in _chunks(t):
        out[sl] = np.exp(-np.outer(t[sl], y)) @ base
    return c * out


def forcing_f3_oscillatory(t: float, s: float, lam: float) -> complex:
    """``(U_s(t) G_s^lam)(0)`` on the real frequency axis (algebraic head + QAWF tail)."""
    al = 0.5 / s
    if t == 0.0:
        return complex(green_origin(s, lam))
    kw = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        hc, _ = integrate.quad(lambda w: np.cos(w * t) / (w + lam), 0, 1, weight="alg", wvar=(al - 1, 0), **kw)
        hs, _ = integrate.quad(lambda w: np.sin(w * t) / (w + lam), 0, 1, weight="alg", wvar=(al - 1, 0), **kw)
        g = lambda w: w ** (al - 1.0) / (w + lam)
        tc, _ = integrate.quad(g, 1, np.inf, weight="cos", wvar=t, limlst=400)
        ts, _ = integrate.quad(g, 1, np.inf, weight="sin", wvar=t, limlst=400)
    return ((hc + tc) - 1j * (hs + ts)) / (2 * math.pi * s)


def forcing_f1(t, regular: RegularPart, s: float, t_max: float | None = None) -> np.ndarray:
    """``(U_s(t) phi_{lam,0})(0)``: Gaussian part by k-quadrature, Green terms in closed form."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    t_max = float(np.max(t)) if t_max is None else t_max
    out = np.zeros(t.shape, dtype=complex)
    if regular.amplitude != 0:
        k, w = gaussian_free_grid(regular, s, max(t_max, 1e-3))
        kap = np.abs(k) ** (2 * s)
        base = w * regular.gaussian_hat(k) / SQRT2PI
        for sl in _chunks(t):
            out[sl] = np.exp(-1j * np.outer(t[sl], kap)) @ base
    for c, lam in regular.green_terms:
        out += c * forcing_f3(t, s, lam)
    return out


def forcing_regularized(t, datum: InitialDatum, t_max: float | None = None) -> np.ndarray:
    """``f~(t) = f1(t) - r0 G(0) - r0 f3~(t)``; equals ``q0`` at ``t = 0``."""
    p = datum.params
    f1 = forcing_f1(t, datum.regular, p.s, t_max)
    if datum.r0 == 0:
        return f1
    return f1 - datum.r0 * green_origin(p.s, p.lam) - datum.r0 * forcing_f3_tilde(t, p.s, p.lam)


def forcing_raw(t, datum: InitialDatum, t_max: float | None = None) -> np.ndarray:
    """``f(t) = (U_s(t) psi_0)(0)`` without the regularizing subtraction."""
    p = datum.params
    t = np.atleast_1d(np.asarray(t, dtype=float))
    f1 = forcing_f1(t, datum.regular, p.s, t_max)
    f3 = np.empty(t.shape, dtype=complex)
    pos = t > 0
    f3[~pos] = green_origin(p.s, p.lam)
    f3[pos] = forcing_f3_laplace(t[pos], p.s, p.lam)
    return f1 - datum.r0 * f3


# ------------------------------------------------------------ Abel weights


@dataclass(frozen=True)
class TimeGrid:
    h: float
    N: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("time step must be positive")
        if self.N < 2:
            raise ValueError("need at least two steps")

    @classmethod
    def from_final(cls, T_final: float, h: float) -> "TimeGrid":
        N = int(round(T_final / h))
        if not math.isclose(N * h, T_final, rel_tol=1e-9):
            raise ValueError(f"T_final={T_final} is not a multiple of h={h}")
        return cls(h, N)

    @property
    def T(self) -> float:
        return self.h * self.N

    @property
    def t(self) -> np.ndarray:
        return self.h * np.arange(self.N + 1)


@dataclass(frozen=True)
class AbelWeights:
    """Product-trapezoid weights for ``int_0^{t_n} (t_n - tau)^(-alpha) g(tau) dtau``.

    ``w[n, j] = scale * diff[n - j]`` for ``1 <= j <= n`` and ``w[n, 0] = scale * first[n]``.
    """

    h: float
    alpha: float
    scale: float
    diff: np.ndarray
    first: np.ndarray

    def row(self, n: int) -> np.ndarray:
        out = np.empty(n + 1)
        out[0] = self.first[n]
        out[1:] = self.diff[n - 1 :: -1][:n]
        return self.scale * out


def abel_weights(grid: TimeGrid, params) -> AbelWeights:
    alpha = params.alpha if isinstance(params, ModelParams) else float(params)
    g = 1.0 - alpha
    p = g + 1.0
    m = np.arange(grid.N + 1, dtype=float)
    diff = np.empty_like(m)
    diff[0] = 1.0
    if grid.N >= 1:
        diff[1] = 2.0**p - 2.0
    mm = m[2:]
    x = 1.0 / mm
    # second difference (m+1)^p - 2 m^p + (m-1)^p without cancellation
    diff[2:] = mm**p * (np.expm1(p * np.log1p(x)) + np.expm1(p * np.log1p(-x)))
    first = np.zeros_like(m)
    n = m[1:]
    first[1:] = (n - 1.0) ** p - n**g * (n - 1.0 - g)
    scale = grid.h**g / (g * p)
    return AbelWeights(grid.h, alpha, scale, diff, first)


# ---------------------------------------------------------------- solver


@dataclass
class SolverOptions:
    solver: str = "fixed_point"
    tol: float = 1e-12
    max_iter: int = 200
    damping: float = 0.5
    blow_up_threshold: float | None = None

    def __post_init__(self):
        if self.solver not in ("fixed_point", "newton"):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass
class ChargeTrajectory:
    t: np.ndarray
    q: np.ndarray
    r: np.ndarray
    r_dot: np.ndarray
    residual: np.ndarray
    residual_raw: np.ndarray
    h: float
    params: ModelParams
    status: str = "completed"
    newton_steps: int = 0
    info: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.t.size

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "re_q", "im_q", "abs_q", "re_r", "im_r", "residual_raw"])
            for row in zip(self.t, self.q.real, self.q.imag, np.abs(self.q), self.r.real, self.r.imag, self.residual_raw):
                wr.writerow([repr(float(v)) for v in row])


def _nonlin(q: complex, sigma: float) -> complex:
    return abs(q) ** (2 * sigma) * q


def _fixed_point(q: complex, B: complex, C: complex, sigma: float, d: float, opts: "SolverOptions"):
    """Damped iteration ``q <- (1-d) q + d (B - C |q|^(2 sigma) q)``."""
    for _ in range(opts.max_iter):
        q_new = (1 - d) * q + d * (B - C * _nonlin(q, sigma))
        if not np.isfinite(q_new):
            return q, False
        if abs(q_new - q) <= opts.tol * max(1.0, abs(q_new)):
            return q_new, True
        q = q_new
    return q, False


def _newton(q: complex, B: complex, C: complex, sigma: float, tol: float, max_iter: int = 60):
    """Solve ``q + C |q|^(2 sigma) q = B`` with Wirtinger-calculus Newton steps."""
    for _ in range(max_iter):
        aq = abs(q)
        F = q + C * aq ** (2 * sigma) * q - B
        if abs(F) <= tol * max(1.0, abs(B)):
            return q, True
        A = 1.0 + C * (sigma + 1.0) * aq ** (2 * sigma)
        Bc = C * sigma * aq ** (2 * sigma) * (q / aq) ** 2 if aq > 0 else 0.0
        det = abs(A) ** 2 - abs(Bc) ** 2
        if det == 0:
            return q, False
        q = q + (-F * np.conj(A) + Bc * np.conj(F)) / det
    F = q + C * abs(q) ** (2 * sigma) * q - B
    return q, abs(F) <= 1e3 * tol * max(1.0, abs(B))


def _radial(B: complex, C: complex, sigma: float, guess: complex):
    """All solutions of ``q + C |q|^(2 sigma) q = B`` via ``rho |1 + C rho^sigma|^2 = |B|^2``, ``rho = |q|^2``.

    Returns the root closest to ``guess``; the equation always has at least one.
    """
    if B == 0:
        return 0j, True
    g = lambda rho: rho * abs(1 + C * rho**sigma) ** 2 - abs(B) ** 2
    hi = abs(B) ** 2
    while g(hi) < 0:
        hi *= 4.0
    grid = np.concatenate([[0.0], np.geomspace(hi * 1e-12, hi, 400)])
    vals = np.array([g(x) for x in grid])
    cands = []
    for a, b, ga, gb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if ga == 0:
            cands.append(a)
        elif ga * gb < 0:
            cands.append(optimize.brentq(g, a, b, xtol=1e-300, rtol=1e-15))
    if not cands:
        return guess, False
    qs = [B / (1 + C * rho**sigma) for rho in cands]
    return min(qs, key=lambda q: abs(q - guess)), True


def _continues(q: complex, guess: complex, rel: float = 0.5) -> bool:
    return bool(np.isfinite(q)) and abs(q - guess) <= rel * abs(guess) + 1e-14


def solve_charge(
    datum: InitialDatum,
    grid: TimeGrid,
    opts: SolverOptions | None = None,
    forcing: np.ndarray | None = None,
) -> ChargeTrajectory:
    """March the regularized charge equation over ``grid``.

    Stops early with status ``"threshold"`` once ``|q|`` exceeds the blow-up
    threshold, or ``"stalled"`` if the per-step scalar equation cannot be solved.
    """
    opts = opts or SolverOptions()
    p = datum.params
    sigma, beta = p.sigma, p.beta
    t = grid.t
    N = grid.N
    ftil = forcing_regularized(t, datum) if forcing is None else np.asarray(forcing)
    a = const_a(p.s)
    W = abel_weights(grid, p)
    q0 = complex(datum.q0)
    r0 = datum.r0
    threshold = opts.blow_up_threshold
    if threshold is None:
        threshold = 1e6 * max(abs(q0), 1e-300)

    q = np.zeros(N + 1, dtype=complex)
    dr = np.zeros(N + 1, dtype=complex)  # r_j - r0
    res = np.zeros(N + 1)
    q[0] = q0
    status, n_last, newton_steps = "completed", N, 0
    w_nn = W.scale * W.diff[0]
    C = 1j * a * w_nn * beta
    for n in range(1, N + 1):
        hist = W.scale * np.dot(W.diff[n - 1 : 0 : -1], dr[1:n]) if n > 1 else 0.0
        B = ftil[n] - 1j * a * (hist - w_nn * r0)
        if beta == 0.0:
            qn, ok = B, True
        else:
            guess = 2 * q[n - 1] - q[n - 2] if n >= 2 else q[n - 1]
            qn, ok = guess, False
            if opts.solver == "fixed_point":
                d = opts.damping
                with np.errstate(over="ignore", invalid="ignore"):
                    qn, ok = _fixed_point(qn, B, C, sigma, d, opts)
                if not ok:
                    qn = guess
            if not ok:
                newton_steps += 1
                qn, ok = _newton(qn, B, C, sigma, opts.tol)
            if not ok or not _continues(qn, guess):
                qn, ok = _radial(B, C, sigma, guess)
                if ok:
                    qn = _newton(qn, B, C, sigma, opts.tol, max_iter=8)[0]
                # a root far from the extrapolation means the branch has folded
                ok = ok and _continues(qn, guess)
        if not ok or not np.isfinite(qn):
            status, n_last = "stalled", n - 1
            log.warning("charge solver stalled at t=%.6g", t[n])
            break
        q[n] = qn
        dr[n] = beta * _nonlin(qn, sigma) - r0
        res[n] = abs(qn + C * _nonlin(qn, sigma) - B)
        if abs(qn) > threshold:
            status, n_last = "threshold", n
            break

    sl = slice(0, n_last + 1)
    t, q, res = t[sl], q[sl], res[sl]
    r = dr[sl] + r0
    r_dot = np.gradient(r, grid.h, edge_order=2) if r.size >= 3 else np.zeros_like(r)
    raw = raw_residual(q, r, t, datum, W, a)
    return ChargeTrajectory(
        t=t, q=q, r=r, r_dot=r_dot, residual=res, residual_raw=raw, h=grid.h, params=p,
        status=status, newton_steps=newton_steps,
    )


def raw_residual(q, r, t, datum: InitialDatum, W: AbelWeights, a: complex) -> np.ndarray:
    """``|q_n + i a sum_j w_nj r_j - f(t_n)|`` with the unregularized forcing."""
    f = forcing_raw(t, datum)
    out = np.zeros(t.size)
    for n in range(1, t.size):
        out[n] = abs(q[n] + 1j * a * np.dot(W.row(n), r[: n + 1]) - f[n])
    out[0] = abs(q[0] - f[0])
    return out


# ------------------------------------------------------- graded stepping

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X, _GL_W = 0.5 * (_GL_X + 1.0), 0.5 * _GL_W


def graded_abel_weights(t: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Cell weights for ``int_0^{t[-1]} (t[-1] - tau)^(-alpha) g(tau) dtau`` with piecewise-linear ``g``.

    Returns ``(L, R)`` so that the integral is ``sum_j L[j] g[j] + R[j] g[j+1]``.
    Cells far from the end (``B > 2 Delta``) use Gauss-Legendre on the smooth
    integrand to avoid cancellation; near cells use the closed form.
    """
    g = 1.0 - alpha
    p = g + 1.0
    A = t[-1] - t[:-1]
    B = t[-1] - t[1:]
    Dl = A - B
    L = np.empty_like(Dl)
    R = np.empty_like(Dl)
    far = B > 2.0 * Dl
    if np.any(far):
        b, d = B[far], Dl[far]
        ker = (b[:, None] + d[:, None] * _GL_X[None, :]) ** (-alpha)
        L[far] = d * (ker @ (_GL_W * _GL_X))
        R[far] = d * (ker @ (_GL_W * (1.0 - _GL_X)))
    near = ~far
    if np.any(near):
        a_, b, d = A[near], B[near], Dl[near]
        Ap, Bp = a_**p / p - b**p / p, (a_**g - b**g) / g
        L[near] = (Ap - b * Bp) / d
        R[near] = (a_ * Bp - Ap) / d
    return L, R


def solve_charge_graded(
    datum: InitialDatum,
    T_final: float,
    h_max: float,
    opts: SolverOptions | None = None,
    h_min: float | None = None,
    grade_from: float = 2.0,
) -> ChargeTrajectory:
    """Product-trapezoid march with steps shrinking as ``|q|`` grows.

    The step obeys ``h <= h_max (q_ref / |q|)^(2 sigma / (1 - alpha))`` with
    ``q_ref = grade_from |q0|``, which keeps
    the implicit coefficient ``|C| |q|^(2 sigma)`` at its initial size, so the
    per-step equation keeps a root on the continued branch while ``|q|`` runs
    up to the blow-up threshold. A step whose root does not continue the
    branch is halved; below ``h_min`` the run stalls.
    """
    opts = opts or SolverOptions()
    p = datum.params
    sigma, beta, al = p.sigma, p.beta, p.alpha
    a = const_a(p.s)
    q0, r0 = complex(datum.q0), datum.r0
    threshold = opts.blow_up_threshold or 1e6 * max(abs(q0), 1e-300)
    h_min = 1e-14 * T_final if h_min is None else h_min
    expo = 2 * sigma / (1.0 - al)
    ref = grade_from * max(abs(q0), 1e-300)
    t, q, dr, res, raw = [0.0], [q0], [0j], [0.0], [0.0]
    status = "completed"
    h = h_max
    while T_final - t[-1] > 1e-9 * h_max:
        h = min(h_max, 2 * h, h_max * (ref / max(abs(q[-1]), ref)) ** expo)
        if T_final - t[-1] - h < 1e-6 * h_max:
            h = T_final - t[-1]
        accepted = False
        while h >= h_min:
            tn = t[-1] + h
            tt = np.array([*t, tn])
            L, R = graded_abel_weights(tt, al)
            drs = np.array(dr, dtype=complex)
            hist = np.dot(L, drs) + np.dot(R[:-1], drs[1:])
            w_nn = R[-1]
            f_n = complex(forcing_regularized(np.array([tn]), datum, T_final)[0])
            B = f_n - 1j * a * (hist - w_nn * r0)
            C = 1j * a * w_nn * beta
            guess = q[-1] + (q[-1] - q[-2]) * h / (t[-1] - t[-2]) if len(q) >= 2 else q[-1]
            with np.errstate(over="ignore", invalid="ignore"):
                qn, ok = _fixed_point(guess, B, C, sigma, opts.damping, opts)
            if not ok or not _continues(qn, guess):
                qn, ok = _newton(guess, B, C, sigma, opts.tol)
            if not ok or not _continues(qn, guess):
                qn, ok = _radial(B, C, sigma, guess)
                ok = ok and _continues(qn, guess)
            if ok:
                accepted = True
                break
            h *= 0.5
        if not accepted:
            status = "stalled"
            log.warning("graded charge solver stalled at t=%.6g", t[-1])
            break
        t.append(tn)
        q.append(qn)
        dr.append(beta * _nonlin(qn, sigma) - r0)
        res.append(abs(qn + C * _nonlin(qn, sigma) - B))
        rr = np.array(dr) + r0
        f_raw = complex(forcing_raw(np.array([tn]), datum, T_final)[0])
        raw.append(abs(qn + 1j * a * (np.dot(L, rr[:-1]) + np.dot(R, rr[1:])) - f_raw))
        if abs(qn) > threshold:
            status = "threshold"
            break
    t = np.array(t)
    q = np.array(q)
    r = np.array(dr) + r0
    r_dot = np.gradient(r, t, edge_order=2) if r.size >= 3 else np.zeros_like(r)
    return ChargeTrajectory(
        t=t, q=q, r=r, r_dot=r_dot, residual=np.array(res), residual_raw=np.array(raw), h=h_max, params=p,
        status=status, info={"graded": True, "h_last": float(t[-1] - t[-2]) if t.size > 1 else h_max},
    )


# ----------------------------------------------------------- convergence


@dataclass
class ConvergenceReport:
    h: list
    q_final: list
    errors: list
    orders: list | None
    expected: float


def self_convergence(datum: InitialDatum, T_final: float, h_list, opts: SolverOptions | None = None) -> ConvergenceReport:
    """Observed order of ``q(T_final)`` from successive differences over halving steps."""
    h_list = sorted(h_list, reverse=True)
    if len(h_list) < 3:
        raise ValueError("need at least three step sizes")
    for h1, h2 in zip(h_list, h_list[1:]):
        if not math.isclose(h1, 2 * h2, rel_tol=1e-12):
            raise ValueError("step sizes must halve")
    qs = []
    for h in h_list:
        traj = solve_charge(datum, TimeGrid.from_final(T_final, h), opts)
        if traj.status != "completed":
            raise ChargeSolverError(f"run at h={h} ended with {traj.status}")
        qs.append(complex(traj.q[-1]))
    errs = [abs(a - b) for a, b in zip(qs, qs[1:])]
    orders = None
    if all(e1 > e2 > 0 for e1, e2 in zip(errs, errs[1:])):
        orders = [math.log2(e1 / e2) for e1, e2 in zip(errs, errs[1:])]
    return ConvergenceReport(h_list, qs, errs, orders, 2.0 - datum.params.alpha)
