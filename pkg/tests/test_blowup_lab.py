import math

import numpy as np
import pytest

from fracdelta.blowup_lab import (
    InitialObservables,
    Outcome,
    critical_mass,
    detect_blowup,
    energy_scaling_check,
    gn_constant_estimate,
    gn_ratio,
    initial_observables,
    regime,
    run_regime,
    scaled_datum,
    virial_parabola_root,
    write_report,
)
from fracdelta.charge_equation import ChargeTrajectory
from fracdelta.initial_data import RegularPart, make_datum
from fracdelta.spectral_kernels import ModelParams, green_origin


@pytest.mark.parametrize(
    "beta,sigma,tag",
    [(1.0, 0.4, "defocusing"), (-1.0, 0.3, "subcritical"), (-1.0, 0.5, "critical"), (-1.0, 1.0, "supercritical")],
)
def test_regime_tags(beta, sigma, tag):
    assert regime(ModelParams(0.75, beta, sigma)) == tag


def test_energy_scaling_law(small_datum):
    chk = energy_scaling_check(small_datum, nus=(1.0, 0.5, 0.25, 2.0))
    assert chk.max_ratio_error < 1e-9
    assert chk.max_energy_error < 1e-9


def test_scaled_datum_keeps_trace_and_dilates():
    p = ModelParams(0.75, -1.0, 1.0)
    d = make_datum(RegularPart(amplitude=0.2), p)
    e = scaled_datum(d, 0.5)
    assert e.q0 == pytest.approx(d.q0, rel=1e-12)
    assert e.regular.width == pytest.approx(2.0)
    assert scaled_datum(d, 1.0) is d
    with pytest.raises(ValueError):
        scaled_datum(d, 0.0)


def test_gn_quotient_is_sharp_at_s_one():
    # ||f||_inf^2 <= ||f|| ||f'|| with equality for exp(-|x|), the Green's function
    assert gn_ratio(1.0, "resolvent", 1.0) == pytest.approx(1.0, rel=1e-9)
    assert gn_ratio(1.0, "gaussian") < 1.0
    assert gn_constant_estimate(1.0) == pytest.approx(1.0, rel=1e-6)


def test_gn_gaussian_closed_form():
    # moments of f_hat = exp(-k^2/2): f(0) = 1, ||f||^2 = sqrt(pi), [f]^2 = Gamma(s + 1/2)
    s = 0.75
    al = 0.5 / s
    f0 = 1.0
    norm2 = math.sqrt(math.pi)
    semi2 = math.gamma(s + 0.5)
    expected = f0 / (norm2 ** ((1 - al) / 2) * semi2 ** (al / 2))
    assert gn_ratio(s, "gaussian") == pytest.approx(expected, rel=1e-10)


def test_gn_estimate_decreases_with_s():
    vals = [gn_constant_estimate(s) for s in (0.6, 0.75, 0.9, 1.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        gn_ratio(0.75, "resolvent", 0.5)
    with pytest.raises(ValueError):
        gn_ratio(0.75, "sech")


def test_critical_mass_formula():
    p = ModelParams(0.75, -2.0, 0.5)
    assert critical_mass(p, 1.2) == pytest.approx((1.5 / (2 * 1.2**3)) ** 1.0, rel=1e-14)
    assert critical_mass(ModelParams(0.75, 0.0, 0.5), 1.2) == math.inf
    with pytest.raises(ValueError):
        critical_mass(p, 0.0)


def test_virial_parabola_root():
    # 2 - t - t^2 / 2: root at sqrt(5) - 1
    assert virial_parabola_root(2.0, -1.0, -1.0) == pytest.approx(math.sqrt(5) - 1)
    assert virial_parabola_root(2.0, 1.0, 1.0) == math.inf
    assert virial_parabola_root(2.0, -4.0, 0.0) == pytest.approx(0.5)


def _fake(q, status, p):
    n = len(q)
    z = np.zeros(n)
    return ChargeTrajectory(np.linspace(0, 1, n), np.asarray(q, complex), z.astype(complex), z.astype(complex),
                            z, z, 1.0 / (n - 1), p, status=status)


def test_detect_blowup_decisions():
    p = ModelParams(0.75, -1.0, 1.0)
    init = InitialObservables(1.0, -1.0, 1.0, 1.0, 0.0)  # virial root 2/3
    t_vir = virial_parabola_root(1.0, 0.0, 8 * 0.75**2 * -1.0)
    out = detect_blowup(_fake([1, 2, 30], "threshold", p), init, p)
    assert out.kind == "blow_up_at" and out.t_star_threshold == 1.0 and out.t_star_virial == pytest.approx(t_vir)
    assert str(out).startswith("blow_up_at(")
    assert detect_blowup(_fake([1, 2, 3], "completed", p), init, p).kind == "global_bounded"
    assert detect_blowup(_fake([1, 2, 3], "stalled", p), init, p).kind == "inconclusive"
    assert detect_blowup(_fake([1, 50, 60], "completed", p), init, p).kind == "inconclusive"
    far = InitialObservables(1.0, -1e-4, 1.0, 1.0, 0.0)
    assert detect_blowup(_fake([1, 2, 30], "threshold", p), far, p).kind == "blow_up_at"
    late = InitialObservables(1.0, -1.0, 1.0, 0.01, 0.0)
    assert detect_blowup(_fake([1, 2, 30], "threshold", p), late, p).kind == "inconclusive"
    assert Outcome("global_bounded").__str__() == "global_bounded"


@pytest.fixture(scope="module")
def negative_energy_datum():
    p = ModelParams(0.75, -1.0, 1.0, 256.0)
    c = green_origin(p.s, p.lam)
    xm = (1 / (3 * c)) ** 0.5
    return make_datum(RegularPart(amplitude=0.9 * xm * (1 - c * xm * xm)), p)


def test_negative_energy_datum(negative_energy_datum):
    init = initial_observables(scaled_datum(negative_energy_datum, 0.5))
    assert init.energy < 0
    assert abs(init.inertia_dot) < 1e-12


def test_run_regime_detects_blowup(negative_energy_datum, tmp_path):
    rep = run_regime(negative_energy_datum, T=0.5, h=1 / 512, nu=0.5, C_s=1.2)
    assert rep.regime == "supercritical"
    assert rep.outcome.kind == "blow_up_at"
    assert rep.outcome.t_star_threshold <= 2 * rep.outcome.t_star_virial
    assert rep.critical_mass is not None
    write_report([rep], tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "s,beta,sigma,nu,E0,mass0,outcome,t_star_threshold,t_star_virial"
    assert "blow_up_at(" in lines[1]
