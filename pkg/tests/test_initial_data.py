import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdelta.initial_data import (
    InitialDatum,
    MultipleOrNoRoot,
    RegularPart,
    datum_from_config,
    make_datum,
    phi_origin_quadrature,
    solve_q0,
)
from fracdelta.spectral_kernels import ModelParams, calibrate_grid, green_hat, green_origin


def test_regular_part_validation():
    with pytest.raises(ValueError):
        RegularPart(family="sech")
    with pytest.raises(ValueError):
        RegularPart(width=0.0)
    with pytest.raises(ValueError):
        RegularPart(center_frequency=1.0)
    with pytest.raises(ValueError):
        RegularPart(green_terms=((1.0, 1.0), (-0.5, 2.0)))


def test_gaussian_value_at_origin_matches_quadrature():
    grid = calibrate_grid(ModelParams(0.75, 0, 0), t_resolve=0.0)
    reg = RegularPart(family="gaussian_packet", amplitude=0.3 - 0.1j, width=1.3, center_frequency=0.7)
    assert abs(phi_origin_quadrature(reg, 0.75, grid) - reg.value_at_origin(0.75)) < 1e-12


def test_green_terms_value_at_origin_matches_quadrature():
    p = ModelParams(0.75, 0, 0, 1.0)
    grid = calibrate_grid(p, t_resolve=0.0)
    reg = RegularPart(amplitude=0.0, green_terms=((0.4, 1.0), (-0.4, 3.0)))
    assert abs(phi_origin_quadrature(reg, 0.75, grid) - reg.value_at_origin(0.75)) < 1e-7


def test_dphi_hat_matches_finite_difference():
    reg = RegularPart(family="gaussian_packet", amplitude=0.5, width=0.8, center_frequency=-0.4,
                      green_terms=((1.0, 2.0), (-1.0, 5.0)))
    k = np.array([-2.3, -0.7, 0.4, 1.9])
    eps = 1e-6
    fd = (reg.phi_hat(k + eps, 0.75) - reg.phi_hat(k - eps, 0.75)) / (2 * eps)
    assert np.max(np.abs(fd - reg.dphi_hat(k, 0.75))) < 1e-8


@pytest.mark.parametrize("beta,sigma", [(-1.0, 0.4), (1.0, 0.4), (-0.5, 1.0), (2.0, 0.0)])
def test_consistency_root(beta, sigma):
    p = ModelParams(0.75, beta, sigma, 1.0)
    d = make_datum(RegularPart(amplitude=0.2 + 0.1j), p)
    assert d.consistency_residual() < 1e-13
    assert np.angle(d.q0) == pytest.approx(np.angle(0.2 + 0.1j))


def test_defocusing_root_is_smaller_than_focusing():
    reg = RegularPart(amplitude=0.3)
    q_def = abs(make_datum(reg, ModelParams(0.75, 1.0, 0.5)).q0)
    q_foc = abs(make_datum(reg, ModelParams(0.75, -1.0, 0.5)).q0)
    assert q_def < 0.3 < q_foc


def test_no_branch_raises_with_roots():
    p = ModelParams(0.75, -1.0, 1.0, 1.0)
    c = abs(p.beta) * green_origin(p.s, p.lam)
    hump_x = (1 / (3 * c)) ** 0.5
    hump = hump_x * (1 - c * hump_x**2)
    with pytest.raises(MultipleOrNoRoot) as err:
        solve_q0(RegularPart(amplitude=1.5 * hump), p)
    assert err.value.roots, "the off-branch root should be reported"


def test_linear_singular_consistency_raises():
    # 1 + beta G(0) = 0
    p = ModelParams(1.0, -2.0, 0.0, 1.0)
    with pytest.raises(MultipleOrNoRoot):
        solve_q0(RegularPart(amplitude=0.3), p)


def test_psi0_hat_decomposition_and_trace():
    p = ModelParams(0.75, -1.0, 0.4, 1.0)
    d = make_datum(RegularPart(amplitude=0.25), p)
    grid = calibrate_grid(p, t_resolve=0.0)
    k = grid.k
    assert np.max(np.abs(d.psi0_hat(k) - (d.phi_hat(k) - d.r0 * green_hat(k, p)))) < 1e-15
    trace = grid.integrate(d.phi_hat(k)) / math.sqrt(2 * math.pi) - d.r0 * green_origin(p.s, p.lam)
    assert abs(trace - d.q0) < 1e-8


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.1, 20.0), amp=st.floats(0.05, 0.28), width=st.floats(0.5, 2.0))
def test_rebase_preserves_datum(lam, amp, width):
    p = ModelParams(0.75, -1.0, 0.4, 1.0)
    d = make_datum(RegularPart(amplitude=amp, width=width), p)
    e = d.rebase(lam)
    assert e.params.lam == lam
    assert e.q0 == d.q0
    assert e.consistency_residual() < 1e-12
    k = np.linspace(-30, 30, 41)
    assert np.max(np.abs(e.psi0_hat(k) - d.psi0_hat(k))) < 1e-13
    assert np.max(np.abs(e.dpsi0_hat(k) - d.dpsi0_hat(k))) < 1e-12


@settings(max_examples=25, deadline=None)
@given(nu=st.floats(0.2, 5.0), s=st.floats(0.55, 1.0))
def test_dilation_is_a_fourier_rescaling(nu, s):
    reg = RegularPart(family="gaussian_packet", amplitude=0.7, width=1.1, center_frequency=0.5,
                      green_terms=((0.2, 1.0), (-0.2, 3.0)))
    dil = reg.dilate(nu, s)
    k = np.linspace(-8, 8, 17)
    assert np.max(np.abs(dil.phi_hat(k, s) - reg.phi_hat(k / nu, s) / nu)) < 1e-12
    assert dil.value_at_origin(s) == pytest.approx(reg.value_at_origin(s), rel=1e-12, abs=1e-14)


def test_datum_from_config():
    p = ModelParams(0.75, -1.0, 0.4)
    d = datum_from_config({"amplitude_re": 0.2, "amplitude_im": 0.1, "width": 2.0}, p)
    assert isinstance(d, InitialDatum)
    assert d.regular.width == 2.0
    assert d.regular.amplitude == 0.2 + 0.1j
