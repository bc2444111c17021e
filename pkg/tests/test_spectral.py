import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracwalk import matrixkit as mk
from diracwalk import spectral as sp
from diracwalk import wavefunction as wf

angles = st.floats(-math.pi, math.pi)
mus = st.floats(0.01, 0.99)


@settings(max_examples=200, deadline=None)
@given(angles, angles, mus)
def test_block_diagonal(om, k, mu):
    assert sp.block_check(om, k, mu) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(angles, angles, mus)
def test_upper_left_block_is_scaled_dirac_matrix(om, k, mu):
    m = sp.conjugated_symbol(om, k, mu)
    assert np.abs(m[:2, :2] + mu * sp.dirac_block(om, k, mu)).max() <= 1e-12


@settings(max_examples=200, deadline=None)
@given(angles, angles, mus)
def test_determinant_closed_form(om, k, mu):
    d = np.linalg.det(sp.dirac_block(om, k, mu))
    assert abs(d - sp.dirac_determinant(om, k, mu)) <= 1e-12 * max(1.0, abs(d))


def test_symbol_at_origin_is_total_matrix():
    ts = sp.canonical_transitions()
    assert np.allclose(sp.symbol(ts, 0.0, 0.0), mk.as_float(ts.total()))


@settings(max_examples=200, deadline=None)
@given(st.floats(-1.4, 1.4), mus)
def test_root_matches_closed_form(k, mu):
    a = sp.lattice_dispersion(k, mu)
    b = sp.lattice_dispersion_closed_form(k, mu)
    if isinstance(b, sp.NoRealRoot):
        assert isinstance(a, sp.NoRealRoot)
    else:
        assert abs(a - b) <= 1e-10
        assert abs(sp.dirac_determinant(a, k, mu)) * mu * mu <= 1e-12


def test_no_real_root():
    r = sp.lattice_dispersion(math.pi / 2, 0.5)
    assert isinstance(r, sp.NoRealRoot) and not r and math.isnan(r)


def test_zero_set_sign_change():
    # the determinant changes sign along omega exactly at the dispersion root
    mu, k = 0.3, 0.4
    w0 = sp.lattice_dispersion(k, mu)
    ws = np.linspace(0, math.pi / 2, 2001)
    d = np.array([sp.dirac_determinant(w, k, mu) for w in ws])
    idx = np.nonzero(np.diff(np.sign(d)))[0]
    assert len(idx) == 1
    assert ws[idx[0]] <= w0 <= ws[idx[0] + 1]


def test_dispersion_at_zero_k_is_asin_mu():
    assert sp.lattice_dispersion(0.0, 0.5) == pytest.approx(math.asin(0.5), abs=1e-15)


def test_small_argument_regime():
    pts = sp.dispersion_error_map(0.05, np.linspace(-0.1, 0.1, 101))
    assert max(p.rel_error for p in pts) <= 0.01
    assert all(p.in_regime for p in pts)


def test_rel_error_grows_with_mass():
    mus = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    errs = [sp.dispersion_error_map(mu, [0.0])[0].rel_error for mu in mus]
    assert all(b > a for a, b in zip(errs, errs[1:]))


def test_error_map_no_root_rows():
    pts = sp.dispersion_error_map(0.9, [0.0, 1.5])
    assert not pts[1].in_regime and math.isnan(pts[1].rel_error)


@pytest.mark.parametrize("k", [0.05, 0.3, 1.0, -0.8])
@pytest.mark.parametrize("mu", [0.05, 0.5])
def test_eigenmode_bridge(k, mu):
    em = sp.eigenmode(k, mu)
    assert em.residual() <= 1e-12
    assert em.determinant() <= 1e-12
    z = em.sample(20, 20, t0=3, x0=-7)
    for part in (z.real, z.imag):
        assert wf.exact_dirac_residual(wf.WaveField(part), mu) <= 1e-10
        assert wf.auxiliary_residual(wf.WaveField(part), mu) <= 1e-12


def test_continuum_breakdown():
    from diracwalk.validation import continuum_breakdown_ratio

    assert continuum_breakdown_ratio(0.05) >= 10


@pytest.mark.parametrize("mu", [0.2, 0.3, 0.6])
def test_second_order_auxiliary_block(mu):
    fit = sp.auxiliary_second_order_fit(mu)
    assert np.abs(fit["r_m"] - np.diag([1 + 1 / mu, 1 - 1 / mu])).max() <= 1e-6
    sz = np.diag([1.0, -1.0])
    assert np.abs(fit["r_tt"] - mu * sz / 2).max() <= 1e-5
    assert np.abs(fit["r_tt_from_k"] - mu * sz / 2).max() <= 1e-5
    assert fit["first_order"] <= 1e-9


def test_physical_units_electron():
    u = sp.physical_units(510998.95, 0.1)
    assert u.dx_m == pytest.approx(3.8616e-14, rel=1e-4)
    assert u.dt_s == pytest.approx(u.dx_m / 299792458.0, rel=1e-12)
    with pytest.raises(ValueError):
        sp.physical_units(-1, 0.1)
    with pytest.raises(ValueError):
        sp.physical_units(1, 1.5)


def test_mu_range():
    with pytest.raises(ValueError):
        sp.lattice_dispersion(0.1, 1.0)
