import numpy as np
import pytest
from hypothesis import given, strategies as st

from su11sim.dispersion import (CrystalGeometry, OpticalModel, bbo_n_e_theta, bbo_n_o, bbo_type1_angle, delta_k,
                                fwhm_to_sigma, h_function, phase_params, pump_envelope, pump_matrix, sigma_to_fwhm)
from su11sim.errors import ConfigError, DomainError
from su11sim.qgrid import Grid

LAM_P = 354.6e-9


def test_type1_angle_phase_matches_collinear():
    th = bbo_type1_angle(LAM_P * 1e6)
    assert np.degrees(th) == pytest.approx(33.16, abs=0.05)
    assert bbo_n_e_theta(LAM_P * 1e6, th) == pytest.approx(float(bbo_n_o(2 * LAM_P * 1e6)), rel=1e-14)


def test_bbo_model_collinear_mismatch_vanishes(bbo):
    assert abs(bbo.collinear_mismatch) < 1e-8 * bbo.k_p
    assert abs(delta_k(bbo, 0.0, 0.0)) < 1e-3


@given(st.floats(-3e5, 3e5), st.floats(-3e5, 3e5))
def test_delta_k_matches_direct_formula(qs, qi):
    m = OpticalModel.custom_k(2.1e7, 1.0e7)
    direct = (np.sqrt(m.k_p**2 - (qs + qi) ** 2) - np.sqrt(m.k_s**2 - qs**2) - np.sqrt(m.k_i**2 - qi**2))
    assert float(delta_k(m, qs, qi)) == pytest.approx(direct, rel=1e-9, abs=1e-6)


@given(st.floats(-3e5, 3e5))
def test_delta_k_symmetric_pair(q):
    m = OpticalModel.sellmeier_bbo()
    assert delta_k(m, q, -q) == delta_k(m, -q, q)
    # anti-collinear pairs: Δk = 2(k_s - sqrt(k_s² - q²)) > 0 with perfect matching
    pc = OpticalModel.perfect_collinear()
    assert float(delta_k(pc, q, -q)) >= 0.0


def test_delta_k_domain():
    m = OpticalModel.custom_k(2e6, 1e6)
    with pytest.raises(DomainError):
        delta_k(m, 1.5e6, 0.0)


def test_bad_models_rejected():
    with pytest.raises(ConfigError):
        OpticalModel(LAM_P, 1.0, 1.0, 2.0, 1.0)
    with pytest.raises(ConfigError):
        OpticalModel.from_config({"mode": "glass"})
    with pytest.raises(ConfigError):
        OpticalModel.from_config({"mode": "custom-k", "k_p": 1.0})


def test_from_config_modes():
    assert OpticalModel.from_config({}) == OpticalModel.sellmeier_bbo()
    pc = OpticalModel.from_config({"mode": "perfect-collinear", "k_s": 1e7})
    assert pc.k_p == 2e7
    ck = OpticalModel.from_config({"mode": "custom-k", "k_p": 3.0e7, "k_s": 1.4e7})
    assert ck.collinear_mismatch == pytest.approx(0.2e7)


def test_no_phase_matching_far_uv():
    with pytest.raises(DomainError):
        bbo_type1_angle(0.2)


@given(st.floats(1e-6, 1e-3))
def test_fwhm_sigma_inverse(w):
    assert sigma_to_fwhm(fwhm_to_sigma(w)) == pytest.approx(w, rel=1e-14)


def test_fwhm_definition():
    geom = CrystalGeometry.from_fwhm(50e-6)
    # |E_p|² ∝ exp(-x²/σ²) falls to one half at x = FWHM/2
    assert np.exp(-(25e-6 / geom.pump_sigma) ** 2) == pytest.approx(0.5, rel=1e-14)
    assert geom.fwhm == pytest.approx(50e-6)


def test_phase_params():
    c = CrystalGeometry(2e-3, "compensated")
    n = CrystalGeometry(2e-3, "noncompensated")
    assert phase_params(c, 1) == (1.0, 0.0)
    assert phase_params(c, 2) == (-1.0, 2e-3)
    assert phase_params(n, 2) == (1.0, 2e-3)
    with pytest.raises(ConfigError):
        phase_params(CrystalGeometry(), 2)
    with pytest.raises(ConfigError):
        phase_params(c, 3)


def test_h_function_unit_modulus_and_domain(bbo):
    geom = CrystalGeometry(2e-3, "compensated")
    h = h_function(geom, bbo, 2, 1e5, 2e4, np.linspace(0, 2e-3, 5))
    np.testing.assert_allclose(np.abs(h), 1.0)
    # compensated second crystal at L = L1 undoes the first crystal phase at L1
    assert h_function(geom, bbo, 2, 1e5, 2e4, 2e-3) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        h_function(geom, bbo, 1, 0.0, 0.0, 3e-3)


def test_pump_envelope_and_matrix():
    geom = CrystalGeometry.from_fwhm(50e-6)
    assert pump_envelope(geom, 1e4, -1e4) == 1.0
    g = Grid(1e5, 11)
    P = pump_matrix(geom, g)
    np.testing.assert_allclose(P, P.T)
    np.testing.assert_allclose(P, P[::-1, ::-1])
    pw = pump_matrix(CrystalGeometry(), g)
    np.testing.assert_allclose(pw * g.dq, np.eye(11)[::-1])
    with pytest.raises(ConfigError):
        pump_envelope(CrystalGeometry(), 0.0, 0.0)


def test_geometry_validation_and_config():
    with pytest.raises(ConfigError):
        CrystalGeometry(-1.0)
    with pytest.raises(ConfigError):
        CrystalGeometry(configuration="folded")
    with pytest.raises(ConfigError):
        CrystalGeometry(pump_sigma=0.0)
    g = CrystalGeometry.from_config({"pump_fwhm": 50e-6, "configuration": "compensated"})
    assert g == CrystalGeometry.from_fwhm(50e-6, configuration="compensated")
    assert CrystalGeometry.from_config({}).plane_wave
