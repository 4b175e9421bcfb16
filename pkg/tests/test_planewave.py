import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from su11sim.dispersion import CrystalGeometry, OpticalModel, delta_k
from su11sim.errors import DimensionError, UndefinedError
from su11sim.planewave import (compensated_coefficients, compose_pw, delta_phi_closed, export_rows,
                               f_min_from_schmidt_pw, k_functional, noncompensated_intensity_pw,
                               pw_coefficients, pw_crystal_coefficients, pw_ode_oracle, schmidt_number_pw,
                               second_crystal_pw, sensitivity_density_pw, single_crystal_pw,
                               su11_compensated_pw, su11_noncompensated_pw)
from su11sim.qgrid import Grid, quadrature

L1 = 2e-3
BBO = OpticalModel.sellmeier_bbo()


def _ivp(dk, L, g0, s=1.0, c=0.0):
    def rhs(z, v):
        x, y = v[0] + 1j * v[1], v[2] + 1j * v[3]
        ph = np.exp(1j * dk * (s * z + c))
        dx, dy = g0 * ph * y, g0 * np.conj(ph) * x
        return [dx.real, dx.imag, dy.real, dy.imag]
    r = solve_ivp(rhs, (0, L), [0, 0, 1, 0], method="DOP853", rtol=1e-13, atol=1e-13)
    x, y = r.y[0, -1] + 1j * r.y[1, -1], r.y[2, -1] + 1j * r.y[3, -1]
    return x, np.conj(y)


regime = st.sampled_from(["real", "imaginary", "near-zero"])


@settings(max_examples=15, deadline=None)
@given(st.floats(2e4, 3e5), regime, st.floats(0.1, 3.0))
def test_closed_form_matches_ivp(q, kind, gain):
    dk = float(delta_k(BBO, q, -q))
    g0 = {"real": gain / L1 + abs(dk), "imaginary": abs(dk) / (2 + gain),
          "near-zero": abs(dk) / 2 * (1 + 1e-9 * gain)}[kind]
    b, e = pw_coefficients(dk, L1, g0)
    bo, eo = _ivp(dk, L1, g0)
    assert abs(b - bo) <= 1e-9 * max(abs(bo), 1e-300)
    assert abs(e - eo) <= 1e-9 * abs(eo)


def test_package_oracle_matches_ivp():
    geom = CrystalGeometry(L1, "compensated")
    q, g0 = 1.2e5, 700.0
    dk = float(delta_k(BBO, q, -q))
    for idx, (s, c) in [(1, (1.0, 0.0)), (2, (-1.0, L1))]:
        b, e = pw_ode_oracle(BBO, geom, g0, q, crystal_index=idx)
        bo, eo = _ivp(dk, L1, g0, s, c)
        assert b == pytest.approx(bo, rel=1e-10)
        assert e == pytest.approx(eo, rel=1e-10)
        bc, ec = pw_crystal_coefficients(dk, L1, g0, s, c)
        assert bc == pytest.approx(bo, rel=1e-10)
        assert ec == pytest.approx(eo, rel=1e-10)


def test_series_branch_is_continuous():
    dk = 1000.0
    g0 = dk / 2
    for eps in (1e-12, 1e-9, 1e-6, 1e-3):
        a = pw_coefficients(dk, L1, g0 * (1 + eps))
        b = pw_coefficients(dk, L1, g0 * (1 - eps))
        assert abs(a[0] - b[0]) < 10 * eps * abs(a[0]) + 1e-14
    # at g = 0 exactly: β = Γ0 L e^{iΔkL/2}
    b0, _ = pw_coefficients(dk, L1, g0)
    assert b0 == pytest.approx(g0 * L1 * np.exp(0.5j * dk * L1), rel=1e-14)


@given(st.floats(-5e4, 5e4), st.floats(0.0, 3000.0))
def test_bogoliubov_unitarity(dk, g0):
    b, e = pw_coefficients(dk, L1, g0)
    assert abs(e) ** 2 - abs(b) ** 2 == pytest.approx(1.0, abs=1e-13 * (1 + abs(e) ** 2))


@pytest.mark.parametrize("G", [0.1, 1.0, 3.0])
def test_collinear_sinh_law(G):
    b, _ = pw_coefficients(0.0, L1, G / L1)
    assert abs(b) ** 2 == pytest.approx(np.sinh(G) ** 2, rel=1e-13)


# printed two-crystal closed forms, with g = g(q_s) = sqrt(4Γ0² - Δk²)

@pytest.fixture(scope="module")
def pw_setup():
    grid = Grid(4e5, 41)
    g0 = 900.0
    dk = delta_k(BBO, grid.q, -grid.q)
    g = np.sqrt((4 * g0**2 - dk**2).astype(complex))
    return grid, g0, dk, g


@pytest.mark.parametrize("phi", [0.3, 1.7, np.pi])
def test_noncompensated_printed_forms(pw_setup, phi):
    grid, g0, dk, g = pw_setup
    t = su11_noncompensated_pw(BBO, L1, g0, phi, grid)
    x = L1 * g / 2
    beta = -(4 * g0 / g**2) * (dk * np.sin(phi / 2) * np.sinh(x) - g * np.cos(phi / 2) * np.cosh(x)) \
        * np.sinh(x) * np.exp(1j * (L1 * dk + phi / 2))
    eta = -np.exp(1j * (dk * L1 + phi)) / g**2 * (
        -2 * g0**2 * (np.cosh(L1 * g) - 1)
        + np.exp(-1j * phi) * (-2 * g0**2 + (2 * g0**2 - g**2) * np.cosh(L1 * g) + 1j * dk * g * np.sinh(L1 * g)))
    assert np.max(np.abs(beta - t.beta)) <= 1e-12 * np.max(np.abs(t.beta))
    assert np.max(np.abs(eta - t.eta)) <= 1e-12 * np.max(np.abs(t.eta))
    n = noncompensated_intensity_pw(BBO, L1, g0, phi, grid)
    np.testing.assert_allclose(n, t.intensity_density, rtol=1e-11, atol=1e-12 * n.max())


@pytest.mark.parametrize("phi", [0.0, 0.9, 2.5])
def test_compensated_printed_forms(pw_setup, phi):
    grid, g0, dk, g = pw_setup
    t, sp = su11_compensated_pw(BBO, L1, g0, phi, grid)
    beta = g0 / g * (1j * dk / g * (np.cosh(L1 * g) - 1) + np.sinh(L1 * g)) * (1 + np.exp(1j * phi))
    eta = 1 + 2 * g0**2 / g**2 * (np.cosh(L1 * g) - 1) * (1 + np.exp(1j * phi))
    assert np.max(np.abs(beta - t.beta)) <= 1e-12 * np.max(np.abs(t.beta))
    assert np.max(np.abs(eta - t.eta)) <= 1e-12 * np.max(np.abs(t.eta))
    t0, _ = su11_compensated_pw(BBO, L1, g0, 0.0, grid)
    np.testing.assert_allclose(sp.intensity_density, t0.intensity_density * np.cos(phi / 2) ** 2,
                               rtol=1e-12, atol=1e-14)


def test_compensated_dark_fringe(pw_setup):
    grid, g0, _, _ = pw_setup
    t, _ = su11_compensated_pw(BBO, L1, g0, np.pi, grid)
    assert np.max(t.intensity_density) < 1e-28
    np.testing.assert_allclose(np.abs(t.eta), 1.0, atol=1e-12)


def test_compose_grid_mismatch():
    a = single_crystal_pw(BBO, L1, 100.0, Grid(1e5, 11))
    b = single_crystal_pw(BBO, L1, 100.0, Grid(2e5, 11))
    with pytest.raises(DimensionError):
        compose_pw(a, b, 0.0)
    with pytest.raises(DimensionError):
        type(a)(a.grid, np.zeros(3), np.zeros(3))


def test_second_crystal_compensated_is_conjugate_of_first():
    grid = Grid(3e5, 21)
    t1 = single_crystal_pw(BBO, L1, 500.0, grid)
    t2 = second_crystal_pw(BBO, CrystalGeometry(L1, "compensated"), 500.0, grid)
    np.testing.assert_allclose(t2.eta, np.conj(t1.eta), rtol=1e-13)
    np.testing.assert_allclose(t2.beta, t1.beta, rtol=1e-13)


def test_closed_sensitivity_values():
    grid = Grid(4e6, 4001)
    sp = single_crystal_pw(BBO, L1, 1.0 / L1, grid).spectra()
    s = sensitivity_density_pw(sp, np.array([np.pi]))
    n = sp.intensity_density
    A, B = compensated_coefficients(n, grid)
    assert A == pytest.approx(quadrature(n + n**2, grid))
    assert s.f[0] == pytest.approx(s.f_min, rel=1e-13)
    # f_min = ½ sqrt(N/A)
    assert s.f_min == pytest.approx(0.5 * np.sqrt(s.n1_total / A), rel=1e-13)
    assert np.isinf(delta_phi_closed(0.0, A, B))


def test_k_functional_gaussian():
    g = Grid(20.0, 2001)
    assert k_functional(np.exp(-g.q**2 / 2), g) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
    with pytest.raises(UndefinedError):
        k_functional(np.zeros(g.n_points), g)


def test_schmidt_pw_and_fmin():
    grid = Grid(4e6, 4001)
    sp = single_crystal_pw(BBO, L1, 1.0 / L1, grid).spectra()
    Lx = 2e-4
    K = schmidt_number_pw(sp, Lx)
    assert K == pytest.approx(Lx * k_functional(np.sqrt(sp.intensity_density), grid), rel=1e-12)
    # N/K = ∫N²/∫N is independent of L_x
    n, n2 = sp.total_density, quadrature(sp.intensity_density**2, grid)
    assert f_min_from_schmidt_pw(n, Lx, K) == pytest.approx(0.5 * np.sqrt(n / (n + n2)), rel=1e-12)


def test_export_rows():
    grid = Grid(3e5, 11)
    sp = single_crystal_pw(BBO, L1, 200.0, grid).spectra()
    rows = export_rows(BBO, sp)
    assert rows.shape == (11, 3)
    np.testing.assert_allclose(rows[:, 2], rows[:, 1] * (1 + rows[:, 1]))
    with pytest.raises(ValueError):
        single_crystal_pw(BBO, L1, -1.0, grid)
