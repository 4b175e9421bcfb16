import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from su11sim.dispersion import CrystalGeometry
from su11sim.errors import ConfigError, DimensionError, DivergenceError
from su11sim.gsolver import (SolverSettings, TransferPair, _rk4, collinear_intensity, compensated_second_from_first,
                             compose, composition_parts, convergence_report, identity_residuals, load_pair,
                             max_relative_difference, pair_digest, save_pair, solve_crystal,
                             solve_interferometer_single_pass)
from su11sim.qgrid import Grid

from conftest import GAMMA_G1


def test_settings_validation():
    with pytest.raises(ConfigError):
        SolverSettings(8)
    with pytest.raises(ConfigError):
        SolverSettings(64.5)
    with pytest.raises(ConfigError):
        SolverSettings(64, tolerance=0.0)


def test_parity_solve_matches_full(geom_comp, bbo, small_grid, fast, pair1):
    full = solve_crystal(geom_comp, bbo, GAMMA_G1, small_grid, SolverSettings(64, parity=False))
    assert max_relative_difference(pair1.B_op, full.B_op) < 1e-12
    assert max_relative_difference(pair1.E_op, full.E_op) < 1e-12


# 64 RK4 steps: the identities hold to the truncation error, not to rounding
IDENTITY_TOL = 1e-7


def test_identities_single_crystal(pair1):
    r = identity_residuals(pair1)
    assert set(r) == {"EEh_minus_BBh", "EBt_symmetric", "EhE_minus_BtBc", "EhB_symmetric"}
    assert max(r.values()) < IDENTITY_TOL


@pytest.mark.parametrize("conf", ["noncompensated", "compensated"])
@pytest.mark.parametrize("phi", [0.0, 1.1, np.pi])
def test_compose_matches_single_pass(bbo, small_grid, fast, pair1, conf, phi):
    geom = CrystalGeometry.from_fwhm(50e-6, configuration=conf)
    tp2 = solve_crystal(geom, bbo, GAMMA_G1, small_grid, fast, crystal_index=2)
    a = compose(pair1, tp2, phi)
    b = solve_interferometer_single_pass(geom, bbo, GAMMA_G1, small_grid, phi, fast)
    # RK4 is linear in the initial state, so composing equals continuing the integration
    scale = np.max(np.abs(pair1.B_op))
    assert np.max(np.abs(a.B_op - b.B_op)) < 1e-11 * scale
    assert max_relative_difference(a.E_op, b.E_op) < 1e-11
    assert max(identity_residuals(a).values()) < IDENTITY_TOL


def test_compensated_shortcut_matches_direct(geom_comp, bbo, small_grid, pair1):
    direct = solve_crystal(geom_comp, bbo, GAMMA_G1, small_grid, SolverSettings(256), crystal_index=2)
    ref = solve_crystal(geom_comp, bbo, GAMMA_G1, small_grid, SolverSettings(256))
    short = compensated_second_from_first(ref)
    assert max_relative_difference(short.B.values, direct.B.values) < 1e-9
    assert max_relative_difference(short.E.values, direct.E.values) < 1e-9
    assert short.meta["kind"] == "compensated-shortcut"


def test_vacuum_is_neutral(pair1, small_grid):
    vac = TransferPair.vacuum(small_grid)
    for phi in (0.0, 2.0):
        c = compose(pair1, vac, phi)
        np.testing.assert_allclose(c.B_op, pair1.B_op, atol=1e-15)
        np.testing.assert_allclose(c.E_op, pair1.E_op, atol=1e-15)
    assert max(identity_residuals(vac).values()) == 0.0


def test_zero_gain_and_bad_inputs(geom_comp, bbo, small_grid, fast):
    tp = solve_crystal(geom_comp, bbo, 0.0, small_grid, fast)
    assert not tp.B_op.any()
    with pytest.raises(ConfigError):
        solve_crystal(geom_comp, bbo, -1.0, small_grid, fast)
    with pytest.raises(ConfigError):
        solve_crystal(CrystalGeometry(), bbo, 1.0, small_grid, fast)
    with pytest.raises(DimensionError):
        composition_parts(tp, TransferPair.vacuum(Grid(1e5, 5)))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_rk4_reports_divergence():
    with pytest.raises(DivergenceError, match="step 1/"):
        _rk4([np.array([1e308])], lambda L: 1e10, lambda K, s: [K * s[0]], 1.0, 16, "test")


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 2 * np.pi))
def test_parts_linear_in_phase(pair1, comp_parts, phi):
    tp = comp_parts.at(phi)
    np.testing.assert_allclose(comp_parts.beta_at(phi), tp.B_op)
    # N(φ) = N(0) cos²(φ/2) for the compensated scheme
    n0 = np.sum(np.abs(comp_parts.at(0.0).B_op) ** 2)
    assert np.sum(np.abs(tp.B_op) ** 2) == pytest.approx(n0 * np.cos(phi / 2) ** 2, rel=1e-8, abs=1e-12 * n0)


def test_collinear_adjoint_matches_full_solve(geom_comp, bbo, small_grid, fast):
    gams = [0.5 * GAMMA_G1, 2 * GAMMA_G1]
    geom = geom_comp.with_configuration("single")
    y = collinear_intensity(geom, bbo, gams, small_grid, 64)
    for g, yi in zip(gams, y):
        tp = solve_crystal(geom, bbo, g, small_grid, fast)
        assert yi == pytest.approx(np.sum(np.abs(tp.B_op[small_grid.center]) ** 2), rel=1e-11)
    with pytest.raises(ConfigError):
        collinear_intensity(geom, bbo, [-1.0], small_grid)


def test_convergence_report(geom_comp, bbo):
    rep = convergence_report(geom_comp, bbo, GAMMA_G1, Grid(3e5, 31), 32)
    assert rep["steps"] == 32 and rep["max"] < 1e-5
    with pytest.raises(ConfigError):
        convergence_report(geom_comp, bbo, GAMMA_G1, Grid(3e5, 31), 16)


def test_save_load_roundtrip(tmp_path, pair1):
    path = save_pair(pair1, tmp_path / "k.npz")
    back = load_pair(path)
    assert back.grid == pair1.grid and back.meta == pair1.meta
    assert pair_digest(back) == pair_digest(pair1)
