"""Shared small-grid fixtures; acceptance-scale fixtures live in test_acceptance.py."""
import numpy as np
import pytest

from su11sim.dispersion import CrystalGeometry, OpticalModel
from su11sim.gsolver import SolverSettings, compensated_second_from_first, composition_parts, solve_crystal
from su11sim.qgrid import Grid

GAMMA_G1 = 1.0 / 144.0   # roughly G = 1 for the 50 um pump


@pytest.fixture(scope="session")
def bbo():
    return OpticalModel.sellmeier_bbo()


@pytest.fixture(scope="session")
def geom_comp():
    return CrystalGeometry.from_fwhm(50e-6, configuration="compensated")


@pytest.fixture(scope="session")
def geom_nc():
    return CrystalGeometry.from_fwhm(50e-6, configuration="noncompensated")


@pytest.fixture(scope="session")
def small_grid():
    return Grid(3e5, 61)


@pytest.fixture(scope="session")
def fast():
    return SolverSettings(64)


@pytest.fixture(scope="session")
def pair1(geom_comp, bbo, small_grid, fast):
    return solve_crystal(geom_comp, bbo, GAMMA_G1, small_grid, fast)


@pytest.fixture(scope="session")
def comp_parts(pair1):
    return composition_parts(pair1, compensated_second_from_first(pair1))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


import re  # noqa: E402

# --- acceptance reporting -----------------------------------------------------

ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        title, ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<4} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
