"""Closed-form plane-wave-pump solutions.

With a plane-wave pump every signal mode q couples only to the idler mode -q,
so the kernels reduce to one complex number per q:

    beta(q, q')  = beta_pw(q) δ(q + q'),   eta(q, q') = eta_pw(q) δ(q - q').

The single-crystal solution of  x' = Γ0 e^{iΔk L} y,  y' = Γ0 e^{-iΔk L} x
with x = beta_pw, y = conj(eta_pw), (x, y)(0) = (0, 1) is

    beta_pw = (2Γ0/g) sinh(g L/2) e^{iΔk L/2}
    eta_pw  = [cosh(g L/2) - iΔk sinh(g L/2)/g] e^{iΔk L/2},   g = sqrt(4Γ0² - Δk²).
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .dispersion import CrystalGeometry, OpticalModel, delta_k, external_angle, phase_params
from .errors import DimensionError, UndefinedError
from .qgrid import Grid, quadrature

SERIES_THRESHOLD = 1e-4


@dataclass(frozen=True)
class PwTransfer:
    grid: Grid
    beta: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        n = self.grid.n_points
        if np.shape(self.beta) != (n,) or np.shape(self.eta) != (n,):
            raise DimensionError("plane-wave transfer arrays must have one sample per grid point")

    @property
    def intensity_density(self) -> np.ndarray:
        return np.abs(self.beta) ** 2

    def spectra(self) -> "PwSpectra":
        return PwSpectra.from_intensity(self.grid, self.intensity_density)


@dataclass(frozen=True)
class PwSpectra:
    grid: Grid
    intensity_density: np.ndarray
    covariance_diagonal: np.ndarray

    @classmethod
    def from_intensity(cls, grid: Grid, n):
        n = np.asarray(n, dtype=float)
        return cls(grid, n, n * (1.0 + n))

    @property
    def total_density(self) -> float:
        return float(quadrature(self.intensity_density, self.grid))


def _cosh_sinhc(g2, L):
    """cosh(gL/2) and sinh(gL/2)/g as functions of g² (complex), series near g = 0."""
    shape = np.shape(g2)
    g2 = np.atleast_1d(np.asarray(g2, dtype=complex))
    g = np.sqrt(g2)
    x = 0.5 * L * g
    small = np.abs(g * L) < SERIES_THRESHOLD
    with np.errstate(invalid="ignore", divide="ignore"):
        ch = np.cosh(x)
        sc = np.sinh(x) / g
    if np.any(small):
        x2 = 0.25 * L * L * g2[small]
        ch[small] = 1 + x2 / 2 + x2**2 / 24 + x2**3 / 720
        sc[small] = 0.5 * L * (1 + x2 / 6 + x2**2 / 120 + x2**3 / 5040)
    return ch.reshape(shape), sc.reshape(shape)


def pw_coefficients(dk, L: float, gamma0: float):
    """(beta_pw, eta_pw) after length L of a crystal with phase factor e^{iΔk z}."""
    dk = np.asarray(dk, dtype=float)
    ch, sc = _cosh_sinhc(4.0 * gamma0**2 - dk.astype(complex) ** 2, L)
    ph = np.exp(0.5j * dk * L)
    return 2.0 * gamma0 * sc * ph, (ch - 1j * dk * sc) * ph


def pw_crystal_coefficients(dk, L: float, gamma0: float, s: float, c: float):
    """Crystal with phase factor exp(iΔk(sz + c)): a frame rotation of the basic solution."""
    beta, eta = pw_coefficients(s * np.asarray(dk, dtype=float), L, gamma0)
    return np.exp(1j * np.asarray(dk) * c) * beta, eta


def _dk_on_grid(m: OpticalModel, grid: Grid):
    return delta_k(m, grid.q, -grid.q)


def single_crystal_pw(m: OpticalModel, L1: float, gamma0: float, grid: Grid) -> PwTransfer:
    if gamma0 < 0:
        raise ValueError("gamma0 must be nonnegative")
    beta, eta = pw_coefficients(_dk_on_grid(m, grid), L1, gamma0)
    return PwTransfer(grid, beta, eta)


def second_crystal_pw(m: OpticalModel, geom: CrystalGeometry, gamma0: float, grid: Grid) -> PwTransfer:
    """Phase-independent second crystal for the configuration in ``geom``."""
    s, c = phase_params(geom, 2)
    beta, eta = pw_crystal_coefficients(_dk_on_grid(m, grid), geom.length_L1, gamma0, s, c)
    return PwTransfer(grid, beta, eta)


def compose_pw(t1: PwTransfer, t2: PwTransfer, phi: float) -> PwTransfer:
    if t1.grid != t2.grid:
        raise DimensionError("plane-wave transfers live on different grids")
    e = np.exp(1j * phi)
    eta = t2.eta * t1.eta + e * t2.beta * np.conj(t1.beta)
    beta = t2.eta * t1.beta + e * t2.beta * np.conj(t1.eta)
    return PwTransfer(t1.grid, beta, eta)


def su11_noncompensated_pw(m: OpticalModel, L1: float, gamma0: float, phi: float, grid: Grid) -> PwTransfer:
    geom = CrystalGeometry(L1, "noncompensated")
    t1 = single_crystal_pw(m, L1, gamma0, grid)
    return compose_pw(t1, second_crystal_pw(m, geom, gamma0, grid), phi)


def su11_compensated_pw(m: OpticalModel, L1: float, gamma0: float, phi: float, grid: Grid):
    """Compensated interferometer: returns (transfer, spectra)."""
    geom = CrystalGeometry(L1, "compensated")
    t1 = single_crystal_pw(m, L1, gamma0, grid)
    t = compose_pw(t1, second_crystal_pw(m, geom, gamma0, grid), phi)
    return t, t.spectra()


def noncompensated_intensity_pw(m: OpticalModel, L1: float, gamma0: float, phi: float, grid: Grid):
    """Output density written as first-crystal density times an interference bracket."""
    dk = _dk_on_grid(m, grid)
    ch, sc = _cosh_sinhc(4.0 * gamma0**2 - dk.astype(complex) ** 2, L1)
    n1 = np.abs(2 * gamma0 * sc) ** 2
    bracket = np.exp(1j * phi) * (ch + 1j * dk * sc) + (ch - 1j * dk * sc)
    return n1 * np.abs(bracket) ** 2


def compensated_coefficients(n1, grid: Grid) -> tuple[float, float]:
    """(A_pw, B_pw) = (∫ξ, ∫ξ²) with ξ = N1(1 + N1)."""
    xi = np.asarray(n1) * (1.0 + np.asarray(n1))
    return float(quadrature(xi, grid)), float(quadrature(xi**2, grid))


def delta_phi_closed(phi, A: float, B: float):
    """√(A + 4B cos²(φ/2)) / (2A |sin(φ/2)|); infinite at φ = 2πk."""
    phi = np.asarray(phi, dtype=float)
    c2 = np.cos(phi / 2) ** 2
    s = np.abs(np.sin(phi / 2))
    with np.errstate(divide="ignore"):
        out = np.sqrt(A + 4 * B * c2) / (2 * A * s)
    return np.where(s == 0, np.inf, out)


@dataclass(frozen=True)
class PwSensitivity:
    phi: np.ndarray
    delta_phi_density: np.ndarray
    f: np.ndarray
    f_min: float
    A: float
    B: float
    n1_total: float
    n1_second: float


def sensitivity_density_pw(spectra1: PwSpectra, phi) -> PwSensitivity:
    """Compensated closed form from the single-crystal spectra ``spectra1``."""
    grid = spectra1.grid
    n1 = spectra1.intensity_density
    A, B = compensated_coefficients(n1, grid)
    n_tot = float(quadrature(n1, grid))
    n_2 = float(quadrature(n1**2, grid))
    if n_tot <= 0:
        raise UndefinedError("zero intensity: sensitivity undefined")
    dphi = delta_phi_closed(phi, A, B)
    return PwSensitivity(np.asarray(phi, dtype=float), dphi, dphi * np.sqrt(n_tot),
                         0.5 * np.sqrt(n_tot / (n_tot + n_2)), A, B, n_tot, n_2)


def k_functional(u, grid: Grid) -> float:
    """(∫|u|²)² / ∫|u|⁴: the effective support width of |u|²."""
    a = np.abs(np.asarray(u)) ** 2
    den = float(quadrature(a**2, grid))
    if den == 0:
        raise UndefinedError("functional undefined for a zero function")
    return float(quadrature(a, grid)) ** 2 / den


def schmidt_number_pw(spectra: PwSpectra, L_x: float) -> float:
    n = spectra.intensity_density
    if not np.any(n > 0):
        raise UndefinedError("Schmidt number undefined for zero intensity")
    g = spectra.grid
    return L_x * float(quadrature(n, g)) ** 2 / float(quadrature(n**2, g))


def f_min_from_schmidt_pw(n_tot_density: float, L_x: float, K_pw: float) -> float:
    return 0.5 / np.sqrt(1.0 + L_x * n_tot_density / K_pw)


def pw_ode_oracle(m: OpticalModel, geom: CrystalGeometry, gamma0: float, q: float,
                  crystal_index: int = 1, steps: int | None = None) -> tuple[complex, complex]:
    """RK4 integration of the per-q 2x2 system; returns (beta_pw, eta_pw)."""
    dk = float(delta_k(m, q, -q))
    s, c = phase_params(geom, crystal_index)
    L1 = geom.length_L1
    if steps is None:
        steps = max(10_000, int(400 * (abs(dk) + 2 * gamma0) * L1))
    h = L1 / steps
    w = 1j * dk * s

    def rhs(z, x, y):
        ph = cmath.exp(w * z + 1j * dk * c)
        return gamma0 * ph * y, gamma0 * ph.conjugate() * x

    x, y = 0j, 1 + 0j
    for k in range(steps):
        z = k * h
        a1, b1 = rhs(z, x, y)
        a2, b2 = rhs(z + h / 2, x + h / 2 * a1, y + h / 2 * b1)
        a3, b3 = rhs(z + h / 2, x + h / 2 * a2, y + h / 2 * b2)
        a4, b4 = rhs(z + h, x + h * a3, y + h * b3)
        x += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        y += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
    return complex(x), complex(y.conjugate())


def export_rows(m: OpticalModel, spectra: PwSpectra):
    """(theta_s, N_density, C_density) columns."""
    return np.column_stack([external_angle(m, spectra.grid.q), spectra.intensity_density,
                            spectra.covariance_diagonal])
