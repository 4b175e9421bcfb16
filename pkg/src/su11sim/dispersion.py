"""Wavevectors, phase mismatch, crystal phase factors and the pump envelope."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DomainError
from .qgrid import Grid

MODES = ("custom-k", "perfect-collinear", "sellmeier-bbo")
CONFIGURATIONS = ("single", "noncompensated", "compensated")

DEFAULT_LAMBDA_PUMP = 354.6e-9
DEFAULT_L1 = 2e-3
DEFAULT_FWHM = 50e-6


# --- BBO Sellmeier model (wavelength in micrometres) ----------------------------

def bbo_n_o(lambda_um):
    l2 = np.asarray(lambda_um, dtype=float) ** 2
    return np.sqrt(2.7359 + 0.01878 / (l2 - 0.01822) - 0.01354 * l2)


def bbo_n_e(lambda_um):
    l2 = np.asarray(lambda_um, dtype=float) ** 2
    return np.sqrt(2.3753 + 0.01224 / (l2 - 0.01667) - 0.01516 * l2)


def bbo_n_e_theta(lambda_um, theta):
    """Extraordinary index at angle ``theta`` to the optic axis."""
    no, ne = bbo_n_o(lambda_um), bbo_n_e(lambda_um)
    return 1.0 / np.sqrt(np.cos(theta) ** 2 / no**2 + np.sin(theta) ** 2 / ne**2)


def bbo_type1_angle(lambda_pump_um: float) -> float:
    """Cut angle for collinear degenerate type-I (ooe) phase matching."""
    no_s = bbo_n_o(2.0 * lambda_pump_um)
    no_p = bbo_n_o(lambda_pump_um)
    ne_p = bbo_n_e(lambda_pump_um)
    s2 = (1.0 / no_s**2 - 1.0 / no_p**2) / (1.0 / ne_p**2 - 1.0 / no_p**2)
    if not 0.0 <= s2 <= 1.0:
        raise DomainError(f"no type-I phase matching at pump wavelength {lambda_pump_um} um")
    return float(np.arcsin(np.sqrt(s2)))


# --- optical model --------------------------------------------------------------

@dataclass(frozen=True)
class OpticalModel:
    lambda_pump: float
    k_p: float
    k_s: float
    k_i: float
    k_s_vac: float
    mode: str = "custom-k"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown dispersion mode {self.mode!r}; expected one of {MODES}")
        for name in ("lambda_pump", "k_p", "k_s", "k_i", "k_s_vac"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.k_s != self.k_i:
            raise ConfigError("signal and idler wavevectors must coincide (degenerate type-I)")

    @property
    def lambda_signal(self) -> float:
        return 2.0 * self.lambda_pump

    @property
    def collinear_mismatch(self) -> float:
        return self.k_p - self.k_s - self.k_i

    @classmethod
    def custom_k(cls, k_p: float, k_s: float, lambda_pump: float = DEFAULT_LAMBDA_PUMP):
        return cls(lambda_pump, k_p, k_s, k_s, 2 * np.pi / (2 * lambda_pump), "custom-k")

    @classmethod
    def perfect_collinear(cls, k_s: float | None = None, lambda_pump: float = DEFAULT_LAMBDA_PUMP):
        """k_p = 2 k_s exactly; k_s defaults to the BBO ordinary index at the signal."""
        if k_s is None:
            lam_s = 2 * lambda_pump
            k_s = float(2 * np.pi * bbo_n_o(lam_s * 1e6) / lam_s)
        return cls(lambda_pump, 2.0 * k_s, k_s, k_s, 2 * np.pi / (2 * lambda_pump), "perfect-collinear")

    @classmethod
    def sellmeier_bbo(cls, lambda_pump: float = DEFAULT_LAMBDA_PUMP, theta: float | None = None,
                      n_signal: float | None = None, n_pump: float | None = None):
        """BBO with ordinary signal/idler and extraordinary pump.

        ``theta`` defaults to the type-I collinear phase-matching angle.  ``n_signal``
        and ``n_pump`` override the computed indices.
        """
        lam_p_um = lambda_pump * 1e6
        lam_s = 2 * lambda_pump
        if theta is None:
            theta = bbo_type1_angle(lam_p_um)
        ns = float(bbo_n_o(2 * lam_p_um)) if n_signal is None else float(n_signal)
        npump = float(bbo_n_e_theta(lam_p_um, theta)) if n_pump is None else float(n_pump)
        k_s = 2 * np.pi * ns / lam_s
        k_p = 2 * np.pi * npump / lambda_pump
        return cls(lambda_pump, k_p, k_s, k_s, 2 * np.pi / lam_s, "sellmeier-bbo")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "lambda_pump": self.lambda_pump, "k_p": self.k_p,
                "k_s": self.k_s, "k_i": self.k_i, "k_s_vac": self.k_s_vac}

    @classmethod
    def from_config(cls, d: dict) -> "OpticalModel":
        """Build from a config section; ``mode`` selects the constructor."""
        d = dict(d)
        mode = d.pop("mode", "sellmeier-bbo")
        lam = float(d.pop("lambda_pump", DEFAULT_LAMBDA_PUMP))
        try:
            if mode == "sellmeier-bbo":
                return cls.sellmeier_bbo(lam, **d)
            if mode == "perfect-collinear":
                return cls.perfect_collinear(d.pop("k_s", None), lam)
            if mode == "custom-k":
                return cls.custom_k(float(d["k_p"]), float(d["k_s"]), lam)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"optical model section invalid: {exc}") from None
        raise ConfigError(f"unknown dispersion mode {mode!r}")


def _sqrt_deficit(k: float, q):
    # sqrt(k^2 - q^2) - k without cancellation
    q2 = q * q
    return -q2 / (np.sqrt(k * k - q2) + k)


def delta_k(m: OpticalModel, q_s, q_i):
    """Longitudinal mismatch k_pz - k_sz - k_iz (broadcasts over arrays)."""
    q_s = np.asarray(q_s, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    qp = q_s + q_i
    if np.any(np.abs(qp) >= m.k_p) or np.any(np.abs(q_s) >= m.k_s) or np.any(np.abs(q_i) >= m.k_i):
        raise DomainError("transverse wavevector outside the propagating region")
    return (_sqrt_deficit(m.k_p, qp) - _sqrt_deficit(m.k_s, q_s) - _sqrt_deficit(m.k_i, q_i)
            + m.collinear_mismatch)


def external_angle(m: OpticalModel, q):
    return np.asarray(q) / m.k_s_vac


# --- geometry -------------------------------------------------------------------

@dataclass(frozen=True)
class CrystalGeometry:
    """One crystal of length L1 (both crystals are identical; spacing d = 0).

    ``pump_sigma`` is the Gaussian pump parameter; ``None`` selects a plane-wave pump.
    """
    length_L1: float = DEFAULT_L1
    configuration: str = "single"
    pump_sigma: float | None = None

    def __post_init__(self):
        if not self.length_L1 > 0:
            raise ConfigError("crystal length must be positive")
        if self.configuration not in CONFIGURATIONS:
            raise ConfigError(f"unknown configuration {self.configuration!r}; expected one of {CONFIGURATIONS}")
        if self.pump_sigma is not None and not self.pump_sigma > 0:
            raise ConfigError("pump_sigma must be positive (or None for a plane wave)")

    @property
    def plane_wave(self) -> bool:
        return self.pump_sigma is None

    @property
    def fwhm(self) -> float | None:
        return None if self.plane_wave else sigma_to_fwhm(self.pump_sigma)

    @classmethod
    def from_fwhm(cls, fwhm: float, length_L1: float = DEFAULT_L1, configuration: str = "single"):
        return cls(length_L1, configuration, fwhm_to_sigma(fwhm))

    def with_configuration(self, configuration: str) -> "CrystalGeometry":
        return replace(self, configuration=configuration)

    def to_dict(self) -> dict:
        return {"length_L1": self.length_L1, "configuration": self.configuration,
                "pump_sigma": self.pump_sigma}

    @classmethod
    def from_config(cls, d: dict) -> "CrystalGeometry":
        d = dict(d)
        L1 = float(d.get("length_L1", DEFAULT_L1))
        conf = d.get("configuration", "single")
        if "pump_fwhm" in d and d["pump_fwhm"] is not None:
            return cls.from_fwhm(float(d["pump_fwhm"]), L1, conf)
        sigma = d.get("pump_sigma")
        return cls(L1, conf, None if sigma is None else float(sigma))


def fwhm_to_sigma(fwhm: float) -> float:
    return fwhm / (2.0 * np.sqrt(np.log(2.0)))


def sigma_to_fwhm(sigma: float) -> float:
    return 2.0 * np.sqrt(np.log(2.0)) * sigma


def phase_params(geom: CrystalGeometry, crystal_index: int) -> tuple[float, float]:
    """(s, c) such that the phase factor is exp(i Δk (s L + c)), interferometer phase excluded."""
    if crystal_index == 1:
        return 1.0, 0.0
    if crystal_index != 2:
        raise ConfigError(f"crystal_index must be 1 or 2, got {crystal_index}")
    if geom.configuration == "noncompensated":
        return 1.0, geom.length_L1
    if geom.configuration == "compensated":
        return -1.0, geom.length_L1
    raise ConfigError("a single-crystal geometry has no second crystal")


def h_function(geom: CrystalGeometry, m: OpticalModel, crystal_index: int, q_s, q_i, L):
    if np.any(np.asarray(L) < 0) or np.any(np.asarray(L) > geom.length_L1 * (1 + 1e-12)):
        raise DomainError("L must lie inside the crystal")
    s, c = phase_params(geom, crystal_index)
    return np.exp(1j * delta_k(m, q_s, q_i) * (s * np.asarray(L) + c))


def pump_envelope(geom: CrystalGeometry, q_s, q_i, dq: float | None = None):
    """Gaussian pump weight, or the discrete delta δ_{q_s,-q_i}/dq for a plane wave."""
    qp = np.asarray(q_s, dtype=float) + np.asarray(q_i, dtype=float)
    if not geom.plane_wave:
        return np.exp(-(qp * geom.pump_sigma) ** 2 / 2.0)
    if dq is None:
        raise ConfigError("plane-wave envelope needs the grid spacing")
    return np.where(np.abs(qp) < 0.5 * dq, 1.0 / dq, 0.0)


def pump_matrix(geom: CrystalGeometry, grid: Grid) -> np.ndarray:
    q = grid.q
    return pump_envelope(geom, q[:, None], q[None, :], grid.dq)
