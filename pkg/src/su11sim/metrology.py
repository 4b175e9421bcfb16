"""Intensities, covariances and phase sensitivity.

Conventions (operator form B̃ = β·dq):
    N(q)        = Σ_j |B̃_qj|² / dq
    Cov(q, q')  = |B̃B̃ᴴ|²_{qq'} / dq² + δ_{qq'} N(q)/dq   [+ |B̃Ẽᵀ|²/dq² if degenerate]
    ∬Cov        = ‖B̃B̃ᴴ‖²_F + ‖B̃‖²_F                    [+ ‖B̃Ẽᵀ‖²_F]

In the degenerate (indistinguishable-photon) case the counted intensity is the
signal plus idler total, 2N; both the phase derivative and the SNL reference
use it, so f is unchanged while Δφ drops by √2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import InsufficientSamplingError, UndefinedError
from .gsolver import CompositionParts, TransferPair
from .planewave import delta_phi_closed
from .qgrid import Grid
from .schmidt import SchmidtData, decompose, schmidt_number

TWO_PI = 2.0 * np.pi
DARK_RTOL = 1e-12


@dataclass(frozen=True)
class Spectra:
    grid: Grid
    N: np.ndarray
    cov: np.ndarray
    degenerate: bool = False


def intensity(tp: TransferPair) -> np.ndarray:
    return np.sum(np.abs(tp.B_op) ** 2, axis=1) / tp.grid.dq


def total_photons(tp: TransferPair) -> float:
    return float(np.sum(np.abs(tp.B_op) ** 2))


def covariance(tp: TransferPair, degenerate: bool = False) -> np.ndarray:
    dq = tp.grid.dq
    B = tp.B_op
    cov = np.abs(B @ B.conj().T) ** 2 / dq**2
    cov[np.diag_indices_from(cov)] += intensity(tp) / dq
    if degenerate:
        cov += np.abs(B @ tp.E_op.T) ** 2 / dq**2
    return cov


def spectra(tp: TransferPair, degenerate: bool = False) -> Spectra:
    n = intensity(tp)
    return Spectra(tp.grid, 2 * n if degenerate else n, covariance(tp, degenerate), degenerate)


def _fro2(x) -> float:
    return float(np.vdot(x, x).real)


def covariance_terms(tp: TransferPair) -> dict:
    """Integrated covariance pieces: ellipse ‖B̃B̃ᴴ‖², shot ‖B̃‖², cross ‖B̃Ẽᵀ‖²."""
    B = tp.B_op
    return {"ellipse": _fro2(B @ B.conj().T), "shot": _fro2(B), "cross": _fro2(B @ tp.E_op.T)}


def integral_covariance(tp: TransferPair, degenerate: bool = False) -> float:
    t = covariance_terms(tp) if degenerate else None
    if t is None:
        B = tp.B_op
        return _fro2(B @ B.conj().T) + _fro2(B)
    return t["ellipse"] + t["shot"] + t["cross"]


# --- phase sweeps ---------------------------------------------------------------

def phase_sweep(parts: CompositionParts, phis, degenerate: bool = False):
    """(N_tot(φ), ∬Cov(φ)) of the composed interferometer at each φ."""
    phis = np.asarray(phis, dtype=float)
    n_tot = np.empty(phis.size)
    cov = np.empty(phis.size)
    for k, phi in enumerate(phis):
        e = np.exp(1j * phi)
        B = parts.Bx + e * parts.By
        shot = _fro2(B)
        c = _fro2(B @ B.conj().T) + shot
        if degenerate:
            E = parts.Ex + e * parts.Ey
            c += _fro2(B @ E.T)
            shot *= 2
        n_tot[k] = shot
        cov[k] = c
    return n_tot, cov


def _trig_design(phi, order):
    cols = [np.ones_like(phi)]
    for k in range(1, order + 1):
        cols += [np.cos(k * phi), np.sin(k * phi)]
    return np.column_stack(cols)


def _distinct_phases(phi) -> int:
    w = np.round(np.mod(phi, TWO_PI), 12)
    w[np.isclose(w, TWO_PI)] = 0.0
    return np.unique(w).size


@dataclass(frozen=True)
class TrigFit:
    """p(φ) = c0 + Σ_k [a_k cos kφ + b_k sin kφ]."""
    coef: np.ndarray

    @property
    def order(self) -> int:
        return (self.coef.size - 1) // 2

    def __call__(self, phi, deriv: int = 0):
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi) + (self.coef[0] if deriv == 0 else 0.0)
        for k in range(1, self.order + 1):
            a, b = self.coef[2 * k - 1], self.coef[2 * k]
            # d^n/dφ^n of cos, sin cycle with period 4
            c, s = np.cos(k * phi), np.sin(k * phi)
            seq = [(a * c + b * s), (-a * s + b * c), (-a * c - b * s), (a * s - b * c)]
            out = out + k**deriv * seq[deriv % 4]
        return out

    @classmethod
    def fit(cls, phi, y, order: int) -> "TrigFit":
        need = 2 * order + 1
        if _distinct_phases(np.asarray(phi, dtype=float)) < need:
            raise InsufficientSamplingError(f"need >= {need} distinct phases for an order-{order} fit")
        coef, *_ = np.linalg.lstsq(_trig_design(np.asarray(phi, dtype=float), order), np.asarray(y), rcond=None)
        return cls(coef)


@dataclass(frozen=True)
class WidthResult:
    delta: float
    phi_minus: float | None
    phi_plus: float | None
    bracketed: bool = True


@dataclass(frozen=True)
class DarkFringeModel:
    """f(φ) near an exact dark fringe φ_d, free of cancellation.

    With t = φ - φ_d the intensity is R(1 - cos t) and ∬Cov is fitted in the
    subspace of degree-2 trigonometric polynomials with a double zero at t = 0,
    spanned by 2sin²(t/2), sin⁴(t/2) and sin t·sin²(t/2).  Only the first has a
    t² term, so the dark-fringe limit is one coefficient rather than a difference
    of large ones.  Dividing by t² analytically leaves a smooth f(t).
    """
    phi_dark: float
    R: float
    coef: np.ndarray
    n1: float

    @staticmethod
    def basis(t):
        t = np.asarray(t, dtype=float)
        h2 = np.sin(t / 2) ** 2
        return np.column_stack([2 * h2, h2**2, np.sin(t) * h2])

    @classmethod
    def fit(cls, phi, cov, phi_dark: float, R: float, n1: float) -> "DarkFringeModel":
        t = np.asarray(phi, dtype=float) - phi_dark
        y = np.asarray(cov, dtype=float)
        # relative residuals: absolute rounding at the bright fringe would swamp c1
        w = 1.0 / np.maximum(np.abs(y), 1e-12 * np.abs(y).max())
        X = cls.basis(t) * w[:, None]
        norm = np.linalg.norm(X, axis=0)
        coef, *_ = np.linalg.lstsq(X / norm, y * w, rcond=None)
        return cls(float(phi_dark), float(R), coef / norm, float(n1))

    def cov(self, phi):
        t = np.atleast_1d(np.asarray(phi, dtype=float) - self.phi_dark)
        return self.basis(t) @ self.coef

    def __call__(self, phi):
        t = np.asarray(phi, dtype=float) - self.phi_dark
        s_half = np.sinc(t / (2 * np.pi))      # sin(t/2)/(t/2)
        s_one = np.sinc(t / np.pi)             # sin(t)/t
        c1, c2, c3 = self.coef
        cov_t2 = s_half**2 / 4 * (2 * c1 + c2 * np.sin(t / 2) ** 2 + c3 * t * s_one)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.sqrt(np.maximum(cov_t2, 0.0) * self.n1) / (self.R * np.abs(s_one))
        return np.where(s_one == 0, np.inf, f)


@dataclass(frozen=True)
class SensitivityReport:
    phi_samples: np.ndarray
    N_tot: np.ndarray
    delta_phi: np.ndarray
    f: np.ndarray
    f_min: float
    phi_opt: float
    Delta: float
    snl: float
    heisenberg: float
    f_H: float
    n1_total: float
    n_fit: TrigFit
    cov_fit: TrigFit
    dark_fringe: bool
    width: WidthResult
    A: float | None = None
    B: float | None = None
    dark_model: DarkFringeModel | None = None
    extra: dict = field(default_factory=dict)

    def f_of(self, phi):
        if self.dark_model is not None:
            return self.dark_model(phi)
        return _f_model(self.n_fit, self.cov_fit, self.n1_total, phi)

    def summary(self) -> dict:
        return {"f_min": self.f_min, "phi_opt": self.phi_opt, "Delta": self.Delta, "f_H": self.f_H,
                "SNL": self.snl, "heisenberg": self.heisenberg, "N1_tot": self.n1_total,
                "dark_fringe": self.dark_fringe, "Delta_bracketed": self.width.bracketed}


def _f_model(n_fit: TrigFit, cov_fit: TrigFit, n1: float, phi):
    phi = np.asarray(phi, dtype=float)
    d = np.abs(n_fit(phi, 1))
    c = np.maximum(cov_fit(phi), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        dphi = np.sqrt(c) / d
    dphi = np.where(d == 0, np.inf, dphi)
    return dphi * np.sqrt(n1)


def sensitivity_from_sweep(phis, n_tot, cov_tot, n1_total: float, A: float | None = None,
                           B: float | None = None, n_dense: int = 4096) -> SensitivityReport:
    """Error-propagation sensitivity Δφ = √∬Cov / |dN_tot/dφ| from sampled sweeps.

    N_tot(φ) is fitted exactly as a + b cos φ + c sin φ and ∬Cov as a degree-2
    trigonometric polynomial, so dN_tot/dφ is analytic.  When N_tot vanishes at
    its minimum (to DARK_RTOL) the fringe is dark and f is evaluated with
    :class:`DarkFringeModel`, which stays accurate through the minimum where
    numerator and denominator both vanish.
    """
    phis = np.asarray(phis, dtype=float)
    if n1_total <= 0:
        raise UndefinedError("SNL undefined for zero first-crystal intensity")
    n_fit = TrigFit.fit(phis, n_tot, 1)
    cov_fit = TrigFit.fit(phis, cov_tot, 2)

    a, b, c = n_fit.coef
    R = float(np.hypot(b, c))
    # f diverges where dN_tot/dφ = 0: at the bright fringe and, unless it is dark, at the
    # intensity minimum.  Work on the open interval between consecutive bright fringes.
    phi_bright = float(np.mod(np.arctan2(c, b), TWO_PI))
    lo, hi = phi_bright, phi_bright + TWO_PI
    pd = phi_bright + np.pi
    dark = R > 0 and (a - R) <= DARK_RTOL * (a + R)
    dark_model = DarkFringeModel.fit(phis, cov_tot, pd, R, n1_total) if dark else None

    def f_vec(p):
        if dark_model is not None:
            return dark_model(p)
        return _f_model(n_fit, cov_fit, n1_total, p)

    def f_scalar(p):
        return float(f_vec(p))

    f_samples = f_vec(phis)
    grid = np.linspace(lo, hi, n_dense + 1)[1:-1]
    fv = f_vec(grid)
    i = int(np.nanargmin(fv))
    res = minimize_scalar(f_scalar, bounds=(grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]),
                          method="bounded", options={"xatol": 1e-12})
    phi_opt, f_min = (float(res.x), float(res.fun)) if res.fun <= fv[i] else (float(grid[i]), float(fv[i]))
    if dark:
        f_dark = f_scalar(pd)
        if f_dark <= f_min:
            phi_opt, f_min = pd, f_dark
        bounds = (lo, hi)
    else:
        bounds = (lo, pd) if phi_opt < pd else (pd, hi)

    width = supersensitivity_width(f_scalar, phi_opt, f_min, bounds=bounds)
    lim = limits(n1_total)
    return SensitivityReport(phis, np.asarray(n_tot, dtype=float), f_samples / np.sqrt(n1_total), f_samples,
                             f_min, float(np.mod(phi_opt, TWO_PI)), width.delta, lim["snl"], lim["heisenberg"],
                             lim["f_H"], float(n1_total), n_fit, cov_fit, bool(dark), width, A, B, dark_model)


def sweep_report(parts: CompositionParts, n1_total: float, phis=None, degenerate: bool = False,
                 **kw) -> SensitivityReport:
    if phis is None:
        phis = default_phases()
    n_tot, cov = phase_sweep(parts, phis, degenerate)
    return sensitivity_from_sweep(phis, n_tot, cov, 2 * n1_total if degenerate else n1_total, **kw)


def default_phases(n: int = 16) -> np.ndarray:
    """n phases offset from the fringe points 0 and π."""
    return (np.arange(n) + 0.5) * TWO_PI / n + 0.0123


# --- supersensitivity width -----------------------------------------------------

def supersensitivity_width(f, phi_opt: float = np.pi, f_opt: float | None = None,
                           bounds: tuple[float, float] = (0.0, TWO_PI), xtol: float = 1e-10) -> WidthResult:
    """Length of the φ-interval around ``phi_opt`` on which f < 1."""
    fo = f(phi_opt) if f_opt is None else f_opt
    if not fo < 1.0:
        return WidthResult(0.0, None, None, True)
    lo, hi = bounds
    eps = 1e-9 * (hi - lo)

    def g(p):
        return f(p) - 1.0

    left_end, right_end = lo + eps, hi - eps
    if g(left_end) < 0 or g(right_end) < 0:
        return WidthResult(TWO_PI, None, None, False)
    phi_m = brentq(g, left_end, phi_opt, xtol=xtol, rtol=4 * np.finfo(float).eps)
    phi_p = brentq(g, phi_opt, right_end, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return WidthResult(float(phi_p - phi_m), float(phi_m), float(phi_p), True)


def width_closed_form_pw(A: float, B: float, n1_total: float) -> float:
    """Analytic width for the compensated closed form: f(φ) = 1 solved for cos²(φ/2)."""
    c2 = (4 * A**2 - A * n1_total) / (4 * B * n1_total + 4 * A**2)
    if c2 <= 0:
        return 0.0
    phi_minus = 2.0 * np.arccos(np.sqrt(c2))
    return float(2.0 * (np.pi - phi_minus))


# --- compensated closed form ----------------------------------------------------

@dataclass(frozen=True)
class CompensatedClosedForm:
    xi: np.ndarray          # ξ(q, q') kernel
    A: float                # ΣΛ(1+Λ)
    B: float                # Σ[Λ(1+Λ)]²
    A_kernel: float         # ∬|ξ|²
    n1_total: float
    K: float
    f_min: float            # 1/(2√(1 + N1/K))
    f_min_A: float          # ½√(N1/A)
    schmidt: SchmidtData

    def delta_phi(self, phi):
        return delta_phi_closed(phi, self.A, self.B)

    def f(self, phi):
        return self.delta_phi(phi) * np.sqrt(self.n1_total)

    def width(self) -> float:
        return width_closed_form_pw(self.A, self.B, self.n1_total)


def compensated_closed_form(tp1: TransferPair, schmidt_data: SchmidtData | None = None) -> CompensatedClosedForm:
    sd = decompose(tp1) if schmidt_data is None else schmidt_data
    if sd.n_modes == 0:
        raise UndefinedError("empty decomposition: compensated closed form undefined")
    lam = sd.eigenvalues
    A = float(np.sum(lam * (1 + lam)))
    B = float(np.sum((lam * (1 + lam)) ** 2))
    dq = tp1.grid.dq
    xi_op = tp1.B_op.T @ np.conj(tp1.E_op)          # ∫ β(q̄, q) η̃*(q̄, q') dq̄
    n1 = float(np.sum(lam))
    K = schmidt_number(sd)
    return CompensatedClosedForm(xi_op / dq, A, B, _fro2(xi_op), n1, K,
                                 float(0.5 / np.sqrt(1.0 + n1 / K)), float(0.5 * np.sqrt(n1 / A)), sd)


# --- references -----------------------------------------------------------------

def limits(n1_total: float, L_x: float | None = None) -> dict:
    """SNL and Heisenberg references; with ``L_x`` the first argument is a density."""
    n = n1_total * (1.0 if L_x is None else L_x)
    if not n > 0:
        raise UndefinedError("references undefined for zero intensity")
    return {"snl": float(1 / np.sqrt(n)), "heisenberg": float(1 / (2 * n)), "f_H": float(0.5 / np.sqrt(n)),
            "N1_tot": float(n)}


def match_lx(n_tot_finite: float, density_tot_pw: float) -> float:
    if not density_tot_pw > 0:
        raise UndefinedError("L_x undefined for zero plane-wave intensity")
    if not n_tot_finite > 0:
        raise UndefinedError("L_x undefined for zero finite-width intensity")
    return float(n_tot_finite / density_tot_pw)


def report_table(report: SensitivityReport) -> np.ndarray:
    """Rows (phi, N_tot, delta_phi, f)."""
    return np.column_stack([report.phi_samples, report.N_tot, report.delta_phi, report.f])
