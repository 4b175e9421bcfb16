"""Gain calibration: windowed fits of the collinear intensity to B sinh²(AΓ).

The experimental gain is G = A_Γ Γ, where A_Γ comes from a fit over a small
window of Γ around the point of interest.  Windows are specified in G and mapped
to Γ with the current A estimate, then refitted until A settles.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, least_squares

from .dispersion import CrystalGeometry, OpticalModel, delta_k
from .errors import ConfigError, ExtrapolationError, FitError
from .gsolver import DEFAULT_STEPS, collinear_intensity
from .planewave import pw_coefficients
from .qgrid import Grid

DEFAULT_WIDTH = 0.25
DEFAULT_SAMPLES = 9
TABLE_GAINS = (0.01, 1.25, 2.5, 3.75, 5.0)
LOG_RANGE = 1e4


def collinear_curve(geom: CrystalGeometry, m: OpticalModel, grid: Grid, gamma_samples,
                    steps: int = DEFAULT_STEPS):
    """(Γ, collinear photon count) pairs after one crystal.

    Finite-width pumps give N(0)·dq; a plane-wave pump gives the density N(0).
    """
    g = np.asarray(gamma_samples, dtype=float)
    if grid.q[grid.center] != 0.0:
        raise ConfigError("grid must contain q = 0")
    if geom.plane_wave:
        dk0 = float(delta_k(m, 0.0, 0.0))
        y = np.array([abs(pw_coefficients(dk0, geom.length_L1, gi)[0]) ** 2 for gi in g])
        return g, y
    return g, collinear_intensity(geom, m, g, grid, steps)


@dataclass
class WindowFit:
    gamma_lo: float
    gamma_hi: float
    A: float
    B: float
    A_err: float
    B_err: float
    rms_rel: float
    gammas: list = field(default_factory=list)
    values: list = field(default_factory=list)
    G_lo: float | None = None
    G_hi: float | None = None

    @property
    def gamma_center(self) -> float:
        return 0.5 * (self.gamma_lo + self.gamma_hi)

    @property
    def G_center(self) -> float:
        return self.A * self.gamma_center


def _initial_A(g, y):
    # exact for the model: sinh(AΓ_hi)/sinh(AΓ_lo) = sqrt(y_hi/y_lo), monotone in A
    i, j = int(np.argmin(g)), int(np.argmax(g))
    ratio = np.sqrt(y[j] / y[i])
    r0 = g[j] / g[i]
    if not ratio > r0:
        raise FitError("collinear samples do not grow faster than linearly; cannot initialise A")

    def h(a):
        return np.log(np.sinh(a * g[j])) - np.log(np.sinh(a * g[i])) - np.log(ratio)

    a_hi = 1.0 / g[j]
    while h(a_hi) < 0:
        a_hi *= 2.0
        if a_hi * g[j] > 700:
            raise FitError("could not bracket the initial A")
    return brentq(h, 1e-12 * a_hi, a_hi, xtol=1e-14 * a_hi)


def fit_window(gammas, values, window: tuple[float, float] | None = None, max_nfev: int = 2000) -> WindowFit:
    """Levenberg-Marquardt fit of y = B sinh²(AΓ) to the samples inside ``window``."""
    g = np.asarray(gammas, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is not None:
        sel = (g >= window[0]) & (g <= window[1])
        g, y = g[sel], y[sel]
    if g.size < 5:
        raise FitError(f"need >= 5 samples in the window, got {g.size}")
    if np.any(y <= 0) or np.any(g <= 0):
        raise FitError("fit requires positive gains and intensities")
    A0 = _initial_A(g, y)
    B0 = float(np.median(y / np.sinh(A0 * g) ** 2))
    use_log = y.max() / y.min() > LOG_RANGE
    scale = y.max()

    def resid(p):
        model = p[1] * np.sinh(p[0] * g) ** 2
        if use_log:
            return np.log(model) - np.log(y)
        return (model - y) / scale

    res = least_squares(resid, [A0, B0], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    if not res.success:
        raise FitError(f"fit did not converge: {res.message}; residual norm {np.linalg.norm(res.fun):.3e}")
    A, B = (float(v) for v in res.x)
    if not (A > 0 and B > 0):
        raise FitError(f"fit produced non-positive parameters A={A}, B={B}")
    dof = max(g.size - 2, 1)
    s2 = float(res.fun @ res.fun) / dof
    J = res.jac
    try:
        cov = np.linalg.inv(J.T @ J) * s2
        errs = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        errs = np.array([np.inf, np.inf])
    model = B * np.sinh(A * g) ** 2
    rms = float(np.sqrt(np.mean((model / y - 1.0) ** 2)))
    return WindowFit(float(g.min()), float(g.max()), A, B, float(errs[0]), float(errs[1]), rms,
                     g.tolist(), y.tolist())


@dataclass
class CalibrationTable:
    windows: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.windows = sorted(self.windows, key=lambda w: w.gamma_center)

    @property
    def G_range(self) -> tuple[float, float]:
        lo = min(w.G_lo if w.G_lo is not None else w.A * w.gamma_lo for w in self.windows)
        hi = max(w.G_hi if w.G_hi is not None else w.A * w.gamma_hi for w in self.windows)
        return lo, hi

    def A_of_gamma(self, gamma):
        gc = np.array([w.gamma_center for w in self.windows])
        A = np.array([w.A for w in self.windows])
        return np.interp(gamma, gc, A)

    def nearest(self, G: float) -> WindowFit:
        return min(self.windows, key=lambda w: abs(w.G_center - G))

    def to_json(self) -> str:
        return json.dumps({"windows": [asdict(w) for w in self.windows], "meta": self.meta},
                          indent=2, sort_keys=True)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def from_json(cls, text: str) -> "CalibrationTable":
        d = json.loads(text)
        return cls([WindowFit(**w) for w in d["windows"]], d.get("meta", {}))

    @classmethod
    def load(cls, path) -> "CalibrationTable":
        return cls.from_json(Path(path).read_text())


def window_centers(G_max: float = 5.0, width: float = DEFAULT_WIDTH, extra=TABLE_GAINS) -> list:
    """Contiguous tiling of (0, G_max] plus windows centred on ``extra`` gains."""
    tiles = list((np.arange(int(round(G_max / width))) + 0.5) * width)
    return sorted(set(round(float(x), 12) for x in tiles + list(extra)))


def _G_window(Gc: float, width: float):
    half = min(width / 2, Gc / 2)
    return Gc - half, Gc + half


def _probe_A(geom, m, grid, steps) -> float:
    """Low-gain fit of A, starting from the plane-wave-limit estimate √(2π)L1/σ."""
    A0 = geom.length_L1 if geom.plane_wave else np.sqrt(2 * np.pi) * geom.length_L1 / geom.pump_sigma
    gam = np.linspace(0.05, 0.1, 5) / A0
    g, y = collinear_curve(geom, m, grid, gam, steps)
    return fit_window(g, y).A


def calibrate(geom: CrystalGeometry, m: OpticalModel, grid: Grid, centers=None,
              width: float = DEFAULT_WIDTH, samples: int = DEFAULT_SAMPLES, steps: int = DEFAULT_STEPS,
              A_guess: float | None = None, iterations: int = 4, rtol: float = 1e-9) -> CalibrationTable:
    """Fit A_Γ in G-windows; every window is sampled in one batched collinear solve per pass."""
    centers = window_centers() if centers is None else sorted(float(c) for c in centers)
    if samples < 5:
        raise ConfigError("need >= 5 samples per window")
    if A_guess is None:
        A_guess = _probe_A(geom, m, grid, steps)
    A_est = np.full(len(centers), float(A_guess))
    fits = None
    for _ in range(max(iterations, 1)):
        gwins = [_G_window(c, width) for c in centers]
        gam = np.concatenate([np.linspace(lo, hi, samples) / a for (lo, hi), a in zip(gwins, A_est)])
        _, y = collinear_curve(geom, m, grid, gam, steps)
        fits = []
        for k, (lo, hi) in enumerate(gwins):
            sl = slice(k * samples, (k + 1) * samples)
            fw = fit_window(gam[sl], y[sl])
            fw.G_lo, fw.G_hi = lo * fw.A / A_est[k], hi * fw.A / A_est[k]
            fits.append(fw)
        A_new = np.array([f.A for f in fits])
        done = np.all(np.abs(A_new / A_est - 1) < rtol)
        A_est = A_new
        if done:
            break
    meta = {"width": width, "samples": samples, "steps": steps, "grid": grid.to_dict(),
            "plane_wave": geom.plane_wave, "length_L1": geom.length_L1, "pump_sigma": geom.pump_sigma,
            "model": m.mode}
    return CalibrationTable(fits, meta)


def gamma_for_G(table: CalibrationTable, G_target: float, rtol: float = 1e-12) -> float:
    """Γ with A_Γ(Γ)·Γ = G_target, A_Γ interpolated linearly between window centres."""
    lo, hi = table.G_range
    if not lo <= G_target <= hi:
        raise ExtrapolationError(f"G={G_target} outside calibrated range [{lo:.6g}, {hi:.6g}]")
    if G_target == 0:
        return 0.0
    gmax = max(w.gamma_hi for w in table.windows) * 4

    def f(gm):
        return table.A_of_gamma(gm) * gm - G_target

    return float(brentq(f, 0.0, gmax, xtol=1e-300, rtol=rtol))
