"""Finite-width-pump transfer kernels by fixed-step RK4.

Discrete form.  With B̃ = β·dq, Ẽ = η̃·dq and Ẽc = conj(Ẽ) the kernel equations
become the linear matrix ODE

    dB̃/dL = K(L) Ẽc,   dẼc/dL = conj(K(L)) B̃,   K(L) = Γ dq (P ∘ H(L)),

with B̃(0) = 0 and Ẽc(0) = I.  P is the pump envelope and H the crystal phase
factor exp(iΔk(sL + c)) (times e^{iφ} only in the single-pass oracle).

K is symmetric and commutes with the mirror q -> -q, so by default the solve
runs on the even and odd parity blocks (half the size, a quarter of the work)
and transforms back once at the end.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .dispersion import CrystalGeometry, OpticalModel, delta_k, phase_params, pump_envelope
from .errors import ConfigError, DimensionError, DivergenceError
from .qgrid import Grid, Kernel, from_parity_blocks, parity_blocks, parity_blocks_from_rows

DEFAULT_STEPS = 256


@dataclass(frozen=True)
class SolverSettings:
    steps: int = DEFAULT_STEPS
    tolerance: float = 1e-6
    parity: bool = True

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 16:
            raise ConfigError(f"steps must be an integer >= 16, got {self.steps}")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")

    def to_dict(self) -> dict:
        return {"steps": int(self.steps), "tolerance": self.tolerance, "parity": self.parity}


@dataclass(frozen=True)
class TransferPair:
    grid: Grid
    B: Kernel
    E: Kernel
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.B.grid != self.grid or self.E.grid != self.grid:
            raise DimensionError("kernels and pair must share one grid")

    @cached_property
    def B_op(self) -> np.ndarray:
        return self.B.operator

    @cached_property
    def E_op(self) -> np.ndarray:
        return self.E.operator

    @classmethod
    def from_operators(cls, grid: Grid, B_op, E_op, meta=None) -> "TransferPair":
        return cls(grid, Kernel.from_operator(grid, B_op), Kernel.from_operator(grid, E_op), dict(meta or {}))

    @classmethod
    def vacuum(cls, grid: Grid) -> "TransferPair":
        n = grid.n_points
        return cls.from_operators(grid, np.zeros((n, n), complex), np.eye(n, dtype=complex),
                                  {"kind": "vacuum", "gamma": 0.0})


# --- drive matrices -------------------------------------------------------------

class _Drive:
    """K(L) = Γ dq P ∘ exp(iΔk(sL + c)) · e^{iφ}, on full rows or on the first m+1 rows."""

    def __init__(self, geom, m, gamma, grid, crystal_index, phase=0.0, half=True):
        if geom.plane_wave:
            raise ConfigError("the finite-width solver needs a Gaussian pump (pump_sigma set)")
        q = grid.q
        rows = q[: grid.center + 1] if half else q
        qs, qi = rows[:, None], q[None, :]
        self.dk = delta_k(m, qs, qi)
        self.amp = gamma * grid.dq * pump_envelope(geom, qs, qi) * np.exp(1j * phase)
        self.s, self.c = phase_params(geom, crystal_index)
        self.half = half

    def __call__(self, L):
        return self.amp * np.exp(1j * self.dk * (self.s * L + self.c))


def _rk4(state, drive_at, apply, L_total, steps, check_label):
    """Generic fixed-step RK4 for Y' = A(L) Y with A given blockwise by ``apply``."""
    h = L_total / steps
    K0 = drive_at(0.0)
    for k in range(steps):
        Kh = drive_at((k + 0.5) * h)
        K1 = drive_at((k + 1) * h)
        k1 = apply(K0, state)
        k2 = apply(Kh, [y + 0.5 * h * d for y, d in zip(state, k1)])
        k3 = apply(Kh, [y + 0.5 * h * d for y, d in zip(state, k2)])
        k4 = apply(K1, [y + h * d for y, d in zip(state, k3)])
        state = [y + (h / 6.0) * (a + 2 * b + 2 * c + d) for y, a, b, c, d in zip(state, k1, k2, k3, k4)]
        K0 = K1
        if not all(np.isfinite(y).all() for y in state):
            raise DivergenceError(f"non-finite kernel values at RK4 step {k + 1}/{steps} ({check_label})")
    return state


def _apply_full(K, state):
    Bt, Ec = state
    return [K @ Ec, np.conj(K) @ Bt]


def _apply_parity(Kblocks, state):
    (Ke, Ko) = Kblocks
    Be, Ce, Bo, Co = state
    return [Ke @ Ce, np.conj(Ke) @ Be, Ko @ Co, np.conj(Ko) @ Bo]


def _integrate(drive: _Drive, grid: Grid, B0, Ec0, L_total, steps, parity, label):
    if parity:
        be, bo = parity_blocks(B0, grid)
        ce, co = parity_blocks(Ec0, grid)
        state = _rk4([be, ce, bo, co], lambda L: parity_blocks_from_rows(drive(L)),
                     _apply_parity, L_total, steps, label)
        return (from_parity_blocks(state[0], state[2], grid), from_parity_blocks(state[1], state[3], grid))
    B, Ec = _rk4([B0, Ec0], drive, _apply_full, L_total, steps, label)
    return B, Ec


def solve_crystal(geom: CrystalGeometry, m: OpticalModel, gamma: float, grid: Grid,
                  settings: SolverSettings = SolverSettings(), crystal_index: int = 1) -> TransferPair:
    """Kernels at the exit face of crystal 1 or (phase-free) crystal 2."""
    if gamma < 0:
        raise ConfigError("gamma must be nonnegative")
    n = grid.n_points
    label = f"crystal {crystal_index}, {geom.configuration}, gamma={gamma:g}, n={n}, steps={settings.steps}"
    meta = {"kind": "crystal", "crystal_index": crystal_index, "configuration": geom.configuration,
            "gamma": float(gamma), "steps": int(settings.steps), "parity": settings.parity}
    if gamma == 0:
        vac = TransferPair.vacuum(grid)
        return TransferPair(grid, vac.B, vac.E, meta)
    drive = _Drive(geom, m, gamma, grid, crystal_index, half=settings.parity)
    B, Ec = _integrate(drive, grid, np.zeros((n, n), complex), np.eye(n, dtype=complex),
                       geom.length_L1, settings.steps, settings.parity, label)
    return TransferPair.from_operators(grid, B, np.conj(Ec), meta)


def solve_interferometer_single_pass(geom: CrystalGeometry, m: OpticalModel, gamma: float, grid: Grid,
                                     phi: float, settings: SolverSettings = SolverSettings()) -> TransferPair:
    """Both crystals in one continuous integration, e^{iφ} folded into the second drive.

    Independent of :func:`compose`; used as its oracle.
    """
    tp1 = solve_crystal(geom, m, gamma, grid, settings, 1)
    if gamma == 0:
        return tp1
    drive = _Drive(geom, m, gamma, grid, 2, phase=phi, half=settings.parity)
    B, Ec = _integrate(drive, grid, tp1.B_op, np.conj(tp1.E_op), geom.length_L1, settings.steps,
                       settings.parity, "single-pass second crystal")
    meta = {"kind": "single-pass", "configuration": geom.configuration, "gamma": float(gamma), "phi": float(phi)}
    return TransferPair.from_operators(grid, B, np.conj(Ec), meta)


# --- composition ----------------------------------------------------------------

@dataclass(frozen=True)
class CompositionParts:
    """Ẽ_SU = Ex + e^{iφ} Ey and B̃_SU = Bx + e^{iφ} By (operator form)."""
    grid: Grid
    Ex: np.ndarray
    Ey: np.ndarray
    Bx: np.ndarray
    By: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def at(self, phi: float) -> TransferPair:
        e = np.exp(1j * phi)
        meta = dict(self.meta, kind="composed", phi=float(phi))
        return TransferPair.from_operators(self.grid, self.Bx + e * self.By, self.Ex + e * self.Ey, meta)

    def beta_at(self, phi: float) -> np.ndarray:
        return self.Bx + np.exp(1j * phi) * self.By


def composition_parts(tp1: TransferPair, tp2: TransferPair) -> CompositionParts:
    if tp1.grid != tp2.grid:
        raise DimensionError("cannot compose transfer pairs on different grids")
    E1, B1, E2, B2 = tp1.E_op, tp1.B_op, tp2.E_op, tp2.B_op
    meta = {"gamma": tp1.meta.get("gamma"), "configuration": tp2.meta.get("configuration")}
    return CompositionParts(tp1.grid, E2 @ E1, B2 @ np.conj(B1), E2 @ B1, B2 @ np.conj(E1), meta)


def compose(tp1: TransferPair, tp2: TransferPair, phi: float) -> TransferPair:
    return composition_parts(tp1, tp2).at(phi)


def compensated_second_from_first(tp1: TransferPair, phi: float = 0.0) -> TransferPair:
    """Second crystal of the compensated scheme: η̃₂ = η̃₁ᴴ, β₂ = e^{iφ} β₁ᵀ (kernel arguments swapped)."""
    meta = dict(tp1.meta, kind="compensated-shortcut", crystal_index=2, phi=float(phi))
    return TransferPair(tp1.grid, Kernel(tp1.grid, np.exp(1j * phi) * tp1.B.values.T),
                        Kernel(tp1.grid, tp1.E.values.conj().T), meta)


# --- diagnostics ----------------------------------------------------------------

def _rel(x, ref):
    nx = np.linalg.norm(x)
    nr = ref if np.isscalar(ref) else np.linalg.norm(ref)
    if nr == 0:
        return 0.0 if nx == 0 else float("inf")
    return float(nx / nr)


def identity_residuals(tp: TransferPair) -> dict:
    """Residuals of the commutator-derived kernel identities, relative to ‖ẼẼᴴ‖.

    One scale for all four: at a dark fringe B̃ is pure cancellation error, so
    normalising the symmetry residuals by ‖B̃‖ would measure noise against noise.
    """
    E, B = tp.E_op, tp.B_op
    I = np.eye(tp.grid.n_points)
    EEh = E @ E.conj().T
    EhE = E.conj().T @ E
    X = E @ B.T
    Y = E.conj().T @ B
    scale = np.linalg.norm(EEh)
    return {
        "EEh_minus_BBh": _rel(EEh - B @ B.conj().T - I, scale),
        "EBt_symmetric": _rel(X - X.T, scale),
        "EhE_minus_BtBc": _rel(EhE - B.T @ B.conj() - I, scale),
        "EhB_symmetric": _rel(Y - Y.T, scale),
    }


def max_relative_difference(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.max(np.abs(b))
    d = np.max(np.abs(a - b))
    return 0.0 if d == 0 else float(d / scale)


def convergence_report(geom: CrystalGeometry, m: OpticalModel, gamma: float, grid: Grid,
                       steps: int, crystal_index: int = 1, parity: bool = True) -> dict:
    """Kernel change between ``steps`` and ``2*steps`` RK4 steps."""
    if steps < 32:
        raise ConfigError("convergence_report needs steps >= 32")
    a = solve_crystal(geom, m, gamma, grid, SolverSettings(steps, parity=parity), crystal_index)
    b = solve_crystal(geom, m, gamma, grid, SolverSettings(2 * steps, parity=parity), crystal_index)
    dB = max_relative_difference(a.B_op, b.B_op) if gamma else 0.0
    dE = max_relative_difference(a.E_op, b.E_op)
    return {"steps": int(steps), "B": dB, "E": dE, "max": max(dB, dE)}


# --- collinear readout (adjoint) ------------------------------------------------

def collinear_intensity(geom: CrystalGeometry, m: OpticalModel, gammas, grid: Grid,
                        steps: int = DEFAULT_STEPS) -> np.ndarray:
    """N(q=0)·dq after crystal 1 for each Γ in ``gammas``.

    Only row q = 0 of B̃ is needed.  The row obeys the adjoint system
    z_b' = -conj(K) z_e, z_e' = -K z_b integrated from L1 back to 0 with
    z(L1) = (e_0, 0); then B̃[0, :] = z_e(0)ᵀ.  e_0 is mirror-even, so only the
    even block of K enters and every Γ shares one drive (columns scale by Γ).
    """
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    if np.any(gammas < 0):
        raise ConfigError("gamma must be nonnegative")
    if geom.plane_wave:
        raise ConfigError("collinear_intensity handles finite-width pumps; use planewave for plane waves")
    drive = _Drive(geom, m, 1.0, grid, 1, half=True)
    mp1 = grid.center + 1
    zb = np.zeros((mp1, gammas.size), complex)
    zb[-1, :] = 1.0   # q = 0 is the last even basis vector
    ze = np.zeros_like(zb)
    L1 = geom.length_L1
    h = L1 / steps

    def Keven(L):
        return parity_blocks_from_rows(drive(L))[0]

    def f(K, zb, ze):
        return -(np.conj(K) @ ze) * gammas, -(K @ zb) * gammas

    K0 = Keven(L1)
    for k in range(steps):
        Lk = L1 - k * h
        Kh, K1 = Keven(Lk - 0.5 * h), Keven(Lk - h)
        a1, b1 = f(K0, zb, ze)
        a2, b2 = f(Kh, zb - 0.5 * h * a1, ze - 0.5 * h * b1)
        a3, b3 = f(Kh, zb - 0.5 * h * a2, ze - 0.5 * h * b2)
        a4, b4 = f(K1, zb - h * a3, ze - h * b3)
        zb = zb - (h / 6) * (a1 + 2 * a2 + 2 * a3 + a4)
        ze = ze - (h / 6) * (b1 + 2 * b2 + 2 * b3 + b4)
        K0 = K1
    if not np.isfinite(ze).all():
        raise DivergenceError("non-finite values in the collinear adjoint solve")
    return np.sum(np.abs(ze) ** 2, axis=0)


# --- persistence ----------------------------------------------------------------

def save_pair(tp: TransferPair, path) -> Path:
    path = Path(path)
    np.savez(path, q_max=tp.grid.q_max, n_points=tp.grid.n_points, B=tp.B.values, E=tp.E.values,
             meta=json.dumps(tp.meta, sort_keys=True))
    return path if path.suffix == ".npz" else path.with_suffix(path.suffix + ".npz")


def load_pair(path) -> TransferPair:
    with np.load(Path(path)) as d:
        grid = Grid(float(d["q_max"]), int(d["n_points"]))
        return TransferPair(grid, Kernel(grid, d["B"]), Kernel(grid, d["E"]), json.loads(str(d["meta"])))


def pair_digest(tp: TransferPair) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(tp.B.values).tobytes())
    h.update(np.ascontiguousarray(tp.E.values).tobytes())
    return h.hexdigest()
