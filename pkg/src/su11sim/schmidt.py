"""Joint Schmidt (Bloch-Messiah) decomposition of transfer kernels.

The SVD of the operator B̃ = U S Wᴴ gives Λ_n = s_n² and the continuum-normalized
modes u_n = U[:, n]/√dq (output) and ψ_n = conj(W[:, n])/√dq (input), so that
β(q, q') = Σ √Λ_n u_n(q) ψ_n(q').
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedError
from .gsolver import TransferPair
from .qgrid import Grid

DEFAULT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class SchmidtData:
    grid: Grid
    eigenvalues: np.ndarray     # Λ_n, descending
    output_modes: np.ndarray   # u_n as columns, shape (n_points, n_modes)
    input_modes: np.ndarray    # ψ_n as columns

    @property
    def n_modes(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def weights(self) -> np.ndarray:
        """λ_n = Λ_n / ΣΛ."""
        total = self.eigenvalues.sum()
        if total == 0:
            raise UndefinedError("no nonzero Schmidt eigenvalues")
        return self.eigenvalues / total

    @property
    def total(self) -> float:
        return float(self.eigenvalues.sum())

    def table(self) -> np.ndarray:
        """Rows (n, Λ_n, λ_n)."""
        w = self.weights if self.n_modes else np.zeros(0)
        return np.column_stack([np.arange(self.n_modes), self.eigenvalues, w])


def _fix_phase(U, W):
    # make the largest-magnitude sample of each u_n real positive; W takes the same rotation
    idx = np.argmax(np.abs(U), axis=0)
    ph = U[idx, np.arange(U.shape[1])]
    ph = ph / np.abs(ph)
    return U / ph, W / ph


def decompose(tp: TransferPair, threshold: float = DEFAULT_THRESHOLD) -> SchmidtData:
    g = tp.grid
    U, s, Wh = np.linalg.svd(tp.B_op)
    lam = s**2
    if lam.size == 0 or lam[0] == 0:
        empty = np.zeros((g.n_points, 0), complex)
        return SchmidtData(g, np.zeros(0), empty, empty)
    keep = lam >= threshold * lam[0]
    U, W = _fix_phase(U[:, keep], Wh.conj().T[:, keep])
    # B̃ = U S Wᴴ = Σ s_n U_n (conj W_n)ᵀ, so ψ_n = conj(W_n)
    root = np.sqrt(g.dq)
    return SchmidtData(g, lam[keep], U / root, W.conj() / root)


def reconstruct(sd: SchmidtData) -> np.ndarray:
    """β(q, q') from the retained modes."""
    return (sd.output_modes * np.sqrt(sd.eigenvalues)) @ sd.input_modes.T


def schmidt_number(sd: SchmidtData) -> float:
    if sd.n_modes == 0 or sd.total == 0:
        raise UndefinedError("Schmidt number undefined for an empty decomposition")
    w = sd.weights
    return float(1.0 / np.sum(w**2))


@dataclass(frozen=True)
class JointReport:
    max_eigen_error: float        # max |Λ̃_n - 1 - Λ_n| / Λ̃_n over checked modes
    min_overlap: float            # min |<u_n^B, u_n^E>| over checked modes
    n_checked: int
    ok: bool


def joint_check(tp: TransferPair, sd: SchmidtData, rel_threshold: float = 1e-6,
                tolerance: float = 1e-5, n_overlap: int = 5) -> JointReport:
    """Compare the singular system of Ẽ with that of B̃.

    Modes with Λ_n > rel_threshold·Λ_0 are checked.  Overlaps are taken for the
    leading ``n_overlap`` of those whose Λ is separated from its neighbours (a
    degenerate pair only fixes a subspace, not individual vectors).
    """
    g = tp.grid
    Ue, se, _ = np.linalg.svd(tp.E_op)
    lam_t = se**2
    if sd.n_modes == 0:
        err = float(np.max(np.abs(lam_t - 1.0)))
        return JointReport(err, 1.0, 0, err < tolerance)
    mask = sd.eigenvalues > rel_threshold * sd.eigenvalues[0]
    lam = sd.eigenvalues[mask]
    k = lam.size
    err = float(np.max(np.abs(lam_t[:k] - 1.0 - lam) / lam_t[:k]))
    uB = sd.output_modes[:, :k] * np.sqrt(g.dq)
    overlaps = np.abs(np.sum(np.conj(uB) * Ue[:, :k], axis=0))
    gaps = np.ones(k, dtype=bool)
    rel_gap = 1e-3
    for i in range(k):
        lo = abs(lam[i] - lam[i - 1]) / lam[i] if i > 0 else np.inf
        hi = abs(lam[i] - lam[i + 1]) / lam[i] if i + 1 < k else np.inf
        gaps[i] = min(lo, hi) > rel_gap
    chosen = overlaps[gaps][:n_overlap]
    min_ov = float(chosen.min()) if chosen.size else 1.0
    return JointReport(err, min_ov, k, err < tolerance and min_ov > 1 - 1e-6)
