"""Uniform symmetric transverse-momentum grid and kernel conventions.

A kernel k(q, q') is stored as an n x n matrix with row index q and column
index q'.  Integrals over an intermediate momentum become matrix products once
the kernel is multiplied by the grid spacing (the "operator" form), and the
Dirac delta is represented as ``delta_ij / dq``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, DimensionError


@dataclass(frozen=True)
class Grid:
    q_max: float
    n_points: int

    def __post_init__(self):
        if not self.q_max > 0:
            raise ConfigError(f"q_max must be positive, got {self.q_max}")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ConfigError(f"n_points must be odd and >= 3, got {self.n_points}")

    @property
    def q_min(self) -> float:
        return -self.q_max

    @property
    def dq(self) -> float:
        return 2.0 * self.q_max / (self.n_points - 1)

    @property
    def center(self) -> int:
        """Index of the q = 0 sample."""
        return self.n_points // 2

    @cached_property
    def q(self) -> np.ndarray:
        # built from integer offsets so that q[center] == 0 and q[n-1-i] == -q[i] exactly
        offsets = np.arange(self.n_points) - self.center
        q = offsets * self.dq
        q.setflags(write=False)
        return q

    def mirror(self, i):
        """Index of -q_i."""
        return self.n_points - 1 - np.asarray(i)

    def to_dict(self) -> dict:
        return {"q_max": float(self.q_max), "n_points": int(self.n_points)}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(q_max=float(d["q_max"]), n_points=int(d["n_points"]))


@dataclass(frozen=True)
class Kernel:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        n = self.grid.n_points
        if v.shape != (n, n):
            raise DimensionError(f"kernel shape {v.shape} does not match grid ({n}, {n})")
        object.__setattr__(self, "values", v)

    @property
    def operator(self) -> np.ndarray:
        return to_operator(self)

    @classmethod
    def from_operator(cls, grid: Grid, op: np.ndarray) -> "Kernel":
        return cls(grid, np.asarray(op) / grid.dq)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())


def quadrature(f, grid: Grid):
    """Riemann sum of ``f`` sampled on ``grid`` (both endpoints included)."""
    f = np.asarray(f)
    if f.shape[-1] != grid.n_points:
        raise DimensionError(f"expected {grid.n_points} samples, got {f.shape[-1]}")
    return f.sum(axis=-1) * grid.dq


def delta_matrix(grid: Grid) -> Kernel:
    return Kernel(grid, np.eye(grid.n_points) / grid.dq)


def to_operator(k: Kernel) -> np.ndarray:
    return k.values * k.grid.dq


def compose(a: Kernel, b: Kernel) -> Kernel:
    """Kernel of the integral ``∫ dq̄ a(q, q̄) b(q̄, q')``."""
    if a.grid != b.grid:
        raise DimensionError("cannot compose kernels on different grids")
    return Kernel(a.grid, (a.values @ b.values) * a.grid.dq)


# --- parity (q -> -q) reduction -------------------------------------------------
#
# Operators that commute with the mirror J (J K J = K) are block diagonal in the
# basis of even and odd combinations (e_i ± e_{J i}) / sqrt(2).  With n = 2m + 1
# the even block has size m + 1 (it contains the q = 0 sample, last) and the odd
# block has size m.


def parity_basis(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Rows of the orthogonal change of basis: (even rows, odd rows)."""
    n, m = grid.n_points, grid.center
    s = 1.0 / np.sqrt(2.0)
    even = np.zeros((m + 1, n))
    odd = np.zeros((m, n))
    idx = np.arange(m)
    even[idx, idx] = s
    even[idx, n - 1 - idx] = s
    even[m, m] = 1.0
    odd[idx, idx] = s
    odd[idx, n - 1 - idx] = -s
    return even, odd


def parity_blocks_from_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Even/odd blocks of a mirror-symmetric matrix given only its first m+1 rows."""
    m = rows.shape[0] - 1
    n = rows.shape[1]
    left = rows[:m, :m]
    mirrored = rows[:m, n - 1:m:-1]
    even = np.empty((m + 1, m + 1), dtype=rows.dtype)
    even[:m, :m] = left + mirrored
    even[:m, m] = np.sqrt(2.0) * rows[:m, m]
    even[m, :m] = np.sqrt(2.0) * rows[m, :m]
    even[m, m] = rows[m, m]
    odd = left - mirrored
    return even, odd


def parity_blocks(matrix: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    even, odd = parity_basis(grid)
    return even @ matrix @ even.T, odd @ matrix @ odd.T


def from_parity_blocks(even_block: np.ndarray, odd_block: np.ndarray, grid: Grid) -> np.ndarray:
    even, odd = parity_basis(grid)
    return even.T @ even_block @ even + odd.T @ odd_block @ odd
