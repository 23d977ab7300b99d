"""Torus grids, Fourier transforms and per-mode operators.

The torus is (R/TZ) x (R/2piZ). A mode (m, k) is the function
``exp(i (R m t + k x))`` with ``R = 2 pi / T``; coefficient arrays are kept
in FFT order along the last two axes, so ``coeffs[c, i, j]`` belongs to
``m = grid.m[i]`` and ``k = grid.k[j]``.

Forward transforms divide by ``Nt * Nx`` so that coefficients are Fourier
series coefficients and Parseval reads: mean of ``|f|^2`` over the grid equals
the sum of ``|c|^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import algebra
from .kernels import batched_matvec

__all__ = [
    "DEFAULT_R",
    "TorusGrid",
    "FieldState",
    "SpectralState",
    "ModeMatrix",
    "dft_forward",
    "dft_inverse",
    "zero_nyquist",
    "derivative_symbols",
    "operator_pair",
    "mode_operator_A",
    "mode_operator_B",
    "closed_form_eigenvalues_A",
    "closed_form_eigenvalues_B",
    "block_symbols",
    "apply_operator",
    "apply_pair",
    "differentiate",
    "kernel_dimension",
    "sobolev_weights",
    "sobolev_norm",
    "mean_zero_project",
    "inner_product",
]

DEFAULT_R = math.sqrt(2.0)
SIGNATURE = np.diag([1.0, 1.0, -1.0, -1.0])


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on (R/TZ) x (R/2piZ) with ``Nt x Nx`` nodes.

    Mode counts must be even; retained modes are ``m in [-Nt/2, Nt/2)`` and
    ``k in [-Nx/2, Nx/2)``.
    """

    T: float
    Nt: int
    Nx: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"time period must be positive, got {self.T}")
        for name in ("Nt", "Nx"):
            n = getattr(self, name)
            if int(n) != n or n <= 0 or n % 2:
                raise ValueError(f"{name} must be an even positive integer, got {n}")
            object.__setattr__(self, name, int(n))

    @classmethod
    def from_ratio(cls, R: float = DEFAULT_R, Nt: int = 64, Nx: int | None = None):
        return cls(2.0 * math.pi / R, Nt, Nt if Nx is None else Nx)

    @property
    def R(self) -> float:
        return 2.0 * math.pi / self.T

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nt, self.Nx)

    @property
    def volume(self) -> float:
        return 2.0 * math.pi * self.T

    @property
    def cell_volume(self) -> float:
        return self.volume / (self.Nt * self.Nx)

    @cached_property
    def t(self) -> np.ndarray:
        return np.arange(self.Nt) * (self.T / self.Nt)

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.Nx) * (2.0 * math.pi / self.Nx)

    @cached_property
    def m(self) -> np.ndarray:
        return np.fft.fftfreq(self.Nt, 1.0 / self.Nt).astype(np.int64)

    @cached_property
    def k(self) -> np.ndarray:
        return np.fft.fftfreq(self.Nx, 1.0 / self.Nx).astype(np.int64)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(t, x)`` broadcast to shape ``(Nt, Nx)``."""
        return np.meshgrid(self.t, self.x, indexing="ij")

    def lattice(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer mode labels ``(m, k)`` of shape ``(Nt, Nx)`` in FFT order."""
        return np.meshgrid(self.m, self.k, indexing="ij")

    def index(self, m: int, k: int) -> tuple[int, int]:
        """Array position of mode (m, k)."""
        if not (-self.Nt // 2 <= m < self.Nt // 2 and -self.Nx // 2 <= k < self.Nx // 2):
            raise IndexError(f"mode ({m}, {k}) is not retained on this grid")
        return m % self.Nt, k % self.Nx

    def nyquist_mask(self) -> np.ndarray:
        mm, kk = self.lattice()
        return (mm == -self.Nt // 2) | (kk == -self.Nx // 2)


@dataclass(frozen=True)
class FieldState:
    """Real field with ``components`` values on every grid node."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[None]
        if v.shape[1:] != self.grid.shape:
            raise ValueError(f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    def l2_norm(self) -> float:
        return math.sqrt(float(np.sum(self.values**2)) * self.grid.cell_volume)


@dataclass(frozen=True)
class SpectralState:
    """Fourier coefficients ``coeffs[c, i, j]`` over the retained lattice."""

    grid: TorusGrid
    coeffs: np.ndarray
    mean_zero: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        if c.shape[1:] != self.grid.shape:
            raise ValueError(f"coefficients of shape {c.shape} do not fit grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def at(self, m: int, k: int) -> np.ndarray:
        return self.coeffs[(slice(None),) + self.grid.index(m, k)]

    def replace(self, coeffs, mean_zero: bool | None = None) -> "SpectralState":
        return SpectralState(self.grid, coeffs, self.mean_zero if mean_zero is None else mean_zero)

    def hermitian_defect(self) -> float:
        """Max of ``|c(-m,-k) - conj(c(m,k))|``; zero for real fields."""
        c = self.coeffs
        flipped = np.roll(np.flip(c, axis=(-2, -1)), 1, axis=(-2, -1))
        return float(np.max(np.abs(flipped - np.conj(c)), initial=0.0))


def dft_forward(f: FieldState) -> SpectralState:
    g = f.grid
    coeffs = np.fft.fft2(f.values, axes=(-2, -1)) / (g.Nt * g.Nx)
    return SpectralState(g, coeffs)


def dft_inverse(s: SpectralState) -> FieldState:
    g = s.grid
    vals = np.fft.ifft2(s.coeffs * (g.Nt * g.Nx), axes=(-2, -1))
    return FieldState(g, vals.real)


def zero_nyquist(s: SpectralState) -> SpectralState:
    c = s.coeffs.copy()
    c[:, s.grid.nyquist_mask()] = 0.0
    return s.replace(c)


def derivative_symbols(grid: TorusGrid, nyquist: bool = False):
    """Symbols ``(i R m, i k)`` of d/dt and d/dx, shape ``(Nt, Nx)``.

    With ``nyquist=False`` the Nyquist wavenumbers are set to zero so that
    differentiation maps real fields to real fields.
    """
    m = grid.m.astype(float)
    k = grid.k.astype(float)
    if not nyquist:
        m = np.where(grid.m == -grid.Nt // 2, 0.0, m)
        k = np.where(grid.k == -grid.Nx // 2, 0.0, k)
    wt = 1j * grid.R * m[:, None] + 0.0 * k[None, :]
    wx = 1j * k[None, :] + 0.0 * m[:, None]
    return wt, wx


_PAIRS = {
    "K": ("K1", "K2"),
    "M": ("M1", "M2"),
    "J": ("J1", "J2"),
}


def operator_pair(op_label: str) -> tuple[np.ndarray, np.ndarray]:
    """Matrix pair ``(P1, P2)`` of the operator ``P1 d_t + P2 d_x``."""
    key = op_label.rstrip("∂d").strip() or op_label
    if key not in _PAIRS:
        raise ValueError(f"unknown operator {op_label!r}; expected one of K∂, M∂, J∂")
    a, b = _PAIRS[key]
    return algebra.matrix(a).astype(float), algebra.matrix(b).astype(float)


def block_symbols(P1: np.ndarray, P2: np.ndarray, wt, wx) -> np.ndarray:
    """Per-mode blocks ``wt * P1 + wx * P2`` of shape ``wt.shape + P1.shape``."""
    wt = np.asarray(wt)[..., None, None]
    wx = np.asarray(wx)[..., None, None]
    return wt * P1 + wx * P2


@dataclass
class ModeMatrix:
    """A per-mode Hermitian matrix with its sorted spectrum."""

    matrix: np.ndarray
    eigenvalues: np.ndarray = field(init=False)
    eigenvectors: np.ndarray = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=complex)
        herm = float(np.max(np.abs(a - a.conj().T)))
        if herm > 1e-12 * max(1.0, float(np.max(np.abs(a)))):
            raise ValueError(f"mode matrix is not Hermitian (defect {herm:.3e})")
        self.matrix = a
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(a)

    def residual(self) -> float:
        """Max over i of ``|A v_i - lambda_i v_i|``, relative to the spectral radius."""
        a, w, v = self.matrix, self.eigenvalues, self.eigenvectors
        scale = max(1.0, float(np.max(np.abs(w))))
        return float(np.max(np.abs(a @ v - v * w))) / scale


def mode_operator_A(m: int, k: int, R: float = DEFAULT_R) -> ModeMatrix:
    """``A(m, k) = i R m M1 + i k M2`` (the free Bridges Floer symbol)."""
    M1, M2 = operator_pair("M")
    return ModeMatrix(1j * R * m * M1 + 1j * k * M2)


def mode_operator_B(m: int, k: int, R: float = DEFAULT_R) -> ModeMatrix:
    """``B(m, k) = diag(1, 1, -1, -1) - i R m M1 - i k M2``."""
    M1, M2 = operator_pair("M")
    return ModeMatrix(SIGNATURE - 1j * R * m * M1 - 1j * k * M2)


def closed_form_eigenvalues_A(m, k, R: float = DEFAULT_R):
    """Closed-form spectrum ``(l1+, l1-, l2+, l2-)`` of A(m, k)."""
    m = np.asarray(m, dtype=float)
    k = np.asarray(k, dtype=float)
    l1 = np.abs(k + m * R)
    l2 = np.abs(k - m * R)
    return l1, -l1, l2, -l2


def closed_form_eigenvalues_B(m, k, R: float = DEFAULT_R):
    """Closed-form spectrum ``(l1+, l1-, l2+, l2-)`` of B(m, k)."""
    m = np.abs(np.asarray(m, dtype=float))
    root = np.sqrt(1.0 + np.asarray(k, dtype=float) ** 2)
    l1 = R * m + root
    l2 = np.abs(R * m - root)
    return l1, -l1, l2, -l2


def apply_operator(op_label: str, s: SpectralState) -> SpectralState:
    """Apply ``P1 d_t + P2 d_x`` mode by mode (K∂ on 3 components, M∂/J∂ on 4)."""
    P1, P2 = operator_pair(op_label)
    if s.components != P1.shape[0]:
        raise ValueError(
            f"{op_label} acts on {P1.shape[0]} components, state has {s.components}"
        )
    return apply_pair(P1, P2, s)


def apply_pair(P1: np.ndarray, P2: np.ndarray, s: SpectralState) -> SpectralState:
    """Apply ``P1 d_t + P2 d_x`` for an arbitrary matrix pair."""
    if s.components != P1.shape[1]:
        raise ValueError(f"operator acts on {P1.shape[1]} components, state has {s.components}")
    wt, wx = derivative_symbols(s.grid)
    blocks = block_symbols(P1, P2, wt, wx)
    vecs = np.moveaxis(s.coeffs, 0, -1)
    out = batched_matvec(blocks.reshape(-1, *P1.shape), vecs.reshape(-1, P1.shape[1]))
    out = np.moveaxis(out.reshape(s.grid.shape + (P1.shape[0],)), -1, 0)
    return s.replace(out)


def differentiate(values: np.ndarray, grid: TorusGrid) -> tuple[np.ndarray, np.ndarray]:
    """Spectral ``(d/dt, d/dx)`` of real node values with trailing shape ``(Nt, Nx)``."""
    c = np.fft.fft2(values, axes=(-2, -1))
    wt, wx = derivative_symbols(grid)
    both = np.fft.ifft2(np.stack([wt * c, wx * c]), axes=(-2, -1)).real
    return both[0], both[1]


def _free_wave_blocks(grid: TorusGrid) -> np.ndarray:
    mm, kk = grid.lattice()
    return ((grid.R * mm) ** 2 - kk.astype(float) ** 2)[..., None, None].astype(complex)


def kernel_dimension(op_label: str, grid: TorusGrid, rel_threshold: float = 1e-10) -> int:
    """Count per-mode singular values below ``rel_threshold * sigma_max``.

    The operator is block diagonal in Fourier space; every retained mode,
    Nyquist rows included, contributes one block. ``op_label`` is one of
    K∂, M∂, J∂ or ``"wave"`` (the scalar free-wave operator).
    """
    if not rel_threshold > 0:
        raise ValueError("svd threshold must be positive")
    if op_label == "wave":
        blocks = _free_wave_blocks(grid)
    else:
        P1, P2 = operator_pair(op_label)
        wt, wx = derivative_symbols(grid, nyquist=True)
        blocks = block_symbols(P1, P2, wt, wx)
    sv = np.linalg.svd(blocks.reshape(-1, *blocks.shape[-2:]), compute_uv=False)
    cutoff = rel_threshold * float(sv.max())
    return int(np.count_nonzero(sv < cutoff))


def sobolev_weights(grid: TorusGrid, order: float) -> np.ndarray:
    mm, kk = grid.lattice()
    return (1.0 + (grid.R * mm) ** 2 + kk.astype(float) ** 2) ** order


def sobolev_norm(s: SpectralState, order: float = 0.0) -> float:
    """``(sum_{m,k} (1 + (Rm)^2 + k^2)^h |c(m,k)|^2)^(1/2)`` over all components."""
    if order < 0:
        raise ValueError("Sobolev order must be nonnegative")
    w = sobolev_weights(s.grid, order)
    # np.sum reduces pairwise, so the result does not depend on thread count
    return math.sqrt(float(np.sum(w * np.sum(np.abs(s.coeffs) ** 2, axis=0))))


def mean_zero_project(s: SpectralState, components=None) -> SpectralState:
    """Zero the (0, 0) coefficient, optionally only for selected components."""
    c = s.coeffs.copy()
    if components is None:
        c[:, 0, 0] = 0.0
        return s.replace(c, mean_zero=True)
    for i in np.atleast_1d(components):
        c[int(i), 0, 0] = 0.0
    return s.replace(c)


def inner_product(a: SpectralState, b: SpectralState) -> complex:
    """``sum conj(a) b`` over modes and components (grid-mean normalisation)."""
    return complex(np.sum(np.conj(a.coeffs) * b.coeffs))
