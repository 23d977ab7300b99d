"""Constant structure matrices and the exterior algebra of R^{1,1}.

Coordinates are ordered (phi, pi1, pi2, o) for four-component fields and
(phi, pi1, pi2) for the degenerate three-component system. Every module in
the package shares this order.

Matrices are stored with integer entries so that the algebraic identities
(``M1 @ M1 == -I`` and friends) can be checked exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "StructureMatrix",
    "ExteriorElement",
    "standard_matrices",
    "matrix",
    "embed3",
    "check_complex_structure",
    "hodge_star",
    "hodge_star_matrix",
    "poly_sharp",
    "form_matrix",
    "exterior_derivative_symbol",
    "codifferential_symbol",
    "dirac_symbol",
]


def _frozen(rows: Sequence[Sequence[int]]) -> np.ndarray:
    a = np.array(rows, dtype=np.int64)
    a.setflags(write=False)
    return a


_J = _frozen([[0, -1], [1, 0]])
_K1 = _frozen([[0, -1, 0], [1, 0, 0], [0, 0, 0]])
_K2 = _frozen([[0, 0, 1], [0, 0, 0], [-1, 0, 0]])
_M1 = _frozen([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]])
_M2 = _frozen([[0, 0, 1, 0], [0, 0, 0, -1], [-1, 0, 0, 0], [0, 1, 0, 0]])
_J1 = _frozen([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]])
_J2 = _frozen([[0, 0, 1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, -1, 0, 0]])
_L = _frozen(np.diag([1, 1, -1, -1]))


@dataclass(frozen=True)
class StructureMatrix:
    """A labelled integer matrix from the fixed catalog."""

    label: str
    entries: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


_CATALOG: Mapping[str, StructureMatrix] = MappingProxyType(
    {
        label: StructureMatrix(label, entries)
        for label, entries in [
            ("J", _J),
            ("K1", _K1),
            ("K2", _K2),
            ("M1", _M1),
            ("M2", _M2),
            ("J1", _J1),
            ("J2", _J2),
            ("L", _L),
        ]
    }
)


def standard_matrices() -> Mapping[str, StructureMatrix]:
    """Return the read-only catalog ``{label: StructureMatrix}``.

    Labels are J, K1, K2, M1, M2, J1, J2 and L (the Lorentzian metric
    diag(1, 1, -1, -1) on the total exterior algebra).
    """
    return _CATALOG


def matrix(label: str) -> np.ndarray:
    """Shortcut for ``standard_matrices()[label].entries``."""
    try:
        return _CATALOG[label].entries
    except KeyError:
        raise KeyError(f"unknown structure matrix {label!r}") from None


def embed3(a: np.ndarray) -> np.ndarray:
    """Zero-pad a 3x3 matrix into the top-left block of a 4x4 matrix."""
    a = np.asarray(a)
    if a.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {a.shape}")
    out = np.zeros((4, 4), dtype=a.dtype)
    out[:3, :3] = a
    return out


def check_complex_structure(m) -> bool:
    """True iff ``m @ m == -I`` and ``m.T == -m`` hold exactly."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("complex structure check needs a square matrix")
    eye = np.eye(m.shape[0], dtype=m.dtype)
    return bool(np.array_equal(m @ m, -eye) and np.array_equal(m.T, -m))


# -- exterior algebra of R^{1,1} -------------------------------------------
#
# Basis {1, dt, dx, dV}; a 4-vector of coefficients is an ExteriorElement.
# The Hodge star sends 1 -> dV, dt -> dx, dx -> dt, dV -> -1.

_STAR = _frozen(
    [
        [0, 0, 0, -1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [1, 0, 0, 0],
    ]
)

DEGREES = (0, 1, 1, 2)


@dataclass(frozen=True)
class ExteriorElement:
    """Coefficients on the frame {1, dt, dx, dV} (0-, 1- and 2-form parts)."""

    coeffs: tuple[float, float, float, float]

    def __post_init__(self):
        c = tuple(self.coeffs)
        if len(c) != 4:
            raise ValueError("an exterior element has exactly four coefficients")
        object.__setattr__(self, "coeffs", c)

    def degree_part(self, k: int) -> tuple[float, ...]:
        return tuple(c for c, d in zip(self.coeffs, DEGREES) if d == k)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)


def hodge_star_matrix() -> np.ndarray:
    return _STAR


def hodge_star(e):
    """Apply the Hodge star of R^{1,1} coefficientwise.

    Accepts an :class:`ExteriorElement` or an array whose leading axis has
    length four; returns the same kind of object.
    """
    if isinstance(e, ExteriorElement):
        return ExteriorElement(tuple((_STAR @ np.asarray(e.coeffs)).tolist()))
    a = np.asarray(e)
    if a.shape[0] != 4:
        raise ValueError("leading axis must index the basis {1, dt, dx, dV}")
    return np.tensordot(_STAR, a, axes=(1, 0))


def exterior_derivative_symbol(wt: complex, wx: complex) -> np.ndarray:
    """Fourier symbol of d on the total exterior algebra.

    ``wt`` and ``wx`` are the symbols of the partial derivatives
    (``i R m`` and ``i k`` for the mode ``exp(i(Rmt + kx))``).
    """
    d = np.zeros((4, 4), dtype=complex)
    d[1, 0] = wt  # d phi = phi_t dt + phi_x dx
    d[2, 0] = wx
    d[3, 1] = -wx  # d(a dt + b dx) = (b_t - a_x) dV
    d[3, 2] = wt
    return d


def codifferential_symbol(wt: complex, wx: complex) -> np.ndarray:
    """Symbol of delta_k = (-1)^k star^{-1} d star, assembled degree by degree."""
    star = _STAR.astype(complex)
    star_inv = np.linalg.inv(star)
    d = exterior_derivative_symbol(wt, wx)
    raw = star_inv @ d @ star
    sign = np.diag([(-1.0) ** k for k in DEGREES])
    # raw maps a k-form to a (k-1)-form; the sign belongs to the source degree
    return raw @ sign


def dirac_symbol(wt: complex, wx: complex) -> np.ndarray:
    """Symbol of d + delta, which equals J1 d_t + J2 d_x in this frame."""
    return exterior_derivative_symbol(wt, wx) + codifferential_symbol(wt, wx)


def form_matrix(omega) -> np.ndarray:
    """Validate ``omega`` as an antisymmetric matrix representing <., omega .>."""
    w = np.asarray(omega)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("a 2-form is represented by a square matrix")
    if not np.allclose(w, -w.T, atol=0.0, rtol=0.0):
        raise ValueError("2-form matrix must be antisymmetric")
    return w


def poly_sharp(omega_components: Sequence, dZ) -> np.ndarray:
    """Trace map of a vector-valued 2-form applied to the differential of a map.

    Parameters
    ----------
    omega_components : sequence of (d, d) antisymmetric matrices
        ``omega_i(a, b) = <a, W_i b>``, one per space-time direction.
    dZ : array_like, shape (n, d)
        Row ``i`` is the partial derivative of the map along direction ``i``.

    Returns
    -------
    ndarray, shape (d,)
        The covector ``V -> sum_i omega_i(V, dZ[i])`` represented as the
        vector ``sum_i W_i @ dZ[i]``.
    """
    dz = np.atleast_2d(np.asarray(dZ, dtype=float))
    ws = [form_matrix(w) for w in omega_components]
    if len(ws) != dz.shape[0]:
        raise ValueError(
            f"{len(ws)} form components but dZ has {dz.shape[0]} direction rows"
        )
    d = dz.shape[1]
    for w in ws:
        if w.shape != (d, d):
            raise ValueError(f"form of shape {w.shape} does not act on R^{d}")
    out = np.zeros(d)
    for w, col in zip(ws, dz):
        out += w @ col
    return out
