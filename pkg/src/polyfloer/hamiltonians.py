"""Hamiltonian densities, the particle source and the action functionals.

Fields are arrays of shape ``(components, Nt, Nx)`` in the order
(phi, pi1, pi2, o). Three-component fields drop ``o`` and are paired with
the degenerate matrices K1, K2; four-component fields use M1, M2.

The coupled density is ``S = 1/2 phi^2 + 1/2 pi1^2 - 1/2 pi2^2 - 1/2 o^2 +
phi * source`` where ``source(t, x)`` is the sum of the particle charge
profiles. Its gradient ``L Z + source e1`` is affine in Z, which is what makes
the coupled flow solvable mode by mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import algebra
from .kernels import bump_profile
from .spectral import TorusGrid, differentiate, operator_pair

__all__ = [
    "KINDS",
    "Mollifier",
    "Potential",
    "ParticlePath",
    "HamiltonianSpec",
    "density",
    "grad_S",
    "convolve",
    "convolve_quadrature",
    "grad_H_particle",
    "source_field",
    "source_field_ds",
    "periodicity_defect",
    "kinetic_density",
    "action",
    "action_batch",
    "infinite_dim_hamiltonian",
    "infinite_dim_gradient",
    "selfadjoint_defect",
]

KINDS = ("ddw_free", "bridges_free", "bridges_wave", "coupled", "zero")

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Mollifier:
    """Smooth bump ``exp(1 - r^2 / (r^2 - y^2))`` on ``|y| < r``, zero outside.

    The profile is periodised with ``period`` (2 pi on the field circle; a
    longer period in the rest frame of a boosted particle).
    """

    radius: float = math.pi / 4
    period: float = TWO_PI

    def __post_init__(self):
        if not 0.0 < self.radius < math.pi:
            raise ValueError(f"mollifier radius must lie in (0, pi), got {self.radius}")
        if not 2.0 * self.radius < self.period:
            raise ValueError("mollifier support does not fit inside one period")

    def wrap(self, y):
        """Representative of ``y`` in ``(-period/2, period/2]``."""
        half = 0.5 * self.period
        return half - np.mod(half - np.asarray(y, dtype=float), self.period)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = bump_profile(np.ascontiguousarray(y.ravel()), self.radius, self.period)
        return out.reshape(y.shape) if y.ndim else float(out[0])

    def derivative(self, y):
        """``d rho / dy``: ``rho(y) * (-2 r^2 y / (r^2 - y^2)^2)`` inside the support."""
        w = self.wrap(y)
        r2 = self.radius**2
        inside = np.abs(w) < self.radius
        safe = np.where(inside, w, 0.0)
        gap = r2 - safe * safe
        val = np.where(inside, np.exp(1.0 - r2 / gap) * (-2.0 * r2 * safe / gap**2), 0.0)
        return val if val.ndim else float(val)

    @cached_property
    def _fine_coefficients(self) -> np.ndarray:
        # trapezoid on a fine grid is spectrally accurate for a smooth periodic bump
        n = 8192
        y = np.arange(n) * (self.period / n)
        return np.fft.fft(self(y)) / n

    def fourier(self, k) -> np.ndarray:
        """Coefficients ``(1/P) * integral rho(y) exp(-2 pi i k y / P) dy``, P = period."""
        k = np.asarray(k, dtype=np.int64)
        c = self._fine_coefficients
        if np.any(np.abs(k) >= c.size // 2):
            raise ValueError("requested wavenumber beyond the mollifier's fine grid")
        return c[k % c.size]

    @property
    def total_charge(self) -> float:
        return float(self.period * self._fine_coefficients[0].real)


@dataclass(frozen=True)
class Potential:
    """External potential ``mu cos(q) cos(2 pi t / T)``; bounded by ``mu``."""

    amplitude: float = 0.5
    T: float = TWO_PI / math.sqrt(2.0)

    def __call__(self, t, q):
        return self.amplitude * np.cos(q) * np.cos(TWO_PI * np.asarray(t) / self.T)

    def derivative(self, t, q):
        return -self.amplitude * np.sin(q) * np.cos(TWO_PI * np.asarray(t) / self.T)


@dataclass(frozen=True)
class ParticlePath:
    """Prescribed particle curve ``q_s(t) = q+(t) + exp(-rate s) offset``.

    The limiting loop is ``q+(t) = rest + amplitude sin(2 pi harmonic t / T)``.
    A particle with nonzero ``velocity`` is taken at rest in its own frame
    (``amplitude`` must be 0); its charge is periodised with period
    ``2 pi gamma / windings`` there, which makes the boosted source doubly
    periodic exactly when ``velocity * T / (2 pi) * windings`` is an integer.
    """

    rest: float = 0.0
    offset: float = 0.0
    rate: float = 1.0
    amplitude: float = 0.0
    harmonic: int = 1
    velocity: float = 0.0
    windings: int = 1

    def __post_init__(self):
        if not abs(self.velocity) < 1.0:
            raise ValueError(f"frame velocity must satisfy |v| < 1, got {self.velocity}")
        if self.windings < 1:
            raise ValueError("windings must be a positive integer")
        if self.velocity != 0.0 and self.amplitude != 0.0:
            raise ValueError("boosted particles must be at rest in their own frame")
        if self.rate <= 0:
            raise ValueError("convergence rate must be positive")

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.velocity**2)

    @property
    def frame_period(self) -> float:
        return TWO_PI * self.gamma / self.windings if self.velocity else TWO_PI

    def compatible(self, T: float, tol: float = 1e-9) -> bool:
        """Whether the boosted source is doubly periodic on the (T, 2 pi) torus."""
        if self.velocity == 0.0:
            return True
        n = self.velocity * T / TWO_PI * self.windings
        return abs(n - round(n)) < tol

    def limit(self, t, T: float):
        t = np.asarray(t, dtype=float)
        return self.rest + self.amplitude * np.sin(TWO_PI * self.harmonic * t / T)

    def q(self, s: float, t, T: float):
        """Position in (-pi, pi] (own-frame position for boosted particles)."""
        raw = self.limit(t, T) + math.exp(-self.rate * s) * self.offset
        return math.pi - np.mod(math.pi - raw, TWO_PI)

    def p(self, s: float, t, T: float):
        w = TWO_PI * self.harmonic / T
        return self.amplitude * w * np.cos(w * np.asarray(t, dtype=float))

    def dq_ds(self, s: float) -> float:
        return -self.rate * math.exp(-self.rate * s) * self.offset

    def distance_to_limit(self, s: float) -> float:
        return abs(math.exp(-self.rate * s) * self.offset)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Which density S drives the flow.

    ``ddw_free``: ``1/2 pi1^2 - 1/2 pi2^2`` on three components.
    ``bridges_free``: ``1/2 pi1^2 + 1/2 pi2^2``.
    ``bridges_wave``: ``1/2 mass phi^2 + 1/2 pi1^2 - 1/2 pi2^2``; its
    critical points are solutions of ``-phi_tt + phi_xx = mass phi``.
    ``coupled``: the particle-field density with the particles' source.
    ``zero``: S = 0 on 3 or 4 components.
    """

    kind: str = "bridges_free"
    components: int | None = None
    mass: float = 0.0
    mollifier: Mollifier = field(default_factory=Mollifier)
    potential: Potential | None = None
    particles: tuple[ParticlePath, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}; expected one of {KINDS}")
        default = 3 if self.kind == "ddw_free" else 4
        c = default if self.components is None else int(self.components)
        if self.kind == "ddw_free" and c != 3:
            raise ValueError("ddw_free acts on three components")
        if self.kind in ("bridges_free", "bridges_wave", "coupled") and c != 4:
            raise ValueError(f"{self.kind} acts on four components")
        if c not in (3, 4):
            raise ValueError("fields have three or four components")
        object.__setattr__(self, "components", c)
        object.__setattr__(self, "particles", tuple(self.particles))

    @property
    def operator(self) -> str:
        return "K∂" if self.components == 3 else "M∂"

    @property
    def hessian(self) -> np.ndarray:
        """Constant Hessian of the quadratic part of S (a diagonal matrix)."""
        diag = {
            "ddw_free": [0.0, 1.0, -1.0],
            "bridges_free": [0.0, 1.0, 1.0, 0.0],
            "bridges_wave": [self.mass, 1.0, -1.0, 0.0],
            "coupled": [1.0, 1.0, -1.0, -1.0],
            "zero": [0.0] * self.components,
        }[self.kind]
        return np.diag(diag)

    @property
    def has_source(self) -> bool:
        return self.kind == "coupled" and bool(self.particles)


def _check_field(spec: HamiltonianSpec, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.shape[0] != spec.components:
        raise ValueError(
            f"{spec.kind} expects {spec.components} components, got {Z.shape[0]}"
        )
    return Z


def density(spec: HamiltonianSpec, Z, source=0.0) -> np.ndarray:
    """Pointwise value of S; ``Z`` has the components on the leading axis."""
    Z = _check_field(spec, Z)
    quad = 0.5 * np.einsum("i,i...->...", np.diag(spec.hessian), Z * Z)
    if spec.kind == "coupled":
        quad = quad + Z[0] * source
    return quad


def grad_S(spec: HamiltonianSpec, Z, source=0.0) -> np.ndarray:
    """Gradient of S in Z; affine in Z, with the source entering the phi row."""
    Z = _check_field(spec, Z)
    g = np.einsum("i,i...->i...", np.diag(spec.hessian), Z)
    if spec.kind == "coupled":
        g = g.copy()
        g[0] = g[0] + source
    return g


# -- particle side -----------------------------------------------------------


def _circle_modes(f) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(f, dtype=float)
    n = f.size
    fk = np.fft.fft(f) / n
    k = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)
    fk[k == -(n // 2)] = 0.0  # the Nyquist mode has no real derivative
    return k, fk


def convolve(f, rho: Mollifier, q):
    """``(f * rho)(q) = integral f(x) rho(q - x) dx`` over the circle.

    Evaluated mode by mode: with ``f_k`` the grid Fourier coefficients of f and
    ``rho_k`` those of the profile (both ``1/(2 pi)`` times the integral
    against ``exp(-i k x)``), the convolution is
    ``2 pi sum_k f_k rho_k exp(i k q)``.
    """
    k, fk = _circle_modes(f)
    phase = np.exp(1j * np.multiply.outer(np.asarray(q, dtype=float), k))
    return (TWO_PI * (phase @ (fk * rho.fourier(k)))).real


def _convolve_derivative(f, rho: Mollifier, q):
    k, fk = _circle_modes(f)
    phase = np.exp(1j * np.multiply.outer(np.asarray(q, dtype=float), k))
    return (TWO_PI * (phase @ (1j * k * fk * rho.fourier(k)))).real


def convolve_quadrature(f_callable, rho: Mollifier, q, n: int = 4096) -> float:
    """Direct trapezoid evaluation of the convolution; slow, kept as a reference."""
    x = np.arange(n) * (TWO_PI / n)
    return float(np.sum(f_callable(x) * rho(q - x)) * (TWO_PI / n))


def grad_H_particle(t, q, p, phi_slice, rho: Mollifier, potential: Potential | None = None):
    """``(dH/dq, dH/dp)`` for ``H = p^2/2 + V_t(q) + (phi * rho)(q)``."""
    dV = 0.0 if potential is None else float(potential.derivative(t, q))
    dconv = float(_convolve_derivative(phi_slice, rho, q))
    return np.array([dV + dconv, float(p)])


# -- field source ------------------------------------------------------------


def _boosted(path: ParticlePath, t, x):
    g = path.gamma
    v = path.velocity
    return g * (t - v * x), g * (x - v * t)


def source_field(spec: HamiltonianSpec, grid: TorusGrid, s: float) -> np.ndarray:
    """Sum over particles of ``rho(q_j(t') - x')`` on the grid nodes.

    ``(t', x')`` is the Lorentz boost of ``(t, x)`` with the particle's frame
    velocity; for ``v = 0`` this is the plain ``rho(q(t) - x)``.
    """
    t, x = grid.mesh()
    out = np.zeros(grid.shape)
    for path in spec.particles:
        rho = Mollifier(spec.mollifier.radius, path.frame_period)
        tb, xb = _boosted(path, t, x)
        out += rho(path.q(s, tb, grid.T) - xb)
    return out


def source_field_ds(spec: HamiltonianSpec, grid: TorusGrid, s: float) -> np.ndarray:
    """Derivative of :func:`source_field` in the flow parameter s."""
    t, x = grid.mesh()
    out = np.zeros(grid.shape)
    for path in spec.particles:
        dq = path.dq_ds(s)
        if dq == 0.0:
            continue
        rho = Mollifier(spec.mollifier.radius, path.frame_period)
        tb, xb = _boosted(path, t, x)
        out += rho.derivative(path.q(s, tb, grid.T) - xb) * dq
    return out


def periodicity_defect(spec: HamiltonianSpec, grid: TorusGrid, s: float = 0.0) -> float:
    """Largest jump of the source across the torus seams (zero for compatible boosts)."""
    t, x = grid.mesh()
    worst = 0.0
    for path in spec.particles:
        rho = Mollifier(spec.mollifier.radius, path.frame_period)

        def f(tt, xx):
            tb, xb = _boosted(path, tt, xx)
            return rho(path.q(s, tb, grid.T) - xb)

        base = f(t, x)
        worst = max(
            worst,
            float(np.max(np.abs(f(t + grid.T, x) - base))),
            float(np.max(np.abs(f(t, x + TWO_PI) - base))),
        )
    return worst


# -- actions -----------------------------------------------------------------


def kinetic_density(Z: np.ndarray, grid: TorusGrid, form: str = "matrix") -> np.ndarray:
    """Kinetic part of the action integrand on the grid nodes.

    ``form="matrix"`` uses ``1/2 <(P1 d_t + P2 d_x) Z, Z>``; ``form="primitive"``
    uses ``pi1 phi_t - pi2 phi_x`` (minus ``o (pi2_t - pi1_x)`` with four
    components). The two differ pointwise by a divergence, so their integrals
    agree.
    """
    Z = np.asarray(Z, dtype=float)
    c = Z.shape[0]
    dt, dx = differentiate(Z, grid)
    if form == "matrix":
        P1, P2 = operator_pair("K∂" if c == 3 else "M∂")
        PZ = np.einsum("ij,j...->i...", P1, dt) + np.einsum("ij,j...->i...", P2, dx)
        return 0.5 * np.sum(PZ * Z, axis=0)
    if form == "primitive":
        out = Z[1] * dt[0] - Z[2] * dx[0]
        if c == 4:
            out = out - Z[3] * (dt[2] - dx[1])
        return out
    raise ValueError(f"unknown kinetic form {form!r}")


def action(spec: HamiltonianSpec, Z, grid: TorusGrid, source=0.0, form: str = "matrix") -> float:
    """Grid quadrature of ``kinetic - S`` over the torus."""
    Z = _check_field(spec, Z)
    integrand = kinetic_density(Z, grid, form) - density(spec, Z, source)
    return float(np.sum(integrand) * grid.cell_volume)


def action_batch(spec: HamiltonianSpec, Zs, grid: TorusGrid, source=0.0) -> np.ndarray:
    """:func:`action` (matrix form) for a stack of fields shaped ``(n, c, Nt, Nx)``."""
    Zs = np.asarray(Zs, dtype=float)
    if Zs.ndim != 4 or Zs.shape[1] != spec.components:
        raise ValueError(f"expected a stack of {spec.components}-component fields, got {Zs.shape}")
    P1, P2 = operator_pair(spec.operator)
    dt, dx = differentiate(Zs, grid)
    PZ = np.einsum("ij,njab->niab", P1, dt) + np.einsum("ij,njab->niab", P2, dx)
    kin = 0.5 * np.sum(PZ * Zs, axis=1)
    pot = 0.5 * np.einsum("i,niab->nab", np.diag(spec.hessian), Zs * Zs)
    if spec.kind == "coupled":
        pot = pot + Zs[:, 0] * source
    return np.sum(kin - pot, axis=(-2, -1)) * grid.cell_volume


def _dx_1d(f: np.ndarray) -> np.ndarray:
    n = f.shape[-1]
    k = np.fft.fftfreq(n, 1.0 / n)
    k[k == -n // 2] = 0.0
    return np.fft.ifft(1j * k * np.fft.fft(f, axis=-1), axis=-1).real


def infinite_dim_hamiltonian(Z_slice, spec: HamiltonianSpec, source=0.0) -> float:
    """``-1/2 integral <M2 Z_x, Z> dx + integral S(Z) dx`` on one time slice."""
    Z = _check_field(spec, Z_slice)
    M2 = algebra.matrix("M2").astype(float)
    n = Z.shape[-1]
    h = TWO_PI / n
    kin = -0.5 * np.sum(np.einsum("ij,jn->in", M2, _dx_1d(Z)) * Z) * h
    return float(kin + np.sum(density(spec, Z, source)) * h)


def infinite_dim_gradient(Z_slice, spec: HamiltonianSpec, source=0.0) -> np.ndarray:
    """L2 gradient ``-M2 Z_x + grad S(Z)`` of :func:`infinite_dim_hamiltonian`."""
    Z = _check_field(spec, Z_slice)
    M2 = algebra.matrix("M2").astype(float)
    return -np.einsum("ij,jn->in", M2, _dx_1d(Z)) + grad_S(spec, Z, source)


def selfadjoint_defect(f: np.ndarray, g: np.ndarray) -> float:
    """``|<M2 f_x, g> - <f, M2 g_x>|`` relative to ``|f| |g|`` on a 4-component slice."""
    M2 = algebra.matrix("M2").astype(float)
    a = np.sum(np.einsum("ij,jn->in", M2, _dx_1d(f)) * g)
    b = np.sum(f * np.einsum("ij,jn->in", M2, _dx_1d(g)))
    scale = np.linalg.norm(f) * np.linalg.norm(g)
    return float(abs(a - b) / scale) if scale else 0.0
