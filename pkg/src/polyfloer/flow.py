"""Floer gradient flows on the truncated Fourier lattice.

Every flow here has the form ``d_s Z = G Z + g(s)`` mode by mode, where
``G(m, k) = -(i R m P1 + i k P2) + Hess S`` is Hermitian and ``g`` is the
particle source in the phi row (zero for the free flows). Writing ``G`` in
its eigenbasis decouples the flow into scalar equations
``d_s a = w a + b(s)``, which are advanced exactly over each step with the
source held fixed (exponential Euler; exact when there is no source).

Directions with ``w > 0`` grow forward in s. A finite-energy curve must keep
those components bounded, which fixes them through the whole future of the
source; the coupled driver therefore integrates them backwards from
``s_max`` (where they sit at the frozen-source equilibrium) while the
decaying directions are integrated forwards from the initial data.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import hamiltonians as hm
from .rng import LinearRNG
from .spectral import (
    SpectralState,
    TorusGrid,
    block_symbols,
    derivative_symbols,
    dft_forward,
    dft_inverse,
    differentiate,
    FieldState,
    mean_zero_project,
    operator_pair,
    sobolev_norm,
    sobolev_weights,
    zero_nyquist,
)

__all__ = [
    "INTEGRATORS",
    "RECIPES",
    "FlowConfig",
    "FlowDivergence",
    "StepSizeWarning",
    "ModeSystem",
    "TrajectoryRecord",
    "FlowProblem",
    "residual",
    "epsilon_family_residual",
    "floer_step_exact",
    "stable_projection",
    "floer_step_coupled",
    "asymptotic_limit",
    "initial_data",
    "run_flow",
    "free_wave_kernel_check",
    "free_wave_symbol",
    "slowest_occupied_mode",
]

INTEGRATORS = ("exact_linear", "exponential_euler")
RECIPES = ("zero", "counterexample", "random_mean_zero", "certified_wave_solution", "custom")
SOBOLEV_ORDERS = (0, 1, 2, 3, 4)
LIMIT_ORDERS = (0, 2, 4)


class FlowDivergence(FloatingPointError):
    """The state stopped being finite; ``s`` is where it was detected."""

    def __init__(self, s: float):
        super().__init__(f"flow produced non-finite values at s = {s!r}")
        self.s = s


class StepSizeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FlowConfig:
    ds: float = 0.01
    s_max: float = 50.0
    integrator: str = "exact_linear"
    epsilon: float = 1.0
    stable_projection: bool = True
    record_stride: int = 10
    track_modes: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if not self.ds > 0:
            raise ValueError("ds must be positive")
        if not self.s_max >= 0:
            raise ValueError("s_max must be nonnegative")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")
        object.__setattr__(self, "track_modes", tuple(tuple(map(int, p)) for p in self.track_modes))

    @property
    def n_steps(self) -> int:
        n = self.s_max / self.ds
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError("s_max must be an integer multiple of ds")
        return int(round(n))


def _phi1(z: np.ndarray) -> np.ndarray:
    """``(exp(z) - 1) / z`` with the removable singularity filled in."""
    z = np.asarray(z)
    out = np.ones_like(z, dtype=float)
    nz = z != 0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def _interpolated_pair(components: int, epsilon: float):
    if components == 3:
        return operator_pair("K∂")
    P1, P2 = operator_pair("M∂")
    if epsilon == 1.0:
        return P1, P2
    K1 = np.zeros((4, 4))
    K2 = np.zeros((4, 4))
    K1[:3, :3], K2[:3, :3] = operator_pair("K∂")
    return K1 + epsilon * (P1 - K1), K2 + epsilon * (P2 - K2)


class ModeSystem:
    """Per-mode generators of a linear (or affine) Floer flow and their eigenbases.

    With ``epsilon < 1`` on four components the o row of the flow carries the
    weight epsilon, i.e. the flow is the gradient flow for the metric
    ``diag(1, 1, 1, epsilon)``; the symmetrised generator is still Hermitian.
    At ``epsilon = 0`` the o component is frozen.
    """

    def __init__(self, grid: TorusGrid, spec: hm.HamiltonianSpec, epsilon: float = 1.0):
        if epsilon != 1.0 and spec.kind == "coupled":
            raise ValueError("the epsilon family is defined for the free wave densities only")
        self.grid = grid
        self.spec = spec
        self.epsilon = float(epsilon)
        c = spec.components
        P1, P2 = _interpolated_pair(c, self.epsilon)
        wt, wx = derivative_symbols(grid)
        G = -block_symbols(P1, P2, wt, wx) + spec.hessian
        metric = np.ones(c)
        if c == 4 and 0.0 < self.epsilon < 1.0:
            metric[3] = self.epsilon
        self.metric = metric
        scale = 1.0 / np.sqrt(metric)
        G = scale[:, None] * G * scale[None, :]
        herm = float(np.max(np.abs(G - np.conj(np.swapaxes(G, -1, -2)))))
        if herm > 1e-12 * max(1.0, float(np.max(np.abs(G)))):
            raise ValueError(f"per-mode generator is not Hermitian (defect {herm:.3e})")
        self.generator = G
        self.w, self.U = np.linalg.eigh(G)
        self._e1_row = np.ascontiguousarray(np.conj(self.U[..., 0, :])) / math.sqrt(metric[0])

    @property
    def components(self) -> int:
        return self.spec.components

    def to_eigen(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients ``(c, Nt, Nx)`` to eigen-amplitudes ``(Nt, Nx, c)``."""
        z = np.moveaxis(coeffs, 0, -1) * np.sqrt(self.metric)
        return np.einsum("...ji,...j->...i", np.conj(self.U), z)

    def from_eigen(self, a: np.ndarray) -> np.ndarray:
        z = np.einsum("...ij,...j->...i", self.U, a) / np.sqrt(self.metric)
        return np.moveaxis(z, -1, 0)

    def source_amplitudes(self, rho_hat: np.ndarray) -> np.ndarray:
        """Eigen-amplitudes of the forcing ``rho_hat e1`` (phi row only)."""
        return self._e1_row * rho_hat[..., None]

    def propagate(self, coeffs: np.ndarray, ds: float) -> np.ndarray:
        return self.from_eigen(np.exp(self.w * ds) * self.to_eigen(coeffs))

    def min_abs_eigenvalue(self) -> tuple[float, tuple[int, int]]:
        a = np.min(np.abs(self.w), axis=-1)
        i, j = np.unravel_index(int(np.argmin(a)), a.shape)
        return float(a[i, j]), (int(self.grid.m[i]), int(self.grid.k[j]))

    def equilibrium(self, rho_hat: np.ndarray) -> np.ndarray:
        """``-G^{-1} rho_hat e1`` mode by mode; requires every G(m, k) invertible."""
        low, where = self.min_abs_eigenvalue()
        if low < 1e-12 * max(1.0, float(np.max(np.abs(self.w)))):
            raise ValueError(f"mode matrix is singular at (m, k) = {where}")
        return self.from_eigen(-self.source_amplitudes(rho_hat) / self.w)


# -- residuals ---------------------------------------------------------------


def residual(spec: hm.HamiltonianSpec, Z, grid: TorusGrid, source=0.0) -> np.ndarray:
    """Floer field ``-(P1 d_t + P2 d_x) Z + grad S(Z)`` on the grid nodes.

    P is (K1, K2) for three components and (M1, M2) for four. The flow is
    ``d_s Z = residual``; a periodic solution has zero residual.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.shape[0] != spec.components:
        raise ValueError(f"{spec.kind} expects {spec.components} components, got {Z.shape[0]}")
    P1, P2 = operator_pair(spec.operator)
    dt, dx = differentiate(Z, grid)
    PZ = np.einsum("ij,j...->i...", P1, dt) + np.einsum("ij,j...->i...", P2, dx)
    return -PZ + hm.grad_S(spec, Z, source)


_WAVE = hm.HamiltonianSpec("bridges_wave")


def epsilon_family_residual(epsilon: float, Z4, grid: TorusGrid) -> np.ndarray:
    """Residual of the interpolating family between the degenerate and regular flows.

    Rows 2 and 3 carry the o couplings multiplied by epsilon and row 4 is
    ``epsilon (pi2_t - pi1_x)``. The density is ``1/2 pi1^2 - 1/2 pi2^2``.
    At epsilon = 1 this is :func:`residual` for ``bridges_wave``.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon == 1.0:
        return residual(_WAVE, Z4, grid)
    Z = np.asarray(Z4, dtype=float)
    P1, P2 = _interpolated_pair(4, epsilon)
    dt, dx = differentiate(Z, grid)
    PZ = np.einsum("ij,j...->i...", P1, dt) + np.einsum("ij,j...->i...", P2, dx)
    return -PZ + hm.grad_S(_WAVE, Z)


# -- single steps ------------------------------------------------------------


def floer_step_exact(state: SpectralState, ds: float, system: ModeSystem) -> SpectralState:
    """Advance a source-free linear flow by ``exp(G ds)`` in every mode."""
    if ds == 0:
        return state
    return state.replace(system.propagate(state.coeffs, ds))


def stable_projection(state: SpectralState, system: ModeSystem) -> SpectralState:
    """Remove the eigencomponents along which the forward flow grows."""
    a = system.to_eigen(state.coeffs)
    a = np.where(system.w > 0, 0.0, a)
    return state.replace(system.from_eigen(a))


def _source_hat(spec: hm.HamiltonianSpec, grid: TorusGrid, s: float) -> np.ndarray:
    if not spec.has_source:
        return np.zeros(grid.shape, dtype=complex)
    return np.fft.fft2(hm.source_field(spec, grid, s)) / (grid.Nt * grid.Nx)


def floer_step_coupled(
    state: SpectralState,
    s: float,
    ds: float,
    system: ModeSystem,
    quasi_static: bool = False,
) -> SpectralState:
    """One exponential-Euler step of the coupled flow from s to s + ds.

    The linear part is propagated exactly and the source, frozen at s, enters
    through ``ds phi1(w ds)``. With ``quasi_static=True`` the growing
    directions are reset to the frozen-source equilibrium afterwards, which
    keeps a forward-only integration bounded. A :class:`StepSizeWarning` is
    issued if the projected step increases the residual norm.
    """
    rho = _source_hat(system.spec, system.grid, s)
    b = system.source_amplitudes(rho)
    a = system.to_eigen(state.coeffs)
    z = system.w * ds
    new = np.exp(z) * a + ds * _phi1(z) * b
    if quasi_static:
        rho1 = _source_hat(system.spec, system.grid, s + ds)
        b1 = system.source_amplitudes(rho1)
        new = np.where(system.w > 0, -b1 / np.where(system.w > 0, system.w, 1.0), new)
        before = np.sum(np.abs(system.w * a + b) ** 2)
        after = np.sum(np.abs(system.w * new + b1) ** 2)
        if after > before * (1.0 + 1e-12) + 1e-300:
            warnings.warn(f"dissipation increased over the step at s = {s}", StepSizeWarning, stacklevel=2)
    return state.replace(system.from_eigen(new))


def asymptotic_limit(rho_plus: SpectralState, spec: hm.HamiltonianSpec | None = None) -> SpectralState:
    """Frozen-source equilibrium ``Z+ = -B^{-1} rho+ e1`` of the coupled flow.

    ``rho_plus`` holds the Fourier coefficients of the limiting source. The
    per-mode generator of the coupled flow is ``-B(m, k)``.
    """
    spec = spec or hm.HamiltonianSpec("coupled")
    system = ModeSystem(rho_plus.grid, spec)
    coeffs = system.equilibrium(rho_plus.coeffs[0])
    return SpectralState(rho_plus.grid, coeffs)


# -- initial data ------------------------------------------------------------


def initial_data(
    recipe: str,
    grid: TorusGrid,
    components: int,
    *,
    seed: int = 0,
    amplitude: float = 1.0,
    band: int | None = None,
    wave_mode: tuple[int, int] = (1, 1),
    mass: float = 0.0,
    path: str | None = None,
) -> SpectralState:
    """Build initial coefficients from a named recipe.

    ``random_mean_zero`` draws node values from :class:`~polyfloer.rng.LinearRNG`
    in C order, then removes the mean and the Nyquist rows (and, with
    ``band``, every mode with ``|m|`` or ``|k|`` above it).
    ``certified_wave_solution`` sets ``phi = A cos(R m t) cos(k x)`` with
    ``pi1 = phi_t``, ``pi2 = phi_x``, ``o = 0``; it needs ``(R m)^2 - k^2 = mass``.
    ``custom`` loads a ``.npy`` array of coefficients shaped ``(c, Nt, Nx)``.
    """
    shape = (components,) + grid.shape
    if recipe == "zero":
        return SpectralState(grid, np.zeros(shape, dtype=complex))
    if recipe == "counterexample":
        t, x = grid.mesh()
        vals = np.zeros(shape)
        vals[1] = amplitude * np.cos(x)
        return dft_forward(FieldState(grid, vals))
    if recipe == "random_mean_zero":
        vals = LinearRNG(seed).uniform(shape, -amplitude, amplitude)
        s = zero_nyquist(mean_zero_project(dft_forward(FieldState(grid, vals))))
        if band is not None:
            mm, kk = grid.lattice()
            c = s.coeffs.copy()
            c[:, (np.abs(mm) > band) | (np.abs(kk) > band)] = 0.0
            s = s.replace(c)
        return s
    if recipe == "certified_wave_solution":
        if components != 4:
            raise ValueError("the certified wave solution has four components")
        m, k = wave_mode
        omega = grid.R * m
        if abs(omega**2 - k**2 - mass) > 1e-12 * max(1.0, omega**2):
            raise ValueError(
                f"(R m)^2 - k^2 = {omega**2 - k**2!r} differs from mass {mass!r}; "
                "cos(R m t) cos(k x) is not a periodic solution"
            )
        t, x = grid.mesh()
        vals = np.zeros(shape)
        vals[0] = amplitude * np.cos(omega * t) * np.cos(k * x)
        vals[1] = -amplitude * omega * np.sin(omega * t) * np.cos(k * x)
        vals[2] = -amplitude * k * np.cos(omega * t) * np.sin(k * x)
        return dft_forward(FieldState(grid, vals))
    if recipe == "custom":
        if path is None:
            raise ValueError("custom initial data needs a coefficient file")
        c = np.load(path)
        if c.shape != shape:
            raise ValueError(f"coefficient file has shape {c.shape}, expected {shape}")
        return SpectralState(grid, c)
    raise ValueError(f"unknown initial-data recipe {recipe!r}; expected one of {RECIPES}")


# -- trajectories ------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    """Diagnostics at every recorded s.

    ``energy`` is the integral of the dissipation from 0 to s, accumulated
    exactly over each step; ``work`` is the integral of
    ``integral phi d_s(source) dV`` (zero without a moving source). Along a
    Floer curve ``action(0) - action(s) = energy(s) + work(s)``.
    """

    s_values: list[float] = field(default_factory=list)
    action_values: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    work: list[float] = field(default_factory=list)
    sobolev_norms: dict[int, list[float]] = field(default_factory=lambda: {h: [] for h in SOBOLEV_ORDERS})
    distance_to_limit: dict[int, list[float]] = field(default_factory=dict)
    particle_distance: list[float] = field(default_factory=list)
    mode_amplitudes: dict[tuple[int, int], list[float]] = field(default_factory=dict)
    autonomous: bool = True
    notes: list[str] = field(default_factory=list)
    final_state: SpectralState | None = None

    def columns(self) -> dict[str, list[float]]:
        cols = {
            "s": self.s_values,
            "action": self.action_values,
            "dissipation": self.dissipation,
            "energy": self.energy,
            "work": self.work,
        }
        for h, v in self.sobolev_norms.items():
            cols[f"sobolev_{h}"] = v
        for h, v in self.distance_to_limit.items():
            cols[f"distance_{h}"] = v
        if self.particle_distance:
            cols["particle_distance"] = self.particle_distance
        for (m, k), v in self.mode_amplitudes.items():
            cols[f"mode_{m}_{k}"] = v
        return cols

    def energy_defect(self) -> np.ndarray:
        """``(A(0) - A(s)) - (energy(s) + work(s))`` at every record."""
        a = np.asarray(self.action_values)
        return (a[0] - a) - (np.asarray(self.energy) + np.asarray(self.work))

    def max_window_defect(self, window: float = 1.0) -> float:
        """Largest energy-identity defect accumulated over any s-window of the given length."""
        s = np.asarray(self.s_values)
        d = self.energy_defect()
        worst = 0.0
        j = 0
        for i in range(len(s)):
            while s[i] - s[j] > window + 1e-12:
                j += 1
            worst = max(worst, float(np.max(np.abs(d[j : i + 1] - d[i]))))
        return worst

    def action_monotone(self, tol: float = 0.0) -> bool:
        a = np.asarray(self.action_values)
        return bool(np.all(np.diff(a) <= tol * np.maximum(1.0, np.abs(a[1:]))))


@dataclass
class FlowProblem:
    grid: TorusGrid
    spec: hm.HamiltonianSpec
    initial: SpectralState
    config: FlowConfig = field(default_factory=FlowConfig)
    limit: SpectralState | None = None


def _node_values(system: ModeSystem, a: np.ndarray) -> np.ndarray:
    return dft_inverse(SpectralState(system.grid, system.from_eigen(a))).values


class _Recorder:
    def __init__(self, problem: FlowProblem, system: ModeSystem):
        self.p = problem
        self.system = system
        self.rec = TrajectoryRecord(autonomous=not problem.spec.has_source)
        if problem.limit is not None:
            self.rec.distance_to_limit = {h: [] for h in LIMIT_ORDERS}
        self.rec.mode_amplitudes = {mk: [] for mk in problem.config.track_modes}
        g = problem.grid
        self.symbols = derivative_symbols(g)
        self.weights = {h: sobolev_weights(g, h) for h in SOBOLEV_ORDERS}
        if self.system.epsilon != 1.0 and self.system.components == 4:
            self.spec = _WAVE
            self.pair = _interpolated_pair(4, self.system.epsilon)
        else:
            self.spec = problem.spec
            self.pair = operator_pair(problem.spec.operator)

    def _norm(self, coeffs: np.ndarray, h: int) -> float:
        # same reduction order as sobolev_norm, with cached weights
        return math.sqrt(float(np.sum(self.weights[h] * np.sum(np.abs(coeffs) ** 2, axis=0))))

    def __call__(self, s: float, a: np.ndarray, energy: float, work: float):
        p, system, rec = self.p, self.system, self.rec
        coeffs = system.from_eigen(a)
        if not np.all(np.isfinite(coeffs)):
            raise FlowDivergence(s)
        state = SpectralState(p.grid, coeffs)
        g = p.grid
        wt, wx = self.symbols
        # node values and both derivatives from one batched inverse transform
        nodes = np.fft.ifft2(np.stack([coeffs, wt * coeffs, wx * coeffs]) * (g.Nt * g.Nx), axes=(-2, -1)).real
        src = hm.source_field(p.spec, g, s) if p.spec.has_source else 0.0
        r, act = self._residual_and_action(nodes, src)
        rec.s_values.append(float(s))
        rec.action_values.append(act)
        rec.dissipation.append(float(np.sum(r * r / system.metric[:, None, None]) * p.grid.cell_volume))
        rec.energy.append(float(energy))
        rec.work.append(float(work))
        for h in SOBOLEV_ORDERS:
            rec.sobolev_norms[h].append(self._norm(coeffs, h))
        if p.limit is not None:
            diff = coeffs - p.limit.coeffs
            for h in LIMIT_ORDERS:
                rec.distance_to_limit[h].append(self._norm(diff, h))
        if p.spec.has_source:
            rec.particle_distance.append(max(pp.distance_to_limit(s) for pp in p.spec.particles))
        for mk, vals in rec.mode_amplitudes.items():
            vals.append(float(np.linalg.norm(state.at(*mk))))
        rec.final_state = state

    def _residual_and_action(self, nodes, src) -> tuple[np.ndarray, float]:
        # the interpolating family is the gradient flow of its own action
        Z, dt, dx = nodes
        P1, P2 = self.pair
        PZ = np.einsum("ij,j...->i...", P1, dt) + np.einsum("ij,j...->i...", P2, dx)
        r = -PZ + hm.grad_S(self.spec, Z, src)
        integrand = 0.5 * np.sum(PZ * Z, axis=0) - hm.density(self.spec, Z, src)
        return r, float(np.sum(integrand) * self.p.grid.cell_volume)


def _step_dissipation(w: np.ndarray, r0: np.ndarray, ds: float, vol: float) -> float:
    """Exact integral over one step of ``vol * sum |r|^2`` with ``r(sigma) = exp(w sigma) r0``."""
    occupied = r0 != 0
    if not np.any(occupied):
        return 0.0
    return vol * float(np.sum(np.abs(r0[occupied]) ** 2 * ds * _phi1(2.0 * w[occupied] * ds)))


def _advance(w: np.ndarray, a: np.ndarray, span: float) -> np.ndarray:
    """``exp(w span) a``, leaving empty directions empty even where the exponential overflows."""
    out = np.zeros_like(a)
    occupied = a != 0
    with np.errstate(over="ignore", invalid="ignore"):
        out[occupied] = np.exp(w[occupied] * span) * a[occupied]
    return out


def run_flow(problem: FlowProblem) -> TrajectoryRecord:
    """Integrate from s = 0 to ``s_max`` and record diagnostics every ``record_stride`` steps."""
    cfg = problem.config
    if problem.initial.components != problem.spec.components:
        raise ValueError("initial data and Hamiltonian disagree on the number of components")
    system = ModeSystem(problem.grid, problem.spec, cfg.epsilon)
    if problem.spec.has_source:
        return _run_coupled(problem, system)
    return _run_linear(problem, system)


def _run_linear(problem: FlowProblem, system: ModeSystem) -> TrajectoryRecord:
    cfg = problem.config
    vol = problem.grid.volume
    record = _Recorder(problem, system)
    a = system.to_eigen(problem.initial.coeffs)
    if cfg.stable_projection:
        a = np.where(system.w > 0, 0.0, a)
    n = cfg.n_steps
    energy = 0.0
    record(0.0, a, energy, 0.0)
    done = 0
    while done < n:
        k = min(cfg.record_stride, n - done)
        span = k * cfg.ds
        energy += _step_dissipation(system.w, system.w * a, span, vol)
        a = _advance(system.w, a, span)
        done += k
        record(done * cfg.ds, a, energy, 0.0)
    return record.rec


def _run_coupled(problem: FlowProblem, system: ModeSystem) -> TrajectoryRecord:
    cfg = problem.config
    g = problem.grid
    vol = g.volume
    ds = cfg.ds
    n = cfg.n_steps
    w = system.w
    norm = g.Nt * g.Nx

    def forcing(s):
        rho = _source_hat(problem.spec, g, s)
        drho = np.fft.fft2(hm.source_field_ds(problem.spec, g, s)) / norm
        return system.source_amplitudes(rho), system.source_amplitudes(drho)

    def work_rate(a, db):
        # vol * Re sum conj(phi_hat) d_s rho_hat, split over eigencomponents
        return vol * float(np.sum((np.conj(a) * db).real))

    records = set(range(0, n + 1, cfg.record_stride)) | {n}

    def forward(a, wd, mask):
        energy = np.zeros(n + 1)
        work = np.zeros(n + 1)
        b, db = forcing(0.0)
        rate = work_rate(a, db)
        kept = {0: a}
        z = wd * ds
        grow, push, weight = np.exp(z), ds * _phi1(z), vol * ds * _phi1(2.0 * z)
        for i in range(1, n + 1):
            bm = np.where(mask, b, 0.0)
            energy[i] = energy[i - 1] + float(np.sum(np.abs(wd * a + bm) ** 2 * weight))
            a = grow * a + push * bm
            b, db = forcing(i * ds)
            new_rate = work_rate(a, db)
            work[i] = work[i - 1] + 0.5 * ds * (rate + new_rate)
            rate = new_rate
            if i in records:
                kept[i] = a
        return kept, energy, work

    def backward(a, wu, mask):
        tail_energy = np.zeros(n + 1)
        tail_work = np.zeros(n + 1)
        b, db = forcing(n * ds)
        rate = work_rate(a, db)
        kept = {n: a}
        z = wu * ds
        shrink, pull, weight = np.exp(-z), ds * _phi1(-z), vol * ds * _phi1(2.0 * z)
        for i in range(n - 1, -1, -1):
            b, db = forcing(i * ds)
            bm = np.where(mask, b, 0.0)
            a = shrink * a - pull * bm
            tail_energy[i] = tail_energy[i + 1] + float(np.sum(np.abs(wu * a + bm) ** 2 * weight))
            new_rate = work_rate(a, db)
            tail_work[i] = tail_work[i + 1] + 0.5 * ds * (rate + new_rate)
            rate = new_rate
            if i in records:
                kept[i] = a
        return kept, tail_energy[0] - tail_energy, tail_work[0] - tail_work

    a0 = system.to_eigen(problem.initial.coeffs)
    if not cfg.stable_projection:
        kept, e_tot, w_tot = forward(a0, w, np.ones(w.shape, dtype=bool))

        def total(i):
            return kept[i]

    else:
        grow = w > 0
        # decaying directions run forward from the initial data
        down, e_down, wk_down = forward(np.where(grow, 0.0, a0), np.where(grow, 0.0, w), ~grow)
        # growing directions run backward from the frozen-source equilibrium at s_max
        b_end, _ = forcing(n * ds)
        safe = np.where(grow, w, 1.0)
        up, e_up, wk_up = backward(np.where(grow, -b_end / safe, 0.0), np.where(grow, w, 0.0), grow)

        def total(i):
            return down[i] + up[i]

        e_tot, w_tot = e_down + e_up, wk_down + wk_up

    record = _Recorder(problem, system)
    for i in sorted(records):
        record(i * ds, total(i), e_tot[i], w_tot[i])
    return record.rec


def slowest_occupied_mode(state: SpectralState, system: ModeSystem, rel_tol: float = 1e-10):
    """Mode (m, k) and rate of the slowest decaying eigencomponent present in ``state``."""
    a = system.to_eigen(state.coeffs)
    scale = float(np.max(np.abs(a)))
    occupied = (np.abs(a) > rel_tol * scale) & (system.w < 0)
    if not np.any(occupied):
        raise ValueError("state has no decaying eigencomponents")
    rates = np.where(occupied, -system.w, np.inf)
    i, j, c = np.unravel_index(int(np.argmin(rates)), rates.shape)
    return (int(system.grid.m[i]), int(system.grid.k[j])), float(rates[i, j, c])


# -- rigidity sweep ----------------------------------------------------------


@dataclass
class WaveKernelReport:
    R: float
    N: int
    min_value: float
    argmin: tuple[int, int]
    zeros: list[tuple[int, int]]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "N": self.N,
            "min_value": self.min_value,
            "argmin": list(self.argmin),
            "zeros": [list(z) for z in self.zeros],
            "passed": self.passed,
        }


def free_wave_symbol(m, k, R: float):
    """Symbol ``R^2 m^2 - k^2`` of the free wave operator on mode (m, k)."""
    return (R * np.asarray(m, dtype=float)) ** 2 - np.asarray(k, dtype=float) ** 2


def free_wave_kernel_check(R: float, N: int) -> WaveKernelReport:
    """Sweep ``|R^2 m^2 - k^2|`` over ``0 < |m|, |k| <= N``.

    The symbol of the free wave operator on mode (m, k) vanishes only at the
    origin when R is irrational; any other zero is reported.
    """
    m = np.arange(1, N + 1, dtype=float)[:, None]
    k = np.arange(1, N + 1, dtype=float)[None, :]
    vals = np.abs(free_wave_symbol(m, k, R))
    tol = 64.0 * np.finfo(float).eps * np.maximum((R * m) ** 2, k**2)
    i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
    zeros = [(int(a) + 1, int(b) + 1) for a, b in zip(*np.nonzero(vals <= tol))]
    return WaveKernelReport(
        R=R,
        N=N,
        min_value=float(vals[i, j]),
        argmin=(int(i) + 1, int(j) + 1),
        zeros=zeros,
        passed=not zeros,
    )
