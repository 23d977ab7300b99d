import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polyfloer import flow as fl
from polyfloer import hamiltonians as hm
from polyfloer import spectral as sp
from polyfloer.kernels import _fallback, bump_profile

from conftest import random_smooth_field

SQRT2 = math.sqrt(2.0)
TWO_PI = 2 * math.pi
RHO = hm.Mollifier()
finite = st.floats(-3, 3, allow_nan=False)


# -- mollifier ---------------------------------------------------------------


def test_mollifier_support_and_peak():
    r = RHO.radius
    assert r == pytest.approx(math.pi / 4)
    assert RHO(0.0) == pytest.approx(1.0)
    y = np.linspace(r, math.pi, 50)
    assert np.all(RHO(y) == 0) and np.all(RHO(-y) == 0)
    near = np.array([r - 1e-3, -(r - 1e-3)])
    assert np.all(RHO(near) < 1e-10)
    assert np.all(np.abs(RHO.derivative(near)) < 1e-10)


def test_mollifier_is_periodic():
    y = np.linspace(-3, 3, 31)
    assert np.allclose(RHO(y + TWO_PI), RHO(y), atol=1e-13)


def test_mollifier_derivative_matches_differences():
    y = np.linspace(-0.7, 0.7, 41)
    h = 1e-6
    fd = (RHO(y + h) - RHO(y - h)) / (2 * h)
    assert np.max(np.abs(fd - RHO.derivative(y))) < 1e-7


@pytest.mark.parametrize("r", [0.0, math.pi, -1.0])
def test_mollifier_radius_range(r):
    with pytest.raises(ValueError):
        hm.Mollifier(r)


def test_mollifier_fourier_vs_quadrature():
    n = 20000
    y = np.arange(n) * TWO_PI / n - math.pi
    for k in (0, 1, 5, -3):
        direct = np.sum(RHO(y) * np.exp(-1j * k * y)) / n
        assert abs(RHO.fourier(k) - direct) < 1e-12
    assert RHO.total_charge == pytest.approx(TWO_PI * RHO.fourier(0).real)
    with pytest.raises(ValueError):
        RHO.fourier(5000)


def test_mollifier_is_smooth_to_high_order():
    k = np.arange(1, 200)
    coeffs = np.abs(RHO.fourier(k))
    assert np.all(np.isfinite(np.sum((k**2.0) ** 8 * coeffs**2)))
    assert coeffs[-1] < 1e-6 * coeffs[0]


def test_bump_backends_agree():
    y = np.linspace(-10, 10, 1001)
    assert np.max(np.abs(bump_profile(y, 0.7, TWO_PI) - _fallback.bump_profile(y, 0.7, TWO_PI))) < 1e-15


# -- densities and gradients ---------------------------------------------------


def test_zero_kind_has_no_gradient():
    Z = np.random.default_rng(1).standard_normal((4, 5))
    assert not np.any(hm.grad_S(hm.HamiltonianSpec("zero"), Z))
    assert not np.any(hm.grad_S(hm.HamiltonianSpec("zero", components=3), Z[:3]))


def test_coupled_gradient_outside_support():
    spec = hm.HamiltonianSpec("coupled")
    Z = np.array([1.0, 0, 0, 0])
    src = RHO(2.0)  # q - x outside (-r, r)
    assert np.array_equal(hm.grad_S(spec, Z, src), [1.0, 0, 0, 0])
    assert np.array_equal(hm.grad_S(spec, np.array([1.0, 2, 3, 4]), 0.5), [1.5, 2, -3, -4])


def test_free_gradients_as_printed():
    assert np.array_equal(hm.grad_S(hm.HamiltonianSpec("bridges_free"), np.array([0, 2.0, 3.0, 0])), [0, 2, 3, 0])
    assert np.array_equal(hm.grad_S(hm.HamiltonianSpec("ddw_free"), np.array([5.0, 2.0, 3.0])), [0, 2, -3])


def test_spec_validation():
    with pytest.raises(ValueError):
        hm.HamiltonianSpec("wave")
    with pytest.raises(ValueError):
        hm.HamiltonianSpec("ddw_free", components=4)
    with pytest.raises(ValueError):
        hm.HamiltonianSpec("coupled", components=3)
    with pytest.raises(ValueError):
        hm.grad_S(hm.HamiltonianSpec("bridges_free"), np.zeros(3))


@pytest.mark.parametrize("kind", hm.KINDS)
@given(arrays(float, 4, elements=finite), finite)
def test_gradient_matches_differences_of_density(kind, z, src):
    spec = hm.HamiltonianSpec(kind, mass=0.7 if kind == "bridges_wave" else 0.0)
    z = z[: spec.components]
    g = hm.grad_S(spec, z, src)
    h = 1e-5
    for i in range(spec.components):
        e = np.zeros_like(z)
        e[i] = h
        fd = (hm.density(spec, z + e, src) - hm.density(spec, z - e, src)) / (2 * h)
        assert fd == pytest.approx(g[i], rel=1e-7, abs=1e-7)


@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite), finite)
def test_coupled_gradient_is_affine(a, b, src):
    spec = hm.HamiltonianSpec("coupled")
    g = lambda z: hm.grad_S(spec, z, src)  # noqa: E731
    assert np.allclose(g(a + b) - g(a) - g(b) + g(np.zeros(4)), 0, atol=1e-12)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_potential_is_bounded(t, q):
    V = hm.Potential(0.5, TWO_PI / SQRT2)
    assert abs(V(t, q)) <= 0.5
    assert V(t + V.T, q) == pytest.approx(V(t, q), abs=1e-12)


# -- particle side -------------------------------------------------------------


def test_convolution_of_constant_is_total_charge():
    f = np.ones(128)
    for q in (-1.0, 0.3, 2.5):
        assert hm.convolve(f, RHO, q) == pytest.approx(RHO.total_charge, rel=1e-12)


def test_convolution_single_mode():
    x = np.arange(128) * TWO_PI / 128
    q = np.linspace(-3, 3, 7)
    got = hm.convolve(np.cos(3 * x), RHO, q)
    expected = TWO_PI * RHO.fourier(3).real * np.cos(3 * q)
    assert np.allclose(got, expected, atol=1e-13)


@pytest.mark.parametrize("f", [np.sin, lambda x: np.exp(np.cos(x)), lambda x: np.exp(-8 * (1 - np.cos(x)))])
def test_convolution_vs_quadrature(f):
    x = np.arange(256) * TWO_PI / 256
    for q in (0.0, 1.1, -2.7):
        assert hm.convolve(f(x), RHO, q) == pytest.approx(hm.convolve_quadrature(f, RHO, q), abs=1e-8)


def test_particle_gradient_examples():
    phi0 = np.zeros(64)
    assert np.allclose(hm.grad_H_particle(0.3, 1.0, 0.7, phi0, RHO), [0.0, 0.7])
    V = hm.Potential(0.5, TWO_PI / SQRT2)
    out = hm.grad_H_particle(0.3, 1.0, 0.7, np.full(64, 2.5), RHO, V)
    assert np.allclose(out, [V.derivative(0.3, 1.0), 0.7], atol=1e-12)
    x = np.arange(64) * TWO_PI / 64
    c = TWO_PI * RHO.fourier(1).real
    out = hm.grad_H_particle(0.0, 0.9, 0.0, np.cos(x), RHO)
    assert out[0] == pytest.approx(-c * math.sin(0.9), abs=1e-12)


def test_path_limits_and_wrapping():
    p = hm.ParticlePath(rest=3.0, offset=0.5)
    assert p.distance_to_limit(0.0) == 0.5
    assert p.distance_to_limit(10.0) == pytest.approx(0.5 * math.exp(-10))
    assert -math.pi < float(p.q(0.0, 0.0, 1.0)) <= math.pi
    assert p.dq_ds(0.0) == -0.5
    with pytest.raises(ValueError):
        hm.ParticlePath(velocity=1.0)
    with pytest.raises(ValueError):
        hm.ParticlePath(velocity=0.5, amplitude=0.1)
    with pytest.raises(ValueError):
        hm.ParticlePath(rate=0.0)


def test_unboosted_source_is_a_translated_bump():
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    spec = hm.HamiltonianSpec("coupled", particles=(hm.ParticlePath(rest=0.4),))
    t, x = g.mesh()
    assert np.allclose(hm.source_field(spec, g, math.inf), RHO(0.4 - x), atol=1e-15)


def test_two_particle_source_is_a_sum():
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    a, b = hm.ParticlePath(rest=0.4), hm.ParticlePath(rest=-2.0)
    both = hm.source_field(hm.HamiltonianSpec("coupled", particles=(a, b)), g, 1.0)
    one = hm.source_field(hm.HamiltonianSpec("coupled", particles=(a,)), g, 1.0)
    two = hm.source_field(hm.HamiltonianSpec("coupled", particles=(b,)), g, 1.0)
    assert np.allclose(both, one + two, atol=1e-15)


def test_boost_fixes_the_origin():
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    path = hm.ParticlePath(velocity=0.5)
    spec = hm.HamiltonianSpec("coupled", particles=(path,))
    assert hm.source_field(spec, g, math.inf)[0, 0] == pytest.approx(1.0)


def test_unboosted_source_is_time_periodic():
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    spec = hm.HamiltonianSpec("coupled", particles=(hm.ParticlePath(amplitude=0.3, offset=0.2),))
    assert hm.periodicity_defect(spec, g, 0.5) < 1e-12


def test_boost_compatibility():
    from polyfloer.diophantine import COUPLED_RATIO

    g = sp.TorusGrid.from_ratio(COUPLED_RATIO, 32)
    good = hm.ParticlePath(velocity=COUPLED_RATIO / 2, windings=2)
    bad = hm.ParticlePath(velocity=0.3)
    assert good.compatible(g.T) and not bad.compatible(g.T)
    assert hm.periodicity_defect(hm.HamiltonianSpec("coupled", particles=(good,)), g) < 1e-12
    assert hm.periodicity_defect(hm.HamiltonianSpec("coupled", particles=(bad,)), g) > 1e-3


def test_source_derivative_matches_differences():
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    spec = hm.HamiltonianSpec("coupled", particles=(hm.ParticlePath(offset=0.5),))
    h = 1e-6
    fd = (hm.source_field(spec, g, 0.3 + h) - hm.source_field(spec, g, 0.3 - h)) / (2 * h)
    assert np.max(np.abs(fd - hm.source_field_ds(spec, g, 0.3))) < 1e-6


# -- actions -------------------------------------------------------------------


def test_action_of_constant_field():
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    spec = hm.HamiltonianSpec("bridges_free")
    c = np.array([1.0, 2.0, -1.0, 3.0])
    Z = np.broadcast_to(c[:, None, None], (4, 8, 8))
    assert hm.action(spec, Z, g) == pytest.approx(-g.volume * hm.density(spec, c))


def test_action_of_cosine_state_vanishes():
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    t, x = g.mesh()
    Z = np.zeros((4,) + g.shape)
    Z[1] = np.cos(x)
    for form in ("matrix", "primitive"):
        assert abs(hm.action(hm.HamiltonianSpec("zero"), Z, g, form=form)) < 1e-14


@pytest.mark.parametrize("components", [3, 4])
def test_kinetic_forms_have_equal_integrals(components, rng):
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    Z = random_smooth_field(g, components, rng)
    a = np.sum(hm.kinetic_density(Z, g, "matrix"))
    b = np.sum(hm.kinetic_density(Z, g, "primitive"))
    assert a == pytest.approx(b, rel=1e-11, abs=1e-11)
    with pytest.raises(ValueError):
        hm.kinetic_density(Z, g, "other")


@pytest.mark.parametrize("kind", ["ddw_free", "bridges_free", "bridges_wave", "coupled"])
def test_directional_derivative_is_minus_residual(kind, rng):
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    spec = hm.HamiltonianSpec(kind, mass=1.0 if kind == "bridges_wave" else 0.0)
    Z = random_smooth_field(g, spec.components, rng)
    V = random_smooth_field(g, spec.components, rng)
    src = 0.3 * np.cos(g.mesh()[1])
    h = 1e-5
    fd = (hm.action(spec, Z + h * V, g, src) - hm.action(spec, Z - h * V, g, src)) / (2 * h)
    pairing = -np.sum(fl.residual(spec, Z, g, src) * V) * g.cell_volume
    assert fd == pytest.approx(pairing, rel=1e-6)


def test_batched_action_matches_single(rng):
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    spec = hm.HamiltonianSpec("bridges_free")
    Zs = rng.standard_normal((3, 4, 8, 8))
    batch = hm.action_batch(spec, Zs, g)
    assert np.allclose(batch, [hm.action(spec, Z, g) for Z in Zs], rtol=1e-12)
    with pytest.raises(ValueError):
        hm.action_batch(spec, Zs[0], g)


# -- infinite-dimensional picture ------------------------------------------------


def test_constant_slice_has_zero_hamiltonian():
    spec = hm.HamiltonianSpec("zero")
    Z = np.ones((4, 32)) * 0.7
    assert hm.infinite_dim_hamiltonian(Z, spec) == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(hm.infinite_dim_gradient(Z, spec), 0, atol=1e-14)


def test_m2_dx_is_self_adjoint(rng):
    x = np.arange(64) * TWO_PI / 64
    for _ in range(5):
        f = sum(rng.standard_normal((4, 1)) * np.cos(j * x + rng.uniform(0, 6)) for j in range(1, 8))
        g = sum(rng.standard_normal((4, 1)) * np.cos(j * x + rng.uniform(0, 6)) for j in range(1, 8))
        assert hm.selfadjoint_defect(f, g) < 1e-12


def test_slice_gradient_matches_differences(rng):
    spec = hm.HamiltonianSpec("bridges_free")
    x = np.arange(32) * TWO_PI / 32
    Z = rng.standard_normal((4, 1)) * np.sin(x) + rng.standard_normal((4, 1)) * np.cos(2 * x)
    V = sum(rng.standard_normal((4, 1)) * np.cos(j * x + 0.3 * j) for j in range(1, 4))
    h = 1e-5
    fd = (hm.infinite_dim_hamiltonian(Z + h * V, spec) - hm.infinite_dim_hamiltonian(Z - h * V, spec)) / (2 * h)
    pairing = np.sum(hm.infinite_dim_gradient(Z, spec) * V) * TWO_PI / 32
    assert abs(pairing) > 1e-3
    assert fd == pytest.approx(pairing, rel=1e-8)


def test_time_derivative_plus_slice_gradient_is_the_residual(rng):
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    spec = hm.HamiltonianSpec("bridges_free")
    Z = random_smooth_field(g, 4, rng)
    dt, _ = sp.differentiate(Z, g)
    M1 = sp.operator_pair("M")[0]
    rebuilt = -np.einsum("ij,jab->iab", M1, dt) + np.stack(
        [hm.infinite_dim_gradient(Z[:, i, :], spec) for i in range(g.Nt)], axis=1
    )
    assert np.max(np.abs(rebuilt - fl.residual(spec, Z, g))) < 1e-11
