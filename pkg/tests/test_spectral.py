import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polyfloer import algebra
from polyfloer import spectral as sp

SQRT2 = math.sqrt(2.0)
small = st.integers(-12, 12)


def test_grid_basics():
    g = sp.TorusGrid.from_ratio(SQRT2, 8, 6)
    assert g.shape == (8, 6)
    assert g.R == pytest.approx(SQRT2)
    assert g.volume == pytest.approx(2 * math.pi * g.T)
    assert list(g.m) == [0, 1, 2, 3, -4, -3, -2, -1]
    assert g.index(-1, 2) == (7, 2)
    with pytest.raises(IndexError):
        g.index(4, 0)


@pytest.mark.parametrize("n", [7, 0, -2, 2.5])
def test_grid_rejects_bad_counts(n):
    with pytest.raises(ValueError):
        sp.TorusGrid(1.0, n, 8)


def test_grid_rejects_bad_period():
    with pytest.raises(ValueError):
        sp.TorusGrid(-1.0, 8, 8)


def test_cosine_has_two_coefficients():
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    t, x = g.mesh()
    vals = np.zeros((4,) + g.shape)
    vals[1] = np.cos(x)
    c = sp.dft_forward(sp.FieldState(g, vals)).coeffs
    expected = np.zeros_like(c)
    expected[1, 0, 1] = expected[1, 0, -1] = 0.5
    assert np.allclose(c, expected, atol=1e-15)


def test_zero_field():
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    assert not np.any(sp.dft_forward(sp.FieldState(g, np.zeros((4, 8, 8)))).coeffs)


def test_round_trip_and_parseval(rng):
    g = sp.TorusGrid.from_ratio(SQRT2, 16, 8)
    vals = rng.standard_normal((4, 16, 8))
    f = sp.FieldState(g, vals)
    s = sp.dft_forward(f)
    back = sp.dft_inverse(s).values
    assert np.max(np.abs(back - vals)) < 1e-12
    mean_square = np.mean(np.sum(vals**2, axis=0))
    assert sp.sobolev_norm(s, 0) ** 2 == pytest.approx(mean_square, rel=1e-12)
    assert s.hermitian_defect() < 1e-14


def test_field_state_shape_checks():
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    assert sp.FieldState(g, np.zeros((8, 8))).components == 1
    with pytest.raises(ValueError):
        sp.FieldState(g, np.zeros((2, 8, 6)))
    with pytest.raises(ValueError):
        sp.SpectralState(g, np.zeros((2, 6, 8)))


def test_mode_a_at_origin_is_zero():
    assert not np.any(sp.mode_operator_A(0, 0).matrix)


def test_mode_a_entries_at_one_zero():
    a = sp.mode_operator_A(1, 0, SQRT2).matrix
    expected = np.zeros((4, 4), dtype=complex)
    expected[0, 1] = -SQRT2 * 1j
    expected[1, 0] = SQRT2 * 1j
    expected[2, 3] = SQRT2 * 1j
    expected[3, 2] = -SQRT2 * 1j
    assert np.array_equal(a, expected)


def test_mode_a_spectrum_at_one_one():
    w = sp.mode_operator_A(1, 1, SQRT2).eigenvalues
    expected = np.sort([1 + SQRT2, -(1 + SQRT2), SQRT2 - 1, 1 - SQRT2])
    assert np.allclose(w, expected, atol=1e-14)
    l1, _, l2, _ = sp.closed_form_eigenvalues_A(1, 1, SQRT2)
    assert l1 == pytest.approx(2.41421356237, abs=1e-10)
    assert l2 == pytest.approx(0.41421356237, abs=1e-10)


def test_closed_form_a_at_origin():
    assert all(v == 0 for v in sp.closed_form_eigenvalues_A(0, 0))


def test_mode_b_at_origin_and_one_zero():
    assert np.allclose(sp.mode_operator_B(0, 0).eigenvalues, [-1, -1, 1, 1])
    l1, _, l2, _ = sp.closed_form_eigenvalues_B(1, 0, SQRT2)
    assert l1 == pytest.approx(SQRT2 + 1)
    assert l2 == pytest.approx(SQRT2 - 1)
    assert np.allclose(sp.mode_operator_B(1, 0, SQRT2).eigenvalues, np.sort([l1, -l1, l2, -l2]))


def test_mode_b_never_singular_for_coupled_ratio():
    from polyfloer.diophantine import COUPLED_RATIO

    r = np.arange(-64, 65)
    mm, kk = np.meshgrid(r, r, indexing="ij")
    _, _, l2, _ = sp.closed_form_eigenvalues_B(mm, kk, COUPLED_RATIO)
    assert l2.min() > 0


@given(small, small)
def test_closed_forms_match_eigensolver(m, k):
    for op, closed in ((sp.mode_operator_A, sp.closed_form_eigenvalues_A), (sp.mode_operator_B, sp.closed_form_eigenvalues_B)):
        mm = op(m, k, SQRT2)
        assert np.allclose(mm.eigenvalues, np.sort(closed(m, k, SQRT2)), atol=1e-10)
        assert mm.residual() < 1e-12
        v = mm.eigenvectors
        assert np.allclose(v.conj().T @ v, np.eye(4), atol=1e-10)


@given(small, small)
def test_mode_matrices_are_exactly_hermitian(m, k):
    a = sp.mode_operator_A(m, k, SQRT2).matrix
    b = sp.mode_operator_B(m, k, SQRT2).matrix
    assert np.array_equal(a, a.conj().T)
    assert np.array_equal(b, b.conj().T)


def test_mode_matrix_rejects_non_hermitian():
    with pytest.raises(ValueError):
        sp.ModeMatrix(np.array([[0, 1], [0, 0]]))


def test_m_operator_kills_constants():
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    s = sp.dft_forward(sp.FieldState(g, np.ones((4, 8, 8)) * np.arange(1, 5)[:, None, None]))
    assert np.max(np.abs(sp.apply_operator("M∂", s).coeffs)) < 1e-15


def test_k_operator_kills_the_cosine_state():
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    t, x = g.mesh()
    vals = np.zeros((3,) + g.shape)
    vals[1] = np.cos(x)
    out = sp.apply_operator("K∂", sp.dft_forward(sp.FieldState(g, vals)))
    assert np.max(np.abs(out.coeffs)) < 1e-15


def test_metric_maps_j_operator_to_m_operator(rng, grid16):
    s = sp.dft_forward(sp.FieldState(grid16, rng.standard_normal((4, 16, 16))))
    j = sp.apply_operator("J∂", s).coeffs
    m = sp.apply_operator("M∂", s).coeffs
    L = algebra.matrix("L")
    assert np.max(np.abs(np.einsum("ij,j...->i...", L, j) - m)) < 1e-12


def test_apply_operator_component_mismatch(grid16):
    s = sp.SpectralState(grid16, np.zeros((3, 16, 16)))
    with pytest.raises(ValueError):
        sp.apply_operator("M∂", s)
    with pytest.raises(ValueError):
        sp.apply_operator("Q∂", s)


def test_apply_operator_matches_node_derivatives(rng, grid16):
    from conftest import random_smooth_field

    Z = random_smooth_field(grid16, 4, rng)
    dt, dx = sp.differentiate(Z, grid16)
    M1, M2 = sp.operator_pair("M")
    expected = np.einsum("ij,j...->i...", M1, dt) + np.einsum("ij,j...->i...", M2, dx)
    got = sp.dft_inverse(sp.apply_operator("M∂", sp.dft_forward(sp.FieldState(grid16, Z)))).values
    assert np.max(np.abs(got - expected)) < 1e-12


def test_differentiate_single_mode():
    g = sp.TorusGrid.from_ratio(SQRT2, 16)
    t, x = g.mesh()
    f = np.sin(2 * g.R * t) * np.cos(3 * x)
    dt, dx = sp.differentiate(f, g)
    assert np.allclose(dt, 2 * g.R * np.cos(2 * g.R * t) * np.cos(3 * x), atol=1e-12)
    assert np.allclose(dx, -3 * np.sin(2 * g.R * t) * np.sin(3 * x), atol=1e-12)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_kernel_dimensions(n):
    g = sp.TorusGrid.from_ratio(SQRT2, n)
    assert sp.kernel_dimension("M∂", g) == 4
    assert sp.kernel_dimension("J∂", g) == 4
    # the (0, 0) block is zero; every other 3x3 block has rank exactly 2
    assert sp.kernel_dimension("K∂", g) == 3 + (n * n - 1)


def test_kernel_dimension_brute_force_small():
    # dense SVD of the whole block-diagonal operator as an independent count
    g = sp.TorusGrid.from_ratio(SQRT2, 4)
    P1, P2 = sp.operator_pair("K")
    wt, wx = sp.derivative_symbols(g, nyquist=True)
    blocks = sp.block_symbols(P1, P2, wt, wx).reshape(-1, 3, 3)
    n = blocks.shape[0]
    dense = np.zeros((3 * n, 3 * n), dtype=complex)
    for i, b in enumerate(blocks):
        dense[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = b
    sv = np.linalg.svd(dense, compute_uv=False)
    assert int(np.sum(sv < 1e-10 * sv.max())) == sp.kernel_dimension("K∂", g)


def test_kernel_dimension_threshold_must_be_positive(grid16):
    with pytest.raises(ValueError):
        sp.kernel_dimension("M∂", grid16, 0.0)


def test_sobolev_examples():
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    c = np.zeros((1, 8, 8), dtype=complex)
    c[(0,) + g.index(1, 2)] = 1.0
    s = sp.SpectralState(g, c)
    assert sp.sobolev_norm(s, 0) == 1.0
    assert sp.sobolev_norm(s, 1) == pytest.approx(math.sqrt(1 + 2 + 4))
    assert sp.sobolev_norm(s.replace(np.zeros_like(c)), 3) == 0.0
    with pytest.raises(ValueError):
        sp.sobolev_norm(s, -1)


def test_sobolev_order_one_of_cosine():
    # |cos|^2 + |d_x cos|^2 averaged over the torus = 1/2 + 1/2
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    t, x = g.mesh()
    s = sp.dft_forward(sp.FieldState(g, np.cos(x)))
    l2 = sp.sobolev_norm(s, 0)
    assert l2 == pytest.approx(math.sqrt(0.5))
    assert sp.sobolev_norm(s, 1) == pytest.approx(math.sqrt(2) * l2)


def test_mean_zero_projection():
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    const = sp.dft_forward(sp.FieldState(g, np.ones((4, 8, 8))))
    assert np.max(np.abs(sp.mean_zero_project(const).coeffs)) < 1e-15
    c = np.random.default_rng(0).standard_normal((4, 8, 8)) + 0j
    c[:, 0, 0] = [1, 2, 3, 4]
    s = sp.SpectralState(g, c)
    out = sp.mean_zero_project(s)
    expected = c.copy()
    expected[:, 0, 0] = 0
    assert np.array_equal(out.coeffs, expected)
    assert out.mean_zero
    assert np.array_equal(sp.mean_zero_project(out).coeffs, out.coeffs)
    only_o = sp.mean_zero_project(s, components=[3]).coeffs
    assert only_o[3, 0, 0] == 0 and only_o[0, 0, 0] == 1


@given(st.integers(0, 2**32 - 1))
def test_mean_zero_is_an_orthogonal_projection(seed):
    g = sp.TorusGrid.from_ratio(SQRT2, 8)
    r = np.random.default_rng(seed)
    s = sp.SpectralState(g, r.standard_normal((4, 8, 8)) + 1j * r.standard_normal((4, 8, 8)))
    p = sp.mean_zero_project(s)
    assert sp.sobolev_norm(p) <= sp.sobolev_norm(s)
    assert abs(sp.inner_product(p, s.replace(s.coeffs - p.coeffs))) < 1e-12


def test_zero_nyquist_keeps_derivatives_real(rng, grid16):
    s = sp.dft_forward(sp.FieldState(grid16, rng.standard_normal((4, 16, 16))))
    z = sp.zero_nyquist(s)
    assert not np.any(z.coeffs[:, grid16.nyquist_mask()])
    d = sp.apply_operator("M∂", z)
    assert d.hermitian_defect() < 1e-12


@pytest.mark.parametrize("eps", [0.0, 1.0])
def test_interpolated_blocks_at_the_ends(eps, grid16):
    from polyfloer.flow import _interpolated_pair

    P1, P2 = _interpolated_pair(4, eps)
    if eps == 1.0:
        Q1, Q2 = sp.operator_pair("M")
    else:
        Q1, Q2 = (algebra.embed3(k).astype(float) for k in sp.operator_pair("K"))
    wt, wx = sp.derivative_symbols(grid16)
    assert np.array_equal(sp.block_symbols(P1, P2, wt, wx), sp.block_symbols(Q1, Q2, wt, wx))


def test_padded_k_operator_differs_from_m_operator():
    Q1 = algebra.embed3(algebra.matrix("K1"))
    assert not np.array_equal(Q1, algebra.matrix("M1"))
