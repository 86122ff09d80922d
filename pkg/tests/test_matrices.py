import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsvtemu.errors import InputError
from qsvtemu.matrices import (
    LaplacianSpec,
    SparseMatrix,
    ToeplitzSpec,
    classical_solve,
    gen_laplacian,
    gen_toeplitz,
    hermitian_dilation,
    laplacian,
    max_norm_scale,
    pad_to_pow2,
    pad_vector,
    periodic_tridiagonal,
    read_matrix_market,
    read_vector,
    rhs_polynomial,
    spectral_stats,
    toeplitz_eigenvalues,
    toeplitz_for_kappa,
    toeplitz_kappa_to_b,
    write_matrix_market,
    write_vector,
)

# bisection on (1 + 2b cos(pi/33)) / (1 - 2b cos(pi/33)) = kappa, solved in closed form:
# b = (kappa - 1) / (2 cos(pi/33) (kappa + 1))
B_28_8 = 0.468564650035008
B_2_125 = 0.1808187613516393


def test_toeplitz_b_matches_closed_form():
    t = math.cos(math.pi / 33)
    for kappa, frozen in [(28.8, B_28_8), (2.125, B_2_125)]:
        closed = (kappa - 1) / (2 * t * (kappa + 1))
        assert closed == pytest.approx(frozen, abs=1e-14)
        assert toeplitz_kappa_to_b(32, 1.0, kappa) == pytest.approx(frozen, abs=1e-12)


def test_toeplitz_kappa_one_and_infeasible():
    assert toeplitz_kappa_to_b(10, 1.0, 1.0) == 0.0
    with pytest.raises(InputError):
        toeplitz_kappa_to_b(10, 1.0, 0.5)


def test_toeplitz_identity_when_b_zero():
    a = gen_toeplitz(ToeplitzSpec(4, 1.0, 0.0, 0.0))
    assert np.array_equal(a.to_dense(), np.eye(4))


def test_toeplitz_layout():
    d = gen_toeplitz(ToeplitzSpec(4, 2.0, 0.3, -0.7)).to_dense()
    assert d[1, 0] == 0.3 and d[0, 1] == -0.7 and d[2, 2] == 2.0


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 64), b=st.floats(0.0, 0.49), a=st.floats(0.5, 3.0))
def test_toeplitz_eigenvalue_formula(n, b, a):
    dense = gen_toeplitz(ToeplitzSpec(n, a, b, b)).to_dense()
    num = np.sort(np.linalg.eigvalsh(dense))
    ana = np.sort(toeplitz_eigenvalues(n, a, b, b))
    assert np.max(np.abs(num - ana)) < 1e-10


def test_toeplitz_for_kappa_negative_offdiagonal():
    a = toeplitz_for_kappa(32, 28.8)
    d = a.to_dense()
    assert d[1, 0] == pytest.approx(-B_28_8)
    assert spectral_stats(a).kappa == pytest.approx(28.8, rel=1e-9)
    # smooth mode sits at the bottom of the spectrum
    w, v = np.linalg.eigh(d)
    assert np.all(v[:, 0] * np.sign(v[0, 0]) > 0)


def test_spectral_stats_toeplitz_and_identity():
    st_ = spectral_stats(gen_toeplitz(ToeplitzSpec(32, 1.0, 0.46857, 0.46857)))
    assert st_.kappa == pytest.approx(28.8, rel=5e-3)
    assert spectral_stats(SparseMatrix.from_dense(np.eye(5))).kappa == 1.0


def test_spectral_stats_singular():
    s = spectral_stats(SparseMatrix.from_dense(np.array([[1.0, 0.0], [0.0, 0.0]])))
    assert math.isinf(s.kappa)


def test_periodic_matrix_displayed_form():
    d = periodic_tridiagonal(8).to_dense()
    expect = np.eye(8) - 0.5 * (np.eye(8, k=1) + np.eye(8, k=-1))
    expect[0, 7] = expect[7, 0] = -0.5
    assert np.array_equal(d, expect)


def test_laplacian_smallest_dirichlet():
    a = gen_laplacian(LaplacianSpec(1, (2,), ("dirichlet", "dirichlet")))
    d = a.to_dense()
    assert d.shape == (2, 2)
    assert np.count_nonzero(d - np.diag(np.diag(d))) == 0


def test_laplacian_name_parse_and_sizes():
    # nnz frozen from the cell-centred construction (see notes)
    for name, n, nnz in [("l1d_8_dd", 8, 20), ("l2d_4x4_dddd", 16, 32), ("l2d_8x8_ddrr", 64, 220),
                         ("l3d_4x8x8_dnrrdd", 256, 748)]:
        a = laplacian(name)
        assert a.shape == (n, n)
        assert a.nnz == nnz


def test_laplacian_1d_stencil():
    # h = 1/6: interior 2/h^2, face coupling 2/h^2, Dirichlet face rows decoupled
    d = laplacian("l1d_8_dd").to_dense()
    assert np.allclose(d[3, 2:5], [-36.0, 72.0, -36.0])
    assert np.allclose(d[1, :3], [-72.0, 108.0, -36.0])
    assert d[0, 0] == 72.0 and np.count_nonzero(d[0]) == 1
    assert not laplacian("l2d_4x4_dddd").is_symmetric()


def test_laplacian_bad_tag():
    with pytest.raises(InputError):
        laplacian("l1d_8_dx")


def test_hermitian_dilation_scalar():
    h = hermitian_dilation(SparseMatrix.from_dense(np.array([[2.0]]))).to_dense()
    assert np.array_equal(h, [[0, 2], [2, 0]])
    assert np.allclose(np.sort(np.linalg.eigvalsh(h)), [-2, 2])


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 2**31))
def test_dilation_symmetric_and_singular_values(n, seed):
    g = np.random.default_rng(seed).standard_normal((n, n))
    h = hermitian_dilation(SparseMatrix.from_dense(g))
    d = h.to_dense()
    assert np.array_equal(d, d.T)
    sv = np.sort(np.linalg.svd(g, compute_uv=False))
    hv = np.sort(np.abs(np.linalg.eigvalsh(d)))
    assert np.allclose(hv, np.sort(np.concatenate([sv, sv])), atol=1e-10)


def test_pad_to_pow2():
    assert pad_to_pow2(SparseMatrix.from_dense(np.eye(3))).to_dense().tolist() == np.eye(4).tolist()
    a = laplacian("l1d_8_dd")
    assert pad_to_pow2(a) is a or np.array_equal(pad_to_pow2(a).to_dense(), a.to_dense())
    big = SparseMatrix.from_dense(np.eye(76) * 2.0)
    assert pad_to_pow2(big).shape == (128, 128)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 12), seed=st.integers(0, 2**31))
def test_pad_preserves_solution(n, seed):
    r = np.random.default_rng(seed)
    g = r.standard_normal((n, n)) + n * np.eye(n)
    b = r.standard_normal(n)
    a = SparseMatrix.from_dense(g)
    p = pad_to_pow2(a)
    x = classical_solve(p, pad_vector(b, p.nrows))
    assert np.allclose(x[:n], np.linalg.solve(g, b), atol=1e-10)
    assert np.allclose(x[n:], 0.0)


def test_max_norm_scale_down_and_up():
    a = SparseMatrix.from_dense(np.array([[4.0, 1.0], [0.0, 2.0]]))
    s, b, f = max_norm_scale(a, np.array([4.0, 8.0]))
    assert f == 4.0 and s.max_abs == 1.0 and np.array_equal(b, [1.0, 2.0])
    s2, _, f2 = max_norm_scale(SparseMatrix.from_dense(np.array([[0.5, 0.0], [0.0, 0.25]])))
    assert f2 == 0.5 and s2.max_abs == 1.0


def test_max_norm_scale_zero():
    with pytest.raises(InputError):
        max_norm_scale(SparseMatrix.from_dense(np.zeros((2, 2))))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 10), seed=st.integers(0, 2**31), scale=st.floats(1e-3, 1e3))
def test_max_norm_scale_preserves_solution(n, seed, scale):
    r = np.random.default_rng(seed)
    g = scale * (r.standard_normal((n, n)) + n * np.eye(n))
    b = r.standard_normal(n)
    a = SparseMatrix.from_dense(g)
    s, bs, _ = max_norm_scale(a, b)
    x0 = classical_solve(a, b)
    x1 = classical_solve(s, bs)
    assert np.linalg.norm(x0 - x1) <= 1e-12 * max(1.0, np.linalg.norm(x0)) * 10


def test_rhs_polynomial():
    b = rhs_polynomial(32)
    x = np.arange(32) / 31
    assert np.allclose(b, 16 * x**3 - 24 * x**2 + 9 * x, atol=0, rtol=0)
    assert b[0] == 0.0
    b5 = rhs_polynomial(5)  # x = 0.75 is a double root
    assert abs(b5[3]) < 1e-15


def test_classical_solve_methods():
    a = laplacian("l1d_8_dd")
    b = rhs_polynomial(8)
    xl = classical_solve(a, b)
    xc = classical_solve(a, b, method="cg")
    assert np.linalg.norm(xl - xc) / np.linalg.norm(xl) < 1e-8
    t = toeplitz_for_kappa(32, 28.8)
    bt = rhs_polynomial(32)
    x = classical_solve(t, bt)
    assert np.linalg.norm(t.tocsr() @ x - bt) / np.linalg.norm(bt) <= 1e-10
    i = SparseMatrix.from_dense(np.eye(4))
    assert np.array_equal(classical_solve(i, np.arange(4.0)), np.arange(4.0))


def test_matrix_market_round_trip(tmp_path):
    a = laplacian("l2d_8x8_ddrr")
    p = tmp_path / "a.mtx"
    write_matrix_market(a, p)
    b = read_matrix_market(p)
    assert np.array_equal(a.to_dense(), b.to_dense())


def test_matrix_market_one_based(tmp_path):
    p = tmp_path / "m.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 3.0\n2 1 -1.5\n")
    d = read_matrix_market(p).to_dense()
    assert d[0, 0] == 3.0 and d[1, 0] == -1.5


def test_matrix_market_bad_index(tmp_path):
    p = tmp_path / "bad.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n")
    with pytest.raises(InputError):
        read_matrix_market(p)


def test_vector_round_trip(tmp_path):
    v = np.array([1.0, -2.5, 1e-300, 3.0])
    write_vector(v, tmp_path / "b.txt")
    assert np.array_equal(read_vector(tmp_path / "b.txt"), v)
