import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsvtemu.emulator import dense_unitary, extract_block
from qsvtemu.errors import InputError
from qsvtemu.encoders import (
    EncodingCircuit,
    Gate,
    LcuDecomposition,
    arcsin_encode,
    coalesce_hamming1,
    encode,
    fable_angles,
    fable_encode,
    fable_error_bound,
    fable_forward,
    fwht,
    kappa_s,
    op_counts,
    pauli_decompose,
    prepare_select_encode,
    trim_threshold,
)
from qsvtemu.matrices import SparseMatrix, hermitian_dilation, laplacian, periodic_tridiagonal


def _rand(n, seed, density=1.0):
    r = np.random.default_rng(seed)
    a = r.uniform(-1, 1, (n, n)) * (r.random((n, n)) < density)
    return SparseMatrix.from_dense(a)


def test_gate_validation():
    with pytest.raises(InputError):
        Gate("toffoli")
    with pytest.raises(InputError):
        Gate("mcry", 0.1, ((0, 1),), (0,))
    with pytest.raises(InputError):
        Gate("ry", math.nan, (), (0,))


def test_arcsin_block_and_s():
    a = _rand(4, 0, 0.6)
    c = arcsin_encode(a)
    assert c.s == 4.0 and c.n_anc == 3
    assert len(c.rotations()) == a.nnz
    assert np.allclose(extract_block(c, "dense"), a.to_dense() / 4, atol=1e-14)


def test_arcsin_rejects_large_entries():
    with pytest.raises(InputError):
        arcsin_encode(SparseMatrix.from_dense(np.array([[1.5, 0], [0, 1]])))


def test_fwht_involution():
    v = np.arange(8.0)
    assert np.allclose(fwht(fwht(v)) / 8, v)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_fable_angle_round_trip(n, seed):
    a = _rand(1 << n, seed)
    th = fable_angles(a)
    back = fable_forward(th)
    assert np.allclose(back, 2 * np.arccos(a.to_dense().ravel()), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_fable_block_exact_at_zero_threshold(n, seed):
    a = _rand(1 << n, seed, 0.7)
    blk = extract_block(fable_encode(a, 0.0), "dense")
    assert np.allclose(blk, a.to_dense() / (1 << n), atol=1e-12)


def test_fable_threshold_within_bound():
    a = laplacian("l1d_8_dd")
    from qsvtemu.matrices import max_norm_scale

    sa, _, _ = max_norm_scale(a)
    for dc in (1e-3, 1e-2, 5e-2):
        c = fable_encode(sa, dc)
        err = np.linalg.norm(sa.to_dense() - c.s * extract_block(c, "dense").real, 2)
        assert err <= fable_error_bound(3, dc) + 1e-12


def test_fable_periodic_zero_angles():
    th = fable_angles(periodic_tridiagonal(8))
    assert int(np.sum(np.abs(th) <= 1e-12)) == 52


def test_coalesce_preserves_block():
    # all-equal entries in two adjacent columns merge
    d = np.zeros((4, 4))
    d[:, 0] = d[:, 1] = 0.3
    d[2, 3] = -0.4
    a = SparseMatrix.from_dense(d)
    c = arcsin_encode(a)
    cc = coalesce_hamming1(c)
    assert len(cc.rotations()) < len(c.rotations())
    assert np.allclose(extract_block(cc, "dense"), extract_block(c, "dense"), atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_coalesce_random_preserves_block(seed):
    r = np.random.default_rng(seed)
    d = r.choice([0.0, 0.25, -0.5], size=(4, 4))
    if not d.any():
        d[0, 0] = 0.25
    a = SparseMatrix.from_dense(d)
    c = arcsin_encode(a)
    assert np.allclose(extract_block(coalesce_hamming1(c), "dense"), d / 4, atol=1e-14)


def test_trim_threshold_zero_is_identity():
    a = _rand(4, 3, 0.5)
    c = arcsin_encode(a)
    t = trim_threshold(c, 0.0)
    assert np.allclose(extract_block(t, "dense"), extract_block(c, "dense"))


def test_trim_threshold_drops_small():
    d = np.eye(4) * 0.9
    d[0, 1] = 1e-4
    c = trim_threshold(arcsin_encode(SparseMatrix.from_dense(d)), 1e-3)
    assert len(c.rotations()) == 4
    c2 = trim_threshold(arcsin_encode(SparseMatrix.from_dense(d)), 1e-3, conserve=True)
    assert np.allclose(c2.matrix.to_dense()[0, 0], 0.9 + 1e-4)


def test_trim_rejects_other_schemes():
    with pytest.raises(InputError):
        trim_threshold(fable_encode(_rand(2, 1)), 0.1)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_pauli_reconstruction(n, seed):
    g = np.random.default_rng(seed).uniform(-1, 1, (1 << n, 1 << n))
    h = g + g.T
    lcu = pauli_decompose(h)
    assert np.allclose(lcu.to_dense().real, h, atol=1e-12)
    assert all(t.alpha > 0 for t in lcu.terms)


def test_pauli_rejects_nonsymmetric():
    with pytest.raises(InputError):
        pauli_decompose(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_pauli_signs_absorbed():
    lcu = pauli_decompose(np.array([[-1.0, 0.0], [0.0, -1.0]]))
    assert lcu.m == 1 and lcu.terms[0].pauli == "I" and lcu.terms[0].sign_absorbed


def test_lcu_text_round_trip():
    lcu = pauli_decompose(np.diag([1.0, -3.0, 0.5, 2.0]))
    back = LcuDecomposition.from_text(lcu.to_text())
    assert np.allclose(back.to_dense(), lcu.to_dense())


def test_prepare_select_block():
    a = laplacian("l1d_8_dd")
    c = encode(a, "prepare_select")
    lcu = c.lcu
    blk = extract_block(c, "dense")
    assert np.allclose(c.s * blk, lcu.to_dense(), atol=1e-12)
    assert c.s == pytest.approx(lcu.alphas.sum())


def test_single_term_lcu():
    c = prepare_select_encode(pauli_decompose(np.eye(2) * 0.5))
    assert c.n_anc == 0 and np.allclose(extract_block(c, "dense"), np.eye(2))


def test_encode_unknown_scheme():
    with pytest.raises(InputError):
        encode(laplacian("l1d_8_dd"), "qrom")


def test_kappa_s_identity():
    i = SparseMatrix.from_dense(np.eye(8))
    assert kappa_s(i, "arcsin") == 8.0
    assert kappa_s(i, "fable") == 8.0


def test_op_counts_l1d():
    # frozen from the cell-centred l1d_8_dd build
    a = laplacian("l1d_8_dd")
    assert op_counts(encode(a, "arcsin")).raw_count == 20
    assert op_counts(encode(a, "fable")).raw_count == 32
    assert op_counts(encode(a, "prepare_select")).raw_count == 39
    assert op_counts(encode(a, "arcsin")).normalised == 1.0


def test_encoding_serialisation():
    c = encode(laplacian("l1d_8_dd"), "fable", delta_c=0.01)
    txt = c.to_text()
    assert txt.startswith("# scheme fable")
    import json

    d = json.loads(c.to_json())
    gates = [Gate.from_dict(g) for g in d["gates"]]
    assert gates == list(c.gates)
