import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsvtemu import emulator
from qsvtemu.emulator import (
    FastEncoding,
    StateVector,
    apply_dense,
    apply_fast,
    apply_hadamard,
    apply_prepare,
    apply_query_oracle,
    apply_swap,
    dense_unitary,
    dump_state,
    extract_block,
    load_state,
)
from qsvtemu.encoders import arcsin_encode, encode, fable_encode
from qsvtemu.errors import InputError, SizeCapError
from qsvtemu.matrices import SparseMatrix, laplacian


def _state(nq, seed):
    r = np.random.default_rng(seed)
    v = r.standard_normal(1 << nq) + 1j * r.standard_normal(1 << nq)
    return v / np.linalg.norm(v)


@pytest.fixture(params=["python", "cython"])
def each_backend(request):
    old = emulator.backend()
    try:
        emulator.set_backend(request.param)
    except ImportError:
        pytest.fail("cython extension not built")
    yield request.param
    emulator.set_backend(old)


def test_hadamard_and_swap():
    v = np.zeros(4, dtype=complex)
    v[0] = 1
    apply_hadamard(v, 0)
    assert np.allclose(v, [2**-0.5, 0, 2**-0.5, 0])
    apply_swap(v, 0, 1)
    assert np.allclose(v, [2**-0.5, 2**-0.5, 0, 0])


def test_query_oracle_matches_dense(each_backend):
    a = SparseMatrix.from_dense(np.random.default_rng(2).uniform(-1, 1, (4, 4)))
    th = 2 * np.arcsin(a.to_dense())
    v = _state(5, 0)
    w = v.copy()
    apply_query_oracle(w, th, "arcsin")
    # reference: per-index 2x2 rotation then X on the ancilla
    ref = v.reshape(2, 16).copy()
    c, s = np.cos(th.ravel() / 2), np.sin(th.ravel() / 2)
    r0 = c * ref[0] - s * ref[1]
    r1 = s * ref[0] + c * ref[1]
    assert np.allclose(w.reshape(2, 16), np.stack([r1, r0]))
    apply_query_oracle(w, th, "arcsin", adjoint=True)
    assert np.allclose(w, v)


def test_oracle_size_mismatch():
    with pytest.raises(InputError):
        apply_query_oracle(np.zeros(8, dtype=complex), np.zeros((4, 4)))


def test_prepare_amplitudes(each_backend):
    p = np.array([0.1, 0.2, 0.3, 0.4])
    v = np.zeros(4, dtype=complex)
    v[0] = 1
    apply_prepare(v, p)
    assert np.allclose(np.abs(v) ** 2, p)
    apply_prepare(v, p, adjoint=True)
    assert np.allclose(v, [1, 0, 0, 0])


def test_prepare_rejects_bad_probs():
    with pytest.raises(InputError):
        apply_prepare(np.zeros(4, dtype=complex), [0.5, 0.6, 0, 0])


@settings(max_examples=25, deadline=None)
@given(scheme=st.sampled_from(["arcsin", "fable", "prepare_select"]), n=st.integers(1, 3),
       seed=st.integers(0, 2**31))
def test_fast_matches_dense(scheme, n, seed):
    r = np.random.default_rng(seed)
    d = r.uniform(-1, 1, (1 << n, 1 << n)) * (r.random((1 << n, 1 << n)) < 0.6)
    d[0, 0] = 0.5
    c = encode(SparseMatrix.from_dense(d), scheme)
    v = _state(c.n_qubits, seed)
    for adj in (False, True):
        assert np.allclose(apply_fast(c, v.copy(), adj), apply_dense(c, v, adj), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(scheme=st.sampled_from(["arcsin", "fable", "prepare_select"]), seed=st.integers(0, 2**31))
def test_unitarity_and_norm(scheme, seed):
    d = np.random.default_rng(seed).uniform(-1, 1, (4, 4))
    c = encode(SparseMatrix.from_dense(d), scheme)
    u = dense_unitary(c)
    assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)
    v = _state(c.n_qubits, seed)
    assert abs(np.linalg.norm(apply_fast(c, v.copy())) - 1) < 1e-12


def test_backends_agree():
    c = encode(laplacian("l2d_4x4_dddd"), "prepare_select")
    v = _state(c.n_qubits, 5)
    old = emulator.backend()
    emulator.set_backend("python")
    a = apply_fast(c, v.copy())
    emulator.set_backend("cython")
    b = apply_fast(c, v.copy())
    emulator.set_backend(old)
    assert np.allclose(a, b, atol=1e-13)


def test_unknown_backend():
    with pytest.raises(InputError):
        emulator.set_backend("gpu")


def test_dense_cap():
    c = arcsin_encode(laplacian("l3d_4x8x8_dnrrdd").__class__.from_dense(np.eye(256) * 0.5))
    with pytest.raises(SizeCapError):
        dense_unitary(c)


def test_extract_block_methods_agree():
    c = fable_encode(SparseMatrix.from_dense(np.random.default_rng(0).uniform(-1, 1, (4, 4))))
    assert np.allclose(extract_block(c, "fast"), extract_block(c, "dense"), atol=1e-13)
    with pytest.raises(InputError):
        extract_block(c, "magic")


def test_fast_batch_layout():
    c = arcsin_encode(SparseMatrix.from_dense(np.eye(2) * 0.5))
    fe = FastEncoding(c)
    v = np.stack([_state(3, 0), _state(3, 1)])
    ref = apply_dense(c, v)
    fe.apply(v)
    assert np.allclose(v, ref)


@pytest.mark.parametrize("text", [False, True])
def test_state_round_trip(tmp_path, text):
    s = StateVector(_state(4, 3), {"signal": (0,), "system": (1, 2, 3)})
    p = tmp_path / "s.bin"
    dump_state(s, p, text=text)
    t = load_state(p)
    assert np.array_equal(t.amplitudes, s.amplitudes)
    assert t.layout == s.layout


def test_state_bad_version(tmp_path):
    p = tmp_path / "s.bin"
    dump_state(StateVector(_state(2, 0)), p)
    raw = bytearray(p.read_bytes())
    raw[4] = 9
    p.write_bytes(bytes(raw))
    with pytest.raises(InputError):
        load_state(p)
