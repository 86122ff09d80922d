"""State-vector application of encoding circuits.

Two paths are provided.  The dense reference path applies every gate of an
:class:`~qsvtemu.encoders.EncodingCircuit` to a tensor view of the state.  The
structured fast path applies the encoding as a handful of kernels: Hadamard
butterflies, qubit swaps, a per-index ancilla rotation for the query oracle,
multiplexed rotations for the prepare tree and Pauli permutations for select.

States are complex arrays whose last axis has length ``2**q``; leading axes
are treated as a batch.  Qubit 0 is the most significant index bit.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels_py
from .encoders import EncodingCircuit, LcuDecomposition, prepare_tree_angles
from .errors import InputError, SizeCapError

DENSE_CAP = 14
FAST_CAP = 26

if os.environ.get("QSVTEMU_PURE", "0") == "1":
    _K = _kernels_py
else:
    try:
        from . import _kernels as _K
    except ImportError:  # extension not built
        _K = _kernels_py


def backend() -> str:
    """Name of the active kernel backend, ``cython`` or ``python``."""
    return "python" if _K is _kernels_py else "cython"


def set_backend(name: str):
    """Switch kernels at runtime (``cython`` or ``python``)."""
    global _K
    if name == "python":
        _K = _kernels_py
    elif name == "cython":
        from . import _kernels

        _K = _kernels
    else:
        raise InputError(f"unknown backend {name!r}")


@dataclass
class StateVector:
    """Amplitudes plus a register map.

    Attributes:
        amplitudes: Complex array of length ``2**n_qubits``.
        layout: Register name to tuple of qubit indices.
    """

    amplitudes: np.ndarray
    layout: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return int(self.amplitudes.shape[-1]).bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self):
        return StateVector(self.amplitudes.copy(), dict(self.layout))


_MAGIC = b"QSVS"


def dump_state(state: StateVector, path, text: bool = False):
    """Write a state as binary (header + complex128) or as text lines ``k re im``."""
    path = Path(path)
    amp = np.ascontiguousarray(state.amplitudes, dtype="<c16").ravel()
    if text:
        head = f"# qubits {state.n_qubits}\n# layout {json.dumps({k: list(v) for k, v in state.layout.items()})}\n"
        body = "".join(f"{k} {float(a.real)!r} {float(a.imag)!r}\n" for k, a in enumerate(amp))
        path.write_text(head + body)
        return
    meta = json.dumps({k: list(v) for k, v in state.layout.items()}).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<III", 1, state.n_qubits, len(meta)) + meta)
        fh.write(amp.tobytes())


def load_state(path) -> StateVector:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == _MAGIC:
        ver, nq, ml = struct.unpack("<III", raw[4:16])
        if ver != 1:
            raise InputError(f"unsupported state version {ver}")
        layout = {k: tuple(v) for k, v in json.loads(raw[16:16 + ml]).items()}
        amp = np.frombuffer(raw[16 + ml:], dtype="<c16").copy()
        if amp.size != 1 << nq:
            raise InputError("state length does not match header")
        return StateVector(amp, layout)
    layout, vals = {}, []
    for line in raw.decode().splitlines():
        if line.startswith("# layout"):
            layout = {k: tuple(v) for k, v in json.loads(line[len("# layout"):]).items()}
        elif line and not line.startswith("#"):
            _, re_, im_ = line.split()
            vals.append(complex(float(re_), float(im_)))
    return StateVector(np.asarray(vals, dtype=complex), layout)


def _nq(arr) -> int:
    L = arr.shape[-1]
    q = L.bit_length() - 1
    if L != 1 << q:
        raise InputError("state length must be a power of two")
    return q


class _Work:
    """Contiguous (batch, L) complex view of a state, written back on exit."""

    def __init__(self, state):
        self.state = state
        arr = state.amplitudes if isinstance(state, StateVector) else state
        self.arr = arr
        v = arr.reshape(-1, arr.shape[-1]) if arr.flags.c_contiguous and arr.dtype == np.complex128 else None
        self.copied = v is None
        self.v = np.ascontiguousarray(arr, dtype=np.complex128).reshape(-1, arr.shape[-1]) if v is None else v

    def __enter__(self):
        return self.v

    def __exit__(self, *exc):
        if self.copied:
            self.arr[...] = self.v.reshape(self.arr.shape)
        return False


def apply_hadamard(state, q: int):
    """Hadamard on qubit ``q`` (2-sparse butterfly), in place."""
    with _Work(state) as v:
        nq = _nq(v)
        if not 0 <= q < nq:
            raise InputError(f"qubit {q} out of range")
        _K.hadamard(v, q, nq)
    return state


def apply_swap(state, q1: int, q2: int):
    """Swap qubits ``q1`` and ``q2`` (1-sparse permutation), in place."""
    with _Work(state) as v:
        nq = _nq(v)
        if not (0 <= q1 < nq and 0 <= q2 < nq):
            raise InputError("qubit index out of range")
        _K.swap_qubits(v, q1, q2, nq)
    return state


def apply_query_oracle(state, angles, variant: str = "arcsin", adjoint: bool = False):
    """Per-index ancilla rotation ``R_y(theta_ij)`` on the ``(anc, row, col)`` layout.

    Args:
        state: Array over ``2n + 1`` qubits (leading batch axes allowed).
        angles: ``N x N`` angle table indexed ``(row, col)``.
        variant: ``cos`` for the bare rotation, ``arcsin`` to fold the
            trailing X on the ancilla into the same update.
        adjoint: Apply the inverse.
    """
    th = np.ascontiguousarray(np.asarray(angles, dtype=float).ravel())
    c, s = np.cos(th / 2), np.sin(th / 2)
    with _Work(state) as v:
        if v.shape[-1] != 2 * th.size:
            raise InputError("angle table does not match the state size")
        _K.ry_oracle(v, c, s, variant == "arcsin", adjoint)
    return state


def apply_prepare(state, coefficients, adjoint: bool = False, tol: float = 1e-12):
    """Binary-tree loader on the leading ``ceil(log2 M)`` qubits.

    Args:
        state: Array whose last axis spans prepare then system qubits.
        coefficients: Probabilities ``alpha_i / s`` summing to 1.
        adjoint: Apply ``P^dag``.
    """
    p = np.asarray(coefficients, dtype=float)
    if p.min() < 0 or abs(p.sum() - 1.0) > tol:
        raise InputError("prepare coefficients must be non-negative and sum to 1")
    m = (p.size - 1).bit_length()
    levels = prepare_tree_angles(p, m)
    with _Work(state) as v:
        _apply_levels(v, levels, _nq(v), adjoint)
    return state


def _apply_levels(v, levels, nq, adjoint):
    seq = list(enumerate(levels))
    if adjoint:
        seq = seq[::-1]
    for lvl, th in seq:
        th = np.ascontiguousarray(th, dtype=float)
        _K.mux_ry(v, lvl, nq, np.cos(th / 2), np.sin(th / 2), adjoint)


def _pauli_masks(pauli: str):
    n = len(pauli)
    xm = zm = ny = 0
    for k, ch in enumerate(pauli):
        bit = 1 << (n - 1 - k)
        if ch in "XY":
            xm |= bit
        if ch in "ZY":
            zm |= bit
        if ch == "Y":
            ny += 1
    return xm, zm, 1j**ny


def apply_select(state, lcu: LcuDecomposition, adjoint: bool = False):
    """``S = sum_i |i><i| x U_i`` using one work vector.

    Padding indices ``i >= M`` act as the identity.
    """
    n = lcu.n
    m = (lcu.m - 1).bit_length()
    N = 1 << n
    with _Work(state) as v:
        if v.shape[-1] != 1 << (m + n):
            raise InputError("select register size mismatch")
        _select(v, lcu, m, n, adjoint)
    return state


def _select(v, lcu, m, n, adjoint, masks=None):
    N = 1 << n
    work = v.copy()
    masks = masks or [_pauli_masks(t.pauli) for t in lcu.terms]
    for i, (t, (xm, zm, ph)) in enumerate(zip(lcu.terms, masks)):
        # Pauli strings are Hermitian, so U_i^dag only conjugates the sign
        sign = complex(t.sign).conjugate() if adjoint else complex(t.sign)
        phase = sign * ph
        _K.pauli_apply(work, v, i * N, N, xm, zm, phase)
    v[...] = work


class FastEncoding:
    """Structured form of an encoding circuit for repeated application.

    Args:
        c: Circuit from :mod:`qsvtemu.encoders`.
    """

    def __init__(self, c: EncodingCircuit):
        if c.n_qubits > FAST_CAP:
            raise SizeCapError(f"{c.n_qubits} qubits exceeds fast-path cap {FAST_CAP}")
        self.c = c
        self.nq = c.n_qubits
        self.n = c.n_sys
        self.m = c.n_anc
        if c.scheme in ("arcsin", "fable"):
            theta, fold = oracle_angle_table(c)
            self.theta = theta
            self.fold_x = fold
            th = np.ascontiguousarray(theta.ravel())
            self.cos, self.sin = np.cos(th / 2), np.sin(th / 2)
        else:
            self.lcu = c.lcu
            self.levels = [np.ascontiguousarray(t) for t in c.meta["levels"]]
            self.lv_cs = [(np.cos(t / 2), np.sin(t / 2)) for t in self.levels]
            self.masks = [_pauli_masks(t.pauli) for t in c.lcu.terms]

    def apply(self, v, adjoint: bool = False):
        """Apply ``U`` (or ``U^dag``) in place to a contiguous ``(batch, 2**q)`` array."""
        if self.c.scheme == "prepare_select":
            self._ps(v, adjoint)
        else:
            self._qo(v, adjoint)
        return v

    def _had_rows(self, v):
        for q in range(1, self.n + 1):
            _K.hadamard(v, q, self.nq)

    def _swaps(self, v):
        for k in range(self.n):
            _K.swap_qubits(v, 1 + k, self.n + 1 + k, self.nq)

    def _qo(self, v, adjoint):
        self._had_rows(v)
        if adjoint:
            self._swaps(v)
        _K.ry_oracle(v, self.cos, self.sin, self.fold_x, adjoint)
        if not adjoint:
            self._swaps(v)
        self._had_rows(v)

    def _ps(self, v, adjoint):
        self._levels(v, False)
        _select(v, self.lcu, self.m, self.n, adjoint, self.masks)
        self._levels(v, True)

    def _levels(self, v, adj):
        seq = list(enumerate(self.lv_cs))
        if adj:
            seq = seq[::-1]
        for lvl, (c, s) in seq:
            _K.mux_ry(v, lvl, self.nq, c, s, adj)


def oracle_angle_table(c: EncodingCircuit):
    """Net per-index ancilla angle of a query-oracle circuit.

    Arcsin circuits: each ``mcry`` adds its angle on every index matching
    its control pattern.  FABLE circuits: walk the Gray-code sequence keeping
    the accumulated CNOT parity mask, so rotation ``k`` contributes
    ``(-1)**popcount(idx & mask) * theta_k``.

    Returns:
        Tuple ``(theta, fold_x)`` with ``theta`` of shape ``(N, N)``.
    """
    n = c.n_sys
    N = 1 << n
    idx = np.arange(N * N, dtype=np.int64)
    theta = np.zeros(N * N)
    fold = False
    mask = 0
    for g in c.gates:
        if g.kind == "mcry":
            sel = np.ones(N * N, dtype=bool)
            for q, p in g.controls:
                bit = 2 * n - q
                sel &= ((idx >> bit) & 1) == p
            theta[sel] += g.angle
        elif g.kind == "ry":
            par = np.zeros(N * N, dtype=np.int64)
            k = idx & mask
            while np.any(k):
                par ^= k & 1
                k >>= 1
            theta += g.angle * (1.0 - 2.0 * par)
        elif g.kind == "cnot":
            mask ^= 1 << (2 * n - g.controls[0][0])
        elif g.kind == "x" and g.targets == (0,):
            fold = True
    if mask:
        raise InputError("CNOT ladder does not close")
    return theta.reshape(N, N), fold


def apply_fast(c: EncodingCircuit, state, adjoint: bool = False):
    """Apply the structured form of ``c`` to ``state`` in place."""
    fe = FastEncoding(c)
    with _Work(state) as v:
        fe.apply(v, adjoint)
    return state


_SQ = {
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "cnot": np.array([[0, 1], [1, 0]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _apply_gate_dense(t, g, nq, adjoint):
    """Apply one gate to tensor ``t`` of shape ``(batch,) + (2,)*nq``."""
    if g.kind == "swap":
        a, b = g.targets
        return np.swapaxes(t, a + 1, b + 1).copy()
    sl = [slice(None)] * (nq + 1)
    cq = sorted(q for q, _ in g.controls)
    for q, p in g.controls:
        sl[q + 1] = p
    sub = t[tuple(sl)]

    def ax(q):
        return q + 1 - sum(1 for c in cq if c < q)

    def one(u, q):
        a = ax(q)
        sub[...] = np.moveaxis(np.tensordot(u, sub, axes=([1], [a])), 0, a)

    if g.kind in ("mcry", "ry"):
        one(_ry(-g.angle if adjoint else g.angle), g.targets[0])
    elif g.kind in ("h", "x", "cnot"):
        one(_SQ[g.kind], g.targets[0])
    elif g.kind == "cpauli":
        for q, ch in zip(g.targets, g.label):
            if ch != "I":
                one(_SQ[ch], q)
        sub *= np.exp(-1j * g.angle if adjoint else 1j * g.angle)
    else:
        raise InputError(f"gate kind {g.kind} has no dense form")
    return t


def apply_dense(c: EncodingCircuit, state, adjoint: bool = False, cap: int = DENSE_CAP):
    """Apply ``c`` gate by gate (reference path). Returns a new array."""
    nq = c.n_qubits
    if nq > cap:
        raise SizeCapError(f"{nq} qubits exceeds dense cap {cap}")
    arr = np.asarray(state, dtype=complex)
    shape = arr.shape
    t = arr.reshape((-1,) + (2,) * nq).copy()
    gates = reversed(c.gates) if adjoint else c.gates
    for g in gates:
        t = _apply_gate_dense(t, g, nq, adjoint)
    return t.reshape(shape)


def dense_unitary(c: EncodingCircuit, cap: int = DENSE_CAP):
    """Full ``2**q x 2**q`` unitary of ``c`` assembled gate by gate."""
    nq = c.n_qubits
    if nq > cap:
        raise SizeCapError(f"{nq} qubits exceeds dense cap {cap}")
    eye = np.eye(1 << nq, dtype=complex)
    return apply_dense(c, eye, cap=cap).T


def extract_block(c: EncodingCircuit, method: str = "fast", cap: int = DENSE_CAP):
    """Top-left ``N x N`` block ``(<0^m| x I) U (|0^m> x I)``.

    Args:
        c: Encoding circuit.
        method: ``fast`` (structured kernels) or ``dense`` (gate by gate).
        cap: Qubit cap for the dense method.

    Returns:
        Complex ``N x N`` array, expected to equal ``A/s``.
    """
    N = c.dim
    L = 1 << c.n_qubits
    basis = np.zeros((N, L), dtype=complex)
    basis[np.arange(N), np.arange(N)] = 1.0
    if method == "dense":
        out = apply_dense(c, basis, cap=cap)
    elif method == "fast":
        out = apply_fast(c, basis)
    else:
        raise InputError(f"unknown method {method!r}")
    return out[:, :N].T.copy()
