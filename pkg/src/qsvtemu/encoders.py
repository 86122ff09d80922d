"""Block-encoding circuits: arcsin query oracle, FABLE and prepare-select.

Qubit numbering is big-endian inside an encoding: qubit 0 is the most
significant bit of the amplitude index.  Query-oracle circuits (arcsin and
FABLE) use the register order ``(ancilla, row, col)`` with the column
register as the system; prepare-select uses ``(prepare, system)``.  In both
cases the flag qubits come first, so the encoded block is the leading
``N x N`` corner of the unitary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, SizeCapError
from .matrices import SparseMatrix, hermitian_dilation, max_norm_scale, pad_to_pow2, spectral_stats

SCHEMES = ("arcsin", "fable", "prepare_select")
GATE_KINDS = ("mcry", "ry", "cnot", "h", "swap", "x", "cpauli")
ANGLE_RTOL = 1e-12
MAX_LCU_TERMS = 1 << 16


@dataclass(frozen=True)
class Gate:
    """A single circuit element.

    Attributes:
        kind: One of ``GATE_KINDS``. ``cpauli`` applies the Pauli string in
            ``label`` to ``targets`` when the controls match, with an extra
            phase ``exp(i * angle)`` (``angle`` is 0 or pi for real LCUs).
        angle: Rotation angle in radians.
        controls: ``(qubit, polarity)`` pairs; polarity 1 fires on ``|1>``.
        targets: Target qubits.
        label: Pauli string for ``cpauli``.
    """

    kind: str
    angle: float = 0.0
    controls: tuple = ()
    targets: tuple = ()
    label: str = ""

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise InputError(f"unknown gate kind {self.kind!r}")
        cq = {q for q, _ in self.controls}
        if cq & set(self.targets):
            raise InputError("controls and targets overlap")
        if not math.isfinite(self.angle):
            raise InputError("gate angle must be finite")

    def to_text(self) -> str:
        ctl = ",".join(f"{q}:{p}" for q, p in self.controls) or "-"
        tgt = ",".join(str(q) for q in self.targets) or "-"
        line = f"{self.kind} {self.angle!r} {ctl} {tgt}"
        return f"{line} {self.label}" if self.label else line

    def to_dict(self):
        return {"kind": self.kind, "angle": self.angle, "controls": [list(c) for c in self.controls],
                "targets": list(self.targets), "label": self.label}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], float(d.get("angle", 0.0)), tuple(tuple(c) for c in d.get("controls", ())),
                   tuple(d.get("targets", ())), d.get("label", ""))


@dataclass(frozen=True)
class LcuTerm:
    alpha: float
    pauli: str
    sign: float = 1.0

    @property
    def sign_absorbed(self) -> bool:
        return self.sign < 0


@dataclass(frozen=True)
class LcuDecomposition:
    """``A_H = sum_i alpha_i U_i`` with ``alpha_i > 0`` and ``U_i = sign_i P_i``."""

    terms: tuple
    n: int

    @property
    def s(self) -> float:
        return float(sum(t.alpha for t in self.terms))

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def alphas(self):
        return np.array([t.alpha for t in self.terms])

    def to_dense(self):
        out = np.zeros((1 << self.n, 1 << self.n), dtype=complex)
        for t in self.terms:
            out += t.alpha * t.sign * pauli_matrix(t.pauli)
        return out

    def to_text(self) -> str:
        return "".join(f"{t.alpha * t.sign!r} {t.pauli}\n" for t in self.terms)

    @classmethod
    def from_text(cls, text: str):
        terms = []
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            c, p = line.split()
            c = float(c)
            terms.append(LcuTerm(abs(c), p, -1.0 if c < 0 else 1.0))
        if not terms:
            raise InputError("empty LCU")
        return cls(tuple(terms), len(terms[0].pauli))


@dataclass(frozen=True, eq=False)
class EncodingCircuit:
    """Gate list plus the metadata needed to interpret it.

    Attributes:
        scheme: ``arcsin``, ``fable`` or ``prepare_select``.
        gates: Ordered gates, applied first to last.
        n_sys: System qubits n.
        n_anc: Flag qubits m (ancilla plus row register, or prepare register).
        s: Subnormalisation.
        layout: Register name to qubit tuple.
        matrix: The matrix whose ``1/s`` multiple is the encoded block.
        lcu: LCU for prepare-select circuits.
    """

    scheme: str
    gates: tuple
    n_sys: int
    n_anc: int
    s: float
    layout: dict
    matrix: SparseMatrix | None = None
    lcu: LcuDecomposition | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return self.n_sys + self.n_anc

    @property
    def dim(self) -> int:
        return 1 << self.n_sys

    def rotations(self):
        return [g for g in self.gates if g.kind in ("mcry", "ry")]

    def replace(self, **kw):
        d = dict(scheme=self.scheme, gates=self.gates, n_sys=self.n_sys, n_anc=self.n_anc, s=self.s,
                 layout=self.layout, matrix=self.matrix, lcu=self.lcu, meta=dict(self.meta))
        d.update(kw)
        return EncodingCircuit(**d)

    def to_text(self) -> str:
        head = [f"# scheme {self.scheme}", f"# n_sys {self.n_sys}", f"# n_anc {self.n_anc}", f"# s {self.s!r}"]
        return "\n".join(head + [g.to_text() for g in self.gates]) + "\n"

    def to_json(self) -> str:
        return json.dumps({"scheme": self.scheme, "n_sys": self.n_sys, "n_anc": self.n_anc, "s": self.s,
                           "layout": {k: list(v) for k, v in self.layout.items()},
                           "gates": [g.to_dict() for g in self.gates]}, indent=1)


@dataclass(frozen=True)
class OpCountReport:
    scheme: str
    raw_count: int
    normaliser: int
    normalised: float


def _check_encodable(a: SparseMatrix):
    if a.nrows != a.ncols:
        raise InputError("encoders need a square matrix")
    n = a.nrows.bit_length() - 1
    if a.nrows != 1 << n:
        raise InputError("dimension must be a power of two (use pad_to_pow2)")
    if a.max_abs > 1.0 + 1e-14:
        raise InputError(f"max |a_ij| = {a.max_abs} exceeds 1 (use max_norm_scale)")
    return n


def _bits(v: int, width: int):
    return [(v >> (width - 1 - k)) & 1 for k in range(width)]


def _qo_layout(n):
    return {"ancilla": (0,), "row": tuple(range(1, n + 1)), "col": tuple(range(n + 1, 2 * n + 1))}


def _qo_wrap(n, middle):
    h = [Gate("h", targets=(q,)) for q in range(1, n + 1)]
    sw = [Gate("swap", targets=(1 + k, n + 1 + k)) for k in range(n)]
    return tuple(h + middle + sw + h)


def arcsin_encode(a: SparseMatrix) -> EncodingCircuit:
    """Query-oracle encoding with ``theta_ij = 2 asin(a_ij)`` and a trailing X.

    One multi-controlled ``R_y`` per nonzero, controlled on the row and column
    bit patterns, followed by X on the ancilla, row/column swaps and
    Hadamards on the row register.  Zero entries need no rotation since the
    X moves them out of the flagged subspace.

    Args:
        a: Square power-of-two matrix with ``max |a_ij| <= 1``.

    Returns:
        Circuit with ``s = N``.
    """
    n = _check_encodable(a)
    vals = np.clip(a.vals, -1.0, 1.0)
    rots = []
    for i, j, v in zip(a.rows.tolist(), a.cols.tolist(), vals.tolist()):
        ctl = tuple(zip(range(1, 2 * n + 1), _bits(i, n) + _bits(j, n)))
        rots.append(Gate("mcry", 2.0 * math.asin(v), ctl, (0,)))
    gates = _qo_wrap(n, rots + [Gate("x", targets=(0,))])
    return EncodingCircuit("arcsin", gates, n, n + 1, float(1 << n), _qo_layout(n), a,
                           meta={"variant": "arcsin"})


def _pattern(g: Gate, n):
    pat = [None] * (2 * n)
    for q, p in g.controls:
        pat[q - 1] = p
    return pat


def _angles_equal(x, y, rtol=ANGLE_RTOL):
    return abs(x - y) <= rtol * max(abs(x), abs(y))


def coalesce_hamming1(c: EncodingCircuit, rtol: float = ANGLE_RTOL) -> EncodingCircuit:
    """Merge equal-angle rotations whose control patterns differ in one bit.

    Rotations are scanned in gate order (ascending row-major bit value).  For
    each rotation the first later partner with an equal angle, the same
    wildcard set and exactly one differing control bit is merged into it, the
    differing control being dropped.  The lower-index member is kept.  Passes
    repeat until nothing merges.

    Args:
        c: Arcsin circuit.
        rtol: Relative tolerance for angle equality.

    Returns:
        New circuit encoding the same block.
    """
    if c.scheme != "arcsin":
        raise InputError("coalescence applies to arcsin circuits")
    n = c.n_sys
    idx = [k for k, g in enumerate(c.gates) if g.kind == "mcry"]
    rots = [[_pattern(c.gates[k], n), c.gates[k].angle] for k in idx]
    changed = True
    while changed:
        changed = False
        a = 0
        while a < len(rots):
            pa, ta = rots[a]
            for b in range(a + 1, len(rots)):
                pb, tb = rots[b]
                if not _angles_equal(ta, tb, rtol):
                    continue
                diff = [k for k in range(2 * n) if pa[k] != pb[k]]
                if len(diff) == 1 and pa[diff[0]] is not None and pb[diff[0]] is not None:
                    pa[diff[0]] = None
                    del rots[b]
                    changed = True
                    break
            a += 1
    new_rots = [Gate("mcry", t, tuple((k + 1, p) for k, p in enumerate(pat) if p is not None), (0,))
                for pat, t in rots]
    first, last = idx[0] if idx else 0, idx[-1] + 1 if idx else 0
    if not idx:
        return c
    gates = c.gates[:first] + tuple(new_rots) + c.gates[last:]
    return c.replace(gates=gates, meta={**c.meta, "coalesced": True})


def trim_threshold(c: EncodingCircuit, delta: float, conserve: bool = False) -> EncodingCircuit:
    """Drop arcsin rotations with ``|theta| <= delta``.

    Args:
        c: Arcsin circuit.
        delta: Angle threshold in radians. ``delta = 0`` only removes exact
            zero rotations, so the block is unchanged.
        conserve: Re-encode with each dropped entry added to its row's
            diagonal so row sums are kept (requires an uncoalesced circuit).

    Returns:
        Trimmed circuit.
    """
    if c.scheme != "arcsin":
        raise InputError("threshold trimming applies to arcsin circuits")
    if conserve:
        a = c.matrix.to_dense()
        small = (np.abs(2.0 * np.arcsin(np.clip(a, -1, 1))) <= delta) & (a != 0)
        for i, j in zip(*np.nonzero(small)):
            if i != j:
                a[i, i] += a[i, j]
            a[i, j] = 0.0
        if np.abs(a).max() > 1.0 + 1e-14:
            raise InputError("conservation repair pushed a diagonal above 1")
        return arcsin_encode(SparseMatrix.from_dense(a))
    gates = tuple(g for g in c.gates if not (g.kind == "mcry" and abs(g.angle) <= delta))
    return c.replace(gates=gates, meta={**c.meta, "delta": delta})


def gray(k):
    return k ^ (k >> 1)


def fwht(v):
    """Unnormalised fast Walsh-Hadamard transform along the last axis."""
    v = np.array(v, dtype=float, copy=True)
    n = v.shape[-1]
    if n & (n - 1):
        raise InputError("length must be a power of two")
    h = 1
    while h < n:
        v = v.reshape(v.shape[:-1] + (n // (2 * h), 2, h))
        a = v[..., 0, :] + v[..., 1, :]
        b = v[..., 0, :] - v[..., 1, :]
        v = np.stack([a, b], axis=-2).reshape(v.shape[:-3] + (n,))
        h *= 2
    return v


def fable_angles(a: SparseMatrix):
    """Compressed FABLE angles ``(1/N^2) P_G^T H theta``.

    ``theta`` holds ``2 acos(a_ij)`` in row-major order over all ``N^2``
    entries (row register high).  Entry ``k`` of the result is the angle
    applied at step ``k`` of the Gray-code sequence.
    """
    _check_encodable(a)
    theta = 2.0 * np.arccos(np.clip(a.to_dense().ravel(), -1.0, 1.0))
    w = fwht(theta) / theta.size
    return w[gray(np.arange(theta.size))]


def fable_forward(theta_hat):
    """Inverse of :func:`fable_angles`: recover ``theta`` from the Gray-ordered angles."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    w = np.empty_like(theta_hat)
    w[gray(np.arange(theta_hat.size))] = theta_hat
    return fwht(w)


def fable_encode(a: SparseMatrix, delta_c: float = 0.0) -> EncodingCircuit:
    """FABLE encoding with angle thresholding and CNOT cancellation.

    The multiplexed ``R_y`` over the ``2n`` index bits is written as ``N^2``
    uncontrolled rotations separated by CNOTs in Gray-code order.  Rotations
    with ``|theta_hat| <= delta_c`` are removed; the CNOTs between two kept
    rotations all target the ancilla and commute, so pairs with the same
    control cancel.

    Args:
        a: Square power-of-two matrix with ``max |a_ij| <= 1``.
        delta_c: Compression threshold.

    Returns:
        Circuit with ``s = N``.
    """
    n = _check_encodable(a)
    th = fable_angles(a)
    L = th.size
    middle = []
    pending = set()
    for k in range(L):
        if abs(th[k]) > delta_c:
            middle.extend(Gate("cnot", controls=((q, 1),), targets=(0,)) for q in sorted(pending))
            pending.clear()
            middle.append(Gate("ry", float(th[k]), (), (0,)))
        bit = (gray(k) ^ gray((k + 1) % L)).bit_length() - 1
        if L > 1:
            pending ^= {2 * n - bit}
    middle.extend(Gate("cnot", controls=((q, 1),), targets=(0,)) for q in sorted(pending))
    gates = _qo_wrap(n, middle)
    return EncodingCircuit("fable", gates, n, n + 1, float(1 << n), _qo_layout(n), a,
                           meta={"variant": "cos", "delta_c": delta_c})


def fable_error_bound(n: int, delta_c: float) -> float:
    """Spectral-norm bound ``N^3 delta_c`` on ``||A - s * block||``."""
    return float((1 << n) ** 3 * delta_c)


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def pauli_matrix(s: str):
    out = np.ones((1, 1), dtype=complex)
    for ch in s:
        out = np.kron(out, _PAULI[ch])
    return out


def pauli_decompose(ah, tol: float = 1e-14) -> LcuDecomposition:
    """Pauli-string coefficients of a real symmetric matrix.

    Uses recursive 2x2 block splitting: for ``M = [[A, B], [C, D]]`` the
    leading-qubit coefficients are ``I: (A+D)/2``, ``Z: (A-D)/2``,
    ``X: (B+C)/2`` and ``Y: i(B-C)/2``; zero sub-blocks are pruned.

    Args:
        ah: Symmetric :class:`SparseMatrix` or array of dimension ``2^n``.
        tol: Coefficients with modulus at or below ``tol`` are dropped.

    Returns:
        :class:`LcuDecomposition` with signs absorbed into the unitaries.

    Raises:
        InputError: Non-symmetric or non-power-of-two input.
    """
    d = ah.to_dense() if isinstance(ah, SparseMatrix) else np.asarray(ah, dtype=float)
    if d.shape[0] != d.shape[1] or not np.allclose(d, d.T, rtol=0, atol=1e-14):
        raise InputError("pauli_decompose needs a symmetric (Hermitian) matrix")
    n = d.shape[0].bit_length() - 1
    if d.shape[0] != 1 << n:
        raise InputError("dimension must be a power of two")
    coeffs = {}

    def rec(m, prefix):
        if not np.any(m):
            return
        if m.shape[0] == 1:
            coeffs[prefix] = complex(m[0, 0])
            return
        h = m.shape[0] // 2
        a, b, c, dd = m[:h, :h], m[:h, h:], m[h:, :h], m[h:, h:]
        rec((a + dd) / 2, prefix + "I")
        rec((b + c) / 2, prefix + "X")
        rec(1j * (b - c) / 2, prefix + "Y")
        rec((a - dd) / 2, prefix + "Z")

    rec(d.astype(complex), "")
    terms = []
    for p, c in coeffs.items():
        if abs(c) <= tol:
            continue
        if abs(c.imag) > 1e-12:
            raise InputError("complex Pauli coefficient for a real symmetric input")
        terms.append(LcuTerm(abs(c.real), p, 1.0 if c.real > 0 else -1.0))
    if not terms:
        raise InputError("zero matrix has no LCU")
    if len(terms) > MAX_LCU_TERMS:
        raise SizeCapError(f"{len(terms)} LCU terms exceeds cap {MAX_LCU_TERMS}")
    return LcuDecomposition(tuple(terms), n)


def prepare_tree_angles(alphas, m: int):
    """Binary-tree ``R_y`` angles loading ``sqrt(alpha_i / s)`` on ``m`` qubits.

    Returns:
        List over levels; level ``l`` is an array of ``2**l`` angles, one per
        prefix of the first ``l`` qubits.
    """
    amp2 = np.zeros(1 << m)
    alphas = np.asarray(alphas, dtype=float)
    amp2[: alphas.size] = alphas / alphas.sum()
    levels = []
    for lvl in range(m):
        w = amp2.reshape(1 << lvl, 2, -1).sum(axis=2)
        levels.append(2.0 * np.arctan2(np.sqrt(w[:, 1]), np.sqrt(w[:, 0])))
    return levels


def prepare_select_encode(lcu: LcuDecomposition) -> EncodingCircuit:
    """``U_A = (P^dag x I) S (P x I)`` for an LCU.

    Args:
        lcu: Decomposition with ``M`` terms; the prepare register has
            ``ceil(log2 M)`` qubits with zero-padded coefficients.

    Returns:
        Circuit with ``s = sum alpha_i``.
    """
    if lcu.m == 0:
        raise InputError("empty LCU")
    if lcu.m > MAX_LCU_TERMS:
        raise SizeCapError(f"{lcu.m} LCU terms exceeds cap {MAX_LCU_TERMS}")
    m = (lcu.m - 1).bit_length()
    n = lcu.n
    levels = prepare_tree_angles(lcu.alphas, m)
    prep = []
    for lvl, angs in enumerate(levels):
        for p, t in enumerate(angs):
            if t == 0.0:
                continue
            prep.append(Gate("mcry", float(t), tuple(zip(range(lvl), _bits(p, lvl))), (lvl,)))
    sel = []
    sys_q = tuple(range(m, m + n))
    for i, t in enumerate(lcu.terms):
        sel.append(Gate("cpauli", 0.0 if t.sign > 0 else math.pi, tuple(zip(range(m), _bits(i, m))), sys_q,
                        t.pauli))
    unprep = [Gate("mcry", -g.angle, g.controls, g.targets) for g in reversed(prep)]
    layout = {"prepare": tuple(range(m)), "system": sys_q}
    return EncodingCircuit("prepare_select", tuple(prep + sel + unprep), n, m, lcu.s, layout, None, lcu,
                           meta={"levels": levels})


def prepare_for_scheme(a: SparseMatrix, scheme: str):
    """Max-norm scale, pad and (for prepare-select) dilate a matrix.

    Returns:
        Tuple ``(encoded_matrix, scaled_square_matrix, factor)``.
    """
    if scheme not in SCHEMES:
        raise InputError(f"unknown scheme {scheme!r}")
    sq = pad_to_pow2(a) if a.nrows == a.ncols else a
    sq, _, f = max_norm_scale(sq)
    enc = hermitian_dilation(sq) if scheme == "prepare_select" else sq
    return enc, sq, f


def encode(a: SparseMatrix, scheme: str, delta_c: float = 0.0, trim: str = "none", delta: float = 0.0):
    """Scale, pad and encode ``a`` under ``scheme``.

    Args:
        a: Input matrix.
        scheme: ``arcsin``, ``fable`` or ``prepare_select``.
        delta_c: FABLE threshold.
        trim: ``none``, ``threshold``, ``hamming`` or ``both`` (arcsin only).
        delta: Threshold for ``trim``.

    Returns:
        :class:`EncodingCircuit`.
    """
    enc, _, _ = prepare_for_scheme(a, scheme)
    if scheme == "arcsin":
        c = arcsin_encode(enc)
        if trim in ("threshold", "both"):
            c = trim_threshold(c, delta)
        if trim in ("hamming", "both"):
            c = coalesce_hamming1(c)
        return c
    if scheme == "fable":
        return fable_encode(enc, delta_c)
    return prepare_select_encode(pauli_decompose(enc))


def kappa_s(a: SparseMatrix, scheme: str, s: float | None = None) -> float:
    """``kappa_s = s / |lambda_min|`` of the encoded matrix.

    Query-oracle schemes use the eigenvalue of smallest modulus of the scaled
    matrix with ``s = N``.  Prepare-select encodes the dilation, whose
    smallest eigenvalue modulus is the smallest singular value of the scaled
    matrix, with ``s = sum alpha``.

    Args:
        a: Input matrix (scaling, padding and dilation are applied here).
        scheme: Encoding scheme.
        s: Override for the subnormalisation.
    """
    enc, sq, _ = prepare_for_scheme(a, scheme)
    st = spectral_stats(sq)
    if scheme == "prepare_select":
        lam = st.sigma_min
        if s is None:
            s = pauli_decompose(enc).s
    else:
        lam = st.eigen_min_abs
        if s is None:
            s = float(sq.nrows)
    if lam == 0.0:
        return math.inf
    return s / lam


def op_counts(c) -> OpCountReport:
    """Rotation counts per scheme, normalised as in the comparison table.

    Arcsin and FABLE count rotation gates; prepare-select counts ``3 M``.
    Hadamards, swaps, X and CNOTs are not counted.  Arcsin and prepare-select
    are normalised by ``nnz(A)``, FABLE by ``N^2``.

    Args:
        c: :class:`EncodingCircuit` or :class:`LcuDecomposition`. For an LCU
            the normaliser is ``nnz`` of the reconstructed dilation's
            off-diagonal block.
    """
    if isinstance(c, LcuDecomposition):
        nnz = int(np.count_nonzero(np.abs(c.to_dense()) > 1e-12)) // 2
        raw = 3 * c.m
        return OpCountReport("prepare_select", raw, nnz, raw / max(nnz, 1))
    if c.scheme == "prepare_select":
        nnz = c.meta.get("source_nnz") or int(np.count_nonzero(np.abs(c.lcu.to_dense()) > 1e-12)) // 2
        raw = 3 * c.lcu.m
        return OpCountReport("prepare_select", raw, nnz, raw / max(nnz, 1))
    raw = len(c.rotations())
    norm = c.matrix.nnz if c.scheme == "arcsin" else c.dim**2
    return OpCountReport(c.scheme, raw, norm, raw / max(norm, 1))
