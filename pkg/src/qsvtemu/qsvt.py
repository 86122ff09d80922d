"""QSVT circuit assembly, post-selection and solution recovery.

The signal qubit is wrapped in Hadamards and selects the sign of every
projector phase, so the flagged block after the final Hadamard is
``(P_phi + P_{-phi}) / 2``, the real polynomial.  Because the signal only
acts as a control, the emulation runs both signal branches as a batch of two
copies of the encoding register and combines them at the end.

Full-state layout (big-endian): signal qubit, the encoding's flag qubits,
then the system register.  The flagged subspace is therefore the leading
``N`` amplitudes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .emulator import FastEncoding, StateVector
from . import emulator
from .encoders import arcsin_encode, coalesce_hamming1, fable_encode, fable_error_bound, kappa_s as matrix_kappa_s
from .encoders import pauli_decompose, prepare_select_encode, prepare_tree_angles, trim_threshold
from .errors import InputError, NumericalError
from .matrices import (SparseMatrix, classical_solve, hermitian_dilation, max_norm_scale, pad_to_pow2, pad_vector,
                       rhs_polynomial, toeplitz_for_kappa)
from .phases import PhaseFactorSet, to_projector

log = logging.getLogger("qsvtemu.diagnostics")


@dataclass
class SolveReport:
    """Outcome of :func:`qsvt_solve`.

    Attributes:
        x: Re-dimensionalised solution.
        l2_error_vs_classical: ``||x - x_lu|| / ||x_lu||``.
        success_probability: Probability ``E`` of all flags reading 0.
        phase_count: Polynomial degree ``d`` (the set holds ``d + 1`` phases).
        kappa_s_used: ``kappa_s`` of the phase set.
        kappa_s_matrix: ``kappa_s`` of the encoded matrix.
        epsilon_used: Phase-set target error.
        s: Subnormalisation.
        scheme: Encoding scheme.
        measurement_expectations: Conditional ``P(0)`` per flag, ascending
            order (encoding flags then signal).
        measurement_signal_first: Same with the signal measured first.
        warnings: Diagnostics raised during the solve.
    """

    x: np.ndarray
    l2_error_vs_classical: float
    success_probability: float
    phase_count: int
    kappa_s_used: float
    kappa_s_matrix: float
    epsilon_used: float
    s: float
    scheme: str
    measurement_expectations: list = field(default_factory=list)
    measurement_signal_first: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_records(self) -> str:
        """``key=value`` lines; vectors are comma separated."""
        rows = [
            ("scheme", self.scheme),
            ("s", repr(self.s)),
            ("kappa_s_used", repr(self.kappa_s_used)),
            ("kappa_s_matrix", repr(self.kappa_s_matrix)),
            ("epsilon_used", repr(self.epsilon_used)),
            ("phase_count", str(self.phase_count)),
            ("success_probability", repr(self.success_probability)),
            ("l2_error_vs_classical", repr(self.l2_error_vs_classical)),
            ("expectations_ascending", ",".join(repr(v) for v in self.measurement_expectations)),
            ("expectations_signal_first", ",".join(repr(v) for v in self.measurement_signal_first)),
            ("x", ",".join(repr(float(v)) for v in self.x)),
        ]
        rows += [("warning", w) for w in self.warnings]
        return "".join(f"{k}={v}\n" for k, v in rows)


def projector_phase(state, phi: float, n_flag0: int):
    """Multiply the leading ``n_flag0`` amplitudes (flags all 0) by ``exp(i 2 phi)``.

    Args:
        state: Array ``(..., 2**q)`` or :class:`StateVector`.
        phi: Phase in the ``exp(i 2 phi Pi)`` convention.
        n_flag0: Size of the flagged subspace (``N``).
    """
    arr = state.amplitudes if isinstance(state, StateVector) else state
    v = arr.reshape(-1, arr.shape[-1])
    v[:, :n_flag0] *= np.exp(2j * phi)
    return state


def _run_branches(fe: FastEncoding, factors, psi0):
    """Both signal branches: row 0 uses ``+phi``, row 1 uses ``-phi``."""
    N = 1 << fe.n
    v = np.ascontiguousarray(np.vstack([psi0, psi0]), dtype=np.complex128)
    ph = np.exp(2j * np.asarray(factors))
    d = len(factors) - 1
    v[0, :N] *= ph[d]
    v[1, :N] *= np.conj(ph[d])
    for j in range(d):
        fe.apply(v, adjoint=bool(j % 2))
        p = ph[d - 1 - j]
        v[0, :N] *= p
        v[1, :N] *= np.conj(p)
    return v


def qsvt_apply(encoding, phases: PhaseFactorSet, state) -> StateVector:
    """Run ``Pi_{phi_0} U Pi_{phi_1} U^dag ... U Pi_{phi_d}`` with the signal qubit.

    Args:
        encoding: :class:`EncodingCircuit` or prebuilt :class:`FastEncoding`.
        phases: Phase set (any convention; converted to ``projector``).
        state: Encoding-register state (flags plus system), array of length
            ``2**q`` or :class:`StateVector`.

    Returns:
        :class:`StateVector` over ``q + 1`` qubits with the signal as qubit 0.
    """
    fe = encoding if isinstance(encoding, FastEncoding) else FastEncoding(encoding)
    ps = to_projector(phases)
    psi0 = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    if psi0.size != 1 << fe.nq:
        raise InputError("state does not match the encoding register")
    v = _run_branches(fe, ps.factors, psi0)
    full = np.concatenate([(v[0] + v[1]) / 2, (v[0] - v[1]) / 2])
    m = fe.m
    layout = {"signal": (0,), "flags": tuple(range(1, m + 1)), "system": tuple(range(m + 1, m + 1 + fe.n))}
    return StateVector(full, layout)


def success_probability(state: StateVector, n_sys: int | None = None) -> float:
    """Probability that every flag (signal included) reads 0."""
    n = len(state.layout["system"]) if n_sys is None else n_sys
    a = state.amplitudes[: 1 << n]
    return float(np.vdot(a, a).real)


def flag_order(state: StateVector, signal_first: bool = False):
    flags = list(state.layout["flags"])
    return [0] + flags if signal_first else flags + [0]


def measurement_order_expectations(state: StateVector, order=None):
    """Sequential conditional probabilities of reading 0 on each qubit in ``order``.

    Each step projects onto the 0 outcome and renormalises.  The product of
    the returned values is the joint probability of all zeros, independent
    of the order.
    """
    order = flag_order(state) if order is None else list(order)
    nq = state.n_qubits
    t = state.amplitudes.reshape((2,) * nq)
    out = []
    for q in order:
        t0 = np.take(t, 0, axis=q)
        total = float(np.vdot(t, t).real)
        p0 = float(np.vdot(t0, t0).real) / total if total > 0 else 0.0
        out.append(p0)
        t = np.stack([t0, np.zeros_like(t0)], axis=q)
    return out


def load_real_vector(b) -> np.ndarray:
    """Amplitudes ``b/||b||`` built with the binary-tree loader.

    Upper levels rotate by subtree norms; the last level uses signed
    ``atan2`` so negative entries keep their sign.
    """
    b = np.asarray(b, dtype=float)
    nrm = np.linalg.norm(b)
    if nrm == 0:
        raise InputError("cannot load a zero vector")
    n = (b.size - 1).bit_length()
    a = pad_vector(b / nrm, 1 << n)
    psi = np.zeros((1, 1 << n), dtype=complex)
    psi[0, 0] = 1.0
    levels = prepare_tree_angles(a * a, n)
    if n:
        pairs = a.reshape(-1, 2)
        levels[-1] = 2.0 * np.arctan2(pairs[:, 1], pairs[:, 0])
    for lvl, th in enumerate(levels):
        emulator._K.mux_ry(psi, lvl, n, np.cos(th / 2), np.sin(th / 2), False)
    return psi[0].real.copy()


def state_prepare(b, n_flags: int) -> StateVector:
    """Flags zeroed, system register holding ``b/||b||``."""
    sysv = load_real_vector(b)
    full = np.zeros(sysv.size << n_flags, dtype=complex)
    full[: sysv.size] = sysv
    n = sysv.size.bit_length() - 1
    return StateVector(full, {"flags": tuple(range(n_flags)), "system": tuple(range(n_flags, n_flags + n))})


@dataclass
class PreparedSystem:
    """Encoded system ready for repeated solves."""

    scheme: str
    circuit: object
    fast: FastEncoding
    factor: float
    n_orig: int
    n_pad: int
    dilated: bool
    kappa_s: float


def prepare_system(a: SparseMatrix, scheme: str, delta_c: float = 0.0, trim: str = "none",
                   delta: float = 0.0, kappa: float | None = None) -> PreparedSystem:
    """Scale, pad and encode ``a`` for inversion.

    Query-oracle schemes encode ``A^T``: the odd singular-value transform of a
    block ``B`` approximates ``(B^{-1})^dag / (4 kappa)``, which is
    proportional to ``A^{-1}`` when ``B = A^T / s``.  Prepare-select encodes
    the Hermitian dilation.
    """
    if a.nrows != a.ncols:
        raise InputError("qsvt_solve needs a square matrix")
    sq = pad_to_pow2(a)
    sq, _, f = max_norm_scale(sq)
    if scheme == "prepare_select":
        c = prepare_select_encode(pauli_decompose(hermitian_dilation(sq)))
        dil = True
    elif scheme in ("arcsin", "fable"):
        at = sq.transpose()
        if scheme == "arcsin":
            c = arcsin_encode(at)
            if trim in ("threshold", "both"):
                c = trim_threshold(c, delta)
            if trim in ("hamming", "both"):
                c = coalesce_hamming1(c)
        else:
            c = fable_encode(at, delta_c)
        dil = False
    else:
        raise InputError(f"unknown scheme {scheme!r}")
    if kappa is None:
        kappa = matrix_kappa_s(sq, scheme, s=c.s)
    return PreparedSystem(scheme, c, FastEncoding(c), f, a.nrows, sq.nrows, dil, kappa)


def solve_prepared(sysm: PreparedSystem, b, phases: PhaseFactorSet):
    """Run QSVT on a prepared system.

    Returns:
        Tuple ``(x, E, full_state)``.
    """
    ps = to_projector(phases)
    if ps.degree % 2 == 0:
        raise InputError("matrix inversion needs an odd-degree phase set")
    bs = pad_vector(np.asarray(b, dtype=float) / sysm.factor, sysm.n_pad)
    bin_ = np.concatenate([bs, np.zeros_like(bs)]) if sysm.dilated else bs
    nb = np.linalg.norm(bin_)
    st = state_prepare(bin_, sysm.circuit.n_anc)
    out = qsvt_apply(sysm.fast, ps, st)
    N = 1 << sysm.circuit.n_sys
    y = out.amplitudes[:N].real
    E = float(np.vdot(out.amplitudes[:N], out.amplitudes[:N]).real)
    if E <= 0.0:
        raise NumericalError("zero post-selection probability")
    x = (4.0 * ps.kappa_s / sysm.circuit.s) * nb * y
    x = x[sysm.n_pad:] if sysm.dilated else x
    return x[: sysm.n_orig], E, out


def qsvt_solve(a: SparseMatrix, b, scheme: str, phases: PhaseFactorSet, delta_c: float = 0.0,
               trim: str = "none", delta: float = 0.0, classical: bool = True) -> SolveReport:
    """Full pipeline: scale, pad or dilate, encode, QSVT, post-select, rescale.

    Args:
        a: Square nonsingular matrix.
        b: Right-hand side.
        scheme: ``arcsin``, ``fable`` or ``prepare_select``.
        phases: Inverse-polynomial phases.
        delta_c: FABLE threshold.
        trim: Arcsin trimming mode.
        delta: Arcsin trimming threshold.
        classical: Compare against an LU solve.

    Returns:
        :class:`SolveReport`.
    """
    sysm = prepare_system(a, scheme, delta_c, trim, delta)
    ps = to_projector(phases)
    warns = []
    if ps.kappa_s < sysm.kappa_s * (1 - 1e-9):
        msg = f"phase kappa_s {ps.kappa_s:.6g} below matrix kappa_s {sysm.kappa_s:.6g}"
        log.warning(msg)
        warns.append(msg)
    if scheme == "fable" and delta_c > 0:
        msg = f"FABLE threshold {delta_c:g}: block error bound {fable_error_bound(sysm.circuit.n_sys, delta_c):g}"
        log.warning(msg)
        warns.append(msg)
    x, E, out = solve_prepared(sysm, b, ps)
    err = math.nan
    if classical:
        xc = classical_solve(a, b)
        err = float(np.linalg.norm(x - xc) / np.linalg.norm(xc))
    return SolveReport(x, err, E, ps.degree, ps.kappa_s, sysm.kappa_s, ps.epsilon, sysm.circuit.s, scheme,
                       measurement_order_expectations(out, flag_order(out)),
                       measurement_order_expectations(out, flag_order(out, True)), warns)


@dataclass
class SequenceRow:
    iteration: int
    update_norm: float
    residual_norm: float
    success_probability: float
    lu_update_norm: float = math.nan
    error_vs_lu: float = math.nan


@dataclass
class SequenceReport:
    """Per-iteration convergence history of :func:`run_sequence`."""

    scheme: str
    kappa_s_used: float
    epsilon_used: float
    rows: list
    x: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def update_norms(self):
        return np.array([r.update_norm for r in self.rows])

    @property
    def lu_update_norms(self):
        return np.array([r.lu_update_norm for r in self.rows])

    def to_csv(self) -> str:
        head = "iteration,update_norm,residual_norm,success_probability,lu_update_norm,error_vs_lu\n"
        body = "".join(
            f"{r.iteration},{r.update_norm!r},{r.residual_norm!r},{r.success_probability!r},"
            f"{r.lu_update_norm!r},{r.error_vs_lu!r}\n"
            for r in self.rows
        )
        return head + body

    def to_records(self) -> str:
        out = [f"scheme={self.scheme}\n", f"kappa_s_used={self.kappa_s_used!r}\n",
               f"epsilon_used={self.epsilon_used!r}\n", f"iterations={len(self.rows)}\n"]
        for r in self.rows:
            out.append(f"row={r.iteration},{r.update_norm!r},{r.residual_norm!r},{r.success_probability!r},"
                       f"{r.lu_update_norm!r},{r.error_vs_lu!r}\n")
        out += [f"warning={w}\n" for w in self.warnings]
        return "".join(out)


def run_sequence(matrices, rhs, scheme: str, phases: PhaseFactorSet, lu: bool = True, **enc_kw) -> SequenceReport:
    """Outer defect-correction loop over a sequence of linear systems.

    Iteration ``k`` solves ``A_k dx = b_k - A_k x_{k-1}`` with QSVT and sets
    ``x_k = x_{k-1} + dx``, the way a segregated flow solver applies one
    linear solve per nonlinear iteration.  An inexact inner solve slows the
    outer contraction but cannot make it diverge while the polynomial keeps
    ``0 < 4 kappa x P(x) < 2`` on the spectrum.

    Args:
        matrices: Sequence of equally sized square :class:`SparseMatrix`.
        rhs: One vector, or one per matrix.
        scheme: Encoding scheme.
        phases: Phase set used for every solve.
        lu: Run the same loop with exact LU inner solves for reference.
        **enc_kw: Passed to :func:`prepare_system`.

    Returns:
        :class:`SequenceReport`.
    """
    matrices = list(matrices)
    if not matrices:
        raise InputError("empty matrix sequence")
    n = matrices[0].nrows
    if any(m.shape != (n, n) for m in matrices):
        raise InputError("all matrices in a sequence must share one square shape")
    rhs = [np.asarray(rhs, dtype=float)] * len(matrices) if np.ndim(rhs) == 1 else [np.asarray(r, float) for r in rhs]
    if len(rhs) != len(matrices) or any(r.size != n for r in rhs):
        raise InputError("right-hand sides do not match the matrix sequence")
    ps = to_projector(phases)
    x = np.zeros(n)
    xl = np.zeros(n)
    rows, warns = [], []
    for k, (a, b) in enumerate(zip(matrices, rhs), start=1):
        csr = a.tocsr()
        r = b - csr @ x
        E = math.nan
        if np.linalg.norm(r) == 0.0:
            dx = np.zeros(n)
        else:
            sysm = prepare_system(a, scheme, **enc_kw)
            if ps.kappa_s < sysm.kappa_s * (1 - 1e-9):
                msg = f"iteration {k}: phase kappa_s {ps.kappa_s:.6g} below matrix kappa_s {sysm.kappa_s:.6g}"
                log.warning(msg)
                warns.append(msg)
            dx, E, _ = solve_prepared(sysm, r, ps)
        x = x + dx
        row = SequenceRow(k, float(np.linalg.norm(dx)), float(np.linalg.norm(b - csr @ x)), E)
        if lu:
            rl = b - csr @ xl
            dxl = classical_solve(a, rl) if np.linalg.norm(rl) > 0 else np.zeros(n)
            xl = xl + dxl
            row.lu_update_norm = float(np.linalg.norm(dxl))
            row.error_vs_lu = float(np.linalg.norm(x - xl) / max(np.linalg.norm(xl), 1e-300))
        rows.append(row)
    return SequenceReport(scheme, ps.kappa_s, ps.epsilon, rows, x, warns)


def synthetic_sequence(n: int = 16, iterations: int = 10, kappa: float = 28.8, amplitude: float = 0.05,
                       damping: float = 0.5, seed: int = 0):
    """Contracting sequence of perturbed Toeplitz systems.

    ``A_k = T_n(1, -b, -b) + amplitude * damping**k * S`` with ``S`` a fixed
    random symmetric tridiagonal perturbation, mimicking the geometrically
    settling coefficients of a nonlinear flow solve.

    Returns:
        ``(matrices, rhs)`` with the polynomial right-hand side.
    """
    rng = np.random.default_rng(seed)
    base = toeplitz_for_kappa(n, kappa).to_dense()
    off = rng.uniform(-1.0, 1.0, n - 1)
    pert = np.diag(rng.uniform(-1.0, 1.0, n)) + np.diag(off, 1) + np.diag(off, -1)
    mats = [SparseMatrix.from_dense(base + amplitude * damping**k * pert) for k in range(iterations)]
    return mats, rhs_polynomial(n)
