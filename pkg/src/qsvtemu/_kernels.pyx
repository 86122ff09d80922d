# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled state-vector kernels.

All kernels act in place on a C-contiguous complex128 array of shape
``(batch, 2**nq)`` with big-endian qubit numbering (qubit 0 is the most
significant index bit).
"""

from libc.math cimport sqrt

ctypedef double complex cplx


def hadamard(cplx[:, ::1] psi, int q, int nq):
    cdef Py_ssize_t B = psi.shape[0], L = psi.shape[1]
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << (nq - 1 - q)
    cdef Py_ssize_t b, base, k, i0, i1
    cdef double r = 1.0 / sqrt(2.0)
    cdef cplx a0, a1
    for b in range(B):
        base = 0
        while base < L:
            for k in range(stride):
                i0 = base + k
                i1 = i0 + stride
                a0 = psi[b, i0]
                a1 = psi[b, i1]
                psi[b, i0] = r * (a0 + a1)
                psi[b, i1] = r * (a0 - a1)
            base += 2 * stride


def swap_qubits(cplx[:, ::1] psi, int q1, int q2, int nq):
    if q1 == q2:
        return
    cdef Py_ssize_t B = psi.shape[0], L = psi.shape[1]
    cdef Py_ssize_t m1 = (<Py_ssize_t>1) << (nq - 1 - q1)
    cdef Py_ssize_t m2 = (<Py_ssize_t>1) << (nq - 1 - q2)
    cdef Py_ssize_t b, k, j
    cdef cplx t
    for b in range(B):
        for k in range(L):
            # visit each (bit1=1, bit2=0) index once and exchange with its partner
            if (k & m1) and not (k & m2):
                j = (k ^ m1) | m2
                t = psi[b, k]
                psi[b, k] = psi[b, j]
                psi[b, j] = t


def ry_oracle(cplx[:, ::1] psi, const double[::1] c, const double[::1] s, bint fold_x, bint adjoint):
    """Ancilla rotation per index followed (optionally) by X on the ancilla.

    The ancilla is the most significant qubit, so amplitude ``k`` pairs with
    ``k + L`` where ``L = len(c)``.
    """
    cdef Py_ssize_t B = psi.shape[0], L = c.shape[0]
    cdef Py_ssize_t b, k
    cdef cplx x0, x1
    cdef double ck, sk
    for b in range(B):
        for k in range(L):
            x0 = psi[b, k]
            x1 = psi[b, k + L]
            ck = c[k]
            sk = s[k]
            if not fold_x:
                if adjoint:
                    sk = -sk
                psi[b, k] = ck * x0 - sk * x1
                psi[b, k + L] = sk * x0 + ck * x1
            else:
                # X.R_y(theta) is real symmetric, hence its own adjoint
                psi[b, k] = sk * x0 + ck * x1
                psi[b, k + L] = ck * x0 - sk * x1


def mux_ry(cplx[:, ::1] psi, int level, int nq, const double[::1] c, const double[::1] s, bint adjoint):
    """Multiplexed R_y on qubit ``level`` controlled by all higher qubits."""
    cdef Py_ssize_t B = psi.shape[0]
    cdef Py_ssize_t npref = (<Py_ssize_t>1) << level
    cdef Py_ssize_t rest = (<Py_ssize_t>1) << (nq - 1 - level)
    cdef Py_ssize_t b, p, k, i0
    cdef cplx x0, x1
    cdef double cp, sp
    for b in range(B):
        for p in range(npref):
            cp = c[p]
            sp = -s[p] if adjoint else s[p]
            i0 = p * 2 * rest
            for k in range(rest):
                x0 = psi[b, i0 + k]
                x1 = psi[b, i0 + rest + k]
                psi[b, i0 + k] = cp * x0 - sp * x1
                psi[b, i0 + rest + k] = sp * x0 + cp * x1


def pauli_apply(cplx[:, ::1] out, const cplx[:, ::1] inp, Py_ssize_t off, Py_ssize_t n,
                Py_ssize_t xmask, Py_ssize_t zmask, cplx phase):
    """``out[:, off + (k ^ xmask)] = phase * (-1)**popcount(k & zmask) * inp[:, off + k]``."""
    cdef Py_ssize_t B = out.shape[0]
    cdef Py_ssize_t b, k, z, par
    for b in range(B):
        for k in range(n):
            z = k & zmask
            par = 0
            while z:
                par ^= 1
                z &= z - 1
            if par:
                out[b, off + (k ^ xmask)] = -phase * inp[b, off + k]
            else:
                out[b, off + (k ^ xmask)] = phase * inp[b, off + k]


def flag_phase(cplx[:, ::1] psi, Py_ssize_t nflag0, cplx ph):
    """Multiply the first ``nflag0`` amplitudes of every row by ``ph``."""
    cdef Py_ssize_t B = psi.shape[0], b, k
    for b in range(B):
        for k in range(nflag0):
            psi[b, k] = ph * psi[b, k]
