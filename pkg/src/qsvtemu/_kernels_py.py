"""NumPy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and in-place semantics; used when the extension is not
built or ``QSVTEMU_PURE=1`` is set.
"""

import numpy as np

_R2 = 1.0 / np.sqrt(2.0)


def hadamard(psi, q, nq):
    B, L = psi.shape
    v = psi.reshape(B, 1 << q, 2, L >> (q + 1))
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :]
    v[:, :, 0, :] = _R2 * (a0 + a1)
    v[:, :, 1, :] = _R2 * (a0 - a1)


def swap_qubits(psi, q1, q2, nq):
    if q1 == q2:
        return
    B, L = psi.shape
    v = psi.reshape((B,) + (2,) * nq)
    v[...] = np.swapaxes(v, q1 + 1, q2 + 1).copy()


def ry_oracle(psi, c, s, fold_x, adjoint):
    L = c.shape[0]
    x0 = psi[:, :L].copy()
    x1 = psi[:, L:2 * L].copy()
    if not fold_x:
        s = -s if adjoint else s
        psi[:, :L] = c * x0 - s * x1
        psi[:, L:2 * L] = s * x0 + c * x1
    else:
        psi[:, :L] = s * x0 + c * x1
        psi[:, L:2 * L] = c * x0 - s * x1


def mux_ry(psi, level, nq, c, s, adjoint):
    B, L = psi.shape
    v = psi.reshape(B, 1 << level, 2, L >> (level + 1))
    s = -s if adjoint else s
    cc = c[None, :, None]
    ss = s[None, :, None]
    x0 = v[:, :, 0, :].copy()
    x1 = v[:, :, 1, :].copy()
    v[:, :, 0, :] = cc * x0 - ss * x1
    v[:, :, 1, :] = ss * x0 + cc * x1


_PAR_CACHE = {}


def _parity(n, zmask):
    key = (n, zmask)
    out = _PAR_CACHE.get(key)
    if out is None:
        k = np.arange(n, dtype=np.int64) & zmask
        par = np.zeros(n, dtype=np.int64)
        while np.any(k):
            par ^= k & 1
            k >>= 1
        out = 1.0 - 2.0 * par
        if len(_PAR_CACHE) > 4096:
            _PAR_CACHE.clear()
        _PAR_CACHE[key] = out
    return out


def pauli_apply(out, inp, off, n, xmask, zmask, phase):
    k = np.arange(n, dtype=np.int64)
    out[:, off + (k ^ xmask)] = phase * _parity(n, zmask) * inp[:, off:off + n]


def flag_phase(psi, nflag0, ph):
    psi[:, :nflag0] *= ph
