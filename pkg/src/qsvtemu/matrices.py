"""Test matrices, right-hand sides and spectral analysis.

Matrices are held in :class:`SparseMatrix`, a small COO container with a
cached max-norm and a record of any max-norm rescaling.  Conversion to
``scipy.sparse`` and dense arrays is cheap and used freely.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError, NumericalError, SizeCapError

SPECTRAL_CAP = 4096
CG_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Real sparse matrix in coordinate form.

    Entries are stored sorted row-major with no duplicates and no explicit
    zeros.

    Attributes:
        nrows: Number of rows.
        ncols: Number of columns.
        rows: Row index of each entry.
        cols: Column index of each entry.
        vals: Value of each entry.
        scale_applied: Factor the matrix was divided by in
            :func:`max_norm_scale` (1.0 when unscaled).
    """

    nrows: int
    ncols: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    scale_applied: float = 1.0
    _max_abs: float = field(default=0.0, repr=False, compare=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.vals)):
            raise InputError("matrix entries must be finite")
        object.__setattr__(self, "_max_abs", float(np.abs(self.vals).max()) if self.vals.size else 0.0)

    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals, scale_applied=1.0, sum_duplicates=True):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        if rows.size and (rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols):
            raise InputError("entry index out of range")
        m = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
        if sum_duplicates:
            m.sum_duplicates()
        else:
            keys = rows * ncols + cols
            if np.unique(keys).size != keys.size:
                raise InputError("duplicate (row, col) entries")
        return cls._from_scipy(m, scale_applied)

    @classmethod
    def from_dense(cls, a, scale_applied=1.0):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2:
            raise InputError("expected a 2-D array")
        r, c = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], r.astype(np.int64), c.astype(np.int64), a[r, c].copy(), scale_applied)

    @classmethod
    def from_scipy(cls, m, scale_applied=1.0):
        return cls._from_scipy(sp.coo_matrix(m), scale_applied)

    @classmethod
    def _from_scipy(cls, m, scale_applied):
        m = sp.csr_matrix(m)
        m.eliminate_zeros()
        m.sort_indices()
        coo = m.tocoo()
        return cls(m.shape[0], m.shape[1], coo.row.astype(np.int64), coo.col.astype(np.int64),
                   coo.data.astype(float), scale_applied)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @property
    def max_abs(self) -> float:
        """Cached ``max |a_ij|``."""
        return self._max_abs

    @property
    def entries(self):
        """List of ``(row, col, value)`` triples."""
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()))

    def tocsr(self):
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    def to_dense(self):
        a = np.zeros(self.shape)
        a[self.rows, self.cols] = self.vals
        return a

    def transpose(self):
        return SparseMatrix.from_coo(self.ncols, self.nrows, self.cols, self.rows, self.vals,
                                     self.scale_applied)

    @property
    def T(self):
        return self.transpose()

    def is_symmetric(self, tol=0.0) -> bool:
        if self.nrows != self.ncols:
            return False
        d = self.tocsr() - self.tocsr().T
        return d.nnz == 0 or float(np.abs(d.data).max()) <= tol

    def scaled(self, factor: float):
        """Return ``A / factor`` with the scale recorded."""
        return SparseMatrix(self.nrows, self.ncols, self.rows.copy(), self.cols.copy(), self.vals / factor,
                            self.scale_applied * factor)


@dataclass(frozen=True)
class ToeplitzSpec:
    """Tridiagonal Toeplitz matrix ``T_n(a, b, c)``: diagonal a, sub b, super c."""

    n: int
    a: float = 1.0
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise InputError("Toeplitz dimension must be >= 2")


BC_TAGS = {"d": "dirichlet", "n": "neumann", "r": "robin", "p": "periodic"}


@dataclass(frozen=True)
class LaplacianSpec:
    """Uniform-mesh Laplacian description.

    Attributes:
        dims: Number of spatial dimensions (1, 2 or 3).
        mesh: Points per axis, including boundary-face points.
        bcs: One tag per face, ordered (axis0 low, axis0 high, axis1 low, ...).
            Tags are ``dirichlet``, ``neumann``, ``robin`` or ``periodic``.
        name: Case name in the ``l<d>d_<mesh>_<bcs>`` convention.
        prefactor: When set, use unit spacing and multiply the stencil by
            this factor instead of scaling by ``1/h**2``.
        robin: Robin constant ``alpha`` in ``du/dn + alpha u = 0``.
    """

    dims: int
    mesh: tuple
    bcs: tuple
    name: str = ""
    prefactor: float | None = None
    robin: float = 1.0

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise InputError("dims must be 1, 2 or 3")
        if len(self.mesh) != self.dims or any(m < 2 for m in self.mesh):
            raise InputError("mesh needs one size >= 2 per dimension")
        if len(self.bcs) != 2 * self.dims:
            raise InputError("need two boundary tags per dimension")
        for t in self.bcs:
            if t not in BC_TAGS.values():
                raise InputError(f"unsupported boundary condition {t!r}")
        for ax in range(self.dims):
            lo, hi = self.bcs[2 * ax], self.bcs[2 * ax + 1]
            if (lo == "periodic") != (hi == "periodic"):
                raise InputError("periodic boundaries must be paired on an axis")

    @classmethod
    def from_name(cls, name: str):
        """Parse names such as ``l1d_8_dd`` or ``l3d_4x8x8_dnrrdd``."""
        m = re.fullmatch(r"l([123])d_(\d+(?:x\d+)*)_([dnrp]+)", name.strip())
        if not m:
            raise InputError(f"cannot parse Laplacian name {name!r}")
        dims = int(m.group(1))
        mesh = tuple(int(v) for v in m.group(2).split("x"))
        bcs = tuple(BC_TAGS[ch] for ch in m.group(3))
        return cls(dims, mesh, bcs, name)


@dataclass(frozen=True)
class SpectralStats:
    """Dense spectral summary.

    ``kappa`` is the singular-value ratio. ``kappa_eig`` is the ratio of
    extreme eigenvalue moduli (square inputs only, ``nan`` otherwise).
    """

    sigma_min: float
    sigma_max: float
    kappa: float
    eigen_min_abs: float
    eigen_max_abs: float
    kappa_eig: float


def gen_toeplitz(spec: ToeplitzSpec) -> SparseMatrix:
    """Tridiagonal Toeplitz matrix from a :class:`ToeplitzSpec`."""
    n = spec.n
    m = sp.diags([np.full(n - 1, spec.b), np.full(n, spec.a), np.full(n - 1, spec.c)], [-1, 0, 1])
    return SparseMatrix.from_scipy(m)


def toeplitz_eigenvalues(n, a, b, c):
    """Analytic eigenvalues ``a - 2 sqrt(bc) cos(k pi/(n+1))``, k = 1..n."""
    k = np.arange(1, n + 1)
    return a - 2.0 * np.sqrt(complex(b * c)).real * np.cos(k * np.pi / (n + 1))


def toeplitz_kappa_to_b(n: int, a: float, kappa_target: float, tol=1e-15) -> float:
    """Symmetric off-diagonal ``b = c`` giving ``T_n(a, b, b)`` condition ``kappa_target``.

    Bisection on the analytic extreme eigenvalues. Since
    ``kappa(b) = (a + 2b cos t)/(a - 2b cos t)`` with ``t = pi/(n+1)`` is
    increasing in ``b`` on ``[0, a/(2 cos t))`` the root is unique.

    Raises:
        InputError: If ``kappa_target < 1`` or ``a <= 0``.
    """
    if a <= 0:
        raise InputError("diagonal must be positive")
    if not kappa_target >= 1.0 or not math.isfinite(kappa_target):
        raise InputError(f"infeasible kappa target {kappa_target}")
    if kappa_target == 1.0:
        return 0.0
    t = math.cos(math.pi / (n + 1))

    def kap(b):
        return (a + 2 * b * t) / (a - 2 * b * t)

    lo, hi = 0.0, a / (2 * t)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if kap(mid) < kappa_target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(hi, 1.0):
            break
    return 0.5 * (lo + hi)


def toeplitz_for_kappa(n: int, kappa: float, a: float = 1.0) -> SparseMatrix:
    """``T_n(a, -b, -b)`` with condition number ``kappa``.

    The negative off-diagonals pair ``lambda_k = a - 2b cos(k pi/(n+1))`` with
    the k-th sine mode, so smooth right-hand sides sit at the small end of the
    spectrum as they do for a Laplacian.  The spectrum is the same as for
    ``+b``.
    """
    b = toeplitz_kappa_to_b(n, a, kappa)
    return gen_toeplitz(ToeplitzSpec(n, a, -b, -b))


def _axis_info(spec: LaplacianSpec):
    out = []
    for ax, m in enumerate(spec.mesh):
        periodic = spec.bcs[2 * ax] == "periodic"
        if spec.prefactor is not None:
            h = 1.0
        elif periodic:
            h = 1.0 / m
        else:
            h = 1.0 / max(m - 2, 1)
        out.append((m, periodic, h))
    return out


def gen_laplacian(spec: LaplacianSpec) -> SparseMatrix:
    """Assemble the negative Laplacian on a uniform mesh.

    Non-periodic axes use a cell-centred layout: the two end points on each
    axis are boundary-face unknowns and the interior points are cells of width
    ``h = 1/(m-2)``.  Cells couple to neighbouring cells with ``1/h**2`` and to
    boundary faces with the half-cell weight ``2/h**2``.  Face rows close the
    system:

    * dirichlet: ``(2/h**2) u_f``
    * neumann: ``(2/h**2)(u_f - u_c)``
    * robin: ``(2/h**2)(u_f - u_c) + (alpha/h) u_f``

    Points on more than one boundary (edges, corners) get a single diagonal
    entry ``2/h**2``.  Periodic axes wrap with the plain ``(-1, 2, -1)/h**2``
    stencil.  With ``spec.prefactor`` set, ``h = 1`` and the whole matrix is
    multiplied by the prefactor.

    Args:
        spec: Mesh and boundary description.

    Returns:
        The assembled matrix, row-major over ``numpy.ravel_multi_index``
        ordering of the mesh points.
    """
    axes = _axis_info(spec)
    mesh = spec.mesh
    npts = int(np.prod(mesh))
    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    def faces(p):
        f = []
        for ax, (m, periodic, _) in enumerate(axes):
            if periodic:
                continue
            if p[ax] == 0:
                f.append((ax, 0))
            elif p[ax] == m - 1:
                f.append((ax, 1))
        return f

    for p in itertools.product(*[range(m) for m in mesh]):
        k = int(np.ravel_multi_index(p, mesh))
        fp = faces(p)
        if len(fp) > 1:
            add(k, k, 2.0 / axes[fp[0][0]][2] ** 2)
            continue
        if len(fp) == 1:
            ax, side = fp[0]
            m, _, h = axes[ax]
            tag = spec.bcs[2 * ax + side]
            w = 2.0 / h**2
            if tag == "dirichlet" or m == 2:
                add(k, k, w)
                continue
            q = list(p)
            q[ax] = 1 if side == 0 else m - 2
            diag = w + (spec.robin / h if tag == "robin" else 0.0)
            add(k, k, diag)
            add(k, int(np.ravel_multi_index(q, mesh)), -w)
            continue
        diag = 0.0
        for ax, (m, periodic, h) in enumerate(axes):
            for step in (-1, 1):
                q = list(p)
                if periodic:
                    q[ax] = (p[ax] + step) % m
                    w = 1.0 / h**2
                else:
                    q[ax] = p[ax] + step
                    w = (2.0 if q[ax] in (0, m - 1) else 1.0) / h**2
                add(k, int(np.ravel_multi_index(q, mesh)), -w)
                diag += w
        add(k, k, diag)
    vals = np.asarray(vals)
    if spec.prefactor is not None:
        vals = vals * spec.prefactor
    return SparseMatrix.from_coo(npts, npts, rows, cols, vals)


def laplacian(name: str) -> SparseMatrix:
    """Shortcut for ``gen_laplacian(LaplacianSpec.from_name(name))``."""
    return gen_laplacian(LaplacianSpec.from_name(name))


def periodic_tridiagonal(n: int = 8) -> SparseMatrix:
    """Periodic 1D operator ``0.5 * (-1, 2, -1)`` with wrap-around corners."""
    return gen_laplacian(LaplacianSpec(1, (n,), ("periodic", "periodic"), f"periodic_{n}", prefactor=0.5))


def hermitian_dilation(a: SparseMatrix) -> SparseMatrix:
    """Return ``[[0, A], [A^T, 0]]``."""
    m, n = a.shape
    rows = np.concatenate([a.rows, a.cols + m])
    cols = np.concatenate([a.cols + m, a.rows])
    vals = np.concatenate([a.vals, a.vals])
    return SparseMatrix.from_coo(m + n, m + n, rows, cols, vals, a.scale_applied)


def next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def pad_to_pow2(a: SparseMatrix) -> SparseMatrix:
    """Append an identity block so the dimension is a power of two."""
    if a.nrows != a.ncols:
        raise InputError("pad_to_pow2 needs a square matrix")
    n = a.nrows
    big = next_pow2(n)
    if big == n:
        return a
    extra = np.arange(n, big)
    return SparseMatrix.from_coo(big, big, np.concatenate([a.rows, extra]), np.concatenate([a.cols, extra]),
                                 np.concatenate([a.vals, np.ones(extra.size)]), a.scale_applied)


def pad_vector(b, size):
    b = np.asarray(b, dtype=float)
    out = np.zeros(size)
    out[: b.size] = b
    return out


def max_norm_scale(a: SparseMatrix, b=None):
    """Divide ``A`` and ``b`` by ``||A||_max``.

    The scaling is applied even when ``||A||_max < 1`` so the largest entry
    always becomes 1 in magnitude.

    Args:
        a: Matrix to scale.
        b: Optional right-hand side.

    Returns:
        Tuple ``(A', b', factor)``. ``b'`` is ``None`` when ``b`` is.

    Raises:
        InputError: If ``A`` has no nonzero entries.
    """
    f = a.max_abs
    if f == 0.0:
        raise InputError("cannot scale a zero matrix")
    bs = None if b is None else np.asarray(b, dtype=float) / f
    return a.scaled(f), bs, f


def spectral_stats(a, cap: int = SPECTRAL_CAP) -> SpectralStats:
    """Dense singular values and, for square input, eigenvalue moduli.

    Args:
        a: :class:`SparseMatrix` or dense array.
        cap: Largest dimension accepted.

    Returns:
        :class:`SpectralStats`. A singular matrix gives ``kappa = inf``.
    """
    d = a.to_dense() if isinstance(a, SparseMatrix) else np.asarray(a, dtype=float)
    if max(d.shape) > cap:
        raise SizeCapError(f"dimension {max(d.shape)} exceeds spectral cap {cap}")
    sv = scipy.linalg.svdvals(d)
    smax, smin = float(sv.max()), float(sv.min())
    tiny = smax * max(d.shape) * np.finfo(float).eps
    kappa = math.inf if smin <= tiny else smax / smin
    emin = emax = keig = math.nan
    if d.shape[0] == d.shape[1]:
        if np.array_equal(d, d.T):
            ev = np.abs(scipy.linalg.eigvalsh(d))
        else:
            ev = np.abs(scipy.linalg.eigvals(d))
        emin, emax = float(ev.min()), float(ev.max())
        keig = math.inf if emin <= tiny else emax / emin
    return SpectralStats(smin, smax, kappa, emin, emax, keig)


def rhs_polynomial(n: int):
    """``b_i = 16 x^3 - 24 x^2 + 9 x`` at ``x_i = i/(n-1)``."""
    if n < 2:
        raise InputError("need n >= 2")
    x = np.arange(n) / (n - 1)
    return 16 * x**3 - 24 * x**2 + 9 * x


def classical_solve(a: SparseMatrix, b, method: str = "lu", tol: float = CG_TOL, maxiter=None):
    """Solve ``A x = b`` classically.

    Args:
        a: Square matrix.
        b: Right-hand side.
        method: ``lu`` for a sparse direct solve or ``cg`` for unpreconditioned
            conjugate gradients. Non-symmetric input to ``cg`` is solved via
            the normal equations.
        tol: Relative residual tolerance for ``cg``.
        maxiter: CG iteration cap, default ``10 n``.

    Returns:
        Solution vector.

    Raises:
        NumericalError: Singular matrix, or CG not converged.
    """
    if a.nrows != a.ncols:
        raise InputError("classical_solve needs a square matrix")
    b = np.asarray(b, dtype=float)
    m = a.tocsr().tocsc()
    n = a.nrows
    if method == "lu":
        try:
            x = spla.splu(m).solve(b)
        except RuntimeError as exc:
            raise NumericalError(f"singular matrix: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise NumericalError("singular matrix")
        res = np.linalg.norm(m @ x - b) / max(np.linalg.norm(b), 1e-300)
        if res > 1e-10:
            raise NumericalError(f"LU residual {res:.3e} above 1e-10")
        return x
    if method == "cg":
        maxiter = 10 * n if maxiter is None else maxiter
        if a.is_symmetric():
            op, rhs = m, b
        else:
            op, rhs = (m.T @ m).tocsr(), m.T @ b
        x, info = spla.cg(op, rhs, rtol=tol, atol=0.0, maxiter=maxiter)
        if info != 0:
            raise NumericalError(f"CG did not converge in {maxiter} iterations")
        return x
    raise InputError(f"unknown method {method!r}")


def read_matrix_market(path) -> SparseMatrix:
    """Read a coordinate (or dense array) Matrix Market file.

    Indices in the file are 1-based and returned 0-based.
    """
    path = Path(path)
    try:
        m = scipy.io.mmread(str(path))
    except (ValueError, IndexError, OSError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if isinstance(m, np.ndarray):
        if np.iscomplexobj(m):
            raise InputError("complex matrices are not supported")
        return SparseMatrix.from_dense(m)
    if np.iscomplexobj(m.data):
        raise InputError("complex matrices are not supported")
    coo = sp.coo_matrix(m)
    return SparseMatrix.from_coo(coo.shape[0], coo.shape[1], coo.row, coo.col, coo.data)


def write_matrix_market(a: SparseMatrix, path, comment: str = ""):
    """Write ``a`` as a general real coordinate Matrix Market file."""
    coo = sp.coo_matrix((a.vals, (a.rows, a.cols)), shape=a.shape)
    scipy.io.mmwrite(str(path), coo, comment=comment, field="real", precision=17, symmetry="general")


def read_vector(path):
    """Read a RHS: one value per line, or a dense Matrix Market array."""
    path = Path(path)
    text = path.read_text()
    if text.startswith("%%MatrixMarket"):
        m = scipy.io.mmread(str(path))
        m = m.toarray() if sp.issparse(m) else np.asarray(m)
        return np.asarray(m, dtype=float).ravel()
    try:
        vals = [float(t) for t in text.split()]
    except ValueError as exc:
        raise InputError(f"bad vector file {path}: {exc}") from exc
    if not vals:
        raise InputError(f"empty vector file {path}")
    return np.asarray(vals)


def write_vector(b, path):
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in np.asarray(b).ravel()))
