"""Phase factors for the scaled inverse polynomial.

Pipeline: :func:`approx_inverse_poly` builds an odd minimax polynomial for
``1/(4 kappa x)`` on ``D_kappa = [-1, -1/kappa] U [1/kappa, 1]`` by linear
programming in the Chebyshev basis; :func:`phases_from_poly` finds symmetric
Wx-convention phases with the fixed-point iteration of Dong, Lin, Ni and Wang
and converts them to the projector-phase convention used by the emulator.

Conventions (``d`` = polynomial degree):

* ``projector``: ``d + 1`` phases, projector phase ``exp(i 2 phi Pi)``; the QSVT
  sequence is ``Pi_{phi_0} U Pi_{phi_1} U^dag ... Pi_{phi_{d-1}} U Pi_{phi_d}``,
  so the last phase acts on the input state before the first ``U``.
* ``reflection``: same layout with ``exp(i phi (2 Pi - I))``.
* ``wx``: ``d + 1`` phases for ``exp(i phi_0 Z) prod_k W(x) exp(i phi_k Z)``
  whose ``Im <0|U|0>`` is the target polynomial.

The two signal-qubit branches run ``+phi`` and ``-phi``.  The conversions
below fix the output and input phases so that the branch average has the
target as its flagged block and no weight outside the flagged subspace, so
post-selecting the signal qubit alone already projects every flag onto 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import linprog

from .errors import InputError, NumericalError

CONVENTIONS = ("projector", "reflection", "wx")
FILE_VERSION = 1
MAX_DEGREE = 1201


@dataclass(frozen=True)
class ChebyshevPoly:
    """Odd polynomial in the Chebyshev basis.

    Attributes:
        coef: Full Chebyshev coefficient vector (even entries zero).
        kappa_s: Defines the domain ``D_kappa``.
        epsilon: Target sup error on ``D_kappa``.
        residual: Measured sup error on a dense grid over ``D_kappa``.
    """

    coef: np.ndarray
    kappa_s: float
    epsilon: float
    residual: float = math.nan

    @property
    def degree(self) -> int:
        return len(self.coef) - 1

    def __call__(self, x):
        return C.chebval(x, self.coef)


@dataclass(frozen=True, eq=False)
class PhaseFactorSet:
    """Ordered phases plus metadata. ``factors`` are in ``convention``."""

    factors: np.ndarray
    kappa_s: float
    epsilon: float
    convention: str = "projector"
    parity: str = "odd"

    @property
    def degree(self) -> int:
        return len(self.factors) - 1

    def __len__(self):
        return len(self.factors)


def inverse_target(x, kappa_s):
    return 1.0 / (4.0 * kappa_s * np.asarray(x, dtype=float))


def domain_grid(kappa_s, npts=10001):
    """``npts`` points over ``D_kappa`` (both signs), Chebyshev-clustered at the ends."""
    half = (npts + 1) // 2
    t = (1 - np.cos(np.linspace(0.0, np.pi, half))) / 2
    pos = 1.0 / kappa_s + (1.0 - 1.0 / kappa_s) * t
    return np.concatenate([-pos[::-1], pos])[:npts] if npts % 2 == 0 else np.concatenate([-pos[::-1], pos[1:]])


def poly_residual(p, kappa_s, npts=10001):
    """Sup of ``|p(x) - 1/(4 kappa x)|`` over a grid on ``D_kappa``."""
    x = domain_grid(kappa_s, npts)
    return float(np.max(np.abs(p(x) - inverse_target(x, kappa_s))))


def _lp_fit(kappa_s, degree, bound=0.5, n_fit=None, n_gap=None):
    """Odd minimax fit of ``1/(4 kappa x)`` with ``0 <= p <= bound`` on ``[0, 1/kappa]``."""
    K = (degree + 1) // 2
    orders = 2 * np.arange(K) + 1
    n_fit = n_fit or max(6 * K, 400)
    n_gap = n_gap or max(2 * K, 100)
    a = 1.0 / kappa_s
    t = (1 - np.cos(np.linspace(0, np.pi, n_fit))) / 2
    xf = a + (1 - a) * t
    xg = np.linspace(0, a, n_gap + 1)[1:]
    Tf = np.cos(np.outer(np.arccos(xf), orders))
    Tg = np.cos(np.outer(np.arccos(xg), orders))
    f = inverse_target(xf, kappa_s)
    ones = np.ones((n_fit, 1))
    zg = np.zeros((n_gap, 1))
    # variables: K coefficients then the error bound t
    A_ub = np.vstack([
        np.hstack([Tf, -ones]),
        np.hstack([-Tf, -ones]),
        np.hstack([Tg, zg]),
        np.hstack([-Tg, zg]),
    ])
    b_ub = np.concatenate([f, -f, np.full(n_gap, bound), np.zeros(n_gap)])
    cost = np.zeros(K + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * K + [(0, None)], method="highs")
    if res.status != 0:
        raise NumericalError(f"minimax LP failed at degree {degree}: {res.message}")
    coef = np.zeros(degree + 1)
    coef[orders] = res.x[:K]
    return coef


def fit_inverse_poly(kappa_s: float, degree: int, epsilon: float = math.nan) -> ChebyshevPoly:
    """Minimax odd polynomial of a fixed degree for ``1/(4 kappa x)``."""
    if degree % 2 == 0:
        raise InputError("degree must be odd")
    coef = _lp_fit(kappa_s, degree)
    p = ChebyshevPoly(coef, kappa_s, epsilon)
    return ChebyshevPoly(coef, kappa_s, epsilon, poly_residual(p, kappa_s))


def approx_inverse_poly(kappa_s: float, epsilon: float, max_degree: int = MAX_DEGREE,
                        relative: bool = True) -> ChebyshevPoly:
    """Lowest odd degree minimax polynomial meeting ``epsilon`` on ``D_kappa``.

    The polynomial is additionally held in ``[0, 1/2]`` on ``[0, 1/kappa]`` so
    the QSVT encodability condition ``|P| <= 1`` holds with margin and
    under-resolved eigenvalues are never sign-flipped.

    Args:
        kappa_s: Condition number of the subnormalised matrix (> 1).
        epsilon: Sup-error target in ``(0, 1)``.
        max_degree: Degree cap.
        relative: Measure the error relative to the target's maximum 1/4,
            i.e. require ``|4 P(x) - 1/(kappa x)| <= epsilon``.  With
            ``False`` the bound is ``|P(x) - 1/(4 kappa x)| <= epsilon``.
            The relative form is the stricter of the two.

    Returns:
        :class:`ChebyshevPoly` with the grid residual recorded.

    Raises:
        NumericalError: If no degree up to ``max_degree`` meets ``epsilon``.
    """
    if not kappa_s > 1.0:
        raise InputError("kappa_s must exceed 1")
    if not 0.0 < epsilon < 1.0:
        raise InputError("epsilon must lie in (0, 1)")

    tol = epsilon / 4.0 if relative else epsilon
    cache = {}

    def ok(d):
        if d not in cache:
            cache[d] = fit_inverse_poly(kappa_s, d, epsilon)
        return cache[d].residual <= tol

    hi = 1
    while not ok(hi):
        if hi >= max_degree:
            raise NumericalError(f"epsilon {epsilon} not met up to degree {max_degree}")
        hi = min(max_degree, 2 * hi + 1)
    lo = (hi - 1) // 2 if hi > 1 else 1
    if lo % 2 == 0:
        lo -= 1
    # invariant: lo fails (or lo == hi), hi passes
    while hi - lo > 2:
        mid = (lo + hi) // 2
        if mid % 2 == 0:
            mid += 1
        if mid >= hi:
            mid = hi - 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    if lo != hi and ok(lo):
        hi = lo
    return cache[hi]


def _wx_eval(phis, x):
    """``<0| exp(i phi_0 Z) prod_k W(x) exp(i phi_k Z) |0>`` for an array of ``x``."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    r0 = np.full(x.shape, np.exp(1j * phis[0]))
    r1 = np.zeros(x.shape, dtype=complex)
    for ph in phis[1:]:
        r0, r1 = r0 * x + r1 * 1j * s, r0 * 1j * s + r1 * x
        r0 = r0 * np.exp(1j * ph)
        r1 = r1 * np.exp(-1j * ph)
    return r0


def _full_from_reduced(red, d):
    # symmetric full phases; odd d gives an even number d + 1
    full = np.concatenate([red, red[::-1]])
    full[0] += np.pi / 4
    full[-1] += np.pi / 4
    return full


def wx_phases_fpi(coef, tol=1e-13, maxiter=2000):
    """Symmetric Wx phases with ``Im <0|U|0> = p`` by fixed-point iteration.

    Args:
        coef: Full Chebyshev coefficients of an odd ``p`` with
            ``max |p| < 1`` on ``[-1, 1]``.
        tol: Stop when the coefficient residual max-norm drops below ``tol``.
        maxiter: Iteration cap.

    Returns:
        ``(phases, residual, iterations)`` with ``d + 1`` phases.
    """
    coef = np.asarray(coef, dtype=float)
    d = len(coef) - 1
    if d % 2 == 0:
        raise InputError("fixed-point solver expects odd degree")
    dt = (d + 1) // 2
    orders = d - 2 * np.arange(dt)
    target = coef[orders]
    k = np.arange(dt)
    xk = np.cos(np.pi * (2 * k + 1) / (4 * dt))
    Tm = np.cos(np.outer(np.arccos(xk), orders))
    red = np.zeros(dt)
    res = np.inf
    for it in range(1, maxiter + 1):
        g = _wx_eval(_full_from_reduced(red, d), xk).imag
        F = (2.0 / dt) * (Tm.T @ g)
        diff = F - target
        res = float(np.max(np.abs(diff)))
        if res < tol:
            break
        red = red - 0.5 * diff
    if not np.isfinite(res) or res >= tol:
        raise NumericalError(f"phase solver did not converge (residual {res:.3e})")
    return _full_from_reduced(red, d), res, it


def wx_to_reflection(wx):
    """Wx phases to a reflection word of the same length.

    Uses ``W(x) = i exp(-i pi Z/4) R(x) exp(-i pi Z/4)``, then rotates the
    output phase by ``-pi/4`` and the input phase by ``-pi/4 - arg((-i)**d)``
    so that the real part of the ``+phi`` column equals ``Im <0|U_wx|0>`` and
    its off-diagonal entry is purely imaginary.
    """
    wx = np.asarray(wx, dtype=float)
    d = len(wx) - 1
    out = wx - np.pi / 2
    out[0] = wx[0] - np.pi / 2
    out[-1] = wx[-1] - np.pi / 2 - np.angle((-1j) ** d)
    return out


def reflection_to_projector(ref):
    """Fold the per-branch global phase ``exp(i sum phi)`` into the input phase."""
    ref = np.asarray(ref, dtype=float).copy()
    ref[-1] = (ref[-1] - ref[:-1].sum()) / 2.0
    return ref


def projector_to_reflection(ph):
    """Inverse of :func:`reflection_to_projector`."""
    ph = np.asarray(ph, dtype=float).copy()
    ph[-1] = 2.0 * ph[-1] + ph[:-1].sum()
    return ph


def wrap(phis):
    """Map angles into ``(-pi, pi]``."""
    w = np.mod(np.asarray(phis, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w[w == -np.pi] = np.pi
    return w


def to_projector(ps: PhaseFactorSet) -> PhaseFactorSet:
    """Convert any supported convention to ``projector``."""
    if ps.convention == "projector":
        return ps
    if ps.convention == "reflection":
        f = reflection_to_projector(ps.factors)
    elif ps.convention == "wx":
        f = reflection_to_projector(wx_to_reflection(ps.factors))
    else:
        raise InputError(f"unknown phase convention {ps.convention!r}")
    return PhaseFactorSet(wrap(f), ps.kappa_s, ps.epsilon, "projector", ps.parity)


def phases_from_poly(p: ChebyshevPoly, tol: float = 1e-13, maxiter: int = 2000) -> PhaseFactorSet:
    """Projector-convention phases whose QSVT real part reproduces ``p``.

    Raises:
        InputError: If ``|p|`` is not below 1 on ``[-1, 1]``.
        NumericalError: If the solver does not converge.
    """
    x = np.cos(np.linspace(0, np.pi, 4 * p.degree + 101))
    if np.max(np.abs(p(x))) >= 1.0:
        raise InputError("polynomial must satisfy |p| < 1 on [-1, 1]")
    wx, _, _ = wx_phases_fpi(p.coef, tol=tol, maxiter=maxiter)
    ps = PhaseFactorSet(wx, p.kappa_s, p.epsilon, "wx")
    return to_projector(ps)


def qsp_eval(phases: PhaseFactorSet, x, offdiag: bool = False):
    """Scalar QSVT value: the average of the ``+phi`` and ``-phi`` sequences.

    Uses the reflection signal ``R(x) = [[x, sqrt(1-x^2)], [sqrt(1-x^2), -x]]``
    for every ``U`` and ``U^dag`` and ``diag(exp(i 2 phi), 1)`` for each
    projector phase, matching the matrix-level emulation.

    Args:
        phases: Phase set in any convention.
        x: Evaluation points in ``[-1, 1]``.
        offdiag: Also return the averaged weight outside the flagged block.

    Returns:
        Complex array (or scalar); the imaginary part vanishes for valid sets.
        With ``offdiag`` a pair ``(block, outside)``.
    """
    ps = to_projector(phases)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    t0 = np.zeros(x.shape, dtype=complex)
    t1 = np.zeros(x.shape, dtype=complex)
    f = ps.factors
    for sign in (1.0, -1.0):
        # column vector v = S |0>, applied right to left; f[-1] acts on the input
        v0 = np.full(x.shape, np.exp(2j * sign * f[-1]), dtype=complex)
        v1 = np.zeros(x.shape, dtype=complex)
        for ph in f[-2::-1]:
            v0, v1 = x * v0 + s * v1, s * v0 - x * v1
            v0 = v0 * np.exp(2j * sign * ph)
        t0 += v0
        t1 += v1
    t0, t1 = t0 / 2, t1 / 2
    if scalar:
        t0, t1 = t0[0], t1[0]
    return (t0, t1) if offdiag else t0


def write_phases(ps: PhaseFactorSet, path):
    """JSON phase file; floats are written with ``repr`` so reads are bit-exact."""
    doc = {
        "version": FILE_VERSION,
        "kappa_s": ps.kappa_s,
        "epsilon": ps.epsilon,
        "degree": ps.degree,
        "parity": ps.parity,
        "convention": ps.convention,
        "factors": [float(v) for v in ps.factors],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def read_phases(path, convert: bool = True) -> PhaseFactorSet:
    """Read a phase file, converting foreign conventions to ``projector``.

    Raises:
        InputError: Missing fields, unknown convention or count mismatch.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read phase file {path}: {exc}") from exc
    for key in ("version", "kappa_s", "epsilon", "degree", "parity", "convention", "factors"):
        if key not in doc:
            raise InputError(f"phase file missing field {key!r}")
    if doc["version"] != FILE_VERSION:
        raise InputError(f"unsupported phase file version {doc['version']}")
    conv = doc["convention"]
    if conv not in CONVENTIONS:
        raise InputError(f"unknown phase convention {conv!r}")
    ps = PhaseFactorSet(np.asarray(doc["factors"], dtype=float), float(doc["kappa_s"]), float(doc["epsilon"]),
                        conv, doc["parity"])
    if ps.degree != int(doc["degree"]):
        raise InputError(f"degree {doc['degree']} does not match {len(ps)} factors")
    return to_projector(ps) if convert else ps


def generate(kappa_s: float, epsilon: float, max_degree: int = MAX_DEGREE, relative: bool = True):
    """Polynomial and projector-convention phases for ``1/(4 kappa x)``.

    Returns:
        Tuple ``(poly, phases)``.
    """
    p = approx_inverse_poly(kappa_s, epsilon, max_degree, relative)
    return p, phases_from_poly(p)


def scaled_chebyshev(beta: float, degree: int, kappa_s: float = math.nan) -> ChebyshevPoly:
    """``beta * T_degree`` as a :class:`ChebyshevPoly`."""
    coef = np.zeros(degree + 1)
    coef[degree] = beta
    return ChebyshevPoly(coef, kappa_s, math.nan)
