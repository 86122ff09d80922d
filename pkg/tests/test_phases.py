import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsvtemu.errors import InputError, NumericalError
from qsvtemu.phases import (
    PhaseFactorSet,
    approx_inverse_poly,
    domain_grid,
    fit_inverse_poly,
    generate,
    inverse_target,
    projector_to_reflection,
    phases_from_poly,
    qsp_eval,
    read_phases,
    reflection_to_projector,
    scaled_chebyshev,
    to_projector,
    wrap,
    write_phases,
)


@pytest.fixture(scope="module")
def k5():
    return generate(5.0, 0.1)


def test_trivial_degree():
    p, ps = generate(1.1, 0.5)
    assert p.degree <= 5
    assert ps.degree == p.degree and len(ps) == p.degree + 1


def test_poly_is_odd_and_bounded(k5):
    p, _ = k5
    assert np.all(p.coef[::2] == 0)
    x = np.linspace(-1, 1, 4001)
    assert np.max(np.abs(p(x))) < 1
    small = np.linspace(0, 1 / 5, 200)
    assert np.all(p(small) >= -1e-12) and np.all(p(small) <= 0.5 + 1e-12)


def test_relative_residual(k5):
    p, _ = k5
    assert p.residual <= 0.1 / 4
    assert fit_inverse_poly(5.0, p.degree - 2).residual > 0.1 / 4


def test_absolute_mode_is_looser():
    assert approx_inverse_poly(10.0, 0.05, relative=False).degree <= approx_inverse_poly(10.0, 0.05).degree


def test_input_validation():
    with pytest.raises(InputError):
        approx_inverse_poly(1.0, 0.1)
    with pytest.raises(InputError):
        approx_inverse_poly(5.0, 1.5)
    with pytest.raises(InputError):
        fit_inverse_poly(5.0, 4)
    with pytest.raises(NumericalError):
        approx_inverse_poly(50.0, 1e-3, max_degree=31)


def test_qsp_reproduces_poly(k5):
    p, ps = k5
    x = np.linspace(-1, 1, 1001)
    blk, out = qsp_eval(ps, x, offdiag=True)
    assert np.max(np.abs(blk.real - p(x))) < 1e-10
    assert np.max(np.abs(blk.imag)) < 1e-10
    assert np.max(np.abs(out)) < 1e-10


def test_qsp_grid_residual(k5):
    p, ps = k5
    x = domain_grid(5.0, 2001)
    assert np.max(np.abs(qsp_eval(ps, x).real - inverse_target(x, 5.0))) <= 0.1


def test_chebyshev_phases():
    # beta T_3 evaluated through the QSP sequence
    ps = phases_from_poly(scaled_chebyshev(0.3, 3, 8.0))
    x = np.linspace(-1, 1, 101)
    assert np.allclose(qsp_eval(ps, x).real, 0.3 * (4 * x**3 - 3 * x), atol=1e-12)


def test_phases_reject_large_poly():
    with pytest.raises(InputError):
        phases_from_poly(scaled_chebyshev(1.0, 3))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=12))
def test_reflection_projector_round_trip(f):
    f = np.array(f)
    assert np.allclose(projector_to_reflection(reflection_to_projector(f)), f, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=10))
def test_conventions_evaluate_alike(f):
    f = np.array(f)
    ref = PhaseFactorSet(f, 2.0, 0.1, "reflection")
    pap = to_projector(ref)
    x = np.linspace(-1, 1, 33)
    assert np.allclose(qsp_eval(ref, x), qsp_eval(pap, x), atol=1e-10)


def test_wrap_range():
    w = wrap([np.pi, -np.pi, 3 * np.pi, 0.5])
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    assert w[1] == np.pi and w[3] == 0.5


def test_phase_file_round_trip(tmp_path, k5):
    _, ps = k5
    write_phases(ps, tmp_path / "p.json")
    back = read_phases(tmp_path / "p.json")
    assert np.array_equal(back.factors, ps.factors)
    assert back.degree == ps.degree and back.kappa_s == 5.0


def test_phase_file_foreign_convention(tmp_path, k5):
    _, ps = k5
    ref = PhaseFactorSet(projector_to_reflection(ps.factors), 5.0, 0.1, "reflection")
    write_phases(ref, tmp_path / "r.json")
    back = read_phases(tmp_path / "r.json")
    x = np.linspace(-1, 1, 51)
    assert np.allclose(qsp_eval(back, x), qsp_eval(ps, x), atol=1e-10)


@pytest.mark.parametrize("edit", [
    lambda d: d.pop("degree"),
    lambda d: d.update(convention="lr"),
    lambda d: d.update(degree=3),
    lambda d: d.update(version=2),
])
def test_phase_file_errors(tmp_path, k5, edit):
    _, ps = k5
    p = tmp_path / "p.json"
    write_phases(ps, p)
    d = json.loads(p.read_text())
    edit(d)
    p.write_text(json.dumps(d))
    with pytest.raises(InputError):
        read_phases(p)


def test_domain_grid_bounds():
    x = domain_grid(4.0, 101)
    assert np.min(np.abs(x)) == pytest.approx(0.25)
    assert x.max() == 1.0 and x.min() == -1.0
