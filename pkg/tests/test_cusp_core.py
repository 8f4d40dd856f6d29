import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cusplab.cusp_core import (
    A3System,
    EpsFlatBump,
    Monomial,
    OriginBump,
    PointClass,
    StatePoint,
    check_nf_condition,
    classify_point,
    critical_branches,
    cubic_discriminant_sign,
    eval_fast,
    eval_slow,
    fold_curve_param,
    layer_field,
    potential,
    principal_system,
    quasihomogeneous_order,
    stock_flat_system,
)
from cusplab.errors import DomainError, EvaluationError

finite = st.floats(-2.0, 2.0, allow_nan=False)
P = principal_system()


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "point, expected",
    [
        ((0, 0, 0, 0), (0, 0, 0, 0)),
        ((-1, 0, 1, 0.1), (0.1, 0, 0, 0)),
        ((0, -1, 2, 0), (0, 0, -6, 0)),
    ],
)
def test_eval_fast_examples(point, expected):
    assert np.allclose(eval_fast(P, StatePoint(*point)), expected, atol=1e-15)


@pytest.mark.parametrize(
    "point, expected",
    [((-1, 0, 1, 0.1), (1, 0, 0, 0)), ((0, 0, 1, 0.5), (1, 0, -2, 0))],
)
def test_eval_slow_examples(point, expected):
    assert np.allclose(eval_slow(P, StatePoint(*point)), expected, atol=1e-14)


def test_eval_slow_rejects_eps_zero():
    with pytest.raises(DomainError, match="ε=0"):
        eval_slow(stock_flat_system("eps"), StatePoint(0, 0, 1, 0))


@pytest.mark.parametrize(
    "point, expected",
    [((0, 0, 0, 0.3), (0, 0, 0, 0)), ((-1, 0, 0, 0.3), (0, 0, 1, 0)), ((0, -1, 1, 0), (0, 0, 0, 0))],
)
def test_layer_field_examples(point, expected):
    assert np.allclose(layer_field(P, StatePoint(*point)), expected, atol=1e-15)


def test_non_finite_perturbation_names_component():
    bad = A3System(f2=lambda a, b, z, eps: math.inf)
    with pytest.raises(EvaluationError, match="f2"):
        eval_fast(bad, StatePoint(0, 0, 0, 0.1))


def test_perturbed_field_formula():
    s = A3System(lambda a, b, z, e: 2.0, lambda a, b, z, e: 3.0, lambda a, b, z, e: 4.0)
    v = eval_fast(s, StatePoint(1.0, 0.5, 1.0, 0.1))
    assert np.allclose(v, [0.1 * 3.0, 0.1 * 3.0, -(1 + 0.5 + 1 + 0.4), 0.0])


def test_fast_jacobian_matches_finite_differences():
    s = stock_flat_system("origin", 1.0)
    y = np.array([0.3, -0.2, 0.7, 0.05])
    J = s.fast_jacobian(y)
    h = 1e-6
    fd = np.column_stack([(s.fast_rhs(y + h * e) - s.fast_rhs(y - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(J, fd, atol=1e-7)


def test_state_point_validation():
    with pytest.raises(DomainError):
        StatePoint(0, 0, 0, -1e-3)
    with pytest.raises(DomainError):
        StatePoint(math.nan, 0, 0, 0)


@given(finite, finite, finite, st.floats(1e-4, 1.0))
def test_slow_times_eps_is_fast(a, b, z, eps):
    p = StatePoint(a, b, z, eps)
    assert np.allclose(eval_slow(P, p) * eps, eval_fast(P, p), rtol=1e-13, atol=1e-15)


# ---------------------------------------------------------------------------
# critical set
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "a, b, zs, mult",
    [(0.0, 0.0, [0.0], [3]), (0.0, -1.0, [-1.0, 0.0, 1.0], [1, 1, 1]), (-1.0, 0.0, [1.0], [1])],
)
def test_critical_branches_examples(a, b, zs, mult):
    roots = critical_branches(a, b)
    assert [r.multiplicity for r in roots] == mult
    assert np.allclose([r.z for r in roots], zs, atol=1e-15)
    for r in roots:
        assert abs(r.z**3 + b * r.z + a) < 1e-12


def test_double_root_on_fold():
    a, b = fold_curve_param(1.0)
    roots = critical_branches(a, b)
    assert [(round(r.z, 12), r.multiplicity) for r in roots] == [(-2.0, 1), (1.0, 2)]


@given(st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False))
def test_root_residuals_and_count(a, b):
    roots = critical_branches(a, b)
    for r in roots:
        assert abs(r.z**3 + b * r.z + a) < 1e-12 * max(1.0, abs(a), abs(b) ** 1.5)
    sign = cubic_discriminant_sign(a, b)
    n_distinct = len(roots)
    if sign > 0:
        assert n_distinct == 3
    elif sign < 0:
        assert n_distinct == 1
    else:
        assert sum(r.multiplicity for r in roots) == 3 and n_distinct < 3
    assert [r.z for r in roots] == sorted(r.z for r in roots)


def test_classify_point_examples():
    assert classify_point(0, 0, 0) is PointClass.CUSP
    assert classify_point(2, -3, 1) is PointClass.FOLD
    assert classify_point(-1, 0, 1) is PointClass.REGULAR
    assert classify_point(0, 0, 1) is PointClass.OFF_MANIFOLD


@given(st.floats(-1.5, 1.5, allow_nan=False).filter(lambda z: abs(z) > 1e-3))
def test_fold_curve_is_classified_fold(z):
    a, b = fold_curve_param(z)
    assert classify_point(a, b, z) is PointClass.FOLD


@pytest.mark.parametrize("z, ab", [(0, (0, 0)), (1, (2, -3)), (-1, (-2, -3))])
def test_fold_curve_param_examples(z, ab):
    assert fold_curve_param(z) == ab


@pytest.mark.parametrize("abz, v", [((0, 0, 0), 0.0), ((0, 0, 1), 0.25), ((1, -2, 1), 0.25)])
def test_potential_examples(abz, v):
    assert potential(*abz) == pytest.approx(v, abs=1e-15)


def test_potential_gradient_is_cubic_on_grid():
    g = np.linspace(-2, 2, 10)
    h = 1e-5
    worst = 0.0
    for a in g:
        for b in g:
            for z in g:
                d = (potential(a, b, z + h) - potential(a, b, z - h)) / (2 * h)
                worst = max(worst, abs(d - (z**3 + b * z + a)))
    assert worst < 1e-8


# ---------------------------------------------------------------------------
# grading
# ---------------------------------------------------------------------------


def test_quasihomogeneous_order_examples():
    assert quasihomogeneous_order(Monomial((1, 1, 0, 0))) == 5
    assert quasihomogeneous_order(Monomial((0, 0, 1, 1))) == 6
    assert quasihomogeneous_order(Monomial((0, 0, 0, 0))) == 0


exps = st.tuples(*[st.integers(0, 6)] * 4)


@given(exps, exps)
def test_order_is_additive(e1, e2):
    m1, m2 = Monomial(e1), Monomial(e2)
    assert quasihomogeneous_order(m1 * m2) == quasihomogeneous_order(m1) + quasihomogeneous_order(m2)


def test_nf_condition_examples():
    assert check_nf_condition([Monomial((1, 0, 0, 1))], 1, 3)
    assert check_nf_condition([Monomial((0, 0, 0, 1))], 3, 3)
    assert not check_nf_condition([Monomial((1, 0, 0, 0))], 1, 3)
    assert not check_nf_condition([Monomial((0, 0, 0, 1))], 1, 3)


def test_monomial_rejects_negative_exponent():
    with pytest.raises(DomainError):
        Monomial((-1, 0, 0, 0))


# ---------------------------------------------------------------------------
# stock flat perturbations
# ---------------------------------------------------------------------------


def test_origin_bump_is_flat_at_origin():
    f = OriginBump(1.0)
    assert f(0, 0, 0, 0) == 0.0
    for s in (0.1, 0.05, 0.02):
        # smaller than any power of the distance
        assert f(s, 0, 0, 0) < s**8


def test_eps_bump_is_flat_in_eps():
    f = EpsFlatBump(1.0, 0.06)
    assert f(1, 1, 1, 0.0) == 0.0
    vals = [f(0, 0, 0, e) / e**4 for e in (1e-2, 5e-3, 2.5e-3)]
    assert vals[0] > vals[1] > vals[2]


def test_amplitude_zero_is_principal():
    s = stock_flat_system("eps", 0.0)
    assert s.principal
    y = np.array([0.2, 0.1, -0.3, 0.01])
    assert np.array_equal(s.fast_rhs(y), P.fast_rhs(y))
