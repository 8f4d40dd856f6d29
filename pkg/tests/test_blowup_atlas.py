import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cusplab.blowup_atlas import (
    ChartId,
    ChartPoint,
    blow_down,
    blow_down_array,
    blow_down_jacobian,
    blow_up,
    chart_field,
    classify_entry,
    in_chart_domain,
    matching_map,
)
from cusplab.cusp_core import StatePoint, critical_branches, principal_system, stock_flat_system
from cusplab.errors import ChartDomainError, ConfigError, DomainError

P = principal_system()
charts = st.sampled_from(list(ChartId))
coord = st.floats(-2.0, 2.0, allow_nan=False)
radius = st.floats(1e-3, 1.0)


def make_point(chart, r, c):
    c = list(c)
    if chart.eps_slot is not None:
        c[chart.eps_slot] = abs(c[chart.eps_slot])
    return ChartPoint(chart, r, tuple(c))


def assert_state(s, expected, rel=1e-12):
    assert np.allclose(s.as_array(), expected, rtol=rel, atol=1e-300)


def test_chart_names_parse_case_insensitively():
    assert ChartId.parse("EN") is ChartId.EN
    assert ChartId.parse("B-") is ChartId.BMINUS
    assert ChartId.parse("b+") is ChartId.BPLUS
    with pytest.raises(DomainError):
        ChartId.parse("polar")


def test_kappa_values():
    assert [c.kappa for c in ChartId] == [3, 3, 1, 1, 1]


def test_blow_down_examples():
    assert_state(blow_down(ChartPoint(ChartId.EPS, 0.1, (1, 1, 1))), [1e-3, 1e-2, 0.1, 1e-5])
    assert_state(blow_down(ChartPoint(ChartId.EN, 0.0, (0.3, -0.7, 2.0))), [0, 0, 0, 0])
    assert_state(blow_down(ChartPoint(ChartId.BMINUS, 0.2, (0, 0, 1))), [0, -0.04, 0, 3.2e-4])


def test_blow_up_examples():
    p = blow_up(ChartId.EN, StatePoint(-0.001, 0, 0, 0))
    assert p.r == pytest.approx(0.1, rel=1e-14) and p.c == (0.0, 0.0, 0.0)
    q = blow_up(ChartId.EPS, StatePoint(0, 0, 0, 1e-5))
    assert q.r == pytest.approx(0.1, rel=1e-14) and q.c == (0.0, 0.0, 0.0)
    with pytest.raises(ChartDomainError, match="eps > 0"):
        blow_up(ChartId.EPS, StatePoint(0.1, 0, 0, 0))


def test_matching_map_examples():
    q = matching_map(ChartId.EN, ChartId.EPS, ChartPoint(ChartId.EN, 0.1, (0, 0, 1)))
    assert q.r == pytest.approx(0.1, rel=1e-14)
    assert np.allclose(q.c, (-1, 0, 0), atol=1e-14)
    with pytest.raises(ChartDomainError):
        matching_map(ChartId.EN, ChartId.EPS, ChartPoint(ChartId.EN, 0.1, (0, 0, 0)))
    src = ChartPoint(ChartId.EPS, 0.1, (1, 0, 0))
    p = matching_map(ChartId.EPS, ChartId.EX, src)
    assert p == blow_up(ChartId.EX, blow_down(src))
    literal = blow_up(ChartId.EX, StatePoint(1e-3, 0, 0, 1e-5))
    assert np.allclose(p.as_array(), literal.as_array(), rtol=1e-14)
    assert p.r == pytest.approx(0.1, rel=1e-14) and np.allclose(p.c, (0, 0, 1), rtol=1e-12)


def test_chart_field_examples():
    assert np.allclose(chart_field(ChartId.EN, P)(np.array([0.0, 0.0, 1.0, 0.0])), 0, atol=1e-14)
    assert np.allclose(chart_field(ChartId.EPS, P)(np.zeros(4)), [0, 1, 0, 0], atol=1e-15)
    assert np.allclose(chart_field(ChartId.BPLUS, P)(np.array([0, 0, 0, 0.1])), [0, 0.1, 0, 0], atol=1e-15)


def test_negative_radius_rejected():
    with pytest.raises(ChartDomainError):
        ChartPoint(ChartId.EPS, -0.1, (0, 0, 0))


@given(charts, radius, coord, coord, coord)
def test_round_trip(chart, r, c0, c1, c2):
    p = make_point(chart, r, (c0, c1, c2))
    q = blow_up(chart, blow_down(p))
    assert np.allclose(q.as_array(), p.as_array(), rtol=1e-12, atol=1e-12 * r)


@given(charts, charts, radius, coord, coord, coord)
def test_matching_is_consistent_and_involutive(src, dst, r, c0, c1, c2):
    p = make_point(src, r, (c0, c1, c2))
    s = blow_down(p)
    if not in_chart_domain(dst, s):
        with pytest.raises(ChartDomainError):
            matching_map(src, dst, p)
        return
    q = matching_map(src, dst, p)
    assert q == blow_up(dst, s)
    back = matching_map(dst, src, q)
    assert np.allclose(back.as_array(), p.as_array(), rtol=1e-12, atol=1e-12)


@given(charts, st.floats(1e-2, 1.0), coord, coord, st.floats(0.0, 2.0), st.booleans())
def test_pushforward_factor(chart, r, c0, c1, c2, flat):
    system = stock_flat_system("origin", 1.0) if flat else P
    c = [c0, c1, c2]
    if chart.eps_slot is None:
        c[0] = c2 + 0.1 if c0 == 0 else c0
    y = np.array([r, *make_point(chart, r, c).c])
    lhs = blow_down_jacobian(chart, y) @ chart_field(chart, system)(y)
    rhs = chart.kappa / r**2 * system.fast_rhs(blow_down_array(chart, y))
    scale = max(np.max(np.abs(rhs)), 1e-12)
    assert np.max(np.abs(lhs - rhs)) / scale < 1e-6


def test_flat_terms_vanish_on_sphere():
    system = stock_flat_system("eps", 1.0)
    for chart in ChartId:
        y = np.array([0.0, 0.4, -0.3, 0.2])
        assert np.array_equal(chart_field(chart, system)(y), chart_field(chart, P)(y))


def test_entry_chart_equilibrium_curve():
    rng = np.random.default_rng(1)
    f = chart_field(ChartId.EN, P)
    worst = 0.0
    for b1 in rng.uniform(-2.0, 2.0, 100):
        z1 = max(r.z for r in critical_branches(-1.0, b1))
        worst = max(worst, float(np.max(np.abs(f(np.array([0.0, b1, z1, 0.0]))))))
    assert worst < 1e-12


@pytest.mark.parametrize(
    "b, label",
    [(0.0, (True, False, False)), (0.5, (False, True, False)), (0.008, (True, True, False)),
     (-0.008, (True, False, True))],
)
def test_classify_entry_examples(b, label):
    lab = classify_entry(b, 1e-5, 0.5, 1.0)
    assert (lab.inner, lab.plus_lateral, lab.minus_lateral) == label


def test_classify_entry_needs_l_below_m():
    with pytest.raises(ConfigError):
        classify_entry(0.0, 1e-3, 1.0, 1.0)


@given(st.floats(-10, 10, allow_nan=False), st.floats(1e-8, 1.0))
def test_layer_flags_cover(b, eps):
    lab = classify_entry(b, eps)
    assert lab.inner or lab.plus_lateral or lab.minus_lateral
