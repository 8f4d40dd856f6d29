import json
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from cusplab.cusp_core import A3System, principal_system, stock_flat_system
from cusplab.errors import DomainError, SweepError
from cusplab.transition_lab import (
    P_PLUS,
    REPORT_COLUMNS,
    b1_growth_slope,
    chart_exit_b1,
    estimate_transition,
    exit_root,
    flatness_robustness,
    fold_exponent_fit,
    fold_passage,
    layer_study,
    locate_fiber,
    sweep_eps,
)

P = principal_system()

# Independent oracle: with b conserved, -eps log dPi_z/dz equals the integral of
# 3 z^2 + b over a in [-1, 1] along the orbit, integrated in a-time with LSODA
# (rtol 1e-13) on dz/da = -(z^3 + b z + a)/eps.
RATE_ORACLE = {
    (0.0, 2.0, 1e-2): (3.586709874238471, -0.9988826396635863),
    (0.3, 2.0, 1e-2): (3.1829408152304244, -0.8990173462157972),
    (-0.3, 2.0, 1e-2): (4.189070962018349, -1.0987926519833402),
}

# Same oracle for the fold passage: dz/da = -(z^3 - z + a)/eps2 from the upper
# root at a = -1, event z = 1/sqrt(3) - 1/4.
FOLD_OFFSET_ORACLE = {1e-3: 0.017434291064411966, 1e-4: 0.004005334523103143}


@pytest.mark.parametrize("key", sorted(RATE_ORACLE))
def test_rate_matches_independent_oracle(key):
    b, z0, eps = key
    rate, z_exit = RATE_ORACLE[key]
    est = estimate_transition(P, b, z0, eps)
    assert est.rate_num == pytest.approx(rate, rel=1e-8)
    assert est.exit_z == pytest.approx(z_exit, rel=1e-8)


def test_rate_example_near_target():
    est = estimate_transition(P, 0.0, 2.0, 1e-2)
    assert abs(est.rate_num - 3.6) < 0.25
    assert est.z_exit_sign == -1
    assert max(est.hit_residuals) < 1e-10


def test_start_on_manifold_stays_on_it():
    fiber = locate_fiber(P, 0.0, 1e-2)
    est = estimate_transition(P, 0.0, float(fiber[2]), 1e-2)
    assert est.base_offset == 0.0
    assert est.exit_z - exit_root(0.0, 1.0) == pytest.approx(est.shift_num, abs=1e-8)


def test_preconditions():
    with pytest.raises(DomainError):
        estimate_transition(P, 0.0, 2.0, 0.0)
    with pytest.raises(DomainError):
        estimate_transition(P, 0.0, -1.0, 1e-2)
    with pytest.raises(DomainError):
        estimate_transition(P, 0.0, 2.0, 1e-2, method="secant")


@pytest.mark.parametrize("b", [0.0, 0.2, -0.2])
def test_reflection_symmetry(b):
    fwd = estimate_transition(P, b, None, 1e-2)
    ref = estimate_transition(P, b, None, 1e-2, reflect=True)
    assert abs(fwd.rate_num - ref.rate_num) < 1e-6


def test_determinant_and_variational_agree_when_b_is_conserved():
    a = estimate_transition(P, 0.2, None, 1e-2)
    b = estimate_transition(P, 0.2, None, 1e-2, method="fiber")
    assert a.rate_num == pytest.approx(b.rate_num, rel=1e-9)


def test_principal_sweep_converges_and_shift_shrinks():
    rep = sweep_eps(P, 0.0, [1e-2, 5e-3, 2e-3, 1e-3])
    assert rep.target_I == pytest.approx(-3.6, abs=1e-14)
    assert rep.monotone()
    assert rep.deviations[-1] < 0.3
    shifts = [abs(r.shift_num) for r in rep.rows]
    assert shifts[-1] < 0.1
    assert all(x > y for x, y in zip(shifts, shifts[1:]))
    assert all(r.z_exit_sign == -1 for r in rep.rows)
    assert rep.slope_eps == pytest.approx(1.0, abs=0.05)


def test_sweep_at_positive_b_uses_b_dependent_target():
    rep = sweep_eps(P, 0.3, [1e-2, 5e-3, 2e-3])
    assert rep.target_I == pytest.approx(-3.1680259778126696, rel=1e-12)
    assert rep.monotone()


def test_sweep_preconditions():
    with pytest.raises(SweepError):
        sweep_eps(P, 0.0, [])
    with pytest.raises(DomainError):
        sweep_eps(P, 0.0, [1e-3, 1e-2])


def failing_below(threshold):
    def f1(a, b, z, eps):
        return math.nan if eps < threshold else 0.0

    return A3System(f1=f1, name="fails-at-small-eps")


def test_failed_row_is_isolated():
    rep = sweep_eps(failing_below(4e-3), 0.0, [1e-2, 5e-3, 2e-3])
    assert [r.eps for r in rep.rows] == [1e-2, 5e-3]
    assert len(rep.failures) == 1 and rep.failures[0][0] == 2e-3
    assert "EvaluationError" in rep.failures[0][1]
    rows = rep.row_dicts()
    assert math.isnan(rows[-1]["rate_num"])
    with pytest.raises(SweepError):
        sweep_eps(failing_below(1.0), 0.0, [1e-2])


def test_report_files(tmp_path):
    rep = sweep_eps(P, 0.0, [1e-2, 5e-3])
    csv_text = rep.to_csv(tmp_path / "r.csv")
    assert csv_text.splitlines()[0] == ",".join(REPORT_COLUMNS)
    assert b"\r" not in (tmp_path / "r.csv").read_bytes()
    doc = json.loads(rep.to_json(tmp_path / "r.json", config={"seed": 0}))
    for key in ("rtol", "atol", "a_minus", "a_plus", "git_describe", "config"):
        assert key in doc["meta"]
    assert len(doc["rows"]) == 2


def test_parallel_sweep_is_deterministic():
    serial = sweep_eps(P, 0.1, [1e-2, 5e-3, 2e-3])
    with ThreadPoolExecutor(3) as pool:
        par = sweep_eps(P, 0.1, [1e-2, 5e-3, 2e-3], executor=pool)
    assert [r.rate_num for r in serial.rows] == [r.rate_num for r in par.rows]
    assert serial.to_csv().split("\n")[0] == par.to_csv().split("\n")[0]


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


def test_layer_rows():
    rows = layer_study(P, 1e-3, [0.0, 0.5], run_transition=False)
    assert rows[0].b1_exit == 0.0
    assert rows[1].label.inner and not rows[1].escaped
    assert abs(rows[1].b1_exit) <= 2.0


def test_layer_row_with_rate():
    (row,) = layer_study(P, 1e-2, [0.5])
    assert row.rate_num > 0


def test_fixed_b_escapes_with_two_fifths_law():
    eps = [1e-4, 1e-3, 1e-2]
    slope, b1 = b1_growth_slope(P, 0.5, eps)
    assert slope == pytest.approx(-0.4, abs=1e-6)
    assert b1 == pytest.approx([0.5 * e**-0.4 for e in eps], rel=1e-9)
    assert chart_exit_b1(P, 0.5, 1e-4) > 2.0


# ---------------------------------------------------------------------------
# fold
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("eps2", sorted(FOLD_OFFSET_ORACLE))
def test_fold_offset_matches_oracle(eps2):
    offset, jump = fold_passage(eps2)
    assert offset == pytest.approx(FOLD_OFFSET_ORACLE[eps2], rel=1e-8)
    assert jump[1] == pytest.approx(P_PLUS[1], abs=1e-10)


def test_fold_exponent_fit():
    fit = fold_exponent_fit([10 ** (-5 + k / 3) for k in range(7)])
    assert 0.60 <= fit.slope <= 0.73
    assert fit.jump_distance(0) < 0.1


def test_fold_fit_preconditions():
    with pytest.raises(DomainError):
        fold_exponent_fit([1e-3])
    with pytest.raises(DomainError):
        fold_exponent_fit([1e-3, 1e-4])


# ---------------------------------------------------------------------------
# flat perturbations
# ---------------------------------------------------------------------------


def test_amplitude_zero_is_bitwise_principal():
    a = sweep_eps(stock_flat_system("eps", 0.0), 0.0, [1e-2])
    b = sweep_eps(P, 0.0, [1e-2])
    assert a.rows[0].rate_num == b.rows[0].rate_num
    assert a.rows[0].shift_num == b.rows[0].shift_num


def test_flat_difference_below_principal_deviation():
    rep = flatness_robustness(stock_flat_system("eps", 1.0), 0.0, [1e-2, 5e-3])
    assert rep.differences[0] < rep.deviations[0]
    assert rep.ratios[0] > 4


def test_flat_perturbed_rate_is_contraction():
    est = estimate_transition(stock_flat_system("eps", 1.0), 0.0, None, 1e-2)
    assert est.rate_num > 0
    assert np.isfinite(est.shift_num)
