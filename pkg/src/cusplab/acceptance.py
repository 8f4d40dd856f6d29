"""Desk-scale acceptance checks.

Each ``criterion_N`` function runs one check and returns a
:class:`CriterionResult` with a pass flag, the measured numbers and the wall
time; the time budget is part of the pass condition. :func:`run_suite` runs a
selection and adds the overall time check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from . import exp_maps as em
from .blowup_atlas import (
    ChartId,
    ChartPoint,
    blow_down,
    blow_down_array,
    blow_down_jacobian,
    blow_up,
    chart_field,
    in_chart_domain,
    matching_map,
)
from .cusp_core import principal_system, stock_flat_system
from .odeflow import Section, integrate_to_section
from .sdi import sdi_slow_flow, sdi_slow_path, sdi_target
from .transition_lab import (
    b1_growth_slope,
    flatness_robustness,
    fold_exponent_fit,
    layer_study,
    sweep_eps,
)

SUITE_BUDGET = 600.0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    wall_time: float
    budget: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.name} ({self.wall_time:.1f}s / {self.budget:.0f}s)"


def _timed(number, name, budget, fn: Callable[[], tuple[bool, dict]]) -> CriterionResult:
    t0 = time.perf_counter()
    ok, details = fn()
    dt = time.perf_counter() - t0
    details["within_budget"] = dt < budget
    return CriterionResult(number, name, bool(ok) and dt < budget, dt, budget, details)


# ---------------------------------------------------------------------------
# 1. slow divergence integral: closed form against quadrature
# ---------------------------------------------------------------------------


def sdi_grid(n_b: int = 8, n_z: int = 5, margin: float = 0.05):
    """(b, z_en, z_ex) cases with both endpoints on attracting sheets.

    For b < 0 the entry stays above the fold z_f and the exit below the
    landing point -2 z_f, so every path is a valid slow path.
    """
    cases = []
    for b in np.linspace(-1.0, 1.0, n_b):
        lo_en, hi_ex = 0.5, -0.5
        if b < 0:
            zf = math.sqrt(-b / 3.0)
            lo_en = max(lo_en, zf + margin)
            hi_ex = min(hi_ex, -2.0 * zf - margin)
        for z_en in np.linspace(lo_en, 2.0, n_z):
            for z_ex in np.linspace(-2.0, hi_ex, n_z):
                cases.append((float(b), float(z_en), float(z_ex)))
    return cases


def criterion_1() -> CriterionResult:
    def run():
        cases = sdi_grid()
        errs = [abs(sdi_slow_path(b, e, x, "closed") - sdi_slow_path(b, e, x, "quadrature"))
                for b, e, x in cases]
        worst = max(errs)
        return len(cases) == 200 and worst < 1e-9, {"cases": len(cases), "max_abs_error": worst}

    return _timed(1, "SDI closed form vs quadrature", 5.0, run)


# ---------------------------------------------------------------------------
# 2. rate convergence
# ---------------------------------------------------------------------------

RATE_EPS = (1e-2, 5e-3, 2e-3, 1e-3)


def criterion_2(target_shift: float = 0.0, b_values=(0.0, 0.3, -0.3), eps_list=RATE_EPS,
                rtol: float = 1e-10, atol: float = 1e-12) -> CriterionResult:
    def run():
        system = principal_system()
        ok = abs(-sdi_target(0.0) - 3.6) < 1e-12
        out = {"target_b0": -sdi_target(0.0)}
        for b in b_values:
            target = sdi_target(b) - target_shift
            rep = sweep_eps(system, b, eps_list, rtol=rtol, atol=atol, target_I=target)
            devs = rep.deviations
            good = (not rep.failures and rep.monotone() and devs[-1] < 0.3)
            ok = ok and good
            out[f"b={b:+.1f}"] = {
                "target": -target,
                "rates": [r.rate_num for r in rep.rows],
                "deviations": devs,
                "shifts": [r.shift_num for r in rep.rows],
                "exit_signs": [r.z_exit_sign for r in rep.rows],
                "slope_eps_log": rep.slope_eps_log,
                "slope_eps": rep.slope_eps,
                "failures": rep.failures,
                "passed": good,
            }
        return ok, out

    return _timed(2, "transition rate converges to the slow divergence integral", 180.0, run)


# ---------------------------------------------------------------------------
# 3. regular transition
# ---------------------------------------------------------------------------


def _tiny_atol(n, decaying):
    """Pure relative control on the decaying coordinates, 1e-12 elsewhere."""
    atol = np.full(n, 1e-12)
    atol[list(decaying)] = 1e-30
    return atol


def criterion_3() -> CriterionResult:
    def run():
        errs = {}
        for eps in (0.5, 0.1, 0.05):
            field_ = lambda y, e=eps: np.array([e, 0.0, -y[2], 0.0])
            y, _ = integrate_to_section(field_, [0.0, 0.0, 1.0, eps], Section("a", 1.0), 1,
                                        rtol=1e-12, atol=_tiny_atol(4, [2]))
            exact = em.regular_transition(0.0, 1.0, eps, 0.0, 1.0).log_factor
            errs[eps] = abs(math.log(y[2]) - exact) / abs(exact)
        worst = max(errs.values())
        return worst < 1e-8, {"relative_log_error": errs}

    return _timed(3, "regular transition matches Z exp(-(Uf-Ui)/eps)", 1.0, run)


# ---------------------------------------------------------------------------
# 4. saddle transitions
# ---------------------------------------------------------------------------


def _saddle1_case(rng):
    m = int(rng.integers(1, 3))
    beta = rng.uniform(0.2, 3.0, m)
    gamma = rng.uniform(0.5, 5.0)
    lam = rng.uniform(0.2, 3.0)
    w_out = rng.uniform(0.5, 2.0)
    w = rng.uniform(0.05, 0.5) * w_out
    u = rng.uniform(0.1, 1.0)
    v = rng.uniform(-1.0, 1.0, m) * w ** (beta / gamma)
    closed = em.saddle1_transition(beta, gamma, lam, u, v, w, w_out, 1.0)
    y0 = np.concatenate([[u], v, [w, 0.0]])
    y, _ = integrate_to_section(em.saddle1_model_field(beta, gamma, lam), y0,
                                Section(m + 1, w_out), 1, rtol=1e-12,
                                atol=_tiny_atol(m + 3, range(0, m + 1)))
    err_log = abs(y[-1] - closed.log_factor) / abs(closed.log_factor)
    err_uv = max(abs(y[0] - closed.u) / abs(closed.u),
                 *(abs(y[1:m + 1] - closed.v) / np.maximum(np.abs(closed.v), 1e-300)))
    return err_log, err_uv


def _saddle2_case(rng):
    m = int(rng.integers(1, 3))
    beta = rng.uniform(0.2, 3.0, m)
    gamma = rng.uniform(0.5, 5.0)
    lam = rng.uniform(0.2, 3.0)
    u_out = rng.uniform(0.5, 2.0)
    u = rng.uniform(0.2, 0.9) * u_out
    w = rng.uniform(0.01, 0.5)
    v = rng.uniform(-1.0, 1.0, m)
    closed = em.saddle2_transition(beta, gamma, lam, u, u_out, v, w, 1.0)
    y0 = np.concatenate([[u], v, [w, 0.0]])
    y, _ = integrate_to_section(em.saddle2_model_field(beta, gamma, lam), y0,
                                Section(0, u_out), 1, rtol=1e-12,
                                atol=_tiny_atol(m + 3, range(1, m + 2)))
    err_log = abs(y[-1] - closed.log_factor) / abs(closed.log_factor)
    err_vw = max(abs(y[m + 1] - closed.w) / closed.w,
                 *(abs(y[1:m + 1] - closed.v) / np.maximum(np.abs(closed.v), 1e-300)))
    return err_log, err_vw


def criterion_4(seed: int = 0, draws: int = 50) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        s1 = [_saddle1_case(rng) for _ in range(draws)]
        s2 = [_saddle2_case(rng) for _ in range(draws)]
        w1 = max(e for e, _ in s1)
        w2 = max(e for e, _ in s2)
        c1 = max(e for _, e in s1)
        c2 = max(e for _, e in s2)
        ok = max(w1, w2) < 1e-6 and max(c1, c2) < 1e-6
        return ok, {"draws": draws, "saddle1_log_err": w1, "saddle2_log_err": w2,
                    "saddle1_coord_err": c1, "saddle2_coord_err": c2}

    return _timed(4, "saddle closed forms vs integration", 10.0, run)


# ---------------------------------------------------------------------------
# 5. atlas
# ---------------------------------------------------------------------------


def random_chart_point(rng, chart: ChartId, r_max: float = 1.0) -> ChartPoint:
    r = rng.uniform(0.0, r_max)
    while r == 0.0:
        r = rng.uniform(0.0, r_max)
    c = rng.uniform(-2.0, 2.0, 3)
    if chart.eps_slot is not None:
        c[chart.eps_slot] = abs(c[chart.eps_slot])
    return ChartPoint(chart, r, tuple(c))


def _rel(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = np.maximum(np.abs(x), np.abs(y))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(scale > 0, np.abs(x - y) / np.where(scale > 0, scale, 1.0), 0.0)
    return float(np.max(r))


def criterion_5(seed: int = 0, n_round: int = 10_000, n_push: int = 1_000) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        charts = list(ChartId)
        rt = 0.0
        for k in range(n_round):
            p = random_chart_point(rng, charts[k % 5])
            q = blow_up(p.chart, blow_down(p))
            rt = max(rt, _rel(p.as_array(), q.as_array()))
        push = 0.0
        systems = [principal_system(), stock_flat_system("origin", 1.0)]
        for k in range(n_push):
            chart = charts[k % 5]
            system = systems[(k // 5) % 2]
            y = random_chart_point(rng, chart).as_array()
            lhs = blow_down_jacobian(chart, y) @ chart_field(chart, system)(y)
            rhs = chart.kappa / y[0] ** 2 * system.fast_rhs(blow_down_array(chart, y))
            push = max(push, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))))
        inv = 0.0
        bitwise = True
        n_pairs = 0
        for k in range(n_round):
            src = charts[k % 5]
            p = random_chart_point(rng, src)
            s = blow_down(p)
            for dst in charts:
                if dst is src or not in_chart_domain(dst, s):
                    continue
                q = matching_map(src, dst, p)
                bitwise = bitwise and q == blow_up(dst, s)
                back = matching_map(dst, src, q)
                inv = max(inv, _rel(p.as_array(), back.as_array()))
                n_pairs += 1
        ok = rt < 1e-12 and push < 1e-6 and inv < 1e-12 and bitwise
        return ok, {"round_trip_rel": rt, "pushforward_rel": push, "involution_rel": inv,
                    "matching_bitwise": bitwise, "matching_pairs": n_pairs}

    return _timed(5, "blow-up atlas soundness", 10.0, run)


# ---------------------------------------------------------------------------
# 6. exponential-type algebra
# ---------------------------------------------------------------------------


def random_exp_map(rng) -> tuple[em.ExpTypeMap, tuple]:
    """Polynomial components with B(V, 0) = 0 and Phi(V, 0, eps) = Phi(V, Z, 0) = 0."""
    b0, b1 = rng.uniform(-1, 1, 2)
    a0 = rng.uniform(0.2, 2.0)
    a1 = rng.uniform(0.0, 1.0)
    d0, d1, d2 = rng.uniform(-0.5, 0.5, 3)
    m = em.ExpTypeMap(
        B=lambda V, e: e * (b0 + b1 * V) + e * e * b1,
        A=lambda V, e: a0 + a1 * V * V + e * a1,
        Phi=lambda V, Z, e: e * Z * (d0 + d1 * V) + e * Z * Z * d2,
    )
    return m, (b0, b1, a0, a1)


def _chain_maps(exp_middle: bool = False):
    p1 = em.ExpTypeMap.pure(1.0, "P1")
    p2 = em.ExpTypeMap(A=lambda V, e: 2.0, Phi=lambda V, Z, e: 0.5 * e * Z * Z,
                       no_shift=True, name="P2")
    if exp_middle:
        p3 = em.ExpTypeMap(B=lambda V, e: e * 0.1, A=lambda V, e: 0.5,
                           Phi=lambda V, Z, e: e * Z, name="P3")
    else:
        p3 = em.Diffeo(lambda V, y, e: 0.1 + y + 0.2 * y * y,
                       lambda V, y, e: 1 + 0.4 * y, name="P3")
    p4 = em.ExpTypeMap(A=lambda V, e: 3.0, Phi=lambda V, Z, e: 0.5 * e * Z * Z,
                       no_shift=True, name="P4")
    p5 = em.ExpTypeMap.pure(4.0, "P5")
    return [p1, p2, p3, p4, p5]


def criterion_6(seed: int = 0) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        # extraction inverts construction
        ext = 0.0
        for _ in range(20):
            m, _ = random_exp_map(rng)
            V = float(rng.uniform(-1, 1))
            for eps in (0.1, 0.05, 0.01):
                c = em.extract_components(m, V, eps)
                B = m.B(V, eps)
                A = m.A(V, eps)
                ext = max(ext, abs(c.B - B) / max(abs(B), 1e-300), abs(c.A - A) / A)
        # compose_left / compose_right pointwise soundness
        sound = 0.0
        for _ in range(1000):
            m, _ = random_exp_map(rng)
            V = float(rng.uniform(-1, 1))
            eps = float(rng.uniform(0.2, 1.0))
            Z = float(rng.uniform(0.0, 2.0))
            c0, c1, c2 = rng.uniform(0.1, 1.0, 3)
            left = em.Diffeo(lambda V_, y, e: c0 + c1 * y + c2 * y**3)
            right = em.Diffeo(lambda V_, y, e: c1 * y + c2 * y**3)
            want = left(V, em.eval(m, V, Z, eps), eps)
            got = em.eval(em.compose_left(left, m), V, Z, eps)
            sound = max(sound, abs(got - want) / abs(want))
            want = em.eval(m, V, right(V, Z, eps), eps)
            got = em.eval(em.compose_right(m, right), V, Z, eps)
            sound = max(sound, abs(got - want) / abs(want))
        # chain rate additivity at eps = 1e-3
        maps = _chain_maps()
        black_box = em.chain_pointwise(maps)
        A_bb = em.extract_components(black_box, 0.0, 1e-3).A
        chain = em.compose_chain(maps)
        A_struct = em.extract_components(chain, 0.0, 1e-3).A
        pointwise = 0.0
        for eps in (0.5, 0.3, 0.2):
            for Z in (0.1, 0.5, 1.0):
                want = black_box(0.0, Z, eps)
                pointwise = max(pointwise, abs(chain(0.0, Z, eps) - want) / abs(want))
        maps_e = _chain_maps(exp_middle=True)
        A_bb_e = em.extract_components(em.chain_pointwise(maps_e), 0.0, 1e-3).A
        ok = (ext < 1e-6 and sound < 1e-12 and abs(A_bb - 10.0) < 1e-4
              and abs(A_struct - 10.0) < 1e-4 and pointwise < 1e-10 and abs(A_bb_e - 10.5) < 1e-4)
        return ok, {"extraction_rel": ext, "compose_rel": sound, "chain_rate_black_box": A_bb,
                    "chain_rate_structural": A_struct, "chain_pointwise_rel": pointwise,
                    "chain_rate_exp_middle": A_bb_e}

    return _timed(6, "exponential-type algebra", 5.0, run)


# ---------------------------------------------------------------------------
# 7. layers
# ---------------------------------------------------------------------------

LAYER_EPS = tuple(10 ** (-4 + 0.5 * k) for k in range(5))


def criterion_7(L: float = 0.5, M: float = 1.0) -> CriterionResult:
    def run():
        system = principal_system()
        worst = 0.0
        rows = []
        for eps in LAYER_EPS:
            for row in layer_study(system, eps, (-1.0, -0.5, 0.0, 0.5, 1.0), L, M,
                                   run_transition=False):
                worst = max(worst, abs(row.b1_exit))
                rows.append((row.mu, eps, row.b1_exit, str(row.label)))
        slope, b1 = b1_growth_slope(system, 0.5, LAYER_EPS)
        escaped = [abs(x) > 2 * M for x in b1]
        ok = worst <= 2 * M and abs(slope + 0.4) <= 0.05
        return ok, {"max_inner_b1": worst, "fixed_b_slope": slope, "fixed_b_b1": b1,
                    "fixed_b_escaped": escaped, "rows": rows}

    return _timed(7, "layer scaling of the entry-chart coordinate", 120.0, run)


# ---------------------------------------------------------------------------
# 8. fold passage
# ---------------------------------------------------------------------------


def criterion_8() -> CriterionResult:
    def run():
        eps = [10 ** (-5 + k / 3) for k in range(7)]
        fit = fold_exponent_fit(eps)
        dist = fit.jump_distance(0)
        ok = 0.60 <= fit.slope <= 0.73 and dist < 0.1
        return ok, {"slope": fit.slope, "offsets": list(fit.offsets),
                    "jump_point_eps_1e-5": fit.jump_points[0], "jump_distance": dist}

    return _timed(8, "fold passage exponent", 60.0, run)


# ---------------------------------------------------------------------------
# 9. flat perturbations
# ---------------------------------------------------------------------------

FLAT_EPS = (2e-2, 1e-2, 5e-3, 2.5e-3)


def criterion_9(diagnostic: bool = True) -> CriterionResult:
    def run():
        rep = flatness_robustness(stock_flat_system("eps", 1.0), 0.0, FLAT_EPS)
        out = {"eps": list(FLAT_EPS), "differences": rep.differences, "ratios": rep.ratios,
               "principal_deviation": rep.deviations}
        if diagnostic:
            origin = flatness_robustness(stock_flat_system("origin", 1.0), 0.0, FLAT_EPS)
            out["origin_bump"] = {
                "differences": origin.differences,
                "ratios": origin.ratios,
                "rates": origin.rate_flat,
                "perturbed_slow_divergence": -sdi_slow_flow(stock_flat_system("origin", 1.0), 0.0),
            }
        return rep.shrinks(4.0), out

    return _timed(9, "flat perturbations do not change the rate", 120.0, run)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_suite(selection=None, target_shift: float = 0.0, seed: int = 0, L: float = 0.5,
              M: float = 1.0, echo: Callable[[str], None] | None = None) -> list:
    """Run the selected criteria (all by default).

    A full run also reports criterion 10, the overall time budget.
    """
    selection = sorted(selection or CRITERIA)
    results = []
    t0 = time.perf_counter()
    for n in selection:
        if n == 2:
            res = criterion_2(target_shift=target_shift)
        elif n in (4, 5, 6):
            res = CRITERIA[n](seed=seed)
        elif n == 7:
            res = criterion_7(L, M)
        else:
            res = CRITERIA[n]()
        results.append(res)
        if echo:
            echo(res.line())
    total = time.perf_counter() - t0
    if selection == sorted(CRITERIA):
        all_ok = all(r.passed for r in results)
        res10 = CriterionResult(10, "full suite within budget", all_ok and total < SUITE_BUDGET,
                                total, SUITE_BUDGET, {"criteria_run": selection})
        results.append(res10)
        if echo:
            echo(res10.line())
    return results
