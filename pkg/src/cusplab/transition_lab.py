"""Numerical transition maps of the cusp system and the studies built on them.

The transition goes from the entry section a = -a_minus (z > 0) to the exit
section a = a_plus (z < 0). Its fiber derivative is exponentially small,
``dPi_z/dz = exp(-(A + ...)/eps)``, so the rate is measured through the
variational equation in log form rather than by differencing end states.
"""

from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import time
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .blowup_atlas import ChartId, LayerLabel, chart_field, classify_entry
from .cusp_core import A3System, critical_branches, principal_system
from .errors import (
    CuspLabError,
    DomainError,
    FoldDetectionError,
    GeometryError,
    IntegrationError,
    NonContractiveError,
    SectionTimeoutError,
    SweepError,
)
from .odeflow import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    Section,
    integrate_to_section,
    log_fiber_derivative,
    log_section_determinant,
)
from .sdi import sdi_target

REPORT_COLUMNS = ("b", "eps", "rate_num", "shift_num", "target_I", "deviation", "wall_time")
_R = np.array([-1.0, 1.0, -1.0, 1.0])


@dataclass(frozen=True)
class TransitionEstimate:
    """Result of one transition Sigma- -> Sigma+ at fixed (b, eps).

    Attributes
    ----------
    shift_num : float
        Exit z of the invariant-manifold trajectory minus the exit root of S.
    rate_num : float
        ``-eps * log(dPi_z/dz)`` at the start point, measured as the log
        determinant of the section map (see :func:`estimate_transition`).
    log_derivative : float
        ``log(dPi_z/dz)``.
    z0, fiber_z : float
        Start z and the located manifold z on the entry section;
        ``base_offset = z0 - fiber_z``.
    hit_residuals : tuple of float
        ``|a - a_plus|`` at the exit of the main and the manifold trajectory.
    """

    b: float
    eps: float
    shift_num: float
    rate_num: float
    z_exit_sign: int
    hit_residuals: tuple
    wall_time: float
    z0: float
    fiber_z: float
    exit_z: float
    log_derivative: float
    a_minus: float = 1.0
    a_plus: float = 1.0

    @property
    def base_offset(self) -> float:
        return self.z0 - self.fiber_z


def _fields(system: A3System, reflect: bool):
    if not reflect:
        return system.fast_rhs, system.fast_jacobian
    f0, j0 = system.fast_rhs, system.fast_jacobian

    def f(y):
        return _R * f0(_R * y)

    def j(y):
        return (_R[:, None] * j0(_R * y)) * _R[None, :]

    return f, j


def exit_root(b: float, a_plus: float) -> float:
    """Attracting root of z^3 + b z + a_plus with z < 0."""
    cands = [r.z for r in critical_branches(a_plus, b) if r.z < 0 and 3 * r.z**2 + b > 0]
    if not cands:
        raise GeometryError(f"no attracting exit root at a={a_plus}, b={b}")
    return min(cands)


def locate_fiber(system: A3System, b0: float, eps: float, a_minus: float = 1.0,
                 lead: float = 0.5, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                 reflect: bool = False) -> np.ndarray:
    """State where the attracting slow manifold crosses the entry section.

    A trajectory is started ``lead`` upstream of the section, on the upper
    attracting sheet plus its first-order correction eps/(3 z^2 + b)^2, and
    integrated forward. Every deviation from the manifold contracts by about
    exp(-(3 z^2 + b) lead / eps) on the way, so the arrival point lies on the
    manifold to rounding for desk-scale eps.
    """
    a_start = -a_minus - lead
    roots = [r.z for r in critical_branches(a_start, b0) if r.z > 0 and 3 * r.z**2 + b0 > 0]
    if not roots:
        raise GeometryError(f"no upper attracting sheet at a={a_start}, b={b0}")
    zeta = max(roots)
    z_start = zeta + eps / (3 * zeta**2 + b0) ** 2
    f, _ = _fields(system, reflect)
    y0 = np.array([a_start, b0, z_start, eps])
    sec = Section("a", -a_minus)
    t_max = 50.0 * lead / eps
    if reflect:
        y, _ = integrate_to_section(f, _R * y0, Section("a", a_minus), -1, rtol, atol, t_max)
        return _R * y
    y, _ = integrate_to_section(f, y0, sec, 1, rtol, atol, t_max)
    return y


def _with_context(exc: CuspLabError, b0, eps):
    msg = f"{exc} [b0={b0}, eps={eps}]"
    if isinstance(exc, IntegrationError):
        return type(exc)(msg, exc.state, exc.t)
    return type(exc)(msg)


def estimate_transition(system: A3System, b0: float, z0: float | None, eps: float,
                        a_minus: float = 1.0, a_plus: float = 1.0, rtol=DEFAULT_RTOL,
                        atol=DEFAULT_ATOL, z_offset: float = 0.5, lead: float = 0.5,
                        reflect: bool = False, method: str = "det") -> TransitionEstimate:
    """Estimate the transition Sigma- -> Sigma+ for one (b0, eps).

    Parameters
    ----------
    z0 : float or None
        Start z on the entry section (must be > 0). ``None`` starts at the
        located manifold point plus ``z_offset``.
    reflect : bool
        Run the mirror-image problem under (a, z) -> (-a, -z); the principal
        part is invariant under it, so the rate must not change.
    method : {"det", "fiber"}
        ``"det"`` measures the contraction as the log Jacobian determinant of
        the (b, z) section map (Liouville's formula); ``"fiber"`` integrates
        the variational equation for dPi_z/dz. Both agree when b is
        conserved. With a z-dependent drift in b the direct derivative picks
        up a coupling through b of the size of that drift, which can swamp
        the exponentially small contraction; the determinant does not.

    Raises
    ------
    DomainError
        eps <= 0 or z0 <= 0.
    NonContractiveError
        If the measured fiber derivative is not a contraction.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if method not in ("det", "fiber"):
        raise DomainError(f"unknown method {method!r}")
    measure = log_section_determinant if method == "det" else log_fiber_derivative
    if z0 is not None and not z0 > 0:
        raise DomainError(f"start point must satisfy z > 0 on the entry section, got z0={z0}")
    t_start = time.perf_counter()
    try:
        fiber = locate_fiber(system, b0, eps, a_minus, lead, rtol, atol, reflect)
        if z0 is None:
            z0 = float(fiber[2]) + z_offset
        f, jac = _fields(system, reflect)
        t_max = 50.0 * (a_minus + a_plus) / eps
        y0 = np.array([-a_minus, b0, z0, eps])
        if reflect:
            sec = Section("a", -a_plus, z_sign=+1)
            lfd = measure(f, _R * y0, sec, -1, jac, rtol, atol, t_max)
            exit_state = _R * lfd.exit_state
            ym, _ = integrate_to_section(f, _R * fiber, sec, -1, rtol, atol, t_max)
            ym = _R * ym
        else:
            sec = Section("a", a_plus, z_sign=-1)
            lfd = measure(f, y0, sec, 1, jac, rtol, atol, t_max)
            exit_state = lfd.exit_state
            ym, _ = integrate_to_section(f, fiber, sec, 1, rtol, atol, t_max)
    except CuspLabError as exc:
        raise _with_context(exc, b0, eps) from exc
    rate = -eps * lfd.log_abs
    if lfd.sign <= 0 or not rate > 0 or not math.isfinite(rate):
        raise NonContractiveError(f"fiber derivative is not contracting (rate={rate}) [b0={b0}, eps={eps}]")
    shift = float(ym[2]) - exit_root(float(ym[1]), a_plus)
    return TransitionEstimate(
        b=b0, eps=eps, shift_num=shift, rate_num=rate,
        z_exit_sign=int(np.sign(exit_state[2])),
        hit_residuals=(abs(exit_state[0] - a_plus), abs(ym[0] - a_plus)),
        wall_time=time.perf_counter() - t_start,
        z0=float(z0), fiber_z=float(fiber[2]), exit_z=float(exit_state[2]),
        log_derivative=lfd.log_abs, a_minus=a_minus, a_plus=a_plus,
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).resolve().parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


@dataclass
class SweepReport:
    """Rows of an eps sweep at fixed b with deviations from the SDI target.

    Failed rows are kept in ``failures`` as ``(eps, message)`` and never abort
    the sweep.
    """

    b: float
    eps_list: list
    rows: list
    failures: list
    target_I: float
    a_minus: float = 1.0
    a_plus: float = 1.0
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    system_name: str = "principal"

    @property
    def deviations(self) -> list:
        return [abs(r.rate_num + self.target_I) for r in self.rows]

    def _fit(self, x_of_eps) -> float:
        if len(self.rows) < 2:
            return math.nan
        dev = np.array(self.deviations)
        if np.any(dev <= 0):
            return math.nan
        x = np.log([x_of_eps(r.eps) for r in self.rows])
        return float(np.polyfit(x, np.log(dev), 1)[0])

    @property
    def slope_eps_log(self) -> float:
        """Least-squares slope of log(deviation) against log(eps log(1/eps))."""
        return self._fit(lambda e: e * math.log(1.0 / e))

    @property
    def slope_eps(self) -> float:
        """Least-squares slope of log(deviation) against log(eps)."""
        return self._fit(lambda e: e)

    def monotone(self) -> bool:
        """True when deviations strictly decrease along the successful rows."""
        d = self.deviations
        return len(d) >= 1 and all(x > y for x, y in zip(d, d[1:]))

    def row_dicts(self) -> list:
        out = []
        by_eps = {r.eps: r for r in self.rows}
        for e in self.eps_list:
            r = by_eps.get(e)
            if r is None:
                out.append(dict(b=self.b, eps=e, rate_num=math.nan, shift_num=math.nan,
                                target_I=self.target_I, deviation=math.nan, wall_time=math.nan))
            else:
                out.append(dict(b=r.b, eps=r.eps, rate_num=r.rate_num, shift_num=r.shift_num,
                                target_I=self.target_I, deviation=abs(r.rate_num + self.target_I),
                                wall_time=r.wall_time))
        return out

    def to_csv(self, path=None) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for d in self.row_dicts():
            w.writerow([repr(float(d[k])) for k in REPORT_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None, config: dict | None = None) -> str:
        meta = {
            "rtol": self.rtol,
            "atol": self.atol,
            "a_minus": self.a_minus,
            "a_plus": self.a_plus,
            "system": self.system_name,
            "git_describe": git_describe(),
            "config": config or {},
            "slope_eps_log": _nan_to_none(self.slope_eps_log),
            "slope_eps": _nan_to_none(self.slope_eps),
            "monotone": self.monotone(),
        }
        rows = [{k: _nan_to_none(v) for k, v in d.items()} for d in self.row_dicts()]
        doc = {"meta": meta, "rows": rows,
               "failures": [{"eps": e, "error": m} for e, m in self.failures]}
        text = json.dumps(doc, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text + "\n")
        return text


def _nan_to_none(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


def _sweep_row(eps, system, b0, a_minus, a_plus, rtol, atol, z_offset):
    try:
        return estimate_transition(system, b0, None, eps, a_minus, a_plus, rtol, atol, z_offset)
    except CuspLabError as exc:
        return f"{type(exc).__name__}: {exc}"


def sweep_eps(system: A3System, b0: float, eps_list: Sequence[float], a_minus: float = 1.0,
              a_plus: float = 1.0, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, z_offset: float = 0.5,
              target_I: float | None = None, executor=None) -> SweepReport:
    """Run :func:`estimate_transition` over a descending list of eps.

    Parameters
    ----------
    target_I : float, optional
        Override of the slow divergence integral; by default it is computed
        from the section endpoints, following the jump at the fold for b < 0.
    executor : concurrent.futures.Executor, optional
        Rows are independent; results are collected in input order.

    Raises
    ------
    SweepError
        Empty list, or every row failed.
    DomainError
        eps_list not strictly descending or not positive.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise SweepError("empty eps list")
    if any(e <= 0 for e in eps_list):
        raise DomainError("eps values must be positive")
    if any(x <= y for x, y in zip(eps_list, eps_list[1:])):
        raise DomainError("eps list must be strictly descending")
    if target_I is None:
        target_I = sdi_target(b0, a_minus, a_plus)
    job = partial(_sweep_row, system=system, b0=b0, a_minus=a_minus, a_plus=a_plus,
                  rtol=rtol, atol=atol, z_offset=z_offset)
    results = list(executor.map(job, eps_list)) if executor is not None else [job(e) for e in eps_list]
    rows, failures = [], []
    for e, res in zip(eps_list, results):
        if isinstance(res, TransitionEstimate):
            rows.append(res)
        else:
            failures.append((e, res))
    if not rows:
        raise SweepError("all sweep rows failed: " + "; ".join(m for _, m in failures))
    return SweepReport(b0, eps_list, rows, failures, float(target_I), a_minus, a_plus, rtol, atol,
                       system.name)


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerRow:
    mu: float
    b0: float
    eps: float
    label: LayerLabel
    b1_exit: float
    escaped: bool
    rate_num: float = math.nan


def chart_exit_b1(system: A3System, b0: float, eps: float, delta: float = 1.0,
                  a_minus: float = 1.0, z_offset: float = 0.5, rtol=DEFAULT_RTOL,
                  atol=DEFAULT_ATOL) -> float:
    """Entry-chart coordinate b1 = b / r^2 where the orbit leaves that chart.

    The exit section of the entry chart is eps1 = delta, i.e. the state
    section a = -(eps/delta)^(3/5), where r = (eps/delta)^(1/5).
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    r = (eps / delta) ** 0.2
    a_sec = -(r**3)
    if a_sec <= -a_minus:
        raise DomainError("entry chart exit section lies before the entry section")
    roots = [q.z for q in critical_branches(-a_minus, b0) if q.z > 0]
    if not roots:
        raise GeometryError(f"no positive critical root at a={-a_minus}, b={b0}")
    y0 = np.array([-a_minus, b0, max(roots) + z_offset, eps])
    y, _ = integrate_to_section(system.fast_rhs, y0, Section("a", a_sec), 1, rtol, atol,
                                50.0 * a_minus / eps)
    return float(y[1]) / r**2


def layer_study(system: A3System, eps: float, mu_list: Sequence[float], L: float = 0.5,
                M: float = 1.0, delta: float = 1.0, a_minus: float = 1.0, a_plus: float = 1.0,
                run_transition: bool = True, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> list:
    """Entry-chart exit coordinate b1 for b0 = mu eps^(2/5).

    Each row carries the layer label of b0, the exit value of b1 and
    whether it escaped the inner bound 2M. With ``run_transition`` the full
    transition rate is estimated as well.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    rows = []
    for mu in mu_list:
        b0 = mu * eps**0.4
        label = classify_entry(b0, eps, L, M)
        b1 = chart_exit_b1(system, b0, eps, delta, a_minus, rtol=rtol, atol=atol)
        rate = math.nan
        if run_transition:
            rate = estimate_transition(system, b0, None, eps, a_minus, a_plus, rtol, atol).rate_num
        rows.append(LayerRow(mu, b0, eps, label, b1, abs(b1) > 2 * M, rate))
    return rows


def b1_growth_slope(system: A3System, b0: float, eps_list: Sequence[float], delta: float = 1.0,
                    rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> tuple[float, list]:
    """Log-log slope of |b1| at the entry-chart exit against eps, at fixed b0."""
    b1 = [chart_exit_b1(system, b0, e, delta, rtol=rtol, atol=atol) for e in eps_list]
    slope = float(np.polyfit(np.log(eps_list), np.log(np.abs(b1)), 1)[0])
    return slope, b1


# ---------------------------------------------------------------------------
# fold passage
# ---------------------------------------------------------------------------

P_PLUS = (2.0 / (3.0 * math.sqrt(3.0)), 1.0 / math.sqrt(3.0))


@dataclass(frozen=True)
class FoldFit:
    slope: float
    intercept: float
    eps: tuple
    offsets: tuple
    jump_points: tuple

    def jump_distance(self, k: int = 0) -> float:
        a, z = self.jump_points[k]
        return math.hypot(a - P_PLUS[0], z - P_PLUS[1])


def fold_passage(eps2: float, A0: float = 1.0, z_exit_depth: float = 0.25,
                 rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> tuple[float, tuple[float, float]]:
    """Exit offset and jump point of the fold passage in the b = -1 chart.

    Integrates a2' = eps2, z2' = -(z2^3 - z2 + a2) from the upper sheet at
    a2 = -A0. The jump point is where z2 first falls through 1/sqrt(3); the
    offset is a2 - 2/(3 sqrt 3) where z2 falls through 1/sqrt(3) - z_exit_depth.

    Raises
    ------
    FoldDetectionError
        If z2 does not drop before a2 = A0.
    """
    if not eps2 > 0:
        raise DomainError("eps2 must be positive")
    rhs = chart_field(ChartId.BMINUS, principal_system())
    z_start = max(r.z for r in critical_branches(-A0, -1.0))
    y0 = np.array([0.0, -A0, z_start, eps2])
    t_max = 2.0 * A0 / eps2
    try:
        y_jump, t1 = integrate_to_section(rhs, y0, Section(2, P_PLUS[1]), -1, rtol, atol, t_max,
                                          method="Radau")
        y_exit, _ = integrate_to_section(rhs, y_jump, Section(2, P_PLUS[1] - z_exit_depth), -1,
                                         rtol, atol, t_max - t1, method="Radau")
    except SectionTimeoutError as exc:
        raise FoldDetectionError(f"no jump before a2 = {A0} at eps2 = {eps2}") from exc
    return float(y_exit[1]) - P_PLUS[0], (float(y_jump[1]), float(y_jump[2]))


def fold_exponent_fit(eps_list: Sequence[float], A0: float = 1.0, z_exit_depth: float = 0.25,
                      rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> FoldFit:
    """Fit log(offset) against log(eps2) for the fold passage.

    Raises
    ------
    DomainError
        Fewer than two values, non-positive values, or a span under 1.5 decades.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2:
        raise DomainError("fold fit needs at least two eps values")
    if any(e <= 0 for e in eps_list):
        raise DomainError("eps values must be positive")
    if math.log10(max(eps_list) / min(eps_list)) < 1.5 - 1e-12:
        raise DomainError("eps values must span at least 1.5 decades")
    offsets, jumps = [], []
    for e in eps_list:
        off, jp = fold_passage(e, A0, z_exit_depth, rtol, atol)
        if not off > 0:
            raise FoldDetectionError(f"non-positive exit offset {off} at eps2 = {e}")
        offsets.append(off)
        jumps.append(jp)
    slope, intercept = np.polyfit(np.log(eps_list), np.log(offsets), 1)
    return FoldFit(float(slope), float(intercept), tuple(eps_list), tuple(offsets), tuple(jumps))


# ---------------------------------------------------------------------------
# flat perturbations
# ---------------------------------------------------------------------------


@dataclass
class FlatnessReport:
    eps: list
    rate_flat: list
    rate_principal: list
    target_I: float

    @property
    def differences(self) -> list:
        return [abs(f - p) for f, p in zip(self.rate_flat, self.rate_principal)]

    @property
    def deviations(self) -> list:
        """Distance of the principal rates from the SDI target."""
        return [abs(p + self.target_I) for p in self.rate_principal]

    @property
    def ratios(self) -> list:
        d = self.differences
        return [x / y if y > 0 else math.inf for x, y in zip(d, d[1:])]

    @property
    def over_eps2(self) -> list:
        return [d / e**2 for d, e in zip(self.differences, self.eps)]

    def shrinks(self, factor: float = 4.0) -> bool:
        return all(r > factor for r in self.ratios)


def flatness_robustness(system_flat: A3System, b0: float, eps_list: Sequence[float],
                        principal: A3System | None = None, a_minus: float = 1.0,
                        a_plus: float = 1.0, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> FlatnessReport:
    """Compare rates of a flat-perturbed system with the principal part."""
    principal = principal or principal_system()
    rep_f = sweep_eps(system_flat, b0, eps_list, a_minus, a_plus, rtol, atol)
    rep_p = sweep_eps(principal, b0, eps_list, a_minus, a_plus, rtol, atol)
    if rep_f.failures or rep_p.failures:
        raise SweepError(f"flatness rows failed: {rep_f.failures + rep_p.failures}")
    return FlatnessReport(list(rep_f.eps_list), [r.rate_num for r in rep_f.rows],
                          [r.rate_num for r in rep_p.rows], rep_p.target_I)
