"""Adaptive Runge-Kutta integration with dense output and section events.

Fields are autonomous callables ``f(y) -> dy/dt`` on numpy arrays. The default
stepper is scipy's DOP853 (an embedded 8(5,3) pair with 7th order dense
output); scipy's implicit Radau IIA method is available for long stiff
stretches along attracting slow manifolds. Either is driven one step at a time
so that section crossings can be located on the dense output of each accepted
step.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import DOP853, OdeSolution, Radau
from scipy.optimize import brentq

from .cusp_core import AXES
from .errors import (
    BlowUpError,
    DegenerateFiberError,
    DomainError,
    IntegrationError,
    SectionTimeoutError,
    StiffnessError,
)

Field = Callable[[np.ndarray], np.ndarray]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
MIN_STEP = 1e-14
EVENT_TOL = 1e-10


@dataclass(frozen=True)
class Section:
    """Hyperplane ``state[axis] == value``, optionally with a sign on z.

    ``axis`` is a name from ``("a", "b", "z", "eps")`` or an integer index,
    which lets the same machinery run on chart coordinates and augmented
    states.
    """

    axis: str | int
    value: float
    z_sign: Optional[int] = None
    z_index: int = 2

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError("section value must be finite")
        if isinstance(self.axis, str) and self.axis not in AXES:
            raise DomainError(f"unknown axis {self.axis!r}")
        if self.z_sign not in (None, -1, 1):
            raise DomainError("z_sign must be None, -1 or +1")

    @property
    def index(self) -> int:
        return AXES.index(self.axis) if isinstance(self.axis, str) else int(self.axis)

    def g(self, y) -> float:
        return float(y[self.index]) - self.value


@dataclass(frozen=True)
class Trajectory:
    """Accepted steps of one integration plus their dense output."""

    times: np.ndarray
    states: np.ndarray
    interpolant: OdeSolution
    field_id: str = ""

    def __call__(self, t):
        return self.interpolant(t)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path=None, columns: Sequence[str] = ("t",) + AXES) -> str:
        """Write ``t,a,b,z,eps`` rows (shortest round-trip floats, LF endings)."""
        buf = io.StringIO(newline="")
        buf.write(",".join(columns) + "\n")
        for t, y in zip(self.times, self.states):
            buf.write(",".join(repr(float(v)) for v in (t, *y[: len(columns) - 1])) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text


@dataclass
class _Crossing:
    t: float
    state: np.ndarray


@dataclass
class _RunResult:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    dense: list = field(default_factory=list)
    crossing: Optional[_Crossing] = None


def _check_tols(rtol, atol):
    if not (rtol > 0 and np.all(np.asarray(atol) > 0)):
        raise DomainError(f"rtol and atol must be positive, got {rtol}, {atol}")


def _find_crossing(dense, t0, t1, y0, y1, sec: Section, direction: int, fun):
    """First crossing of ``sec`` inside one step, or None."""
    idx = sec.index
    n_sub = 8
    ts = np.linspace(t0, t1, n_sub + 1)
    inner = np.asarray(dense(ts[1:-1]))[idx] - sec.value
    gs = [y0[idx] - sec.value, *inner, y1[idx] - sec.value]
    for k in range(n_sub):
        g0, g1 = gs[k], gs[k + 1]
        if direction > 0:
            hit = g0 < 0.0 <= g1
        elif direction < 0:
            hit = g0 > 0.0 >= g1
        else:
            hit = (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)
        if not hit:
            continue
        if g1 == 0.0:
            tc = ts[k + 1]
        else:
            tc = brentq(lambda t: dense(t)[idx] - sec.value, ts[k], ts[k + 1],
                        xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        yc = np.array(dense(tc), dtype=float)
        # one Newton step using the field itself
        fy = fun(yc)
        if fy[idx] != 0.0:
            dt = -(yc[idx] - sec.value) / fy[idx]
            if ts[k] <= tc + dt <= ts[k + 1] or abs(dt) < 1e-12 * max(1.0, abs(tc)):
                tc2 = tc + dt
                yc2 = np.array(dense(tc2), dtype=float)
                if abs(yc2[idx] - sec.value) <= abs(yc[idx] - sec.value):
                    tc, yc = tc2, yc2
        if sec.z_sign is not None and np.sign(yc[sec.z_index]) != sec.z_sign:
            continue
        return _Crossing(float(tc), yc)
    return None


SOLVERS = {"DOP853": DOP853, "Radau": Radau}


def _run(fun: Field, y0, t0, t_end, rtol, atol, sec=None, direction=1, wall_limit=None,
         keep=True, method="DOP853") -> _RunResult:
    _check_tols(rtol, atol)
    y0 = np.asarray(y0, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise BlowUpError("initial state is not finite", y0, t0)
    res = _RunResult()
    if keep:
        res.times.append(t0)
        res.states.append(y0.copy())
    if method not in SOLVERS:
        raise DomainError(f"unknown method {method!r}; use one of {sorted(SOLVERS)}")
    solver = SOLVERS[method](lambda t, y: fun(y), t0, y0, t_end, rtol=rtol, atol=atol)
    started = time.perf_counter()
    while solver.status == "running":
        t_prev = solver.t
        y_prev = solver.y.copy()
        msg = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"integrator failed: {msg}", y_prev, t_prev)
        if not np.all(np.isfinite(solver.y)):
            raise BlowUpError(f"non-finite state at t={solver.t}", y_prev, t_prev)
        if solver.step_size is not None and solver.step_size < MIN_STEP and solver.status == "running":
            raise StiffnessError(
                f"step size {solver.step_size:.3e} below floor {MIN_STEP:.0e}", solver.y.copy(), solver.t
            )
        dense = solver.dense_output()
        if keep:
            res.times.append(solver.t)
            res.states.append(solver.y.copy())
            res.dense.append(dense)
        if sec is not None:
            c = _find_crossing(dense, t_prev, solver.t, y_prev, solver.y, sec, direction, fun)
            if c is not None:
                res.crossing = c
                return res
        if wall_limit is not None and time.perf_counter() - started > wall_limit:
            raise SectionTimeoutError(
                f"wall-clock limit {wall_limit}s exceeded at t={solver.t}", solver.y.copy(), solver.t
            )
    res.final_t = solver.t
    res.final_y = solver.y.copy()
    return res


def _as_trajectory(res: _RunResult, field_id: str) -> Trajectory:
    times = np.array(res.times)
    states = np.array(res.states)
    if len(res.dense) == 0:
        raise IntegrationError("no accepted steps")
    interp = OdeSolution(times, res.dense)
    return Trajectory(times, states, interp, field_id)


def integrate(field: Field, initial, t_span, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
              field_id: str = "") -> Trajectory:
    """Integrate ``y' = field(y)`` over ``t_span`` and keep dense output.

    Raises
    ------
    StiffnessError
        Step size dropped below 1e-14.
    BlowUpError
        The state became non-finite.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise DomainError("t_span must be increasing")
    res = _run(field, initial, t0, t1, rtol, atol)
    return _as_trajectory(res, field_id)


def integrate_to_section(field: Field, initial, sec: Section, direction: int = 1,
                         rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, t_max: float = 1e6,
                         wall_limit: float | None = None, return_trajectory: bool = False,
                         method: str = "DOP853"):
    """Integrate until the first crossing of ``sec`` in ``direction``.

    Returns
    -------
    state : numpy.ndarray
        State at the crossing, with ``|state[axis] - value| < 1e-10``.
    t_hit : float
        Crossing time.
    trajectory : Trajectory
        Only when ``return_trajectory`` is true; the last sample is the crossing.

    Notes
    -----
    ``method="Radau"`` takes steps limited by accuracy rather than stability
    on stiff stretches; its dense output is of lower order, so crossings are
    still polished with a Newton step on the field.
    """
    if not t_max > 0:
        raise DomainError("t_max must be positive")
    y0 = np.asarray(initial, dtype=float)
    if abs(sec.g(y0)) == 0.0:
        raise DomainError("initial state lies on the section")
    res = _run(field, y0, 0.0, t_max, rtol, atol, sec=sec, direction=direction,
               wall_limit=wall_limit, keep=return_trajectory, method=method)
    if res.crossing is None:
        raise SectionTimeoutError(
            f"no crossing of {sec.axis}={sec.value} before t_max={t_max}",
            getattr(res, "final_y", None), getattr(res, "final_t", None),
        )
    c = res.crossing
    if abs(sec.g(c.state)) >= EVENT_TOL:
        raise IntegrationError(f"event residual {abs(sec.g(c.state)):.2e} too large", c.state, c.t)
    if not return_trajectory:
        return c.state, c.t
    # trim the last step at the crossing
    res.times[-1] = c.t
    res.states[-1] = c.state
    traj = _as_trajectory(res, "")
    return c.state, c.t, traj


def fiber_derivative(field: Field, base, sec: Section, dz0: float, direction: int = 1,
                     rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, t_max: float = 1e6,
                     z_index: int = 2) -> float:
    """Derivative of the section map's z-component with respect to initial z.

    Central differences with steps ``dz0`` and ``dz0/2``, combined by one
    Richardson step. Suitable when the derivative is not exponentially small;
    for strongly contracting transitions use :func:`log_fiber_derivative`.
    """
    if not dz0 > 0:
        raise DomainError("dz0 must be positive")
    base = np.asarray(base, dtype=float)

    def pz(dz):
        y = base.copy()
        y[z_index] += dz
        return integrate_to_section(field, y, sec, direction, rtol, atol, t_max)[0][z_index]

    def central(h):
        return (pz(h) - pz(-h)) / (2.0 * h)

    d1 = central(dz0)
    d2 = central(dz0 / 2.0)
    d = (4.0 * d2 - d1) / 3.0
    if not math.isfinite(d):
        raise DegenerateFiberError(f"fiber derivative is not finite: {d}")
    return d


def fd_jacobian(field: Field, y, h: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of ``field`` at ``y``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    J = np.empty((n, n))
    for k in range(n):
        step = h * max(1.0, abs(y[k]))
        yp = y.copy()
        ym = y.copy()
        yp[k] += step
        ym[k] -= step
        J[:, k] = (np.asarray(field(yp)) - np.asarray(field(ym))) / (2.0 * step)
    return J


def log_section_determinant(field: Field, base, sec: Section, direction: int = 1,
                            jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
                            rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, t_max: float = 1e6,
                            wall_limit: float | None = None) -> "LogFiberDerivative":
    """Log Jacobian determinant of the section map, by Liouville's formula.

    For the map from the hyperplane through ``base`` orthogonal to
    ``sec.axis`` to ``sec`` itself,

        det DPi = exp(int div F dt) * F_axis(start) / F_axis(end),

    which is accumulated as one extra state ``l' = trace J``. When all other
    transverse directions are neutral (as for the cusp field with b and eps
    conserved) this is exactly the fiber derivative; otherwise it is its
    coordinate-free counterpart.
    """
    base = np.asarray(base, dtype=float)
    n = base.size
    idx = sec.index
    if jacobian is None:
        def trace(y):
            return float(np.trace(fd_jacobian(field, y)))
    else:
        def trace(y):
            return float(np.trace(jacobian(y)))

    def aug(Y):
        y = Y[:n]
        return np.concatenate([np.asarray(field(y), dtype=float), [trace(y)]])

    Y0 = np.concatenate([base, [0.0]])
    aug_sec = Section(idx, sec.value, sec.z_sign, sec.z_index)
    Y, t_hit = integrate_to_section(aug, Y0, aug_sec, direction, rtol, atol, t_max, wall_limit)
    y = Y[:n]
    f0 = float(np.asarray(field(base))[idx])
    f1 = float(np.asarray(field(y))[idx])
    if f0 == 0.0 or f1 == 0.0:
        raise DegenerateFiberError("field is tangent to a section")
    ratio = f0 / f1
    log_abs = float(Y[n]) + math.log(abs(ratio))
    if not math.isfinite(log_abs):
        raise DegenerateFiberError("non-finite log determinant")
    return LogFiberDerivative(log_abs, int(np.sign(ratio)), y, t_hit)


@dataclass(frozen=True)
class LogFiberDerivative:
    """Section-map fiber derivative in log form: ``value = sign * exp(log_abs)``."""

    log_abs: float
    sign: int
    exit_state: np.ndarray
    t_hit: float

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log_abs) if self.log_abs < 709 else math.inf * self.sign


def log_fiber_derivative(field: Field, base, sec: Section, direction: int = 1,
                         jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
                         rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, t_max: float = 1e6,
                         z_index: int = 2, wall_limit: float | None = None) -> LogFiberDerivative:
    """Fiber derivative of the section map through the variational equation.

    A unit tangent ``u`` and its log-norm ``l`` are carried along the orbit,
    ``u' = J u - (u.J u) u`` and ``l' = u.J u``, starting from the z
    direction. At the crossing the tangent is projected along the field onto
    the section, so a hitting time that depends on z is accounted for. The
    log form keeps factors like exp(-3600) representable.
    """
    base = np.asarray(base, dtype=float)
    n = base.size
    jac = jacobian if jacobian is not None else (lambda y: fd_jacobian(field, y))
    idx = sec.index

    def aug(Y):
        y = Y[:n]
        u = Y[n:2 * n]
        Ju = jac(y) @ u
        lam = float(u @ Ju)
        return np.concatenate([np.asarray(field(y), dtype=float), Ju - lam * u, [lam]])

    Y0 = np.zeros(2 * n + 1)
    Y0[:n] = base
    Y0[n + z_index] = 1.0
    aug_sec = Section(idx, sec.value, sec.z_sign, sec.z_index)
    # the tangent block only needs to be as accurate as the state; atol on it
    # is relative to a unit vector
    Y, t_hit = integrate_to_section(aug, Y0, aug_sec, direction, rtol, atol, t_max, wall_limit)
    y = Y[:n]
    u = Y[n:2 * n]
    ell = Y[2 * n]
    F = np.asarray(field(y), dtype=float)
    if F[idx] == 0.0:
        raise DegenerateFiberError("field is tangent to the section at the crossing")
    proj = u[z_index] - F[z_index] * u[idx] / F[idx]
    if not math.isfinite(proj) or not math.isfinite(ell):
        raise DegenerateFiberError("non-finite variational state")
    if proj == 0.0:
        return LogFiberDerivative(-math.inf, 0, y, t_hit)
    return LogFiberDerivative(ell + math.log(abs(proj)), int(np.sign(proj)), y, t_hit)
