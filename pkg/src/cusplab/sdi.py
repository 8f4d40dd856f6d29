"""Slow flow on the critical manifold and the slow divergence integral.

On S = {z^3 + b z + a = 0} with slow dynamics a' = 1 (b frozen), the fast
variable moves with dz/da = -1/(3 z^2 + b). The divergence of the layer field
is -(3 z^2 + b), so with dt = -(3 z^2 + b) dz the slow divergence integral
between z_en and z_ex is

    I = int_{z_en}^{z_ex} (3 z^2 + b)^2 dz = Itilde(b, z_ex) - Itilde(b, z_en),
    Itilde(b, zeta) = 9/5 zeta^5 + 2 b zeta^3 + b^2 zeta.

For b < 0 an orbit entering on the upper attracting sheet reaches the fold
z_f = sqrt(-b/3) and jumps along a fast fiber to the lower sheet at -2 z_f.
The jump is instantaneous on the slow time scale and contributes nothing, so
the integral along the slow path is the sum over its two regular pieces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp

from .cusp_core import A3System, critical_branches
from .errors import DomainError, FoldSingularityError, GeometryError

FOLD_TOL = 1e-12


@dataclass(frozen=True)
class BranchPoint:
    """Point of S given by (b, z); a = -z^3 - b z is implied."""

    b: float
    z: float

    @property
    def a(self) -> float:
        return -self.z**3 - self.b * self.z

    @property
    def attracting(self) -> bool:
        return 3 * self.z**2 + self.b > 0


def slow_field_on_branch(p: BranchPoint) -> float:
    """dz/da along S, equal to -1/(3 z^2 + b).

    Raises
    ------
    FoldSingularityError
        If ``|3 z^2 + b| < 1e-12``.
    """
    d = 3 * p.z**2 + p.b
    if abs(d) < FOLD_TOL:
        raise FoldSingularityError(f"point (b={p.b}, z={p.z}) lies on the fold curve")
    return -1.0 / d


def tilde_I(b: float, zeta: float) -> float:
    """Antiderivative 9/5 zeta^5 + 2 b zeta^3 + b^2 zeta of (3 zeta^2 + b)^2."""
    return 1.8 * zeta**5 + 2.0 * b * zeta**3 + b * b * zeta


def fold_points(b: float) -> tuple[float, ...]:
    """z-values where 3 z^2 + b = 0 (empty for b > 0, the cusp for b = 0)."""
    if b > 0:
        return ()
    if b == 0:
        return (0.0,)
    zf = math.sqrt(-b / 3.0)
    return (-zf, zf)


def _check_path(b: float, z_en: float, z_ex: float, *, allow_fold_endpoints=False):
    lo, hi = min(z_en, z_ex), max(z_en, z_ex)
    for z in (z_en, z_ex):
        if not allow_fold_endpoints and abs(3 * z * z + b) < FOLD_TOL and lo != hi:
            raise FoldSingularityError(f"endpoint z={z} lies on the fold curve (b={b})")
    if b < 0:
        for zf in fold_points(b):
            if lo < zf < hi:
                raise FoldSingularityError(
                    f"path [{lo}, {hi}] crosses the fold at z={zf:.6g} (b={b})"
                )


def sdi_closed(b: float, z_en: float, z_ex: float) -> float:
    """Closed form ``Itilde(b, z_ex) - Itilde(b, z_en)`` for a fold-free path."""
    _check_path(b, z_en, z_ex)
    return tilde_I(b, z_ex) - tilde_I(b, z_en)


def _quad(b, z_en, z_ex, tol):
    if z_en == z_ex:
        return 0.0
    pts = [p for p in fold_points(b) if min(z_en, z_ex) < p < max(z_en, z_ex)]
    with warnings.catch_warnings():
        # the polynomial integrand is resolved long before the roundoff flag fires
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(lambda z: (3 * z * z + b) ** 2, z_en, z_ex, epsabs=tol, epsrel=1e-14,
                      limit=200, points=pts or None)
    return val


def sdi_quadrature(b: float, z_en: float, z_ex: float, tol: float = 1e-12) -> float:
    """Adaptive quadrature of (3 z^2 + b)^2 dz from z_en to z_ex."""
    _check_path(b, z_en, z_ex)
    return _quad(b, z_en, z_ex, tol)


# ---------------------------------------------------------------------------
# Section endpoints and the slow path
# ---------------------------------------------------------------------------


def endpoints_for_sections(a_minus: float, a_plus: float, b: float) -> tuple[float, float]:
    """Entry and exit points of S on the sections a = -a_minus and a = a_plus.

    The entry point is the attracting root of z^3 + b z - a_minus with z > 0,
    the exit point the attracting root of z^3 + b z + a_plus with z < 0.

    Raises
    ------
    GeometryError
        If no root, or more than one root, qualifies, or if for b < 0 the exit
        section lies before the fold so that the slow path cannot reach it.
    """
    if not (a_minus > 0 and a_plus > 0):
        raise DomainError("a_minus and a_plus must be positive")

    def pick(a, sign, what):
        cands = [r.z for r in critical_branches(a, b)
                 if sign * r.z > 0 and 3 * r.z * r.z + b > 0]
        if len(cands) != 1:
            raise GeometryError(
                f"{what}: {len(cands)} attracting roots with z {'>' if sign > 0 else '<'} 0 "
                f"for a={a}, b={b}"
            )
        return cands[0]

    z_en = pick(-a_minus, +1, "entry")
    z_ex = pick(a_plus, -1, "exit")
    if b < 0:
        zf = math.sqrt(-b / 3.0)
        a_fold = 2.0 * zf**3
        if a_plus <= a_fold:
            raise GeometryError(
                f"exit section a={a_plus} is not beyond the fold at a={a_fold:.6g} (b={b})"
            )
        if a_minus <= a_fold and z_en < zf:
            raise GeometryError("entry point is not on the upper attracting sheet")
    return z_en, z_ex


@dataclass(frozen=True)
class SlowSegment:
    z_start: float
    z_end: float


def slow_path(b: float, z_en: float, z_ex: float) -> list[SlowSegment]:
    """Regular pieces of the slow path from z_en down to z_ex.

    For b < 0 with z_en on the upper sheet and z_ex on the lower one, the
    path follows the upper sheet to the fold z_f and resumes at the landing
    point -2 z_f.

    Raises
    ------
    GeometryError
        If z_ex cannot be reached from z_en by the slow flow.
    """
    if z_ex > z_en:
        raise GeometryError("the slow flow decreases z; need z_ex <= z_en")
    if b >= 0 or z_en == z_ex:
        return [SlowSegment(z_en, z_ex)]
    zf = math.sqrt(-b / 3.0)
    if z_en >= zf and z_ex >= zf:
        return [SlowSegment(z_en, z_ex)]
    if z_en <= -zf and z_ex <= -zf:
        return [SlowSegment(z_en, z_ex)]
    if z_en >= zf and z_ex <= -2.0 * zf:
        return [SlowSegment(z_en, zf), SlowSegment(-2.0 * zf, z_ex)]
    raise GeometryError(
        f"no attracting slow path from z={z_en} to z={z_ex} at b={b} (fold at ±{zf:.6g})"
    )


def sdi_slow_path(b: float, z_en: float, z_ex: float, method: str = "closed",
                  tol: float = 1e-12) -> float:
    """Slow divergence integral along the slow path, jumps included.

    Parameters
    ----------
    method : {"closed", "quadrature"}
        Evaluate each regular piece with :func:`tilde_I` differences or by
        adaptive quadrature of the divergence integrand.
    """
    total = 0.0
    for seg in slow_path(b, z_en, z_ex):
        if method == "closed":
            total += tilde_I(b, seg.z_end) - tilde_I(b, seg.z_start)
        elif method == "quadrature":
            total += _quad(b, seg.z_start, seg.z_end, tol)
        else:
            raise DomainError(f"unknown method {method!r}")
    return total


def sdi_target(b: float, a_minus: float = 1.0, a_plus: float = 1.0, method: str = "closed") -> float:
    """Slow divergence integral between the sections a = -a_minus and a = a_plus."""
    z_en, z_ex = endpoints_for_sections(a_minus, a_plus, b)
    return sdi_slow_path(b, z_en, z_ex, method)


def sdi_slow_flow(system: A3System, b: float, a_minus: float = 1.0, a_plus: float = 1.0,
                  rtol: float = 1e-10) -> float:
    """Slow divergence integral for a perturbed system, from the reduced flow.

    Integrates the reduced slow flow a' = 1 + f1, b' = f2 on S (at eps = 0)
    with a as independent variable and accumulates -(3 z^2 + b) dt, where z
    follows the attracting sheet and jumps at a fold. This is the limit the
    numerical rate of a perturbed system converges to, and it differs from
    :func:`sdi_target` when the f_i are of order one along the path. Lower
    precision than the closed form; meant as a cross-check.
    """
    def zsheet(a, bb, upper):
        roots = [r.z for r in critical_branches(a, bb) if 3 * r.z * r.z + bb > 0]
        if not roots:
            raise GeometryError(f"no attracting root at a={a}, b={bb}")
        return max(roots) if upper else min(roots)

    state = {"upper": True}

    def rhs(a, y):
        bb = y[0]
        z = zsheet(a, bb, state["upper"])
        f1, f2, _ = system.eval_perturbations(a, bb, z, 0.0)
        dt = 1.0 / (1.0 + f1)
        return [f2 * dt, -(3 * z * z + bb) * dt]

    def fold_event(a, y):
        bb = y[0]
        if bb >= 0 or not state["upper"]:
            return 1.0
        zf = math.sqrt(-bb / 3.0)
        return a - 2 * zf**3

    fold_event.terminal = True
    fold_event.direction = 1
    a0 = -a_minus
    y0 = [b, 0.0]
    sol = solve_ivp(rhs, (a0, a_plus), y0, method="DOP853", rtol=rtol, atol=1e-12,
                    events=fold_event)
    if sol.status == 1:
        state["upper"] = False
        sol2 = solve_ivp(rhs, (sol.t[-1] + 1e-12, a_plus), sol.y[:, -1], method="DOP853",
                         rtol=rtol, atol=1e-12)
        return float(sol2.y[1, -1])
    return float(sol.y[1, -1])
