"""Quasihomogeneous blow-up of the cusp point.

Weights (3, 2, 1, 5) for (a, b, z, eps). Five directional charts:

======  ===============================  ========================
chart   blow-down                        coordinates ``c``
======  ===============================  ========================
En      (-r^3, r^2 b, r z, r^5 e)        (b1, z1, eps1)
Ex      ( r^3, r^2 b, r z, r^5 e)        (b3, z3, eps3)
Eps     (r^3 a, r^2 b, r z, r^5)         (a2, b2, z2)
BPlus   (r^3 a,  r^2, r z, r^5 e)        (a2, z2, eps2)
BMinus  (r^3 a, -r^2, r z, r^5 e)        (a2, z2, eps2)
======  ===============================  ========================

Chart fields are the pullback of the cusp field divided by ``r^2`` and, in
En and Ex, multiplied by 3, so that ``DPhi . X_chart = kappa r^-2 X`` with
kappa = 3 for En/Ex and 1 otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cusp_core import A3System, StatePoint
from .errors import ChartDomainError, ConfigError, DomainError

FLAT_GUARD = 1e-8


class ChartId(enum.Enum):
    EN = "en"
    EX = "ex"
    EPS = "eps"
    BPLUS = "b+"
    BMINUS = "b-"

    @classmethod
    def parse(cls, name) -> "ChartId":
        """Accept a ChartId or a case-insensitive CLI name."""
        if isinstance(name, ChartId):
            return name
        key = str(name).strip().lower()
        aliases = {"bplus": "b+", "bminus": "b-", "plus": "b+", "minus": "b-"}
        key = aliases.get(key, key)
        for c in cls:
            if c.value == key:
                return c
        raise DomainError(f"unknown chart {name!r}; expected one of en, ex, eps, b+, b-")

    @property
    def kappa(self) -> int:
        return 3 if self in (ChartId.EN, ChartId.EX) else 1

    @property
    def eps_slot(self) -> int | None:
        """Index in ``c`` of the eps-type coordinate, if any."""
        return None if self is ChartId.EPS else 2


@dataclass(frozen=True)
class ChartPoint:
    chart: ChartId
    r: float
    c: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "chart", ChartId.parse(self.chart))
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if len(self.c) != 3:
            raise DomainError("chart coordinates need three components")
        if not (math.isfinite(self.r) and all(math.isfinite(v) for v in self.c)):
            raise DomainError("chart point must be finite")
        if self.r < 0:
            raise ChartDomainError(f"r must be >= 0, got {self.r}")
        slot = self.chart.eps_slot
        if slot is not None and self.c[slot] < 0:
            raise ChartDomainError(f"eps-type coordinate must be >= 0, got {self.c[slot]}")

    def as_array(self) -> np.ndarray:
        return np.array([self.r, *self.c])


def _down(chart: ChartId, r, c0, c1, c2):
    r2 = r * r
    r3 = r2 * r
    r5 = r3 * r2
    if chart is ChartId.EN:
        return -r3, r2 * c0, r * c1, r5 * c2
    if chart is ChartId.EX:
        return r3, r2 * c0, r * c1, r5 * c2
    if chart is ChartId.EPS:
        return r3 * c0, r2 * c1, r * c2, r5
    if chart is ChartId.BPLUS:
        return r3 * c0, r2, r * c1, r5 * c2
    return r3 * c0, -r2, r * c1, r5 * c2


def blow_down(p: ChartPoint) -> StatePoint:
    """Map a chart point to (a, b, z, eps)."""
    return StatePoint(*_down(p.chart, p.r, *p.c))


def blow_down_array(chart, y) -> np.ndarray:
    """Array version of :func:`blow_down` on ``y = (r, c0, c1, c2)``."""
    return np.array(_down(ChartId.parse(chart), *y), dtype=float)


_CONDITION = {
    ChartId.EN: "a < 0",
    ChartId.EX: "a > 0",
    ChartId.EPS: "eps > 0",
    ChartId.BPLUS: "b > 0",
    ChartId.BMINUS: "b < 0",
}


def in_chart_domain(chart, s: StatePoint) -> bool:
    chart = ChartId.parse(chart)
    return {
        ChartId.EN: s.a < 0,
        ChartId.EX: s.a > 0,
        ChartId.EPS: s.eps > 0,
        ChartId.BPLUS: s.b > 0,
        ChartId.BMINUS: s.b < 0,
    }[chart]


def blow_up(chart, s: StatePoint) -> ChartPoint:
    """Inverse of :func:`blow_down` on the chart's domain.

    Raises
    ------
    ChartDomainError
        When the chart's sign condition fails for ``s``.
    """
    chart = ChartId.parse(chart)
    if not in_chart_domain(chart, s):
        raise ChartDomainError(f"chart {chart.value} requires {_CONDITION[chart]}; got {s}")
    a, b, z, eps = s.a, s.b, s.z, s.eps
    if chart in (ChartId.EN, ChartId.EX):
        r = abs(a) ** (1.0 / 3.0)
        return ChartPoint(chart, r, (b / r**2, z / r, eps / r**5))
    if chart is ChartId.EPS:
        r = eps ** 0.2
        return ChartPoint(chart, r, (a / r**3, b / r**2, z / r))
    r = math.sqrt(abs(b))
    return ChartPoint(chart, r, (a / r**3, z / r, eps / r**5))


def matching_map(src, dst, p: ChartPoint) -> ChartPoint:
    """Coordinate change between overlapping charts, ``blow_up(dst, blow_down(p))``."""
    src = ChartId.parse(src)
    dst = ChartId.parse(dst)
    if p.chart is not src:
        raise DomainError(f"point is in chart {p.chart.value}, not {src.value}")
    s = blow_down(p)
    if not in_chart_domain(dst, s):
        raise ChartDomainError(
            f"point is outside the overlap of {src.value} and {dst.value}: {_CONDITION[dst]} fails"
        )
    return blow_up(dst, s)


# ---------------------------------------------------------------------------
# Chart vector fields
# ---------------------------------------------------------------------------


def _principal_chart_rhs(chart: ChartId, y) -> np.ndarray:
    r, c0, c1, c2 = y
    if chart is ChartId.EN:
        b, z, e = c0, c1, c2
        return np.array([-e * r, 2 * e * b, -3 * (z**3 + b * z - 1) + e * z, 5 * e * e])
    if chart is ChartId.EX:
        b, z, e = c0, c1, c2
        return np.array([e * r, -2 * e * b, -3 * (z**3 + b * z + 1) - e * z, -5 * e * e])
    if chart is ChartId.EPS:
        a, b, z = c0, c1, c2
        return np.array([0.0, 1.0, 0.0, -(z**3 + b * z + a)])
    a, z, e = c0, c1, c2
    sb = 1.0 if chart is ChartId.BPLUS else -1.0
    return np.array([0.0, e, -(z**3 + sb * z + a), 0.0])


def _pullback(chart: ChartId, y, v) -> np.ndarray:
    """Solve ``DPhi(y) w = v`` for the chart velocity ``w`` (r > 0)."""
    r, c0, c1, c2 = y
    va, vb, vz, ve = v
    if chart in (ChartId.EN, ChartId.EX):
        sa = -1.0 if chart is ChartId.EN else 1.0
        dr = sa * va / (3 * r * r)
        return np.array([
            dr,
            (vb - 2 * r * dr * c0) / r**2,
            (vz - dr * c1) / r,
            (ve - 5 * r**4 * dr * c2) / r**5,
        ])
    if chart is ChartId.EPS:
        dr = ve / (5 * r**4)
        return np.array([
            dr,
            (va - 3 * r * r * dr * c0) / r**3,
            (vb - 2 * r * dr * c1) / r**2,
            (vz - dr * c2) / r,
        ])
    sb = 1.0 if chart is ChartId.BPLUS else -1.0
    dr = sb * vb / (2 * r)
    return np.array([
        dr,
        (va - 3 * r * r * dr * c0) / r**3,
        (vz - dr * c1) / r,
        (ve - 5 * r**4 * dr * c2) / r**5,
    ])


def chart_field(chart, system: A3System) -> Callable[[np.ndarray], np.ndarray]:
    """Desingularized vector field of ``system`` in ``chart``.

    The returned callable acts on arrays ``(r, c0, c1, c2)``. The principal
    part is the closed-form chart field; perturbation terms are pulled back
    through the blow-down and rescaled by ``kappa / r^2``, and set to zero for
    ``r < 1e-8`` where they are flat.
    """
    chart = ChartId.parse(chart)
    kappa = chart.kappa

    def rhs(y):
        y = np.asarray(y, dtype=float)
        out = _principal_chart_rhs(chart, y)
        r = y[0]
        if system.principal or r < FLAT_GUARD:
            return out
        a, b, z, eps = _down(chart, *y)
        f1, f2, f3 = system.eval_perturbations(a, b, z, eps)
        v = np.array([eps * f1, eps * f2, -eps * f3, 0.0])
        if not np.any(v):
            return out
        return out + (kappa / (r * r)) * _pullback(chart, y, v)

    rhs.chart = chart
    return rhs


def eval_chart_field(p: ChartPoint, system: A3System) -> np.ndarray:
    return chart_field(p.chart, system)(p.as_array())


def blow_down_jacobian(chart, y, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the blow-down at ``y``."""
    chart = ChartId.parse(chart)
    y = np.asarray(y, dtype=float)
    J = np.empty((4, 4))
    for k in range(4):
        step = h * max(1.0, abs(y[k]))
        yp = y.copy()
        ym = y.copy()
        yp[k] += step
        ym[k] -= step
        J[:, k] = (np.array(_down(chart, *yp)) - np.array(_down(chart, *ym))) / (2 * step)
    return J


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerLabel:
    inner: bool
    plus_lateral: bool
    minus_lateral: bool

    def __str__(self):
        names = [n for n, f in (("inner", self.inner), ("plus", self.plus_lateral),
                                ("minus", self.minus_lateral)) if f]
        return "+".join(names) if names else "none"


def classify_entry(b: float, eps: float, L: float = 0.5, M: float = 1.0) -> LayerLabel:
    """Which entry layers contain the parameter value ``b`` at ``eps``.

    inner: |b| < M eps^(2/5); plus lateral: b > L eps^(2/5); minus lateral:
    -b > L eps^(2/5).
    """
    if not 0 < L < M:
        raise ConfigError(f"layer constants need 0 < L < M, got L={L}, M={M}")
    if not eps > 0:
        raise DomainError("classify_entry needs eps > 0")
    s = eps ** 0.4
    return LayerLabel(abs(b) < M * s, b > L * s, -b > L * s)
