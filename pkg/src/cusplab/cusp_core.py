"""Cusp slow-fast system, critical-set geometry and quasihomogeneous grading.

The vector field in fast time is

    a' = eps (1 + f1),  b' = eps f2,  z' = -(z^3 + b z + a + eps f3),  eps' = 0,

with a, b slow, z fast and eps the singular parameter. The critical manifold
S = {z^3 + b z + a = 0} is the critical set of the cusp catastrophe and the fold
curve is the part of S where 3 z^2 + b = 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, EvaluationError

Scalar4 = Callable[[float, float, float, float], float]

AXES = ("a", "b", "z", "eps")


# ---------------------------------------------------------------------------
# State points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StatePoint:
    """A point (a, b, z, eps) of extended phase space."""

    a: float
    b: float
    z: float
    eps: float

    def __post_init__(self):
        vals = (self.a, self.b, self.z, self.eps)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"StatePoint fields must be finite, got {vals}")
        if self.eps < 0:
            raise DomainError(f"StatePoint requires eps >= 0, got {self.eps}")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.z, self.eps], dtype=float)

    @classmethod
    def from_array(cls, y) -> "StatePoint":
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]))


def _zero(a, b, z, eps):
    return 0.0


# ---------------------------------------------------------------------------
# The system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class A3System:
    """Cusp slow-fast vector field with perturbations f1, f2, f3.

    Parameters
    ----------
    f1, f2, f3 : callable or None
        Scalar fields ``f(a, b, z, eps)``. ``None`` means identically zero.
    name : str
        Free-form label echoed in reports.

    Notes
    -----
    ``principal`` is derived: it is true exactly when all three perturbations
    are absent, in which case evaluation never calls into user code.
    """

    f1: Scalar4 | None = None
    f2: Scalar4 | None = None
    f3: Scalar4 | None = None
    name: str = "principal"
    principal: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "principal", self.f1 is None and self.f2 is None and self.f3 is None
        )

    def perturbation(self, i: int) -> Scalar4:
        f = (self.f1, self.f2, self.f3)[i - 1]
        return _zero if f is None else f

    def eval_perturbations(self, a, b, z, eps) -> tuple[float, float, float]:
        """Evaluate (f1, f2, f3), raising if any value is non-finite."""
        if self.principal:
            return 0.0, 0.0, 0.0
        out = []
        for i in (1, 2, 3):
            f = self.perturbation(i)
            try:
                v = float(f(a, b, z, eps))
            except (OverflowError, ZeroDivisionError, ValueError) as exc:
                raise EvaluationError(f"f{i} failed at {(a, b, z, eps)}: {exc}") from exc
            if not math.isfinite(v):
                raise EvaluationError(f"f{i} is not finite at {(a, b, z, eps)}: {v}")
            out.append(v)
        return out[0], out[1], out[2]

    # fast array interface used by the integrators
    def fast_rhs(self, y: np.ndarray) -> np.ndarray:
        a, b, z, eps = y[0], y[1], y[2], y[3]
        g = z * z * z + b * z + a
        if self.principal:
            return np.array([eps, 0.0, -g, 0.0])
        f1, f2, f3 = self.eval_perturbations(a, b, z, eps)
        return np.array([eps * (1.0 + f1), eps * f2, -(g + eps * f3), 0.0])

    def fast_jacobian(self, y: np.ndarray) -> np.ndarray:
        """Jacobian of :meth:`fast_rhs` (perturbations by central differences)."""
        a, b, z, eps = (float(v) for v in y)
        J = np.zeros((4, 4))
        J[0, 3] = 1.0
        J[2, 0] = -1.0
        J[2, 1] = -z
        J[2, 2] = -(3.0 * z * z + b)
        if self.principal:
            return J
        f = self.eval_perturbations(a, b, z, eps)
        grads = [_fd_gradient(self.perturbation(i), (a, b, z, eps)) for i in (1, 2, 3)]
        J[0, :] += eps * grads[0]
        J[0, 3] += f[0]
        J[1, :] += eps * grads[1]
        J[1, 3] += f[1]
        J[2, :] -= eps * grads[2]
        J[2, 3] -= f[2]
        return J


def _fd_gradient(f: Scalar4, x: Sequence[float]) -> np.ndarray:
    g = np.zeros(4)
    for k in range(4):
        h = 1e-6 * max(1.0, abs(x[k]))
        xp = list(x)
        xm = list(x)
        xp[k] += h
        if k == 3 and x[3] - h < 0.0:
            g[k] = (f(*xp) - f(*x)) / h
            continue
        xm[k] -= h
        g[k] = (f(*xp) - f(*xm)) / (2.0 * h)
    return g


def principal_system() -> A3System:
    """The unperturbed cusp field (f1 = f2 = f3 = 0)."""
    return A3System()


def eval_fast(system: A3System, p: StatePoint) -> np.ndarray:
    """Fast-time velocity (eps(1+f1), eps f2, -(z^3+bz+a+eps f3), 0) at ``p``."""
    return system.fast_rhs(p.as_array())


def eval_slow(system: A3System, p: StatePoint) -> np.ndarray:
    """Slow-time velocity, the fast-time velocity divided by eps.

    Raises
    ------
    DomainError
        If ``p.eps == 0``.
    """
    if p.eps <= 0:
        raise DomainError("slow-time field undefined at ε=0")
    return eval_fast(system, p) / p.eps


def layer_field(system: A3System, p: StatePoint) -> np.ndarray:
    """Layer equation: slow variables frozen, eps set to zero inside g."""
    g = p.z**3 + p.b * p.z + p.a
    if not system.principal:
        # eps * f3 vanishes at eps = 0; still evaluate f3 so bad callables surface
        system.eval_perturbations(p.a, p.b, p.z, 0.0)
    return np.array([0.0, 0.0, -g, 0.0])


# ---------------------------------------------------------------------------
# Critical set geometry
# ---------------------------------------------------------------------------


class Root(NamedTuple):
    z: float
    multiplicity: int


def cubic_discriminant_sign(a: float, b: float) -> int:
    """Exact sign of -4 b^3 - 27 a^2 for the given binary floats."""
    fa, fb = Fraction(a), Fraction(b)
    d = -4 * fb**3 - 27 * fa**2
    return (d > 0) - (d < 0)


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _polish(z: float, a: float, b: float) -> float:
    d = 3.0 * z * z + b
    if abs(d) < 1e-8:
        return z
    znew = z - (z * z * z + b * z + a) / d
    if abs(znew**3 + b * znew + a) <= abs(z**3 + b * z + a):
        return znew
    return z


def critical_branches(a: float, b: float) -> list[Root]:
    """Real roots of z^3 + b z + a, ascending, with multiplicities.

    The trigonometric form is used when there are three real roots and the
    hyperbolic forms of Cardano's solution otherwise; each root then gets one
    Newton step. The root count follows the exact sign of the discriminant
    -4 b^3 - 27 a^2 of the input floats.

    Examples
    --------
    >>> [r.z for r in critical_branches(0.0, -1.0)]
    [-1.0, 0.0, 1.0]
    """
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("critical_branches needs finite coefficients")
    sgn = cubic_discriminant_sign(a, b)
    if sgn == 0:
        if b == 0.0:
            return [Root(0.0, 3)]
        double = -3.0 * a / (2.0 * b)
        simple = 3.0 * a / b
        roots = sorted([Root(double, 2), Root(simple, 1)])
        return roots
    if sgn > 0:
        # three distinct real roots, b < 0
        m = 2.0 * math.sqrt(-b / 3.0)
        arg = (3.0 * a / (2.0 * b)) * math.sqrt(-3.0 / b)
        arg = max(-1.0, min(1.0, arg))
        theta = math.acos(arg) / 3.0
        zs = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
        zs = sorted(_polish(z, a, b) for z in zs)
        return [Root(z, 1) for z in zs]
    # one real root
    if abs(b) ** 3 <= 1e-30 * a * a:
        # Cardano with the sign chosen against cancellation; the hyperbolic
        # forms below overflow when b is negligible next to a
        d = math.sqrt(0.25 * a * a + (b / 3.0) ** 3)
        u = _cbrt(-0.5 * a - math.copysign(d, a))
        z = u - b / (3.0 * u) if u != 0.0 else 0.0
    elif b > 0.0:
        s = math.sqrt(b / 3.0)
        z = -2.0 * s * math.sinh(math.asinh((3.0 * a / (2.0 * b)) / s) / 3.0)
    else:
        s = math.sqrt(-b / 3.0)
        arg = (-3.0 * abs(a) / (2.0 * b)) / s
        z = -2.0 * math.copysign(1.0, a) * s * math.cosh(math.acosh(max(arg, 1.0)) / 3.0)
    return [Root(_polish(_polish(z, a, b), a, b), 1)]


class PointClass(enum.Enum):
    OFF_MANIFOLD = "OffManifold"
    REGULAR = "Regular"
    FOLD = "Fold"
    CUSP = "Cusp"


def classify_point(
    a: float, b: float, z: float, tol_s: float = 1e-9, tol_delta: float = 1e-9
) -> PointClass:
    """Classify a point relative to the critical manifold and the fold curve."""
    if abs(z**3 + b * z + a) > tol_s:
        return PointClass.OFF_MANIFOLD
    if max(abs(a), abs(b), abs(z)) <= tol_s:
        return PointClass.CUSP
    if abs(3.0 * z * z + b) < tol_delta:
        return PointClass.FOLD
    return PointClass.REGULAR


def fold_curve_param(z: float) -> tuple[float, float]:
    """Point (a, b) = (2 z^3, -3 z^2) of the fold curve above ``z``."""
    return 2.0 * z**3, -3.0 * z * z


def potential(a: float, b: float, z: float) -> float:
    """Cusp potential V = z^4/4 + b z^2/2 + a z."""
    return 0.25 * z**4 + 0.5 * b * z * z + a * z


# ---------------------------------------------------------------------------
# Quasihomogeneous grading
# ---------------------------------------------------------------------------

WEIGHTS = (3, 2, 1, 5)


@dataclass(frozen=True)
class Monomial:
    """Monomial ``coefficient * a^alpha b^beta z^gamma eps^delta``."""

    exponents: tuple[int, int, int, int]
    coefficient: float = 1.0

    def __post_init__(self):
        if len(self.exponents) != 4:
            raise DomainError("Monomial needs four exponents (alpha, beta, gamma, delta)")
        if any(int(e) != e or e < 0 for e in self.exponents):
            raise DomainError(f"exponents must be non-negative integers: {self.exponents}")
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))

    def __mul__(self, other: "Monomial") -> "Monomial":
        exps = tuple(p + q for p, q in zip(self.exponents, other.exponents))
        return Monomial(exps, self.coefficient * other.coefficient)

    def __call__(self, a, b, z, eps):
        al, be, ga, de = self.exponents
        return self.coefficient * a**al * b**be * z**ga * eps**de


def quasihomogeneous_order(m: Monomial) -> int:
    """Weighted degree 3 alpha + 2 beta + gamma + 5 delta."""
    return sum(w * e for w, e in zip(WEIGHTS, m.exponents))


def check_nf_condition(P_i: Iterable[Monomial], i: int, k: int = 3) -> bool:
    """Check the normal-form condition on the i-th perturbation component.

    Every monomial must carry at least one factor of eps and have
    quasihomogeneous order at least ``2k - i + 1``.
    """
    if k < 2 or not 1 <= i <= k:
        raise DomainError(f"need k >= 2 and 1 <= i <= k, got k={k}, i={i}")
    bound = 2 * k - i + 1
    return all(m.exponents[3] >= 1 and quasihomogeneous_order(m) >= bound for m in P_i)


# ---------------------------------------------------------------------------
# Stock flat perturbations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OriginBump:
    """``amplitude * exp(-1/s)`` with s = a^2 + b^2 + z^2 + eps^2, zero at s = 0.

    Flat at the origin of (a, b, z, eps) only. Along a transition between
    sections at |a| = 1 it is of order one, so it changes the limiting rate.
    """

    amplitude: float = 1.0

    def __call__(self, a, b, z, eps):
        s = a * a + b * b + z * z + eps * eps
        if s <= 0.0:
            return 0.0
        return self.amplitude * math.exp(-1.0 / s)


@dataclass(frozen=True)
class EpsFlatBump:
    """``amplitude * exp(-kappa/eps - (a^2 + b^2 + z^2)/2)``, zero for eps <= 0.

    Flat in eps uniformly on compact sets, hence beyond all orders along the
    whole transition.
    """

    amplitude: float = 1.0
    kappa: float = 0.06

    def __call__(self, a, b, z, eps):
        if eps <= 0.0:
            return 0.0
        return self.amplitude * math.exp(-self.kappa / eps - 0.5 * (a * a + b * b + z * z))


def stock_flat_system(kind: str = "eps", amplitude: float = 1.0, kappa: float = 0.06) -> A3System:
    """System with the same stock bump in all three perturbation slots.

    Parameters
    ----------
    kind : {"eps", "origin"}
        ``"eps"`` uses :class:`EpsFlatBump`, ``"origin"`` uses :class:`OriginBump`.
    amplitude : float
        Bump amplitude; 0 returns the principal system.
    """
    if amplitude == 0.0:
        return A3System(name=f"{kind}-flat(0)")
    if kind == "eps":
        f = EpsFlatBump(amplitude, kappa)
    elif kind == "origin":
        f = OriginBump(amplitude)
    else:
        raise DomainError(f"unknown stock flat kind {kind!r}")
    return A3System(f, f, f, name=f"{kind}-flat({amplitude})")
