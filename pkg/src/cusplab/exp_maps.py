"""Exponential-type maps and the closed-form model transitions.

An exponential-type map is

    D(V, Z, eps) = B(V, eps) + Z exp(-(A(V, eps) + Phi(V, Z, eps)) / eps)

with rate A > 0, shift B(V, 0) = 0 and correction Phi(V, Z, 0) = 0. Maps are
stored by their three components. Compositions return new maps whose
components are closures built from the inputs, so the rate of a composition
is available structurally and can be checked by extraction.

Every function here accepts plain floats or ``mpmath.mpf`` values; with mpf
input the arithmetic stays in mpmath, which is how factors such as
exp(-10^4) are resolved during component extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Sequence

import mpmath
import numpy as np

from .errors import (
    ChainStructureError,
    DiffeomorphismError,
    DomainError,
    NonContractiveError,
    ShiftViolationError,
)

# ---------------------------------------------------------------------------
# scalar helpers that dispatch between float and mpmath
# ---------------------------------------------------------------------------


def _is_mp(*xs) -> bool:
    return any(isinstance(x, (mpmath.mpf, mpmath.mpc)) for x in xs)


def _exp(x):
    if _is_mp(x):
        return mpmath.exp(x)
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _log(x):
    return mpmath.log(x) if _is_mp(x) else math.log(x)


def _expm1(x):
    return mpmath.expm1(x) if _is_mp(x) else math.expm1(x)


def _fd_step(x, scale=1.0):
    if _is_mp(x):
        return mpmath.mpf(10) ** (-(mpmath.mp.dps // 3)) * max(1, abs(x))
    return 1e-6 * max(1.0, abs(float(x))) * scale


def _negligible(w, B) -> bool:
    """True when ``w`` is too small relative to ``B`` for a clean difference."""
    if B == 0:
        return False
    if _is_mp(w, B):
        thr = mpmath.mpf(10) ** (-(mpmath.mp.dps // 2))
    else:
        thr = 1e-6
    return abs(w) <= thr * abs(B)


def _zero_shift(V, eps):
    return 0


def _zero_phi(V, Z, eps):
    return 0


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpTypeMap:
    """``D(V, Z, eps) = B(V, eps) + Z exp(-(A(V, eps) + Phi(V, Z, eps)) / eps)``.

    Parameters
    ----------
    B, A : callable ``(V, eps)``
    Phi : callable ``(V, Z, eps)``
    no_shift : bool
        Declares B == 0; ``B`` is then ignored and evaluates to exactly 0.
    linear : bool
        Declares that Phi does not depend on Z.
    """

    B: Callable = _zero_shift
    A: Callable = None
    Phi: Callable = _zero_phi
    no_shift: bool = False
    linear: bool = False
    name: str = ""

    def __post_init__(self):
        if self.A is None:
            raise DomainError("an exponential-type map needs a rate A")
        if self.no_shift:
            object.__setattr__(self, "B", _zero_shift)

    @classmethod
    def pure(cls, rate: float, name: str = "") -> "ExpTypeMap":
        """``Z exp(-rate/eps)``: no shift, no correction."""
        return cls(A=lambda V, eps: rate, no_shift=True, linear=True,
                   name=name or f"pure({rate})")

    def shift(self, V, eps):
        return 0 if self.no_shift else self.B(V, eps)

    def exponent(self, V, Z, eps):
        """``(A + Phi) / eps``."""
        return (self.A(V, eps) + self.Phi(V, Z, eps)) / eps

    def excess(self, V, Z, eps):
        """``D - B``, possibly underflowing to 0 in floating point."""
        if Z == 0:
            return 0 * Z
        return Z * _exp(-self.exponent(V, Z, eps))

    def log_excess(self, V, Z, eps):
        """``log |D - B|``, finite even when the excess underflows."""
        if Z == 0:
            return -math.inf
        return _log(abs(Z)) - self.exponent(V, Z, eps)

    def __call__(self, V, Z, eps):
        return self.shift(V, eps) + self.excess(V, Z, eps)

    def dPhi_dZ(self, V, Z, eps):
        if self.linear:
            return 0
        h = _fd_step(Z)
        return (self.Phi(V, Z + h, eps) - self.Phi(V, Z - h, eps)) / (2 * h)


def eval(D: ExpTypeMap, V, Z, eps):  # noqa: A001 - mirrors the operation name
    """Evaluate ``D`` at ``(V, Z, eps)``.

    Raises
    ------
    DomainError
        If ``eps <= 0``.
    """
    if not eps > 0:
        raise DomainError("exponential-type maps are evaluated at eps > 0")
    return D(V, Z, eps)


def eval_with_log(D: ExpTypeMap, V, Z, eps):
    """Return ``(D(V, Z, eps), log|D - B|)``."""
    return eval(D, V, Z, eps), D.log_excess(V, Z, eps)


@dataclass(frozen=True)
class Diffeo:
    """A family ``y -> psi(V, y, eps)`` of one-dimensional diffeomorphisms.

    ``derivative`` is optional; without it derivatives are taken by central
    differences.
    """

    psi: Callable
    derivative: Callable | None = None
    name: str = ""

    def __call__(self, V, y, eps):
        return self.psi(V, y, eps)

    def deriv(self, V, y, eps):
        if self.derivative is not None:
            return self.derivative(V, y, eps)
        h = _fd_step(y)
        return (self.psi(V, y + h, eps) - self.psi(V, y - h, eps)) / (2 * h)

    def log_quotient(self, V, y, w, eps):
        """``log((psi(y + w) - psi(y)) / w)``.

        Uses the difference quotient while it is resolvable and the derivative
        once ``y + w`` is indistinguishable from ``y``.
        """
        if w != 0 and not _negligible(w, y):
            q = (self.psi(V, y + w, eps) - self.psi(V, y, eps)) / w
            if q != 0:
                if q < 0:
                    raise DiffeomorphismError(f"{self.name or 'psi'} is decreasing near y={y}")
                return _log(q)
        c = self.deriv(V, y + w / 2, eps)
        if not c > 0:
            raise DiffeomorphismError(f"{self.name or 'psi'} has derivative {c} <= 0 near y={y}")
        return _log(c)


def as_diffeo(m) -> Diffeo:
    if isinstance(m, Diffeo):
        return m
    if callable(m) and not isinstance(m, ExpTypeMap):
        return Diffeo(m)
    raise DomainError(f"cannot interpret {m!r} as a diffeomorphism family")


IDENTITY = Diffeo(lambda V, y, eps: y, lambda V, y, eps: 1, name="identity")


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------


def compose_left(psi, D: ExpTypeMap) -> ExpTypeMap:
    """``psi o D`` for a diffeomorphism family ``psi``.

    With ``psi(B + w) = psi(B) + C w (1 + u(w))`` the composition has shift
    psi(B), the same rate and correction ``Phi - eps log(C (1 + u(w)))`` where
    ``w = D - B``. When ``psi`` is itself of exponential type the rates add;
    see :func:`compose_exp`.

    Raises
    ------
    DiffeomorphismError
        At evaluation time, if psi is not increasing near the shift.
    """
    if isinstance(psi, ExpTypeMap):
        return compose_exp(psi, D)
    psi = as_diffeo(psi)

    def B(V, eps):
        return psi(V, D.shift(V, eps), eps)

    def Phi(V, Z, eps):
        b = D.shift(V, eps)
        w = D.excess(V, Z, eps)
        return D.Phi(V, Z, eps) - eps * psi.log_quotient(V, b, w, eps)

    return ExpTypeMap(B=B, A=D.A, Phi=Phi, no_shift=False, linear=False,
                      name=f"{psi.name or 'psi'}∘{D.name or 'D'}")


def _log_ratio_no_shift(psi, V, Z, eps):
    """``log(psi(Z) / Z)`` for a no-shift family, log-safe for exponential maps."""
    if isinstance(psi, ExpTypeMap):
        return -psi.exponent(V, Z, eps)
    if Z == 0 or _negligible(Z, 1):
        c = psi.deriv(V, Z / 2 if Z != 0 else Z, eps)
        if not c > 0:
            raise DiffeomorphismError("no-shift family has non-positive derivative at 0")
        return _log(c)
    q = psi(V, Z, eps) / Z
    if not q > 0:
        raise DiffeomorphismError("no-shift family does not preserve sign")
    return _log(q)


def compose_right(D: ExpTypeMap, psi, probes: Sequence[tuple[Any, float]] = ((0.0, 0.1), (0.0, 0.01))) -> ExpTypeMap:
    """``D(V, psi(V, Z, eps), eps)`` for a family with ``psi(0) = 0``.

    The result keeps B and A and has correction
    ``Phi(V, psi(Z), eps) - eps log(psi(Z)/Z)``.

    Raises
    ------
    ShiftViolationError
        If ``|psi(V, 0, eps)| > 1e-14`` at one of the ``probes`` ``(V, eps)``.
    """
    if isinstance(psi, ExpTypeMap):
        if not psi.no_shift:
            raise ShiftViolationError("inner map has a shift")
        return compose_exp(D, psi)
    psi = as_diffeo(psi)
    for V, eps in probes:
        try:
            s = psi(V, 0.0, eps)
        except (TypeError, IndexError):
            continue
        if abs(s) > 1e-14:
            raise ShiftViolationError(f"psi(0) = {s} != 0; the composition loses its structure")

    def Phi(V, Z, eps):
        return D.Phi(V, psi(V, Z, eps), eps) - eps * _log_ratio_no_shift(psi, V, Z, eps)

    return ExpTypeMap(B=D.B, A=D.A, Phi=Phi, no_shift=D.no_shift, linear=False,
                      name=f"{D.name or 'D'}∘{psi.name or 'psi'}")


def compose_exp(outer: ExpTypeMap, inner: ExpTypeMap) -> ExpTypeMap:
    """``outer o inner`` for two exponential-type maps; the rates add.

    Writing ``w`` for the excess of the inner map and ``b`` for its shift,

        outer(b + w) - outer(b) = w exp(-(A_o + Phi_o(b))/eps) q,
        q = exp(-d) + b expm1(-d) / w,  d = (Phi_o(b + w) - Phi_o(b)) / eps,

    so the composition has shift outer(b), rate A_o + A_i and correction
    ``Phi_i + Phi_o(b) - eps log q``. When the inner map has no shift this
    reduces to ``Phi_i + Phi_o(w)``; when the outer map is linear, q = 1.
    """
    def B(V, eps):
        if inner.no_shift:
            return outer.shift(V, eps)
        return outer(V, inner.shift(V, eps), eps)

    def A(V, eps):
        return outer.A(V, eps) + inner.A(V, eps)

    def Phi(V, Z, eps):
        pin = inner.Phi(V, Z, eps)
        if inner.no_shift:
            if outer.linear:
                return pin + outer.Phi(V, 0 * Z, eps)
            return pin + outer.Phi(V, inner.excess(V, Z, eps), eps)
        b = inner.shift(V, eps)
        pb = outer.Phi(V, b, eps)
        if outer.linear:
            return pin + pb
        w = inner.excess(V, Z, eps)
        if w == 0 or _negligible(w, b):
            q = 1 - b * outer.dPhi_dZ(V, b + w / 2, eps) / eps
        else:
            d = (outer.Phi(V, b + w, eps) - pb) / eps
            q = _exp(-d) + b * _expm1(-d) / w
        if not q > 0:
            raise DiffeomorphismError("outer map is not increasing at the inner shift")
        return pin + pb - eps * _log(q)

    return ExpTypeMap(B=B, A=A, Phi=Phi,
                      no_shift=outer.no_shift and inner.no_shift,
                      linear=outer.linear and inner.linear,
                      name=f"{outer.name or 'D2'}∘{inner.name or 'D1'}")


def compose_chain(maps: Sequence) -> ExpTypeMap:
    """Compose ``P5 o P4 o P3 o P2 o P1`` with the five-map role pattern.

    P1 and P5 must be no-shift linear exponential-type maps, P2 and P4
    no-shift exponential-type maps, and P3 either a diffeomorphism family or
    an exponential-type map. The result has rate A1 + A2 + A4 + A5, plus A3
    when P3 is of exponential type.

    Raises
    ------
    ChainStructureError
        If the list does not have five entries or a role is violated.
    """
    maps = list(maps)
    if len(maps) != 5:
        raise ChainStructureError(f"a chain needs 5 maps, got {len(maps)}")
    p1, p2, p3, p4, p5 = maps
    for k, m, lin in ((1, p1, True), (2, p2, False), (4, p4, False), (5, p5, True)):
        if not isinstance(m, ExpTypeMap):
            raise ChainStructureError(f"map {k} must be of exponential type")
        if not m.no_shift:
            raise ChainStructureError(f"map {k} must have no shift")
        if lin and not m.linear:
            raise ChainStructureError(f"map {k} must be linear")
    if not (isinstance(p3, (ExpTypeMap, Diffeo)) or callable(p3)):
        raise ChainStructureError("map 3 must be a diffeomorphism family or of exponential type")
    p21 = compose_exp(p2, p1)
    p321 = compose_exp(p3, p21) if isinstance(p3, ExpTypeMap) else compose_left(p3, p21)
    p54 = compose_exp(p5, p4)
    return compose_exp(p54, p321)


def chain_pointwise(maps: Sequence) -> Callable:
    """Plain nested evaluation of a five-map chain, for cross-checks."""
    maps = list(maps)

    def D(V, Z, eps):
        y = Z
        for m in maps:
            y = m(V, y, eps)
        return y

    return D


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


class Components(NamedTuple):
    B: float
    A: float
    Phi_at_probe: float


def _to_mp(V):
    if isinstance(V, (int, float)) and not isinstance(V, bool):
        return mpmath.mpf(V)
    return V


def extract_components(D: Callable, V, eps, z_probe: float = 1e-2, max_dps: int = 200000) -> Components:
    """Recover (B, A, Phi(z_probe)) from a black-box map ``D(V, Z, eps)``.

    ``B = D(V, 0, eps)`` and ``A`` is the limit of ``-eps log((D - B)/Z)`` as Z
    goes to 0, approximated by Richardson extrapolation over z_probe,
    z_probe/2 and z_probe/4. Evaluation runs in mpmath with the working
    precision raised until ``D - B`` is resolved; callables that fall back to
    floats are evaluated in double precision.

    Raises
    ------
    NonContractiveError
        If ``(D - B)/Z <= 0`` at a probe or the extracted rate is not positive.
    """
    if not eps > 0:
        raise DomainError("extraction needs eps > 0")
    hs = [z_probe, z_probe / 2, z_probe / 4]
    dps = 30
    while True:
        with mpmath.workdps(dps):
            e = mpmath.mpf(eps)
            Vm = _to_mp(V)
            B = D(Vm, mpmath.mpf(0), e)
            vals = [D(Vm, mpmath.mpf(h), e) for h in hs]
            if not _is_mp(B, *vals):
                return _extract_float(D, V, eps, hs)
            excess = [v - B for v in vals]
            scale = max(abs(B), mpmath.mpf(10) ** -300)
            worst = min(abs(x) for x in excess)
            if worst == 0:
                need = dps * 4
            else:
                lost = float(mpmath.log10(scale / worst)) if worst < scale else 0.0
                need = int(lost) + 30
            if need <= dps:
                for x, h in zip(excess, hs):
                    if not x / h > 0:
                        raise NonContractiveError(
                            f"(D-B)/Z = {mpmath.nstr(x / h, 5)} <= 0; not of exponential type here"
                        )
                g = [-e * mpmath.log(x / h) for x, h in zip(excess, hs)]
                A = (8 * g[2] - 6 * g[1] + g[0]) / 3
                if not A > 0:
                    raise NonContractiveError(f"extracted rate {mpmath.nstr(A, 5)} is not positive")
                return Components(float(B), float(A), float(g[0] - A))
            if need > max_dps:
                raise NonContractiveError(f"D - B not resolved within {max_dps} digits")
            dps = need


def _extract_float(D, V, eps, hs) -> Components:
    B = float(D(V, 0.0, eps))
    g = []
    for h in hs:
        q = (float(D(V, h, eps)) - B) / h
        if not q > 0:
            raise NonContractiveError(f"(D-B)/Z = {q} <= 0; not of exponential type here")
        g.append(-eps * math.log(q))
    A = (8 * g[2] - 6 * g[1] + g[0]) / 3
    if not A > 0:
        raise NonContractiveError(f"extracted rate {A} is not positive")
    return Components(B, A, g[0] - A)


# ---------------------------------------------------------------------------
# closed-form model transitions
# ---------------------------------------------------------------------------


class RegularResult(NamedTuple):
    V: Any
    Z: float
    eps: float
    log_factor: float


def regular_transition(U_i: float, U_f: float, eps: float, V, Z: float) -> RegularResult:
    """Transition of U' = eps, Z' = -Z from U = U_i to U = U_f.

    Z is multiplied by exp(-(U_f - U_i)/eps); ``log_factor`` holds the exponent.
    """
    if not eps > 0:
        raise DomainError("regular_transition needs eps > 0")
    if U_f < U_i:
        raise DomainError("regular_transition needs U_f >= U_i")
    lf = -(U_f - U_i) / eps
    return RegularResult(V, Z * _exp(lf), eps, lf)


class Saddle1Result(NamedTuple):
    u: float
    v: np.ndarray
    w: float
    Z: float
    log_factor: float


def saddle1_transition(beta, gamma: float, Lam: float, u: float, v, w: float, w_out: float,
                       Z: float, check_v: bool = True) -> Saddle1Result:
    """Leading-order transition near a semi-hyperbolic saddle, entry side.

    Model: u' = -u, v' = beta v, w' = gamma w, Z' = -(Lam/w) Z, from w to
    the exit section w = w_out. Closed form

        u~ = u (w/w_out)^(1/gamma),  v~ = v (w_out/w)^(beta/gamma),
        Z~ = Z exp(-(Lam/(gamma w)) (1 - w/w_out)).

    Raises
    ------
    DomainError
        If not 0 < w < w_out, or if ``check_v`` and some
        ``|v_i| > 10 w^(beta_i/gamma)``.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not 0 < w < w_out:
        raise DomainError(f"saddle1 needs 0 < w < w_out, got w={w}, w_out={w_out}")
    if not (gamma > 0 and Lam > 0 and np.all(beta > 0)):
        raise DomainError("saddle1 needs gamma, Lam and beta positive")
    if check_v and np.any(np.abs(v) > 10 * w ** (beta / gamma)):
        raise DomainError("|v_i| exceeds 10 w^(beta_i/gamma)")
    ratio = w / w_out
    lf = -(Lam / (gamma * w)) * (1.0 - ratio)
    return Saddle1Result(u * ratio ** (1.0 / gamma), v * ratio ** (-beta / gamma), w_out,
                         Z * _exp(lf), lf)


class Saddle2Result(NamedTuple):
    u: float
    v: np.ndarray
    w: float
    Z: float
    log_factor: float


def saddle2_transition(beta, gamma: float, Lam: float, u: float, u_out: float, v, w: float,
                       Z: float) -> Saddle2Result:
    """Leading-order transition near a semi-hyperbolic saddle, exit side.

    Model: u' = u, v' = -beta v, w' = -gamma w, Z' = -(Lam/w) Z, from u to
    the exit section u = u_out. Closed form

        v~ = v (u/u_out)^beta,  w~ = w (u/u_out)^gamma,
        Z~ = Z exp(-(Lam/(gamma w)) ((u_out/u)^gamma - 1)).

    Raises
    ------
    DomainError
        If not 0 < u < u_out or w <= 0.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not 0 < u < u_out:
        raise DomainError(f"saddle2 needs 0 < u < u_out, got u={u}, u_out={u_out}")
    if not w > 0:
        raise DomainError("saddle2 needs w > 0")
    if not (gamma > 0 and Lam > 0 and np.all(beta > 0)):
        raise DomainError("saddle2 needs gamma, Lam and beta positive")
    ratio = u / u_out
    lf = -(Lam / (gamma * w)) * (ratio ** (-gamma) - 1.0)
    return Saddle2Result(u_out, v * ratio**beta, w * ratio**gamma, Z * _exp(lf), lf)


# model fields for numerical cross-checks; the last state entry is log Z


def regular_model_field(eps: float):
    """(U, V, log Z, eps) for U' = eps, V' = 0, Z' = -Z."""
    return lambda y: np.array([eps, 0.0, -1.0, 0.0])


def saddle1_model_field(beta, gamma: float, Lam: float):
    """State (u, v_1..v_m, w, log Z)."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    m = beta.size

    def f(y):
        w = y[m + 1]
        return np.concatenate([[-y[0]], beta * y[1:m + 1], [gamma * w, -Lam / w]])

    return f


def saddle2_model_field(beta, gamma: float, Lam: float):
    """State (u, v_1..v_m, w, log Z)."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    m = beta.size

    def f(y):
        w = y[m + 1]
        return np.concatenate([[y[0]], -beta * y[1:m + 1], [-gamma * w, -Lam / w]])

    return f
