"""Special functions and scalar numerics shared by the analytic formulas.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

from scipy.integrate import quad

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-12
ROOT_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the mathematical domain of a formula."""


class ConvergenceError(RuntimeError):
    """An iterative routine stopped before reaching its tolerance."""


class QuadratureError(ConvergenceError):
    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, abserr={error:.3e})")
        self.estimate = estimate
        self.error = error


class NoSignChange(ValueError):
    """The bracket handed to the root finder does not straddle a root."""


def _check_alpha(alpha: float) -> None:
    if not alpha > 2.0 or not math.isfinite(alpha):
        raise DomainError(f"path loss exponent must be finite and > 2, got {alpha!r}")


def _check_theta(theta: float) -> None:
    if not theta > 0.0 or not math.isfinite(theta):
        raise DomainError(f"SIR threshold must be finite and > 0, got {theta!r}")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def kappa(alpha: float) -> float:
    """(2 pi / alpha) / sin(2 pi / alpha); equals the integral of 1/(1+u^(alpha/2)) over (0, inf)."""
    _check_alpha(alpha)
    t = 2.0 * math.pi / alpha
    return t / math.sin(t)


def _checked_quad(func, a, b, **kw) -> float:
    out = quad(func, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200, full_output=1, **kw)
    value, err = out[0], out[1]
    if len(out) > 3 or not math.isfinite(value):
        msg = out[3] if len(out) > 3 else "non-finite result"
        raise QuadratureError(f"quadrature did not converge: {msg}", value, err)
    return value


@lru_cache(maxsize=4096)
def rho(theta: float, alpha: float) -> float:
    """theta^(2/alpha) times the integral of 1/(1+u^(alpha/2)) over (theta^(-2/alpha), inf).

    The tail beyond u=1 is mapped to (0, 1] by u = 1/v, which turns the
    integrand into v^(alpha/2-2)/(1+v^(alpha/2)); the algebraic endpoint
    factor is handled by the weighted QUADPACK rule, so nothing is truncated.
    """
    _check_theta(theta)
    _check_alpha(alpha)
    a = alpha / 2.0
    lower = theta ** (-2.0 / alpha)

    def head(u):
        return 1.0 / (1.0 + u**a)

    def tail(v):
        return 1.0 / (1.0 + v**a)

    if lower < 1.0:
        total = _checked_quad(head, lower, 1.0)
        total += _checked_quad(tail, 0.0, 1.0, weight="alg", wvar=(a - 2.0, 0.0))
    else:
        total = _checked_quad(tail, 0.0, 1.0 / lower, weight="alg", wvar=(a - 2.0, 0.0))
    return theta ** (2.0 / alpha) * total


@lru_cache(maxsize=4096)
def rho_gap(theta: float, alpha: float) -> float:
    """1 + rho(theta) - kappa theta^(2/alpha), computed without cancellation.

    Equals theta^(2/alpha) times the integral of u^(alpha/2)/(1+u^(alpha/2))
    over (0, theta^(-2/alpha)), so it is strictly positive.
    """
    _check_theta(theta)
    _check_alpha(alpha)
    a = alpha / 2.0
    upper = theta ** (-2.0 / alpha)
    # substitute u = upper * t to keep the integration range fixed
    val = _checked_quad(lambda t: (upper * t) ** a / (1.0 + (upper * t) ** a), 0.0, 1.0)
    return val


def prob_cell_nonempty(load_ratio: float) -> float:
    """Gamma-fit approximation of P(K > 0) for mean cellular receivers per cell `load_ratio`."""
    if load_ratio < 0 or math.isnan(load_ratio):
        raise DomainError(f"load ratio must be >= 0, got {load_ratio!r}")
    return 1.0 - (1.0 + load_ratio / 3.5) ** -3.5


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    tol: float = ROOT_TOL

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if not self.tol > 0:
            raise ValueError("bracket tolerance must be positive")


def solve_monotone(fn: Callable[[float], float], bracket: Bracket, max_iter: int = 400) -> float:
    """Bisection for the single sign change of `fn` inside `bracket`.

    Stops once the interval is narrower than ``bracket.tol`` or cannot be
    split further in floating point. Raises NoSignChange when the end values
    share a sign.
    """
    lo, hi = bracket.lo, bracket.hi
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.isnan(flo) or math.isnan(fhi) or (flo > 0) == (fhi > 0):
        raise NoSignChange(f"no sign change on [{lo}, {hi}]: f(lo)={flo!r}, f(hi)={fhi!r}")
    for _ in range(max_iter):
        if hi - lo <= bracket.tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    raise ConvergenceError(f"bisection did not reach tol={bracket.tol} in {max_iter} steps")
