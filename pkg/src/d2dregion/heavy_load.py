"""Heavy-load (every AP active) objective, optimal mode parameters and operational regions.

With P(K>0) = 1 and the resource-sharing parameter fixed so that cellular
users keep their no-D2D rate, the average UE rate becomes

    R = R_noD2D * (1 + lambda_d / (lambda_c + lambda_d) * f(p, q))

and the whole design problem is carried by ``f`` and a handful of
coefficients condensed from the operational point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kernel import Bracket, DomainError, NoSignChange, rho_gap, solve_monotone
from .model import Deployment, OperationalPoint, Scheme

E = math.e
BOUNDARY_SLACK = 1e-9
# p/q brackets are solved to float resolution; optimum gradients are checked at 1e-6
_FINE_TOL = 1e-15


class CoefficientError(DomainError):
    """Operational point whose condensed coefficients leave the positive orthant."""


@dataclass(frozen=True)
class HeavyLoadCoefficients:
    c1: float
    c2: float
    c1_bar: float
    c2_bar: float
    c3_bar: float

    def __post_init__(self):
        for name in ("c1", "c2", "c1_bar", "c2_bar", "c3_bar"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise CoefficientError(f"coefficient {name} must be finite and > 0, got {v!r}")

    @property
    def d2d_share(self) -> float:
        """lambda_d / (lambda_c + lambda_d), recovered as c1 / c1_bar."""
        return self.c1 / self.c1_bar

    @property
    def underlay_sum(self) -> float:
        return self.c2_bar + self.c3_bar


@dataclass(frozen=True)
class SchemeResult:
    scheme: Scheme
    deployment: Deployment
    p_star: float
    q_star: float
    f_star: float
    gain: float
    in_region: bool
    interior_p: bool = False
    interior_q: bool = False
    note: str = ""

    @property
    def on_boundary(self) -> bool:
        return abs(self.f_star) <= BOUNDARY_SLACK

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "deployment": self.deployment.value,
            "p_star": self.p_star,
            "q_star": self.q_star,
            "f_star": self.f_star,
            "gain": self.gain,
            "in_region": self.in_region,
            "boundary": self.on_boundary,
            "note": self.note,
        }


def coefficients(op: OperationalPoint) -> HeavyLoadCoefficients:
    rho0 = op.rho0
    k_theta = op.kappa * op.theta_0 ** (2.0 / op.alpha)
    c1 = op.lambda_d / op.lambda_a * (1.0 + rho0)
    c2 = 0.5 * op.lambda_d * math.pi * op.r_d_max**2 * k_theta
    ratio = 1.0 + op.lambda_c / op.lambda_d
    # 1 - k_theta/(1+rho) written through the positive gap 1+rho-k_theta
    shrink = rho_gap(op.theta_0, op.alpha) / (1.0 + rho0)
    if not shrink > 0:
        raise CoefficientError(
            f"c2_bar underflows to 0 at theta_0={op.theta_0!r}, alpha={op.alpha!r}"
        )
    return HeavyLoadCoefficients(
        c1=c1,
        c2=c2,
        c1_bar=c1 * ratio,
        c2_bar=c2 * shrink,
        c3_bar=c2 * k_theta * ratio / (1.0 + rho0),
    )


def f_objective(coeffs: HeavyLoadCoefficients, deployment, gamma: int, p, q):
    """f(p, q); broadcasts over numpy arrays."""
    deployment = Deployment(deployment)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if deployment is Deployment.OVERLAY:
        out = coeffs.c1 * p**2 * q * np.exp(-coeffs.c2 * q * p**gamma) - p
    else:
        expo = coeffs.c2_bar * q * p**gamma + coeffs.c3_bar * q * p ** (gamma - 1)
        out = coeffs.c1_bar * p * q * np.exp(-expo) - p
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# per-scheme optimizers
# ---------------------------------------------------------------------------

def _result(coeffs, scheme, deployment, gamma, p, q, interior_p=False, interior_q=False, note=""):
    f = f_objective(coeffs, deployment, gamma, p, q)
    return SchemeResult(
        scheme=scheme,
        deployment=deployment,
        p_star=p,
        q_star=q,
        f_star=f,
        gain=1.0 + coeffs.d2d_share * f,
        in_region=f > 0,
        interior_p=interior_p,
        interior_q=interior_q,
        note=note,
    )


def _prefer_interior(boundary: SchemeResult, interior: SchemeResult | None) -> SchemeResult:
    # an interior stationary point is only the optimum when it yields a gain
    if interior is not None and interior.f_star > 0 and interior.f_star > boundary.f_star:
        return interior
    return boundary


def _solve(fn: Callable[[float], float], lo: float, hi: float) -> float | None:
    if not lo < hi:
        return None
    try:
        return solve_monotone(fn, Bracket(lo, hi, _FINE_TOL))
    except NoSignChange:
        return None


def _scheme1(coeffs, deployment):
    return _result(coeffs, Scheme.S1, deployment, 1, 1.0, 1.0)


def _scheme2(coeffs, deployment):
    edge = _result(coeffs, Scheme.S2, deployment, 1, 1.0, 1.0)
    s = coeffs.c2 if deployment is Deployment.OVERLAY else coeffs.underlay_sum
    interior = None
    if s > 1.0:
        interior = _result(coeffs, Scheme.S2, deployment, 1, 1.0, 1.0 / s, interior_q=True)
    return _prefer_interior(edge, interior)


def _scheme3p(coeffs, deployment):
    edge = _result(coeffs, Scheme.S3P, deployment, 1, 1.0, 1.0)
    interior = None
    if deployment is Deployment.OVERLAY:
        c1, c2 = coeffs.c1, coeffs.c2
        target = c2 / c1
        x = _solve(lambda x: x * math.exp(-x) * (2.0 - x) - target, 1.0, min(2.0, c2))
        if x is not None:
            interior = _result(coeffs, Scheme.S3P, deployment, 1, x / c2, 1.0, interior_p=True)
    else:
        c1b, c2b, c3b = coeffs.c1_bar, coeffs.c2_bar, coeffs.c3_bar
        log_target = c3b - math.log(c1b)  # log of e^{c3_bar}/c1_bar
        if log_target < 0:
            target = math.exp(log_target)
            x = _solve(lambda x: math.exp(-x) * (1.0 - x) - target, 0.0, min(1.0, c2b))
            if x is not None and x > 0:
                interior = _result(coeffs, Scheme.S3P, deployment, 1, x / c2b, 1.0, interior_p=True)
    return _prefer_interior(edge, interior)


def _underlay3d_slope(coeffs: HeavyLoadCoefficients, p: float) -> float:
    c1b, c2b, c3b = coeffs.c1_bar, coeffs.c2_bar, coeffs.c3_bar
    return c1b * math.exp(-(c2b * p * p + c3b * p)) * (1.0 - 2.0 * c2b * p * p - c3b * p) - 1.0


def _scheme3d(coeffs, deployment):
    edge = _result(coeffs, Scheme.S3D, deployment, 2, 1.0, 1.0)
    interior = None
    if deployment is Deployment.OVERLAY:
        c1, c2 = coeffs.c1, coeffs.c2
        target = math.sqrt(c2) / (2.0 * c1)
        x = _solve(lambda x: math.sqrt(x) * math.exp(-x) * (1.0 - x) - target, 0.5, min(1.0, c2))
        if x is not None:
            interior = _result(coeffs, Scheme.S3D, deployment, 2, math.sqrt(x / c2), 1.0, interior_p=True)
    else:
        # no closed form: the slope of f(p, 1) has one sign change on (0, 1], find it by bisection
        if coeffs.c1_bar > 1.0 and _underlay3d_slope(coeffs, 1.0) < 0:
            p = _solve(lambda p: _underlay3d_slope(coeffs, p), 0.0, 1.0)
            if p is not None and 0 < p < 1:
                interior = _result(coeffs, Scheme.S3D, deployment, 2, p, 1.0, interior_p=True)
    return _prefer_interior(edge, interior)


def _scheme4p_interior(coeffs) -> tuple[float, float] | None:
    """Joint stationary point of the underlay probabilistic objective, if inside (0,1)^2.

    Setting both partial derivatives to zero gives q = sqrt(e / (c1_bar c3_bar))
    and p = (sqrt(c1_bar c3_bar / e) - c3_bar) / c2_bar.
    """
    c1b, c2b, c3b = coeffs.c1_bar, coeffs.c2_bar, coeffs.c3_bar
    root = math.sqrt(c1b * c3b / E)
    q = 1.0 / root
    p = (root - c3b) / c2b
    if 0 < p < 1 and 0 < q < 1:
        return p, q
    return None


def _scheme4p_underlay(coeffs):
    deployment = Deployment.UNDERLAY
    s2 = _scheme2(coeffs, deployment)
    s3 = _scheme3p(coeffs, deployment)
    best = s2 if s2.f_star >= s3.f_star else s3
    edge = SchemeResult(
        Scheme.S4P, deployment, best.p_star, best.q_star, best.f_star, best.gain, best.in_region,
        best.interior_p, best.interior_q, note=f"edge optimum of scheme {best.scheme.value}",
    )
    pq = _scheme4p_interior(coeffs)
    interior = None
    if pq is not None:
        interior = _result(coeffs, Scheme.S4P, deployment, 1, pq[0], pq[1], interior_p=True, interior_q=True)
    return _prefer_interior(edge, interior)


def _dispatched(coeffs, scheme, deployment):
    reduced = [Scheme.S2, Scheme.S3P if scheme is Scheme.S4P else Scheme.S3D]
    results = [optimize_scheme(coeffs, s, deployment) for s in reduced]
    best = max(results, key=lambda r: r.f_star)
    return SchemeResult(
        scheme, deployment, best.p_star, best.q_star, best.f_star, best.gain, best.in_region,
        best.interior_p, best.interior_q,
        note=f"no interior joint optimum; dispatched to scheme {best.scheme.value}",
    )


def optimize_scheme(coeffs: HeavyLoadCoefficients, scheme, deployment) -> SchemeResult:
    """Optimal (p, q) of one deployment scheme.

    Outside the scheme's operational region the result sits at the
    scheme's boundary point p = q = 1 and ``in_region`` is False.
    """
    scheme, deployment = Scheme(scheme), Deployment(deployment)
    if scheme is Scheme.S1:
        return _scheme1(coeffs, deployment)
    if scheme is Scheme.S2:
        return _scheme2(coeffs, deployment)
    if scheme is Scheme.S3P:
        return _scheme3p(coeffs, deployment)
    if scheme is Scheme.S3D:
        return _scheme3d(coeffs, deployment)
    if scheme is Scheme.S4P and deployment is Deployment.UNDERLAY:
        return _scheme4p_underlay(coeffs)
    return _dispatched(coeffs, scheme, deployment)


# ---------------------------------------------------------------------------
# closed-form operational regions
# ---------------------------------------------------------------------------

def _log(x: float) -> float:
    return math.log(x)


def _region1(c: HeavyLoadCoefficients, dep: Deployment) -> bool:
    if dep is Deployment.OVERLAY:
        return _log(c.c1) > c.c2
    return _log(c.c1_bar) > c.underlay_sum


def _region2_hat(c, dep) -> bool:
    if dep is Deployment.OVERLAY:
        return c.c1 > E * c.c2 and c.c2 > 1.0
    s = c.underlay_sum
    return c.c1_bar > E * s and s > 1.0


def _region3p_hat(c, dep) -> bool:
    if dep is Deployment.OVERLAY:
        c1, c2 = c.c1, c.c2
        if 1.0 < c2 < 2.0:
            return E * c2 < c1 and _log(c1) < c2 - _log(2.0 - c2)
        return c2 >= 2.0 and E * c2 < c1
    lc1 = _log(c.c1_bar)
    if c.c2_bar < 1.0:
        return c.c3_bar < lc1 < c.underlay_sum - _log(1.0 - c.c2_bar)
    return c.c3_bar < lc1


def _region3d_hat_overlay(c) -> bool:
    c1, c2 = c.c1, c.c2
    if 0.5 < c2 < 1.0:
        return math.sqrt(2.0 * c2 * E) < c1 and _log(c1) < c2 - _log(2.0 * (1.0 - c2))
    return c2 >= 1.0 and c1 > math.sqrt(2.0 * c2 * E)


def _region4p_hat(c) -> bool:
    s = c.underlay_sum
    lo = max(E / c.c3_bar, E * c.c3_bar)
    return s > 1.0 and lo < c.c1_bar < E * s * s / c.c3_bar


def region_membership(coeffs: HeavyLoadCoefficients, scheme, deployment) -> bool:
    """Closed-form test of whether the scheme can beat the no-D2D network."""
    scheme, dep = Scheme(scheme), Deployment(deployment)
    r1 = _region1(coeffs, dep)
    if scheme is Scheme.S1:
        return r1
    if scheme is Scheme.S2:
        return r1 or _region2_hat(coeffs, dep)
    if scheme is Scheme.S3P:
        return r1 or _region3p_hat(coeffs, dep)
    if scheme is Scheme.S3D:
        if dep is Deployment.UNDERLAY:
            return coeffs.c1_bar > 1.0
        return r1 or _region3d_hat_overlay(coeffs)
    r2 = region_membership(coeffs, Scheme.S2, dep)
    if scheme is Scheme.S4P:
        r3p = region_membership(coeffs, Scheme.S3P, dep)
        if dep is Deployment.UNDERLAY:
            return r2 or r3p or _region4p_hat(coeffs)
        return r2 or r3p
    return r2 or region_membership(coeffs, Scheme.S3D, dep)


def region_3d_underlay_bounds(coeffs: HeavyLoadCoefficients) -> tuple[bool, bool]:
    """(inner, outer) bounds on the underlay 3-d subregion where p* < 1."""

    def bound(beta: float) -> bool:
        s = coeffs.underlay_sum
        if coeffs.c1_bar <= 1.0:
            return False
        if s >= 1.0 / beta:
            return True
        return _log(coeffs.c1_bar) < s - _log(1.0 - beta * s)

    return bound(1.0), bound(2.0)


# ---------------------------------------------------------------------------
# scheme ordering
# ---------------------------------------------------------------------------

OVERLAY_CHAIN = (Scheme.S3D, Scheme.S2, Scheme.S3P, Scheme.S1)
UNDERLAY_CHAINS = (
    (Scheme.S3D, Scheme.S4P, Scheme.S2, Scheme.S1),
    (Scheme.S3D, Scheme.S4P, Scheme.S3P, Scheme.S1),
)


def achievable_f(result: SchemeResult) -> float:
    """Best f the operator can reach with the scheme or by leaving D2D off."""
    return max(result.f_star, 0.0)


def scheme_optima(coeffs: HeavyLoadCoefficients, deployment) -> dict[Scheme, SchemeResult]:
    dep = Deployment(deployment)
    schemes = OVERLAY_CHAIN if dep is Deployment.OVERLAY else (Scheme.S3D, Scheme.S4P, Scheme.S2, Scheme.S3P, Scheme.S1)
    return {s: optimize_scheme(coeffs, s, dep) for s in schemes}


def ordering_violations(coeffs: HeavyLoadCoefficients, deployment, slack: float = BOUNDARY_SLACK) -> list[str]:
    dep = Deployment(deployment)
    opt = scheme_optima(coeffs, dep)
    chains = (OVERLAY_CHAIN,) if dep is Deployment.OVERLAY else UNDERLAY_CHAINS
    bad = []
    for chain in chains:
        for hi, lo in zip(chain, chain[1:]):
            if achievable_f(opt[hi]) < achievable_f(opt[lo]) - slack:
                bad.append(f"{dep.value}: f*({hi.value})={opt[hi].f_star!r} < f*({lo.value})={opt[lo].f_star!r}")
    if dep is Deployment.UNDERLAY:
        over = optimize_scheme(coeffs, Scheme.S3D, Deployment.OVERLAY)
        if achievable_f(opt[Scheme.S3D]) < achievable_f(over) - slack:
            bad.append(f"underlay f*(3-d)={opt[Scheme.S3D].f_star!r} < overlay f*(3-d)={over.f_star!r}")
    return bad


def ordering_check(coeffs: HeavyLoadCoefficients, deployment) -> bool:
    return not ordering_violations(coeffs, deployment)


# ---------------------------------------------------------------------------
# region maps in (mean proximal sources, D-UEs per cell) coordinates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionAxes:
    """Figure axes: x = lambda_d E[pi r_d^2], y = lambda_d / lambda_a.

    ``alpha``, ``theta_0`` (linear) and ``cue_per_cell`` = lambda_c/lambda_a
    stay fixed over the window. Both axes are scanned on a log scale.
    """

    alpha: float
    theta_0: float
    cue_per_cell: float
    x_range: tuple[float, float] = (1e-2, 1e2)
    y_range: tuple[float, float] = (1e-1, 1e2)

    def __post_init__(self):
        for lo, hi in (self.x_range, self.y_range):
            if not 0 < lo < hi:
                raise ValueError(f"axis range must satisfy 0 < lo < hi, got ({lo}, {hi})")
        if not self.cue_per_cell > 0:
            raise ValueError("cue_per_cell must be > 0")

    def operational_point(self, x: float, y: float) -> OperationalPoint:
        # lambda_a = 1 without loss of generality: only density ratios matter
        r = math.sqrt(2.0 * x / (math.pi * y))
        return OperationalPoint(self.cue_per_cell, y, 1.0, r, self.theta_0, self.alpha)

    def coefficients(self, x: float, y: float) -> HeavyLoadCoefficients:
        return coefficients(self.operational_point(x, y))


@dataclass
class Curve:
    points: list[tuple[float, float]] = field(default_factory=list)
    inside_everywhere: bool = False
    outside_everywhere: bool = False

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float).reshape(-1, 2)


def _scan(
    predicate: Callable[[float, float], bool],
    axes: RegionAxes,
    resolution: int,
    along: str,
    rel_tol: float = 1e-10,
) -> Curve:
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if along not in ("x", "y"):
        raise ValueError("along must be 'x' or 'y'")
    scan_rng, row_rng = (axes.x_range, axes.y_range) if along == "x" else (axes.y_range, axes.x_range)
    rows = np.geomspace(*row_rng, resolution)
    ticks = np.geomspace(*scan_rng, resolution)

    def at(t, row):
        return predicate(t, row) if along == "x" else predicate(row, t)

    curve = Curve()
    seen = set()
    for row in rows:
        flags = [at(t, row) for t in ticks]
        seen.update(flags)
        for a, b, fa, fb in zip(ticks, ticks[1:], flags, flags[1:]):
            if fa == fb:
                continue
            lo, hi = math.log(a), math.log(b)
            while hi - lo > rel_tol:
                mid = 0.5 * (lo + hi)
                if at(math.exp(mid), row) == fa:
                    lo = mid
                else:
                    hi = mid
            t = math.exp(0.5 * (lo + hi))
            curve.points.append((t, float(row)) if along == "x" else (float(row), t))
    curve.inside_everywhere = seen == {True}
    curve.outside_everywhere = seen == {False}
    return curve


def _scheme_check(scheme, deployment):
    scheme, deployment = Scheme(scheme), Deployment(deployment)
    return scheme, deployment


def trace_boundary(scheme, deployment, axes: RegionAxes, resolution: int = 64, along: str = "x") -> Curve:
    """Sample the region boundary: for each row of the other axis, bisect every membership flip."""
    scheme, deployment = _scheme_check(scheme, deployment)
    return _scan(
        lambda x, y: region_membership(axes.coefficients(x, y), scheme, deployment),
        axes, resolution, along,
    )


def max_gain(coeffs: HeavyLoadCoefficients, scheme, deployment) -> float:
    """R*/R_noD2D, where the operator may leave D2D off."""
    return max(optimize_scheme(coeffs, scheme, deployment).gain, 1.0)


def gain_level_set(
    scheme, deployment, axes: RegionAxes, gain_target: float, resolution: int = 64, along: str = "x"
) -> Curve:
    """Isoline of the maximum gain; gain_target = 1 reproduces the region boundary."""
    if not gain_target >= 1.0:
        raise ValueError(f"gain target must be >= 1, got {gain_target!r}")
    scheme, deployment = _scheme_check(scheme, deployment)

    def above(x, y):
        res = optimize_scheme(axes.coefficients(x, y), scheme, deployment)
        return res.in_region and res.gain > gain_target

    return _scan(above, axes, resolution, along)


def sample_coefficient_tuples(n: int, seed: int = 0, lo: float = 1e-2, hi: float = 1e2) -> list[HeavyLoadCoefficients]:
    """Random coefficient tuples built from log-uniform (c1, c2, lambda_c/lambda_d).

    The underlay coefficients are tied to the overlay ones through a random
    (alpha, theta_0), so overlay and underlay schemes can be compared.
    """
    from .kernel import kappa, rho

    rng = np.random.default_rng(seed)
    out: list[HeavyLoadCoefficients] = []
    while len(out) < n:
        c1, c2, ratio = np.exp(rng.uniform(math.log(lo), math.log(hi), 3))
        alpha = rng.uniform(2.5, 6.0)
        theta = 10.0 ** (rng.uniform(-15.0, 15.0) / 10.0)
        k_theta = kappa(alpha) * theta ** (2.0 / alpha)
        shrink = rho_gap(theta, alpha) / (1.0 + rho(theta, alpha))
        out.append(
            HeavyLoadCoefficients(
                c1=float(c1),
                c2=float(c2),
                c1_bar=float(c1 * (1.0 + ratio)),
                c2_bar=float(c2 * shrink),
                c3_bar=float(c2 * k_theta * (1.0 + ratio) / (1.0 + rho(theta, alpha))),
            )
        )
    return out


def sample_independent_tuples(n: int, seed: int = 0, lo: float = 1e-2, hi: float = 1e2) -> list[HeavyLoadCoefficients]:
    """Tuples with every coordinate drawn independently log-uniform (no physical coupling)."""
    rng = np.random.default_rng(seed)
    vals = np.exp(rng.uniform(math.log(lo), math.log(hi), (n, 5)))
    return [HeavyLoadCoefficients(*map(float, row)) for row in vals]
