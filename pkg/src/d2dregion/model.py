"""Operational point / design parameter types and the general-load rate formulas.

P(K>0) is always an explicit argument (``pk0``): pass
:func:`cell_nonempty_prob` for the general-load model or 1.0 for the
heavy-load regime. Powers are relative to the mean useful D2D received
power, which is 1 by construction; rates are in bits/s/Hz of total bandwidth.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .kernel import DomainError, db_to_linear, kappa, prob_cell_nonempty, rho


class Deployment(str, enum.Enum):
    OVERLAY = "overlay"
    UNDERLAY = "underlay"


class Selection(str, enum.Enum):
    PROBABILISTIC = "probabilistic"
    DISTANCE = "distance"

    @property
    def gamma(self) -> int:
        return 1 if self is Selection.PROBABILISTIC else 2


class Scheme(str, enum.Enum):
    S1 = "1"
    S2 = "2"
    S3P = "3-p"
    S3D = "3-d"
    S4P = "4-p"
    S4D = "4-d"

    @property
    def selection(self) -> Selection:
        # p is pinned to 1 for schemes 1 and 2, so the selection rule is moot there
        if self in (Scheme.S3D, Scheme.S4D):
            return Selection.DISTANCE
        return Selection.PROBABILISTIC

    @property
    def free_p(self) -> bool:
        return self in (Scheme.S3P, Scheme.S3D, Scheme.S4P, Scheme.S4D)

    @property
    def free_q(self) -> bool:
        return self in (Scheme.S2, Scheme.S4P, Scheme.S4D)


@dataclass(frozen=True)
class OperationalPoint:
    """Quantities the operator cannot tune at run time."""

    lambda_c: float
    lambda_d: float
    lambda_a: float
    r_d_max: float
    theta_0: float
    alpha: float

    def __post_init__(self):
        for name in ("lambda_c", "lambda_d", "lambda_a", "r_d_max", "theta_0"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be finite and > 0, got {v!r}")
        kappa(self.alpha)  # validates alpha

    @classmethod
    def from_ratios(
        cls,
        cue_per_cell: float,
        due_per_cell: float,
        rmax_normalized: float,
        theta_db: float,
        alpha: float,
        lambda_a: float = 1.0,
    ) -> "OperationalPoint":
        """Build from lambda_c/lambda_a, lambda_d/lambda_a and r_d,max * 2 sqrt(lambda_a)."""
        return cls(
            lambda_c=cue_per_cell * lambda_a,
            lambda_d=due_per_cell * lambda_a,
            lambda_a=lambda_a,
            r_d_max=rmax_normalized / (2.0 * math.sqrt(lambda_a)),
            theta_0=db_to_linear(theta_db),
            alpha=alpha,
        )

    @property
    def kappa(self) -> float:
        return kappa(self.alpha)

    @property
    def rho0(self) -> float:
        return rho(self.theta_0, self.alpha)

    @property
    def spectral_efficiency(self) -> float:
        return math.log2(1.0 + self.theta_0)

    @property
    def rmax_normalized(self) -> float:
        return self.r_d_max * 2.0 * math.sqrt(self.lambda_a)

    def cellular_load(self, p: float) -> float:
        """Mean number of cellular receivers per cell when a fraction p of D-UEs goes D2D."""
        return (self.lambda_c + (1.0 - p) * self.lambda_d) / self.lambda_a

    def with_(self, **changes) -> "OperationalPoint":
        return replace(self, **changes)


@dataclass(frozen=True)
class DesignParams:
    """Operator-tunable parameters.

    ``p`` is the effective D2D retention probability for either selection
    rule; for distance-based selection the threshold is sqrt(p) * r_d,max.
    Overlay carries ``eta_c``; underlay carries ``ap_power``.
    """

    p: float
    q: float
    deployment: Deployment
    selection: Selection = Selection.PROBABILISTIC
    eta_c: float | None = None
    ap_power: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "deployment", Deployment(self.deployment))
        object.__setattr__(self, "selection", Selection(self.selection))
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p!r}")
        if not 0.0 <= self.q <= 1.0:
            raise DomainError(f"q must lie in [0, 1], got {self.q!r}")
        if self.deployment is Deployment.OVERLAY:
            if self.eta_c is None or not 0.0 < self.eta_c <= 1.0:
                raise DomainError(f"overlay needs eta_c in (0, 1], got {self.eta_c!r}")
            if self.ap_power is not None:
                raise DomainError("overlay design does not take an AP power")
        else:
            if self.eta_c not in (None, 1.0):
                raise DomainError("underlay fixes eta_c = 1")
            object.__setattr__(self, "eta_c", 1.0)
            if self.ap_power is None:
                raise DomainError("underlay design needs an AP power P_a")
            if self.ap_power < 0 or (self.ap_power == 0 and self.d2d_activity > 0):
                raise DomainError(f"AP power must be > 0, got {self.ap_power!r}")

    @property
    def gamma(self) -> int:
        return self.selection.gamma

    @property
    def d2d_activity(self) -> float:
        """q * p^gamma: the factor scaling active D2D interferer 'mass'."""
        return self.q * self.p**self.gamma

    def threshold_distance(self, r_d_max: float) -> float:
        return math.sqrt(self.p) * r_d_max


def retention_from_threshold(r_th: float, r_d_max: float) -> float:
    """Effective p of distance-based selection: P(r_d <= r_th) = (r_th / r_d,max)^2."""
    if not 0.0 < r_th <= r_d_max:
        raise DomainError(f"threshold must lie in (0, r_d_max], got {r_th!r}")
    return (r_th / r_d_max) ** 2


def cell_nonempty_prob(op: OperationalPoint, p: float) -> float:
    return prob_cell_nonempty(op.cellular_load(p))


def _check_pk0(pk0: float) -> None:
    if not 0.0 <= pk0 <= 1.0:
        raise DomainError(f"P(K>0) must lie in [0, 1], got {pk0!r}")


def sir_ccdf_cellular(op: OperationalPoint, dp: DesignParams, theta: float, pk0: float) -> float:
    """P(SIR >= theta) on the typical cellular link."""
    _check_pk0(pk0)
    denom = 1.0 + pk0 * rho(theta, op.alpha)
    if dp.deployment is Deployment.UNDERLAY and dp.d2d_activity > 0:
        denom += (
            dp.d2d_activity * op.kappa * op.lambda_d * op.r_d_max**2
            * (theta / dp.ap_power) ** (2.0 / op.alpha)
            / (2.0 * op.lambda_a)
        )
    return 1.0 / denom


def sir_ccdf_d2d(op: OperationalPoint, dp: DesignParams, theta: float, pk0: float) -> float:
    """P(SIR >= theta) on the typical D2D link."""
    _check_pk0(pk0)
    if not theta > 0:
        raise DomainError(f"theta must be > 0, got {theta!r}")
    mass = 0.5 * dp.d2d_activity * op.lambda_d * op.r_d_max**2
    if dp.deployment is Deployment.UNDERLAY:
        mass += op.lambda_a * pk0 * dp.ap_power ** (2.0 / op.alpha)
    return math.exp(-op.kappa * math.pi * theta ** (2.0 / op.alpha) * mass)


def tdma_factor(op: OperationalPoint, p: float, pk0: float) -> float:
    """E[1/(K_0+1)], the mean slot share of the typical cellular receiver."""
    _check_pk0(pk0)
    load = op.cellular_load(p)
    if not load > 0:
        raise DomainError("cellular load must be positive")
    return pk0 / load


def rate_cellular(op: OperationalPoint, dp: DesignParams, pk0: float) -> float:
    """Average cellular-link rate, with K_0 and SIR treated as uncorrelated."""
    return (
        dp.eta_c
        * tdma_factor(op, dp.p, pk0)
        * sir_ccdf_cellular(op, dp, op.theta_0, pk0)
        * op.spectral_efficiency
    )


def rate_d2d(op: OperationalPoint, dp: DesignParams, pk0: float) -> float:
    band = 1.0 - dp.eta_c if dp.deployment is Deployment.OVERLAY else 1.0
    if band == 0.0 or dp.q == 0.0:
        return 0.0
    return band * dp.q * sir_ccdf_d2d(op, dp, op.theta_0, pk0) * op.spectral_efficiency


def rate_average(op: OperationalPoint, dp: DesignParams, pk0: float) -> float:
    """Rate of a typical UE whose type (C-UE or D-UE) is not known in advance."""
    rc = rate_cellular(op, dp, pk0)
    rd = rate_d2d(op, dp, pk0) if dp.p > 0 else 0.0
    lc, ld = op.lambda_c, op.lambda_d
    return (lc * rc + ld * (dp.p * rd + (1.0 - dp.p) * rc)) / (lc + ld)


def rate_no_d2d(op: OperationalPoint, pk0: float) -> float:
    _check_pk0(pk0)
    return (
        op.lambda_a * pk0 * op.spectral_efficiency
        / ((op.lambda_c + op.lambda_d) * (1.0 + pk0 * op.rho0))
    )


def constraint1_power(op: OperationalPoint, p: float, q: float, gamma: int, pk0: float) -> float:
    """AP power that keeps the underlay cellular rate equal to the no-D2D rate."""
    _check_pk0(pk0)
    if gamma not in (1, 2):
        raise DomainError(f"gamma must be 1 or 2, got {gamma!r}")
    base = (
        (op.lambda_c + (1.0 - p) * op.lambda_d) * op.kappa * op.r_d_max**2 * q * p ** (gamma - 1)
        / (2.0 * op.lambda_a * (1.0 + pk0 * op.rho0))
    )
    return op.theta_0 * base ** (op.alpha / 2.0)


def constraint1_bandwidth(op: OperationalPoint, p: float) -> float:
    """Cellular bandwidth share that keeps the overlay cellular rate equal to the no-D2D rate."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    return 1.0 - p * op.lambda_d / (op.lambda_c + op.lambda_d)


def constrained_design(
    op: OperationalPoint,
    p: float,
    q: float,
    deployment: Deployment | str,
    selection: Selection | str = Selection.PROBABILISTIC,
    pk0: float = 1.0,
) -> DesignParams:
    """DesignParams with the resource-sharing parameter fixed by R_c = R_noD2D."""
    deployment = Deployment(deployment)
    selection = Selection(selection)
    if deployment is Deployment.OVERLAY:
        return DesignParams(p, q, deployment, selection, eta_c=constraint1_bandwidth(op, p))
    power = constraint1_power(op, p, q, selection.gamma, pk0)
    return DesignParams(p, q, deployment, selection, ap_power=power)
