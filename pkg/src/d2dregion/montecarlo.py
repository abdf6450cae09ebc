"""Monte Carlo ground truth for the downlink D2D network model.

Each realization draws APs, C-UEs and D-UEs (with their D2D sources) as
Poisson processes on a disk, assigns every UE to its nearest AP and measures,
at the origin, the SIR of a typical cellular link and of a typical D2D link.
Expectations are taken over realizations exactly as written in the rate
definitions, so the correlation between the cell load K_0 and the cellular
SIR is kept rather than factored out.

Geometry
--------
The inner window has area ``mean_ap_count / lambda_a`` (radius R_w). Points
are generated in annuli of width R_w/2; interferers are those inside
``guard_factor * R_w``. UEs are generated one annulus further and APs two
annuli further, so the cells of every interfering AP are fully populated and
edge UEs find their true nearest AP. Every (realization, process, annulus)
triple owns its own random stream, so runs with guard factors that are
multiples of 1/2 share the points they have in common.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .model import Deployment, DesignParams, OperationalPoint, Scheme, Selection

_AP, _CUE, _DUE, _TYPICAL = range(4)


@dataclass(frozen=True)
class SimConfig:
    op: OperationalPoint
    dp: DesignParams
    realizations: int = 20_000
    mean_ap_count: float = 30.0
    guard_factor: float = 2.0
    seed: int = 0
    workers: int = 1
    scheme: Scheme | None = None  # provenance only

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if not self.mean_ap_count >= 1:
            raise ValueError("mean_ap_count must be >= 1")
        if not self.guard_factor >= 1:
            raise ValueError("guard_factor must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def inner_radius(self) -> float:
        return math.sqrt(self.mean_ap_count / (math.pi * self.op.lambda_a))

    @property
    def outer_radius(self) -> float:
        return self.guard_factor * self.inner_radius


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n: int

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError("std_error must be >= 0")

    def within(self, target: float, n_sigma: float = 3.0, abs_floor: float = 0.0) -> bool:
        return abs(self.value - target) <= max(n_sigma * self.std_error, abs_floor)


@dataclass
class NetworkRealization:
    """One draw of the network; positions are relative to the typical receiver at the origin."""

    inner_radius: float
    outer_radius: float
    ap_positions: np.ndarray
    ap_fading: np.ndarray  # AP -> origin
    cue_positions: np.ndarray
    due_positions: np.ndarray  # D-UE receivers
    due_offsets: np.ndarray  # source minus receiver, |offset| <= r_d,max
    due_offset_frac: np.ndarray  # (|offset| / r_d,max)^2, uniform on (0, 1)
    mode_marks: np.ndarray  # uniform; D2D mode iff mark < p under probabilistic selection
    activity_marks: np.ndarray  # uniform; Aloha transmits iff mark < q
    source_fading: np.ndarray  # D2D source -> origin
    cell_link_fading: float  # serving AP -> typical cellular UE
    d2d_link_fading: float  # typical D2D source -> typical D2D receiver
    cue_ap: np.ndarray = field(default=None)  # index of the serving AP
    due_ap: np.ndarray = field(default=None)
    typical_ap: int = -1

    @property
    def due_sources(self) -> np.ndarray:
        return self.due_positions + self.due_offsets


def _stream(seed: int, index: int, proc: int, annulus: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, proc, annulus)))


def _annulus_points(rng, density, r_lo, r_hi):
    area = math.pi * (r_hi**2 - r_lo**2)
    n = rng.poisson(density * area)
    r = np.sqrt(r_lo**2 + rng.random(n) * (r_hi**2 - r_lo**2))
    phi = rng.random(n) * 2.0 * math.pi
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def sample_realization(config: SimConfig, index: int) -> NetworkRealization:
    """Draw realization number ``index``; identical (config.seed, index) give identical draws."""
    op = config.op
    rw = config.inner_radius
    width = 0.5 * rw
    n_guard = math.ceil(2.0 * config.guard_factor)
    seed = config.seed

    aps, ap_h, cues, dues, offs, frac, mode, act, src_h = ([] for _ in range(9))
    for k in range(n_guard + 2):
        lo, hi = k * width, (k + 1) * width
        rng = _stream(seed, index, _AP, k)
        pts = _annulus_points(rng, op.lambda_a, lo, hi)
        aps.append(pts)
        ap_h.append(rng.exponential(size=len(pts)))
        if k > n_guard:
            continue

        rng = _stream(seed, index, _CUE, k)
        cues.append(_annulus_points(rng, op.lambda_c, lo, hi))

        rng = _stream(seed, index, _DUE, k)
        pts = _annulus_points(rng, op.lambda_d, lo, hi)
        n = len(pts)
        w = rng.random(n)
        phi = rng.random(n) * 2.0 * math.pi
        rad = op.r_d_max * np.sqrt(w)
        dues.append(pts)
        frac.append(w)
        offs.append(np.column_stack((rad * np.cos(phi), rad * np.sin(phi))))
        mode.append(rng.random(n))
        act.append(rng.random(n))
        src_h.append(rng.exponential(size=n))

    rng = _stream(seed, index, _TYPICAL, 0)
    cell_h, d2d_h = rng.exponential(size=2)

    real = NetworkRealization(
        inner_radius=rw,
        outer_radius=config.outer_radius,
        ap_positions=np.concatenate(aps),
        ap_fading=np.concatenate(ap_h),
        cue_positions=np.concatenate(cues),
        due_positions=np.concatenate(dues),
        due_offsets=np.concatenate(offs),
        due_offset_frac=np.concatenate(frac),
        mode_marks=np.concatenate(mode),
        activity_marks=np.concatenate(act),
        source_fading=np.concatenate(src_h),
        cell_link_fading=float(cell_h),
        d2d_link_fading=float(d2d_h),
    )
    if len(real.ap_positions):
        tree = cKDTree(real.ap_positions)
        real.cue_ap = tree.query(real.cue_positions)[1] if len(real.cue_positions) else np.zeros(0, int)
        real.due_ap = tree.query(real.due_positions)[1] if len(real.due_positions) else np.zeros(0, int)
        real.typical_ap = int(tree.query(np.zeros(2))[1])
    return real


# ---------------------------------------------------------------------------
# per-realization evaluation
# ---------------------------------------------------------------------------

@dataclass
class _Static:
    """Design-independent quantities derived from one realization."""

    ap_gain: np.ndarray  # h |y|^-alpha for APs inside the guard disk, else 0
    ap_inner: np.ndarray  # AP inside the inner window
    due_gain: np.ndarray  # r_d^alpha h |s|^-alpha for sources inside the guard disk, else 0
    cue_count: np.ndarray  # C-UEs per AP
    serving_gain: float  # h0 |y0|^-alpha, 0 when there is no AP


def _static(real: NetworkRealization, op: OperationalPoint) -> _Static:
    a = op.alpha
    n_ap = len(real.ap_positions)
    d_ap = np.hypot(real.ap_positions[:, 0], real.ap_positions[:, 1])
    ap_gain = np.where(d_ap <= real.outer_radius, real.ap_fading * d_ap ** (-a), 0.0)
    src = real.due_sources
    d_src = np.hypot(src[:, 0], src[:, 1])
    link_r = op.r_d_max * np.sqrt(real.due_offset_frac)
    due_gain = np.where(d_src <= real.outer_radius, real.source_fading * (link_r / d_src) ** a, 0.0)
    serving = 0.0
    if n_ap:
        serving = real.cell_link_fading * d_ap[real.typical_ap] ** (-a)
    return _Static(
        ap_gain=ap_gain,
        ap_inner=d_ap <= real.inner_radius,
        due_gain=due_gain,
        cue_count=np.bincount(real.cue_ap, minlength=n_ap) if n_ap else np.zeros(0, int),
        serving_gain=serving,
    )


def _sir(signal: float, interference: float) -> float:
    # no interferer at all counts as an unbounded SIR
    if interference <= 0.0:
        return math.inf if signal > 0 else 0.0
    return signal / interference


@dataclass
class _Draw:
    sir_c: float
    sir_d: float
    k0: int
    active_inner: int
    n_inner: int


def _draw(real: NetworkRealization, st: _Static, dp: DesignParams) -> _Draw:
    n_ap = len(real.ap_positions)
    if dp.selection is Selection.PROBABILISTIC:
        d2d = real.mode_marks < dp.p
    else:
        d2d = real.due_offset_frac <= dp.p
    counts = st.cue_count.copy()
    if n_ap:
        counts += np.bincount(real.due_ap[~d2d], minlength=n_ap)
    active = counts > 0
    transmitting = d2d & (real.activity_marks < dp.q)
    i_d2d = float(st.due_gain[transmitting].sum())
    i_ap = float(st.ap_gain[active].sum())

    if n_ap == 0:
        return _Draw(0.0, _sir(real.d2d_link_fading, i_d2d), 0, 0, 0)

    y0 = real.typical_ap
    # the serving AP always carries the typical cellular UE
    i_cell = i_ap - (st.ap_gain[y0] if active[y0] else 0.0)
    if dp.deployment is Deployment.UNDERLAY and dp.ap_power > 0:
        sir_c = _sir(dp.ap_power * st.serving_gain, dp.ap_power * i_cell + i_d2d)
        sir_d = _sir(real.d2d_link_fading, i_d2d + dp.ap_power * i_ap)
    else:
        # overlay, or underlay with zero power (allowed only without D2D traffic)
        sir_c = _sir(st.serving_gain, i_cell)
        sir_d = _sir(real.d2d_link_fading, i_d2d)
    return _Draw(
        sir_c=sir_c,
        sir_d=sir_d,
        k0=int(counts[y0]),
        active_inner=int(np.count_nonzero(active & st.ap_inner)),
        n_inner=int(np.count_nonzero(st.ap_inner)),
    )


def _no_d2d_design() -> DesignParams:
    return DesignParams(0.0, 0.0, Deployment.OVERLAY, eta_c=1.0)


@dataclass
class SampleSet:
    """Per-realization samples of one design, in realization order."""

    sir_c: np.ndarray
    sir_d: np.ndarray
    k0: np.ndarray
    active_inner: np.ndarray
    n_inner: np.ndarray
    rate: np.ndarray
    rate_no_d2d: np.ndarray

    @classmethod
    def concat(cls, parts: Sequence["SampleSet"]) -> "SampleSet":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in cls.__dataclass_fields__))


def _rate_sample(op: OperationalPoint, dp: DesignParams, d: _Draw) -> float:
    log = op.spectral_efficiency
    rc = dp.eta_c * (d.sir_c >= op.theta_0) / (d.k0 + 1) * log
    band = 1.0 - dp.eta_c if dp.deployment is Deployment.OVERLAY else 1.0
    rd = band * dp.q * (d.sir_d >= op.theta_0) * log
    lc, ld = op.lambda_c, op.lambda_d
    return (lc * rc + ld * (dp.p * rd + (1.0 - dp.p) * rc)) / (lc + ld)


def _run_chunk(args) -> list[SampleSet]:
    config, designs, start, stop = args
    op = config.op
    base = _no_d2d_design()
    n = stop - start
    cols = [{k: np.empty(n) for k in ("sir_c", "sir_d", "k0", "active_inner", "n_inner", "rate")} for _ in designs]
    no_d2d = np.empty(n)
    for j, index in enumerate(range(start, stop)):
        real = sample_realization(config, index)
        st = _static(real, op)
        d0 = _draw(real, st, base)
        no_d2d[j] = (d0.sir_c >= op.theta_0) / (d0.k0 + 1) * op.spectral_efficiency
        for dp, col in zip(designs, cols):
            d = _draw(real, st, dp)
            col["sir_c"][j] = d.sir_c
            col["sir_d"][j] = d.sir_d
            col["k0"][j] = d.k0
            col["active_inner"][j] = d.active_inner
            col["n_inner"][j] = d.n_inner
            col["rate"][j] = _rate_sample(op, dp, d)
    return [SampleSet(rate_no_d2d=no_d2d, **col) for col in cols]


def simulate(config: SimConfig, designs: Sequence[DesignParams] | None = None) -> list[SampleSet]:
    """Per-realization samples for each design, all evaluated on the same realizations.

    ``config.dp`` is used when ``designs`` is omitted. Chunks are reassembled
    in realization order, so the result does not depend on ``config.workers``.
    """
    designs = [config.dp] if designs is None else list(designs)
    n = config.realizations
    n_chunks = max(1, min(n, 8 * config.workers))
    edges = np.linspace(0, n, n_chunks + 1).astype(int)
    jobs = [(config, designs, int(a), int(b)) for a, b in zip(edges, edges[1:]) if b > a]
    if config.workers == 1:
        parts = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(config.workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    return [SampleSet.concat([p[i] for p in parts]) for i in range(len(designs))]


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _mean(x: np.ndarray) -> McEstimate:
    n = len(x)
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(float(np.mean(x)), se, n)


def ratio_estimate(num: np.ndarray, den: np.ndarray) -> McEstimate:
    """mean(num) / mean(den) with a delta-method standard error."""
    n = len(num)
    mn, md = float(np.mean(num)), float(np.mean(den))
    if md == 0.0:
        raise FloatingPointError("ratio estimate with a zero denominator")
    g = mn / md
    if n < 2:
        return McEstimate(g, 0.0, n)
    cov = np.cov(num, den, ddof=1)
    var = (cov[0, 0] - 2.0 * g * cov[0, 1] + g * g * cov[1, 1]) / (n * md * md)
    return McEstimate(g, math.sqrt(max(var, 0.0)), n)


def ccdf_from_samples(sir: np.ndarray, theta_grid: Sequence[float]) -> list[McEstimate]:
    return [_mean((sir >= t).astype(float)) for t in theta_grid]


def estimate_sir_ccdf(config: SimConfig, theta_grid: Sequence[float], link_kind: str) -> list[McEstimate]:
    if link_kind not in ("cellular", "d2d"):
        raise ValueError("link_kind must be 'cellular' or 'd2d'")
    s = simulate(config)[0]
    return ccdf_from_samples(s.sir_c if link_kind == "cellular" else s.sir_d, theta_grid)


def estimate_tdma_factor(config: SimConfig) -> McEstimate:
    s = simulate(config)[0]
    return _mean(1.0 / (s.k0 + 1.0))


def prob_nonempty_from_samples(s: SampleSet) -> McEstimate:
    """Pooled fraction of inner-window APs serving at least one cellular receiver."""
    return ratio_estimate(s.active_inner, s.n_inner)


def estimate_prob_cell_nonempty(config: SimConfig) -> McEstimate:
    return prob_nonempty_from_samples(simulate(config)[0])


def estimate_rate(config: SimConfig) -> McEstimate:
    return _mean(simulate(config)[0].rate)


def estimate_rate_no_d2d(config: SimConfig) -> McEstimate:
    return _mean(simulate(config)[0].rate_no_d2d)


def gain_from_samples(s: SampleSet) -> McEstimate:
    return ratio_estimate(s.rate, s.rate_no_d2d)


def estimate_gain(config: SimConfig) -> McEstimate:
    """R / R_noD2D, both measured on the same realizations."""
    return gain_from_samples(simulate(config)[0])


def estimate_gains(config: SimConfig, designs: Sequence[DesignParams]) -> list[McEstimate]:
    return [gain_from_samples(s) for s in simulate(config, designs)]
