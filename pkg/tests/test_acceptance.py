"""Acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line. The Monte Carlo criteria take a few
minutes on one CPU; run ``pytest tests/test_acceptance.py -v`` to see them.
"""

import math
import random

import numpy as np
import pytest

from d2dregion.heavy_load import (
    BOUNDARY_SLACK,
    RegionAxes,
    achievable_f,
    coefficients,
    optimize_scheme,
    ordering_violations,
    region_3d_underlay_bounds,
    region_membership,
    sample_coefficient_tuples,
    sample_independent_tuples,
    trace_boundary,
)
from d2dregion.kernel import rho
from d2dregion.model import (
    Deployment,
    DesignParams,
    OperationalPoint,
    Scheme,
    Selection,
    cell_nonempty_prob,
    constrained_design,
    rate_cellular,
    rate_no_d2d,
    sir_ccdf_cellular,
    sir_ccdf_d2d,
    tdma_factor,
)
from d2dregion.montecarlo import (
    SimConfig,
    ccdf_from_samples,
    gain_from_samples,
    prob_nonempty_from_samples,
    simulate,
)
from oracles import central_diff, f_ref, grid_max

OVER, UNDER = Deployment.OVERLAY, Deployment.UNDERLAY
N_TUPLES = 500
TUPLE_SEED = 2024
MC_REALIZATIONS = 20_000


def check(capsys, number, title, ok, detail=""):
    detail = detail.rstrip("; ")
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else ""))
    assert ok, detail


def base_point(rmax):
    return OperationalPoint.from_ratios(10, 10, rmax, -6.0, 4.0)


def gamma_of(scheme):
    return scheme.selection.gamma


@pytest.fixture(scope="module")
def tuples():
    return sample_independent_tuples(N_TUPLES, seed=TUPLE_SEED)


@pytest.fixture(scope="module")
def coupled_tuples():
    return sample_coefficient_tuples(N_TUPLES, seed=TUPLE_SEED)


def test_criterion_01_zero_distance_gain_anchors(capsys):
    c = coefficients(base_point(1e-3))
    under = optimize_scheme(c, Scheme.S1, UNDER).gain
    over = optimize_scheme(c, Scheme.S1, OVER).gain
    ok = abs(under / 12.82 - 1) <= 5e-3 and abs(over / 6.67 - 1) <= 5e-3
    check(capsys, 1, "zero-distance gain anchors", ok, f"underlay {under:.4f}, overlay {over:.4f}")


def test_criterion_02_mc_matches_optimal_gains(capsys):
    lines, ok, worst = [], True, 0.0
    for rmax in (0.4, 0.8, 1.2):
        op = base_point(rmax)
        c = coefficients(op)
        cases = [(s, OVER) for s in (Scheme.S1, Scheme.S2, Scheme.S3P, Scheme.S3D)]
        cases += [(s, UNDER) for s in (Scheme.S1, Scheme.S2, Scheme.S3P, Scheme.S3D, Scheme.S4P)]
        results = [optimize_scheme(c, s, d) for s, d in cases]
        designs = [constrained_design(op, r.p_star, r.q_star, d, s.selection, pk0=1.0)
                   for (s, d), r in zip(cases, results)]
        cfg = SimConfig(op, designs[0], MC_REALIZATIONS, 30, 2.0, seed=100 + int(rmax * 10))
        for (s, d), r, samples in zip(cases, results, simulate(cfg, designs)):
            est = gain_from_samples(samples)
            if d is OVER:
                worst = max(worst, abs(est.value / r.gain - 1))
                good = abs(est.value - r.gain) <= max(3 * est.std_error, 0.03 * abs(r.gain))
            else:
                good = r.gain <= est.value + 3 * est.std_error
            ok &= good
            if not good:
                lines.append(f"rmax {rmax} {d.value} {s.value}: analytic {r.gain:.4f} mc {est.value:.4f}+-{est.std_error:.4f}")
    check(capsys, 2, "Monte Carlo agrees with optimal analytic gains", ok,
          f"max overlay relative gap {worst:.4f}; " + "; ".join(lines))


def test_criterion_03_tdma_factor(capsys):
    lines, ok = [], True
    no_d2d = DesignParams(0.0, 0.0, OVER, eta_c=1.0)
    for load in (1, 5, 10):
        op = OperationalPoint.from_ratios(load / 2, load / 2, 0.4, -6.0, 4.0)
        s = simulate(SimConfig(op, no_d2d, MC_REALIZATIONS, 30, 2.0, seed=300 + load))[0]
        inv = 1.0 / (s.k0 + 1.0)
        mean, se = inv.mean(), inv.std(ddof=1) / math.sqrt(len(inv))
        pk0_hat = prob_nonempty_from_samples(s).value
        target = tdma_factor(op, 0.0, pk0_hat)
        good = abs(mean - target) <= 3 * se
        ok &= good
        lines.append(f"load {load}: mc {mean:.5f}+-{se:.5f} vs {target:.5f}")
    check(capsys, 3, "TDMA factor with measured P(K>0)", ok, "; ".join(lines))


def test_criterion_04_sir_ccdfs_under_full_load(capsys):
    op = base_point(0.8)
    thetas = 10 ** (np.linspace(-15, 15, 20) / 10)
    bad, worst = [], 0.0
    designs = [constrained_design(op, 0.5, 0.5, OVER), constrained_design(op, 0.5, 0.5, UNDER)]
    cfg = SimConfig(op, designs[0], MC_REALIZATIONS, 30, 2.0, seed=400)
    for dp, s in zip(designs, simulate(cfg, designs)):
        pk0 = cell_nonempty_prob(op, dp.p)
        for kind, sir, fn in (("cellular", s.sir_c, sir_ccdf_cellular), ("d2d", s.sir_d, sir_ccdf_d2d)):
            for t, est in zip(thetas, ccdf_from_samples(sir, thetas)):
                ref = fn(op, dp, float(t), pk0)
                worst = max(worst, abs(est.value - ref))
                if not est.within(ref, 3, 0.01):
                    bad.append(f"{dp.deployment.value} {kind} at {10 * math.log10(t):.1f} dB: {est.value:.4f} vs {ref:.4f}")
    check(capsys, 4, "SIR CCDFs under full load", not bad, f"max abs error {worst:.4f}; " + "; ".join(bad[:5]))


def test_criterion_05_region_matches_grid_sign(capsys, tuples):
    bad, excluded = [], 0
    for i, c in enumerate(tuples):
        for d in Deployment:
            for s in Scheme:
                f_star = optimize_scheme(c, s, d).f_star
                if abs(f_star) <= 1e-6:
                    excluded += 1
                    continue
                best = grid_max(c, d.value, gamma_of(s), s.free_p, s.free_q)[0]
                if region_membership(c, s, d) != (best > 0):
                    bad.append(f"tuple {i} {d.value} {s.value}")
    check(capsys, 5, "closed-form regions match grid-search sign", not bad,
          f"{len(bad)} disagreements, {excluded} in the boundary band; " + "; ".join(bad[:5]))


def test_criterion_06_interior_optima_are_stationary(capsys, tuples):
    bad, n_interior = [], 0
    for i, c in enumerate(tuples):
        for d in Deployment:
            for s in Scheme:
                r = optimize_scheme(c, s, d)
                if not (r.interior_p or r.interior_q):
                    continue
                n_interior += 1
                g = gamma_of(s)
                if r.interior_p:
                    dp_ = central_diff(lambda x: float(f_ref(c, d.value, g, x, r.q_star)), r.p_star)
                    if abs(dp_) >= 1e-6:
                        bad.append(f"tuple {i} {d.value} {s.value}: df/dp {dp_:.2e}")
                if r.interior_q:
                    dq_ = central_diff(lambda x: float(f_ref(c, d.value, g, r.p_star, x)), r.q_star)
                    if abs(dq_) >= 1e-6:
                        bad.append(f"tuple {i} {d.value} {s.value}: df/dq {dq_:.2e}")
                best = grid_max(c, d.value, g, s.free_p, s.free_q)[0]
                if best > r.f_star + 1e-9:
                    bad.append(f"tuple {i} {d.value} {s.value}: grid {best!r} > f* {r.f_star!r}")
    check(capsys, 6, "interior optima are stationary and global", not bad,
          f"{n_interior} interior optima; " + "; ".join(bad[:5]))


def test_criterion_07_scheme_ordering(capsys, tuples, coupled_tuples):
    bad = []
    for i, c in enumerate(coupled_tuples):
        for d in Deployment:
            bad += [f"coupled tuple {i}: {v}" for v in ordering_violations(c, d, BOUNDARY_SLACK)]
    # chains inside one deployment do not need the physical coupling
    for i, c in enumerate(tuples):
        bad += [f"tuple {i}: {v}" for v in ordering_violations(c, OVER, BOUNDARY_SLACK)]
        bad += [f"tuple {i}: {v}" for v in ordering_violations(c, UNDER, BOUNDARY_SLACK) if "overlay" not in v]
    check(capsys, 7, "scheme ordering", not bad, f"{len(bad)} violations; " + "; ".join(bad[:5]))


def test_criterion_08_no_interior_joint_optimum(capsys, tuples):
    bad = []
    for i, c in enumerate(tuples):
        for d, s in ((OVER, Scheme.S4P), (OVER, Scheme.S4D), (UNDER, Scheme.S4D)):
            g = gamma_of(s)
            edge = max(grid_max(c, d.value, g, True, False)[0], grid_max(c, d.value, g, False, True)[0])
            # f -> 0 as p -> 0, which is also on the boundary
            boundary = max(edge, 0.0, achievable_f(optimize_scheme(c, s, d)))
            best = grid_max(c, d.value, g, True, True)[0]
            if best > boundary + 1e-9:
                bad.append(f"tuple {i} {d.value} {s.value}: {best!r} > {boundary!r}")
    check(capsys, 8, "joint 2-D search never beats the boundary", not bad, "; ".join(bad[:5]))


def test_criterion_09_underlay_3d_sandwich(capsys, tuples):
    bad = []
    for i, c in enumerate(tuples):
        inner, outer = region_3d_underlay_bounds(c)
        p_lt_1 = optimize_scheme(c, Scheme.S3D, UNDER).p_star < 1.0
        if (inner and not p_lt_1) or (p_lt_1 and not outer):
            bad.append(f"tuple {i}: inner {inner}, p*<1 {p_lt_1}, outer {outer}")
    check(capsys, 9, "underlay 3-d sandwich bounds", not bad, "; ".join(bad[:5]))


def test_criterion_10_rate_preserving_closure(capsys):
    rng = random.Random(10)
    worst = 0.0
    for _ in range(100):
        op = OperationalPoint.from_ratios(
            10 ** rng.uniform(-1, 2), 10 ** rng.uniform(-1, 2), 10 ** rng.uniform(-3, 0.3),
            rng.uniform(-15, 15), rng.uniform(2.2, 6.0), lambda_a=10 ** rng.uniform(-2, 2),
        )
        p, q = rng.uniform(0, 1), rng.uniform(1e-3, 1)
        dep, sel = rng.choice(list(Deployment)), rng.choice(list(Selection))
        pk0 = cell_nonempty_prob(op, p) if rng.random() < 0.5 else 1.0
        dp = constrained_design(op, p, q, dep, sel, pk0=pk0)
        ref = rate_no_d2d(op, pk0)
        worst = max(worst, abs(rate_cellular(op, dp, pk0) / ref - 1))
    check(capsys, 10, "rate-preserving design closure", worst <= 1e-10, f"max relative error {worst:.2e}")


def test_criterion_11_overlay_s1_intercept(capsys):
    theta = 10**-0.6
    target = 1 / (1 + rho(theta, 4.0))
    axes = RegionAxes(4.0, theta, 10.0, x_range=(1e-8, 1e-6), y_range=(0.5, 1.5))
    curve = trace_boundary(Scheme.S1, OVER, axes, resolution=16, along="y")
    ys = [y for _, y in curve.points]
    err = max((abs(y - target) for y in ys), default=math.inf)
    check(capsys, 11, "overlay scheme-1 boundary intercept", err <= 1e-3,
          f"target {target:.6f}, max deviation {err:.2e} over {len(ys)} points")
