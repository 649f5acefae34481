"""End-to-end acceptance gate.

Each test prints one machine-greppable pass/fail line.  The random suite
(50 seeded instances, n up to 40 points in one or two dimensions) is solved
once per session and shared by the duality, slackness, and support checks.
"""

import time

import numpy as np
import pytest

from advdual.certify import certify, slackness, universality_check
from advdual.cli import _pipeline
from advdual.dualsolve import brute_dual, solve_dual
from advdual.ground import build_ground, dilate, sliding_max_1d, sup_ball
from advdual.losses import (
    alpha_opt_numeric,
    cstar_numeric,
    conditional_risk,
    get_loss,
    transform_h,
)
from advdual.measures import TwoClassMeasure, greedy_attack, transported_integral, winf_distance
from advdual.primalsolve import brute_primal, eta_hat, solve_exp_primal

from conftest import hall_winf


EXP = get_loss("exp")
NORMS = ("l1", "l2", "linf")


def _report(idx: int, desc: str, ok: bool) -> None:
    print(f"[criterion {idx:02d}] {desc}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {idx} failed: {desc}"


def _random_instance(rng):
    n = int(rng.integers(5, 41))
    d = int(rng.integers(1, 3))
    pts = rng.uniform(0.0, 2.0, (n, d))
    norm = NORMS[int(rng.integers(3))]
    eps = float(rng.uniform(0.05, 1.0))
    m0 = rng.uniform(0.0, 1.0, n) * (rng.uniform(size=n) < 0.7)
    m1 = rng.uniform(0.0, 1.0, n) * (rng.uniform(size=n) < 0.7)
    if m0.sum() == 0.0:
        m0[0] = 0.5
    if m1.sum() == 0.0:
        m1[-1] = 0.5
    tot = m0.sum() + m1.sum()
    g = build_ground(pts, norm, eps)
    return g, TwoClassMeasure.build(m0 / tot, m1 / tot)


@pytest.fixture(scope="module")
def random_suite():
    rng = np.random.default_rng(12345)
    out = []
    t0 = time.perf_counter()
    for _ in range(50):
        g, measure = _random_instance(rng)
        ps, ds, _ = _pipeline(g, measure, 0, 1e-4)
        out.append((g, measure, ps, ds))
    elapsed = time.perf_counter() - t0
    return out, elapsed


def test_criterion_01_strong_duality(random_suite, oracle_instances):
    suite, elapsed = random_suite
    worst = max((ps.risk - ds.objective) / max(ps.risk, 1e-30)
                for _, _, ps, ds in suite)
    ok = worst <= 1e-3

    t0 = time.perf_counter()
    for name, g, measure in oracle_instances:
        ps, ds, _ = _pipeline(g, measure, 0, 1e-4)
        ok = ok and abs(ps.risk - brute_primal(EXP, g, measure)) <= 2e-3
        ok = ok and abs(ds.objective - brute_dual(EXP, g, measure, 60)) <= 2e-3
    runtime = elapsed + (time.perf_counter() - t0)
    ok = ok and runtime <= 60.0
    _report(1, f"strong duality gap <= 1e-3 on 50 instances, brute "
               f"agreement 2e-3, runtime {runtime:.1f}s <= 60s", ok)


def test_criterion_02_weak_duality(random_suite, oracle_instances):
    ok = True
    suite, _ = random_suite
    for g, measure, ps, ds in suite:
        ok = ok and ps.risk >= ds.objective - 1e-9
        ok = ok and min(ps.history) >= max(ds.history) - 1e-9
    rng = np.random.default_rng(77)
    for name, g, measure in oracle_instances:
        ds = solve_dual(EXP, g, measure)
        from advdual.primalsolve import risk_adv
        for _ in range(40):
            f = rng.normal(scale=3.0, size=g.n)
            ok = ok and risk_adv(EXP, f, g, measure) >= ds.objective - 1e-9
    _report(2, "weak duality holds across all iterates and random fields", ok)


def test_criterion_03_complementary_slackness(random_suite, oracle_instances):
    ok = True
    suite, _ = random_suite
    for g, measure, ps, ds in suite:
        r1, r0, rpt = slackness(EXP, ps.f, ds, g, measure)
        ok = ok and max(r1, r0, rpt) <= 1e-3 * measure.total
    # a 0.1 score shift at a kink support point must blow up a residual;
    # this is a first-order effect only when transport is active (eps > 0)
    for name, g, measure in oracle_instances:
        if g.epsilon == 0.0:
            continue
        ps = solve_exp_primal(g, measure)
        ds = solve_dual(EXP, g, measure, f_hint=ps.f)
        s = ds.m0 + ds.m1
        best = 0.0
        for j in np.flatnonzero((s > 1e-12) & np.isfinite(ps.f)):
            f = ps.f.copy()
            f[j] += 0.1
            best = max(best, max(slackness(EXP, f, ds, g, measure)))
        ok = ok and best > 1e-2 * measure.total
    _report(3, "slackness residuals <= 1e-3 at optima; 0.1 perturbation "
               "raises a residual above 1e-2", ok)


def test_criterion_04_loss_universality(oracle_instances):
    ok = True
    for name, g, measure in oracle_instances:
        ps = solve_exp_primal(g, measure)
        ds = solve_dual(EXP, g, measure, f_hint=ps.f)
        certs = universality_check(eta_hat(ps.f), ds,
                                   ("logistic", "hinge"), g, measure)
        for cert in certs.values():
            ok = ok and cert.gap <= 1e-3
    _report(4, "one exponential dual pair certifies logistic and hinge "
               "within 1e-3", ok)


def test_criterion_05_support_conditions(random_suite, oracle_instances):
    ok = True
    suite, _ = random_suite
    for g, measure, ps, ds in suite:
        cert = certify(EXP, ps.f, ds, g, measure)
        ok = ok and cert.support_violation <= 1e-3 * measure.total
    for name, g, measure in oracle_instances:
        ps = solve_exp_primal(g, measure)
        ds = solve_dual(EXP, g, measure, f_hint=ps.f)
        cert = certify(EXP, ps.f, ds, g, measure)
        ok = ok and cert.support_violation <= 1e-3 * measure.total
    _report(5, "coupling support violation <= 1e-3 of total mass", ok)


def test_criterion_06_winf_exact():
    rng = np.random.default_rng(6)
    ok = True
    for _ in range(200):
        n = int(rng.integers(2, 7))
        g = build_ground(rng.uniform(0, 2, (n, int(rng.integers(1, 3)))),
                         NORMS[int(rng.integers(3))], 0.0)
        p = rng.uniform(0, 1, n)
        q = np.zeros(n)
        q[rng.permutation(n)] = p
        ok = ok and winf_distance(g, p, q) == hall_winf(g, p, q)
    _report(6, "flow W-infinity equals exhaustive matching search exactly "
               "on 200 pairs", ok)


def test_criterion_07_exchange_identity():
    rng = np.random.default_rng(7)
    ok = True
    for _ in range(200):
        n = int(rng.integers(3, 40))
        g = build_ground(rng.uniform(0, 2, (n, int(rng.integers(1, 3)))),
                         NORMS[int(rng.integers(3))], float(rng.uniform(0, 1)))
        field = rng.normal(size=n)
        p = rng.uniform(0, 1, n)
        c = greedy_attack(g, field, p)
        lhs = transported_integral(g, field, c)
        rhs = float(np.dot(p, sup_ball(g, field)))
        ok = ok and lhs == rhs
    _report(7, "ball supremum integral equals greedy transported integral "
               "exactly on 200 fields", ok)


def test_criterion_08_level_set_dilation():
    rng = np.random.default_rng(8)
    ok = True
    for _ in range(200):
        n = int(rng.integers(3, 40))
        g = build_ground(rng.uniform(0, 2, (n, int(rng.integers(1, 3)))),
                         NORMS[int(rng.integers(3))], float(rng.uniform(0, 1)))
        f = rng.normal(size=n)
        t = float(rng.normal())
        lhs = dilate(g, np.flatnonzero(f > t))
        rhs = np.flatnonzero(sup_ball(g, f) > t)
        ok = ok and np.array_equal(lhs, rhs)
    _report(8, "epsilon-dilation of upper level sets matches level sets of "
               "the ball supremum on 200 pairs", ok)


def test_criterion_09_alpha_monotone_consistent():
    etas = np.linspace(0.0, 1.0, 1001)
    ok = True
    for name in ("exp", "logistic", "hinge"):
        loss = get_loss(name)
        alpha = loss.alpha_opt(etas)
        ok = ok and bool(np.all(np.diff(alpha) >= -1e-6))
        cond = conditional_risk(loss, etas, alpha)
        ok = ok and float(np.nanmax(np.abs(cond - loss.cstar(etas)))) <= 1e-6
        inner = etas[(etas > 1e-3) & (etas < 1 - 1e-3)]
        ok = ok and float(np.max(np.abs(
            loss.alpha_opt(inner) - alpha_opt_numeric(loss, inner)))) <= 1e-4
    _report(9, "pointwise minimizers monotone and conditional-risk "
               "consistent on a 1001 grid", ok)


def test_criterion_10_exponential_closed_forms():
    etas = np.linspace(0.0, 1.0, 1001)
    closed = 2.0 * np.sqrt(etas * (1.0 - etas))
    ok = bool(np.max(np.abs(EXP.cstar(etas) - closed)) <= 1e-12)
    ok = ok and bool(np.max(np.abs(cstar_numeric(EXP, etas) - closed)) <= 1e-8)
    h1 = np.linspace(1e-3, 20.0, 1001)
    h0 = transform_h(EXP, h1)
    ok = ok and bool(np.max(np.abs(h0 * h1 - 1.0)) <= 1e-8)
    _report(10, "exponential conditional minimum and transform identity "
                "match numeric optimization within 1e-8", ok)


def test_criterion_11_sliding_max_performance():
    rng = np.random.default_rng(11)
    n, k = 1_000_000, 32
    x = rng.normal(size=n)
    out, ops = sliding_max_1d(x, k, count_ops=True)
    pad = np.concatenate([np.full(k, -np.inf), x, np.full(k, -np.inf)])
    naive = np.lib.stride_tricks.sliding_window_view(pad, 2 * k + 1).max(axis=1)
    ok = bool(np.array_equal(out, naive)) and ops <= 3 * n
    _report(11, f"sliding window maximum exact on n=1e6 with {ops} <= 3n "
                "max operations", ok)


def test_criterion_12_epsilon_monotonicity(oracle_instances):
    ok = True
    losses = ("exp", "logistic", "hinge", "zero-one")
    for name, g, measure in oracle_instances:
        cols = {get_loss(x).kind: [] for x in losses}
        for eps in (0.0, 0.15, 0.3, 0.45, 0.6):
            ge = build_ground(g.points, g.norm, eps)
            ps, ds, _ = _pipeline(ge, measure, 0, 1e-4)
            certs = universality_check(eta_hat(ps.f), ds, losses, ge, measure)
            for kind, cert in certs.items():
                cols[kind].append((cert.primal_value, cert.dual_value))
        for kind, vals in cols.items():
            for col in (0, 1):
                seq = [v[col] for v in vals]
                ok = ok and all(b >= a - 1e-6 for a, b in zip(seq, seq[1:]))
    _report(12, "sweep primal and dual values non-decreasing in epsilon "
                "within 1e-6", ok)
