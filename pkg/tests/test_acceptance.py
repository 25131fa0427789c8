"""End-to-end acceptance checks, one test per numbered criterion.

Run with ``pytest -v tests/test_acceptance.py`` to get one PASS/FAIL line
per criterion; each test also prints the measured quantities it judged.
"""

import time

import numpy as np
import pytest
from numpy.testing import assert_allclose

import hmbandit as hb
from hmbandit import ArmParams

from conftest import random_case1_arm, random_case2_arm

FLIP = ArmParams(lambda0=0.9, lambda1=0.1, mu0=0.1, mu1=0.9,
                 rho0=0.1, rho1=0.9, eta0=0.1, eta1=0.9)
STICKY = ArmParams(lambda0=0.9, lambda1=0.1, mu0=0.9, mu1=0.1,
                   rho0=0.1, rho1=0.95, eta0=0.1, eta1=0.95)


def test_criterion_01_threshold_reproduction():
    """Published threshold beliefs, +-0.01, grid 2001, tol 1e-9."""
    targets = {
        (0.99, 0.50): 0.673,
        (0.99, 0.70): 0.248,
        (0.99, 0.85): 0.060,
        (0.60, 0.50): 0.604,
        (0.60, 0.70): 0.248,
        (0.60, 0.85): 0.060,
    }
    measured, misses = {}, []
    for (beta, eta2), want in targets.items():
        r = hb.threshold(FLIP, eta2, beta, grid=2001, tol=1e-9)
        measured[(beta, eta2)] = r.pi_t
        ok = abs(r.pi_t - want) <= 0.01
        print(f"[criterion 1] beta={beta} eta2={eta2}: pi_T={r.pi_t:.6f} "
              f"(target {want} +-0.01) {'ok' if ok else 'MISS'}")
        if not ok:
            misses.append((beta, eta2, want, r.pi_t))
    assert not misses, f"threshold targets missed: {misses}"


def test_criterion_02_naive_threshold_analytic():
    """pi_circ = (rho1 - eta2)/(rho1 - rho0), exact to floating point."""
    for eta2, want in ((0.5, 0.5), (0.7, 0.25), (0.85, 0.0625)):
        r = hb.threshold(FLIP, eta2, 0.6, grid=201)
        print(f"[criterion 2] eta2={eta2}: pi_circ={r.pi_circ!r} target={want}")
        assert abs(r.pi_circ - want) <= 8 * np.finfo(float).eps


def test_criterion_03_indexability_sweeps():
    """Set inclusion of no-sample sets over a dense subsidy sweep."""
    sets = {"flip": FLIP, "sticky": STICKY}
    for name, params in sets.items():
        etas = np.round(np.arange(params.rho0 - 0.1, params.rho1 + 0.1 + 1e-12,
                                  0.01), 10)
        for beta in (0.6, 0.99):
            rep = hb.indexability_check(params, etas, beta, grid=501)
            outside = sum(len(v[2]) for v in rep.violations) \
                if not rep.epsilon_indexable else 0
            print(f"[criterion 3] {name} beta={beta}: {etas.size} subsidies, "
                  f"indexable={rep.indexable} "
                  f"eps_indexable={rep.epsilon_indexable} "
                  f"violations={len(rep.violations)}")
            assert rep.epsilon_indexable, (
                f"{name} beta={beta}: {outside} nodes escape the no-sample "
                f"set outside any reported hole")


def test_criterion_04_oracle_equivalence():
    """Grid solver vs the exact finite tree, below the a-priori bound."""
    t0 = time.time()
    rng = np.random.default_rng(20260814)
    horizon, beta = 12, 0.5
    worst = 0.0
    for k in range(20):
        # rewards tiedarms inside the Lipschitz lemma's conditions
        if rng.integers(2):
            mu1 = rng.uniform(0.05, 0.45)
            mu0 = mu1 + rng.uniform(0.05, 0.5)
        else:
            mu0 = rng.uniform(0.05, 0.5)
            mu1 = mu0 + rng.uniform(0.05, 0.45)
        r0 = rng.uniform(0.05, 0.5)
        r1 = r0 + rng.uniform(0.1, 1.0 - r0 - 0.1)
        p = ArmParams(lambda0=rng.uniform(0.05, 0.95),
                      lambda1=rng.uniform(0.05, 0.95),
                      mu0=min(mu0, 0.95), mu1=min(mu1, 0.95),
                      rho0=r0, rho1=r1, eta0=r0, eta1=r1)
        eta2 = rng.uniform(0.0, 1.0)
        table = hb.solve(p, eta2, beta, grid=1001, tol=1e-9)
        bound = hb.oracle_error_bound(p, eta2, beta, horizon,
                                      table.grid.spacing)
        pis = rng.uniform(0.0, 1.0, size=50)
        tree = hb.finite_horizon_oracle(p, eta2, beta, pis, horizon)
        err = float(np.max(np.abs(table.eval(pis) - tree)))
        worst = max(worst, err)
        assert err <= bound, f"draw {k}: error {err:.3e} > bound {bound:.3e}"
    elapsed = time.time() - t0
    print(f"[criterion 4] 20 draws x 50 beliefs, horizon {horizon}: "
          f"worst error {worst:.3e}, {elapsed:.1f} s")
    assert elapsed < 60.0


def _region_nodes(params, beta, grid, label, count=20):
    """Pick `count` solver-grid nodes classified into the given region.

    Sampling at nodes keeps the numeric route free of interpolation bias:
    at the critical subsidy the sampling advantage has a kink exactly at
    the probed belief, so off-node evaluation converges only first-order
    in the spacing.
    """
    nodes = np.linspace(0.0, 1.0, grid)
    keep = np.array([x for x in nodes
                     if hb.classify_region(params, beta, float(x)).label == label])
    assert keep.size >= count, (label, keep.size)
    return keep[np.linspace(0, keep.size - 1, count).astype(int)]


def test_criterion_05_closed_form_vs_numeric():
    """Regional closed forms against the bisection solver on the sticky set."""
    beta = 0.6
    b = hb.region_boundaries(STICKY)
    for region, grid in (("A1", 501), ("A2a", 2001), ("A5", 501)):
        worst = 0.0
        for pi in _region_nodes(STICKY, beta, grid, region):
            got = hb.whittle_closed_form(STICKY, float(pi), beta)
            assert got is not None and got[1] == region, (pi, got)
            wn = hb.whittle_numeric(STICKY, float(pi), beta, grid=grid)
            worst = max(worst, abs(got[0] - wn))
        print(f"[criterion 5] {region}: max |closed - numeric| = {worst:.2e} "
              f"over 20 points (grid {grid})")
        assert worst <= 1e-5

    # A2b calls for the same agreement check, but no belief of this
    # parameter set classifies as A2b: the signal-1 orbit keeps drifting
    # down, so its re-crossing time never materializes.
    labels = []
    for pi in np.linspace(b[0], b[2] - 1e-9, 2001):
        labels.append(hb.classify_region(STICKY, beta, float(pi)).label)
    n_a2b = labels.count("A2b")
    print(f"[criterion 5] A2b: {n_a2b} of 2001 beliefs in the A2 band "
          f"classify as A2b (region empty; agreement holds vacuously)")
    assert n_a2b == 0

    # The formula itself is still exercised: the implemented two-step branch
    # must coincide with the re-crossing series specialized to tau1 = 2,
    # whose sums collapse to C1 = r + b*r*r1, C2 = b^2*r*r1,
    # C3 = b^2*r*(1 - r1), C4 = b*(1 - r).
    from hmbandit.index import _a2b_value

    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        pi = float(rng.uniform(0.05, 0.95))
        bb = float(rng.uniform(0.1, 0.95))
        r = hb.rho(STICKY, pi)
        r1 = hb.rho(STICKY, hb.gamma1(STICKY, pi))
        series = ((1.0 - bb) * (r + bb * r * r1)
                  / (1.0 - (bb * bb * r * r1 + bb * bb * r * (1.0 - r1)
                            + bb * (1.0 - r))))
        worst = max(worst, abs(_a2b_value(STICKY, pi, bb) - series))
    print(f"[criterion 5] A2b formula vs tau1=2 series sums: "
          f"max diff {worst:.2e} over 20 (pi, beta) draws")
    assert worst <= 1e-12

    # The top-band formula printed by the case analysis disagrees with the
    # fixed point it claims to witness; the table builder must log the
    # discrepancy and fall back to bisection there.
    tab = hb.whittle_table(STICKY, beta, grid=101)
    assert len(tab.discrepancies) >= 1
    for pi, region, value, gap in tab.discrepancies:
        print(f"[criterion 5] logged discrepancy: pi={pi:.4f} region={region} "
              f"verbatim={value:.4f} verification gap={gap:.3e}")
        i = int(np.argmin(np.abs(tab.pis - pi)))
        assert tab.methods[i] == "Bisection"
        assert gap > tab.index_tol


def test_criterion_06_inversion_identity():
    """W(pi_T(eta2)) = eta2 where the threshold is interior.

    Below W(1) ~ 0.359 sampling is strictly optimal at every belief, the
    threshold saturates at 1, and no indifference point exists; the ten
    subsidies are drawn from the interior-threshold window inside
    (rho0, rho1).
    """
    beta = 0.6
    worst = 0.0
    for eta2 in np.linspace(0.37, 0.88, 10):
        r = hb.threshold(FLIP, float(eta2), beta, grid=1001)
        assert r.regime == "Threshold" and 0.0 < r.pi_t < 1.0
        w = hb.whittle_numeric(FLIP, r.pi_t, beta, grid=1001)
        worst = max(worst, abs(w - eta2))
    print(f"[criterion 6] 10 subsidies in [0.37, 0.88]: "
          f"max |W(pi_T) - eta2| = {worst:.2e}")
    assert worst <= 1e-4


def test_criterion_07_property_suites():
    """Structural invariants over random parameter sets, 100 draws each."""
    from conftest import random_arm

    rng = np.random.default_rng(1234)

    # convexity of all three value columns in the belief
    violations = 0
    for _ in range(100):
        p = random_arm(rng, tied=bool(rng.integers(2)))
        t = hb.solve(p, rng.uniform(0.0, 1.0), 0.7, grid=201, tol=1e-9)
        violations += len(hb.convexity_report(t, tol_convex=1e-8))
    print(f"[criterion 7] convexity in belief: {violations} violations / "
          f"100 draws")
    assert violations == 0

    # monotone and convex in the subsidy at fixed beliefs
    bad_mono = bad_convex = 0
    probe = np.linspace(0.0, 1.0, 9)
    for _ in range(100):
        p = random_arm(rng, tied=bool(rng.integers(2)))
        etas = np.linspace(0.0, 1.0, 5)
        vals = np.stack([hb.solve(p, float(e), 0.7, grid=101, tol=1e-9).eval(probe)
                         for e in etas])
        if not np.all(np.diff(vals, axis=0) >= -1e-8):
            bad_mono += 1
        if not np.all(np.diff(vals, 2, axis=0) >= -1e-8):
            bad_convex += 1
    print(f"[criterion 7] subsidy monotone/convex: {bad_mono}/{bad_convex} "
          f"failures / 100 draws")
    assert bad_mono == 0 and bad_convex == 0

    # value grows with the discount factor
    bad = 0
    for _ in range(100):
        p = random_arm(rng, tied=bool(rng.integers(2)))
        eta2 = rng.uniform(0.0, 1.0)
        v = [hb.solve(p, eta2, b, grid=101, tol=1e-9).v for b in (0.3, 0.5, 0.7)]
        if not (np.all(v[1] >= v[0] - 1e-8) and np.all(v[2] >= v[1] - 1e-8)):
            bad += 1
    print(f"[criterion 7] monotone in discount: {bad} failures / 100 draws")
    assert bad == 0

    # Lipschitz bound on the value slope under the stated conditions
    bad = 0
    for _ in range(100):
        p = random_arm(rng)
        while not (0.0 < p.mu0 - p.mu1 <= 0.5 or 0.0 < p.mu1 - p.mu0):
            p = random_arm(rng)
        t = hb.solve(p, rng.uniform(0.0, 1.0), 0.7, grid=201, tol=1e-9)
        slope = np.abs(np.diff(t.v)) / t.grid.spacing
        cap = hb.kappa1(p, 0.7) * (p.rho1 - p.rho0)
        if not np.all(slope <= cap + 1e-6):
            bad += 1
    print(f"[criterion 7] Lipschitz slope cap: {bad} failures / 100 draws")
    assert bad == 0

    # sampling advantage decreasing in the belief on both parameter bands
    bad = 0
    for k in range(100):
        p = random_case1_arm(rng) if k % 2 == 0 else random_case2_arm(rng)
        t = hb.solve(p, rng.uniform(p.rho0, p.rho1), 0.7, grid=201, tol=1e-9)
        adv = hb.sampling_advantage(t)
        if not np.all(np.diff(adv) <= 1e-7):
            bad += 1
    print(f"[criterion 7] advantage monotone (both bands): {bad} failures / "
          f"100 draws")
    assert bad == 0

    # shape facts for the three belief maps
    pis = np.linspace(0.0, 1.0, 201)
    bad = 0
    for _ in range(100):
        p = random_arm(rng, tied=bool(rng.integers(2)))
        g2 = hb.gamma2(p, pis)
        ok = np.allclose(np.diff(g2, 2), 0.0, atol=1e-12)  # affine
        if p.lambda0 > p.lambda1:
            ok &= np.all(np.diff(g2) >= 0)
            ok &= g2.min() >= p.lambda1 - 1e-12 and g2.max() <= p.lambda0 + 1e-12
        elif p.lambda0 < p.lambda1:
            ok &= np.all(np.diff(g2) <= 0)
            ok &= g2.min() >= p.lambda0 - 1e-12 and g2.max() <= p.lambda1 + 1e-12
        if p.mu0 > p.mu1:
            g1, g0 = hb.gamma1(p, pis), hb.gamma0(p, pis)
            ok &= np.all(np.diff(g1) >= -1e-12) and np.all(np.diff(g0) >= -1e-12)
            ok &= np.all(np.diff(g1, 2) >= -1e-9)   # convex
            ok &= np.all(np.diff(g0, 2) <= 1e-9)    # concave
            ok &= np.all((g1 >= p.mu1 - 1e-12) & (g1 <= p.mu0 + 1e-12))
            ok &= np.all((g0 >= p.mu1 - 1e-12) & (g0 <= p.mu0 + 1e-12))
            interior = pis[1:-1]
            ok &= np.all(hb.gamma1(p, interior) < hb.gamma0(p, interior) + 1e-12)
            ok &= abs(hb.gamma1(p, 0.0) - p.mu1) < 1e-12
            ok &= abs(hb.gamma0(p, 0.0) - p.mu1) < 1e-12
            ok &= abs(hb.gamma1(p, 1.0) - p.mu0) < 1e-12
            ok &= abs(hb.gamma0(p, 1.0) - p.mu0) < 1e-12
        if not ok:
            bad += 1
    print(f"[criterion 7] belief-map shapes: {bad} failures / 100 draws")
    assert bad == 0


def test_criterion_08_policy_comparison():
    """Whittle beats myopic on the published 10-arm set; gap shrinks with beta."""
    t0 = time.time()
    from hmbandit.cli import parse_config
    import pathlib

    cfg_path = pathlib.Path(__file__).resolve().parents[1] / "configs" / "ten_arms.yaml"
    arms = parse_config(str(cfg_path)).sim.arms
    assert len(arms) == 10
    gaps = {}
    for beta in (0.99, 0.3):
        tables = [
            hb.whittle_table(a, beta, grid=401, method="scan", tol=1e-6,
                             bracket=(min(a.eta0, a.rho0) - 0.05,
                                      max(a.eta1, a.rho1) + 0.05))
            for a in arms
        ]
        cfg = hb.BanditConfig(arms=arms, beta=beta, horizon=2000,
                              iterations=100, seed=20260814)
        stats = hb.monte_carlo(cfg, [hb.WhittlePolicy(tables),
                                     hb.MyopicPolicy(), hb.RandomPolicy()])
        w = stats.time_average("Whittle", 99)
        m = stats.time_average("Myopic", 99)
        gaps[beta] = w - m
        print(f"[criterion 8] beta={beta}: whittle={w:.5f} myopic={m:.5f} "
              f"random={stats.time_average('Random', 99):.5f} gap={w - m:+.5f}")
        assert w > m, f"beta={beta}: whittle {w:.5f} <= myopic {m:.5f}"
    elapsed = time.time() - t0
    print(f"[criterion 8] gap(0.3)={gaps[0.3]:.5f} < gap(0.99)={gaps[0.99]:.5f}; "
          f"{elapsed:.1f} s")
    assert gaps[0.3] < gaps[0.99]
    assert elapsed < 60.0
