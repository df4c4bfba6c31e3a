"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Supplementary checks are labelled as such and never replace the literal
criterion they accompany.
"""

import json
import time

import numpy as np
import pytest
from scipy.special import ndtr

from empnull.benefit import benefit_curve, normal, renyi_half
from empnull.cli import main
from empnull.levels import ConfidenceVector
from empnull.nullmodel import NullModel, adjust_levels, fit_null
from empnull.screening import LossParams, brute_force_decisions, optimize_decisions, threshold_rule
from empnull.simstudy import ASSUMED, ESTIMATED, MARGINAL, StudyConfig, generate_trial, run_study

import oracles

D1_GRID = list(range(0, 2001, 100))


@pytest.fixture
def report(capsys):
    def _report(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        return ok

    return _report


def _cells(config):
    t0 = time.perf_counter()
    _, cells = run_study(config)
    return {(c.null_mode, c.subset): c for c in cells}, time.perf_counter() - t0


def test_criterion_01_null_recovery(report):
    cfg = StudyConfig(precision_support=(1.0,), precision_probs=(1.0,))
    z, _ = generate_trial(cfg, 0)
    t0 = time.perf_counter()
    fit = fit_null(z)
    elapsed = time.perf_counter() - t0
    oracle = oracles.grid_search_mle(z, cfg.center_fraction)
    gap = oracle["loglik"] - fit.loglik
    ok = (
        -0.05 <= fit.mu0 <= 0.05
        and 0.95 <= fit.sigma0 <= 1.10
        and abs(gap) <= 1e-8
        and elapsed < 5
    )
    assert report(
        "criterion 1 null recovery",
        ok,
        f"mu0={fit.mu0:.5f} sigma0={fit.sigma0:.5f} loglik-oracle={-gap:.2e} time={elapsed:.3f}s",
    )


def test_criterion_01_supplementary_recovery_rate(report):
    # Supplementary: tolerance hit rate over 100 seeded trials and the oracle gap on each.
    cfg = StudyConfig(precision_support=(1.0,), precision_probs=(1.0,))
    hits, worst_gap = 0, 0.0
    for k in range(100):
        z, _ = generate_trial(cfg, k)
        fit = fit_null(z)
        hits += -0.05 <= fit.mu0 <= 0.05 and 0.95 <= fit.sigma0 <= 1.10
        if k < 10:
            worst_gap = max(worst_gap, oracles.grid_search_mle(z, cfg.center_fraction)["loglik"] - fit.loglik)
    ok = hits >= 90 and worst_gap <= 1e-8
    assert report("criterion 1 supplementary (100 trials)", ok, f"within tolerance {hits}/100, worst oracle gap {worst_gap:.2e}")


def test_criterion_02_conditional_ordering(report):
    cells, elapsed = _cells(StudyConfig(K=50))
    a, e = cells[ASSUMED, "unaffected"], cells[ESTIMATED, "unaffected"]
    ok = a.mean > 0 and a.mean - abs(e.mean) >= 3 * a.se and elapsed < 120
    assert report(
        "criterion 2 conditional ordering (signed mean)",
        ok,
        f"assumed mean={a.mean:+.5f} se={a.se:.5f}, estimated mean={e.mean:+.5f}, time={elapsed:.1f}s",
    )


def test_criterion_02_supplementary_magnitude(report):
    # Supplementary: the same ordering stated on mean absolute conservatism.
    cells, _ = _cells(StudyConfig(K=50))
    a, e = cells[ASSUMED, "unaffected"], cells[ESTIMATED, "unaffected"]
    ok = a.mean_abs - e.mean_abs >= 3 * a.se_abs
    assert report(
        "criterion 2 supplementary (mean |conservatism|)",
        ok,
        f"assumed={a.mean_abs:.5f} se={a.se_abs:.5f}, estimated={e.mean_abs:.5f}",
    )


def test_criterion_03_marginal_ordering(report):
    cells, _ = _cells(StudyConfig(K=50, truth_mode=MARGINAL))
    a, e = cells[ASSUMED, "unaffected"], cells[ESTIMATED, "unaffected"]
    ratio = a.mean / e.mean if e.mean > 0 else float("nan")
    ok = a.mean > e.mean and ratio > 1.1
    assert report(
        "criterion 3 marginal ordering (signed mean)",
        ok,
        f"assumed mean={a.mean:+.5f}, estimated mean={e.mean:+.5f}, ratio={ratio:.3f}",
    )


def test_criterion_03_supplementary_magnitude(report):
    # Supplementary: the same ordering stated on mean absolute conservatism.
    cells, _ = _cells(StudyConfig(K=50, truth_mode=MARGINAL))
    a, e = cells[ASSUMED, "unaffected"], cells[ESTIMATED, "unaffected"]
    ratio = a.mean_abs / e.mean_abs
    assert report(
        "criterion 3 supplementary (mean |conservatism|)",
        ratio > 1.1,
        f"assumed={a.mean_abs:.5f}, estimated={e.mean_abs:.5f}, ratio={ratio:.3f}",
    )


def test_criterion_04_additive_equivalence(report):
    rng = np.random.default_rng(4)
    v = ConfidenceVector.from_levels(rng.uniform(size=1000))
    got = optimize_decisions(v, LossParams(a=0, c=9)).action
    mismatches = sum(g != t for g, t in zip(got, threshold_rule(v, 9)))
    assert report("criterion 4 additive equivalence", mismatches == 0, f"{mismatches} mismatches of 1000")


def test_criterion_05_brute_force_oracle(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(200):
        d = int(rng.integers(1, 9))
        a = (0.0, 0.5, 1.0, 2.0)[i % 4]
        c = float(rng.uniform(1, 20))
        v = ConfidenceVector.from_levels(rng.uniform(size=d))
        params = LossParams(a=a, c=c)
        diff = abs(optimize_decisions(v, params).expected_loss - brute_force_decisions(v, params).expected_loss)
        worst = max(worst, diff)
    assert report("criterion 5 brute-force oracle", worst <= 1e-12, f"max |loss gap| = {worst:.2e} over 200 instances")


def test_criterion_06_screening_curve(report, screening_fixture):
    sizes = [optimize_decisions(screening_fixture, LossParams(a=a, c=9)).n_decisions for a in (0, 0.25, 0.5, 1, 2)]
    rises = [(x, y) for x, y in zip(sizes, sizes[1:]) if y > x]
    ok = len(rises) <= 1 and all(y - x <= 1 for x, y in rises)
    assert report("criterion 6 screening curve shape", ok, f"n_decisions={sizes}")


def test_criterion_07_divergence(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        m1, m2 = rng.uniform(-3, 3, 2)
        s1, s2 = rng.uniform(0.3, 3, 2)
        got = renyi_half(normal(m1, s1), normal(m2, s2))
        worst = max(worst, abs(got - oracles.renyi_half_numeric(m1, s1, m2, s2)))
    f, g = normal(0.3, 1.7), normal(-1.1, 0.6)
    ident = abs(renyi_half(f, f))
    sym = abs(renyi_half(f, g) - renyi_half(g, f))
    ok = worst <= 1e-6 and ident <= 1e-12 and sym <= 1e-12
    assert report("criterion 7 divergence", ok, f"max quadrature gap {worst:.2e}, D(F,F)={ident:.1e}, asym={sym:.1e}")


def test_criterion_08_benefit_structure(report):
    details, ok = [], True
    for s in (2 / 3, 1.0, 1.5):
        z, _ = generate_trial(StudyConfig(precision_support=(s,), precision_probs=(1.0,)), 0)
        v = ConfidenceVector.from_levels(ndtr(z))
        curve = benefit_curve(v, fit_null(v.included_z()), D1_GRID)
        drop = float(np.min(np.diff(curve.nonancillarity)))
        good = curve.nonancillarity[0] == 0.0 and drop >= -1e-3 and curve.sign_changes() <= 1
        ok &= good
        details.append(f"sigma={s:.3g}: min step {drop:+.1e}, sign changes {curve.sign_changes()}")
    assert report("criterion 8 benefit-curve structure", ok, "; ".join(details))


def test_criterion_09_adjustment_invariants(report):
    grid = np.arange(1, 1000) / 1000
    identity = np.array_equal(adjust_levels(grid, NullModel.assumed()), grid)
    pulled = all(
        np.all(np.abs(adjust_levels(grid, NullModel(0.0, s, 1.0, "estimated")) - 0.5) <= np.abs(grid - 0.5))
        for s in (1.0, 1.1, 1.5, 2.0, 5.0)
    )
    worst = 0.0
    for mu, s in ((0.3, 1.4), (-0.7, 0.8), (1.2, 2.5)):
        fwd = adjust_levels(grid, NullModel(mu, s, 1.0, "estimated"))
        back = adjust_levels(fwd, NullModel(-mu / s, 1 / s, 1.0, "estimated"))
        worst = max(worst, float(np.max(np.abs(back - grid))))
    ok = identity and pulled and worst <= 1e-9
    assert report("criterion 9 adjustment invariants", ok, f"identity={identity} pull-to-center={pulled} round-trip err={worst:.1e}")


def test_criterion_10_determinism(report, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"K": 12, "truth_mode": "marginal"}))
    outs = []
    for threads in (1, 3):
        t, s = tmp_path / f"t{threads}.csv", tmp_path / f"s{threads}.csv"
        code = main(["simulate", str(cfg), "--trials-out", str(t), "--summary-out", str(s),
                     "--threads", str(threads), "--quiet"])
        assert code == 0
        outs.append((t.read_bytes(), s.read_bytes()))
    assert report("criterion 10 determinism", outs[0] == outs[1], "threads 1 vs 3 byte-identical" if outs[0] == outs[1] else "outputs differ")
