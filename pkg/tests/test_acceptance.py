"""Acceptance suite. Each test prints one PASS/FAIL line with the measured value."""

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from oracles import counting_law, stdf_by_loop, tail_copula_by_loop
from taildep import (BrownResnickField, Criterion, EvaluationRequest, FieldGrid, Logistic,
                     analytic_bivariate_variance, bootstrap_replicates, compute_ranks, empirical_stdf,
                     empirical_tail_copula, fit, influence_table, isotropy_test, linearization_residual,
                     sample_brown_resnick, sample_logistic, tail_correlation)
from taildep.cli import main
from taildep.mestimation import grid_measure

SIGMA1 = ((1.0, 0.0), (0.0, 1.0))
SIGMA2 = ((0.5, 0.25), (0.25, 1.0))


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return _report


def test_1_chi_table(report):
    # printed values; the printed dia1 column matches lag (1,1) and dia2 matches (1,-1)
    table = {
        (SIGMA1, 0.9): (0.72, 0.72, 0.68, 0.68),
        (SIGMA1, 1.8): (0.72, 0.72, 0.63, 0.63),
        (SIGMA2, 0.9): (0.67, 0.72, 0.67, 0.62),
        (SIGMA2, 1.8): (0.61, 0.71, 0.61, 0.48),
    }
    lags = ((1, 0), (0, 1), (1, 1), (1, -1))
    start = time.perf_counter()
    worst = 0.0
    for (sigma, xi), printed in table.items():
        m = BrownResnickField(0.5, xi, sigma)
        for lag, value in zip(lags, printed):
            worst = max(worst, abs(m.chi((0, 0), lag) - value))
    elapsed = time.perf_counter() - start
    report(1, worst <= 0.005 and elapsed < 1, f"max |chi - table| = {worst:.4f}, {elapsed:.3f}s")


def test_2_exact_identities(report):
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    failures = []
    for case in range(200):
        n = int(rng.integers(2, 51))
        d = int(rng.integers(2, 5))
        k = int(rng.integers(1, n + 1))
        data = rng.integers(-6, 7, size=(n, d)).astype(float)
        s = compute_ranks(data)
        ranks = s.ranks.tolist()
        pair = sorted(rng.choice(d, 2, replace=False).tolist())
        x = [Fraction(int(rng.integers(1, 4 * k + 1)), k) for _ in pair]
        x = [min(v, Fraction(n, k)) for v in x]
        xf = [float(v) for v in x]
        L = empirical_stdf(s, pair, xf, k)
        R = empirical_tail_copula(s, pair, xf, k)
        laws = [counting_law(v, k) for v in x]
        if Fraction(L).limit_denominator(k) + Fraction(R).limit_denominator(k) != sum(laws):
            failures.append((case, "inclusion-exclusion"))
        for j, v in zip(pair, x):
            if empirical_stdf(s, [j], [float(v)], k) != float(laws[pair.index(j)]):
                failures.append((case, "counting law"))
        bumped = [xf[0] + 0.5, xf[1]]
        if empirical_stdf(s, pair, bumped, k) < L or empirical_tail_copula(s, pair, bumped, k) < R:
            failures.append((case, "monotonicity"))
        t = compute_ranks(np.exp(data / 3.0) * 5 + 2)
        if empirical_stdf(t, pair, xf, k) != L or empirical_tail_copula(t, pair, xf, k) != R:
            failures.append((case, "rank invariance"))
        if L != float(stdf_by_loop(ranks, pair, x, k)) or R != float(tail_copula_by_loop(ranks, pair, x, k)):
            failures.append((case, "brute force"))
        m = sorted(rng.choice(d, int(rng.integers(1, d + 1)), replace=False).tolist())
        xm = [Fraction(int(rng.integers(0, 3 * k + 1)), k) for _ in m]
        if empirical_stdf(s, m, [float(v) for v in xm], k) != float(stdf_by_loop(ranks, m, xm, k)):
            failures.append((case, "brute force, general margins"))
    elapsed = time.perf_counter() - start
    report(2, not failures and elapsed < 30, f"{len(failures)} failures in 200 samples, {elapsed:.1f}s")


def test_3_simulator_chi(report):
    start = time.perf_counter()
    g = FieldGrid(3, 3)
    chis = [tail_correlation(sample_brown_resnick(5000, g, 0.5, 0.9, SIGMA1, seed=seed), [0, 1], 500)
            for seed in range(10)]
    med = float(np.median(chis))
    elapsed = time.perf_counter() - start
    report(3, abs(med - 0.7236) <= 0.05 and elapsed < 600, f"median chi_hat = {med:.4f}, {elapsed:.1f}s")


def test_4_bootstrap_variance(report):
    alpha = math.log2(1.5)
    assert Logistic(alpha).chi() == pytest.approx(0.5)
    target = analytic_bivariate_variance((1, 1), 0.5)
    start = time.perf_counter()
    req = EvaluationRequest((((0, 1), [(1.0, 1.0)]),), 250)
    variances = []
    for seed in range(10):
        s = sample_logistic(5000, 2, alpha, seed=seed)
        ens = bootstrap_replicates(influence_table(s, req), 2000, base_seed=1000 + seed)
        variances.append(float(np.var(ens.replicates[:, 0], ddof=1)))
    med = float(np.median(variances))
    elapsed = time.perf_counter() - start
    rel = abs(med - target) / target
    report(4, rel <= 0.25 and elapsed < 300,
           f"median variance = {med:.4f} vs {target:.4f} ({100 * rel:.1f}% off), {elapsed:.1f}s")


def _rejection_rate(sigma, reps=100):
    g = FieldGrid(4, 4)
    rejected = 0
    for r in range(reps):
        s = sample_brown_resnick(2000, g, 0.5, 1.8, sigma, seed=50000 + r)
        rejected += isotropy_test(s, g, 200, B=200, seed=r, alpha=0.05).combined["reject"]
    return rejected / reps


def test_5_isotropy_level_and_power(report):
    start = time.perf_counter()
    level = _rejection_rate(SIGMA1)
    power = _rejection_rate(SIGMA2)
    elapsed = time.perf_counter() - start
    ok = 0.005 <= level <= 0.12 and power > 0.5 and elapsed < 7200
    report(5, ok, f"level {100 * level:.1f}%, power {100 * power:.1f}%, {elapsed:.1f}s")


def test_6_linearization_rate(report):
    m = Logistic(0.5)
    medians = []
    for k in (100, 400, 1600):
        res = [abs(linearization_residual(sample_logistic(20 * k, 2, 0.5, seed=seed), m, [0, 1], (1, 1), k))
               for seed in range(50)]
        medians.append(float(np.median(res)))
    ok = medians[0] > medians[1] > medians[2]
    report(6, ok, "medians " + ", ".join(f"k={k}: {v:.4f}" for k, v in zip((100, 400, 1600), medians)))


def test_7_m_estimation(report):
    start = time.perf_counter()
    atoms, weights = grid_measure(4, 2)
    crit = Criterion("logistic", [(0.05, 1.0)], atoms, weights, 250, "constant")
    pop = fit(crit, Logistic(0.5)).theta_hat[0]
    est = [fit(crit, sample_logistic(5000, 2, 0.5, seed=seed)).theta_hat[0] for seed in range(20)]
    med = float(np.median(est))
    elapsed = time.perf_counter() - start
    ok = abs(pop - 0.5) <= 1e-4 and abs(med - 0.5) <= 0.07 and elapsed < 300
    report(7, ok, f"population {pop:.7f}, simulated median {med:.4f}, {elapsed:.1f}s")


def test_8_thread_determinism(report, tmp_path, capsys):
    def run(tag, threads, *argv):
        out = tmp_path / f"{tag}-t{threads}.json"
        code = main([*argv, "--threads", str(threads), "--json", str(out)])
        assert code == 0, out.read_text()
        return out.read_bytes()

    field = tmp_path / "field.csv"
    logi, logi_v = tmp_path / "l.csv", tmp_path / "lv.csv"
    main(["simulate", "--model", "brown-resnick", "--grid", "3x3", "--n", "1500", "--seed", "7",
          "--output", str(field), "--json", str(tmp_path / "x.json")])
    main(["simulate", "--model", "logistic", "--n", "2000", "--seed", "3", "--output", str(logi),
          "--true-v", str(logi_v), "--json", str(tmp_path / "y.json")])
    model = json.dumps({"family": "logistic", "parameters": {"alpha": 0.5}})
    commands = {
        "simulate": lambda t: run("sim", t, "simulate", "--model", "brown-resnick", "--grid", "3x3", "--n", "1500",
                                  "--seed", "9", "--output", str(tmp_path / "s.csv"),
                                  "--metadata", str(tmp_path / "meta.json")) + (tmp_path / "s.csv").read_bytes(),
        "estimate": lambda t: run("est", t, "estimate", "--input", str(field), "--k", "100"),
        "chi-matrix": lambda t: run("chi", t, "chi-matrix", "--input", str(field), "--k", "100"),
        "bootstrap": lambda t: run("boot", t, "bootstrap", "--input", str(field), "--k", "100", "--at", "1,1",
                                   "--at", "0.5,1", "--B", "300", "--seed", "5"),
        "fit": lambda t: run("fit", t, "fit", "--input", str(logi), "--k", "100"),
        "isotropy-test": lambda t: run("iso", t, "isotropy-test", "--input", str(field), "--grid", "3x3",
                                       "--k", "100", "--B", "100", "--seed", "1"),
        "diagnose": lambda t: run("diag", t, "diagnose", "--input", str(logi), "--true-v", str(logi_v),
                                  "--k", "100", "--model", model, "--grid-points", "3"),
    }
    differing = []
    for name, cmd in commands.items():
        outputs = [cmd(t) for t in (1, 2, 8)]
        if not outputs[0] == outputs[1] == outputs[2]:
            differing.append(name)
    capsys.readouterr()
    report(8, not differing, f"{len(commands)} commands checked, differing: {differing or 'none'}")
