import json
import math

import numpy as np
import pytest

from taildep import (BandwidthError, BootstrapEnsemble, EvaluationRequest, InputError, Logistic,
                     analytic_bivariate_variance, bootstrap_quantile, bootstrap_replicates, compute_ranks,
                     empirical_stdf, influence_table, partial_hat, sample_logistic)
from taildep.bootstrap import InfluenceTable, influence_discrepancy, multiplier_matrix, multipliers, oracle_influence


def req(points, k, margins=(0, 1)):
    return EvaluationRequest(((margins, points),), k)


@pytest.fixture(scope="module")
def sample():
    return sample_logistic(1000, 3, 0.5, seed=11)


def test_table_matches_definition(sample):
    k = 50
    x = (1.0, 0.5)
    t = influence_table(sample, req([x], k), 0.2)
    n = sample.n
    fires = sample.ranks[:, :2] > n + 1 - np.array([round(k * v) for v in x])  # k x is integral here
    lhat = empirical_stdf(sample, [0, 1], x, k)
    d = [partial_hat(sample, [0, 1], x, j, k, 0.2) for j in range(2)]
    expect = (fires.any(axis=1) - k / n * lhat - fires @ np.array(d) + k / n * np.dot(d, x)) / math.sqrt(k)
    np.testing.assert_allclose(t.yhat[:, 0], expect, atol=1e-12)
    assert t.stdf[0] == lhat
    assert t.partials[0] == pytest.approx(tuple(d))


def test_column_mean_bound(sample):
    k = 40
    t = influence_table(sample, req([(1.0, 1.0), (0.3, 2.0)], k, (0, 2)))
    bound = 2 / (math.sqrt(k) * sample.n)
    assert np.all(np.abs(t.yhat.mean(axis=0)) <= bound + 1e-15)


def test_zero_point_gives_zero_column(sample):
    t = influence_table(sample, req([(0.0, 0.0)], 30))
    assert np.all(t.yhat == 0)


def test_explicit_bandwidth_violation_lists_points(sample):
    with pytest.raises(BandwidthError, match=r"point=\(0.1, 1.0\) coordinate=0"):
        influence_table(sample, req([(1.0, 1.0), (0.1, 1.0)], 30), 0.2)


def test_oracle_influence_close(sample):
    m = Logistic(0.5)
    t = influence_table(sample, req([(1.0, 1.0)], 50))
    disc = influence_discrepancy(t, sample, m)
    assert disc["max_sum_sq"] < 0.05
    assert oracle_influence(sample, m, req([(1.0, 1.0)], 50)).shape == (1000, 1)


def test_replicates_definition(sample):
    t = influence_table(sample, req([(1.0, 1.0), (0.5, 0.5)], 50))
    ens = bootstrap_replicates(t, 7, base_seed=3)
    for b in range(1, 8):
        np.testing.assert_allclose(ens.replicates[b - 1], multipliers(sample.n, b, 3) @ t.yhat, atol=1e-12)
    e = multiplier_matrix(sample.n, 7, 3)
    np.testing.assert_array_equal(e[4], multipliers(sample.n, 5, 3))


def test_replicates_thread_invariant(sample):
    t = influence_table(sample, req([(1.0, 1.0), (0.5, 0.5)], 50))
    a = bootstrap_replicates(t, 300, 9, threads=1).replicates
    b = bootstrap_replicates(t, 300, 9, threads=4).replicates
    assert np.array_equal(a, b)


def test_replicate_mean_near_zero(sample):
    t = influence_table(sample, req([(1.0, 1.0)], 50))
    r = bootstrap_replicates(t, 2000, 1).replicates[:, 0]
    assert abs(r.mean()) <= 5 * r.std() / math.sqrt(r.size)


def test_zero_table():
    t = InfluenceTable(np.zeros((10, 2)), None, [], np.zeros(2), [])
    assert np.all(bootstrap_replicates(t, 5, 0).replicates == 0)


def test_ensemble_export(tmp_path, sample):
    t = influence_table(sample, req([(1.0, 1.0)], 50))
    ens = bootstrap_replicates(t, 4, 2)
    d = json.loads(ens.to_json())
    assert d["B"] == 4 and d["p"] == 1 and d["base_seed"] == 2 and len(d["rows"]) == 4
    ens.save(tmp_path / "e.npz")
    back = BootstrapEnsemble.load(tmp_path / "e.npz")
    assert np.array_equal(back.replicates, ens.replicates) and back.base_seed == 2


def test_quantiles():
    ens = BootstrapEnsemble(np.full((10, 3), 2.5), 0)
    assert bootstrap_quantile(ens, "max", 0.3) == 2.5
    ens = BootstrapEnsemble(np.arange(1.0, 101)[:, None], 0)
    assert bootstrap_quantile(ens, "max_abs", 0.5) == 50.5
    assert bootstrap_quantile(ens, lambda r: r[:, 0] * 2, 0.5) == 101.0
    for level in (0.0, 1.0, 1.5):
        with pytest.raises(InputError):
            bootstrap_quantile(ens, "max", level)


def test_analytic_variance():
    assert analytic_bivariate_variance((1, 1), 0.5) == pytest.approx(0.1875)
    assert analytic_bivariate_variance((1, 2), 0.0) == 0.0
    assert analytic_bivariate_variance((1, 1), 1.0) == 0.0
    with pytest.raises(InputError):
        analytic_bivariate_variance((1, 1), 1.5)


def test_bad_arguments(sample):
    t = influence_table(sample, req([(1.0, 1.0)], 50))
    with pytest.raises(InputError):
        bootstrap_replicates(t, 0, 1)
    with pytest.raises(InputError):
        bootstrap_replicates(t, 5, -1)
    with pytest.raises(InputError):
        influence_table(sample, req([(1.0, 1.0)], 5000))
