import numpy as np
import pytest

from taildep import (Criterion, InputError, Logistic, ModeError, NumericError, OptimizerConfig, compute_ranks,
                     criterion_value, empirical_stdf, fit, linearization_pieces, sample_logistic)
from taildep.mestimation import grid_measure, hessian_q2, jacobian, weight_functions

ATOMS, W = grid_measure(4, 2)


def crit(k=250, g="constant", bounds=((0.05, 1.0),), family="logistic", atoms=ATOMS, weights=W):
    return Criterion(family, bounds, atoms, weights, k, g)


def test_grid_measure():
    pts, w = grid_measure(4, 2)
    assert pts.shape == (16, 2) and w.sum() == pytest.approx(1.0)
    assert {tuple(p) for p in pts} == {(i / 4, j / 4) for i in range(1, 5) for j in range(1, 5)}


def test_population_zero():
    c = crit(g="moments")
    assert criterion_value(c, Logistic(0.5), [0.5]) == pytest.approx(0.0, abs=1e-14)
    assert criterion_value(c, Logistic(0.5), [0.6]) > 0


def test_single_atom_reduction():
    s = sample_logistic(2000, 2, 0.5, seed=0)
    c = Criterion("logistic", [(0.1, 1)], [[1.0, 0.5]], [1.0], 100, "constant")
    expect = abs(Logistic(0.4).stdf([1.0, 0.5]) - empirical_stdf(s, [0, 1], [1.0, 0.5], 100))
    assert criterion_value(c, s, [0.4]) == pytest.approx(expect)


def test_outside_box():
    with pytest.raises(InputError):
        criterion_value(crit(), Logistic(0.5), [1.5])


def test_population_fit():
    for g in ("constant", "moments"):
        res = fit(crit(g=g), Logistic(0.5))
        assert abs(res.theta_hat[0] - 0.5) < 1e-4
    res = fit(crit(family="hr_bivariate", bounds=((0.1, 5.0),)), Logistic(0.5))
    assert res.q_value < 0.01


def test_degenerate_box():
    res = fit(crit(bounds=((0.3, 0.3),)), Logistic(0.5))
    assert res.theta_hat.tolist() == [0.3] and res.eta == 0.0


def test_fit_deterministic():
    s = sample_logistic(3000, 2, 0.5, seed=3)
    a = fit(crit(), s).to_dict(include_trace=True)
    b = fit(crit(), s).to_dict(include_trace=True)
    assert a == b


def test_independence_data_small_criterion():
    vals = [criterion_value(crit(), sample_logistic(5000, 2, 1.0, seed), [1.0]) for seed in range(20)]
    assert np.median(vals) < 0.1


def test_weight_presets():
    x = np.array([[0.25, 0.75], [1.0, 0.5]])
    assert weight_functions("monomials", 2, 1)(x).shape == (2, 3)
    assert weight_functions("boxes", 2, 1)(x)[:, 1].tolist() == [0.0, 0.0]
    with pytest.raises(InputError):
        weight_functions("wavelets", 2, 1)


def test_q_at_least_s():
    with pytest.raises(InputError):
        Criterion("logistic", [(0.1, 1), (0.1, 1)], ATOMS, W, 10, "constant")


def test_linearization_logistic_analytic_jacobian():
    c = crit(g="moments")
    J = jacobian(c, [0.5])
    # dL/dalpha for the logistic family
    a = 0.5
    def dl(x):
        s = np.sum(x ** (1 / a))
        return s ** a * (np.log(s) - np.sum(x ** (1 / a) * np.log(x)) / (a * s))
    expect = c._G.T @ (c.weights * np.array([dl(x) for x in c.atoms]))
    np.testing.assert_allclose(J[:, 0], expect, rtol=1e-6)
    V = hessian_q2(c, [0.5])
    np.testing.assert_allclose(V, 2 * J.T @ J, rtol=1e-4)


def test_linearization_pieces_centered():
    c = crit(g="moments", k=100)
    s = sample_logistic(4000, 2, 0.5, seed=1)
    lin = linearization_pieces(c, [0.5], s)
    assert lin.Z.shape == (4000, 1)
    # exact mean vs Monte Carlo mean
    zs = np.concatenate([linearization_pieces(c, [0.5], sample_logistic(4000, 2, 0.5, seed)).Z for seed in range(10)])
    assert zs.mean(axis=0) == pytest.approx(lin.z_mean, abs=4 * zs.std() / np.sqrt(zs.shape[0]))


def test_linearization_errors():
    c = crit()
    with pytest.raises(ModeError):
        linearization_pieces(c, [0.5], compute_ranks(np.random.default_rng(0).normal(size=(50, 2))))
    flat = Criterion("logistic", [(0.1, 1)], [[1.0, 0.0], [0.0, 0.5]], [0.5, 0.5], 50, "constant")
    with pytest.raises(NumericError):
        linearization_pieces(flat, [0.5], sample_logistic(500, 2, 0.5, seed=0))
