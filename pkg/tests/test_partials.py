import math

import numpy as np
import pytest

from taildep import BandwidthError, BandwidthRule, InputError, Logistic, compute_ranks, partial_hat, sample_logistic


def comonotone(n):
    i = np.arange(1.0, n + 1)
    return compute_ranks(np.column_stack([i, i]))


def test_comonotone_example():
    s = comonotone(16)
    assert partial_hat(s, [0, 1], [1.0, 1.0], 0, 4, 0.25) == pytest.approx(0.5)


def test_clamped_at_one():
    # independent-looking ranks: L_hat grows at the marginal rate, which can exceed 1 over a short window
    s = compute_ranks(np.column_stack([np.arange(20.0), -np.arange(20.0)]))
    assert partial_hat(s, [0, 1], [1.0, 1.0], 0, 5, 0.1) <= 1.0


def test_bandwidth_errors():
    s = comonotone(10)
    with pytest.raises(BandwidthError):
        partial_hat(s, [0, 1], [1, 1], 0, 4, 0.0)
    with pytest.raises(BandwidthError):
        partial_hat(s, [0, 1], [1, 1], 0, 4, 1.0)
    with pytest.raises(InputError):
        partial_hat(s, [0, 1], [1, 1], 2, 4, 0.5)


def test_rule_parsing():
    assert BandwidthRule.parse("auto") == BandwidthRule()
    assert BandwidthRule.parse("auto:0.5").c == 0.5
    assert BandwidthRule.parse(0.2) == BandwidthRule("explicit", h=0.2)
    with pytest.raises(BandwidthError):
        BandwidthRule.parse(-1)
    with pytest.raises(InputError):
        BandwidthRule("magic")


def test_auto_rate_and_shrink():
    r = BandwidthRule()
    assert r.base(3, 100) == pytest.approx((math.log(103) / 100) ** 0.25)
    assert r.at(0.1, 3, 100) == 0.05
    assert r.at(2.0, 3, 100) == r.base(3, 100)
    with pytest.raises(BandwidthError):
        BandwidthRule.parse(0.5).at(0.4, 1, 10)
    lo, hi = r.window(3, 100)
    assert lo < r.base(3, 100) <= hi


def test_consistency_on_logistic():
    # median absolute error shrinks along a (k, h) schedule
    m = Logistic(0.5)
    truth = m.partial([1.0, 1.0], 0)
    errs = []
    for k in (100, 400, 1600):
        h = BandwidthRule().base(1, k)
        e = [abs(partial_hat(sample_logistic(20 * k, 2, 0.5, seed), [0, 1], [1, 1], 0, k, h) - truth)
             for seed in range(15)]
        errs.append(np.median(e))
    assert errs[0] > errs[2]
