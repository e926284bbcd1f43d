"""Bootstrap test of extremal isotropy for gridded max-stable data.

For a distance class ``rho`` the statistic is
``sqrt(k) max_t [max_pair L_hat_pair(1-t, t) - min_pair L_hat_pair(1-t, t)]`` over
ordered location pairs at distance ``rho``. Bootstrap replicates replace
``sqrt(k) L_hat`` by multiplier sums of influence terms; the multipliers are
shared by all distance classes so that per-class p-values can be combined
with Fisher's function.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bootstrap import influence_table, multiplier_matrix
from .errors import InputError
from .estimators import EvaluationRequest, rank_threshold
from .partials import BandwidthRule
from .ranks import RankedSample
from .simulate import FieldGrid

DEFAULT_A = tuple(i / 12 for i in range(1, 12))
DEFAULT_LAGS = (1, 2)  # squared distances: 1 and sqrt(2)


@dataclass(frozen=True)
class LagClass:
    """Ordered pairs of 0-based location indices at squared distance ``rho2``."""

    rho2: int
    pairs: tuple

    @property
    def rho(self) -> float:
        return math.sqrt(self.rho2)

    @property
    def label(self) -> str:
        r = math.isqrt(self.rho2)
        return str(r) if r * r == self.rho2 else f"sqrt{self.rho2}"

    def __len__(self):
        return len(self.pairs)


def parse_lag(token) -> int:
    """Squared distance from ``1``, ``sqrt2``, ``sqrt(5)``, ``1.41421356`` and the like."""
    if isinstance(token, (int, float)):
        val = float(token) ** 2
    else:
        tok = str(token).strip().lower().replace(" ", "")
        m = re.fullmatch(r"sqrt\(?(\d+)\)?", tok)
        val = float(m.group(1)) if m else float(tok) ** 2
    r = round(val)
    if abs(val - r) > 1e-6 or r <= 0:
        raise InputError(f"distance {token!r} is not realised on an integer grid")
    return int(r)


def enumerate_pairs(grid: FieldGrid, rho) -> LagClass:
    """All ordered location pairs at Euclidean distance ``rho`` (compared on exact squared distances)."""
    rho2 = parse_lag(rho)
    locs = grid.locations.astype(np.int64)
    diff = locs[:, None, :] - locs[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    a, b = np.nonzero(d2 == rho2)
    if a.size == 0:
        raise InputError(f"no location pairs at distance {rho} on a {grid} grid")
    return LagClass(rho2, tuple(zip(a.tolist(), b.tolist())))


def _check_A(A) -> tuple:
    A = tuple(float(t) for t in A)
    if not A or any(not 0 < t < 1 for t in A):
        raise InputError("evaluation set A must be a non-empty subset of (0, 1)")
    return A


def pair_stdf_table(sample: RankedSample, lag: LagClass, k: int, A=DEFAULT_A) -> np.ndarray:
    """``(pairs, |A|)`` array of ``L_hat_pair(1 - t, t)``."""
    A = _check_A(A)
    if not 1 <= k <= sample.n:
        raise InputError(f"k must lie in [1, n={sample.n}], got {k}")
    n = sample.n
    first = np.stack([sample.ranks >= rank_threshold(n, k, 1 - t) for t in A])  # (|A|, n, d)
    second = np.stack([sample.ranks >= rank_threshold(n, k, t) for t in A])
    out = np.empty((len(lag), len(A)))
    for q, (a, b) in enumerate(lag.pairs):
        out[q] = np.count_nonzero(first[:, :, a] | second[:, :, b], axis=1) / k
    return out


def isotropy_statistic(sample: RankedSample, lag: LagClass, k: int, A=DEFAULT_A) -> float:
    tab = pair_stdf_table(sample, lag, k, A)
    return math.sqrt(k) * float(np.max(tab.max(axis=0) - tab.min(axis=0)))


def lag_request(lag: LagClass, k: int, A=DEFAULT_A) -> EvaluationRequest:
    A = _check_A(A)
    pts = [(1 - t, t) for t in A]
    return EvaluationRequest(tuple((pair, pts) for pair in lag.pairs), k)


def isotropy_bootstrap(sample: RankedSample, lags: Sequence[LagClass], k: int, A=DEFAULT_A, B: int = 500,
                       bandwidth=None, seed: int = 0, threads: Optional[int] = None) -> list[np.ndarray]:
    """Bootstrap replicates of the statistic for every distance class.

    One ``B x n`` multiplier matrix is drawn and used for all classes and all ``t``.
    """
    if B < 1:
        raise InputError("need B >= 1")
    A = _check_A(A)
    e = multiplier_matrix(sample.n, B, seed, threads)
    out = []
    for lag in lags:
        table = influence_table(sample, lag_request(lag, k, A), bandwidth, threads)
        g = (e @ np.ascontiguousarray(table.yhat)).reshape(B, len(lag), len(A))
        out.append(np.max(g.max(axis=1) - g.min(axis=1), axis=1))
    return out


def lag_p_value(T: float, replicates) -> float:
    """Fraction of replicates at least as large as ``T``."""
    reps = np.asarray(replicates, dtype=float)
    if reps.size == 0:
        raise InputError("no bootstrap replicates")
    return float(np.count_nonzero(T <= reps)) / reps.size


def fisher(pvalues) -> float:
    """Fisher's combining function ``-2 sum log p``."""
    return float(-2.0 * np.sum(np.log(np.asarray(pvalues, dtype=float))))


def _tilde_p(stats: np.ndarray, replicates: np.ndarray) -> np.ndarray:
    """``(1/(B+1)) [1/2 + #{b' : stats_b <= T_b'}]`` for each entry of ``stats``."""
    srt = np.sort(replicates)
    ge = srt.size - np.searchsorted(srt, stats, side="left")
    return (0.5 + ge) / (srt.size + 1)


def combination_statistics(T: Sequence[float], replicates: Sequence[np.ndarray]) -> np.ndarray:
    """Fisher statistics ``W_b`` for ``b = 0..B`` (``b = 0`` uses the observed statistics)."""
    reps = [np.asarray(r, dtype=float) for r in replicates]
    if len(reps) != len(T) or not reps:
        raise InputError("need one replicate vector per statistic")
    B = reps[0].size
    if any(r.size != B for r in reps):
        raise InputError("replicate counts differ between distance classes")
    W = np.zeros(B + 1)
    for t0, r in zip(T, reps):
        W += -2.0 * np.log(_tilde_p(np.concatenate([[t0], r]), r))
    return W


def combined_p_value(T: Sequence[float], replicates: Sequence[np.ndarray]) -> float:
    W = combination_statistics(T, replicates)
    return float(np.count_nonzero(W[0] <= W[1:])) / (W.size - 1)


@dataclass
class IsotropyReport:
    lags: list
    combined: dict
    config: dict
    replicates: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"lags": self.lags, "combined": self.combined, "config": self.config}


def isotropy_test(sample: RankedSample, grid: FieldGrid, k: int, B: int = 500, lags=("1", "sqrt2"),
                  A=DEFAULT_A, bandwidth=None, seed: int = 0, alpha: float = 0.05,
                  threads: Optional[int] = None) -> IsotropyReport:
    """Per-class and combined bootstrap tests of extremal isotropy."""
    if sample.d != grid.d:
        raise InputError(f"sample has {sample.d} columns but the {grid} grid has {grid.d} locations")
    if not 0 < alpha < 1:
        raise InputError("alpha must lie in (0, 1)")
    A = _check_A(A)
    classes = [enumerate_pairs(grid, r) for r in lags]
    T = [isotropy_statistic(sample, c, k, A) for c in classes]
    reps = isotropy_bootstrap(sample, classes, k, A, B, bandwidth, seed, threads)
    per_lag = []
    for c, t0, r in zip(classes, T, reps):
        p = lag_p_value(t0, r)
        per_lag.append({"rho": c.label, "rho_squared": c.rho2, "n_pairs": len(c), "statistic": t0,
                        "p_value": p, "reject": p < alpha})
    report_comb = {}
    if len(classes) > 1:
        W = combination_statistics(T, reps)
        p = float(np.count_nonzero(W[0] <= W[1:])) / B
        report_comb = {"W_observed": float(W[0]), "p_value": p, "reject": p < alpha}
    rule = BandwidthRule.parse(bandwidth)
    config = {"k": k, "B": B, "A": list(A), "lags": [c.label for c in classes], "alpha": alpha,
              "seed": seed, "grid": str(grid), "n": sample.n,
              "bandwidth": {"mode": rule.mode, "h": rule.h, "c": rule.c}}
    return IsotropyReport(per_lag, report_comb, config, reps)
