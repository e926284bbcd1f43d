"""Gaussian multiplier bootstrap for vectors of empirical STDF values.

Each observation contributes an influence term ``Yhat_i`` per statistic; a
replicate is ``sum_i e_i Yhat_i`` with iid standard normal multipliers. The
multipliers of replicate ``b`` come from a Philox stream keyed by
``(base_seed, b)``, so every replicate can be regenerated on its own and the
ensemble does not depend on how many threads produced it.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from ._parallel import chunk_bounds, map_chunks, stream
from .errors import BandwidthError, InputError, ModeError
from .estimators import EvaluationRequest, preasymptotic_stdf, rank_threshold
from .models import ModelSpec
from .partials import BandwidthRule
from .ranks import RankedSample

logger = logging.getLogger(__name__)

REPLICATE_CHUNK = 64


@dataclass
class InfluenceTable:
    """Observable influence terms.

    Attributes
    ----------
    yhat : ndarray, shape (n, p)
        Column ``q`` holds ``Yhat_{i, I_q}(x_q)`` for ``i = 1..n``.
    request : EvaluationRequest
    h : list of tuple
        Bandwidth used per statistic and coordinate.
    stdf : ndarray, shape (p,)
        Empirical STDF at each evaluation point.
    partials : list of tuple
        Finite-difference partial derivative estimates per statistic.
    """

    yhat: np.ndarray
    request: Optional[EvaluationRequest]
    h: list
    stdf: np.ndarray
    partials: list

    @property
    def n(self) -> int:
        return self.yhat.shape[0]

    @property
    def p(self) -> int:
        return self.yhat.shape[1]

    def scaled(self, c: float) -> "InfluenceTable":
        return InfluenceTable(c * self.yhat, self.request, self.h, self.stdf, self.partials)


def _influence_column(ranks: np.ndarray, n: int, k: int, x: np.ndarray, hs: list[float]):
    """Influence column, STDF value and partial estimates at one point of one margin set."""
    m = x.size
    thr = np.array([rank_threshold(n, k, xj) for xj in x])
    fires = ranks >= thr
    any_fire = fires.any(axis=1)
    lhat = np.count_nonzero(any_fire) / k

    partials = []
    for j in range(m):
        if x[j] == 0:
            partials.append(0.0)
            continue
        h = hs[j]
        others = np.delete(fires, j, axis=1).any(axis=1) if m > 1 else np.zeros(n, bool)
        up = others | (ranks[:, j] >= rank_threshold(n, k, x[j] + h))
        lo = others | (ranks[:, j] >= rank_threshold(n, k, x[j] - h))
        diff = (np.count_nonzero(up) - np.count_nonzero(lo)) / k
        partials.append(min(diff / (2.0 * h), 1.0))

    col = any_fire.astype(float) - (k / n) * lhat
    for j in range(m):
        if partials[j] != 0.0:
            col -= partials[j] * (fires[:, j].astype(float) - k * x[j] / n)
    return col / math.sqrt(k), lhat, tuple(partials)


def influence_table(sample: RankedSample, request: EvaluationRequest,
                    bandwidth: Union[BandwidthRule, str, float, None] = None,
                    threads: Optional[int] = None) -> InfluenceTable:
    """Build the ``n x p`` table of observable influence terms for ``request``.

    Raises
    ------
    BandwidthError
        An explicit bandwidth is not below some coordinate; the message lists every offending
        ``(margins, point, coordinate)``.
    """
    rule = BandwidthRule.parse(bandwidth)
    k, n, p = request.k, sample.n, request.p
    if not 1 <= k <= n:
        raise InputError(f"k must lie in [1, n={n}], got {k}")
    index = request.index
    for m, _ in index:
        if max(m) >= sample.d:
            raise InputError(f"margins {m} out of range for d={sample.d}")

    hs, bad, shrunk = [], [], 0
    for m, pt in index:
        row = []
        for pos, xj in enumerate(pt):
            if xj == 0:
                row.append(0.0)
                continue
            try:
                hj = rule.at(xj, p, k)
            except BandwidthError:
                bad.append((m, pt, pos))
                hj = float("nan")
            if rule.mode == "auto" and hj != rule.base(p, k):
                shrunk += 1
            row.append(hj)
        hs.append(tuple(row))
    if bad:
        listed = "; ".join(f"margins={m} point={pt} coordinate={j}" for m, pt, j in bad)
        raise BandwidthError(f"bandwidth {rule.base(p, k)} too large at: {listed}")
    if shrunk:
        logger.warning("auto bandwidth shrunk to x_j/2 at %d coordinates", shrunk)

    yhat = np.empty((n, p), order="F")
    stdf = np.empty(p)
    partials: list = [None] * p

    def work(a, b):
        for q in range(a, b):
            m, pt = index[q]
            col, lval, part = _influence_column(sample.ranks[:, list(m)], n, k, np.asarray(pt), list(hs[q]))
            yhat[:, q] = col
            stdf[q] = lval
            partials[q] = part

    map_chunks(work, chunk_bounds(p, 32), threads)
    return InfluenceTable(yhat, request, hs, stdf, partials)


def oracle_influence(sample: RankedSample, model: ModelSpec, request: EvaluationRequest) -> np.ndarray:
    """Influence terms ``Y_{i,I}(x)`` built from the true uniforms and the model's exact partials."""
    if sample.true_v is None:
        raise ModeError("oracle influence terms need the true uniforms")
    n, k = sample.n, request.k
    out = np.empty((n, request.p))
    for q, (m, pt) in enumerate(request.index):
        x = np.asarray(pt)
        fires = sample.true_v[:, list(m)] < k * x / n
        col = fires.any(axis=1) - (k / n) * preasymptotic_stdf(model, m, x, n, k)
        for pos in range(len(m)):
            if x[pos] > 0:
                col = col - model.partial(x, pos, m) * (fires[:, pos] - k * x[pos] / n)
        out[:, q] = col / math.sqrt(k)
    return out


def influence_discrepancy(table: InfluenceTable, sample: RankedSample, model: ModelSpec) -> dict:
    """Differences ``Yhat - Y`` between observable and oracle influence terms.

    Returns the per-statistic sums of squares and their maximum.
    """
    diff = table.yhat - oracle_influence(sample, model, table.request)
    ss = np.sum(diff ** 2, axis=0)
    return {"sum_sq": ss, "max_sum_sq": float(ss.max())}


def multipliers(n: int, b: int, base_seed: int) -> np.ndarray:
    """Standard normal multipliers ``e_1..e_n`` of replicate ``b``."""
    return stream(base_seed, b).standard_normal(n)


def multiplier_matrix(n: int, B: int, base_seed: int, threads: Optional[int] = None) -> np.ndarray:
    """``B x n`` matrix whose row ``b - 1`` is ``multipliers(n, b, base_seed)``."""
    e = np.empty((B, n))

    def work(a, z):
        for r in range(a, z):
            e[r] = multipliers(n, r + 1, base_seed)

    map_chunks(work, chunk_bounds(B, REPLICATE_CHUNK), threads)
    return e


@dataclass
class BootstrapEnsemble:
    """``B x p`` replicate matrix; row ``b - 1`` is replicate ``b``."""

    replicates: np.ndarray
    base_seed: int

    @property
    def B(self) -> int:
        return self.replicates.shape[0]

    @property
    def p(self) -> int:
        return self.replicates.shape[1]

    def to_dict(self) -> dict:
        return {"B": self.B, "p": self.p, "base_seed": self.base_seed,
                "seed_rule": "philox(SeedSequence([base_seed, b])), b = 1..B",
                "rows": self.replicates.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def save(self, path):
        """Binary dump (``.npz``) with the same fields as the JSON export."""
        np.savez(path, replicates=self.replicates, base_seed=self.base_seed)

    @classmethod
    def load(cls, path) -> "BootstrapEnsemble":
        with np.load(path) as f:
            return cls(f["replicates"], int(f["base_seed"]))


def bootstrap_replicates(table: InfluenceTable, B: int, base_seed: int,
                         threads: Optional[int] = None) -> BootstrapEnsemble:
    """Draw ``B`` multiplier replicates of the statistic vector."""
    if B < 1:
        raise InputError(f"need at least one replicate, got B={B}")
    if base_seed < 0:
        raise InputError("seeds must be non-negative")
    n = table.n
    out = np.empty((B, table.p))
    yhat = np.ascontiguousarray(table.yhat)

    def work(a, z):
        e = np.stack([multipliers(n, b + 1, base_seed) for b in range(a, z)])
        out[a:z] = e @ yhat

    map_chunks(work, chunk_bounds(B, REPLICATE_CHUNK), threads)
    return BootstrapEnsemble(out, int(base_seed))


_REDUCERS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "max_abs": lambda r: np.max(np.abs(r), axis=1),
    "max": lambda r: np.max(r, axis=1),
    "min": lambda r: np.min(r, axis=1),
}


def bootstrap_quantile(ensemble: BootstrapEnsemble, statistic: Union[str, Callable] = "max_abs",
                       level: float = 0.95) -> float:
    """Type-7 empirical quantile of a per-replicate scalar reduction."""
    if not 0.0 < level < 1.0:
        raise InputError(f"level must lie in (0, 1), got {level}")
    if ensemble.replicates.size == 0:
        raise InputError("empty ensemble")
    reduce = _REDUCERS[statistic] if isinstance(statistic, str) else statistic
    vals = np.asarray(reduce(ensemble.replicates), dtype=float)
    return float(np.quantile(vals, level, method="linear"))


def analytic_bivariate_variance(x, r: float) -> float:
    """Closed-form bivariate limit variance at ``x`` for tail copula value ``r``.

    ``r (x1 + x2 - r)(x1 - r)(x2 - r) / ((x1 + x2 - 2r) x1 x2)``, extended by
    continuity to ``r = x1 = x2``.
    """
    x1, x2 = (float(v) for v in x)
    if x1 <= 0 or x2 <= 0:
        raise InputError("coordinates must be positive")
    if not 0.0 <= r <= min(x1, x2):
        raise InputError(f"tail copula value {r} outside [0, min(x)]")
    den = (x1 + x2 - 2 * r) * x1 * x2
    if den == 0:
        return 0.0
    return r * (x1 + x2 - r) * (x1 - r) * (x2 - r) / den
