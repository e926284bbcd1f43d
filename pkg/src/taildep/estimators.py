"""Empirical stable tail dependence functions and tail copulas.

Indicators ``R_ij > n + 1 - k x_j`` are evaluated on integers: because ranks
are integers the event is equivalent to ``R_ij >= n + 2 - ceil(k x_j)``.
``k x_j`` values within ``1e-9`` of an integer are snapped first, so grid
points ``l / k`` never flip on rounding noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, ModeError, SizeError
from .models import ModelSpec
from .ranks import RankedSample

SNAP_TOL = 1e-9
KINDS = ("stdf", "tail_copula", "theta", "chi")


def ceil_snap(v: float) -> int:
    """``ceil(v)``, except that values within ``SNAP_TOL`` of an integer snap to it."""
    r = round(v)
    if abs(v - r) <= SNAP_TOL:
        return int(r)
    return int(math.ceil(v))


def rank_threshold(n: int, k: int, xj: float) -> int:
    """Smallest rank that exceeds ``n + 1 - k * xj``."""
    return n + 2 - ceil_snap(k * xj)


@dataclass(frozen=True)
class MarginSet:
    """Strictly increasing, 0-based column indices."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise InputError("margin set is empty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InputError(f"margin indices must be strictly increasing, got {idx}")
        if idx[0] < 0:
            raise InputError("margin indices must be non-negative")
        object.__setattr__(self, "indices", idx)

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)


def _margins(sample: RankedSample, margins) -> list[int]:
    idx = [int(i) for i in margins]
    if not idx:
        raise InputError("margin set is empty")
    if len(set(idx)) != len(idx):
        raise InputError(f"repeated margin index in {idx}")
    if min(idx) < 0 or max(idx) >= sample.d:
        raise InputError(f"margin indices {idx} out of range for d={sample.d}")
    return idx


def _point(x, m: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (m,):
        raise InputError(f"point {x.tolist()} does not match {m} margins")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise InputError(f"point coordinates must be finite and >= 0, got {x.tolist()}")
    return x


def _check_k(sample: RankedSample, k: int) -> int:
    if int(k) != k or not 1 <= k <= sample.n:
        raise SizeError(f"k must be an integer in [1, n={sample.n}], got {k}")
    return int(k)


def exceedances(sample: RankedSample, margins, x, k: int) -> np.ndarray:
    """Boolean ``n x |I|`` matrix of the events ``R_ij > n + 1 - k x_j``."""
    idx = _margins(sample, margins)
    x = _point(x, len(idx))
    k = _check_k(sample, k)
    thr = np.array([rank_threshold(sample.n, k, xj) for xj in x])
    return sample.ranks[:, idx] >= thr


def empirical_stdf(sample: RankedSample, margins, x, k: int) -> float:
    """``(1/k) #{i : R_ij > n + 1 - k x_j for some j in I}``."""
    ex = exceedances(sample, margins, x, k)
    return np.count_nonzero(ex.any(axis=1)) / k


def empirical_tail_copula(sample: RankedSample, margins, x, k: int) -> float:
    """``(1/k) #{i : R_ij > n + 1 - k x_j for all j in I}``."""
    ex = exceedances(sample, margins, x, k)
    return np.count_nonzero(ex.all(axis=1)) / k


def _pair_or_more(margins):
    if len(list(margins)) < 2:
        raise InputError("extremal coefficients need at least two margins")


def extremal_coefficient(sample: RankedSample, margins, k: int) -> float:
    _pair_or_more(margins)
    return empirical_stdf(sample, margins, np.ones(len(margins)), k)


def tail_correlation(sample: RankedSample, margins, k: int) -> float:
    _pair_or_more(margins)
    return empirical_tail_copula(sample, margins, np.ones(len(margins)), k)


def tail_correlation_from_theta(sample: RankedSample, margins, k: int) -> float:
    """Pairwise alternative ``2(k-1)/k - theta_hat``."""
    if len(margins) != 2:
        raise InputError("the theta-based tail correlation is defined for pairs only")
    return 2.0 * (k - 1) / k - extremal_coefficient(sample, margins, k)


def chi_matrix(sample: RankedSample, k: int) -> np.ndarray:
    """Symmetric ``d x d`` matrix of pairwise tail correlations with unit diagonal."""
    if sample.d < 2:
        raise SizeError("chi matrix needs d >= 2")
    k = _check_k(sample, k)
    ex = (sample.ranks >= rank_threshold(sample.n, k, 1.0)).astype(np.int64)
    chi = (ex.T @ ex) / k
    np.fill_diagonal(chi, 1.0)
    return chi


# simulation-mode oracles


def _truth(sample: RankedSample) -> np.ndarray:
    if sample.true_v is None:
        raise ModeError("this quantity needs the true uniforms of a simulated sample")
    return sample.true_v


def oracle_stdf(sample: RankedSample, margins, x, k: int) -> float:
    """``(1/k) #{i : V_ij < k x_j / n for some j in I}`` on the true uniforms."""
    v = _truth(sample)
    idx = _margins(sample, margins)
    x = _point(x, len(idx))
    k = _check_k(sample, k)
    fire = v[:, idx] < k * x / sample.n
    return np.count_nonzero(fire.any(axis=1)) / k


def preasymptotic_stdf(model: ModelSpec, margins, x, n: int, k: int) -> float:
    """``(n/k) P(V_j < k x_j / n for some j)`` under the model's extreme-value copula."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise InputError("point coordinates must be >= 0")
    if not np.any(x > 0):
        return 0.0
    if x.size == 1:
        return min(float(x[0]), n / k)
    u = 1.0 - k * x / n
    if np.any(u <= 0):
        return n / k
    # 1 - C(u) = -expm1(-L(-log u)), accurate for small k/n
    arg = -np.log1p(-k * x / n)
    return -math.expm1(-model.stdf(arg, margins)) * n / k


def oracle_process(sample: RankedSample, model: ModelSpec, margins, x, k: int) -> float:
    """``sqrt(k) (oracle - preasymptotic)`` at ``x``."""
    return math.sqrt(k) * (
        oracle_stdf(sample, margins, x, k) - preasymptotic_stdf(model, margins, x, sample.n, k)
    )


def bias(model: ModelSpec, margins, x, n: int, k: int) -> float:
    """``sqrt(k) (preasymptotic STDF - L)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lval = model.stdf(x, margins) if np.any(x > 0) else 0.0
    return math.sqrt(k) * (preasymptotic_stdf(model, margins, x, n, k) - lval)


def linearized_process(sample: RankedSample, model: ModelSpec, margins, x, k: int) -> float:
    """Oracle process minus the partial-derivative weighted marginal oracle processes."""
    idx = _margins(sample, margins)
    x = _point(x, len(idx))
    if not np.any(x > 0):
        _truth(sample)
        return 0.0
    total = oracle_process(sample, model, idx, x, k)
    for pos, j in enumerate(idx):
        if x[pos] == 0:
            continue
        dj = model.partial(x, pos, idx)
        total -= dj * oracle_process(sample, model, [j], [x[pos]], k)
    return total


def quantile_map(sample: RankedSample, margins, x, k: int) -> np.ndarray:
    """``S_n(x)_j = (n/k) V_(ceil(k x_j)):n,j``, the random point with ``L_hat(x) = L_oracle(S_n(x))``."""
    v = _truth(sample)
    idx = _margins(sample, margins)
    x = _point(x, len(idx))
    out = np.zeros(len(idx))
    for pos, j in enumerate(idx):
        if x[pos] > 0:
            c = min(ceil_snap(k * x[pos]), sample.n)
            out[pos] = sample.n / k * np.partition(v[:, j], c - 1)[c - 1]
    return out


def linearization_residual(sample: RankedSample, model: ModelSpec, margins, x, k: int,
                           bias_at: str = "x") -> float:
    """``sqrt(k)(L_hat - L) - L_bar - B_n(.)`` at ``x``.

    ``bias_at="x"`` subtracts the bias at ``x`` itself; ``"quantile_map"`` subtracts it at ``S_n(x)``.
    """
    idx = _margins(sample, margins)
    x = _point(x, len(idx))
    n = sample.n
    ln = math.sqrt(k) * (empirical_stdf(sample, idx, x, k) - model.stdf(x, idx))
    lbar = linearized_process(sample, model, idx, x, k)
    if bias_at == "x":
        b = bias(model, idx, x, n, k)
    elif bias_at == "quantile_map":
        b = bias(model, idx, quantile_map(sample, idx, x, k), n, k)
    else:
        raise InputError(f"unknown bias location {bias_at!r}")
    return ln - lbar - b


# batch evaluation


@dataclass(frozen=True)
class EvaluationRequest:
    """Margin sets with evaluation points, all at threshold ``k``.

    ``entries`` is a sequence of ``(margins, points)`` with 0-based margins.
    """

    entries: tuple
    k: int

    def __post_init__(self):
        norm = []
        for margins, points in self.entries:
            margins = tuple(int(i) for i in margins)
            if len(margins) < 2:
                raise InputError("each evaluation entry needs at least two margins")
            pts = tuple(tuple(float(c) for c in p) for p in points)
            for p in pts:
                if len(p) != len(margins) or min(p) < 0:
                    raise InputError(f"bad point {p} for margins {margins}")
            norm.append((margins, pts))
        if not any(pts for _, pts in norm):
            raise InputError("evaluation request holds no points")
        object.__setattr__(self, "entries", tuple(norm))

    @property
    def index(self) -> list[tuple[tuple, tuple]]:
        return [(m, p) for m, pts in self.entries for p in pts]

    @property
    def p(self) -> int:
        return len(self.index)

    @classmethod
    def all_pairs(cls, d: int, points, k: int) -> "EvaluationRequest":
        pts = [tuple(p) for p in points]
        return cls(tuple(((a, b), pts) for a in range(d) for b in range(a + 1, d)), k)


@dataclass
class TailStatisticVector:
    values: np.ndarray
    index: list
    kind: str
    meta: dict = field(default_factory=dict)

    def to_records(self, one_based: bool = True) -> list[dict]:
        off = 1 if one_based else 0
        return [
            {"margins": [i + off for i in m], "point": list(p), "kind": self.kind, "value": float(v)}
            for (m, p), v in zip(self.index, self.values)
        ]


def evaluate(sample: RankedSample, request: EvaluationRequest, kind: str = "stdf") -> TailStatisticVector:
    """Evaluate one kind of statistic at every ``(margins, point)`` of the request."""
    if kind not in KINDS:
        raise InputError(f"unknown statistic kind {kind!r}")
    fn = empirical_stdf if kind in ("stdf", "theta") else empirical_tail_copula
    index = request.index
    if kind in ("theta", "chi"):
        index = [(m, tuple(1.0 for _ in m)) for m, _ in request.entries]
    vals = np.array([fn(sample, m, p, request.k) for m, p in index])
    return TailStatisticVector(vals, index, kind, {"k": request.k, "n": sample.n})
