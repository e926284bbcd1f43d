"""Samplers with known tail dependence.

* ``sample_logistic``: the Gumbel extreme-value copula through a positive
  stable frailty drawn by the Chambers-Mallows-Stuck transform.
* ``sample_brown_resnick``: exact Brown-Resnick max-stable fields on a grid
  by the extremal-functions algorithm of Dombry, Engelke and Oesting (2016).

Both samplers work on fixed-size chunks of realizations, each chunk with its
own Philox stream keyed by ``(seed, chunk index)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from ._parallel import chunk_bounds, map_chunks, stream
from .errors import InputError, NumericError
from .models import BrownResnickField, Logistic
from .ranks import RankedSample, compute_ranks

logger = logging.getLogger(__name__)

CHUNK = 500
_ONE_MINUS = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class FieldGrid:
    """Integer grid ``{1..width} x {1..height}``; locations enumerated row by row, x fastest."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InputError(f"grid sides must be positive, got {self.width}x{self.height}")

    @classmethod
    def parse(cls, spec: str) -> "FieldGrid":
        try:
            w, h = (int(v) for v in str(spec).lower().split("x"))
        except ValueError:
            raise InputError(f"grid must look like WxH, got {spec!r}") from None
        return cls(w, h)

    @property
    def d(self) -> int:
        return self.width * self.height

    @property
    def locations(self) -> np.ndarray:
        ys, xs = np.mgrid[1:self.height + 1, 1:self.width + 1]
        return np.column_stack([xs.ravel(), ys.ravel()]).astype(float)

    def __str__(self):
        return f"{self.width}x{self.height}"


def frechet_to_uniform(z: np.ndarray) -> np.ndarray:
    """``V = 1 - F(Z)`` for unit Frechet ``Z``, clipped into the open unit interval."""
    v = -np.expm1(-1.0 / z)
    return np.clip(v, np.finfo(float).tiny, _ONE_MINUS)


def positive_stable(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Positive stable variables with Laplace transform ``exp(-t^alpha)`` (Chambers-Mallows-Stuck)."""
    if alpha == 1.0:
        return np.ones(size)
    u = rng.uniform(0.0, np.pi, size)
    w = rng.exponential(1.0, size)
    return (np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
            * (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha))


def _logistic_chunk(m: int, d: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    s = positive_stable(alpha, m, rng)
    e = rng.exponential(1.0, (m, d))
    # U = exp(-(E/S)^alpha), returned on the unit Frechet scale -1/log U
    return (s[:, None] / e) ** alpha


def sample_logistic(n: int, d: int, alpha: float, seed: int, threads: Optional[int] = None) -> RankedSample:
    """``n`` iid rows from the ``d``-variate Gumbel extreme-value copula.

    ``data`` holds unit Frechet margins, ``true_v`` the exact uniforms ``1 - U``.
    """
    Logistic(alpha)  # validates alpha
    if n < 2 or d < 1:
        raise InputError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    if seed < 0:
        raise InputError("seeds must be non-negative")
    z = np.empty((n, d))

    def work(a, b):
        z[a:b] = _logistic_chunk(b - a, d, alpha, stream(seed, a // CHUNK))

    map_chunks(work, chunk_bounds(n, CHUNK), threads)
    return compute_ranks(z, true_v=frechet_to_uniform(z))


def _cholesky(cov: np.ndarray, anchor: int) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * np.trace(cov) / cov.shape[0]
    try:
        return scipy.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]), lower=True)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(cov)
        raise NumericError(
            f"conditional covariance at anchor {anchor} is not positive definite "
            f"(min eigenvalue {eig.min():.3e}, jitter {jitter:.3e})"
        ) from None


@dataclass
class _Anchor:
    others: np.ndarray
    mean: np.ndarray
    chol: np.ndarray


def extremal_function_laws(model: BrownResnickField, locations: np.ndarray) -> list[_Anchor]:
    """Mean and Cholesky factor of ``log Y`` for the extremal function at each location.

    ``log Y(s) = W(s) - W(s_l) - gamma(s - s_l) / 2`` with ``W`` Gaussian with
    variogram ``gamma``; the coordinate at ``s_l`` is identically zero.
    """
    d = locations.shape[0]
    lags = locations[:, None, :] - locations[None, :, :]
    gam = model.variogram_lag(lags.reshape(-1, 2)).reshape(d, d)
    laws = []
    for l in range(d):
        others = np.delete(np.arange(d), l)
        g0 = gam[others, l]
        cov = 0.5 * (g0[:, None] + g0[None, :] - gam[np.ix_(others, others)])
        chol = _cholesky(cov, l) if d > 1 else np.zeros((0, 0))
        laws.append(_Anchor(others, -0.5 * g0, chol))
    return laws


def _brown_resnick_chunk(m: int, laws: list[_Anchor], rng: np.random.Generator) -> np.ndarray:
    d = len(laws)
    z = np.zeros((m, d))
    for l, law in enumerate(laws):
        arrival = rng.exponential(1.0, m)
        rows = np.arange(m)
        while True:
            zeta = 1.0 / arrival[rows]
            keep = zeta > z[rows, l]
            rows, zeta = rows[keep], zeta[keep]
            if rows.size == 0:
                break
            logy = np.zeros((rows.size, d))
            if d > 1:
                g = rng.standard_normal((rows.size, d - 1))
                logy[:, law.others] = law.mean + g @ law.chol.T
            cand = zeta[:, None] * np.exp(logy)
            # accept only functions that do not exceed the running maximum at earlier locations
            ok = np.all(cand[:, :l] < z[rows, :l], axis=1)
            acc = rows[ok]
            z[acc] = np.maximum(z[acc], cand[ok])
            arrival[rows] += rng.exponential(1.0, rows.size)
    return z


def sample_brown_resnick(n: int, grid: FieldGrid, beta: float, xi: float, sigma=((1.0, 0.0), (0.0, 1.0)),
                         seed: int = 0, method: str = "extremal_functions",
                         threads: Optional[int] = None) -> RankedSample:
    """``n`` exact realizations of a Brown-Resnick field on ``grid``.

    ``data`` holds the unit Frechet field values, ``true_v`` their exact uniforms.
    """
    if method != "extremal_functions":
        raise InputError(f"unknown simulation method {method!r}")
    if n < 2:
        raise InputError(f"need n >= 2, got {n}")
    if seed < 0:
        raise InputError("seeds must be non-negative")
    model = BrownResnickField(beta, xi, sigma)
    laws = extremal_function_laws(model, grid.locations)
    z = np.empty((n, grid.d))

    def work(a, b):
        z[a:b] = _brown_resnick_chunk(b - a, laws, stream(seed, a // CHUNK))

    map_chunks(work, chunk_bounds(n, CHUNK), threads)
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise NumericError("simulated field contains non-positive or non-finite values")
    return compute_ranks(z, true_v=frechet_to_uniform(z))
