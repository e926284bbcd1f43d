"""Closed-form parametric stable tail dependence functions.

Every family exposes the STDF ``L``, its exact (right-hand) partial derivatives,
the Pickands function of bivariate margins and the extreme-value copula
``C(u) = exp(-L(-log u))``. The Brown-Resnick field is parametrised by an
anisotropic power variogram; its bivariate margins are Huesler-Reiss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ModelError

_SQRT2PI = math.sqrt(2.0 * math.pi)


def _phi(z: float) -> float:
    return math.exp(-0.5 * z * z) / _SQRT2PI


def _as_point(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size == 0:
        raise ModelError("evaluation point must be a non-empty vector")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ModelError(f"evaluation point must be finite and non-negative, got {x}")
    return x


class ModelSpec:
    """Base class of the parametric STDF families."""

    family: str = ""
    bivariate_only = False
    exchangeable = True

    def params(self) -> dict:
        raise NotImplementedError

    @property
    def theta(self) -> np.ndarray:
        return np.array(list(self.params().values()), dtype=float)

    def to_config(self) -> dict:
        return {"family": self.family, "parameters": self.params()}

    def _check_dim(self, x: np.ndarray):
        if self.bivariate_only and x.size != 2:
            raise ModelError(f"{self.family} is bivariate; got a {x.size}-dimensional point")

    # subclasses implement _stdf and _partial on validated points
    def stdf(self, x, margins: Optional[Sequence[int]] = None) -> float:
        x = _as_point(x)
        self._check_dim(x)
        if not np.any(x > 0):
            return 0.0
        return float(self._stdf(x))

    def partial(self, x, j: int, margins: Optional[Sequence[int]] = None) -> float:
        """Partial derivative in coordinate ``j`` (position within ``x``).

        Where ``L`` is not differentiable the right-hand derivative is returned.
        """
        x = _as_point(x)
        self._check_dim(x)
        if not 0 <= j < x.size:
            raise ModelError(f"coordinate {j} out of range for a {x.size}-point")
        return float(self._partial(x, j))

    def gradient(self, x, margins=None) -> np.ndarray:
        x = _as_point(x)
        return np.array([self.partial(x, j, margins) for j in range(x.size)])

    def pickands(self, t: float) -> float:
        """``A(t) = L(1 - t, t)``."""
        t = _check_t(t)
        return self.stdf([1.0 - t, t])

    def pickands_second(self, t: float) -> float:
        raise ModelError(f"{self.family}: no analytic second derivative of A")

    def ev_copula(self, u, margins=None) -> float:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(u < 0) or np.any(u > 1):
            raise ModelError("copula arguments must lie in [0, 1]")
        if np.any(u == 0):
            return 0.0
        return math.exp(-self.stdf(-np.log(u), margins))


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ModelError(f"Pickands argument must lie in [0, 1], got {t}")
    return t


@dataclass(frozen=True)
class Logistic(ModelSpec):
    """Symmetric logistic (Gumbel) model, ``L(x) = (sum_j x_j^(1/alpha))^alpha``."""

    alpha: float
    family = "logistic"

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ModelError(f"logistic alpha must lie in (0, 1], got {self.alpha}")

    def params(self):
        return {"alpha": float(self.alpha)}

    def _stdf(self, x):
        m = x.max()
        return m * np.sum((x / m) ** (1.0 / self.alpha)) ** self.alpha

    def _partial(self, x, j):
        if self.alpha == 1.0:
            return 1.0
        if not np.any(x > 0):
            return 1.0
        # homogeneity gives d_j L = (x_j / L)^(1/alpha - 1)
        return (x[j] / self._stdf(x)) ** (1.0 / self.alpha - 1.0)

    def pickands_second(self, t):
        t = _check_t(t)
        a = self.alpha
        if a == 1.0:
            return 0.0
        expo = 1.0 / a - 2.0
        if t in (0.0, 1.0):
            if expo > 0:
                return 0.0
            return (1.0 - a) / a if expo == 0 else math.inf
        s = (1.0 - t) ** (1.0 / a) + t ** (1.0 / a)
        return (1.0 - a) / a * (t * (1.0 - t)) ** expo * s ** (a - 2.0)

    def chi(self) -> float:
        """Pairwise tail correlation ``2 - 2^alpha``."""
        return 2.0 - 2.0 ** self.alpha


@dataclass(frozen=True)
class HuslerReiss(ModelSpec):
    """Bivariate Huesler-Reiss model with dependence parameter ``a > 0``.

    ``L(x1, x2) = x1 Phi(a/2 + log(x1/x2)/a) + x2 Phi(a/2 + log(x2/x1)/a)``.
    """

    a: float
    family = "hr_bivariate"
    bivariate_only = True

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ModelError(f"Huesler-Reiss parameter must be positive, got {self.a}")

    def params(self):
        return {"a": float(self.a)}

    def _stdf(self, x):
        x1, x2 = float(x[0]), float(x[1])
        # explicit limit branches guard the log ratio
        if x2 < 1e-300 * x1:
            return x1
        if x1 < 1e-300 * x2:
            return x2
        a = self.a
        lr = math.log(x1 / x2) / a
        return x1 * ndtr(a / 2 + lr) + x2 * ndtr(a / 2 - lr)

    def _partial(self, x, j):
        xj, xo = float(x[j]), float(x[1 - j])
        if xo < 1e-300 * xj or (xj == 0 and xo == 0):
            return 1.0
        if xj < 1e-300 * xo:
            return 0.0
        return float(ndtr(self.a / 2 + math.log(xj / xo) / self.a))

    def pickands_second(self, t):
        t = _check_t(t)
        if t in (0.0, 1.0):
            return 0.0
        a = self.a
        w1 = a / 2 + math.log((1.0 - t) / t) / a
        return _phi(w1) / (a * t * t * (1.0 - t))

    def chi(self) -> float:
        return 2.0 - 2.0 * float(ndtr(self.a / 2))


@dataclass(frozen=True)
class PerfectDependence(ModelSpec):
    """Complete tail dependence, ``L(x) = max_j x_j``. Not differentiable on ties."""

    family = "perfect_dependence"

    def params(self):
        return {}

    def _stdf(self, x):
        return x.max()

    def _partial(self, x, j):
        return 1.0 if x[j] >= x.max() else 0.0

    def pickands_second(self, t):
        _check_t(t)
        return 0.0


@dataclass(frozen=True)
class BrownResnickField(ModelSpec):
    """Brown-Resnick max-stable field with variogram ``beta * (h' Sigma^-1 h)^(xi/2)``.

    ``locations`` (an ``d x 2`` array) lets ``stdf`` take location indices as margins.
    """

    beta: float
    xi: float
    sigma: tuple = ((1.0, 0.0), (0.0, 1.0))
    locations: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    family = "brown_resnick_field"
    bivariate_only = True

    def __post_init__(self):
        if not (self.beta > 0):
            raise ModelError(f"beta must be positive, got {self.beta}")
        if not (0 < self.xi <= 2):
            raise ModelError(f"xi must lie in (0, 2], got {self.xi}")
        s = np.asarray(self.sigma, dtype=float)
        if s.shape != (2, 2) or not np.allclose(s, s.T):
            raise ModelError("Sigma must be a symmetric 2x2 matrix")
        if np.linalg.det(s) <= 0 or s[0, 0] <= 0:
            raise ModelError("Sigma must be positive definite")
        object.__setattr__(self, "sigma", tuple(map(tuple, s.tolist())))
        object.__setattr__(self, "_sigma_inv", np.linalg.inv(s))

    def params(self):
        return {"beta": float(self.beta), "xi": float(self.xi), "sigma": [list(r) for r in self.sigma]}

    @property
    def theta(self):
        return np.array([self.beta, self.xi], dtype=float)

    def variogram_lag(self, h) -> np.ndarray:
        """Variogram at lag(s) ``h`` of shape (2,) or (m, 2)."""
        h = np.asarray(h, dtype=float)
        q = np.einsum("...i,ij,...j->...", h, self._sigma_inv, h)
        q = np.maximum(q, 0.0)
        return self.beta * q ** (self.xi / 2)

    def variogram(self, s1, s2) -> float:
        return float(self.variogram_lag(np.asarray(s1, float) - np.asarray(s2, float)))

    def pair_model(self, s1, s2) -> HuslerReiss:
        g = self.variogram(s1, s2)
        if g == 0:
            raise ModelError("coincident locations have no Huesler-Reiss margin")
        return HuslerReiss(math.sqrt(g))

    def chi(self, s1, s2) -> float:
        return 2.0 - 2.0 * float(ndtr(math.sqrt(self.variogram(s1, s2)) / 2))

    def _pair(self, margins):
        if self.locations is None or margins is None or len(margins) != 2:
            raise ModelError("Brown-Resnick field needs two location indices and a location table")
        locs = np.asarray(self.locations, dtype=float)
        return self.pair_model(locs[margins[0]], locs[margins[1]])

    def stdf(self, x, margins=None):
        return self._pair(margins).stdf(x)

    def partial(self, x, j, margins=None):
        return self._pair(margins).partial(x, j)

    def pickands(self, t):
        raise ModelError("a field has no single bivariate margin; use pair_model(s1, s2)")

    pickands_second = pickands


FAMILIES = {
    "logistic": Logistic,
    "hr_bivariate": HuslerReiss,
    "perfect_dependence": PerfectDependence,
    "brown_resnick_field": BrownResnickField,
}


def model_from_config(cfg: dict) -> ModelSpec:
    """Build a model from ``{"family": ..., "parameters": {...}}``; Sigma is row-major."""
    fam = cfg.get("family", "").replace("-", "_")
    if fam == "brown_resnick":
        fam = "brown_resnick_field"
    if fam not in FAMILIES:
        raise ModelError(f"unknown family {cfg.get('family')!r}")
    params = dict(cfg.get("parameters", {}))
    if fam == "brown_resnick_field" and "sigma" in params:
        s = np.asarray(params["sigma"], dtype=float).reshape(2, 2)
        params["sigma"] = tuple(map(tuple, s.tolist()))
    try:
        return FAMILIES[fam](**params)
    except TypeError as exc:
        raise ModelError(str(exc)) from None


# functional aliases


def stdf(model: ModelSpec, margins, x) -> float:
    return model.stdf(x, margins)


def stdf_partial(model: ModelSpec, margins, x, j: int) -> float:
    return model.partial(x, j, margins)


def pickands(model: ModelSpec, t: float) -> float:
    return model.pickands(t)


def pickands_second(model: ModelSpec, t: float) -> float:
    return model.pickands_second(t)


def ev_copula(model: ModelSpec, u, margins=None) -> float:
    return model.ev_copula(u, margins)


def variogram(model: BrownResnickField, s1, s2) -> float:
    return model.variogram(s1, s2)


def brown_resnick_chi(model: BrownResnickField, s1, s2) -> float:
    return model.chi(s1, s2)
