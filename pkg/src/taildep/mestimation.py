"""Minimum-distance (M-)estimation of parametric tail dependence models.

The criterion is ``Q(theta) = || sum_atoms w g(x) (L(x; theta) - L_hat(x)) ||_2``
over a finite weighted set of evaluation points, minimised by Nelder-Mead
started from the best points of a coarse grid over the parameter box.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .errors import InputError, ModeError, NumericError
from .estimators import empirical_stdf, preasymptotic_stdf
from .models import HuslerReiss, Logistic, ModelSpec
from .ranks import RankedSample

PARAMETRIC = {
    "logistic": lambda th: Logistic(float(th[0])),
    "hr_bivariate": lambda th: HuslerReiss(float(th[0])),
}


def weight_functions(preset: str, dim: int, s: int, T: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Vector-valued weight function ``g`` mapping ``(m, dim)`` points to ``(m, q)``.

    Presets: ``constant`` (``g = 1``), ``moments`` (1 and the first ``s`` coordinates),
    ``monomials`` (1 and every coordinate), ``boxes`` (1 and the indicator of ``[0, T/2]^dim``).
    """
    if preset == "constant":
        return lambda x: np.ones((x.shape[0], 1))
    if preset == "moments":
        cols = min(s, dim)
        return lambda x: np.column_stack([np.ones(x.shape[0]), x[:, :cols]])
    if preset == "monomials":
        return lambda x: np.column_stack([np.ones(x.shape[0]), x])
    if preset == "boxes":
        return lambda x: np.column_stack([np.ones(x.shape[0]), np.all(x <= T / 2, axis=1).astype(float)])
    raise InputError(f"unknown weight preset {preset!r}")


def grid_measure(per_axis: int, dim: int, T: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Atoms ``{(i_1 T/m, ..., i_dim T/m) : 1 <= i_j <= m}`` with equal weights summing to 1."""
    if per_axis < 1:
        raise InputError("grid needs at least one point per axis")
    axis = T * np.arange(1, per_axis + 1) / per_axis
    pts = np.array(list(itertools.product(axis, repeat=dim)))
    return pts, np.full(len(pts), 1.0 / len(pts))


@dataclass
class Criterion:
    """Weighted minimum-distance criterion for one parametric family.

    Parameters
    ----------
    family : {"logistic", "hr_bivariate"}
    bounds : sequence of (low, high)
        Box parameter space.
    atoms, weights : ndarray
        Discrete measure on ``[0, T]^dim``.
    k : int
    g : str or callable
        Weight preset name or a function ``(m, dim) -> (m, q)``.
    margins : sequence of int, optional
        0-based columns the criterion is evaluated on; all columns by default.
    """

    family: str
    bounds: Sequence[tuple[float, float]]
    atoms: np.ndarray
    weights: np.ndarray
    k: int
    g: Union[str, Callable] = "moments"
    T: float = 1.0
    margins: Optional[Sequence[int]] = None
    _G: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.family not in PARAMETRIC:
            raise InputError(f"no parametric fit for family {self.family!r}")
        self.bounds = [(float(lo), float(hi)) for lo, hi in self.bounds]
        if any(hi < lo for lo, hi in self.bounds):
            raise InputError(f"empty parameter box {self.bounds}")
        self.atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.atoms.shape[0],) or np.any(self.weights <= 0):
            raise InputError("need one positive weight per atom")
        if np.any(self.atoms < 0) or np.any(self.atoms > self.T):
            raise InputError(f"atoms must lie in [0, {self.T}]^d")
        g = self.g if callable(self.g) else weight_functions(self.g, self.atoms.shape[1], self.s, self.T)
        self._G = np.atleast_2d(np.asarray(g(self.atoms), dtype=float))
        if self._G.shape[1] < self.s:
            raise InputError(f"need at least s={self.s} weight functions, got {self._G.shape[1]}")

    @property
    def s(self) -> int:
        return len(self.bounds)

    @property
    def q(self) -> int:
        return self._G.shape[1]

    def model(self, theta) -> ModelSpec:
        return PARAMETRIC[self.family](np.atleast_1d(theta))

    def in_box(self, theta) -> bool:
        th = np.atleast_1d(theta)
        return all(lo - 1e-12 <= t <= hi + 1e-12 for t, (lo, hi) in zip(th, self.bounds))

    def model_values(self, theta) -> np.ndarray:
        mdl = self.model(theta)
        return np.array([mdl.stdf(x) for x in self.atoms])

    def target(self, source: Union[RankedSample, ModelSpec]) -> np.ndarray:
        """STDF values at the atoms: empirical for a sample, exact for a model (population mode)."""
        if isinstance(source, RankedSample):
            margins = list(self.margins) if self.margins is not None else list(range(source.d))
            if len(margins) != self.atoms.shape[1]:
                raise InputError(f"atoms are {self.atoms.shape[1]}-dimensional but {len(margins)} margins given")
            return np.array([empirical_stdf(source, margins, x, self.k) for x in self.atoms])
        return np.array([source.stdf(x) for x in self.atoms])

    def phi(self, theta) -> np.ndarray:
        """``sum_atoms w g(x) L(x; theta)``."""
        return self._G.T @ (self.weights * self.model_values(theta))

    def value(self, theta, target: np.ndarray) -> float:
        if not self.in_box(theta):
            raise InputError(f"theta={np.atleast_1d(theta).tolist()} outside {self.bounds}")
        r = self._G.T @ (self.weights * (self.model_values(theta) - target))
        return float(np.linalg.norm(r))


def criterion_value(criterion: Criterion, source: Union[RankedSample, ModelSpec, np.ndarray], theta) -> float:
    target = source if isinstance(source, np.ndarray) else criterion.target(source)
    return criterion.value(theta, target)


@dataclass
class FitResult:
    theta_hat: np.ndarray
    q_value: float
    eta: float
    trace: list
    converged: bool
    n_evaluations: int = 0

    def to_dict(self, include_trace: bool = False) -> dict:
        out = {
            "theta_hat": [float(t) for t in self.theta_hat],
            "q_value": self.q_value,
            "eta": self.eta,
            "converged": self.converged,
            "n_evaluations": self.n_evaluations,
        }
        if include_trace:
            out["trace"] = [{"theta": [float(t) for t in th], "q": q} for th, q in self.trace]
        return out


@dataclass
class OptimizerConfig:
    tol: float = 1e-6
    restarts: int = 5
    grid_per_axis: int = 9
    max_iter: int = 2000


def fit(criterion: Criterion, source: Union[RankedSample, ModelSpec], cfg: Optional[OptimizerConfig] = None) -> FitResult:
    """Approximate minimiser of the criterion over the parameter box."""
    cfg = cfg or OptimizerConfig()
    target = criterion.target(source)
    lo = np.array([b[0] for b in criterion.bounds])
    hi = np.array([b[1] for b in criterion.bounds])
    free = hi > lo
    trace: list = []

    def q_full(theta):
        v = criterion.value(theta, target)
        if not math.isfinite(v):
            raise NumericError(f"non-finite criterion at theta={list(theta)}")
        trace.append((np.array(theta, dtype=float), v))
        return v

    if not free.any():
        v = q_full(lo)
        return FitResult(lo.copy(), v, 0.0, trace, True, 1)

    def embed(z):
        th = lo.copy()
        th[free] = z
        return th

    def q_free(z):
        return q_full(embed(np.clip(z, lo[free], hi[free])))

    # coarse grid over the interior of the free box
    axes = [np.linspace(a, b, cfg.grid_per_axis + 2)[1:-1] for a, b in zip(lo[free], hi[free])]
    grid = np.array(list(itertools.product(*axes)))
    gvals = np.array([q_free(z) for z in grid])
    starts = grid[np.argsort(gvals, kind="stable")[: cfg.restarts]]

    best_eta, converged = math.inf, False
    best_run_val = math.inf
    for z0 in starts:
        res = minimize(q_free, z0, method="Nelder-Mead", bounds=list(zip(lo[free], hi[free])),
                       options={"xatol": cfg.tol, "fatol": cfg.tol, "maxiter": cfg.max_iter})
        fs = res.final_simplex[1]
        if res.fun < best_run_val:
            best_run_val = res.fun
            best_eta = float(fs.max() - fs.min())
            converged = bool(res.success)

    i_best = int(np.argmin([v for _, v in trace]))
    theta_hat, q_best = trace[i_best]
    return FitResult(theta_hat.copy(), float(q_best), best_eta, trace, converged, len(trace))


@dataclass
class Linearization:
    J: np.ndarray
    V: np.ndarray
    Z: np.ndarray
    z_mean: np.ndarray

    def leading_term(self, k: int) -> np.ndarray:
        """``k^(-1/2) sum_i (Z_i - E Z_i)``."""
        return (self.Z - self.z_mean).sum(axis=0) / math.sqrt(k)


def _step(theta: np.ndarray) -> np.ndarray:
    return 1e-4 * (1.0 + np.abs(theta))


def jacobian(criterion: Criterion, theta) -> np.ndarray:
    """``q x s`` Jacobian of ``phi`` by central differences."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    h = _step(theta)
    cols = []
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h[j]
        cols.append((criterion.phi(theta + e) - criterion.phi(theta - e)) / (2 * h[j]))
    return np.column_stack(cols)


def hessian_q2(criterion: Criterion, theta0) -> np.ndarray:
    """Hessian at ``theta0`` of ``theta -> ||phi(theta) - phi(theta0)||^2`` by central differences."""
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    ref = criterion.phi(theta0)

    def f(th):
        return float(np.sum((criterion.phi(th) - ref) ** 2))

    s = theta0.size
    h = _step(theta0)
    H = np.empty((s, s))
    f0 = f(theta0)
    for i in range(s):
        for j in range(i, s):
            ei = np.zeros(s)
            ej = np.zeros(s)
            ei[i], ej[j] = h[i], h[j]
            if i == j:
                H[i, i] = (f(theta0 + ei) - 2 * f0 + f(theta0 - ei)) / h[i] ** 2
            else:
                H[i, j] = H[j, i] = (f(theta0 + ei + ej) - f(theta0 + ei - ej)
                                     - f(theta0 - ei + ej) + f(theta0 - ei - ej)) / (4 * h[i] * h[j])
    return H


def linearization_pieces(criterion: Criterion, theta0, sample: RankedSample) -> Linearization:
    """Jacobian ``J``, Hessian ``V`` and the iid summands ``Z_i`` of the linear expansion at ``theta0``."""
    if sample.true_v is None:
        raise ModeError("linearization pieces need the true uniforms")
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    J = jacobian(criterion, theta0)
    V = hessian_q2(criterion, theta0)
    if not np.all(np.isfinite(V)) or np.linalg.matrix_rank(V, tol=1e-10 * max(1.0, np.abs(V).max())) < V.shape[0]:
        raise NumericError("Hessian of the population criterion is singular; the family is not identified by these atoms")
    A = 2.0 * np.linalg.solve(V, J.T)  # s x q

    mdl = criterion.model(theta0)
    n, k = sample.n, criterion.k
    margins = list(criterion.margins) if criterion.margins is not None else list(range(sample.d))
    v = sample.true_v[:, margins]
    G = criterion._G
    w = criterion.weights
    inner = np.zeros((n, criterion.q))
    mean_inner = np.zeros(criterion.q)
    for a, x in enumerate(criterion.atoms):
        fires = v < k * x / n
        grad = mdl.gradient(x) if np.any(x > 0) else np.zeros(x.size)
        term = fires.any(axis=1) - fires @ grad
        inner += np.outer(term, w[a] * G[a])
        expect = (k / n) * preasymptotic_stdf(mdl, None, x, n, k) - np.sum(grad * np.minimum(k * x / n, 1.0))
        mean_inner += w[a] * G[a] * expect
    return Linearization(J, V, inner @ A.T, A @ mean_inner)
