"""Column-wise ranks and pseudo-observations shared by every estimator."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, SizeError

logger = logging.getLogger(__name__)

TIE_POLICIES = ("stable",)


@dataclass(frozen=True)
class RankedSample:
    """An ``n x d`` sample together with its per-column ranks.

    Attributes
    ----------
    data : ndarray, shape (n, d)
        Raw observations.
    ranks : ndarray of int, shape (n, d)
        Each column is a permutation of ``1..n``; the largest value has rank ``n``.
    true_v : ndarray, shape (n, d), optional
        True uniforms ``1 - F_j(X_ij)``. Only available for simulated data.
    n_ties : int
        Number of tied values that had to be broken when ranking.
    """

    data: np.ndarray
    ranks: np.ndarray
    true_v: Optional[np.ndarray] = None
    n_ties: int = 0
    _vhat: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.data, self.ranks, self.true_v):
            if arr is not None:
                arr.setflags(write=False)
        n = self.ranks.shape[0]
        vhat = 1.0 + 1.0 / n - self.ranks / n
        vhat.setflags(write=False)
        object.__setattr__(self, "_vhat", vhat)

    @property
    def n(self) -> int:
        return self.ranks.shape[0]

    @property
    def d(self) -> int:
        return self.ranks.shape[1]

    @property
    def vhat(self) -> np.ndarray:
        """Pseudo-observations ``1 + 1/n - R_ij/n``, all in ``[1/n, 1]``."""
        return self._vhat

    @property
    def has_truth(self) -> bool:
        return self.true_v is not None

    def subset(self, columns: Sequence[int]) -> "RankedSample":
        """Restrict to a subset of columns (0-based), keeping ranks as they are."""
        cols = list(columns)
        tv = None if self.true_v is None else self.true_v[:, cols].copy()
        return RankedSample(self.data[:, cols].copy(), self.ranks[:, cols].copy(), tv)


def _column_ranks(col: np.ndarray) -> tuple[np.ndarray, int]:
    order = np.argsort(col, kind="stable")
    ranks = np.empty(col.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, col.shape[0] + 1)
    sorted_col = col[order]
    ties = int(np.count_nonzero(sorted_col[1:] == sorted_col[:-1]))
    return ranks, ties


def compute_ranks(data, tie_policy: str = "stable", true_v=None) -> RankedSample:
    """Rank every column of ``data``.

    Ties are broken by order of first occurrence, so the earlier observation
    receives the smaller rank. A warning reports the number of ties.

    Parameters
    ----------
    data : array_like, shape (n, d)
    tie_policy : {"stable"}
    true_v : array_like, shape (n, d), optional
        True uniform margins, attached unchanged (simulation mode).
    """
    if tie_policy not in TIE_POLICIES:
        raise InputError(f"unknown tie policy {tie_policy!r}")
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InputError(f"data must be a 2-d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("data contains non-finite entries")
    n, d = x.shape
    if n < 2:
        raise SizeError(f"need at least 2 observations, got {n}")
    if d < 1:
        raise SizeError("need at least one column")

    ranks = np.empty((n, d), dtype=np.int64)
    n_ties = 0
    for j in range(d):
        ranks[:, j], t = _column_ranks(x[:, j])
        n_ties += t
    if n_ties:
        logger.warning("broke %d tied values by first occurrence", n_ties)

    tv = None
    if true_v is not None:
        tv = np.asarray(true_v, dtype=float)
        if tv.shape != x.shape:
            raise InputError(f"true_v shape {tv.shape} does not match data {x.shape}")
        if np.any(tv <= 0) or np.any(tv >= 1):
            raise InputError("true_v entries must lie in (0, 1)")
    return RankedSample(x, ranks, tv, n_ties)


def _has_header(first_line: str, delimiter: str) -> bool:
    for tok in first_line.split(delimiter):
        tok = tok.strip()
        if not tok:
            continue
        try:
            float(tok)
        except ValueError:
            return True
    return False


def read_matrix(path, delimiter: str = ",", header: Optional[bool] = None) -> tuple[np.ndarray, list[str]]:
    """Read a numeric CSV matrix; returns ``(values, column_names)``.

    ``header=None`` detects a header row by checking whether the first line parses as numbers.
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError(f"{path}: empty file")
    if header is None:
        header = _has_header(lines[0], delimiter)
    rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter=delimiter))
    names: list[str] = []
    if header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    try:
        values = np.array([[float(c) for c in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if values.ndim != 2 or (rows and any(len(r) != len(rows[0]) for r in rows)):
        raise InputError(f"{path}: ragged rows")
    if not names:
        names = [f"V{j + 1}" for j in range(values.shape[1])]
    return values, names


def write_matrix(path, values: np.ndarray, names: Optional[Sequence[str]] = None, delimiter: str = ","):
    """Write a matrix with 17 significant digits so that reading it back is lossless."""
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        if names is not None:
            fh.write(delimiter.join(names) + "\n")
        for row in values:
            fh.write(delimiter.join(format(v, ".17g") for v in row) + "\n")


def load_sample(path, delimiter: str = ",", header: Optional[bool] = None, true_v_path=None) -> RankedSample:
    data, _ = read_matrix(path, delimiter, header)
    tv = None
    if true_v_path is not None:
        tv, _ = read_matrix(true_v_path, delimiter, header)
    return compute_ranks(data, true_v=tv)
