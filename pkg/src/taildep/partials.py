"""Finite-difference estimates of the partial derivatives of the STDF."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import BandwidthError, InputError
from .estimators import empirical_stdf
from .ranks import RankedSample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandwidthRule:
    """Either a fixed bandwidth (``mode="explicit"``) or ``c * (log(p + k) / k)^(1/4)``."""

    mode: str = "auto"
    h: float | None = None
    c: float = 1.0

    def __post_init__(self):
        if self.mode not in ("explicit", "auto"):
            raise InputError(f"unknown bandwidth mode {self.mode!r}")
        if self.mode == "explicit" and (self.h is None or not self.h > 0):
            raise BandwidthError(f"explicit bandwidth must be positive, got {self.h}")
        if self.mode == "auto" and not self.c > 0:
            raise BandwidthError(f"bandwidth coefficient must be positive, got {self.c}")

    @classmethod
    def parse(cls, spec) -> "BandwidthRule":
        """``"auto"``, ``"auto:0.8"`` or a number."""
        if isinstance(spec, BandwidthRule):
            return spec
        if spec is None or spec == "auto":
            return cls()
        if isinstance(spec, str) and spec.startswith("auto:"):
            return cls("auto", c=float(spec[5:]))
        return cls("explicit", h=float(spec))

    def base(self, p: int, k: int) -> float:
        if self.mode == "explicit":
            return float(self.h)
        return self.c * (math.log(p + k) / k) ** 0.25

    def window(self, p: int, k: int, c_low: float = 1.0, c_high: float = 1.0) -> tuple[float, float]:
        """Admissible range ``[c_low (log(p+k)/k)^(1/2), c_high (log(p+k)/k)^(1/4)]``."""
        r = math.log(p + k) / k
        return c_low * r ** 0.5, c_high * r ** 0.25

    def at(self, xj: float, p: int, k: int) -> float:
        """Bandwidth used at a coordinate of size ``xj``.

        In auto mode an ``h >= xj`` is shrunk to ``xj / 2``; an explicit ``h >= xj`` is an error.
        """
        h = self.base(p, k)
        if h < xj:
            return h
        if self.mode == "explicit":
            raise BandwidthError(f"bandwidth {h} is not below coordinate {xj}")
        return xj / 2.0


def partial_hat(sample: RankedSample, margins, x, j: int, k: int, h: float) -> float:
    """Central difference of the empirical STDF in coordinate ``j`` (position within ``margins``), capped at 1."""
    x = np.asarray(x, dtype=float)
    if not 0 <= j < x.size:
        raise InputError(f"coordinate {j} is not among the margins")
    if not h > 0:
        raise BandwidthError(f"bandwidth must be positive, got {h}")
    if h >= x[j]:
        raise BandwidthError(f"bandwidth {h} must be smaller than x_j = {x[j]}")
    up = x.copy()
    up[j] += h
    lo = x.copy()
    lo[j] -= h
    diff = empirical_stdf(sample, margins, up, k) - empirical_stdf(sample, margins, lo, k)
    return min(diff / (2.0 * h), 1.0)
