"""Analytic drift predictions under the affine-noise model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError

DISTRIBUTIONS = ("gaussian", "uniform")


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean per-agent Value noise.

    ``rho_c`` is the share of the variance drawn once per step and shared by
    every agent at that step.
    """

    sigma: float = 1.0
    rho_c: float = 0.0
    distribution: str = "gaussian"

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValidationError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 <= self.rho_c <= 1.0:
            raise ValidationError(f"rho_c must lie in [0, 1], got {self.rho_c}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValidationError(f"distribution must be one of {DISTRIBUTIONS}")
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "rho_c", float(self.rho_c))

    @property
    def systemic_sd(self) -> float:
        return self.sigma * math.sqrt(self.rho_c)

    @property
    def idiosyncratic_sd(self) -> float:
        return self.sigma * math.sqrt(1.0 - self.rho_c)


def _check_k(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.ndim != 1 or k.size == 0 or np.any(k < 1):
        raise ValidationError("k profile must be a nonempty sequence of counts >= 1")
    return k


def _check_rho_c(rho_c: float) -> None:
    if not 0.0 <= rho_c <= 1.0:
        raise ValidationError(f"rho_c must lie in [0, 1], got {rho_c}")


def predict_ceg(sigma: float, k: float, T: int, c: float = 1.0) -> float:
    """Expected cumulative error ``c * sigma * T**1.5 / sqrt(k)``."""
    if sigma < 0 or k < 1 or T < 1 or c <= 0:
        raise ValidationError("need sigma >= 0, k >= 1, T >= 1, c > 0")
    return c * sigma * T**1.5 / math.sqrt(k)


def fit_calibration(steps: Sequence[int], ceg_means: Sequence[float], sigma: float, k: float = 1.0) -> float:
    """Least-squares ``c`` for ``E_ceg ~ c * sigma * T**1.5 / sqrt(k)`` (no intercept)."""
    x = np.array([sigma * t**1.5 / math.sqrt(k) for t in steps])
    y = np.asarray(ceg_means, dtype=float)
    denom = float(x @ x)
    if denom == 0:
        raise DomainError("cannot calibrate at sigma = 0")
    return float(x @ y) / denom


def aggregated_variance(sigma: float, k: float, rho_c: float) -> float:
    """Variance of the mean of ``k`` agents' noise with shared fraction ``rho_c``."""
    _check_rho_c(rho_c)
    if k < 1:
        raise ValidationError("k must be >= 1")
    return sigma**2 / k * (1.0 + (k - 1.0) * rho_c)


def ratio_with_correlation(k: float, rho_c: float) -> float:
    """Chain-to-aggregated cumulative error ratio under correlated noise."""
    _check_rho_c(rho_c)
    if k < 1:
        raise ValidationError("k must be >= 1")
    return math.sqrt(k / (1.0 + (k - 1.0) * rho_c))


def infer_rho_c(observed_ratio: float, k: float) -> float:
    """Invert :func:`ratio_with_correlation` for ``rho_c``."""
    if k <= 1:
        raise DomainError("rho_c is not identifiable for k <= 1")
    top = math.sqrt(k)
    tol = 1e-12 * top
    if observed_ratio > top + tol:
        raise DomainError(f"ratio {observed_ratio} exceeds sqrt(k) = {top}; no rho_c >= 0 fits")
    if observed_ratio < 1.0 - tol:
        raise DomainError(f"ratio {observed_ratio} is below 1; no rho_c <= 1 fits")
    rho_c = (k / observed_ratio**2 - 1.0) / (k - 1.0)
    return min(1.0, max(0.0, rho_c))


def rho_tilde(rho: float, k) -> float:
    """Drift-corrected gain ``rho * sqrt(mean(1/k_i))``."""
    k = _check_k(k)
    return float(rho * math.sqrt(np.mean(1.0 / k)))


def rho_tilde_corr(rho: float, k, rho_c: float) -> float:
    """Drift-corrected gain with a systemic noise share ``rho_c``."""
    k = _check_k(k)
    _check_rho_c(rho_c)
    return float(rho * math.sqrt(np.mean((1.0 + (k - 1.0) * rho_c) / k)))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
