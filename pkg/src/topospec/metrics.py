"""Empirical trajectory metrics: cumulative error, consensus decay, sensitivity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, ValidationError

D_FLOOR = 1e-9


@dataclass(frozen=True)
class TrialRecord:
    """One trial's Value trajectories.

    ``disagreement[t-1]`` is D_t for steps ``t = 1..T``.
    """

    truth: tuple
    estimate: tuple
    disagreement: tuple
    perturbed_final: Optional[float] = None
    categorical_disagreement: tuple = field(default=(), compare=True)

    def __post_init__(self):
        for name in ("truth", "estimate", "disagreement", "categorical_disagreement"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if len(self.truth) != len(self.estimate):
            raise ValidationError("truth and estimate must have equal length")
        if len(self.truth) < 2:
            raise ValidationError("a record needs at least one step")
        if len(self.disagreement) != len(self.truth) - 1:
            raise ValidationError("disagreement must have one entry per step t = 1..T")

    @property
    def steps(self) -> int:
        return len(self.truth) - 1

    def errors(self) -> np.ndarray:
        """Per-step |x*_t - x_t| for t = 1..T."""
        return np.abs(np.subtract(self.truth[1:], self.estimate[1:]))


def cumulative_error(rec: TrialRecord) -> float:
    return float(np.sum(rec.errors()))


def pairwise_disagreement(states: Sequence[float]) -> float:
    """Mean absolute difference over all ordered pairs i != j."""
    s = np.asarray(states, dtype=float)
    N = s.size
    if N < 2:
        raise DegenerateInputError("pairwise disagreement needs at least 2 agents")
    return float(np.abs(s[:, None] - s[None, :]).sum() / (N * (N - 1)))


def consensus_decay(D: Sequence[float], floor: float = D_FLOOR) -> float:
    """Mean of log(D_{t+1} / D_t), with D floored before the ratio."""
    d = np.maximum(np.asarray(D, dtype=float), floor)
    if d.size < 2:
        raise ValidationError("consensus decay needs at least 2 disagreement values")
    return float(np.mean(np.log(d[1:] / d[:-1])))


def perturbation_sensitivity(final_base: float, final_perturbed: float) -> float:
    if not (math.isfinite(final_base) and math.isfinite(final_perturbed)):
        raise ValidationError("final values must be finite")
    return abs(final_perturbed - final_base)
