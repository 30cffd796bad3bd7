"""Rank statistics used for topology comparisons."""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from .errors import DegenerateInputWarning, TieError, ValidationError


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size)
    xs = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def ordinal_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks, ties broken by position."""
    x = np.asarray(x, dtype=float)
    ranks = np.empty(x.size)
    ranks[np.argsort(x, kind="mergesort")] = np.arange(1, x.size + 1)
    return ranks


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> float:
    """Kruskal-Wallis H with the average-rank tie correction.

    Returns 0.0 with a :class:`DegenerateInputWarning` when every value is
    identical.
    """
    if len(groups) < 2:
        raise ValidationError("need at least two groups")
    arrays = [np.asarray(g, dtype=float).ravel() for g in groups]
    if any(a.size == 0 for a in arrays):
        raise ValidationError("every group must be nonempty")
    pooled = np.concatenate(arrays)
    N = pooled.size
    if np.all(pooled == pooled[0]):
        warnings.warn("all values identical; H is undefined, returning 0", DegenerateInputWarning, stacklevel=2)
        return 0.0
    ranks = average_ranks(pooled)
    h = 0.0
    start = 0
    for a in arrays:
        r = ranks[start:start + a.size]
        h += r.sum() ** 2 / a.size
        start += a.size
    h = 12.0 / (N * (N + 1)) * h - 3.0 * (N + 1)
    _, counts = np.unique(pooled, return_counts=True)
    correction = 1.0 - np.sum(counts**3 - counts) / (N**3 - N)
    return float(h / correction)


def spearman_rank(a: Sequence[float], b: Sequence[float], ties: str = "error") -> float:
    """Spearman correlation of two equally long sequences.

    ``ties="error"`` raises :class:`TieError` on tied values; ``"ordinal"``
    breaks ties by position, which is how three ordered topology means with
    a tied prediction are compared.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValidationError("need two 1-D sequences of equal length >= 2")
    if ties == "error":
        if np.unique(a).size != a.size or np.unique(b).size != b.size:
            raise TieError("tied values present")
        ra, rb = ordinal_ranks(a), ordinal_ranks(b)
    elif ties == "ordinal":
        ra, rb = ordinal_ranks(a), ordinal_ranks(b)
    elif ties == "average":
        ra, rb = average_ranks(a), average_ranks(b)
    else:
        raise ValueError(f"unknown ties mode {ties!r}")
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    denom = np.sqrt((ra @ ra) * (rb @ rb))
    if denom == 0:
        raise TieError("a sequence is constant")
    return float(np.clip(ra @ rb / denom, -1.0, 1.0))
