"""Time-varying, reliability-weighted transition operators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EmptyNeighborhoodError, ValidationError
from .graph import DEFAULT_GAMMA, TransitionOp
from .spectral import condition_number, successor

LEAKY_SLOPE = 0.01


def leaky_relu(x, slope: float = LEAKY_SLOPE):
    return np.where(x >= 0, x, slope * x)


@dataclass(frozen=True, eq=False)
class DynOperator:
    """Inputs of one attention-weighted transition step.

    ``features`` is (n, d), ``projection`` is (d', d), ``attention`` has
    length 2 d'. ``neighborhoods`` is an (n, n) support mask: row ``i`` marks
    the agents ``i`` may draw from.
    """

    features: np.ndarray
    projection: np.ndarray
    attention: np.ndarray
    neighborhoods: np.ndarray
    reliabilities: np.ndarray
    beta: float = 1.0
    phi: Callable = np.log
    slope: float = LEAKY_SLOPE

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.features, dtype=float))
        W = np.atleast_2d(np.asarray(self.projection, dtype=float))
        a = np.asarray(self.attention, dtype=float).ravel()
        mask = np.asarray(self.neighborhoods) > 0
        r = np.asarray(self.reliabilities, dtype=float).ravel()
        n = h.shape[0]
        if W.shape[1] != h.shape[1]:
            raise ValidationError("projection width must match feature length")
        if a.size != 2 * W.shape[0]:
            raise ValidationError("attention vector must have length 2 * projected dim")
        if mask.shape != (n, n) or r.size != n:
            raise ValidationError("neighborhoods must be (n, n) and reliabilities length n")
        if np.any(r <= 0):
            raise ValidationError("reliabilities must be > 0")
        if self.beta < 0:
            raise ValidationError("beta must be >= 0")
        for name, val in (("features", h), ("projection", W), ("attention", a), ("neighborhoods", mask), ("reliabilities", r)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.features.shape[0]


def edge_scores(op: DynOperator) -> np.ndarray:
    """Unnormalized scores e_ij for every pair (masked entries are -inf)."""
    z = op.features @ op.projection.T  # (n, d')
    dp = z.shape[1]
    src = z @ op.attention[:dp]
    dst = z @ op.attention[dp:]
    e = leaky_relu(src[:, None] + dst[None, :], op.slope)
    e = e + op.beta * np.asarray(op.phi(op.reliabilities), dtype=float)[None, :]
    return np.where(op.neighborhoods, e, -np.inf)


def _kappa(M: np.ndarray) -> float:
    sv = np.linalg.svd(M, compute_uv=False)
    return float(sv[0] / sv[-1])


def dyn_transition(op: DynOperator, gamma: float = DEFAULT_GAMMA) -> TransitionOp:
    """Row softmax of the edge scores over each agent's neighborhood."""
    empty = np.flatnonzero(~op.neighborhoods.any(axis=1))
    if empty.size:
        raise EmptyNeighborhoodError(f"agent {int(empty[0])} has an empty neighborhood")
    e = edge_scores(op)
    e = e - e.max(axis=1, keepdims=True)
    w = np.where(op.neighborhoods, np.exp(e), 0.0)
    return TransitionOp(w / w.sum(axis=1, keepdims=True), gamma)


@dataclass(frozen=True, eq=False)
class DynSR:
    """Finite-horizon SR sequence; ``operators[t]`` is M^(t), t = 0..T."""

    horizon: int
    operators: tuple
    transitions: tuple
    gamma: float


def dyn_successor(ops: Sequence, gamma: Optional[float] = None) -> DynSR:
    """Backward recursion ``M^(t) = I + gamma P^(t) M^(t+1)`` from ``M^(T) = I``."""
    if len(ops) == 0:
        raise ValidationError("need at least one transition operator")
    Ps = [np.asarray(o.P if isinstance(o, TransitionOp) else o, dtype=float) for o in ops]
    if gamma is None:
        gamma = ops[0].gamma if isinstance(ops[0], TransitionOp) else DEFAULT_GAMMA
    n = Ps[0].shape[0]
    if any(P.shape != (n, n) for P in Ps):
        raise ValidationError("all operators must share one size")
    T = len(Ps)
    Ms = [None] * (T + 1)
    Ms[T] = np.eye(n)
    for t in range(T - 1, -1, -1):
        Ms[t] = np.eye(n) + gamma * Ps[t] @ Ms[t + 1]
    return DynSR(T, tuple(Ms), tuple(Ps), float(gamma))


@dataclass(frozen=True)
class DynReductions:
    instantaneous: tuple
    averaged: float
    worst_case: float


def dyn_reductions(dsr: DynSR) -> DynReductions:
    """Per-step kappa(M^(t)) for t < T, kappa of the time-averaged SR, and the sup."""
    inst = tuple(_kappa(M) for M in dsr.operators[:-1])
    P_bar = np.mean(dsr.transitions, axis=0)
    averaged = condition_number(successor(TransitionOp(P_bar / P_bar.sum(axis=1, keepdims=True), dsr.gamma)))
    return DynReductions(inst, averaged, max(inst))


@dataclass(frozen=True)
class OptimalWeights:
    analytic: np.ndarray = field(repr=True)
    softmax: np.ndarray = field(repr=True)


def min_variance_weights(sigmas_sq: Sequence[float]) -> np.ndarray:
    """Simplex weights minimizing sum(alpha_j^2 sigma_j^2): alpha proportional to 1/sigma^2."""
    s = np.asarray(sigmas_sq, dtype=float)
    if np.any(s <= 0):
        raise ValidationError("variances must be > 0")
    inv = 1.0 / s
    return inv / inv.sum()


def aggregator_variance(weights: Sequence[float], sigmas_sq: Sequence[float], systemic_var: float = 0.0) -> float:
    w = np.asarray(weights, dtype=float)
    return float(systemic_var + np.sum(w**2 * np.asarray(sigmas_sq, dtype=float)))


def optimal_weight_check(sigmas_sq: Sequence[float]) -> OptimalWeights:
    """Analytic inverse-variance weights next to the attention softmax.

    The softmax is evaluated for one aggregator over ``m`` neighbors with zero
    feature terms and ``beta * phi(r_j) = -log sigma_j^2``.
    """
    s = np.asarray(sigmas_sq, dtype=float)
    analytic = min_variance_weights(s)
    m = s.size
    n = m + 1
    mask = np.zeros((n, n), dtype=bool)
    mask[0, 1:] = True
    mask[1:, 0] = True
    op = DynOperator(
        features=np.zeros((n, 1)),
        projection=np.zeros((1, 1)),
        attention=np.zeros(2),
        neighborhoods=mask,
        reliabilities=np.concatenate([[1.0], 1.0 / s]),
        beta=1.0,
        phi=np.log,
    )
    P = dyn_transition(op).P
    return OptimalWeights(analytic, np.array(P[0, 1:]))


def operators_from_dict(d: dict, gamma: Optional[float] = None) -> list:
    """Operator sequence from a graph object carrying a ``steps`` array.

    Each step is either ``{"weights": [[...]]}`` (row-normalized as is) or
    ``{"reliabilities": [...], "beta": b}``, which reweights the base graph's
    support by the attention softmax with zero feature terms.
    """
    from .graph import graph_from_dict, row_normalize

    steps = d.get("steps")
    if not isinstance(steps, list) or not steps:
        raise ValidationError("'steps' must be a nonempty array")
    base = graph_from_dict({k: v for k, v in d.items() if k != "steps"})
    if gamma is None:
        gamma = base.gamma if base.gamma is not None else DEFAULT_GAMMA
    n = base.n
    ops = []
    for i, step in enumerate(steps):
        if not isinstance(step, dict):
            raise ValidationError(f"step {i} must be an object")
        if "weights" in step:
            g = graph_from_dict({"n": n, "weights": step["weights"]})
            ops.append(row_normalize(g, gamma))
        elif "reliabilities" in step:
            op = DynOperator(
                features=np.zeros((n, 1)),
                projection=np.zeros((1, 1)),
                attention=np.zeros(2),
                neighborhoods=base.adjacency > 0,
                reliabilities=step["reliabilities"],
                beta=float(step.get("beta", 1.0)),
            )
            ops.append(dyn_transition(op, gamma))
        else:
            raise ValidationError(f"step {i} needs 'weights' or 'reliabilities'")
    return ops


def load_operator_sequence(path, gamma: Optional[float] = None) -> list:
    import json
    from pathlib import Path

    from .errors import ParseError

    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return operators_from_dict(d, gamma)
