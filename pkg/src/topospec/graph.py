"""Communication graphs: construction, file I/O and row normalization."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError, ValidationError, ZeroRowError

DEFAULT_GAMMA = 0.9
ROW_SUM_TOL = 1e-12

# terminal agent of a chain closed with a self-loop so its row can be normalized
TERMINAL_SELF_LOOP = "terminal_self_loop"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CommGraph:
    """Directed weighted agent graph.

    ``adjacency[i, j]`` is the weight of the channel from agent ``i`` to
    agent ``j``. ``aggregators`` lists nodes that act as explicit aggregation
    operators (judges, votes); ``k_step`` is the number of proposals merged
    per pipeline step when the topology is run.
    """

    adjacency: np.ndarray
    labels: Optional[tuple] = None
    gamma: Optional[float] = None
    aggregators: tuple = ()
    kind: str = "custom"
    closure: Optional[str] = None
    k_step: Optional[int] = None

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ValidationError(f"adjacency must be a nonempty square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValidationError("adjacency contains non-finite entries")
        if np.any(A < 0):
            i, j = np.argwhere(A < 0)[0]
            raise ValidationError(f"negative weight {A[i, j]} at ({i}, {j})")
        zero = np.flatnonzero(A.sum(axis=1) <= 0)
        if zero.size:
            raise ZeroRowError(f"agent {int(zero[0])} has no outgoing channel (row sums to 0)")
        n = A.shape[0]
        object.__setattr__(self, "adjacency", _frozen(A))
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != n:
                raise ValidationError(f"expected {n} labels, got {len(labels)}")
            object.__setattr__(self, "labels", labels)
        if self.gamma is not None:
            g = float(self.gamma)
            if not 0.0 <= g < 1.0:
                raise ValidationError(f"gamma must lie in [0, 1), got {g}")
            object.__setattr__(self, "gamma", g)
        aggs = tuple(int(i) for i in self.aggregators)
        if any(not 0 <= i < n for i in aggs):
            raise ValidationError(f"aggregator index out of range for n={n}: {aggs}")
        object.__setattr__(self, "aggregators", aggs)
        if self.k_step is not None and int(self.k_step) < 1:
            raise ValidationError("k_step must be >= 1")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CommGraph):
            return NotImplemented
        return (
            np.array_equal(self.adjacency, other.adjacency)
            and self.labels == other.labels
            and self.gamma == other.gamma
            and self.aggregators == other.aggregators
            and self.kind == other.kind
            and self.closure == other.closure
            and self.k_step == other.k_step
        )

    def __hash__(self):
        return hash((self.adjacency.tobytes(), self.labels, self.gamma, self.aggregators, self.kind))

    def name(self) -> str:
        return self.kind if self.kind != "custom" else f"graph{self.n}"


@dataclass(frozen=True, eq=False)
class TransitionOp:
    P: np.ndarray
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValidationError(f"P must be square, got shape {P.shape}")
        if np.any(P < 0) or np.any(P > 1):
            raise ValidationError("entries of P must lie in [0, 1]")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValidationError("P is not row-stochastic")
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError(f"gamma must lie in [0, 1), got {self.gamma}")
        object.__setattr__(self, "P", _frozen(P))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TransitionOp):
            return NotImplemented
        return self.gamma == other.gamma and np.array_equal(self.P, other.P)


def row_normalize(graph: CommGraph, gamma: Optional[float] = None) -> TransitionOp:
    """``P_ij = A_ij / sum_k A_ik``.

    ``gamma`` falls back to the graph's own value, then to 0.9.
    """
    A = graph.adjacency
    rows = A.sum(axis=1)
    if np.any(rows <= 0):
        raise ZeroRowError(f"agent {int(np.flatnonzero(rows <= 0)[0])} has no outgoing channel")
    P = A / rows[:, None]
    if gamma is None:
        gamma = graph.gamma if graph.gamma is not None else DEFAULT_GAMMA
    return TransitionOp(P, gamma)


def make_chain(n: int) -> CommGraph:
    """Upper shift on ``n`` agents, last agent closed with a self-loop."""
    if n < 2:
        raise ValueError("a chain needs n >= 2")
    A = np.eye(n, k=1)
    A[-1, -1] = 1.0
    return CommGraph(A, kind="chain", closure=TERMINAL_SELF_LOOP, k_step=1)


def make_star(leaves: int) -> CommGraph:
    """Center (node 0) linked both ways to every leaf with unit weight."""
    return make_malicious_star(leaves, 1.0, kind="star")


def make_mesh(n: int) -> CommGraph:
    if n < 2:
        raise ValueError("a mesh needs n >= 2")
    A = np.ones((n, n)) - np.eye(n)
    return CommGraph(A, kind="mesh", aggregators=tuple(range(n)), k_step=n)


def make_malicious_star(leaves: int, alpha: float, kind: str = "malicious_star") -> CommGraph:
    """Star whose center weights leaf 1 by ``alpha`` and every other leaf by 1."""
    if leaves < 2:
        raise ValueError("a star needs at least 2 leaves")
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    n = leaves + 1
    A = np.zeros((n, n))
    A[0, 1:] = 1.0
    A[0, 1] = float(alpha)
    A[1:, 0] = 1.0
    if alpha == 1:
        kind = "star"
    return CommGraph(A, kind=kind, aggregators=(0,), k_step=leaves)


def in_degree(graph: CommGraph) -> np.ndarray:
    """Number of incoming channels per node, self-loops excluded."""
    A = graph.adjacency.copy()
    np.fill_diagonal(A, 0.0)
    return (A > 0).sum(axis=0)


def k_profile(graph: CommGraph, mode: str = "literal") -> np.ndarray:
    """Per-agent aggregation counts.

    ``literal``: in-degree at aggregator nodes, 1 elsewhere.
    ``per-step``: the topology's per-step aggregation count at every node.
    """
    n = graph.n
    if mode == "literal":
        k = np.ones(n, dtype=int)
        deg = in_degree(graph)
        for i in graph.aggregators:
            k[i] = max(1, int(deg[i]))
        return k
    if mode == "per-step":
        if graph.k_step is not None:
            step = graph.k_step
        else:
            step = int(k_profile(graph, "literal").max())
        return np.full(n, step, dtype=int)
    raise ValueError(f"unknown k-profile mode {mode!r}; expected 'literal' or 'per-step'")


PRESETS = ("chain", "star", "mesh", "malicious_star")


def make_preset(name: str, n: Optional[int] = None, leaves: Optional[int] = None, alpha: float = 1.0) -> CommGraph:
    """Canonical topology by name with the default sizes (chain 12, star 4 leaves, mesh 4)."""
    if name == "chain":
        return make_chain(12 if n is None else n)
    if name == "star":
        return make_star(4 if leaves is None else leaves)
    if name == "mesh":
        return make_mesh(4 if n is None else n)
    if name == "malicious_star":
        return make_malicious_star(4 if leaves is None else leaves, alpha)
    raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")


def graph_from_dict(d: dict) -> CommGraph:
    if not isinstance(d, dict):
        raise ParseError("graph file must hold an object at top level")
    if "preset" in d:
        try:
            g = make_preset(
                d["preset"],
                n=d.get("n"),
                leaves=d.get("leaves"),
                alpha=float(d.get("alpha", 1.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc)) from exc
        if "gamma" in d or "labels" in d:
            g = CommGraph(
                g.adjacency, labels=d.get("labels"), gamma=d.get("gamma"),
                aggregators=g.aggregators, kind=g.kind, closure=g.closure, k_step=g.k_step,
            )
        return g
    try:
        n = d["n"]
        weights = d["weights"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}") from exc
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ParseError(f"'n' must be a positive integer, got {n!r}")
    if not isinstance(weights, list) or not all(isinstance(r, list) for r in weights):
        raise ParseError("'weights' must be an array of arrays")
    if len(weights) != n or any(len(r) != n for r in weights):
        raise ValidationError(f"'weights' must be {n}x{n}")
    try:
        A = np.array(weights, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric weight: {exc}") from exc
    return CommGraph(
        A,
        labels=d.get("labels"),
        gamma=d.get("gamma"),
        aggregators=tuple(d.get("aggregators", ())),
        kind=d.get("kind", "custom"),
        closure=d.get("closure"),
        k_step=d.get("k_step"),
    )


def graph_to_dict(g: CommGraph) -> dict:
    d = {"n": g.n, "weights": g.adjacency.tolist()}
    if g.labels is not None:
        d["labels"] = list(g.labels)
    if g.gamma is not None:
        d["gamma"] = g.gamma
    if g.aggregators:
        d["aggregators"] = list(g.aggregators)
    if g.kind != "custom":
        d["kind"] = g.kind
    if g.closure is not None:
        d["closure"] = g.closure
    if g.k_step is not None:
        d["k_step"] = g.k_step
    return d


def load_graph(path) -> CommGraph:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        return graph_from_dict(d)
    except (ParseError, ValidationError) as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def save_graph(g: CommGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=2) + "\n", encoding="utf-8")
