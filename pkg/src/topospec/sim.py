"""Monte-Carlo simulation of chain, star and mesh pipelines.

Each agent applies the task rule and adds zero-mean noise to Value. A trial
pre-draws all of its noise, so the perturbed twin trajectory sees exactly
the same draws as the base trajectory.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import metrics
from .drift import NoiseSpec
from .errors import ValidationError
from .metrics import TrialRecord
from .stats import kruskal_wallis, spearman_rank  # noqa: F401  (re-exported)
from .task import DEFAULT_INITIAL, TaskState, new_level, new_parity, tau

TOPOLOGIES = ("chain", "star", "mesh")
AGGREGATORS = ("mean", "median")
RULES = ("exact", "identity")
METRICS = ("E_ceg", "R_cdr", "F_ps")
DEFAULT_AGENTS = {"chain": 1, "star": 4, "mesh": 4}
THREADS_ENV = "TOPOSPEC_THREADS"


@dataclass(frozen=True)
class SimConfig:
    """One (topology, condition) experiment.

    ``agents`` is the leaf count for the star and the peer count for the
    mesh; the chain always has one agent per step. ``mesh_round2_scale`` is
    the variance multiplier of the fresh noise added during the mesh's
    deliberation round. ``rule="identity"`` swaps the task rule for the
    identity map (a Lipschitz-1 surrogate that isolates pure noise drift).
    """

    topology: str = "chain"
    agents: Optional[int] = None
    steps: int = 12
    trials: int = 100
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    epsilon: float = 15.0
    seed: int = 0
    initial: TaskState = DEFAULT_INITIAL
    aggregator: str = "mean"
    gamma: float = 0.9
    mesh_round2_scale: float = 0.1
    p_flip: float = 0.0
    rule: str = "exact"

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValidationError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if self.aggregator not in AGGREGATORS:
            raise ValidationError(f"aggregator must be one of {AGGREGATORS}")
        if self.rule not in RULES:
            raise ValidationError(f"rule must be one of {RULES}")
        if self.trials < 1 or self.steps < 1:
            raise ValidationError("trials and steps must be >= 1")
        if self.epsilon < 0:
            raise ValidationError("epsilon must be >= 0")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("gamma must lie in [0, 1)")
        if self.mesh_round2_scale < 0:
            raise ValidationError("mesh_round2_scale must be >= 0")
        if not 0.0 <= self.p_flip <= 1.0:
            raise ValidationError("p_flip must lie in [0, 1]")
        agents = self.agents
        if self.topology == "chain":
            agents = 1
        elif agents is None:
            agents = DEFAULT_AGENTS[self.topology]
        elif agents < 2:
            raise ValidationError(f"{self.topology} needs at least 2 agents per step")
        object.__setattr__(self, "agents", int(agents))

    def to_dict(self) -> dict:
        return {
            "topology": self.topology,
            "agents": self.agents,
            "steps": self.steps,
            "trials": self.trials,
            "sigma": self.noise.sigma,
            "rho_c": self.noise.rho_c,
            "distribution": self.noise.distribution,
            "epsilon": float(self.epsilon),
            "seed": self.seed,
            "initial": self.initial.to_dict(),
            "aggregator": self.aggregator,
            "gamma": float(self.gamma),
            "mesh_round2_scale": float(self.mesh_round2_scale),
            "p_flip": float(self.p_flip),
            "rule": self.rule,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        noise = NoiseSpec(
            sigma=d.pop("sigma", 1.0),
            rho_c=d.pop("rho_c", 0.0),
            distribution=d.pop("distribution", "gaussian"),
        )
        if "initial" in d:
            d["initial"] = TaskState.from_dict(d["initial"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(noise=noise, **d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TrialBatch:
    config: SimConfig
    records: tuple
    summary: dict
    median_series: dict

    def values(self, metric: str) -> np.ndarray:
        return np.array([trial_metrics(r)[metric] for r in self.records])


def _standard_draws(rng: np.random.Generator, distribution: str, size) -> np.ndarray:
    if distribution == "gaussian":
        return rng.standard_normal(size)
    # unit-variance uniform
    a = np.sqrt(3.0)
    return rng.uniform(-a, a, size)


def _rule(cfg: SimConfig):
    return tau if cfg.rule == "exact" else (lambda s: s)


def run_agent(s: TaskState, noise: NoiseSpec, rng: np.random.Generator, systemic: Optional[float] = None) -> TaskState:
    """One noisy agent: ``tau(s)`` with noise added to Value.

    ``systemic`` is the step-shared component; it is drawn here when not
    supplied by the caller.
    """
    if systemic is None:
        systemic = noise.systemic_sd * _standard_draws(rng, noise.distribution, None)
    eta = systemic + noise.idiosyncratic_sd * _standard_draws(rng, noise.distribution, None)
    t = tau(s)
    return t.with_value(t.value + float(eta))


@dataclass
class _Draws:
    eta1: np.ndarray  # (T, k) total round-1 noise
    eta2: Optional[np.ndarray]  # (T, k) mesh round-2 noise
    flip_parity: Optional[np.ndarray]
    flip_level: Optional[np.ndarray]


def _draw_trial_noise(cfg: SimConfig, rng: np.random.Generator) -> _Draws:
    T, k = cfg.steps, cfg.agents
    nz = cfg.noise

    def composite(scale):
        b = _standard_draws(rng, nz.distribution, (T, 1))
        xi = _standard_draws(rng, nz.distribution, (T, k))
        return np.sqrt(scale) * (nz.systemic_sd * b + nz.idiosyncratic_sd * xi)

    eta1 = composite(1.0)
    eta2 = composite(cfg.mesh_round2_scale) if cfg.topology == "mesh" else None
    flip_parity = flip_level = None
    if cfg.p_flip > 0:
        flip_parity = rng.random((T, k)) < cfg.p_flip
        u = rng.random((T, k))
        flip_level = np.where(u < cfg.p_flip / 2, -1, np.where(u < cfg.p_flip, 1, 0))
    return _Draws(eta1, eta2, flip_parity, flip_level)


def _noisy(base: TaskState, eta: float, fp, fl) -> TaskState:
    parity = base.parity
    level = base.level
    if fp:
        parity = "B" if parity == "A" else "A"
    if fl:
        level = min(9, max(1, level + int(fl)))
    return TaskState(base.value + float(eta), parity, level)


def _agents_step(rule, s: TaskState, draws: _Draws, t: int) -> list:
    base = rule(s)
    k = draws.eta1.shape[1]
    fp = draws.flip_parity[t] if draws.flip_parity is not None else [False] * k
    fl = draws.flip_level[t] if draws.flip_level is not None else [0] * k
    return [_noisy(base, draws.eta1[t, i], fp[i], fl[i]) for i in range(k)]


def _majority(items):
    ranked = Counter(items).most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return None
    return ranked[0][0]


def judge(proposals: list, current: TaskState, aggregator: str = "mean") -> TaskState:
    """Deterministic aggregation of agent proposals into one state.

    Value is the mean (or median) of the proposals. Parity and Level go by
    strict majority; on a tie they are recomputed from the aggregated Value
    with the Rule 2 / Rule 3 thresholds applied to ``current``.
    """
    values = [p.value for p in proposals]
    v = float(np.mean(values)) if aggregator == "mean" else float(np.median(values))
    parity = _majority(p.parity for p in proposals)
    if parity is None:
        parity = new_parity(v)
    level = _majority(p.level for p in proposals)
    if level is None:
        level = new_level(current.level, v, parity)
    return TaskState(v, parity, level)


def _categorical_disagreement(states: list) -> float:
    n = len(states)
    bad = sum(
        1
        for i in range(n)
        for j in range(n)
        if i != j and (states[i].parity != states[j].parity or states[i].level != states[j].level)
    )
    return bad / (n * (n - 1))


def _run_path(cfg: SimConfig, draws: _Draws, start: TaskState, truth: list):
    """Returns (estimates, disagreement, categorical disagreement)."""
    rule = _rule(cfg)
    est = [start]
    D, C = [], []
    agg = cfg.aggregator
    for t in range(cfg.steps):
        s = est[-1]
        props = _agents_step(rule, s, draws, t)
        if cfg.topology == "chain":
            nxt = props[0]
            D.append(abs(truth[t + 1].value - nxt.value))
            C.append(float(nxt.parity != truth[t + 1].parity or nxt.level != truth[t + 1].level))
        elif cfg.topology == "star":
            D.append(metrics.pairwise_disagreement([p.value for p in props]))
            C.append(_categorical_disagreement(props))
            nxt = judge(props, s, agg)
        else:
            vals = [p.value for p in props]
            centre = float(np.mean(vals)) if agg == "mean" else float(np.median(vals))
            revised = [
                TaskState(centre + float(draws.eta2[t, i]), p.parity, p.level) for i, p in enumerate(props)
            ]
            D.append(metrics.pairwise_disagreement([r.value for r in revised]))
            C.append(_categorical_disagreement(revised))
            nxt = judge(revised, s, agg)
        est.append(nxt)
    return est, D, C


def _truth(cfg: SimConfig, start: TaskState) -> list:
    rule = _rule(cfg)
    out = [start]
    for _ in range(cfg.steps):
        out.append(rule(out[-1]))
    return out


def _trial(cfg: SimConfig, rng: np.random.Generator) -> TrialRecord:
    draws = _draw_trial_noise(cfg, rng)
    truth = _truth(cfg, cfg.initial)
    est, D, C = _run_path(cfg, draws, cfg.initial, truth)
    perturbed_start = cfg.initial.with_value(cfg.initial.value + cfg.epsilon)
    twin, _, _ = _run_path(cfg, draws, perturbed_start, truth)
    return TrialRecord(
        truth=[s.value for s in truth],
        estimate=[s.value for s in est],
        disagreement=D,
        perturbed_final=twin[-1].value,
        categorical_disagreement=C,
    )


def run_chain_trial(cfg: SimConfig, rng: np.random.Generator) -> TrialRecord:
    if cfg.topology != "chain":
        raise ValidationError("run_chain_trial needs a chain config")
    return _trial(cfg, rng)


def run_star_trial(cfg: SimConfig, rng: np.random.Generator) -> TrialRecord:
    if cfg.topology != "star":
        raise ValidationError("run_star_trial needs a star config")
    return _trial(cfg, rng)


def run_mesh_trial(cfg: SimConfig, rng: np.random.Generator) -> TrialRecord:
    if cfg.topology != "mesh":
        raise ValidationError("run_mesh_trial needs a mesh config")
    return _trial(cfg, rng)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one trial, a function of (seed, index) only."""
    return np.random.default_rng([seed, index])


def run_trial(cfg: SimConfig, index: int) -> TrialRecord:
    return _trial(cfg, trial_rng(cfg.seed, index))


def trial_metrics(rec: TrialRecord) -> dict:
    return {
        "E_ceg": metrics.cumulative_error(rec),
        "R_cdr": metrics.consensus_decay(rec.disagreement) if rec.steps >= 2 else 0.0,
        "F_ps": metrics.perturbation_sensitivity(rec.estimate[-1], rec.perturbed_final),
    }


def _run_chunk(args):
    cfg, indices = args
    return [run_trial(cfg, i) for i in indices]


def resolve_workers(workers: Optional[int] = None) -> int:
    cap = os.environ.get(THREADS_ENV)
    w = 1 if workers is None else int(workers)
    if cap:
        w = min(w if workers is not None else int(cap), int(cap))
    return max(1, w)


def run_batch(cfg: SimConfig, workers: Optional[int] = None) -> TrialBatch:
    """Run ``cfg.trials`` trials; output does not depend on ``workers``."""
    w = resolve_workers(workers)
    idx = list(range(cfg.trials))
    if w == 1 or cfg.trials < 2 * w:
        records = [run_trial(cfg, i) for i in idx]
    else:
        chunks = [idx[j::w] for j in range(w)]
        with ProcessPoolExecutor(max_workers=w) as pool:
            parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
        records = [None] * cfg.trials
        for c, recs in zip(chunks, parts):
            for i, r in zip(c, recs):
                records[i] = r
    return summarize(cfg, records)


def summarize(cfg: SimConfig, records) -> TrialBatch:
    records = tuple(records)
    per = [trial_metrics(r) for r in records]
    summary = {}
    for m in METRICS:
        v = np.array([p[m] for p in per])
        summary[m] = {"mean": float(v.mean()), "std": float(v.std())}
    errs = np.array([r.errors() for r in records])
    D = np.array([r.disagreement for r in records])
    median_series = {
        "error": np.median(errs, axis=0).tolist(),
        "cumulative_error": np.median(np.cumsum(errs, axis=1), axis=0).tolist(),
        "disagreement": np.median(D, axis=0).tolist(),
    }
    return TrialBatch(cfg, records, summary, median_series)


def with_topology(cfg: SimConfig, topology: str) -> SimConfig:
    return replace(cfg, topology=topology, agents=None if topology != cfg.topology else cfg.agents)
