"""Report assembly: diagnostics, triage rankings, simulation summaries."""

from __future__ import annotations

import csv
import io
import json
import platform
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import __version__, drift, graph, sim, spectral
from .errors import DegenerateInputWarning, TieError, ValidationError
from .graph import CommGraph

# Canonical column order; ordinal tie-breaks follow it.
ALL_TOPOLOGIES = ("chain", "mesh", "star")
K_PROFILES = ("literal", "per-step")

# metric -> (predictor, sign applied to the metric before ranking, tie mode)
CONSISTENCY_PAIRS = {
    "E_ceg": [("rho", 1), ("rho_tilde_literal", 1), ("rho_tilde_per_step", 1), ("predicted_ceg", 1)],
    # a larger gap predicts faster decay, i.e. a more negative R_cdr
    "R_cdr": [("gap", -1)],
    "F_ps": [("kappa", 1)],
}


@dataclass
class Report:
    topologies: list
    diagnostics: dict
    rankings: dict
    triage: list
    warnings: list
    provenance: dict
    simulation: Optional[dict] = None
    consistency: Optional[dict] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(**d)


def emit(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def parse(text: str) -> Report:
    return Report.from_dict(json.loads(text))


def _versions() -> dict:
    return {"topospec": __version__, "numpy": np.__version__, "python": platform.python_version()}


def _config_hash(d: dict) -> str:
    import hashlib

    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def snap(x: float) -> float:
    """Round to 9 significant digits so solver noise cannot split a tie."""
    return float(f"{x:.9g}")


def ranking(values: dict, order: Sequence[str]) -> list:
    """Names sorted ascending by value; ties keep ``order``."""
    return sorted(order, key=lambda name: (snap(values[name]), order.index(name)))


def graph_diagnostics(
    g: CommGraph,
    gamma: Optional[float] = None,
    rho_c: Optional[float] = None,
    sigma: float = 1.0,
    steps: int = 12,
    chain_convention: str = "shift",
) -> dict:
    sr = spectral.successor_for_graph(g, gamma, chain_convention)
    k_lit = graph.k_profile(g, "literal")
    k_step = graph.k_profile(g, "per-step")
    d_lit = spectral.diagnostics(sr, k_lit, rho_c)
    d_step = spectral.diagnostics(sr, k_step, rho_c)
    out = {
        "n": g.n,
        "gamma": sr.gamma,
        "rho": d_lit.rho,
        "gap": d_lit.gap,
        "kappa": d_lit.kappa,
        "rho_tilde_literal": d_lit.rho_tilde,
        "rho_tilde_per_step": d_step.rho_tilde,
        "k_literal": k_lit.tolist(),
        "k_per_step": k_step.tolist(),
        "predicted_ceg": drift.predict_ceg(sigma, float(k_step[0]), steps) if sigma > 0 else 0.0,
        "gap_is_lower_bound": bool(g.aggregators),
    }
    if rho_c is not None:
        out["rho_tilde_corr_literal"] = d_lit.rho_tilde_corr
        out["rho_tilde_corr_per_step"] = d_step.rho_tilde_corr
    if g.closure is not None:
        out["chain_convention"] = chain_convention
    return out


def _triage(diag: dict, order: Sequence[str], k_choice: str) -> list:
    kappa = {n: diag[n]["kappa"] for n in order}
    gap = {n: -diag[n]["gap"] for n in order}
    rt = {n: diag[n]["rho_tilde_" + k_choice.replace("-", "_")] for n in order}
    lower = [n for n in order if diag[n]["gap_is_lower_bound"]]
    return [
        {"step": 1, "metric": "kappa", "reads": "perturbation robustness", "best_first": ranking(kappa, list(order))},
        {
            "step": 2,
            "metric": "gap",
            "reads": "consensus speed",
            "best_first": ranking(gap, list(order)),
            "lower_bound_for": lower,
        },
        {
            "step": 3,
            "metric": "rho_tilde_" + k_choice.replace("-", "_"),
            "reads": "cumulative drift",
            "best_first": ranking(rt, list(order)),
        },
    ]


def diagnose(
    graphs: dict,
    gamma: Optional[float] = None,
    k_profile: str = "literal",
    rho_c: Optional[float] = None,
    sigma: float = 1.0,
    steps: int = 12,
    chain_convention: str = "shift",
) -> Report:
    """Analytic report for named graphs (insertion order is the column order)."""
    if not graphs:
        raise ValidationError("need at least one graph")
    if k_profile not in K_PROFILES:
        raise ValidationError(f"k-profile must be one of {K_PROFILES}")
    order = list(graphs)
    diag = {name: graph_diagnostics(g, gamma, rho_c, sigma, steps, chain_convention) for name, g in graphs.items()}
    keys = ["kappa", "gap", "rho", "rho_tilde_literal", "rho_tilde_per_step", "predicted_ceg"]
    rankings = {k: ranking({n: diag[n][k] for n in order}, order) for k in keys}
    warn = []
    for n in order:
        if diag[n]["gap_is_lower_bound"]:
            warn.append(f"{n}: contains aggregation nodes; gap is a lower bound on consensus speed")
    for prof in ("rho_tilde_literal", "rho_tilde_per_step"):
        if len(order) > 1 and rankings[prof][::-1][0] != rankings["predicted_ceg"][::-1][0]:
            warn.append(
                f"{prof} ranks {rankings[prof][-1]} highest but the cumulative-error predictor ranks "
                f"{rankings['predicted_ceg'][-1]} highest; rho_tilde is reported as defined, not repaired"
            )
    cfg = {
        "graphs": {n: graph.graph_to_dict(g) for n, g in graphs.items()},
        "gamma": gamma,
        "k_profile": k_profile,
        "rho_c": rho_c,
        "chain_convention": chain_convention,
    }
    prov = {"config_hash": _config_hash(cfg), "k_profile": k_profile, "versions": _versions(), "seed": None}
    return Report(
        topologies=order,
        diagnostics=diag,
        rankings=rankings,
        triage=_triage(diag, order, k_profile),
        warnings=warn,
        provenance=prov,
    )


def preset_graphs(names: Sequence[str], star_leaves: int = 4, mesh_n: int = 4, chain_n: int = 12) -> dict:
    out = {}
    for name in names:
        if name == "chain":
            out[name] = graph.make_chain(chain_n)
        elif name == "star":
            out[name] = graph.make_star(star_leaves)
        elif name == "mesh":
            out[name] = graph.make_mesh(mesh_n)
        else:
            raise ValidationError(f"unknown topology {name!r}")
    return out


def _consistency(diag: dict, batches: dict, order: list) -> tuple:
    out, warn = {}, []
    for metric, pairs in CONSISTENCY_PAIRS.items():
        groups = [batches[n].values(metric) for n in order]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateInputWarning)
            H = sim.kruskal_wallis(groups) if len(order) > 1 else None
        degenerate = any(issubclass(w.category, DegenerateInputWarning) for w in caught)
        if degenerate:
            warn.append(f"{metric}: all simulated values identical; H set to 0")
        means = [batches[n].summary[metric]["mean"] for n in order]
        rs = {}
        for pred, sign in pairs:
            p = [snap(diag[n][pred]) for n in order]
            obs = [snap(sign * m) for m in means]
            if len(order) < 2 or len(set(obs)) == 1 or len(set(p)) == 1:
                rs[pred] = None
                continue
            try:
                rs[pred] = sim.spearman_rank(p, obs)
            except TieError:
                rs[pred] = sim.spearman_rank(p, obs, ties="ordinal")
                warn.append(f"{metric} vs {pred}: tied values ranked by column order")
        out[metric] = {"H": H, "H_degenerate": degenerate, "spearman": rs}
    return out, warn


def simulate(
    base: sim.SimConfig,
    topologies: Sequence[str] = ALL_TOPOLOGIES,
    k_profile: str = "literal",
    workers: Optional[int] = None,
) -> Report:
    """Analytic diagnostics plus a Monte-Carlo batch per topology."""
    order = list(topologies)
    graphs = {}
    for name in order:
        agents = base.agents if base.topology == name else None
        if name == "chain":
            graphs[name] = graph.make_chain(base.steps if base.steps >= 2 else 2)
        elif name == "star":
            graphs[name] = graph.make_star(agents or sim.DEFAULT_AGENTS["star"])
        else:
            graphs[name] = graph.make_mesh(agents or sim.DEFAULT_AGENTS["mesh"])
    rep = diagnose(graphs, base.gamma, k_profile, base.noise.rho_c or None, base.noise.sigma, base.steps)
    batches = {}
    for name in order:
        cfg = sim.with_topology(base, name)
        batches[name] = sim.run_batch(cfg, workers)
    simulation = {
        name: {"summary": b.summary, "median_series": b.median_series, "agents": b.config.agents}
        for name, b in batches.items()
    }
    ratios = {}
    if "chain" in batches:
        chain_mean = batches["chain"].summary["E_ceg"]["mean"]
        for name in order:
            if name != "chain":
                m = batches[name].summary["E_ceg"]["mean"]
                ratios[f"chain/{name}"] = chain_mean / m if m > 0 else None
        if base.noise.sigma > 0:
            simulation["calibration_c"] = drift.fit_calibration([base.steps], [chain_mean], base.noise.sigma)
    simulation["E_ceg_ratios"] = ratios
    consistency, warn = _consistency(rep.diagnostics, batches, order)
    if base.noise.sigma == 0:
        warn.append("sigma = 0: simulated drift metrics are degenerate by construction")
    base_cfg = replace(base, topology="chain", agents=None).to_dict()
    base_cfg.pop("topology")
    base_cfg.pop("agents")
    prov_cfg = {"sim": base_cfg, "topologies": order, "k_profile": k_profile}
    rep.simulation = simulation
    rep.consistency = consistency
    rep.warnings = rep.warnings + warn
    rep.provenance = {
        "config_hash": _config_hash(prov_cfg),
        "k_profile": k_profile,
        "seed": base.seed,
        "versions": _versions(),
    }
    return rep


SWEEP_PARAMETERS = ("gamma", "sigma", "T", "k", "alpha", "rho_c")


def sweep(
    parameter: str,
    grid: Sequence[float],
    base: sim.SimConfig,
    topologies: Sequence[str] = ALL_TOPOLOGIES,
    workers: Optional[int] = None,
    leaves: int = 4,
) -> list:
    """One row per (grid point, topology)."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValidationError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")
    rows = []
    if parameter == "alpha":
        for a in grid:
            g = graph.make_malicious_star(leaves, float(a))
            sr = spectral.successor_for_graph(g, base.gamma)
            mu2 = spectral.mu_squared(leaves, float(a))
            rows.append({
                "alpha": float(a),
                "topology": "malicious_star",
                "mu_sq": mu2,
                "rho": spectral.spectral_radius(sr),
                "gap": spectral.spectral_gap(sr),
                "kappa": spectral.condition_number(sr),
                "kappa_bound": spectral.malicious_kappa_bound(leaves, base.gamma, mu2),
            })
        return rows
    if parameter == "gamma":
        for gmm in grid:
            for name, g in preset_graphs(topologies).items():
                d = graph_diagnostics(g, float(gmm))
                rows.append({
                    "gamma": float(gmm), "topology": name, "rho": d["rho"], "gap": d["gap"], "kappa": d["kappa"],
                    "rho_tilde_literal": d["rho_tilde_literal"], "rho_tilde_per_step": d["rho_tilde_per_step"],
                })
        return rows
    for v in grid:
        if parameter == "sigma":
            cfg = replace(base, noise=replace(base.noise, sigma=float(v)))
        elif parameter == "rho_c":
            cfg = replace(base, noise=replace(base.noise, rho_c=float(v)))
        elif parameter == "T":
            cfg = replace(base, steps=int(v))
        else:
            cfg = base
        for name in topologies:
            c = sim.with_topology(cfg, name)
            if parameter == "k" and name != "chain":
                c = replace(c, agents=int(v))
            b = sim.run_batch(c, workers)
            k_eff = c.agents
            rows.append({
                parameter: float(v) if parameter != "T" and parameter != "k" else int(v),
                "topology": name,
                "agents": c.agents,
                "E_ceg_mean": b.summary["E_ceg"]["mean"],
                "E_ceg_std": b.summary["E_ceg"]["std"],
                "R_cdr_mean": b.summary["R_cdr"]["mean"],
                "F_ps_mean": b.summary["F_ps"]["mean"],
                "predicted_ratio": drift.ratio_with_correlation(k_eff, c.noise.rho_c),
            })
    return rows


def rows_to_csv(rows: list) -> str:
    if not rows:
        return ""
    fields = list(rows[0])
    for r in rows[1:]:
        for k in r:
            if k not in fields:
                fields.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def format_table(report: Report) -> str:
    """Aligned plain-text view of a report."""
    cols = ["rho", "gap", "kappa", "rho_tilde_literal", "rho_tilde_per_step"]
    heads = ["topology", "rho", "gap", "kappa", "rho~ lit", "rho~ step"]
    lines = []
    rows = [[n] + [f"{report.diagnostics[n][c]:.2f}" for c in cols] for n in report.topologies]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(heads)]
    lines.append("  ".join(h.ljust(w) for h, w in zip(heads, widths)))
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    lines.append("")
    for t in report.triage:
        extra = f" (lower bound for: {', '.join(t['lower_bound_for'])})" if t.get("lower_bound_for") else ""
        lines.append(f"{t['step']}. {t['metric']} [{t['reads']}]: best first {', '.join(t['best_first'])}{extra}")
    if report.simulation:
        lines.append("")
        lines.append("simulated (mean +/- sd over trials)")
        for n in report.topologies:
            s = report.simulation[n]["summary"]
            parts = [f"{m} {s[m]['mean']:.3f} +/- {s[m]['std']:.3f}" for m in sim.METRICS]
            lines.append(f"  {n:<6} " + "  ".join(parts))
        for k, v in report.simulation.get("E_ceg_ratios", {}).items():
            lines.append(f"  E_ceg {k}: {v:.3f}" if v is not None else f"  E_ceg {k}: n/a")
    if report.consistency:
        lines.append("")
        for m, c in report.consistency.items():
            rs = ", ".join(f"{p}={v:+.2f}" if v is not None else f"{p}=n/a" for p, v in c["spearman"].items())
            h = f"{c['H']:.2f}" if c["H"] is not None else "n/a"
            lines.append(f"  {m}: H={h}  r_s: {rs}")
    if report.warnings:
        lines.append("")
        lines.extend(f"warning: {w}" for w in report.warnings)
    return "\n".join(lines) + "\n"
