"""Command-line front end: ``topospec diagnose | simulate | sweep``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import graph, report, sim
from .drift import NoiseSpec
from .errors import ParseError, TopospecError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _topologies(spec: list) -> dict:
    """Resolve ``--topology`` values into named graphs."""
    out = {}
    for item in spec:
        if item == "all":
            out.update(report.preset_graphs(report.ALL_TOPOLOGIES))
        elif item.startswith("file:"):
            path = item[len("file:"):]
            g = graph.load_graph(path)
            out[Path(path).stem] = g
        elif item in ("chain", "star", "mesh"):
            out.update(report.preset_graphs([item]))
        else:
            raise ValidationError(f"unknown topology {item!r}")
    return out


def _sim_topologies(spec: list) -> list:
    names = []
    for item in spec:
        if item == "all":
            names.extend(report.ALL_TOPOLOGIES)
        elif item in sim.TOPOLOGIES:
            names.append(item)
        else:
            raise ValidationError(f"simulation supports chain, star, mesh or all, got {item!r}")
    return list(dict.fromkeys(names))


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _sim_config(args) -> tuple:
    """Merge config file and flags; flags win. Returns (SimConfig, topologies, k_profile)."""
    d = _load_config(getattr(args, "config", None))
    topologies = d.pop("topologies", None)
    k_profile = d.pop("k_profile", "literal")
    flag_map = {
        "gamma": "gamma", "sigma": "sigma", "rho_c": "rho_c", "epsilon": "epsilon",
        "n_trials": "trials", "steps": "steps", "seed": "seed", "aggregator": "aggregator",
        "rule": "rule", "distribution": "distribution",
    }
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    d.setdefault("trials", 100)
    if args.k_profile is not None:
        k_profile = args.k_profile
    if args.topology:
        topologies = _sim_topologies(args.topology)
    elif topologies is None:
        topologies = list(report.ALL_TOPOLOGIES)
    d.setdefault("topology", topologies[0])
    return sim.SimConfig.from_dict(d), topologies, k_profile


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_diagnose(args) -> int:
    graphs = _topologies(args.topology or ["all"])
    rep = report.diagnose(
        graphs,
        gamma=args.gamma,
        k_profile=args.k_profile or "literal",
        rho_c=args.rho_c,
        chain_convention=args.chain_convention,
    )
    _emit(rep, args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg, topologies, k_profile = _sim_config(args)
    rep = report.simulate(cfg, topologies, k_profile, workers=args.workers)
    _emit(rep, args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, topologies, _ = _sim_config(args)
    grid = [float(x) for x in args.grid.split(",") if x.strip()]
    if not grid:
        raise ValidationError("empty grid")
    rows = report.sweep(args.parameter, grid, cfg, topologies, workers=args.workers, leaves=args.leaves)
    _write(report.rows_to_csv(rows), args.out)
    return EXIT_OK


def _emit(rep, args) -> None:
    if args.format == "json":
        _write(report.emit(rep), args.out)
    else:
        _write(report.format_table(rep), args.out)


def _common(p: argparse.ArgumentParser, sim_flags: bool) -> None:
    p.add_argument("--topology", action="append", help="chain, star, mesh, all or file:<path>; repeatable")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--rho-c", dest="rho_c", type=float, default=None)
    p.add_argument("--k-profile", dest="k_profile", choices=report.K_PROFILES, default=None)
    p.add_argument("--out", default=None, help="write output here instead of stdout")
    if sim_flags:
        p.add_argument("config", nargs="?", default=None, help="JSON simulation config")
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--n-trials", dest="n_trials", type=int, default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--aggregator", choices=sim.AGGREGATORS, default=None)
        p.add_argument("--rule", choices=sim.RULES, default=None)
        p.add_argument("--distribution", choices=("gaussian", "uniform"), default=None)
        p.add_argument("--workers", type=int, default=None, help="worker processes (capped by TOPOSPEC_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topospec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagnose", help="spectral diagnostics and triage ranking")
    _common(p, sim_flags=False)
    p.add_argument("--chain-convention", choices=("shift", "self_loop"), default="shift")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", help="diagnostics plus Monte-Carlo trials")
    _common(p, sim_flags=True)
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="one CSV row per grid point and topology")
    _common(p, sim_flags=True)
    p.add_argument("--parameter", required=True, choices=report.SWEEP_PARAMETERS)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--leaves", type=int, default=4, help="star size for the alpha sweep")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParseError, FileNotFoundError) as exc:
        print(f"topospec: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TopospecError, ValueError) as exc:
        print(f"topospec: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
