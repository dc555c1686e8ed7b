"""Command-line entry point ``lab``.

Exit codes: 0 success, 2 invalid config or unmet precondition,
3 window-guard violation or a failed asserted check.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import (InvalidInput, KrylabError, NoSolution, NotFriedrichs, PreconditionFailed)
from .experiments import EXPERIMENTS, load_config, run_experiment, write_report
from .experiments.config import datum_from_json, operator_from_json
from .experiments.report import finite
from .gallery import outer_region_mass
from .hilbert import min_norm_solve
from .krylov import krylov_basis

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
CONFIG_ERRORS = (InvalidInput, PreconditionFailed, NotFriedrichs, NoSolution)

GALLERY = {
    "shift": "right shift on a window -N..N (fill: zero_fill | cyclic)",
    "compact_normal": "diagonal normal operator from a list of eigenvalues",
    "matrix": "explicit matrix given as rows of numbers or [re, im] pairs",
    "jordan": "nilpotent Jordan block of a given size",
    "prototype": "-d/dx + c on a periodic grid (spectral derivative)",
    "friedrichs_1d": "d/dx(B f) + C f for an r-component system on a periodic grid",
    "random": "seeded random family: hermitian, spd, psd, skew, normal, general",
}


def _cmd_list(args) -> int:
    print("experiments:")
    for key, text in EXPERIMENTS.items():
        print(f"  {key:26s} {text}")
    print("operators:")
    for key, text in GALLERY.items():
        print(f"  {key:26s} {text}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    report = run_experiment(cfg)
    out = args.out or cfg.output_dir
    paths = write_report(report, out, svg=args.svg)
    for p in paths:
        print(p)
    print(f"{report.experiment_id}: status={report.status} exit={report.exit_code}")
    for check in report.checks:
        if check.asserted and not check.passed:
            print(f"  FAILED {check.name} (value={check.value}, threshold={check.threshold})")
    return report.exit_code


def _read_json(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidInput(f"{path} must hold a JSON object")
    return data


def diagnose(op_spec: dict, datum_spec: dict, n: int, seed: int = 0) -> dict:
    """Structural diagnostics of (A, g) over K_n, as a JSON-ready dict."""
    built = operator_from_json(op_spec, seed)
    g = datum_from_json(datum_spec, built, seed)
    op = built.op
    basis = krylov_basis(op, g, n)
    window = built.shift.N if built.shift is not None else None
    prov = dg.provenance(op, g, window)
    red = dg.reducibility(op, basis, prov)
    inter = dg.krylov_intersection(op, basis, prov=prov)
    try:
        f = min_norm_solve(op, g)
    except NoSolution:
        f = None
    guard = "not_applicable"
    if built.shift is not None:
        vecs = [g] + ([] if f is None else [f])
        mass = max(outer_region_mass(v, built.shift) for v in vecs)
        guard = "violated" if mass > 1e-8 else "ok"
    trace = None if f is None else dg.solution_distance_trace(f, basis)
    v = dg.verdict(reducibility_report=red, intersection_report=inter, distance_trace=trace,
                   solution_norm=None if f is None else float(np.linalg.norm(f)), op=op,
                   window_guard=guard)
    vc = dg.vector_class(op, g, max(n, 4))
    return finite({
        "operator": op.name,
        "dim": op.dim,
        "flags": sorted(op.flags),
        "n": basis.size,
        "grade": basis.grade,
        "reducibility": {"off_block_K_to_perp": red.off_block_K_to_perp,
                         "off_block_perp_to_K": red.off_block_perp_to_K},
        "intersection": {"principal_angles": list(inter.principal_angles),
                         "est_dim": inter.est_dim, "margin": inter.margin, "note": inter.note},
        "vector_class": {"bounded": vc.bounded_verdict, "B_g": vc.B_g,
                         "analytic": vc.analytic_verdict, "C_g": vc.C_g,
                         "quasi_analytic": vc.qa_verdict},
        "distance_trace": trace,
        "verdict": v.to_dict(),
    })


def _cmd_diagnose(args) -> int:
    result = diagnose(_read_json(args.operator), _read_json(args.datum), args.n, args.seed)
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_NUMERICAL if result["verdict"]["window_guard"] == "violated" else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description="Krylov solvability lab")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("list", help="enumerate experiments and gallery operators")
    p.set_defaults(func=_cmd_list)
    p = sub.add_parser("run", help="run one experiment from a JSON config")
    p.add_argument("--config", required=True, help="path to the experiment config")
    p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    p.add_argument("--svg", action="store_true", help="also write an SVG chart of the traces")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("diagnose", help="structural diagnostics for one (A, g) pair")
    p.add_argument("--operator", required=True, help="operator spec JSON file")
    p.add_argument("--datum", required=True, help="datum spec JSON file")
    p.add_argument("--n", type=int, required=True, help="Krylov dimension to inspect")
    p.add_argument("--seed", type=int, default=0, help="seed for random specs")
    p.set_defaults(func=_cmd_diagnose)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KrylabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
