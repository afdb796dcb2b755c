"""Command line entry point: limit, validate, solve, sweep, verify."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import MODES, SEED_MODES, load_config
from .errors import ConfigError, PenalizedNLSError

log = logging.getLogger("penalized_nls")


def _dump(data):
    from .sweep import _json_default

    return json.dumps(data, indent=2, sort_keys=True, default=_json_default)


def cmd_limit(args):
    from .limit_ground_state import LimitProblemParams, energy_constants, shoot_ground_state

    prof = shoot_ground_state(LimitProblemParams(args.dimension, args.p, args.nu))
    const = energy_constants(args.dimension, args.p)
    out = {
        "N": args.dimension,
        "p": args.p,
        "nu": args.nu,
        "u0": prof.u0,
        "b_nu": prof.energy,
        "b1": const.b1,
        "S": const.S,
        "r": const.r,
        "r_max": prof.r_max,
        "residuals": prof.residuals(),
    }
    print(_dump(out))
    if args.out:
        from .sweep import fmt

        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# r U(r)\n")
            for r, u in zip(prof.radii, prof.values):
                fh.write(f"{fmt(r)} {fmt(u)}\n")
    return 0


def cmd_validate(args):
    from .domain import validate_hypotheses

    cfg = load_config(args.config)
    V = cfg.potential()
    region = cfg.region(V)
    rep = validate_hypotheses(V, region, float(cfg.problem.p), cfg.build_mesh())
    print(rep)
    if args.out:
        from .sweep import write_json

        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_json(Path(args.out) / "hypotheses.json", {"all_pass": rep.all_pass, "checks": rep.as_dict()})
    return 0 if rep.all_pass else 1


def _parse_point(text, N):
    vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    if len(vals) != N:
        raise ConfigError(f"--target needs {N} comma-separated coordinates")
    return vals


def cmd_solve(args):
    from . import sweep

    cfg = load_config(args.config)
    changes = {}
    if args.mode:
        changes["mode"] = args.mode
    if args.target:
        changes["target"] = _parse_point(args.target, cfg.N)
    if args.tol_grad:
        changes["tol_grad"] = args.tol_grad
    if args.max_iter:
        changes["max_iter"] = args.max_iter
    if changes:
        cfg = cfg.with_overrides(**changes)
    eps = args.eps if args.eps is not None else cfg.sweep.eps[-1]
    ctx = sweep.SweepContext(cfg)
    out = sweep._attempt(ctx, float(eps), None)
    data = {"eps": out.eps, "status": out.status, "result": None if out.result is None else out.result.to_dict()}
    print(_dump(data))
    if args.out and out.result is not None:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        formats = {"npy": ("npy",), "csv": ("fields_csv",), "none": ()}[args.dump]
        if formats:
            sweep.dump_results(cfg, [out], d, formats)
        else:
            sweep.write_json(d / f"solve_eps_{sweep.eps_tag(eps)}.json", data)
    return 0 if out.status == "ok" else 1


def _print_report(report):
    print(f"{report.name}: N = {report.N}, mode = {report.mode}")
    print(f"{'eps':>8} {'eps^-N J':>14} {'predicted':>12} {'rel.err':>10} {'cert margin':>12} {'status':>8}")
    for r in report.records:
        rel = abs(r.rescaled_energy - r.predicted) / r.predicted
        print(f"{r.eps:>8.4g} {r.rescaled_energy:>14.8f} {r.predicted:>12.8f} {rel:>10.3e} {r.certificate_margin:>12.4e} {r.status:>8}")
    for name, c in report.checks.items():
        tag = "PASS" if c["pass"] else ("FAIL" if c["acceptance"] else "note")
        print(f"  [{tag}] {name}: {c['detail']}")


def cmd_sweep(args):
    from .sweep import default_output_dir, run_sweep

    cfg = load_config(args.config)
    out = Path(args.out) if args.out else default_output_dir(cfg)
    report = run_sweep(cfg, seed_mode=args.seed_mode, jobs=args.jobs, out=out)
    _print_report(report)
    print(f"artifacts in {out}")
    return 0 if report.passed else 1


def cmd_verify(args):
    from .sweep import verify

    cfg = load_config(args.config) if args.config else None
    report = verify(args.directory, cfg, out=args.out)
    _print_report(report)
    return 0 if report.passed else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="penalized-nls", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("limit", help="ground state of -Δu + νu = u^p and its energy constants")
    p.add_argument("-N", "--dimension", type=int, required=True)
    p.add_argument("-p", "--p", type=float, required=True)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--out", help="write the (r, U) profile to this file")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("validate", help="check the hypotheses on V, Λ and p for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="a single solve at one ε")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", type=float, help="defaults to the smallest ε of the sweep")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--target", help="pin/symmetry point, comma separated")
    p.add_argument("--tol-grad", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--out")
    p.add_argument("--dump", choices=("npy", "csv", "none"), default="npy")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run the configured ε sweep with all diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed-mode", choices=SEED_MODES)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="recompute the report from a directory of solve dumps")
    p.add_argument("directory")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    np.seterr(under="ignore")
    try:
        return args.func(args)
    except (ConfigError, PenalizedNLSError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
