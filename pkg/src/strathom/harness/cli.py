"""Command line interface.

``strathom run CONFIG``                ε sweep, fine-scale vs effective
``strathom demo-common-atom CONFIG``   two families with equal limit measures
``strathom tensors LAW_CONFIG``        effective tensors of a law
``strathom verify [CONFIG]``           acceptance suite, or checks of one config

Exit codes: 0 success, 1 configuration or hypothesis error, 2 solver
failure, 3 acceptance violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from ..errors import ConfigError, DomainError, HypothesisError, SolverError
from ..measures import verify_l1nu_inequalities
from ..media import limit_measures, verify_limits
from . import acceptance, presets
from .config import SECTIONS, ExperimentConfig, LawSpec, _section, load, tomllib
from .plotting import report_figures
from .report import emit
from .runner import effective_law_for, run_common_atom_demo, run_convergence

log = logging.getLogger("strathom")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 1, 2, 3


def _config(args):
    if args.config is not None:
        cfg = load(args.config)
    elif args.preset is not None:
        cfg = presets.get(args.preset)
    else:
        raise ConfigError("give a configuration file or --preset NAME")
    return cfg.with_overrides(tol=args.tol, out_dir=args.out)


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _solution_files(cfg, solutions):
    """Solution CSVs for the effective problem and the smallest ε at the finest resolution."""
    if not solutions:
        return {}
    res = max(k[1] for k in solutions)
    eps = min(k[2] for k in solutions if k[0] == "fine" and k[1] == res) if any(
        k[0] == "fine" and k[1] == res for k in solutions) else None
    chosen = {("eff", res): solutions[("eff", res)]}
    if eps is not None:
        chosen[("fine", res, eps)] = solutions[("fine", res, eps)]
    return chosen


def cmd_run(args):
    cfg = _config(args)
    report, solutions = run_convergence(cfg, serial=args.serial, keep_solutions=True)
    written = emit(report, cfg.formats, cfg.out_dir, config=cfg, command="run")
    chosen = _solution_files(cfg, solutions)
    if cfg.solutions:
        for key, sol in chosen.items():
            tag = "effective" if key[0] == "eff" else f"fine_eps{key[2]:g}"
            written.append(_write(os.path.join(cfg.out_dir, f"{cfg.name}_{tag}.csv"), sol.to_csv()))
    if cfg.figures:
        written += report_figures(report, cfg.out_dir, chosen)
    for p in written:
        log.info("wrote %s", p)
    if report.failed_rows:
        log.error("%d solve(s) failed; see the status column", len(report.failed_rows))
        return EXIT_SOLVER
    return EXIT_OK


def cmd_demo(args):
    cfg = _config(args)
    report = run_common_atom_demo(cfg, serial=args.serial)
    written = emit(report, cfg.formats, cfg.out_dir, config=cfg, command="demo-common-atom")
    if cfg.figures:
        written += report_figures(report, cfg.out_dir)
    ratio = report.metadata["separation_ratio"]
    print(f"separation ratio (distance / largest last Cauchy increment) at eps={report.rows[-1]['eps']:g}: "
          f"{ratio:.3g}")
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


def _load_law(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    extra = set(data) - SECTIONS
    if extra:
        raise ConfigError(f"unknown top-level keys {sorted(extra)}")
    d = int(_section(data, "grid", {"d", "extents", "resolutions", "k_min"}).get("d", 3))
    return LawSpec.from_config(data.get("law", {}), d), d


def _matrix_text(name, M):
    M = np.atleast_2d(M)
    cells = [[f"{x: .10g}" for x in row] for row in M]
    w = max(len(c) for row in cells for c in row)
    body = "\n".join("  " + "  ".join(c.rjust(w) for c in row) for row in cells)
    return f"{name} ({M.shape[0]}x{M.shape[1]}):\n{body}\n"


def cmd_tensors(args):
    spec, d = _load_law(args.config)
    cfg = ExperimentConfig(law=spec, d=d, extents=(1.0,) * (d - 1), f=(0.0,) * spec.n_components(d))
    eff = effective_law_for(cfg)
    eff.check()
    n = eff.n
    gram = lambda a: a.reshape(n * d, n * d)
    out = {"kind": eff.kind, "n": n, "d": d,
           "a_perp": gram(eff.a_perp).tolist(), "a_par": gram(eff.a_par).tolist(),
           "A_interface": np.asarray(eff.A_iface).tolist()}
    if args.json:
        sys.stdout.write(json.dumps(out, indent=2) + "\n")
    else:
        print(f"law: {spec.kind}, n = {n}, d = {d}  (rows/columns ordered (component, derivative))")
        sys.stdout.write(_matrix_text("a_perp", out["a_perp"]))
        sys.stdout.write(_matrix_text("a_par", out["a_par"]))
        sys.stdout.write(_matrix_text("interface matrix", out["A_interface"]))
    if args.out is not None:
        _write(os.path.join(args.out, "tensors.json"), json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def cmd_verify(args):
    if args.config is None and args.preset is None:
        select = [int(x) for x in args.criteria.split(",")] if args.criteria else None
        results = acceptance.run_all(select)
        for r in results:
            print(r.line(), flush=True)
        failed = [r.number for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
              + (f"; failing: {failed}" if failed else ""))
        return EXIT_ACCEPTANCE if failed else EXIT_OK
    cfg = _config(args)
    ok = True
    for label, prof in (("profile", cfg.profile), ("profile_b", cfg.profile_b)):
        if prof is None:
            continue
        lim = verify_limits(prof, cfg.eps_list, limits=cfg.limits if label == "profile" else None)
        ineq = verify_l1nu_inequalities(limit_measures(prof))
        print(f"{label}: limit measures {'ok' if lim.passed else 'VIOLATED'}; "
              f"L1/nu inequalities {'ok' if ineq.passed else 'VIOLATED'}")
        ok &= lim.passed and ineq.passed
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output].dir)")
    common.add_argument("--serial", action="store_true", help="run the ε sweep in one thread")
    common.add_argument("--tol", type=float, metavar="X", help="solver tolerance (overrides [solver].tol)")
    common.add_argument("--preset", metavar="NAME", help=f"built-in experiment: {', '.join(presets.PRESETS)}")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="strathom", description="Layered-media homogenization experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, hlp in (("run", cmd_run, "ε sweep of fine-scale vs effective solutions"),
                          ("demo-common-atom", cmd_demo, "two families with equal limit measures")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("config", nargs="?", help="TOML configuration")
        s.set_defaults(func=fn)
    s = sub.add_parser("tensors", parents=[common], help="print the effective tensors of a law")
    s.add_argument("config", help="TOML file with a [law] table (and [grid] d)")
    s.add_argument("--json", action="store_true", help="machine-readable output")
    s.set_defaults(func=cmd_tensors)
    s = sub.add_parser("verify", parents=[common],
                       help="acceptance suite, or limit-measure checks of one configuration")
    s.add_argument("config", nargs="?", help="TOML configuration (omit for the acceptance suite)")
    s.add_argument("--criteria", metavar="LIST", help="comma-separated criterion numbers")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, HypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
