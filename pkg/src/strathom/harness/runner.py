"""Experiment runner: ε sweeps, fine-scale vs effective comparisons, the common-atom demo."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..effective import assemble_effective, build_effective_grid, solve_effective, transmission_residuals
from ..errors import ConfigError, SolverError
from ..fem import ZeroField, assemble, build_grid, error_norms, solve
from ..fem import energy as fem_energy
from ..media import limit_measures, realize
from ..oracle import compare_1d, solve_eps_1d, solve_limit_1d
from ..tensors import IsotropicLaw, SystemTensor, heat_effective, iso_effective, sys_effective

log = logging.getLogger(__name__)

BASE_COLUMNS = ("eps", "h", "l1_error", "l2_error", "energy_fine", "energy_eff", "iterations",
                "resolution", "rel_l1_error")


@dataclass(frozen=True)
class ConvergenceReport:
    """Rows of an ε sweep plus run metadata.

    ``rows`` are dicts keyed by ``columns``; ``metadata`` goes to the
    sidecar file, never into the data files.
    """

    name: str
    columns: tuple
    rows: tuple
    metadata: dict = field(default_factory=dict)
    kind: str = "convergence"

    def column(self, key, resolution=None):
        return np.array([r[key] for r in self.rows
                         if resolution is None or r.get("resolution") == resolution], dtype=float)

    @property
    def failed_rows(self):
        return [r for r in self.rows if r.get("status", "ok") != "ok"]


def fine_law(cfg):
    law = cfg.law.build(cfg.d)
    if cfg.system_mode:
        return SystemTensor(law.tensor(2), require_ellipticity=False)
    return law


def effective_law_for(cfg):
    """Effective tensors for the configured law (2D isotropic runs in system mode)."""
    law = cfg.law.build(cfg.d)
    if cfg.law.kind == "heat":
        return heat_effective(law)
    if isinstance(law, IsotropicLaw):
        if cfg.d == 3:
            return iso_effective(law)
        return sys_effective(SystemTensor(law.tensor(2), require_ellipticity=False))
    return sys_effective(law)


def _limits(cfg):
    return cfg.limits if cfg.limits is not None else limit_measures(cfg.profile)


def _feature_span(profile, t, eps):
    """Outer extent of the feature centred at ``t`` for this ``eps``."""
    for f in profile.features:
        if float(f.center) == float(t):
            pcs = f.pieces(eps)
            return pcs[0][0], pcs[-1][1]
    return float(t), float(t)


def _map(fn, items, serial):
    if serial or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor() as pool:
        return list(pool.map(fn, items))


# -- 1D exact path ----------------------------------------------------------------

def _run_oracle(cfg, serial, solutions):
    pair = _limits(cfg)
    A11 = float(cfg.law.build(1)[0, 0])
    f = cfg.f[0]
    limit = solve_limit_1d(pair.nu, f, conductivity=A11)
    e_eff = limit.energy()
    norm_eff = compare_1d(limit, solve_limit_1d(pair.nu, 0.0, conductivity=A11), "L1")
    atoms = [float(t) for t in limit.jump_locations]
    solutions[("eff", 0)] = limit

    def row(eps):
        fine = solve_eps_1d(realize(cfg.profile, eps), f, conductivity=A11)
        l1 = compare_1d(fine, limit, "L1")
        r = {"eps": eps, "h": 0.0, "l1_error": l1, "l2_error": compare_1d(fine, limit, "L2"),
             "energy_fine": fine.energy(), "energy_eff": e_eff, "iterations": 0,
             "resolution": 0, "rel_l1_error": l1 / norm_eff if norm_eff else math.nan}
        for t, j in limit.jumps:
            a, b = _feature_span(cfg.profile, t, eps)
            rise = fine.rise(a, b)
            r[f"jump@{t:.6g}"] = rise
            r[f"jump_eff@{t:.6g}"] = j
            r[f"jump_rel_err@{t:.6g}"] = abs(rise - j) / abs(j) if j else math.nan
        r["status"] = "ok"
        return r, fine

    results = _map(row, list(cfg.eps_list), serial)
    rows = [r for r, _ in results]
    for eps, (_, fine) in zip(cfg.eps_list, results):
        solutions[("fine", 0, eps)] = fine
    cols = BASE_COLUMNS + tuple(c for t in atoms for c in (f"jump@{t:.6g}", f"jump_eff@{t:.6g}",
                                                           f"jump_rel_err@{t:.6g}")) + ("status",)
    return cols, rows, {"effective": {"sigma0": limit.sigma0, "jumps": [list(j) for j in limit.jumps]}}


# -- finite element path ----------------------------------------------------------

def _sheet_field(u, grid, x1, side):
    tp = grid.transverse_points()
    pts = np.column_stack([np.full(tp.shape[0], x1), tp])
    return u.evaluate(pts, side)


def _run_fem(cfg, serial, solutions):
    pair = _limits(cfg)
    eff = effective_law_for(cfg)
    law = fine_law(cfg)
    f = cfg.source()
    rows_all, meta = [], {"effective": {}}
    cols = list(BASE_COLUMNS)
    for res in cfg.resolutions:
        g_eff = build_effective_grid(pair, cfg.extents, res, cfg.k_min)
        sys_eff = assemble_effective(pair, eff, g_eff, f)
        sol_eff = solve_effective(sys_eff, tol=cfg.tol, max_iter=cfg.max_iter, method=cfg.method)
        e_eff = fem_energy(sol_eff.fem, sys_eff)
        norm_eff = error_norms(sol_eff.fem, ZeroField(cfg.n), "L1")
        resid = {r.t: r for r in transmission_residuals(sol_eff, pair, eff)}
        nu_atoms = [t for t, _, _ in sys_eff.interfaces.nu_atoms]
        jumps_eff = {t: sol_eff.jump(t) for t in nu_atoms}
        scalar = cfg.d == 1 and cfg.n == 1
        meta["effective"][str(res)] = {
            "iterations": sol_eff.iterations, "residual": sol_eff.residual, "energy": e_eff,
            "transmission": {f"{t:.6g}": {"kind": r.kind, "minus": r.minus, "plus": r.plus}
                             for t, r in resid.items()},
        }
        solutions[("eff", res)] = sol_eff

        def row(eps, res=res, g_eff=g_eff, sol_eff=sol_eff, e_eff=e_eff, norm_eff=norm_eff,
                resid=resid, nu_atoms=nu_atoms, jumps_eff=jumps_eff, scalar=scalar):
            fld = realize(cfg.profile, eps)
            grid = build_grid(fld, cfg.extents, res, cfg.k_min)
            system = assemble(grid, fld, law, f)
            r = {"eps": eps, "h": grid.h, "resolution": res, "energy_eff": e_eff}
            try:
                u = solve(system, tol=cfg.tol, max_iter=cfg.max_iter, method=cfg.method)
            except SolverError as exc:
                log.warning("eps=%g res=%d: %s", eps, res, exc)
                r.update({"l1_error": math.nan, "l2_error": math.nan, "energy_fine": math.nan,
                          "iterations": len(exc.residual_history) - 1, "rel_l1_error": math.nan,
                          "status": "solver-failure"})
                for t in resid:
                    r[f"residual@{t:.6g}"] = resid[t].value
                return r, None
            l1 = error_norms(u, sol_eff, "L1")
            r.update({"l1_error": l1, "l2_error": error_norms(u, sol_eff, "L2"),
                      "energy_fine": fem_energy(u, system), "iterations": u.iterations,
                      "rel_l1_error": l1 / norm_eff if norm_eff else math.nan})
            for t in nu_atoms:
                a, b = _feature_span(cfg.profile, t, eps)
                rise = _sheet_field(u, grid, b, "right") - _sheet_field(u, grid, a, "left")
                J = jumps_eff[t]
                key = f"{t:.6g}"
                r[f"jump@{key}"] = float(rise[0, 0]) if scalar else sol_eff.sigma_norm(rise)
                r[f"jump_eff@{key}"] = float(J[0, 0]) if scalar else sol_eff.sigma_norm(J)
                nJ = sol_eff.sigma_norm(J)
                r[f"jump_rel_err@{key}"] = sol_eff.sigma_norm(rise - J) / nJ if nJ else math.nan
            for t in resid:
                r[f"residual@{t:.6g}"] = resid[t].value
            r["status"] = "ok"
            return r, u

        results = _map(row, list(cfg.eps_list), serial)
        for eps, (r, u) in zip(cfg.eps_list, results):
            rows_all.append(r)
            if u is not None:
                solutions[("fine", res, eps)] = u
        for t in nu_atoms:
            for c in (f"jump@{t:.6g}", f"jump_eff@{t:.6g}", f"jump_rel_err@{t:.6g}"):
                if c not in cols:
                    cols.append(c)
        for t in resid:
            if f"residual@{t:.6g}" not in cols:
                cols.append(f"residual@{t:.6g}")
    cols.append("status")
    for r in rows_all:
        for c in cols:
            r.setdefault(c, math.nan)
    return tuple(cols), rows_all, meta


def run_convergence(cfg, serial=True, keep_solutions=False):
    """ε sweep of the fine-scale problem against the effective problem.

    One row per (resolution, ε). Solver failures are recorded in the row's
    ``status`` column and the sweep continues; configuration problems raise.

    Returns
    -------
    ConvergenceReport, or ``(report, solutions)`` with ``keep_solutions``.
    """
    if cfg.profile.has_nested:
        raise ConfigError("nested (common-atom) profiles only run through run_common_atom_demo")
    solutions = {}
    if cfg.method == "oracle":
        cols, rows, meta = _run_oracle(cfg, serial, solutions)
    else:
        cols, rows, meta = _run_fem(cfg, serial, solutions)
    rows = sorted(rows, key=lambda r: (r["resolution"], -r["eps"]))
    report = ConvergenceReport(cfg.name, cols, tuple(rows), meta)
    return (report, solutions) if keep_solutions else report


# -- common-atom demonstration ---------------------------------------------------

def _swap_regimes(profile):
    feats = tuple(replace(f, r1_exp=f.r2_exp, r2_exp=f.r1_exp) if f.kind == "nested" else f
                  for f in profile.features)
    return replace(profile, features=feats)


def run_common_atom_demo(cfg, serial=True):
    """Solve two nested families with equal limit measures and compare them.

    Reports, per ε, the L¹ distance between the two families and each
    family's Cauchy increment (distance to its own previous ε). If the
    limit problem were determined by (ν, m), the distance would tend to 0
    along with the increments.
    """
    prof_a = cfg.profile
    if not prof_a.features or not all(f.kind == "nested" for f in prof_a.features):
        raise ConfigError("the common-atom demo needs a profile made of nested features")
    prof_b = cfg.profile_b if cfg.profile_b is not None else _swap_regimes(prof_a)
    la, lb = limit_measures(prof_a), limit_measures(prof_b)
    if (la.nu.atoms, la.m.atoms) != (lb.nu.atoms, lb.m.atoms):
        raise ConfigError("the two profiles must share their declared limit measures")
    regimes = ([f.regime for f in prof_a.features], [f.regime for f in prof_b.features])

    if cfg.d == 1 and cfg.law.kind == "heat":
        A11 = float(cfg.law.build(1)[0, 0])

        def solve_pair(eps):
            ua = solve_eps_1d(realize(prof_a, eps), cfg.f[0], A11)
            ub = solve_eps_1d(realize(prof_b, eps), cfg.f[0], A11)
            return ua, ub, 0, 0, 0.0

        dist = lambda u, v: compare_1d(u, v, "L1")
    else:
        law = fine_law(cfg)
        res = cfg.resolutions[-1]
        f = cfg.source()

        def solve_pair(eps):
            out = []
            for prof in (prof_a, prof_b):
                fld = realize(prof, eps)
                grid = build_grid(fld, cfg.extents, res, cfg.k_min)
                out.append(solve(assemble(grid, fld, law, f), tol=cfg.tol, max_iter=cfg.max_iter,
                                 method=cfg.method))
            return out[0], out[1], out[0].iterations, out[1].iterations, out[0].grid.h

        dist = lambda u, v: error_norms(u, v, "L1")

    sols = _map(solve_pair, list(cfg.eps_list), serial)
    rows = []
    for k, (eps, (ua, ub, ia, ib, h)) in enumerate(zip(cfg.eps_list, sols)):
        r = {"eps": eps, "h": h, "distance": dist(ua, ub),
             "cauchy_a": dist(ua, sols[k - 1][0]) if k else math.nan,
             "cauchy_b": dist(ub, sols[k - 1][1]) if k else math.nan,
             "iterations_a": ia, "iterations_b": ib, "status": "ok"}
        rows.append(r)
    last = rows[-1]
    ratio = last["distance"] / max(last["cauchy_a"], last["cauchy_b"]) if len(rows) > 1 else math.nan
    meta = {"regimes": regimes, "separation_ratio": ratio,
            "limits": {"nu_atoms": [[float(t), w] for t, w in la.nu.atoms],
                       "m_atoms": [[float(t), w] for t, w in la.m.atoms]}}
    cols = ("eps", "h", "distance", "cauchy_a", "cauchy_b", "iterations_a", "iterations_b", "status")
    return ConvergenceReport(cfg.name, cols, tuple(rows), meta, kind="common-atom")
