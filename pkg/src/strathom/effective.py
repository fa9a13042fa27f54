"""Effective problem with interface conditions at the atoms of ν and m.

The effective energy has three parts:

* bulk:  ``∫ a(x₁) ∇u : ∇v`` with ``a = (dν/dx)⁻¹ a⊥ + (dm/dx) a∥``;
* springs at ν-atoms:  ``ν({t})⁻¹ ∫_Σt A (u⁺ - u⁻)·(v⁺ - v⁻)``;
* membranes at m-atoms: ``m({t}) ∫_Σt a∥ ∇′u : ∇′v``.

Springs are discretized by giving the plane two node sheets (one per side)
and integrating the spring term exactly with the transverse mass matrix.
Membranes add a (d-1)-dimensional stiffness on the single sheet of the
plane. The bulk part reuses the fine-scale assembly routine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, HypothesisError
from .fem import (
    FemSolution,
    FemSystem,
    _as_source,
    assemble_bulk,
    build_grid_from_breakpoints,
    finalize_system,
    solve,
    transverse_mass,
    transverse_stiffness,
)
from .measures import check_no_common_atoms
from .tensors import bulk_tensor

MAX_ATOMS = 32


@dataclass(frozen=True)
class InterfaceSet:
    """Atom locations snapped to grid planes.

    ``nu_atoms`` and ``m_atoms`` are tuples of ``(t, mass, plane_index)``.
    """

    nu_atoms: tuple
    m_atoms: tuple

    @classmethod
    def from_pair(cls, pair, grid):
        if not check_no_common_atoms(pair):
            raise HypothesisError(
                f"ν and m share atoms at {[float(t) for t in pair.common_atoms()]}: "
                "the effective problem is not determined by (ν, m)"
            )
        if len(pair.nu.atoms) + len(pair.m.atoms) > MAX_ATOMS:
            raise DomainError(f"at most {MAX_ATOMS} atoms are supported")
        nu = tuple((float(t), w, grid.plane_index(t)) for t, w in pair.nu.atoms)
        m = tuple((float(t), w, grid.plane_index(t)) for t, w in pair.m.atoms)
        return cls(nu, m)

    @property
    def is_empty(self):
        return not self.nu_atoms and not self.m_atoms


def effective_breakpoints(pair):
    """Density breakpoints of ν and m together with all atom locations."""
    pts = set(pair.nu.density_breakpoints) | set(pair.m.density_breakpoints)
    pts |= set(pair.nu.atom_locations) | set(pair.m.atom_locations)
    return sorted(pts)


def build_effective_grid(pair, transverse_extents=(), resolution=16, k_min=2):
    """Grid with planes at every density breakpoint and atom (sheets not yet doubled)."""
    return build_grid_from_breakpoints(effective_breakpoints(pair), transverse_extents, resolution, k_min)


@dataclass(frozen=True)
class EffectiveSystem(FemSystem):
    """:class:`FemSystem` plus the interface data it was assembled with."""

    interfaces: InterfaceSet = None
    law: object = None


def assemble_effective(pair, eff, grid, f=1.0):
    """Assemble the effective system on ``grid``.

    ``grid`` needs a plane at every atom; ν-atom planes are doubled here
    (pass a grid with undoubled planes, e.g. from :func:`build_effective_grid`).

    Raises
    ------
    HypothesisError
        If ν and m have a common atom or ν has zero density somewhere.
    DomainError
        If an atom does not sit on a grid plane.
    """
    base = grid
    if base.doubled_planes.size:
        raise DomainError("pass a grid without doubled planes; ν-atom sheets are created here")
    iface = InterfaceSet.from_pair(pair, base)
    grid = base.with_doubled_planes([p for _, _, p in iface.nu_atoms]) if iface.nu_atoms else base
    n = eff.n
    a = bulk_tensor(pair, eff)
    mids = 0.5 * (grid.x1[:-1] + grid.x1[1:])
    K = assemble_bulk(grid, [a.at(x) for x in mids], n)
    nt = grid.n_transverse
    size = grid.n_nodes * n
    Mt = transverse_mass(grid)
    extra = []
    for t, w, p in iface.nu_atoms:
        spring = sp.kron(Mt, eff.A_iface / w, format="csr")
        lo, hi = grid.sheet_minus[p], grid.sheet_plus[p]
        block = sp.kron(sp.csr_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]])), spring, format="coo")
        # the two sheets are adjacent in the numbering: hi = lo + 1
        assert hi == lo + 1
        off = lo * nt * n
        extra.append(sp.coo_matrix((block.data, (block.row + off, block.col + off)), shape=(size, size)))
    if grid.d > 1:
        tang = eff.a_par[:, 1:, :, 1:]
        for t, w, p in iface.m_atoms:
            Ks = transverse_stiffness(grid, w * tang).tocoo()
            off = grid.sheet_minus[p] * nt * n
            extra.append(sp.coo_matrix((Ks.data, (Ks.row + off, Ks.col + off)), shape=(size, size)))
    for E in extra:
        K = K + E
    b = _as_source(f).load(grid, n)
    sys_ = finalize_system(K, b, grid, n)
    return EffectiveSystem(sys_.stiffness, sys_.load, sys_.dirichlet_mask, grid, n,
                           sys_.full_stiffness, iface, eff)


@dataclass(frozen=True)
class EffectiveSolution:
    """Effective solution: the nodal field plus per-atom jump fields."""

    fem: FemSolution
    system: EffectiveSystem

    @property
    def grid(self):
        return self.fem.grid

    @property
    def values(self):
        return self.fem.values

    @property
    def residual(self):
        return self.fem.residual

    @property
    def iterations(self):
        return self.fem.iterations

    @property
    def jump_locations(self):
        return self.fem.jump_locations

    @property
    def x1_breakpoints(self):
        return self.fem.x1_breakpoints

    def evaluate(self, points, side="right"):
        return self.fem.evaluate(points, side)

    def side_values(self, t):
        """``(u⁻, u⁺)`` on the sheet(s) of plane ``t``, each ``(n_transverse, n)``."""
        p = self.grid.plane_index(t)
        return (self.fem.sheet_values(self.grid.sheet_minus[p]),
                self.fem.sheet_values(self.grid.sheet_plus[p]))

    def jump(self, t):
        """``u⁺ - u⁻`` on the transverse nodes of Σ_t."""
        um, up = self.side_values(t)
        return up - um

    def jumps(self):
        return {t: self.jump(t) for t, _, _ in self.system.interfaces.nu_atoms}

    def sigma_norm(self, values):
        """``L²(Σ)`` norm of a nodal field on one sheet (plain absolute value in 1D)."""
        Mt = transverse_mass(self.grid)
        v = np.asarray(values, dtype=float).reshape(self.grid.n_transverse, -1)
        return float(np.sqrt(max(np.sum(v * (Mt @ v)), 0.0)))

    def to_csv(self):
        """Bulk block then one jump block per ν-atom, each headed by a comment."""
        parts = ["# bulk\n" + self.fem.to_csv()]
        tp = self.grid.transverse_points()
        for t, _, _ in self.system.interfaces.nu_atoms:
            J = self.jump(t)
            head = ",".join([f"x{k + 2}" for k in range(tp.shape[1])] + [f"jump{i + 1}" for i in range(J.shape[1])])
            rows = [",".join(format(x, ".17g") for x in (*c, *j)) for c, j in zip(tp, J)]
            parts.append(f"# jump t={t:.17g}\n" + head + "\n" + "\n".join(rows) + "\n")
        return "\n".join(parts)


def solve_effective(system, tol=1e-10, max_iter=None, method="pcg"):
    """Solve an :class:`EffectiveSystem` with the fine-scale solver."""
    return EffectiveSolution(solve(system, tol=tol, max_iter=max_iter, method=method), system)


@dataclass(frozen=True)
class AtomResidual:
    """Transmission residual at one atom.

    For ν-atoms ``minus``/``plus`` are the relative mismatches between the
    spring force and the one-sided fluxes; for m-atoms ``minus`` holds the
    relative flux-balance residual and ``plus`` is unused (0).
    """

    t: float
    kind: str
    minus: float
    plus: float
    flux_norm: float
    jump_norm: float

    @property
    def value(self):
        return max(self.minus, self.plus)


def _sheet_gradient(grid, values, sheet_a, sheet_b, h):
    """x₁ difference between two sheets plus transverse gradients on ``sheet_a``.

    Returns ``(n_transverse, n, d)``.
    """
    ua, ub = values(sheet_a), values(sheet_b)
    nt, n = ua.shape
    G = np.zeros((nt, n, grid.d))
    G[:, :, 0] = (ua - ub) / h
    if grid.d > 1:
        dims = [c + 1 for c in grid.counts]
        grid_vals = ua.reshape(*dims[::-1], n) if grid.d == 3 else ua.reshape(dims[0], n)
        if grid.d == 2:
            G[:, :, 1] = np.gradient(grid_vals, grid.spacings[0], axis=0)
        else:
            # node order is x₂ fastest, so reshape gives axes (x₃, x₂, comp)
            G[:, :, 1] = np.gradient(grid_vals, grid.spacings[0], axis=1).reshape(nt, n)
            G[:, :, 2] = np.gradient(grid_vals, grid.spacings[1], axis=0).reshape(nt, n)
    return G


def transmission_residuals(sol, pair, eff=None):
    """Check the interface conditions of a computed effective solution.

    Fluxes ``(a ∇u) e₁`` are recovered on each side of an atom plane by a
    one-sided two-point difference in x₁ (the plane node and its neighbour)
    and central differences along the plane. At a ν-atom the report gives
    ``‖ν({t})⁻¹ A (u⁺-u⁻) - flux^∓‖`` in ``L²(Σ_t)``, relative to the
    norm of the spring force ``ν({t})⁻¹ A (u⁺-u⁻)`` itself. At an
    m-atom it gives the discrete flux balance
    ``M′(flux⁻ - flux⁺) + m({t}) K∥ u`` on interior plane nodes, measured in
    the dual norm ``(rᵀ M′⁻¹ r)^½`` relative to ``‖M′ flux⁻‖`` in the same
    norm.

    ``eff`` defaults to the law the system was assembled with.
    """
    system = sol.system
    eff = eff or system.law
    grid = sol.grid
    a = bulk_tensor(pair, eff)
    n = eff.n
    values = sol.fem.sheet_values
    interior = ~grid.transverse_boundary()
    Mt = transverse_mass(grid)

    def fluxes(p):
        x = grid.x1
        Gm = _sheet_gradient(grid, values, grid.sheet_minus[p], grid.sheet_plus[p - 1], x[p] - x[p - 1])
        Gp = _sheet_gradient(grid, values, grid.sheet_minus[p + 1], grid.sheet_plus[p], x[p + 1] - x[p])
        # Gp was built on the neighbour sheet; recompute transverse parts on the plane's own sheet
        Gp_own = _sheet_gradient(grid, values, grid.sheet_plus[p], grid.sheet_plus[p], 1.0)
        Gp[:, :, 1:] = Gp_own[:, :, 1:]
        am = a.at(0.5 * (x[p - 1] + x[p]))
        ap = a.at(0.5 * (x[p] + x[p + 1]))
        fm = np.einsum("ikl,skl->si", am[:, 0, :, :], Gm)
        fp = np.einsum("ikl,skl->si", ap[:, 0, :, :], Gp)
        return fm, fp

    def l2(v):
        v = np.where(interior[:, None], v, 0.0)
        return sol.sigma_norm(v)

    report = []
    for t, w, p in system.interfaces.nu_atoms:
        fm, fp = fluxes(p)
        J = sol.jump(t)
        spring = J @ (eff.A_iface / w).T
        # the spring force is the reference both recovered fluxes must match;
        # when it vanishes (symmetric data) fall back to the flux scale
        flux_scale = max(l2(fm), l2(fp), np.finfo(float).tiny)
        scale = l2(spring) if l2(spring) > 1e-8 * flux_scale else flux_scale
        report.append(AtomResidual(t, "nu", l2(spring - fm) / scale, l2(spring - fp) / scale,
                                   scale, sol.sigma_norm(J)))
    for t, w, p in system.interfaces.m_atoms:
        fm, fp = fluxes(p)
        u = values(grid.sheet_minus[p]).ravel()
        M = sp.kron(Mt, sp.identity(n), format="csr")
        r = M @ (fm - fp).ravel()
        if grid.d > 1:
            r = r + transverse_stiffness(grid, w * eff.a_par[:, 1:, :, 1:]) @ u
        mask = np.repeat(interior, n)
        Mi = M[mask][:, mask]
        ri = r[mask]
        ref = (M @ fm.ravel())[mask]
        dual = lambda v: float(np.sqrt(max(v @ spla.spsolve(Mi.tocsc(), v), 0.0))) if v.size else 0.0
        scale = max(dual(ref), np.finfo(float).tiny)
        report.append(AtomResidual(t, "m", dual(ri) / scale, 0.0, scale, 0.0))
    return tuple(sorted(report, key=lambda r: r.t))
