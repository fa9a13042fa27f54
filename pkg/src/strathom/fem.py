"""Fine-scale multilinear finite elements on layer-conforming tensor grids.

The domain is the box ``(0, L) × (0, H₂) × …`` with x₁ the stratification
direction. Nodes are grouped into *sheets*: one sheet per x₁ grid plane,
each carrying a full transverse grid. A grid may give a plane two sheets
(its left and right side); this is how the effective solver represents
jumps across soft interfaces, and every routine here is written against
the sheet maps so that both solvers share one assembly path.

Degrees of freedom are numbered ``node * n + component`` with
``node = sheet * n_transverse + transverse_index``.

Element integrals are exact: with piecewise-constant coefficients the
bilinear form on a Q1 element factorizes into 1D integrals of products of
linear shape functions, which are tabulated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, DomainError, SolverError
from .tensors import IsotropicLaw, SystemTensor

#: Minimum element size relative to the domain length; thinner layers cannot
#: be represented by their float endpoints reliably.
MIN_RELATIVE_SPACING = 1e-13


# -- grid ---------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Tensor-product grid with possibly doubled x₁ sheets.

    Attributes
    ----------
    x1 : ndarray
        Node coordinates along x₁ (grid planes), including every
        coefficient breakpoint.
    extents : tuple of float
        Transverse box sizes ``(H₂, …)``; empty in 1D.
    counts : tuple of int
        Transverse element counts per direction.
    x1_breakpoints : ndarray
        Coefficient breakpoints the grid conforms to.
    sheet_minus, sheet_plus : ndarray of int
        Sheet index used on the left / right side of each plane. Equal for
        ordinary planes, different at doubled planes.
    """

    x1: np.ndarray
    extents: tuple = ()
    counts: tuple = ()
    x1_breakpoints: np.ndarray = None
    sheet_minus: np.ndarray = None
    sheet_plus: np.ndarray = None

    def __post_init__(self):
        x1 = np.asarray(self.x1, dtype=float)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "extents", tuple(float(h) for h in self.extents))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.extents) != len(self.counts) or len(self.extents) > 2:
            raise ConfigError("transverse extents and counts must match, at most two directions")
        bps = x1[[0, -1]] if self.x1_breakpoints is None else np.asarray(self.x1_breakpoints, float)
        object.__setattr__(self, "x1_breakpoints", bps)
        if self.sheet_minus is None:
            ident = np.arange(x1.size)
            object.__setattr__(self, "sheet_minus", ident)
            object.__setattr__(self, "sheet_plus", ident)

    # -- sizes ----------------------------------------------------------------
    @property
    def d(self):
        return 1 + len(self.extents)

    @property
    def length(self):
        return float(self.x1[-1])

    @property
    def n_x1_elements(self):
        return self.x1.size - 1

    @property
    def h1(self):
        return np.diff(self.x1)

    @property
    def spacings(self):
        return tuple(H / c for H, c in zip(self.extents, self.counts))

    @property
    def h(self):
        """Largest element edge."""
        return float(max([np.max(self.h1), *self.spacings]))

    @property
    def n_sheets(self):
        return int(self.sheet_plus[-1]) + 1

    @property
    def n_transverse(self):
        return int(np.prod([c + 1 for c in self.counts], dtype=int))

    @property
    def n_nodes(self):
        return self.n_sheets * self.n_transverse

    @property
    def doubled_planes(self):
        return np.flatnonzero(self.sheet_plus != self.sheet_minus)

    def transverse_axes(self):
        return [np.linspace(0.0, H, c + 1) for H, c in zip(self.extents, self.counts)]

    def transverse_points(self):
        """Coordinates of transverse nodes, shape ``(n_transverse, d-1)``."""
        axes = self.transverse_axes()
        if not axes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*axes, indexing="ij")
        # x₂ varies fastest, matching the node numbering
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)

    def transverse_boundary(self):
        """Boolean mask of transverse nodes on ∂Ω′."""
        if not self.counts:
            return np.zeros(1, dtype=bool)
        idx = np.indices([c + 1 for c in self.counts]).reshape(len(self.counts), -1, order="F")
        mask = np.zeros(idx.shape[1], dtype=bool)
        for k, c in enumerate(self.counts):
            mask |= (idx[k] == 0) | (idx[k] == c)
        return mask

    def node_coordinates(self):
        """``(n_nodes, d)`` coordinates, sheet by sheet."""
        plane_of_sheet = np.empty(self.n_sheets, dtype=int)
        plane_of_sheet[self.sheet_minus] = np.arange(self.x1.size)
        plane_of_sheet[self.sheet_plus] = np.arange(self.x1.size)
        tp = self.transverse_points()
        x1 = np.repeat(self.x1[plane_of_sheet], self.n_transverse)
        return np.column_stack([x1, np.tile(tp, (self.n_sheets, 1))])

    def plane_index(self, t, rtol=1e-12):
        """Index of the grid plane at ``x₁ = t``; raises if there is none."""
        t = float(t)
        k = int(np.argmin(np.abs(self.x1 - t)))
        if abs(self.x1[k] - t) > rtol * self.length:
            raise DomainError(f"x1 = {t:g} is not a grid plane")
        return k

    # -- derived grids ----------------------------------------------------------
    def with_doubled_planes(self, planes):
        """Copy with two sheets at each listed interior plane."""
        planes = sorted(set(int(p) for p in planes))
        if any(p <= 0 or p >= self.x1.size - 1 for p in planes):
            raise DomainError("only interior planes can be doubled")
        extra = np.zeros(self.x1.size, dtype=int)
        extra[planes] = 1
        minus = np.arange(self.x1.size) + np.concatenate([[0], np.cumsum(extra)[:-1]])
        plus = minus + extra
        return Grid(self.x1, self.extents, self.counts, self.x1_breakpoints, minus, plus)

    def refined(self):
        """Bisect every element in every direction (layer elements included)."""
        mids = 0.5 * (self.x1[:-1] + self.x1[1:])
        x1 = np.empty(2 * self.x1.size - 1)
        x1[0::2] = self.x1
        x1[1::2] = mids
        g = Grid(x1, self.extents, tuple(2 * c for c in self.counts), self.x1_breakpoints)
        doubled = self.doubled_planes
        return g.with_doubled_planes(2 * doubled) if doubled.size else g

    def element_pieces(self):
        """Coefficient piece containing each x₁ element."""
        mids = 0.5 * (self.x1[:-1] + self.x1[1:])
        k = np.searchsorted(self.x1_breakpoints, mids, side="right") - 1
        return np.clip(k, 0, self.x1_breakpoints.size - 2)


def build_grid_from_breakpoints(breakpoints, transverse_extents=(), resolution=16, k_min=2):
    """Grid whose planes include every breakpoint.

    Each breakpoint interval of length ``ℓ`` gets
    ``max(k_min, ceil(ℓ · resolution / L))`` uniform elements, so thin layers
    are resolved by ``k_min`` elements whatever the global resolution.
    """
    if resolution < 1:
        raise ConfigError("resolution must be >= 1")
    if k_min < 1:
        raise ConfigError("k_min must be >= 1")
    bps = np.asarray([float(b) for b in breakpoints], dtype=float)
    if bps.size < 2 or np.any(np.diff(bps) <= 0) or bps[0] != 0.0:
        raise ConfigError("breakpoints must start at 0 and increase strictly")
    L = bps[-1]
    widths = np.diff(bps)
    if np.min(widths) <= MIN_RELATIVE_SPACING * L * k_min:
        raise ConfigError(
            f"layer of width {np.min(widths):.3e} is below the float granularity of this grid; "
            "give the layer endpoints as exact breakpoints on a rescaled domain or use a larger eps"
        )
    extents = tuple(float(h) for h in transverse_extents)
    if any(h <= 0 for h in extents):
        raise ConfigError("transverse extents must be positive")
    pieces = [np.linspace(a, b, max(k_min, math.ceil(w * resolution / L - 1e-9)) + 1)[:-1]
              for a, b, w in zip(bps[:-1], bps[1:], widths)]
    x1 = np.concatenate(pieces + [[L]])
    x1[np.searchsorted(x1, bps)] = bps  # planes sit exactly on the breakpoints
    counts = tuple(max(1, int(round(resolution * h / L))) for h in extents)
    return Grid(x1, extents, counts, bps)


def build_grid(field, transverse_extents=(), resolution=16, k_min=2):
    """Layer-conforming grid for a :class:`~strathom.media.CoefficientField`."""
    return build_grid_from_breakpoints(field.breakpoints, transverse_extents, resolution, k_min)


# -- element integrals ---------------------------------------------------------------

_D = np.array([[-0.5, -0.5], [0.5, 0.5]])  # ∫ φ_a' φ_b on any interval


def _mass_1d(h):
    return h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])


def _stiff_1d(h):
    return np.array([[1.0, -1.0], [-1.0, 1.0]]) / h


def _kron_all(factors):
    """Kronecker product with the *first* factor varying fastest."""
    return reduce(lambda acc, f: np.kron(f, acc), factors[1:], factors[0])


def derivative_blocks(h):
    """``B[j][l][a, b] = ∫ ∂_j φ_a ∂_l φ_b`` on a box with edges ``h``."""
    d = len(h)
    B = np.empty((d, d, 2 ** d, 2 ** d))
    for j in range(d):
        for l in range(d):
            facs = []
            for k in range(d):
                if k == j == l:
                    facs.append(_stiff_1d(h[k]))
                elif k == j:
                    facs.append(_D)
                elif k == l:
                    facs.append(_D.T)
                else:
                    facs.append(_mass_1d(h[k]))
            B[j, l] = _kron_all(facs)
    return B


def element_matrix(tensor, h):
    """Q1 element matrix of ``∫ T ∇u : ∇v``, local dofs ``a * n + i``.

    Symmetrized, so the assembled matrix is exactly symmetric.
    """
    n = tensor.shape[0]
    B = derivative_blocks(h)
    K = np.einsum("ijkl,jlab->aibk", tensor, B).reshape(B.shape[2] * n, B.shape[2] * n)
    return 0.5 * (K + K.T)


def mass_matrix_1d_assembled(axis):
    """Consistent P1 mass matrix on a 1D node set."""
    h = np.diff(axis)
    n = axis.size
    main = np.zeros(n)
    main[:-1] += h / 3
    main[1:] += h / 3
    off = h / 6
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def stiffness_1d_assembled(axis):
    h = np.diff(axis)
    n = axis.size
    main = np.zeros(n)
    main[:-1] += 1 / h
    main[1:] += 1 / h
    off = -1 / h
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def transverse_connectivity(counts):
    """Transverse Q1 elements as arrays of transverse node indices.

    Returns shape ``(n_elements, 2**(d-1))``; local node bits follow the
    same fastest-first order as :func:`derivative_blocks`.
    """
    if not counts:
        return np.zeros((1, 1), dtype=int)
    dims = [c + 1 for c in counts]
    starts = np.indices(counts).reshape(len(counts), -1, order="F")
    conn = []
    for bits in range(2 ** len(counts)):
        off = [(bits >> k) & 1 for k in range(len(counts))]
        idx = [starts[k] + off[k] for k in range(len(counts))]
        conn.append(np.ravel_multi_index(idx, dims, order="F"))
    return np.stack(conn, axis=1)


def transverse_mass(grid):
    """Consistent mass matrix on Σ (a 1×1 identity in 1D)."""
    if grid.d == 1:
        return sp.identity(1, format="csr")
    mats = [mass_matrix_1d_assembled(a) for a in grid.transverse_axes()]
    return reduce(lambda acc, m: sp.kron(m, acc, format="csr"), mats[1:], mats[0])


def transverse_stiffness(grid, tensor):
    """``∫_Σ T ∇′u : ∇′v`` on one sheet; ``tensor`` acts on (n, d-1, n, d-1)."""
    n = tensor.shape[0]
    if grid.d == 1:
        return sp.csr_matrix((n, n))
    Ke = element_matrix(tensor, grid.spacings)
    conn = transverse_connectivity(grid.counts)
    dofs = (conn[:, :, None] * n + np.arange(n)).reshape(conn.shape[0], -1)
    rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
    cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
    vals = np.tile(Ke.ravel(), conn.shape[0])
    size = grid.n_transverse * n
    K = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    return 0.5 * (K + K.T)


# -- systems ------------------------------------------------------------------

def constitutive_tensor(law, d):
    """Full-gradient tensor ``(n, d, n, d)`` of a law in dimension ``d``."""
    if isinstance(law, IsotropicLaw):
        if d == 1:
            raise ConfigError("isotropic elasticity needs d >= 2")
        return law.tensor(d)
    if isinstance(law, SystemTensor):
        if law.d != d:
            raise ConfigError(f"law has d={law.d} but grid has d={d}")
        return law.C
    C = np.asarray(law, dtype=float)
    if C.ndim == 2:  # conductivity matrix
        return C.reshape(1, d, 1, d)
    return C


@dataclass(frozen=True)
class Source:
    """Right-hand side ``f``: constant vector, or callable ``f(points) -> (npts, n)``."""

    value: object = 1.0

    def load(self, grid, n):
        """Exact load for constant ``f``; 2-point Gauss per direction otherwise."""
        b = np.zeros(grid.n_nodes * n)
        conn, vol_nodes = _element_nodes(grid)
        if callable(self.value):
            pts, wts, shape = _gauss_on_elements(grid)
            fv = np.asarray(self.value(pts), dtype=float).reshape(pts.shape[0], n)
            # shape: (n_elements, n_qp, 2**d) shape function values
            contrib = np.einsum("eq,eqa,eqi->eai", wts, shape, fv.reshape(wts.shape[0], wts.shape[1], n))
        else:
            fvec = np.broadcast_to(np.asarray(self.value, dtype=float), (n,))
            contrib = vol_nodes[:, :, None] * fvec[None, None, :]
        dofs = conn[:, :, None] * n + np.arange(n)
        np.add.at(b, dofs.ravel(), contrib.ravel())
        return b

    def vector(self, n):
        if callable(self.value):
            raise TypeError("callable source has no constant vector")
        return np.broadcast_to(np.asarray(self.value, dtype=float), (n,)).copy()


def _as_source(f):
    return f if isinstance(f, Source) else Source(f)


def _element_nodes(grid):
    """Global node ids of every element and ``∫ φ_a`` per element."""
    tconn = transverse_connectivity(grid.counts)
    nt = grid.n_transverse
    ne1 = grid.n_x1_elements
    left = grid.sheet_plus[:-1]
    right = grid.sheet_minus[1:]
    nloc = 2 ** grid.d
    conn = np.empty((ne1, tconn.shape[0], nloc), dtype=int)
    for a in range(nloc):
        a1, at = a & 1, a >> 1
        sheet = right if a1 else left
        conn[:, :, a] = sheet[:, None] * nt + tconn[None, :, at]
    tvol = float(np.prod(grid.spacings)) if grid.d > 1 else 1.0
    vol = grid.h1[:, None] * tvol / nloc
    vol_nodes = np.broadcast_to(vol[:, :, None], conn.shape[:2] + (nloc,)).reshape(-1, nloc)
    return conn.reshape(-1, nloc), vol_nodes


def _gauss_on_elements(grid, npts=2):
    """Gauss points, weights and shape values on every element."""
    g, w = np.polynomial.legendre.leggauss(npts)
    g = 0.5 * (g + 1)
    w = 0.5 * w
    d = grid.d
    ref = np.stack(np.meshgrid(*([g] * d), indexing="ij"), -1).reshape(-1, d)
    refw = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), -1).reshape(-1, d), axis=1)
    shape = np.ones((ref.shape[0], 2 ** d))
    for a in range(2 ** d):
        for k in range(d):
            bit = (a >> k) & 1
            shape[:, a] *= ref[:, k] if bit else 1 - ref[:, k]
    taxes = grid.transverse_axes()
    tstarts = (np.indices(grid.counts).reshape(len(grid.counts), -1, order="F")
               if grid.counts else np.zeros((0, 1), dtype=int))
    hh_t = list(grid.spacings)
    pts, wts = [], []
    for e in range(grid.n_x1_elements):
        hh = np.asarray([grid.h1[e]] + hh_t)
        for te in range(tstarts.shape[1]):
            lo = np.asarray([grid.x1[e]] + [taxes[k][tstarts[k, te]] for k in range(d - 1)])
            pts.append(lo + ref * hh)
            wts.append(refw * np.prod(hh))
    pts = np.concatenate(pts)
    wts = np.asarray(wts)
    return pts, wts, np.broadcast_to(shape, (wts.shape[0],) + shape.shape)


@dataclass(frozen=True)
class FemSystem:
    """Sparse system restricted to free DOFs.

    ``stiffness`` and ``load`` live on the free DOFs; ``dirichlet_mask``
    marks constrained entries of the full DOF vector.
    """

    stiffness: sp.csr_matrix
    load: np.ndarray
    dirichlet_mask: np.ndarray
    grid: Grid
    n_components: int
    full_stiffness: sp.csr_matrix = field(repr=False, default=None)

    @property
    def free(self):
        return np.flatnonzero(~self.dirichlet_mask)

    @property
    def n_dofs(self):
        return int(self.stiffness.shape[0])


def assemble_bulk(grid, tensors, n):
    """Full stiffness for per-x₁-element tensors ``tensors[e]`` of shape (n, d, n, d).

    Shared by the fine-scale and effective solvers so that identical
    coefficients produce identical matrices.
    """
    tconn = transverse_connectivity(grid.counts)
    conn, _ = _element_nodes(grid)
    conn = conn.reshape(grid.n_x1_elements, tconn.shape[0], -1)
    nloc = conn.shape[2] * n
    rows, cols, vals = [], [], []
    cache = {}
    for e in range(grid.n_x1_elements):
        T = np.asarray(tensors[e], dtype=float)
        key = (T.tobytes(), grid.h1[e])
        Ke = cache.get(key)
        if Ke is None:
            Ke = cache[key] = element_matrix(T, (grid.h1[e],) + grid.spacings)
        dofs = (conn[e][:, :, None] * n + np.arange(n)).reshape(tconn.shape[0], nloc)
        rows.append(np.repeat(dofs, nloc, axis=1).ravel())
        cols.append(np.tile(dofs, (1, nloc)).ravel())
        vals.append(np.tile(Ke.ravel(), tconn.shape[0]))
    size = grid.n_nodes * n
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ).tocsr()
    return K


def dirichlet_mask(grid, n):
    """Constrain both end sheets and the transverse boundary of every sheet."""
    tb = grid.transverse_boundary()
    mask_nodes = np.tile(tb, grid.n_sheets)
    nt = grid.n_transverse
    mask_nodes[: nt] = True
    mask_nodes[(grid.n_sheets - 1) * nt:] = True
    return np.repeat(mask_nodes, n)


def finalize_system(K, b, grid, n):
    """Symmetrize, restrict to free DOFs and pack a :class:`FemSystem`."""
    K = (0.5 * (K + K.T)).tocsr()
    K.sum_duplicates()
    K.sort_indices()
    mask = dirichlet_mask(grid, n)
    free = np.flatnonzero(~mask)
    Kf = K[free][:, free].tocsr()
    Kf.sort_indices()
    return FemSystem(Kf, b[free].copy(), mask, grid, n, K)


def assemble(grid, field, law, f=1.0):
    """Fine-scale system for ``-div(μ_ε C ∇u) = f`` with Dirichlet data on ∂Ω.

    Parameters
    ----------
    grid : Grid
        Must have a plane at every breakpoint of ``field``.
    field : CoefficientField
    law : IsotropicLaw, SystemTensor or conductivity matrix
    f : float, sequence or callable
    """
    for bp in field.breakpoints:
        if np.min(np.abs(grid.x1 - bp)) > 1e-12 * grid.length:
            raise DomainError(f"grid does not conform to the coefficient breakpoint {bp:g}")
    C = constitutive_tensor(law, grid.d)
    n = C.shape[0]
    mids = 0.5 * (grid.x1[:-1] + grid.x1[1:])
    mu = field(mids)
    tensors = [m * C for m in mu]
    K = assemble_bulk(grid, tensors, n)
    b = _as_source(f).load(grid, n)
    return finalize_system(K, b, grid, n)


# -- solving -------------------------------------------------------------------

def pcg(A, b, tol=1e-10, max_iter=None, x0=None):
    """Conjugate gradients with Jacobi (diagonal) preconditioning.

    Stops when ``‖b - A x‖ ≤ tol ‖b‖``. Returns ``(x, history)`` where
    ``history`` lists relative residual norms, one per iteration.
    """
    n = b.size
    max_iter = 10 * n + 100 if max_iter is None else max_iter
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), [0.0]
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("matrix has a nonpositive diagonal entry; not SPD")
    inv_diag = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    history = [float(np.linalg.norm(r)) / bnorm]
    for _ in range(max_iter):
        if history[-1] <= tol:
            return x, history
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise SolverError("matrix is not positive definite (pᵀAp ≤ 0)", history)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        history.append(float(np.linalg.norm(r)) / bnorm)
    if history[-1] <= tol:
        return x, history
    raise SolverError(
        f"PCG did not reach relative residual {tol:g} in {max_iter} iterations "
        f"(last {history[-1]:.3e})", history)


@dataclass(frozen=True)
class FemSolution:
    """Nodal solution with the grid it lives on.

    ``values`` has shape ``(n_nodes, n)`` and includes the Dirichlet zeros.
    """

    values: np.ndarray
    grid: Grid
    residual: float
    iterations: int
    residual_history: tuple = ()
    free_values: np.ndarray = field(default=None, repr=False)

    @property
    def n_components(self):
        return self.values.shape[1]

    @property
    def jump_locations(self):
        return tuple(float(self.grid.x1[p]) for p in self.grid.doubled_planes)

    @property
    def x1_breakpoints(self):
        return self.grid.x1

    def sheet_values(self, sheet):
        nt = self.grid.n_transverse
        return self.values[sheet * nt:(sheet + 1) * nt]

    def evaluate(self, points, side="right"):
        """Multilinear interpolation at ``points`` (shape ``(npts, d)``).

        On a doubled plane ``side`` picks the sheet: ``"right"`` the x₁ > t
        side, ``"left"`` the x₁ < t side.
        """
        g = self.grid
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != g.d:
            pts = pts.reshape(-1, g.d)
        e = np.clip(np.searchsorted(g.x1, pts[:, 0], side=side) - 1, 0, g.n_x1_elements - 1)
        s1 = np.clip((pts[:, 0] - g.x1[e]) / g.h1[e], 0.0, 1.0)
        sheets = (g.sheet_plus[e], g.sheet_minus[e + 1])
        w1 = (1 - s1, s1)
        tdims = [c + 1 for c in g.counts]
        tidx, tw = [], []
        for k, (H, c) in enumerate(zip(g.extents, g.counts)):
            y = pts[:, k + 1] / (H / c)
            i = np.clip(np.floor(y).astype(int), 0, c - 1)
            t = np.clip(y - i, 0.0, 1.0)
            tidx.append(i)
            tw.append((1 - t, t))
        out = np.zeros((pts.shape[0], self.n_components))
        nt = g.n_transverse
        for a in range(2 ** g.d):
            bits = [(a >> k) & 1 for k in range(g.d)]
            w = w1[bits[0]].copy()
            if g.d > 1:
                tnode = np.ravel_multi_index(
                    [tidx[k] + bits[k + 1] for k in range(g.d - 1)], tdims, order="F")
                for k in range(g.d - 1):
                    w = w * tw[k][bits[k + 1]]
            else:
                tnode = np.zeros(pts.shape[0], dtype=int)
            out += w[:, None] * self.values[sheets[bits[0]] * nt + tnode]
        return out

    def to_csv(self):
        """Node coordinates followed by components, one node per line."""
        coords = self.grid.node_coordinates()
        d, n = self.grid.d, self.n_components
        head = [f"x{k + 1}" for k in range(d)] + [f"u{i + 1}" for i in range(n)]
        lines = [",".join(head)]
        for c, v in zip(coords, self.values):
            lines.append(",".join(format(x, ".17g") for x in (*c, *v)))
        return "\n".join(lines) + "\n"

    def to_plotdata(self, component=0):
        """Structured-grid blocks: ``x1 [x2] u`` rows, blank line between scanlines.

        3D grids are cut at the transverse mid-plane of x₃.
        """
        g = self.grid
        coords = g.node_coordinates()
        vals = self.values[:, component]
        lines = []
        if g.d == 1:
            for c, v in zip(coords, vals):
                lines.append(f"{c[0]:.17g} {v:.17g}")
            return "\n".join(lines) + "\n"
        tp = g.transverse_points()
        keep = np.ones(tp.shape[0], dtype=bool)
        if g.d == 3:
            z = g.transverse_axes()[1]
            keep = tp[:, 1] == z[len(z) // 2]
        for tnode in np.flatnonzero(keep):
            for s in range(g.n_sheets):
                node = s * g.n_transverse + tnode
                lines.append(f"{coords[node, 0]:.17g} {coords[node, 1]:.17g} {vals[node]:.17g}")
            lines.append("")
        return "\n".join(lines) + "\n"


def solve(system, tol=1e-10, max_iter=None, method="pcg"):
    """Solve the free-DOF system; ``method`` is ``"pcg"`` or ``"direct"``."""
    b = system.load
    if method == "pcg":
        x, hist = pcg(system.stiffness, b, tol=tol, max_iter=max_iter)
        iters = len(hist) - 1
    elif method == "direct":
        x = spla.spsolve(system.stiffness.tocsc(), b) if b.size else np.zeros(0)
        bn = np.linalg.norm(b)
        hist = [float(np.linalg.norm(b - system.stiffness @ x) / bn) if bn else 0.0]
        iters = 0
    else:
        raise ConfigError(f"unknown solver method {method!r}")
    full = np.zeros(system.dirichlet_mask.size)
    full[system.free] = x
    n = system.n_components
    return FemSolution(full.reshape(-1, n), system.grid, hist[-1], iters, tuple(hist), x)


def energy(solution, system):
    """``uᵀ K u`` on the free DOFs."""
    u = solution.free_values
    return float(u @ (system.stiffness @ u))


def load_pairing(solution, system):
    """``uᵀ b`` on the free DOFs."""
    return float(solution.free_values @ system.load)


# -- error norms -------------------------------------------------------------

def _gauss_segments(cuts, npts=3):
    g, w = np.polynomial.legendre.leggauss(npts)
    a, b = cuts[:-1], cuts[1:]
    half = 0.5 * (b - a)
    pts = (0.5 * (a + b))[:, None] + half[:, None] * g[None, :]
    wts = half[:, None] * w[None, :]
    return pts.ravel(), wts.ravel()


def _cuts(*arrays, lo, hi):
    c = np.unique(np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays] + [[lo, hi]]))
    c = c[(c >= lo) & (c <= hi)]
    # merge cuts closer than round-off so no zero-length segment survives
    keep = np.concatenate([[True], np.diff(c) > 1e-14 * (hi - lo)])
    return c[keep]


def error_norms(u_fine, u_ref, which="L2", points_per_direction=3):
    """``‖u_fine - u_ref‖`` in L¹ or L² by composite Gauss quadrature.

    Elements are split at every grid plane of both fields and at the jump
    locations of ``u_ref``, so jumps never sit inside a quadrature cell.
    ``u_ref`` must provide ``evaluate(points, side)``; optional attributes
    ``jump_locations`` and ``x1_breakpoints`` refine the splitting.
    """
    g = u_fine.grid
    ref_bps = getattr(u_ref, "x1_breakpoints", ())
    ref_jumps = getattr(u_ref, "jump_locations", ())
    cuts1 = _cuts(g.x1, ref_bps, ref_jumps, lo=0.0, hi=g.length)
    p1, w1 = _gauss_segments(cuts1, points_per_direction)
    axes_pts, axes_w = [p1], [w1]
    ref_grid = getattr(u_ref, "grid", None)
    for k, axis in enumerate(g.transverse_axes()):
        other = ref_grid.transverse_axes()[k] if ref_grid is not None and ref_grid.d == g.d else ()
        pk, wk = _gauss_segments(_cuts(axis, other, lo=0.0, hi=axis[-1]), points_per_direction)
        axes_pts.append(pk)
        axes_w.append(wk)
    total = 0.0
    # loop over x₁ quadrature points in chunks to bound memory
    tp = np.stack(np.meshgrid(*axes_pts[1:], indexing="ij"), -1).reshape(-1, g.d - 1) if g.d > 1 else np.zeros((1, 0))
    tw = (np.prod(np.stack(np.meshgrid(*axes_w[1:], indexing="ij"), -1).reshape(-1, g.d - 1), axis=1)
          if g.d > 1 else np.ones(1))
    chunk = max(1, 200_000 // tp.shape[0])
    p = {"L1": 1, "L2": 2}.get(which)
    if p is None:
        raise ValueError(f"unknown norm {which!r}; expected 'L1' or 'L2'")
    for start in range(0, p1.size, chunk):
        x1 = p1[start:start + chunk]
        wx = w1[start:start + chunk]
        pts = np.column_stack([np.repeat(x1, tp.shape[0]), np.tile(tp, (x1.size, 1))])
        wts = np.repeat(wx, tp.shape[0]) * np.tile(tw, x1.size)
        diff = u_fine.evaluate(pts) - np.asarray(u_ref.evaluate(pts), dtype=float).reshape(pts.shape[0], -1)
        if p == 1:
            total += float(np.sum(wts * np.sum(np.abs(diff), axis=1)))
        else:
            total += float(np.sum(wts * np.sum(diff ** 2, axis=1)))
    return total if p == 1 else math.sqrt(total)


@dataclass(frozen=True)
class ZeroField:
    """The zero function with ``n`` components (for norms of a solution)."""

    n: int = 1

    def evaluate(self, points, side="right"):
        return np.zeros((np.atleast_2d(points).shape[0], self.n))
