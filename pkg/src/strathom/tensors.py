"""Constitutive and effective tensors for stratified media.

Conventions
-----------
Fourth-order tensors act on gradients ``G`` of shape ``(n, d)``: the
component index comes first, the derivative direction second, and
``(C G)_{ij} = sum_{kl} C[i, j, k, l] G[k, l]``. Direction 0 is the
stratification direction x₁. Indices in docstrings are 1-based to match
the usual notation (``C_{i1p1}`` is ``C[i, 0, p, 0]``).

Two independent paths are kept on purpose:

* isotropic elasticity works with 3×3 symmetric strains and closed-form
  maps ``a⊥``, ``a∥`` (:func:`iso_a_perp`, :func:`iso_a_par`);
* general systems work with full gradients through ``T = C_{i1p1}`` and
  its inverse (:func:`sys_effective`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisError

ELLIPTICITY_RTOL = 1e-10
SYMMETRY_RTOL = 1e-12


# -- laws ---------------------------------------------------------------------

@dataclass(frozen=True)
class IsotropicLaw:
    """λ_ε = l μ_ε; stress ``l tr(e) I + 2 e`` per unit μ."""

    l: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.l) and self.l >= 0):
            raise HypothesisError(f"isotropic ratio l must be >= 0, got {self.l}")

    def stress(self, Xi):
        """Stress of a strain (or a stack of strains on leading axes)."""
        Xi = np.asarray(Xi, dtype=float)
        tr = np.trace(Xi, axis1=-2, axis2=-1)[..., None, None]
        return self.l * tr * np.eye(Xi.shape[-1]) + 2.0 * Xi

    def tensor(self, d=3):
        """``C_{ijkl} = l δ_ij δ_kl + δ_ik δ_jl + δ_il δ_jk`` on full gradients.

        ``C G : G' = l tr G tr G' + 2 sym(G) : sym(G')``; positive only on
        symmetric gradients (Korn's inequality does the rest).
        """
        I = np.eye(d)
        return (self.l * np.einsum("ij,kl->ijkl", I, I)
                + np.einsum("ik,jl->ijkl", I, I)
                + np.einsum("il,jk->ijkl", I, I))


def gram(C):
    """``(n d) × (n d)`` matrix of the quadratic form ``G ↦ C G : G``."""
    n, d = C.shape[:2]
    return C.reshape(n * d, n * d)


def t_block(C):
    """``T_{ip} = C_{i1p1}``."""
    return np.array(C[:, 0, :, 0], dtype=float)


@dataclass(frozen=True)
class SystemTensor:
    """Symmetric, elliptic tensor of a second-order system with invertible T.

    Set ``require_ellipticity=False`` for tensors that are only positive on a
    subspace (the isotropic elasticity tensor viewed on full gradients).
    """

    C: np.ndarray
    require_ellipticity: bool = field(default=True, compare=False)

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.ndim != 4 or C.shape[0] != C.shape[2] or C.shape[1] != C.shape[3]:
            raise HypothesisError(f"C must have shape (n, d, n, d), got {C.shape}")
        object.__setattr__(self, "C", C)
        G = gram(C)
        scale = max(np.max(np.abs(G)), 1.0)
        if np.max(np.abs(G - G.T)) > SYMMETRY_RTOL * scale:
            raise HypothesisError("C is not symmetric: C_ijpq != C_pqij")
        if self.require_ellipticity:
            ev = np.linalg.eigvalsh(0.5 * (G + G.T))
            if ev[0] <= ELLIPTICITY_RTOL * ev[-1]:
                raise HypothesisError(
                    f"C is not elliptic: smallest eigenvalue {ev[0]:.3e} vs largest {ev[-1]:.3e}"
                )
        _factor_T(C)

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def d(self):
        return self.C.shape[1]

    @property
    def T(self):
        return t_block(self.C)

    @classmethod
    def from_gram(cls, G, n, d, **kw):
        return cls(np.asarray(G, dtype=float).reshape(n, d, n, d), **kw)

    @classmethod
    def from_conductivity(cls, A):
        """Scalar heat law ``C_{1j1q} = A_{jq}`` (n = 1)."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A.reshape(1, A.shape[0], 1, A.shape[1]))


def _factor_T(C):
    T = t_block(C)
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > 1e14:
        raise HypothesisError(f"T = C_(i1p1) must be invertible; condition number {cond:.3e}")
    return T, cond


# -- isotropic elasticity -------------------------------------------------------

def iso_a_perp(law, Xi):
    """Normal effective map ``a⊥Ξ`` for 3×3 symmetric ``Ξ``.

    Row 1 is ``(l trΞ + 2Ξ₁₁, 2Ξ₁₂, 2Ξ₁₃)``; the (2,2) and (3,3) entries
    are ``l²/(l+2) trΞ + 2l/(l+2) Ξ₁₁``; the (2,3) entry is zero.
    """
    l = law.l
    Xi = np.asarray(Xi, dtype=float)
    tr = np.trace(Xi, axis1=-2, axis2=-1)
    out = np.zeros(Xi.shape)
    out[..., 0, 0] = l * tr + 2 * Xi[..., 0, 0]
    out[..., 0, 1] = out[..., 1, 0] = 2 * Xi[..., 0, 1]
    out[..., 0, 2] = out[..., 2, 0] = 2 * Xi[..., 0, 2]
    out[..., 1, 1] = out[..., 2, 2] = l * l / (l + 2) * tr + 2 * l / (l + 2) * Xi[..., 0, 0]
    return out


def iso_a_par(law, Gamma):
    """Tangential effective map on 2×2 symmetric strains (indices 2, 3)."""
    l = law.l
    Gamma = np.asarray(Gamma, dtype=float)
    tr = np.trace(Gamma, axis1=-2, axis2=-1)[..., None, None]
    return 2 * l / (l + 2) * tr * np.eye(2) + 2 * Gamma


def iso_interface_matrix(law):
    """Spring matrix ``diag(l+2, 1, 1)`` across a ν-atom."""
    return np.diag([law.l + 2.0, 1.0, 1.0])


# -- effective laws ---------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveLaw:
    """Effective tensors on full gradients of shape (n, d).

    ``a_par`` vanishes whenever a derivative index is 1 (x₁ direction).
    """

    a_perp: np.ndarray
    a_par: np.ndarray
    A_iface: np.ndarray
    kind: str
    source: object = None

    @property
    def n(self):
        return self.a_perp.shape[0]

    @property
    def d(self):
        return self.a_perp.shape[1]

    @property
    def A_perp(self):
        """Heat case: d×d matrix of ``a_perp``."""
        return self.a_perp[0, :, 0, :]

    @property
    def A_par(self):
        """Heat case: tangential (d-1)×(d-1) block of ``a_par``."""
        return self.a_par[0, 1:, 0, 1:]

    def bulk(self, nu_density, m_density):
        """``a = (ν/L¹)⁻¹ a⊥ + (m/L¹) a∥`` for one density piece."""
        if not nu_density > 0:
            raise HypothesisError("degenerate bulk law: ν has zero density on a piece")
        return self.a_perp / nu_density + m_density * self.a_par

    def check(self, rtol=1e-12):
        """Symmetry and nonnegativity of both forms; SPD interface matrix."""
        msgs = []
        for name, t in (("a_perp", self.a_perp), ("a_par", self.a_par)):
            G = gram(t)
            if np.max(np.abs(G - G.T)) > rtol * max(1.0, np.max(np.abs(G))):
                msgs.append(f"{name} not symmetric")
            ev = np.linalg.eigvalsh(0.5 * (G + G.T))
            if ev[0] < -rtol * max(1.0, ev[-1]):
                msgs.append(f"{name} not nonnegative (min eig {ev[0]:.3e})")
        A = self.A_iface
        if np.max(np.abs(A - A.T)) > rtol * max(1.0, np.max(np.abs(A))) or np.linalg.eigvalsh(A)[0] <= 0:
            msgs.append("interface matrix not SPD")
        return msgs


def _sym_basis(d):
    """``sym(E_kl)`` for every (k, l)."""
    E = np.zeros((d, d, d, d))
    for k in range(d):
        for l in range(d):
            E[k, l, k, l] += 0.5
            E[k, l, l, k] += 0.5
    return E


def iso_effective(law):
    """Isotropic elasticity laws as full-gradient tensors (n = d = 3).

    ``a_perp[i, j, k, l] = (a⊥ sym(E_kl))_ij``; because ``a⊥`` returns a
    symmetric matrix, ``a_perp G : G'`` equals ``a⊥ sym G : sym G'``.
    ``a_par`` only couples ``u₂, u₃`` differentiated along ``x₂, x₃``.
    """
    E = _sym_basis(3)
    a_perp = np.zeros((3, 3, 3, 3))
    a_par = np.zeros((3, 3, 3, 3))
    for k in range(3):
        for l in range(3):
            a_perp[:, :, k, l] = iso_a_perp(law, E[k, l])
            if k > 0 and l > 0:
                a_par[1:, 1:, k, l] = iso_a_par(law, E[k, l][1:, 1:])
    return EffectiveLaw(a_perp, a_par, iso_interface_matrix(law), "iso-elastic", law)


def sys_effective(C):
    """General system: ``a⊥ = C T⁻¹ C`` and ``a∥ = (C - C T⁻¹ C)`` tangentially.

    ``a⊥_{ijkl} = Σ C_{ijp1} (T⁻¹)_{pr} C_{r1kl}``. The tangential tensor is
    the Schur complement restricted to derivative indices ≥ 2; a
    brute-force laminate cell minimization reproduces exactly this sign.
    """
    if not isinstance(C, SystemTensor):
        C = SystemTensor(C)
    T, _ = _factor_T(C.C)
    Tinv = np.linalg.inv(T)
    CT = C.C
    a_perp = np.einsum("ijp,pr,rkl->ijkl", CT[:, :, :, 0], Tinv, CT[:, 0, :, :])
    a_par = CT - a_perp
    a_par = a_par.copy()
    a_par[:, 0, :, :] = 0.0
    a_par[:, :, :, 0] = 0.0
    a_perp = 0.5 * (a_perp + a_perp.transpose(2, 3, 0, 1))
    a_par = 0.5 * (a_par + a_par.transpose(2, 3, 0, 1))
    kind = "heat" if C.n == 1 else "system"
    return EffectiveLaw(a_perp, a_par, T, kind, C)


def heat_effective(A):
    """Heat equation ``-div(μ_ε A ∇u)``: ``A⊥_ij = A_i1 A_1j / A_11``.

    ``A∥_ij = (A_ij - A_i1 A_1j / A_11)`` for i, j ≥ 2 and 0 otherwise.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    if A.shape != (d, d) or np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * max(1.0, np.max(np.abs(A))):
        raise HypothesisError("conductivity must be a symmetric square matrix")
    if np.linalg.eigvalsh(A)[0] <= 0:
        raise HypothesisError("conductivity must be positive definite")
    Ap = np.outer(A[:, 0], A[0, :]) / A[0, 0]
    Apar = np.zeros_like(A)
    Apar[1:, 1:] = A[1:, 1:] - Ap[1:, 1:]
    return EffectiveLaw(
        Ap.reshape(1, d, 1, d), Apar.reshape(1, d, 1, d), np.array([[A[0, 0]]]), "heat", A
    )


def effective_law(law):
    """Dispatch on the law type."""
    if isinstance(law, IsotropicLaw):
        return iso_effective(law)
    if isinstance(law, SystemTensor):
        return sys_effective(law)
    raise TypeError(f"no effective law for {type(law).__name__}")


# -- bulk tensor ------------------------------------------------------------------

@dataclass(frozen=True)
class TensorField:
    """Piecewise-constant tensor field a(x₁)."""

    breakpoints: np.ndarray
    tensors: tuple

    def at(self, x1):
        k = int(np.clip(np.searchsorted(self.breakpoints, x1, side="right") - 1, 0, len(self.tensors) - 1))
        return self.tensors[k]


def bulk_tensor(pair, eff):
    """``a(x₁) = (1/ρ_ν) a⊥ + ρ_m a∥`` on the common refinement of the densities."""
    bps = sorted(set(pair.nu.density_breakpoints) | set(pair.m.density_breakpoints))
    bp = np.array([float(b) for b in bps])
    mids = 0.5 * (bp[:-1] + bp[1:])
    rn = pair.nu.density()(mids)
    rm = pair.m.density()(mids)
    tensors = []
    for x, a, b in zip(mids, rn, rm):
        if not a > 0:
            raise HypothesisError(f"degenerate bulk law: ν has zero density near x1={x:g}")
        tensors.append(eff.bulk(a, b))
    return TensorField(bp, tuple(tensors))


# -- identities -----------------------------------------------------------------

def _pair(lhs, rhs):
    if np.ndim(lhs) == 0:
        return float(lhs), float(rhs)
    return lhs, rhs


def _dot(a, b):
    return np.sum(a * b, axis=(-2, -1))


def rearrangement_identity_iso(law, Xi, Xi_prime):
    """Both sides of the isotropic rearrangement of ``σ(Ξ) : Ξ'``.

    The right side regroups the pairing into normal-stress products
    ``σ₁ᵢσ'₁ᵢ`` and tangential-strain products. Arguments may carry leading
    batch axes; the sides are then arrays.
    """
    l = law.l
    e, ep = np.asarray(Xi, float), np.asarray(Xi_prime, float)
    s, sp = law.stress(e), law.stress(ep)
    lhs = _dot(s, ep)
    normal = s[..., 0, 0] * sp[..., 0, 0] / (l + 2) + s[..., 0, 1] * sp[..., 0, 1] + s[..., 0, 2] * sp[..., 0, 2]
    rhs = normal + _tangential_products(l, e[..., 1:, 1:], ep[..., 1:, 1:])
    return _pair(lhs, rhs)


def _tangential_products(l, g, gp):
    return (4 * g[..., 0, 1] * gp[..., 0, 1]
            + 4 * (l + 1) / (l + 2) * (g[..., 0, 0] * gp[..., 0, 0] + g[..., 1, 1] * gp[..., 1, 1])
            + 2 * l / (l + 2) * (g[..., 0, 0] * gp[..., 1, 1] + g[..., 1, 1] * gp[..., 0, 0]))


def reorg_identity(law, Xi, Xi_prime):
    """``σ₁₁σ'₁₁/(l+2) + Σ_α σ₁ασ'₁α`` against ``a⊥Ξ : Ξ'``."""
    l = law.l
    s, sp = law.stress(Xi), law.stress(Xi_prime)
    lhs = s[..., 0, 0] * sp[..., 0, 0] / (l + 2) + s[..., 0, 1] * sp[..., 0, 1] + s[..., 0, 2] * sp[..., 0, 2]
    rhs = _dot(iso_a_perp(law, Xi), np.asarray(Xi_prime, float))
    return _pair(lhs, rhs)


def reorg_identity_tangential(law, Gamma, Gamma_prime):
    """Tangential-strain products against ``a∥Γ : Γ'`` (2×2 arguments)."""
    g, gp = np.asarray(Gamma, float), np.asarray(Gamma_prime, float)
    lhs = _tangential_products(law.l, g, gp)
    rhs = _dot(iso_a_par(law, g), gp)
    return _pair(lhs, rhs)


def rearrangement_identity_sys(C, G, G_prime):
    """``C G : G'`` against ``(T⁻¹CG)e₁·(CG')e₁ - (T⁻¹CG_x')e₁·(CG'_x')e₁ + CG_x':G'_x'``.

    ``G_x'`` is ``G`` with its first column (x₁ derivatives) zeroed. ``C``
    may be a :class:`SystemTensor` or a raw array; raw arrays (and ``G``,
    ``G'``) may carry leading batch axes.
    """
    if isinstance(C, SystemTensor):
        Ct, T = C.C, C.T
    else:
        Ct = np.asarray(C, float)
        T = Ct[..., :, 0, :, 0]
        cond = np.linalg.cond(T)
        if not np.all(np.isfinite(cond)) or np.max(cond) > 1e14:
            raise HypothesisError(f"T = C_(i1p1) must be invertible; condition number {np.max(cond):.3e}")
    G, Gp = np.asarray(G, float), np.asarray(G_prime, float)
    Gx, Gpx = G.copy(), Gp.copy()
    Gx[..., 0] = 0.0
    Gpx[..., 0] = 0.0
    apply = lambda X: np.einsum("...ijkl,...kl->...ij", Ct, X)
    CG, CGp, CGx, CGpx = apply(G), apply(Gp), apply(Gx), apply(Gpx)
    y = np.linalg.solve(T, np.stack([CG[..., 0], CGx[..., 0]], axis=-1))
    lhs = _dot(CG, Gp)
    rhs = (np.sum(y[..., 0] * CGp[..., 0], axis=-1) - np.sum(y[..., 1] * CGpx[..., 0], axis=-1)
           + _dot(CGx, Gpx))
    return _pair(lhs, rhs)
