"""Closed-form solutions of the one-dimensional problems.

In one dimension the flux ``σ = μ u'`` satisfies ``-σ' = f``, so
``σ = σ₀ - F`` with ``F(x) = ∫₀ˣ f``. Writing ``u' = σ/μ`` as the measure
identity ``Du = σ ν`` gives, for any finite measure ν without atoms at the
endpoints,

    u(x) = ∫_(0,x] (σ₀ - F) dν,     σ₀ = ∫ F dν / ν([0, L]),

where σ₀ enforces ``u(L) = 0``. An atom of ν at ``t`` produces the jump
``ν({t}) (σ₀ - F(t))``. The fine-scale problem is the special case
``ν = μ_ε⁻¹ dx``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import Measure1D, integrate
from .media import empirical_measures
from .piecewise import PiecewisePolynomial


def _source(f, length):
    if isinstance(f, PiecewisePolynomial):
        return f
    return PiecewisePolynomial.constant_pieces([0.0, length], [float(f)])


@dataclass(frozen=True)
class PiecewiseSolution1D:
    """Exact 1D solution: right-continuous piecewise polynomial plus metadata.

    Attributes
    ----------
    u : PiecewisePolynomial
        The solution, with breakpoints at the density breakpoints of ν and
        its atoms.
    sigma0 : float
        Flux at ``x = 0``.
    jumps : tuple of (t, value)
        ``u(t+) - u(t-)`` at each atom of ν.
    flux : PiecewisePolynomial
        ``σ₀ - F``.
    """

    u: PiecewisePolynomial
    sigma0: float
    jumps: tuple
    flux: PiecewisePolynomial

    @property
    def length(self):
        return self.u.domain[1]

    @property
    def jump_locations(self):
        return tuple(float(t) for t, _ in self.jumps)

    @property
    def x1_breakpoints(self):
        return self.u.breakpoints

    def __call__(self, x, side="right"):
        return self.u(x, side)

    def evaluate(self, points, side="right"):
        """Field protocol used by :func:`strathom.fem.error_norms`."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x = pts[:, 0] if pts.shape[1] >= 1 else pts.ravel()
        return self.u(x, side)[:, None]

    def rise(self, a, b):
        """``u(b) - u(a)`` using outer one-sided values (``u(a-)``, ``u(b+)``)."""
        return float(self.u(b, "right") - self.u(a, "left"))

    def energy(self):
        """``∫ f u dx``, which equals the energy ``∫ σ du``."""
        f = -self.flux.derivative()
        return float((f * self.u).integral())

    def to_csv(self, samples=201):
        """Sampled values in the FEM CSV schema (``x1,u1``), both sides at jumps."""
        L = self.length
        x = np.union1d(np.linspace(0.0, L, samples), self.u.breakpoints)
        rows = ["x1,u1"]
        for xi in x:
            left, right = self.u(xi, "left"), self.u(xi, "right")
            if left != right:
                rows.append(f"{xi:.17g},{float(left):.17g}")
            rows.append(f"{xi:.17g},{float(right):.17g}")
        return "\n".join(rows) + "\n"


def solve_limit_1d(nu, f=1.0, conductivity=1.0):
    """Exact solution of ``-(σ)' = f``, ``Du = σ ν/A₁₁``, ``u(0) = u(L) = 0``.

    Parameters
    ----------
    nu : Measure1D
        Limit measure (density plus atoms).
    f : float or PiecewisePolynomial
        Piecewise-constant source.
    conductivity : float
        Scalar A₁₁; it rescales ν.
    """
    L = nu.length
    fpp = _source(f, L)
    F = fpp.antiderivative()
    total = nu.total_mass()
    sigma0 = integrate(nu, F) / total
    flux = -F + sigma0
    rho = nu.density() * (1.0 / conductivity)
    u = (flux * rho).antiderivative()
    atoms = [(float(t), w / conductivity) for t, w in nu.atoms]
    u = u.refine([t for t, _ in atoms])
    jumps = []
    for t, w in atoms:
        j = w * float(flux(t))
        k = np.searchsorted(u.breakpoints, t)
        coeffs = u.coeffs.copy()
        coeffs[k:, 0] += j
        u = PiecewisePolynomial(u.breakpoints, coeffs)
        jumps.append((t, j))
    return PiecewiseSolution1D(u, float(sigma0), tuple(jumps), flux)


def solve_eps_1d(field, f=1.0, conductivity=1.0):
    """Exact fine-scale solution for a piecewise-constant coefficient field."""
    return solve_limit_1d(empirical_measures(field).nu, f, conductivity)


def compare_1d(a, b, norm="L1", collar=0.0, around=()):
    """Exact distance between two 1D solutions.

    ``norm`` is ``"L1"``, ``"L2"`` or ``"Linf-off-atoms"``. The last one
    drops the intervals ``[c - collar, c + collar]`` around every jump
    location of either solution and every point in ``around`` (layer
    centres, for instance).
    """
    if not np.isclose(a.length, b.length):
        raise ValueError("solutions live on different intervals")
    diff = a.u - b.u
    if norm == "L1":
        return diff.norm(1)
    if norm == "L2":
        return diff.norm(2)
    if norm == "Linf-off-atoms":
        centres = set(a.jump_locations) | set(b.jump_locations) | {float(c) for c in around}
        return diff.norm(np.inf, exclude=[(c - collar, c + collar) for c in sorted(centres)])
    raise ValueError(f"unknown norm {norm!r}")


def lebesgue(length=1.0):
    """ν = L¹ on (0, length)."""
    return Measure1D.lebesgue(length)
