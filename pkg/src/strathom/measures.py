"""Finite positive Radon measures on ``[0, L]``.

A :class:`Measure1D` is a piecewise-constant density plus finitely many
atoms. It carries the limit measures ν, m and their fine-scale
approximations ν_ε = μ_ε⁻¹ dx, m_ε = μ_ε dx.

Atom locations and breakpoints keep the exact type they were given in
(``Fraction`` for rational or decimal strings), so that the common-atom test
compares locations exactly rather than up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

import numpy as np

from .errors import DomainError
from .piecewise import PiecewisePolynomial


def exact(value):
    """Parse ``value`` into an exact number when it is written exactly.

    Strings such as ``"1/3"`` or ``"0.25"`` and integers become
    :class:`~fractions.Fraction`; floats and fractions pass through.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"cannot parse number {value!r}") from exc
    if isinstance(value, Real):
        return float(value)
    raise TypeError(f"not a real number: {value!r}")


def to_config_number(value):
    """Inverse of :func:`exact` for serialization."""
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return float(value)


@dataclass(frozen=True)
class Measure1D:
    """Density on ``density_breakpoints`` pieces plus a sorted atom list."""

    domain_length: Real
    density_breakpoints: tuple
    density_values: tuple
    atoms: tuple = ()

    def __post_init__(self):
        L = exact(self.domain_length)
        bps = tuple(exact(x) for x in self.density_breakpoints)
        vals = tuple(float(v) for v in self.density_values)
        atoms = tuple((exact(t), float(w)) for t, w in self.atoms)
        object.__setattr__(self, "domain_length", L)
        object.__setattr__(self, "density_breakpoints", bps)
        object.__setattr__(self, "density_values", vals)
        object.__setattr__(self, "atoms", atoms)

        if not L > 0:
            raise DomainError("domain length must be positive")
        if len(bps) < 2 or bps[0] != 0 or bps[-1] != L:
            raise DomainError("density breakpoints must start at 0 and end at L")
        if any(b <= a for a, b in zip(bps[:-1], bps[1:])):
            raise DomainError("density breakpoints must be strictly increasing")
        if len(vals) != len(bps) - 1:
            raise DomainError("need one density value per breakpoint interval")
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise DomainError("density values must be finite and nonnegative")
        locs = [t for t, _ in atoms]
        if any(not (0 < t < L) for t in locs):
            raise DomainError("atoms must lie strictly inside (0, L)")
        if any(b <= a for a, b in zip(locs[:-1], locs[1:])):
            raise DomainError("atoms must be sorted with distinct locations")
        if any(not (w > 0 and np.isfinite(w)) for _, w in atoms):
            raise DomainError("atom masses must be positive and finite")
        if not self.total_mass() > 0:
            raise DomainError("measure must have positive total mass")

    # -- constructors -------------------------------------------------------
    @classmethod
    def lebesgue(cls, length=1, scale=1.0, atoms=()):
        return cls(length, (0, length), (scale,), tuple(atoms))

    @classmethod
    def atomic(cls, length, atoms):
        return cls(length, (0, length), (0.0,), tuple(atoms))

    @classmethod
    def from_config(cls, length, cfg):
        """Build from ``{"density": [[x0, x1, value], ...], "atoms": [[t, mass], ...]}``."""
        L = exact(length)
        rows = cfg.get("density", [])
        if rows:
            bps = [exact(rows[0][0])]
            vals = []
            for x0, x1, v in rows:
                if exact(x0) != bps[-1]:
                    raise DomainError("density rows must be contiguous")
                bps.append(exact(x1))
                vals.append(float(v))
        else:
            bps, vals = [0, L], [0.0]
        atoms = sorted(((exact(t), float(w)) for t, w in cfg.get("atoms", [])), key=lambda a: a[0])
        return cls(L, tuple(bps), tuple(vals), tuple(atoms))

    def to_config(self):
        bp = self.density_breakpoints
        return {
            "density": [[to_config_number(a), to_config_number(b), v]
                        for a, b, v in zip(bp[:-1], bp[1:], self.density_values)],
            "atoms": [[to_config_number(t), w] for t, w in self.atoms],
        }

    # -- queries ------------------------------------------------------------
    @property
    def length(self):
        return float(self.domain_length)

    @property
    def atom_locations(self):
        return tuple(t for t, _ in self.atoms)

    def atom_mass(self, t):
        for loc, w in self.atoms:
            if loc == t:
                return w
        return 0.0

    def density(self):
        return PiecewisePolynomial.constant_pieces(self.density_breakpoints, self.density_values)

    def density_at(self, x):
        return self.density()(x)

    def total_mass(self):
        bp = [float(b) for b in self.density_breakpoints]
        return float(np.dot(np.diff(bp), self.density_values)) + sum(w for _, w in self.atoms)

    def cdf(self, x):
        """``μ([0, x])`` for an array of points (closed on the right)."""
        x = np.asarray(x, dtype=float)
        out = self.density().antiderivative()(x)
        for t, w in self.atoms:
            out = out + w * (x >= t)
        return out

    def __add__(self, other):
        if self.domain_length != other.domain_length:
            raise DomainError("measures live on different intervals")
        bps = sorted(set(self.density_breakpoints) | set(other.density_breakpoints))
        mids = [0.5 * (float(a) + float(b)) for a, b in zip(bps[:-1], bps[1:])]
        vals = self.density()(mids) + other.density()(mids)
        merged = {}
        for t, w in self.atoms + other.atoms:
            merged[t] = merged.get(t, 0.0) + w
        return Measure1D(self.domain_length, tuple(bps), tuple(vals), tuple(sorted(merged.items())))


@dataclass(frozen=True)
class MeasurePair:
    """The couple (ν, m). ``flags`` carries warnings such as shared atoms."""

    nu: Measure1D
    m: Measure1D
    flags: tuple = field(default=())

    def __post_init__(self):
        if self.nu.domain_length != self.m.domain_length:
            raise DomainError("ν and m must live on the same interval")

    @property
    def length(self):
        return self.nu.length

    def common_atoms(self):
        return sorted(set(self.nu.atom_locations) & set(self.m.atom_locations))


def mass_of_interval(mu, a, b, closed_right=False):
    """``μ((a, b))`` or ``μ((a, b])``.

    >>> nu = Measure1D.lebesgue(1, atoms=[("1/2", 2.0)])
    >>> mass_of_interval(nu, 0, 1, closed_right=True)
    3.0
    """
    a, b = exact(a), exact(b)
    if not (0 <= a <= b <= mu.domain_length):
        raise DomainError(f"interval ({a}, {b}) not inside [0, {mu.domain_length}]")
    total = mu.density().integral(float(a), float(b))
    for t, w in mu.atoms:
        if a < t < b or (closed_right and t == b):
            total += w
    return float(total)


def integrate(mu, g):
    """Exact ``∫ g dμ`` for piecewise-polynomial ``g``.

    ``g`` may be a :class:`PiecewisePolynomial`, a
    ``numpy.polynomial.Polynomial`` or a scalar constant. Atom values use the
    right-continuous branch of ``g``.
    """
    L = mu.length
    if np.isscalar(g):
        g = PiecewisePolynomial.constant_pieces([0.0, L], [float(g)])
    elif isinstance(g, np.polynomial.Polynomial):
        g = PiecewisePolynomial.from_callable_poly(g, 0.0, L)
    total = (g * mu.density()).integral(0.0, L)
    for t, w in mu.atoms:
        total += w * float(g(float(t)))
    return float(total)


def check_no_common_atoms(pair):
    """True iff ν and m share no atom (endpoints are excluded by construction)."""
    return not pair.common_atoms()


@dataclass(frozen=True)
class DensityReport:
    density: PiecewisePolynomial
    absolutely_continuous: bool
    l2_integral: float
    message: str = ""


def lebesgue_density_wrt(mu):
    """Radon-Nikodym derivative dL¹/dμ and ``∫ |dL¹/dμ|² dμ``.

    The derivative is ``1/ρ`` on density pieces and 0 on atoms (which carry
    no Lebesgue mass). A piece with zero density makes L¹ singular with
    respect to μ; the report says so instead of raising.
    """
    bp = [float(b) for b in mu.density_breakpoints]
    rho = np.asarray(mu.density_values)
    inv = np.divide(1.0, rho, out=np.full_like(rho, np.inf), where=rho > 0)
    dens = PiecewisePolynomial.constant_pieces(bp, inv)
    if np.any(rho == 0.0):
        bad = [(bp[k], bp[k + 1]) for k in np.flatnonzero(rho == 0.0)]
        return DensityReport(dens, False, float("inf"),
                             f"L¹ not absolutely continuous w.r.t. mu: zero density on {bad}")
    return DensityReport(dens, True, float(np.dot(np.diff(bp), inv)))


@dataclass(frozen=True)
class L1NuReport:
    lhs_nu: float
    rhs_m: float
    lhs_m: float
    rhs_nu: float
    passed_nu: bool
    passed_m: bool
    messages: tuple = ()

    @property
    def passed(self):
        return self.passed_nu and self.passed_m


def verify_l1nu_inequalities(pair, rtol=1e-12):
    """Check ``∫|dL¹/dν|²dν ≤ m([0,L])`` and ``∫|dL¹/dm|²dm ≤ ν([0,L])``.

    Any pair obtained as a weak* limit of (μ_ε⁻¹ dx, μ_ε dx) satisfies both
    (Cauchy-Schwarz plus lower semicontinuity).
    """
    rep_nu = lebesgue_density_wrt(pair.nu)
    rep_m = lebesgue_density_wrt(pair.m)
    rhs_m = pair.m.total_mass()
    rhs_nu = pair.nu.total_mass()
    ok_nu = rep_nu.absolutely_continuous and rep_nu.l2_integral <= rhs_m * (1 + rtol)
    ok_m = rep_m.absolutely_continuous and rep_m.l2_integral <= rhs_nu * (1 + rtol)
    msgs = tuple(r.message for r in (rep_nu, rep_m) if r.message)
    return L1NuReport(rep_nu.l2_integral, rhs_m, rep_m.l2_integral, rhs_nu, ok_nu, ok_m, msgs)
