"""Layered coefficient profiles μ_ε(x₁) and their weak* limits.

A profile is a background value plus thin features centred at fixed points.
Every rule is a power law ``c * eps**p``, so the limits of
``∫ μ_ε`` and ``∫ μ_ε⁻¹`` over a feature are available in closed form:
a feature of width ``w = cw eps**pw`` and inside value ``v = cv eps**pv``
carries ν-mass ``w/v`` and m-mass ``w*v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, HypothesisError
from .measures import Measure1D, MeasurePair, exact, to_config_number

KINDS = ("soft", "stiff", "nested")


def _limit_of_power(coef, exponent, what, center):
    """Limit of ``coef * eps**exponent`` as eps → 0."""
    if math.isclose(exponent, 0.0, abs_tol=1e-12):
        return coef
    if exponent > 0:
        return 0.0
    raise HypothesisError(
        f"feature at {center}: {what} over the layer diverges like eps^{exponent:g}; "
        "μ_ε and μ_ε⁻¹ must stay bounded in L¹"
    )


@dataclass(frozen=True)
class Feature:
    """A thin layer centred at ``center``.

    ``soft`` and ``stiff`` layers have width ``width_coef * eps**width_exp``
    and inside value ``value_coef * eps**value_exp``. ``nested`` layers follow
    the common-atom construction: a soft layer of width ``r1 = eps**r1_exp``
    with value ``r1`` and a stiff layer of width ``r2 = eps**r2_exp`` with
    value ``1/r2``, both centred at ``center``; the narrower one sits inside
    the wider one and overrides it.
    """

    center: object
    kind: str
    width_coef: float = 1.0
    width_exp: float = 1.0
    value_coef: float = 1.0
    value_exp: float = 1.0
    r1_exp: float = 1.0
    r2_exp: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "center", exact(self.center))
        if self.kind not in KINDS:
            raise ConfigError(f"unknown feature kind {self.kind!r}; expected one of {KINDS}")
        if self.width_coef <= 0 or self.value_coef <= 0:
            raise ConfigError("width and value coefficients must be positive")
        if self.kind == "nested":
            if self.r1_exp <= 0 or self.r2_exp <= 0:
                raise ConfigError("nested layer exponents must be positive")
            if math.isclose(self.r1_exp, self.r2_exp):
                raise ConfigError("nested layer needs r1_exp != r2_exp (the regime must be defined)")
        else:
            if self.width_exp <= 0:
                raise ConfigError("layer width must shrink: width_exp > 0")
            if self.kind == "soft" and self.value_exp <= 0:
                raise ConfigError("soft layer needs value_exp > 0 (μ → 0 inside)")
            if self.kind == "stiff" and self.value_exp >= 0:
                raise ConfigError("stiff layer needs value_exp < 0 (μ → ∞ inside)")

    # -- rules ----------------------------------------------------------------
    def width(self, eps):
        if self.kind == "nested":
            return max(eps ** self.r1_exp, eps ** self.r2_exp)
        return self.width_coef * eps ** self.width_exp

    def value(self, eps):
        return self.value_coef * eps ** self.value_exp

    @property
    def regime(self):
        if self.kind != "nested":
            return None
        return "r2<<r1" if self.r2_exp > self.r1_exp else "r1<<r2"

    def pieces(self, eps):
        """``[(a, b, mu), ...]`` covering the feature, left to right."""
        c = float(self.center)
        if self.kind != "nested":
            w = self.width(eps)
            return [(c - w / 2, c + w / 2, self.value(eps))]
        r1, r2 = eps ** self.r1_exp, eps ** self.r2_exp
        if r1 > r2:
            outer, r_out, inner, r_in = r1, r1, 1.0 / r2, r2
        else:
            outer, r_out, inner, r_in = 1.0 / r2, r2, r1, r1
        return [
            (c - r_out / 2, c - r_in / 2, outer),
            (c - r_in / 2, c + r_in / 2, inner),
            (c + r_in / 2, c + r_out / 2, outer),
        ]

    def limit_atoms(self):
        """``(nu_mass, m_mass)`` carried by the feature in the limit."""
        c = self.center
        if self.kind == "nested":
            return 1.0, 1.0
        pw, pv = self.width_exp, self.value_exp
        nu_mass = _limit_of_power(self.width_coef / self.value_coef, pw - pv, "∫ μ_ε⁻¹", c)
        m_mass = _limit_of_power(self.width_coef * self.value_coef, pw + pv, "∫ μ_ε", c)
        return nu_mass, m_mass

    def to_config(self):
        out = {"center": to_config_number(self.center), "kind": self.kind}
        if self.kind == "nested":
            out.update(r1_exp=self.r1_exp, r2_exp=self.r2_exp)
        else:
            out.update(width_coef=self.width_coef, width_exp=self.width_exp,
                       value_coef=self.value_coef, value_exp=self.value_exp)
        return out

    @classmethod
    def from_config(cls, cfg):
        known = {"center", "kind", "width_coef", "width_exp", "value_coef", "value_exp", "r1_exp", "r2_exp"}
        extra = set(cfg) - known
        if extra:
            raise ConfigError(f"unknown feature keys {sorted(extra)}")
        if "center" not in cfg or "kind" not in cfg:
            raise ConfigError("feature needs 'center' and 'kind'")
        kw = {k: float(exact(v)) for k, v in cfg.items() if k not in ("center", "kind")}
        if cfg["kind"] == "stiff" and "value_exp" not in kw:
            kw["value_exp"] = -1.0
        return cls(center=cfg["center"], kind=cfg["kind"], **kw)


@dataclass(frozen=True)
class LayeredProfile:
    domain_length: object = 1
    background: float = 1.0
    features: tuple = ()
    declared_limits: MeasurePair | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "domain_length", exact(self.domain_length))
        object.__setattr__(self, "features", tuple(sorted(self.features, key=lambda f: f.center)))
        if not self.domain_length > 0:
            raise ConfigError("domain length must be positive")
        if not self.background > 0:
            raise ConfigError("background μ must be positive")
        for f in self.features:
            if not 0 < f.center < self.domain_length:
                raise ConfigError(f"feature centre {f.center} outside (0, L)")

    @property
    def length(self):
        return float(self.domain_length)

    @property
    def has_nested(self):
        return any(f.kind == "nested" for f in self.features)

    def to_config(self):
        return {
            "length": to_config_number(self.domain_length),
            "background": self.background,
            "feature": [f.to_config() for f in self.features],
        }

    @classmethod
    def from_config(cls, cfg):
        known = {"length", "background", "feature"}
        extra = set(cfg) - known
        if extra:
            raise ConfigError(f"unknown profile keys {sorted(extra)}")
        return cls(
            domain_length=cfg.get("length", 1),
            background=float(exact(cfg.get("background", 1.0))),
            features=tuple(Feature.from_config(f) for f in cfg.get("feature", [])),
        )


@dataclass(frozen=True)
class CoefficientField:
    """Piecewise-constant μ_ε for one value of ε."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if bp.size != v.size + 1 or np.any(np.diff(bp) <= 0):
            raise ConfigError("coefficient field needs strictly increasing breakpoints, one value per piece")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ConfigError("coefficient values must be positive and finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value=1.0, length=1.0):
        return cls(np.array([0.0, float(length)]), np.array([float(value)]))

    @property
    def length(self):
        return float(self.breakpoints[-1])

    def __call__(self, x):
        k = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0, self.values.size - 1)
        return self.values[k]

    def integral(self, power=1):
        return float(np.dot(np.diff(self.breakpoints), self.values ** power))


def realize(profile, eps):
    """Piecewise-constant μ_ε: background outside features, layer rules inside."""
    if not eps > 0:
        raise ConfigError("eps must be positive")
    L = profile.length
    spans = []
    for f in profile.features:
        pcs = f.pieces(eps)
        spans.append((pcs[0][0], pcs[-1][1], f, pcs))
    for (a0, b0, f0, _), (a1, b1, f1, _) in zip(spans[:-1], spans[1:]):
        if a1 <= b0:
            raise ConfigError(
                f"features at {f0.center} and {f1.center} overlap at eps={eps:g}: "
                f"[{a0:g}, {b0:g}] vs [{a1:g}, {b1:g}]"
            )
    for a, b, f, _ in spans:
        if a <= 0 or b >= L:
            raise ConfigError(f"feature at {f.center} leaves (0, L) at eps={eps:g}")
    bps, vals = [0.0], []
    for a, b, f, pcs in spans:
        bps.append(a)
        vals.append(profile.background)
        for lo, hi, mu in pcs:
            bps.append(hi)
            vals.append(mu)
    bps.append(L)
    vals.append(profile.background)
    return CoefficientField(np.array(bps), np.array(vals))


def empirical_measures(field):
    """(ν_ε, m_ε) = (μ_ε⁻¹ dx, μ_ε dx); both atom-free."""
    bp = tuple(float(b) for b in field.breakpoints)
    return MeasurePair(
        Measure1D(bp[-1], bp, tuple(1.0 / field.values)),
        Measure1D(bp[-1], bp, tuple(field.values)),
    )


def limit_measures(profile):
    """Closed-form weak* limits (ν, m) of the profile's measures.

    Nested features put atoms into both measures at the same point; the pair
    is returned with a flag instead of an error so that the common-atom
    demonstration can still use it.
    """
    L = profile.domain_length
    nu_atoms, m_atoms, flags = [], [], []
    for f in profile.features:
        nu_mass, m_mass = f.limit_atoms()
        if nu_mass > 0:
            nu_atoms.append((f.center, nu_mass))
        if m_mass > 0:
            m_atoms.append((f.center, m_mass))
        if nu_mass > 0 and m_mass > 0:
            flags.append(f"common atom at {f.center}: ν and m share an atom, the limit problem is not determined by (ν, m)")
    b = profile.background
    nu = Measure1D(L, (0, L), (1.0 / b,), tuple(nu_atoms))
    m = Measure1D(L, (0, L), (b,), tuple(m_atoms))
    return MeasurePair(nu, m, tuple(flags))


@dataclass(frozen=True)
class LimitCheckRow:
    eps: float
    nu_discrepancy: float
    m_discrepancy: float
    int_mu: float
    int_inv_mu: float


@dataclass(frozen=True)
class LimitCheckReport:
    rows: tuple
    tol: float
    length: float = 1.0
    regimes: tuple = ()

    @property
    def monotone(self):
        d = [max(r.nu_discrepancy, r.m_discrepancy) for r in self.rows]
        return all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(d[:-1], d[1:]))

    @property
    def cauchy_schwarz(self):
        """``∫μ_ε · ∫μ_ε⁻¹ ≥ L²`` on every row."""
        return all(r.int_mu * r.int_inv_mu >= self.length ** 2 * (1 - 1e-12) for r in self.rows)

    @property
    def l1_bound(self):
        """Largest ``∫μ_ε + ∫μ_ε⁻¹`` seen along the sweep."""
        return max(r.int_mu + r.int_inv_mu for r in self.rows)

    @property
    def passed(self):
        last = self.rows[-1]
        return self.monotone and max(last.nu_discrepancy, last.m_discrepancy) <= self.tol


def verify_limits(profile, eps_list, samples=401, tol=1e-2, limits=None):
    """Compare CDFs of (ν_ε, m_ε) with the declared limits away from layers.

    Sample points closer than the current layer width to a feature centre
    are skipped.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise ConfigError("eps_list must be strictly decreasing")
    if limits is None:
        limits = profile.declared_limits or limit_measures(profile)
    L = profile.length
    x = np.linspace(0.0, L, samples)
    rows = []
    for eps in eps_list:
        field_ = realize(profile, eps)
        emp = empirical_measures(field_)
        keep = np.ones_like(x, dtype=bool)
        for f in profile.features:
            keep &= np.abs(x - float(f.center)) > f.width(eps)
        xs = x[keep]
        dnu = float(np.max(np.abs(emp.nu.cdf(xs) - limits.nu.cdf(xs)), initial=0.0))
        dm = float(np.max(np.abs(emp.m.cdf(xs) - limits.m.cdf(xs)), initial=0.0))
        rows.append(LimitCheckRow(eps, dnu, dm, field_.integral(1), field_.integral(-1)))
    regimes = tuple(f.regime for f in profile.features if f.kind == "nested")
    return LimitCheckReport(tuple(rows), tol, L, regimes)
