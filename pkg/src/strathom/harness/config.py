"""Experiment configuration files (TOML).

Sections and keys
-----------------
Top level     ``name`` (str), ``preset`` (str, optional)
``[profile]``  ``length``, ``background`` and ``[[profile.feature]]`` tables
               with ``center``, ``kind`` (soft | stiff | nested),
               ``width_coef``, ``width_exp``, ``value_coef``, ``value_exp``
               (soft/stiff) or ``r1_exp``, ``r2_exp`` (nested)
``[profile_b]`` second profile of the common-atom demo (optional)
``[limits.nu]``, ``[limits.m]``  declared limit measures (optional):
               ``density = [[x0, x1, value], ...]``, ``atoms = [[t, mass], ...]``
``[law]``      ``kind`` = heat | iso | system; ``A`` (d×d, heat), ``l`` (iso)
               or ``C`` (nested n×d×n×d list, system)
``[grid]``     ``d``, ``extents`` (transverse sizes), ``resolutions``, ``k_min``
``[solver]``   ``method`` = pcg | direct | oracle, ``tol``, ``max_iter``
``[sweep]``    ``eps`` (strictly decreasing), ``f`` (one value per component)
``[output]``   ``dir``, ``formats`` (csv | table | plotdata), ``figures``,
               ``solutions`` (write solution CSVs for the smallest eps)

Numbers may be written as decimals or as rational strings ``"p/q"``; atom
locations and feature centres keep such strings exact.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field, replace

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError, StrathomError
from ..measures import Measure1D, MeasurePair, exact
from ..media import LayeredProfile
from ..tensors import IsotropicLaw, SystemTensor

LAW_KINDS = ("heat", "iso", "system")
METHODS = ("pcg", "direct", "oracle")
FORMATS = ("csv", "table", "plotdata")
SECTIONS = {"name", "preset", "profile", "profile_b", "limits", "law", "grid", "solver", "sweep", "output"}


def _num(x, what):
    try:
        return float(exact(x))
    except (TypeError, StrathomError) as exc:
        raise ConfigError(f"{what}: not a number: {x!r}") from exc


@dataclass(frozen=True)
class LawSpec:
    """Constitutive law as written in the config."""

    kind: str = "heat"
    A: tuple = ((1.0,),)
    l: float = 0.0
    C: tuple = ()

    def build(self, d):
        """Instantiate the law for dimension ``d``.

        Returns a conductivity matrix (heat), :class:`IsotropicLaw` or
        :class:`SystemTensor`.
        """
        if self.kind == "heat":
            A = np.asarray(self.A, dtype=float)
            if A.shape != (d, d):
                raise ConfigError(f"heat law needs a {d}×{d} matrix A, got shape {A.shape}")
            return A
        if self.kind == "iso":
            if d not in (2, 3):
                raise ConfigError("isotropic elasticity needs d = 3 (or d = 2 in system mode)")
            return IsotropicLaw(self.l)
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 4 or C.shape[1] != d or C.shape[3] != d:
            raise ConfigError(f"system law needs C of shape (n, {d}, n, {d}), got {C.shape}")
        return SystemTensor(C)

    def n_components(self, d):
        if self.kind == "heat":
            return 1
        if self.kind == "iso":
            return d
        return int(np.asarray(self.C).shape[0])

    def to_config(self):
        if self.kind == "heat":
            return {"kind": "heat", "A": [list(r) for r in self.A]}
        if self.kind == "iso":
            return {"kind": "iso", "l": self.l}
        return {"kind": "system", "C": np.asarray(self.C).tolist()}

    @classmethod
    def from_config(cls, cfg, d):
        extra = set(cfg) - {"kind", "A", "l", "C"}
        if extra:
            raise ConfigError(f"unknown law keys {sorted(extra)}")
        kind = cfg.get("kind", "heat")
        if kind not in LAW_KINDS:
            raise ConfigError(f"law kind must be one of {LAW_KINDS}, got {kind!r}")
        if kind == "heat":
            A = cfg.get("A", np.eye(d).tolist())
            A = tuple(tuple(_num(x, "law.A") for x in row) for row in np.atleast_2d(np.asarray(A, dtype=object)))
            return cls("heat", A=A)
        if kind == "iso":
            if "l" not in cfg:
                raise ConfigError("iso law needs 'l'")
            return cls("iso", l=_num(cfg["l"], "law.l"))
        if "C" not in cfg:
            raise ConfigError("system law needs 'C'")
        C = np.asarray(cfg["C"], dtype=float)
        return cls("system", C=_freeze(C))


def _freeze(a):
    a = np.asarray(a)
    if a.ndim == 0:
        return float(a)
    return tuple(_freeze(x) for x in a)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description."""

    name: str = "custom"
    preset: str | None = None
    profile: LayeredProfile = field(default_factory=LayeredProfile)
    profile_b: LayeredProfile | None = None
    limits: MeasurePair | None = None
    law: LawSpec = field(default_factory=LawSpec)
    d: int = 1
    extents: tuple = ()
    resolutions: tuple = (32,)
    k_min: int = 2
    method: str = "pcg"
    tol: float = 1e-10
    max_iter: int | None = None
    eps_list: tuple = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    f: tuple = (1.0,)
    out_dir: str = "out"
    formats: tuple = FORMATS
    figures: bool = True
    solutions: bool = False

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        object.__setattr__(self, "eps_list", eps)
        if not eps:
            raise ConfigError("sweep.eps must not be empty")
        if any(e <= 0 for e in eps):
            raise ConfigError("sweep.eps values must be positive")
        if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
            raise ConfigError("sweep.eps must be strictly decreasing")
        if self.d not in (1, 2, 3):
            raise ConfigError("grid.d must be 1, 2 or 3")
        if len(self.extents) != self.d - 1:
            raise ConfigError(f"grid.extents needs {self.d - 1} transverse sizes for d = {self.d}")
        if any(r < 1 for r in self.resolutions) or not self.resolutions:
            raise ConfigError("grid.resolutions must be positive integers")
        if self.method not in METHODS:
            raise ConfigError(f"solver.method must be one of {METHODS}")
        if self.method == "oracle" and (self.d != 1 or self.law.kind != "heat"):
            raise ConfigError("the oracle method covers the 1D scalar problem only")
        if self.law.kind == "iso" and self.d == 1:
            raise ConfigError("isotropic elasticity needs d = 3 (or d = 2 in system mode)")
        if not self.tol > 0:
            raise ConfigError("solver.tol must be positive")
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")
        n = self.n
        if len(self.f) != n:
            raise ConfigError(f"sweep.f needs {n} value(s), one per component")
        self.law.build(self.d)  # raises on shape or hypothesis problems

    @property
    def n(self):
        return self.law.n_components(self.d)

    @property
    def system_mode(self):
        """2D isotropic elasticity runs through the general system path."""
        return self.law.kind == "iso" and self.d == 2

    def source(self):
        return self.f[0] if self.n == 1 else np.asarray(self.f)

    # -- serialization -----------------------------------------------------
    def to_dict(self):
        out = {"name": self.name}
        if self.preset:
            out["preset"] = self.preset
        out["profile"] = self.profile.to_config()
        if self.profile_b is not None:
            out["profile_b"] = self.profile_b.to_config()
        if self.limits is not None:
            out["limits"] = {"nu": self.limits.nu.to_config(), "m": self.limits.m.to_config()}
        out["law"] = self.law.to_config()
        out["grid"] = {"d": self.d, "extents": list(self.extents),
                       "resolutions": list(self.resolutions), "k_min": self.k_min}
        solver = {"method": self.method, "tol": self.tol}
        if self.max_iter is not None:
            solver["max_iter"] = self.max_iter
        out["solver"] = solver
        out["sweep"] = {"eps": list(self.eps_list), "f": list(self.f)}
        out["output"] = {"dir": self.out_dir, "formats": list(self.formats),
                         "figures": self.figures, "solutions": self.solutions}
        return out

    def to_toml(self):
        return tomli_w.dumps(self.to_dict())

    def digest(self):
        """SHA-256 of the canonical serialization (used in run metadata)."""
        return hashlib.sha256(self.to_toml().encode()).hexdigest()

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _section(data, key, allowed):
    sec = data.get(key, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{key}] must be a table")
    extra = set(sec) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in [{key}]: {sorted(extra)}")
    return sec


def from_dict(data):
    """Build an :class:`ExperimentConfig` from parsed TOML data."""
    extra = set(data) - SECTIONS
    if extra:
        raise ConfigError(f"unknown top-level keys {sorted(extra)}")
    try:
        grid = _section(data, "grid", {"d", "extents", "resolutions", "k_min"})
        d = int(grid.get("d", 1))
        profile = LayeredProfile.from_config(_section(data, "profile", {"length", "background", "feature"}))
        profile_b = None
        if "profile_b" in data:
            profile_b = LayeredProfile.from_config(_section(data, "profile_b", {"length", "background", "feature"}))
        limits = None
        if "limits" in data:
            lim = _section(data, "limits", {"nu", "m"})
            if set(lim) != {"nu", "m"}:
                raise ConfigError("[limits] needs both 'nu' and 'm'")
            L = profile.domain_length
            limits = MeasurePair(Measure1D.from_config(L, lim["nu"]), Measure1D.from_config(L, lim["m"]))
            profile = replace(profile, declared_limits=limits)
        law = LawSpec.from_config(_section(data, "law", {"kind", "A", "l", "C"}), d)
        solver = _section(data, "solver", {"method", "tol", "max_iter"})
        sweep = _section(data, "sweep", {"eps", "f"})
        output = _section(data, "output", {"dir", "formats", "figures", "solutions"})
        eps = tuple(_num(e, "sweep.eps") for e in sweep.get("eps", ExperimentConfig.eps_list))
        f = sweep.get("f", [1.0] * law.n_components(d))
        f = tuple(_num(x, "sweep.f") for x in (f if isinstance(f, list) else [f]))
        max_iter = solver.get("max_iter")
        return ExperimentConfig(
            name=str(data.get("name", data.get("preset", "custom"))),
            preset=data.get("preset"),
            profile=profile,
            profile_b=profile_b,
            limits=limits,
            law=law,
            d=d,
            extents=tuple(_num(h, "grid.extents") for h in grid.get("extents", [1.0] * (d - 1))),
            resolutions=tuple(int(r) for r in grid.get("resolutions", [32])),
            k_min=int(grid.get("k_min", 2)),
            method=str(solver.get("method", "pcg")),
            tol=_num(solver.get("tol", 1e-10), "solver.tol"),
            max_iter=None if max_iter is None else int(max_iter),
            eps_list=eps,
            f=f,
            out_dir=str(output.get("dir", "out")),
            formats=tuple(output.get("formats", FORMATS)),
            figures=bool(output.get("figures", True)),
            solutions=bool(output.get("solutions", False)),
        )
    except ConfigError:
        raise
    except (StrathomError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def parse(text):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return from_dict(data)


def load(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return from_dict(data)


def serialize(cfg):
    return cfg.to_toml()
