"""Built-in experiments.

E1  1D soft layer at 1/3 (w = ε, μ = ε), exact 1D solutions, ε down to 1e-4
E2  2D heat, stiff layer at x₁ = 1/2 (w = ε, μ = 1/ε), A = I
E3  2D two-component system, soft layer at x₁ = 1/3
E4  common-atom demonstration, two nested families in 1D (exact solutions)
E4-2D  the same demonstration with 2D heat finite elements
E5  3D isotropic elasticity (l = 1), soft layer at 1/3, coarse grid
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..media import Feature, LayeredProfile
from .config import ExperimentConfig, LawSpec

EPS_2D = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
EPS_1D = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)


def soft(center, coef=1.0):
    """Layer of width ε and value coef·ε: a ν-atom of mass 1/coef."""
    return Feature(center, "soft", width_exp=1.0, value_coef=coef, value_exp=1.0)


def stiff(center, coef=1.0):
    """Layer of width ε and value coef/ε: an m-atom of mass coef."""
    return Feature(center, "stiff", width_exp=1.0, value_coef=coef, value_exp=-1.0)


def nested(center, r1_exp, r2_exp):
    return Feature(center, "nested", r1_exp=r1_exp, r2_exp=r2_exp)


def system_tensor_2d():
    """``C = δ_ij δ_kl + 2 δ_ik δ_jl + δ_il δ_jk`` (n = d = 2): elliptic on all gradients, T = diag(4, 2)."""
    I = np.eye(2)
    C = (np.einsum("ij,kl->ijkl", I, I) + 2 * np.einsum("ik,jl->ijkl", I, I)
         + np.einsum("il,jk->ijkl", I, I))
    return C


def _e1():
    return ExperimentConfig(
        name="E1", preset="E1",
        profile=LayeredProfile(features=(soft("1/3"),)),
        law=LawSpec("heat", A=((1.0,),)), d=1, resolutions=(1,),
        method="oracle", eps_list=EPS_1D, f=(1.0,), out_dir="out/E1",
    )


def _e2():
    return ExperimentConfig(
        name="E2", preset="E2",
        profile=LayeredProfile(features=(stiff("1/2"),)),
        law=LawSpec("heat", A=((1.0, 0.0), (0.0, 1.0))), d=2, extents=(1.0,), resolutions=(64,),
        method="pcg", tol=1e-10, eps_list=EPS_2D, f=(1.0,), out_dir="out/E2",
    )


def _e3():
    C = system_tensor_2d()
    return ExperimentConfig(
        name="E3", preset="E3",
        profile=LayeredProfile(features=(soft("1/3"),)),
        law=LawSpec("system", C=tuple(tuple(tuple(tuple(float(x) for x in r) for r in b) for b in a) for a in C)),
        d=2, extents=(1.0,), resolutions=(64,),
        method="pcg", tol=1e-10, eps_list=EPS_2D, f=(1.0, 0.5), out_dir="out/E3",
    )


def _e4():
    return ExperimentConfig(
        name="E4", preset="E4",
        profile=LayeredProfile(features=(nested("1/2", 1.0, 2.0),)),
        profile_b=LayeredProfile(features=(nested("1/2", 2.0, 1.0),)),
        law=LawSpec("heat", A=((1.0,),)), d=1, resolutions=(1,),
        method="oracle", eps_list=(1e-1, 1e-2, 1e-3, 1e-4), f=(1.0,), out_dir="out/E4",
    )


def _e4_2d():
    return ExperimentConfig(
        name="E4-2D", preset="E4-2D",
        profile=LayeredProfile(features=(nested("1/2", 1.0, 2.0),)),
        profile_b=LayeredProfile(features=(nested("1/2", 2.0, 1.0),)),
        law=LawSpec("heat", A=((1.0, 0.0), (0.0, 1.0))), d=2, extents=(1.0,), resolutions=(32,),
        method="direct", eps_list=(1e-1, 3e-2, 1e-2), f=(1.0,), out_dir="out/E4-2D",
    )


def _e5():
    return ExperimentConfig(
        name="E5", preset="E5",
        profile=LayeredProfile(features=(soft("1/3"),)),
        law=LawSpec("iso", l=1.0), d=3, extents=(1.0, 1.0), resolutions=(8,),
        method="pcg", tol=1e-10, eps_list=(1e-1, 1e-2, 1e-3), f=(1.0, 0.0, 0.0), out_dir="out/E5",
    )


PRESETS = {"E1": _e1, "E2": _e2, "E3": _e3, "E4": _e4, "E4-2D": _e4_2d, "E5": _e5}


def get(name):
    """Fresh :class:`ExperimentConfig` for a preset name."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def builtin_profiles():
    """Every profile shipped with the presets, keyed ``"E2"``, ``"E4/b"``, …"""
    out = {}
    for name in PRESETS:
        cfg = get(name)
        out[name] = cfg.profile
        if cfg.profile_b is not None:
            out[f"{name}/b"] = cfg.profile_b
    return out
