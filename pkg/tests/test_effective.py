import numpy as np
import pytest
import scipy.sparse as sp

from strathom.effective import (
    MAX_ATOMS,
    assemble_effective,
    build_effective_grid,
    solve_effective,
    transmission_residuals,
)
from strathom.errors import DomainError, HypothesisError
from strathom.fem import assemble, build_grid, energy, load_pairing, solve, stiffness_1d_assembled
from strathom.harness import presets
from strathom.measures import Measure1D, MeasurePair
from strathom.media import CoefficientField
from strathom.oracle import solve_limit_1d
from strathom.tensors import IsotropicLaw, SystemTensor, heat_effective, iso_effective, sys_effective

LEB = Measure1D.lebesgue(1)
PLAIN = MeasurePair(LEB, LEB)
NU_ATOM = MeasurePair(Measure1D.lebesgue(1, atoms=[("1/3", 1.0)]), LEB)


def m_atom(beta=1.0, t="1/2"):
    return MeasurePair(LEB, Measure1D.lebesgue(1, atoms=[(t, beta)]))


@pytest.mark.parametrize("d,res", [(1, 16), (2, 8)])
def test_identity_case_is_bitwise_fine_scale(d, res):
    ext = (1.0,) * (d - 1)
    E = assemble_effective(PLAIN, heat_effective(np.eye(d)), build_effective_grid(PLAIN, ext, res))
    F = assemble(build_grid(CoefficientField.constant(), ext, res), CoefficientField.constant(), np.eye(d))
    assert (E.stiffness != F.stiffness).nnz == 0
    assert np.array_equal(solve_effective(E).values, solve(F).values)
    assert solve_effective(E).jumps() == {}


def test_spring_between_doubled_sheets_1d():
    grid = build_effective_grid(NU_ATOM, (), 6)
    system = assemble_effective(NU_ATOM, heat_effective(np.eye(1)), grid)
    g = system.grid
    p = g.plane_index(1 / 3)
    lo, hi = g.sheet_minus[p], g.sheet_plus[p]
    assert hi == lo + 1
    K = system.full_stiffness.toarray()
    assert K[lo, hi] == pytest.approx(-1.0)  # A₁₁ / ν({t})
    h_left, h_right = g.x1[p] - g.x1[p - 1], g.x1[p + 1] - g.x1[p]
    assert K[lo, lo] == pytest.approx(1 / h_left + 1.0)
    assert K[hi, hi] == pytest.approx(1 / h_right + 1.0)


def test_spring_scales_with_atom_mass():
    pair = MeasurePair(Measure1D.lebesgue(1, atoms=[("1/3", 4.0)]), LEB)
    system = assemble_effective(pair, heat_effective([[2.0]]), build_effective_grid(pair, (), 6))
    p = system.grid.plane_index(1 / 3)
    assert system.full_stiffness[system.grid.sheet_minus[p], system.grid.sheet_plus[p]] == pytest.approx(-0.5)


def test_m_atom_adds_tangential_laplacian_2d():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    beta = 3.0
    with_atom = m_atom(beta)
    grid = build_effective_grid(with_atom, (1.0,), 4)
    K1 = assemble_effective(with_atom, heat_effective(A), grid).full_stiffness
    K0 = assemble_effective(PLAIN, heat_effective(A), grid).full_stiffness
    p = grid.plane_index(0.5)
    nt = grid.n_transverse
    expected = sp.lil_matrix(K1.shape)
    S = beta * 1.5 * stiffness_1d_assembled(grid.transverse_axes()[0]).toarray()  # β A∥₂₂ · Laplacian
    expected[p * nt:(p + 1) * nt, p * nt:(p + 1) * nt] = S
    np.testing.assert_allclose((K1 - K0).toarray(), expected.toarray(), rtol=0, atol=1e-12)


def test_m_atom_contributes_nothing_in_1d():
    grid = build_effective_grid(m_atom(), (), 8)
    K1 = assemble_effective(m_atom(), heat_effective(np.eye(1)), grid).stiffness
    K0 = assemble_effective(PLAIN, heat_effective(np.eye(1)), grid).stiffness
    assert (K1 != K0).nnz == 0


def test_1d_atom_solution_matches_oracle():
    sol = solve_effective(assemble_effective(NU_ATOM, heat_effective(np.eye(1)),
                                             build_effective_grid(NU_ATOM, (), 12)))
    exact = solve_limit_1d(NU_ATOM.nu)
    assert sol.jump(1 / 3)[0, 0] == pytest.approx(1 / 12, rel=1e-10)
    x = sol.grid.x1
    um = np.array([sol.fem.sheet_values(s)[0, 0] for s in sol.grid.sheet_minus])
    np.testing.assert_allclose(um, exact(x, "left"), rtol=0, atol=1e-12)


def test_zero_source_and_energy_identity():
    eff = heat_effective(np.eye(2))
    pair = MeasurePair(Measure1D.lebesgue(1, atoms=[("1/3", 1.0)]), Measure1D.lebesgue(1, atoms=[("2/3", 2.0)]))
    grid = build_effective_grid(pair, (1.0,), 8)
    zero = solve_effective(assemble_effective(pair, eff, grid, 0.0))
    assert not zero.values.any()
    system = assemble_effective(pair, eff, grid, 1.0)
    sol = solve_effective(system, tol=1e-12)
    assert energy(sol.fem, system) == pytest.approx(load_pairing(sol.fem, system), rel=1e-10)


@pytest.mark.parametrize("eff,d,f", [
    (heat_effective(np.array([[2.0, 1.0], [1.0, 2.0]])), 2, 1.0),
    (sys_effective(SystemTensor(presets.system_tensor_2d())), 2, np.array([1.0, 0.5])),
    (iso_effective(IsotropicLaw(1.0)), 3, np.array([1.0, 0.0, 0.0])),
])
def test_effective_system_spd_and_symmetric(eff, d, f):
    pair = MeasurePair(Measure1D.lebesgue(1, atoms=[("1/3", 1.0)]), Measure1D.lebesgue(1, atoms=[("2/3", 2.0)]))
    system = assemble_effective(pair, eff, build_effective_grid(pair, (1.0,) * (d - 1), 3), f)
    K = system.stiffness
    assert abs(K - K.T).max() <= 1e-14 * abs(K).max()
    assert np.linalg.eigvalsh(K.toarray()).min() > 0


def test_jump_vanishes_on_transverse_boundary():
    sol = solve_effective(assemble_effective(NU_ATOM, heat_effective(np.eye(2)),
                                             build_effective_grid(NU_ATOM, (1.0,), 8)))
    J = sol.jump(1 / 3)
    bnd = sol.grid.transverse_boundary()
    assert not J[bnd].any() and J[~bnd].min() > 0


def test_transmission_residuals():
    eff = heat_effective(np.eye(1))
    assert transmission_residuals(solve_effective(assemble_effective(
        PLAIN, eff, build_effective_grid(PLAIN, (), 8))), PLAIN) == ()
    # 2D m-atom: residual decreases under refinement
    pair = m_atom(1.0)
    grid = build_effective_grid(pair, (1.0,), 4)
    res = []
    for _ in range(4):
        sol = solve_effective(assemble_effective(pair, heat_effective(np.eye(2)), grid))
        (r,) = transmission_residuals(sol, pair)
        assert r.kind == "m"
        res.append(r.value)
        grid = grid.refined()
    assert all(a > b for a, b in zip(res[:-1], res[1:]))


def test_assembly_guards():
    eff = heat_effective(np.eye(1))
    common = MeasurePair(Measure1D.lebesgue(1, atoms=[("1/2", 1.0)]), Measure1D.lebesgue(1, atoms=[("1/2", 1.0)]))
    with pytest.raises(HypothesisError, match="share atoms"):
        assemble_effective(common, eff, build_effective_grid(common, (), 8))
    with pytest.raises(DomainError, match="grid plane"):
        assemble_effective(NU_ATOM, eff, build_grid(CoefficientField.constant(), (), 8))
    many = MeasurePair(Measure1D.lebesgue(1, atoms=[(f"{k}/40", 1.0) for k in range(1, MAX_ATOMS + 2)]), LEB)
    with pytest.raises(DomainError, match="at most"):
        assemble_effective(many, eff, build_effective_grid(many, (), 1))
    doubled = assemble_effective(NU_ATOM, eff, build_effective_grid(NU_ATOM, (), 8)).grid
    with pytest.raises(DomainError):
        assemble_effective(NU_ATOM, eff, doubled)


def test_csv_has_bulk_and_jump_blocks():
    sol = solve_effective(assemble_effective(NU_ATOM, heat_effective(np.eye(2)),
                                             build_effective_grid(NU_ATOM, (1.0,), 4)))
    text = sol.to_csv()
    assert text.startswith("# bulk\nx1,x2,u1\n")
    assert "# jump t=0.33333333333333331\nx2,jump1\n" in text
