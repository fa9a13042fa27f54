import numpy as np
import pytest

from strathom.errors import ConfigError, SolverError
from strathom.fem import (
    ZeroField,
    assemble,
    build_grid,
    build_grid_from_breakpoints,
    energy,
    error_norms,
    load_pairing,
    solve,
)
from strathom.harness import presets
from strathom.media import CoefficientField, LayeredProfile, realize
from strathom.oracle import compare_1d, solve_eps_1d, solve_limit_1d
from strathom.measures import Measure1D
from strathom.tensors import IsotropicLaw, SystemTensor

CONST = CoefficientField.constant()
SOFT = LayeredProfile(features=(presets.soft("1/3"),))
STIFF = LayeredProfile(features=(presets.stiff("1/2"),))


def test_grid_examples():
    assert build_grid(CONST, (), 8).n_x1_elements == 8
    fld = realize(SOFT, 0.01)
    g = build_grid(fld, (), 10)
    lo, hi = 1 / 3 - 0.005, 1 / 3 + 0.005
    assert np.any(np.isclose(g.x1, lo, rtol=0, atol=1e-15)) and np.any(np.isclose(g.x1, hi, rtol=0, atol=1e-15))
    inside = np.sum((g.x1[:-1] >= lo - 1e-15) & (g.x1[1:] <= hi + 1e-15))
    assert inside >= 2
    assert build_grid(CONST, (1.0,), 16).counts == (16,)


def test_grid_rejects_layers_below_float_granularity():
    with pytest.raises(ConfigError, match="exact"):
        build_grid_from_breakpoints([0.0, 0.5, 0.5 + 2.3e-16, 1.0], (), 8, k_min=4)


def test_hand_assembled_two_element_system():
    system = assemble(build_grid(CONST, (), 2), CONST, np.eye(1), 1.0)
    np.testing.assert_allclose(system.stiffness.toarray(), [[4.0]])
    np.testing.assert_allclose(system.load, [0.5])
    u = solve(system)
    assert u.values[1, 0] == pytest.approx(1 / 8, rel=1e-15)


def test_zero_source_gives_zero_solution():
    system = assemble(build_grid(CONST, (1.0,), 4), CONST, np.eye(2), 0.0)
    assert not system.load.any()
    u = solve(system)
    assert u.iterations == 0 and not u.values.any()


@pytest.mark.parametrize("d,law", [
    (1, np.eye(1)),
    (2, np.array([[2.0, 1.0], [1.0, 2.0]])),
    (2, SystemTensor(presets.system_tensor_2d())),
    (3, IsotropicLaw(1.0)),
])
def test_stiffness_exactly_symmetric_and_spd(d, law):
    fld = realize(SOFT, 0.1)
    system = assemble(build_grid(fld, (1.0,) * (d - 1), 3), fld, law, 1.0)
    K = system.stiffness
    assert (K - K.T).nnz == 0
    assert np.linalg.eigvalsh(K.toarray()).min() > 0


def test_galerkin_identity_and_energy_limit():
    prev = None
    for res in (8, 16, 32, 64):
        system = assemble(build_grid(CONST, (), res), CONST, np.eye(1), 1.0)
        u = solve(system, tol=1e-12)
        e, p = energy(u, system), load_pairing(u, system)
        assert abs(e - p) <= 1e-10 * abs(p)
        if prev is not None:
            assert abs(e - 1 / 12) < abs(prev - 1 / 12)
        prev = e
    assert prev == pytest.approx(1 / 12, rel=1e-3)


def test_error_norms():
    system = assemble(build_grid(CONST, (), 16), CONST, np.eye(1), 1.0)
    u = solve(system)
    assert error_norms(u, u, "L1") == 0.0
    exact = solve_eps_1d(CONST)
    e1, e2 = (error_norms(solve(assemble(build_grid(CONST, (), r), CONST, np.eye(1))), exact) for r in (32, 64))
    assert e1 / e2 == pytest.approx(4.0, rel=0.05)
    # a reference with a jump against the zero field: jump-split quadrature is exact
    limit = solve_limit_1d(Measure1D.lebesgue(1, atoms=[("1/3", 1.0)]))
    zero_u = solve(assemble(build_grid(CONST, (), 7), CONST, np.eye(1), 0.0))
    zero_ref = solve_limit_1d(Measure1D.lebesgue(1), 0.0)
    assert error_norms(zero_u, limit, "L1") == pytest.approx(compare_1d(limit, zero_ref, "L1"), rel=1e-13)


def test_error_norm_against_zero_field_2d():
    system = assemble(build_grid(CONST, (1.0,), 8), CONST, np.eye(2), 1.0)
    u = solve(system)
    assert error_norms(u, ZeroField(1), "L1") == pytest.approx(np.mean(np.abs(u.values)), rel=0.3)


def test_discrete_maximum_principle_scalar():
    fld = realize(STIFF, 1e-2)
    u = solve(assemble(build_grid(fld, (1.0,), 16), fld, np.eye(2), 1.0))
    assert u.values.min() >= -1e-14


def test_pcg_matches_direct_and_handles_high_contrast():
    fld = realize(SOFT, 1e-4)
    system = assemble(build_grid(fld, (1.0,), 16), fld, np.eye(2), 1.0)
    a = solve(system, tol=1e-12)
    b = solve(system, method="direct")
    assert a.residual <= 1e-12 and a.iterations > 0
    np.testing.assert_allclose(a.values, b.values, rtol=0, atol=1e-9 * np.abs(b.values).max())


def test_pcg_failure_carries_history():
    fld = realize(STIFF, 1e-3)
    system = assemble(build_grid(fld, (1.0,), 16), fld, np.eye(2), 1.0)
    with pytest.raises(SolverError) as info:
        solve(system, max_iter=3)
    assert len(info.value.residual_history) == 4


def test_deterministic_solves():
    fld = realize(SOFT, 1e-2)
    runs = [solve(assemble(build_grid(fld, (1.0,), 8), fld, np.eye(2), 1.0)).values for _ in range(2)]
    assert np.array_equal(*runs)


def test_vector_source_and_exports():
    fld = realize(SOFT, 1e-1)
    law = SystemTensor(presets.system_tensor_2d())
    u = solve(assemble(build_grid(fld, (1.0,), 4), fld, law, np.array([1.0, 0.5])))
    csv = u.to_csv().splitlines()
    assert csv[0] == "x1,x2,u1,u2" and len(csv) == 1 + u.grid.n_nodes
    blocks = u.to_plotdata().strip().split("\n\n")
    assert len(blocks) == u.grid.counts[0] + 1  # one scanline along x₁ per transverse node
