import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strathom.errors import HypothesisError
from strathom.measures import Measure1D, MeasurePair
from strathom.tensors import (
    IsotropicLaw,
    SystemTensor,
    bulk_tensor,
    heat_effective,
    iso_a_par,
    iso_a_perp,
    iso_effective,
    iso_interface_matrix,
    rearrangement_identity_iso,
    rearrangement_identity_sys,
    reorg_identity,
    sys_effective,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_spd(rng, k):
    M = rng.normal(size=(k, k))
    return M @ M.T + k * np.eye(k)


def laminate_energy(phases, energy_of):
    """Brute-force cell energy of a laminate stacked along x₁.

    ``phases`` is a list of (volume fraction, μ); ``energy_of(mu, c)``
    is the energy density with corrector slope ``c`` (a vector). The
    corrector is periodic, so Σ θ_k c_k = 0; the minimum of the quadratic
    over the slopes is found by solving the KKT system of a sampled
    quadratic form.
    """
    k = energy_of(phases[0][1], None)  # corrector dimension
    K = len(phases)
    dim = k * K

    def total(c):
        return sum(th * energy_of(mu, c[i * k:(i + 1) * k]) for i, (th, mu) in enumerate(phases))

    # recover the quadratic form total(c) = c·Hc + 2 g·c + e0 by polarization
    e0 = total(np.zeros(dim))
    I = np.eye(dim)
    H = np.empty((dim, dim))
    g = np.empty(dim)
    for i in range(dim):
        fp, fm = total(I[i]), total(-I[i])
        g[i] = (fp - fm) / 4
        H[i, i] = (fp + fm) / 2 - e0
    for i in range(dim):
        for j in range(i + 1, dim):
            H[i, j] = H[j, i] = (total(I[i] + I[j]) - e0 - 2 * g[i] - 2 * g[j] - H[i, i] - H[j, j]) / 2
    B = np.hstack([th * np.eye(k) for th, _ in phases])  # periodicity constraint
    KKT = np.block([[H, B.T], [B, np.zeros((k, k))]])
    sol = np.linalg.solve(KKT, np.concatenate([-g, np.zeros(k)]))
    c = sol[:dim]
    return total(c)


def laminate_pair(phases):
    nu = Measure1D.lebesgue(1, scale=sum(th / mu for th, mu in phases))
    m = Measure1D.lebesgue(1, scale=sum(th * mu for th, mu in phases))
    return MeasurePair(nu, m)


PHASES = [(0.3, 0.2), (0.5, 1.0), (0.2, 7.0)]


# -- worked examples -------------------------------------------------------------

def test_iso_a_perp_examples():
    np.testing.assert_allclose(iso_a_perp(IsotropicLaw(0), np.eye(3)), np.diag([2, 0, 0]))
    np.testing.assert_allclose(iso_a_perp(IsotropicLaw(1), np.eye(3)), np.diag([5, 5 / 3, 5 / 3]), rtol=1e-15)
    assert not iso_a_perp(IsotropicLaw(4), np.zeros((3, 3))).any()


def test_iso_a_par_examples(rng):
    G = rng.normal(size=(2, 2))
    G = G + G.T
    np.testing.assert_allclose(iso_a_par(IsotropicLaw(0), G), 2 * G)
    np.testing.assert_allclose(iso_a_par(IsotropicLaw(2), np.eye(2)), 4 * np.eye(2))
    assert not iso_a_par(IsotropicLaw(2), np.zeros((2, 2))).any()


def test_interface_matrix_examples():
    np.testing.assert_array_equal(iso_interface_matrix(IsotropicLaw(3)), np.diag([5.0, 1, 1]))
    np.testing.assert_array_equal(iso_interface_matrix(IsotropicLaw(0)), np.diag([2.0, 1, 1]))


def test_heat_identity_case():
    eff = heat_effective(np.eye(3))
    np.testing.assert_array_equal(eff.A_perp, np.diag([1.0, 0, 0]))
    np.testing.assert_array_equal(eff.a_par[0, :, 0, :], np.diag([0.0, 1, 1]))
    one = heat_effective([[4.0]])
    assert one.A_perp.tolist() == [[4.0]] and one.A_par.shape == (0, 0)


def test_heat_two_by_two_matches_laminate_value():
    eff = heat_effective([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(eff.A_perp, [[2, 1], [1, 0.5]], rtol=1e-15)
    # tangential part is A₂₂ - A₂₁A₁₂/A₁₁ = 3/2 (the laminate oracle below fixes the sign)
    np.testing.assert_allclose(eff.A_par, [[1.5]], rtol=1e-15)


def test_identity_examples():
    assert rearrangement_identity_iso(IsotropicLaw(1), np.eye(3), np.eye(3)) == (15.0, 15.0)
    assert rearrangement_identity_iso(IsotropicLaw(1), np.eye(3), np.zeros((3, 3))) == (0.0, 0.0)
    assert reorg_identity(IsotropicLaw(0), np.eye(3), np.eye(3)) == (2.0, 2.0)
    C = SystemTensor.from_conductivity(np.eye(3))
    G, H = np.arange(3.0).reshape(1, 3), np.ones((1, 3))
    assert rearrangement_identity_sys(C, G, H) == (3.0, 3.0)
    assert rearrangement_identity_sys(C, G, np.zeros((1, 3))) == (0.0, 0.0)


def test_singular_T_is_rejected():
    A = np.diag([0.0, 1.0])
    with pytest.raises(HypothesisError, match="condition"):
        SystemTensor(A.reshape(1, 2, 1, 2), require_ellipticity=False)


def test_non_elliptic_and_asymmetric_rejected():
    with pytest.raises(HypothesisError):
        SystemTensor.from_conductivity(np.diag([1.0, -1.0]))
    C = np.zeros((1, 2, 1, 2))
    C[0, 0, 0, 0] = C[0, 1, 0, 1] = 1.0
    C[0, 0, 0, 1] = 0.5
    with pytest.raises(HypothesisError):
        SystemTensor(C)


def test_iso_law_domain():
    with pytest.raises(HypothesisError):
        IsotropicLaw(-1.0)


# -- bulk tensor ----------------------------------------------------------------

def test_bulk_tensor_examples():
    eff = heat_effective(np.eye(3))
    leb = Measure1D.lebesgue(1)
    a = bulk_tensor(MeasurePair(leb, leb), eff).at(0.5)
    np.testing.assert_array_equal(a[0, :, 0, :], np.eye(3))
    a = bulk_tensor(MeasurePair(Measure1D.lebesgue(1, scale=2.0), leb), eff).at(0.5)
    np.testing.assert_array_equal(a[0, :, 0, :], np.diag([0.5, 1, 1]))
    m0 = Measure1D(1, (0, "1/2", 1), (0.0, 1.0))
    a = bulk_tensor(MeasurePair(leb, m0), eff).at(0.25)
    np.testing.assert_array_equal(a[0, :, 0, :], np.diag([1.0, 0, 0]))
    with pytest.raises(HypothesisError, match="degenerate"):
        bulk_tensor(MeasurePair(m0, leb), eff)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from([2, 3]))
def test_heat_bulk_tensor_matches_brute_force_laminate(seed, d):
    rng = np.random.default_rng(seed)
    A = random_spd(rng, d)
    a = bulk_tensor(laminate_pair(PHASES), heat_effective(A)).at(0.5)[0, :, 0, :]
    for _ in range(3):
        xi = rng.normal(size=d)

        def energy(mu, c):
            if c is None:
                return 1
            g = xi + c[0] * np.eye(d)[0]
            return mu * g @ A @ g

        assert xi @ a @ xi == pytest.approx(laminate_energy(PHASES, energy), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from([(2, 2), (3, 2), (2, 3)]))
def test_system_bulk_tensor_matches_brute_force_laminate(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    C = random_spd(rng, n * d).reshape(n, d, n, d)
    a = bulk_tensor(laminate_pair(PHASES), sys_effective(SystemTensor(C))).at(0.5)
    G = rng.normal(size=(n, d))

    def energy(mu, c):
        if c is None:
            return n
        X = G.copy()
        X[:, 0] += c
        return mu * np.einsum("ijkl,ij,kl->", C, X, X)

    assert np.einsum("ijkl,ij,kl->", a, G, G) == pytest.approx(laminate_energy(PHASES, energy), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from([0.0, 0.3, 1.0, 10.0]))
def test_isotropic_bulk_tensor_matches_brute_force_laminate(seed, l):
    rng = np.random.default_rng(seed)
    law = IsotropicLaw(l)
    a = bulk_tensor(laminate_pair(PHASES), iso_effective(law)).at(0.5)
    G = rng.normal(size=(3, 3))
    Xi = 0.5 * (G + G.T)

    def energy(mu, c):
        if c is None:
            return 3
        E = Xi.copy()
        E[:, 0] += 0.5 * c
        E[0, :] += 0.5 * c
        return mu * np.sum(law.stress(E) * E)

    assert np.einsum("ijkl,ij,kl->", a, G, G) == pytest.approx(laminate_energy(PHASES, energy), rel=1e-10)


# -- properties -----------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_system_effective_forms_symmetric_and_nonnegative(seed, n, d):
    rng = np.random.default_rng(seed)
    eff = sys_effective(SystemTensor(random_spd(rng, n * d).reshape(n, d, n, d)))
    for a in (eff.a_perp, eff.a_par):
        M = a.reshape(n * d, n * d)
        np.testing.assert_allclose(M, M.T, rtol=0, atol=1e-12 * max(1, np.abs(M).max()))
        assert np.linalg.eigvalsh(M).min() >= -1e-10 * max(1, np.abs(M).max())
    assert not eff.a_par[:, 0].any() and not eff.a_par[:, :, :, 0].any()


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_heat_equals_system_path(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    A = random_spd(rng, d)
    h, s = heat_effective(A), sys_effective(SystemTensor.from_conductivity(A))
    np.testing.assert_allclose(h.a_perp, s.a_perp, rtol=0, atol=1e-14 * np.abs(A).max())
    np.testing.assert_allclose(h.a_par, s.a_par, rtol=0, atol=1e-14 * np.abs(A).max())


def test_identities_vectorized_match_scalar(rng):
    law = IsotropicLaw(0.3)
    X, Y = rng.normal(size=(2, 5, 3, 3))
    X, Y = X + X.transpose(0, 2, 1), Y + Y.transpose(0, 2, 1)
    lhs, rhs = rearrangement_identity_iso(law, X, Y)
    for k in range(5):
        assert (lhs[k], rhs[k]) == pytest.approx(rearrangement_identity_iso(law, X[k], Y[k]), rel=1e-15)
