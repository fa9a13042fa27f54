import numpy as np
import pytest
from numpy.polynomial import Polynomial

from strathom.piecewise import PiecewisePolynomial


def test_integral_of_quadratic_is_exact():
    p = PiecewisePolynomial.from_callable_poly(Polynomial([0.0, 0.5, -0.5]), 0.0, 1.0)  # x(1-x)/2
    assert p.integral() == pytest.approx(1 / 12, abs=1e-16)


def test_refine_preserves_values():
    p = PiecewisePolynomial([0.0, 0.4, 1.0], [[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]])
    q = p.refine([0.1, 0.7, 0.9])
    x = np.linspace(0.0, 1.0, 101)
    np.testing.assert_allclose(q(x), p(x), rtol=0, atol=1e-14)
    assert q.n_pieces == 5


def test_one_sided_values_and_jumps():
    p = PiecewisePolynomial.constant_pieces([0.0, 0.5, 1.0], [1.0, 3.0])
    assert p(0.5, "left") == 1.0 and p(0.5, "right") == 3.0
    loc, jump = p.jumps()
    assert loc.tolist() == [0.5] and jump.tolist() == [2.0]


def test_product_and_antiderivative():
    x = PiecewisePolynomial.from_callable_poly(Polynomial([0.0, 1.0]), 0.0, 2.0)
    sq = x * x
    assert sq.integral() == pytest.approx(8 / 3, rel=1e-15)
    F = x.antiderivative()
    assert F(2.0, "left") == pytest.approx(2.0, rel=1e-15)


def test_l1_norm_handles_sign_changes():
    p = PiecewisePolynomial.from_callable_poly(Polynomial([-0.5, 1.0]), 0.0, 1.0)  # x - 1/2
    assert p.norm(1) == pytest.approx(0.25, rel=1e-14)
    assert p.norm(np.inf) == pytest.approx(0.5, rel=1e-14)


def test_rejects_bad_breakpoints():
    with pytest.raises(ValueError):
        PiecewisePolynomial([0.0, 0.0, 1.0], [[1.0], [1.0]])
