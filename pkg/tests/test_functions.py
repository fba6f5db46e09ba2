import numpy as np
import pytest

from ampuniv.errors import ParameterError, ShapeError
from ampuniv.functions import (CoordinatePolynomial, LabeledFunction, Poly, PolyMap, Separable, check_jacobian,
                               exponent_tuples, identity, validate_function, zero)


def test_exponent_tuples_by_degree():
    assert exponent_tuples(1, 2) == [(0,), (1,), (2,)]
    assert exponent_tuples(2, 1) == [(0, 0), (1, 0), (0, 1)]
    assert len(exponent_tuples(2, 2)) == 6


def test_poly_arithmetic_and_evaluation():
    x = Poly.var(2, 0)
    y = Poly.var(2, 1)
    p = x * x + y * Poly.constant(2, 3.0)
    pts = np.array([[2.0, 1.0], [-1.0, 0.5]])
    assert np.allclose(p(pts), [7.0, 2.5])
    assert p.degree == 2
    assert np.allclose(p.derivative(0)(pts), [4.0, -2.0])
    assert (p - p).degree <= 0


def test_poly_shift_and_embed():
    p = Poly.univariate([1.0, 2.0, 3.0])          # 1 + 2x + 3x^2
    s = p.shift([1.0])                              # p(x + 1)
    xs = np.array([[0.0], [1.5], [-2.0]])
    assert np.allclose(s(xs), p(xs + 1.0))
    e = p.embed(3, [2])
    assert np.allclose(e(np.array([[9.0, 9.0, 2.0]])), p(np.array([[2.0]])))


def test_polymap_with_labels_and_jacobian():
    # g(x, y) = (x1 * y, x0 + x1^2)
    q, ql = 2, 1
    x0v, x1v, yv = (Poly.var(3, i) for i in range(3))
    g = PolyMap((x1v * yv, x0v + x1v * x1v), q_label=ql)
    x = np.array([[1.0, 2.0], [0.5, -1.0]])
    y = np.array([[3.0], [2.0]])
    assert np.allclose(g.evaluate(x, y), [[6.0, 5.0], [-2.0, 1.5]])
    J = g.jacobian(x, y)
    assert np.allclose(J[0], [[0.0, 3.0], [1.0, 4.0]])
    with pytest.raises(ShapeError):
        PolyMap((Poly.var(2, 0),), q_label=0)


def test_separable_polynomial_and_time_dependence():
    f = Separable.polynomial(lambda t: (0.0, 1.0, float(t)))
    x = np.array([[1.0], [2.0]])
    assert np.allclose(f.value(x, 2), [[3.0], [10.0]])
    assert np.allclose(f.jacobian(x, 2)[:, 0, 0], [5.0, 9.0])
    assert check_jacobian(f, np.random.default_rng(0).standard_normal((5, 1)), 3) < 1e-8


def test_identity_and_zero():
    x = np.arange(4.0)[:, None]
    assert np.array_equal(identity().value(x, 0), x)
    assert np.array_equal(zero().value(x, 0), np.zeros_like(x))


def test_labeled_function_dispatch():
    part = np.array([0, 0, 1])
    labels = np.array([1.0, 2.0, 3.0])
    maps = lambda a, t: PolyMap((Poly.var(2, 0) * Poly.var(2, 1) if a == 0 else Poly.var(2, 0) + Poly.var(2, 1),),
                                q_label=1)
    f = LabeledFunction(maps, part, labels)
    x = np.array([[2.0], [2.0], [2.0]])
    assert np.allclose(f.value(x, 0)[:, 0], [2.0, 4.0, 5.0])
    assert np.allclose(f.jacobian(x, 0)[:, 0, 0], [1.0, 2.0, 1.0])


def test_coordinate_polynomial_matches_direct_formula():
    rng = np.random.default_rng(1)
    cp = CoordinatePolynomial.random(4, 2, 2, 3, rng)
    x = rng.standard_normal((4, 2))
    direct = np.zeros((4, 2))
    for i in range(4):
        for r in range(2):
            for k, e in enumerate(cp.exps):
                direct[i, r] += cp.at(1)[i, r, k] * x[i, 0] ** e[0] * x[i, 1] ** e[1]
    assert np.allclose(cp.value(x, 1), direct)
    assert check_jacobian(cp, x, 1) < 1e-7
    assert np.array_equal(cp.at(10), cp.at(2))


def test_check_jacobian_detects_wrong_derivative():
    bad = Separable(lambda x, t: x ** 2, lambda x, t: x)
    assert check_jacobian(bad, np.ones((3, 1)), 0) > 0.1


def test_validate_function():
    validate_function(identity(), 1)
    with pytest.raises(ShapeError):
        validate_function(identity(), 2)
    with pytest.raises(ParameterError):
        validate_function(object(), 1)
