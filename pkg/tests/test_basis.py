"""Bases and quadrature: cardinality, Lagrange property, exactness."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stagdg.basis import (
    SpaceTimeBasis,
    gauss_legendre_01,
    make_quadrature,
    make_spatial_basis,
    make_time_basis,
)


def test_triangle_p2_cardinality():
    assert make_spatial_basis("triangle", 2).n == 6


def test_quad_p1_cardinality():
    assert make_spatial_basis("quad", 1).n == 4


def test_triangle_p0_is_constant_one():
    b = make_spatial_basis("triangle", 0)
    assert b.n == 1
    pts = np.random.default_rng(0).random((20, 2)) * 0.5
    assert np.allclose(b.eval(pts), 1.0)


@pytest.mark.parametrize("kind,p,n", [("triangle", 0, 1), ("triangle", 1, 3),
                                      ("triangle", 3, 10), ("triangle", 4, 15),
                                      ("quad", 0, 1), ("quad", 2, 9),
                                      ("quad", 4, 25)])
def test_cardinality_formula(kind, p, n):
    assert make_spatial_basis(kind, p).n == n


def test_unsupported_degrees_rejected():
    with pytest.raises(ValueError):
        make_spatial_basis("triangle", 9)
    with pytest.raises(ValueError):
        make_time_basis(-1)
    with pytest.raises(ValueError):
        make_spatial_basis("hex", 1)


@pytest.mark.parametrize("kind,p", [("triangle", 1), ("triangle", 3),
                                    ("quad", 2), ("quad", 4)])
def test_lagrange_property(kind, p):
    b = make_spatial_basis(kind, p)
    assert np.allclose(b.eval(b.nodes), np.eye(b.n), atol=1e-12)


@pytest.mark.parametrize("kind,p", [("triangle", 2), ("quad", 3)])
def test_partition_of_unity(kind, p):
    b = make_spatial_basis(kind, p)
    pts = np.random.default_rng(1).random((50, 2))
    if kind == "triangle":
        pts = pts * np.array([1.0, 1.0])
        pts[:, 1] *= 1.0 - pts[:, 0]
    assert np.allclose(b.eval(pts).sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("kind,p", [("triangle", 2), ("triangle", 4),
                                    ("quad", 3)])
def test_interpolation_exactness(kind, p):
    """Interpolating a polynomial of degree <= p at the nodes reproduces it."""
    rng = np.random.default_rng(2)
    b = make_spatial_basis(kind, p)
    # random polynomial with total (triangle) / per-axis (quad) degree <= p
    if kind == "triangle":
        expo = [(a, c) for c in range(p + 1) for a in range(p + 1 - c)]
    else:
        expo = [(a, c) for c in range(p + 1) for a in range(p + 1)]
    coef = rng.standard_normal(len(expo))

    def poly(pts):
        return sum(cc * pts[:, 0] ** a * pts[:, 1] ** c
                   for cc, (a, c) in zip(coef, expo))

    pts = rng.random((40, 2)) * 0.5
    interp = b.eval(pts) @ poly(b.nodes)
    assert np.allclose(interp, poly(pts), atol=1e-11)


def test_gradient_matches_finite_difference():
    b = make_spatial_basis("triangle", 3)
    pts = np.array([[0.2, 0.3], [0.1, 0.5]])
    g = b.grad(pts)
    for d, e in enumerate(np.eye(2)):
        for h in (1e-5, 5e-6):
            fd = (b.eval(pts + h * e) - b.eval(pts - h * e)) / (2 * h)
            assert np.allclose(fd, g[:, :, d], atol=1e-8)


def test_time_basis_p0_midpoint():
    b = make_time_basis(0)
    assert np.allclose(b.nodes, [0.5])
    assert np.allclose(b.eval([0.1, 0.9]), 1.0)


def test_time_basis_p1_gauss_nodes():
    b = make_time_basis(1)
    sq3 = np.sqrt(3.0)
    assert np.allclose(np.sort(b.nodes), [(3 - sq3) / 6, (3 + sq3) / 6],
                       atol=1e-14)


def test_time_basis_p2_symmetric_about_half():
    b = make_time_basis(2)
    assert len(b.nodes) == 3
    assert np.allclose(np.sort(b.nodes) + np.sort(b.nodes)[::-1], 1.0,
                       atol=1e-14)


def test_time_basis_lagrange_and_unity():
    for pg in range(4):
        b = make_time_basis(pg)
        assert np.allclose(b.eval(b.nodes), np.eye(b.n), atol=1e-12)
        tau = np.linspace(0, 1, 7)
        assert np.allclose(b.eval(tau).sum(axis=1), 1.0, atol=1e-12)


def test_triangle_quadrature_xy_moment():
    rule = make_quadrature("triangle", 2)
    val = np.sum(rule.weights * rule.points[:, 0] * rule.points[:, 1])
    assert abs(val - 1.0 / 24.0) < 1e-13


def test_interval_rule_cubic():
    x, w = gauss_legendre_01(2)
    assert abs(np.sum(w * x**3) - 0.25) < 1e-14


@pytest.mark.parametrize("kind,measure", [("triangle", 0.5), ("quad", 1.0)])
def test_weights_sum_to_measure(kind, measure):
    for ex in (1, 3, 6):
        rule = make_quadrature(kind, ex)
        assert abs(rule.weights.sum() - measure) < 1e-13


@given(st.integers(0, 6), st.integers(0, 6))
@settings(max_examples=30, deadline=None)
def test_triangle_quadrature_monomial_exactness(a, b):
    deg = a + b
    rule = make_quadrature("triangle", max(deg, 1))
    num = np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b)
    # exact integral of x^a y^b over the unit reference triangle
    from math import factorial
    exact = factorial(a) * factorial(b) / factorial(a + b + 2)
    assert abs(num - exact) < 1e-13


def test_space_time_counts():
    st_b = SpaceTimeBasis(2, 1)
    assert st_b.n_phi == 6
    assert st_b.n_psi == 9
    assert st_b.n_gamma == 2
