import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hopfdeg.geometry import (
    KFormValue,
    VolumeFormExtension,
    conformal_factor,
    make_quadrature,
    numerical_jacobian,
    pullback,
    random_sphere_points,
    sphere_area,
    stereographic_forward,
    stereographic_inverse,
    stereographic_jacobian,
    tangent_frame,
    wedge,
)
from hopfdeg.mapzoo import bubble_map, constant_map, identity_map, profile_dtheta

finite = st.floats(-5, 5, allow_nan=False)
vec3 = arrays(float, 3, elements=finite)


def test_chart_center_and_pole_limit():
    assert np.allclose(stereographic_inverse(np.zeros(3)), [0, 0, 0, 1])
    far = stereographic_inverse(np.array([1e6, -2e6, 0.5e6]))
    assert np.allclose(far, [0, 0, 0, -1], atol=1e-6)


@given(vec3, vec3)
def test_chordal_distance_formula(x, y):
    lhs = np.linalg.norm(stereographic_inverse(y) - stereographic_inverse(x))
    rhs = 2 * np.linalg.norm(y - x) / math.sqrt((1 + x @ x) * (1 + y @ y))
    assert abs(lhs - rhs) < 1e-12


def test_forward_fixed_points_and_pole():
    assert np.allclose(stereographic_forward([0, 0, 0, 1.0]), 0)
    assert np.allclose(stereographic_forward([1.0, 0, 0, 0]), [1, 0, 0])
    with pytest.raises(ValueError):
        stereographic_forward([0, 0, 0, -1.0])


def test_chart_round_trip():
    p = random_sphere_points(3, 1000, 0)
    p = p[p[:, -1] > -0.999]
    err = np.abs(stereographic_inverse(stereographic_forward(p)) - p).max()
    assert err < 1e-10


def test_conformality_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.normal(scale=1.5, size=(1000, 3))
    h = 1e-5
    J = np.stack([(stereographic_inverse(X + h * e) - stereographic_inverse(X - h * e)) / (2 * h)
                  for e in np.eye(3)], -1)
    sv = np.linalg.svd(J, compute_uv=False)
    lam = conformal_factor(X)
    assert np.abs(sv / lam[:, None] - 1).max() < 1e-5
    assert np.allclose(J, stereographic_jacobian(X), atol=1e-8)


def test_volume_factor_at_origin():
    J = stereographic_jacobian(np.zeros(3))
    assert conformal_factor(np.zeros(3)) == 2
    assert math.sqrt(np.linalg.det(J.T @ J)) == pytest.approx(8.0)


def test_pullback_examples():
    w = KFormValue(3, 2, [0.3, -1.2, 2.0])
    assert np.allclose(pullback(np.eye(3), w).coeffs, w.coeffs)
    rank1 = np.outer([1.0, 2, 3], [0.5, -1, 2])
    assert np.allclose(pullback(rank1, w).coeffs, 0)
    a, b, c, d = 1.5, -0.3, 2.2, 0.7
    out = pullback([[a, b], [c, d]], KFormValue(2, 2, [1.0]))
    assert out.coeffs[0] == pytest.approx(a * d - b * c)
    with pytest.raises(ValueError):
        pullback(np.eye(2), w)


@given(arrays(float, (4, 4), elements=finite), arrays(float, (4, 4), elements=finite),
       arrays(float, 6, elements=finite))
def test_pullback_functorial(A, B, c):
    w = KFormValue(4, 2, c)
    lhs = pullback(A @ B, w).coeffs
    rhs = pullback(B, pullback(A, w)).coeffs
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(lhs).max()))


@given(arrays(float, 4, elements=finite))
def test_one_form_wedge_self_vanishes(c):
    a = KFormValue(4, 1, c)
    assert np.abs(wedge(a, a).coeffs).max() < 1e-12


def test_form_coefficient_count():
    with pytest.raises(ValueError):
        KFormValue(4, 2, np.zeros(5))


@pytest.mark.parametrize("m,res", [(1, 64), (2, 16), (3, 12)])
def test_quadrature_weights(m, res):
    rule = make_quadrature(m, res)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(sphere_area(m), rel=1e-8)
    assert np.allclose(np.linalg.norm(rule.nodes, axis=1), 1, atol=1e-12)


def test_quadrature_examples():
    r1 = make_quadrature(1, 100)
    assert len(r1) == 100 and np.allclose(r1.weights, 2 * np.pi / 100)
    r2 = make_quadrature(2, 16)
    assert r2.integrate(r2.nodes[:, 2] ** 2) == pytest.approx(4 * np.pi / 3, abs=1e-8)
    r3 = make_quadrature(3, 8)
    assert r3.integrate(np.ones(len(r3))) == pytest.approx(2 * np.pi ** 2, abs=1e-8)
    with pytest.raises(ValueError):
        make_quadrature(4, 8)


@pytest.mark.parametrize("m,res", [(2, 12), (3, 10)])
def test_quadrature_exact_on_quadratics(m, res):
    rule = make_quadrature(m, res)
    X = rule.nodes
    area = sphere_area(m)
    for i in range(m + 1):
        assert abs(rule.integrate(X[:, i])) < 1e-8
        assert rule.integrate(X[:, i] ** 2) == pytest.approx(area / (m + 1), abs=1e-8)
        for j in range(i + 1, m + 1):
            assert abs(rule.integrate(X[:, i] * X[:, j])) < 1e-8


@pytest.mark.parametrize("kind", ["bump", "linear", "euler"])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_volume_form_normalized(kind, m):
    rule = make_quadrature(m, {1: 64, 2: 12, 3: 8}[m])
    ext = VolumeFormExtension(m, kind)
    E = tangent_frame(rule.nodes)
    dens = pullback(E, ext.form(rule.nodes)).coeffs[:, 0]
    assert rule.integrate(dens) == pytest.approx(1.0, abs=1e-6)


def test_bump_extension_compact():
    ext = VolumeFormExtension(2)
    pts = random_sphere_points(2, 50, 3)
    assert np.all(ext(0.49 * pts) == 0)
    assert np.all(ext(1.51 * pts) == 0)


@given(arrays(float, 4, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_tangent_frame_oriented(v):
    p = v / np.linalg.norm(v)
    E = tangent_frame(p)
    assert np.allclose(E.T @ E, np.eye(3), atol=1e-12)
    assert np.allclose(p @ E, 0, atol=1e-12)
    assert np.linalg.det(np.column_stack([p, E])) == pytest.approx(1.0)


def test_numerical_jacobian_examples():
    p = random_sphere_points(2, 20, 4)
    sv = np.linalg.svd(numerical_jacobian(identity_map(2), p), compute_uv=False)
    assert np.abs(sv - 1).max() < 1e-6
    assert np.abs(numerical_jacobian(constant_map(2, [0, 0, 1.0]), p)).max() == 0


def test_numerical_jacobian_bubble_center():
    f = bubble_map(2, 1)
    bp = f.meta["bubbles"]
    J = numerical_jacobian(f, bp.centers[0])
    expected = abs(profile_dtheta(0.0, bp.rho))
    assert np.linalg.norm(J, 2) == pytest.approx(expected, rel=1e-4)


def test_numerical_jacobian_second_order():
    f = bubble_map(2, 3)
    p = random_sphere_points(2, 200, 5)
    J0 = numerical_jacobian(f, p, 1e-5)
    e1 = np.abs(numerical_jacobian(f, p, 2e-2) - J0).max()
    e2 = np.abs(numerical_jacobian(f, p, 1e-2) - J0).max()
    assert 3.0 < e1 / e2 < 5.0
