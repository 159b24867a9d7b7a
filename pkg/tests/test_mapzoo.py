import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hopfdeg.geometry import make_quadrature, random_sphere_points
from hopfdeg.invariants import brouwer_degree_count_auto, whitehead_cross_terms
from hopfdeg.mapzoo import (
    bubble_map,
    bubble_params,
    compose_with_stereographic,
    constant_map,
    from_descriptor,
    hopf_fibration,
    profile_dtheta,
    profile_theta,
    rotate_target,
    scale_map,
    whitehead_map,
)
from hopfdeg.sobolev import lipschitz_norm


SPHERE_FAMILIES = [bubble_map(1, 5), bubble_map(2, -3), bubble_map(2, 8), whitehead_map(1, 2),
                   whitehead_map(1, 1, k_minus=3), hopf_fibration(), hopf_fibration(capped=True)]


@pytest.mark.parametrize("f", SPHERE_FAMILIES, ids=lambda f: json.dumps(f.descriptor()))
def test_sphere_valued(f):
    p = random_sphere_points(f.m, 100000, 0)
    v = f(p)
    assert np.abs(np.linalg.norm(v, axis=-1) - 1).max() < 1e-10
    assert np.array_equal(v, f(p))


def test_profile_boundary_conditions():
    rho = 0.3
    assert profile_theta(0.0, rho) == pytest.approx(math.pi)
    assert abs(profile_theta(rho, rho)) < 1e-14
    assert abs(profile_dtheta(0.0, rho)) > 0
    assert abs(profile_dtheta(rho, rho)) < 1e-12
    # second derivative vanishes at the rim, so the cap glues C^2 to the constant
    h = 1e-7
    d2 = (profile_dtheta(rho, rho) - profile_dtheta(rho - h, rho)) / h
    assert abs(d2) < 1e-3


def test_degree_zero_is_constant():
    f = bubble_map(2, 0)
    v = f(random_sphere_points(2, 100, 1))
    assert np.all(v == [0, 0, 1])


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("d", [-2, 1, 4, 8])
def test_bubble_degree_by_count(n, d):
    assert brouwer_degree_count_auto(bubble_map(n, d)).rounded == d


def test_bubbles_disjoint():
    for n, d in ((1, 16), (2, 12)):
        bp = bubble_params(n, d)
        G = np.clip(bp.centers @ bp.centers.T, -1, 1)
        np.fill_diagonal(G, -1)
        assert np.arccos(G.max()) > 2 * bp.rho


def test_capacity_error():
    with pytest.raises(ValueError):
        bubble_map(1, 64, min_separation=0.2)
    with pytest.raises(ValueError):
        bubble_map(3, 1)


def test_lipschitz_scaling_with_degree():
    rule = make_quadrature(2, 96)
    c2 = lipschitz_norm(bubble_map(2, 2), rule) / math.sqrt(2)
    c8 = lipschitz_norm(bubble_map(2, 8), rule) / math.sqrt(8)
    assert 1 / 1.5 <= c8 / c2 <= 1.5


@pytest.mark.parametrize("k", [1, 2, 3])
def test_whitehead_constant_on_clifford_torus(k):
    f = whitehead_map(1, k)
    Q = f.meta["rotation"]
    rng = np.random.default_rng(k)
    a, b = rng.uniform(0, 2 * np.pi, (2, 5000))
    q = np.stack([np.cos(a), np.sin(a), np.cos(b), np.sin(b)], -1) / math.sqrt(2)
    v = f(q @ Q)         # q = Q p
    assert np.abs(v - f.meta["basepoint"]).max() < 1e-12


def test_whitehead_chart_pole_is_basepoint():
    f = whitehead_map(1, 2)
    Fe = compose_with_stereographic(f)
    assert np.allclose(Fe.value_at_infinity, [0, 0, 1])
    assert 0 < Fe.support_radius < 8
    far = random_sphere_points(2, 2000, 3) * (Fe.support_radius + 0.01)
    assert np.abs(Fe(far) - Fe.value_at_infinity).max() == 0


def test_whitehead_cross_terms_symmetric():
    a, b = whitehead_cross_terms(whitehead_map(1, 2), resolution=32)
    assert a == pytest.approx(b, rel=1e-6)
    assert abs(a) == pytest.approx(4.0, rel=1e-3)


def test_hopf_map_identities():
    h = hopf_fibration()
    p = random_sphere_points(3, 10000, 2)
    assert np.abs(np.linalg.norm(h(p), axis=1) - 1).max() < 1e-12
    # fibers are the circles e^{it}(z1, z2)
    t = 0.83
    c, s = math.cos(t), math.sin(t)
    R = np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, c, -s], [0, 0, s, c]])
    assert np.allclose(h(p @ R.T), h(p), atol=1e-12)


def test_capped_hopf_support():
    f = hopf_fibration(capped=True)
    Fe = compose_with_stereographic(f)
    R = f.meta["support_radius"]
    assert Fe.support_radius >= R - 1e-9
    far = random_sphere_points(2, 2000, 4) * (R * (1 + 1e-9))
    assert np.abs(Fe(far) - Fe.value_at_infinity).max() == 0
    assert compose_with_stereographic(hopf_fibration()).support_radius is None


def test_compose_constant():
    Fe = compose_with_stereographic(constant_map(3, [0, 1.0, 0]))
    assert Fe.support_radius == 0.0


@given(st.floats(0.05, 20))
def test_scale_map(lam):
    f = bubble_map(1, 3)
    p = random_sphere_points(1, 50, 0)
    assert np.allclose(scale_map(f, lam)(p), lam * f(p), rtol=0, atol=1e-15 * max(lam, 1))
    assert scale_map(f, 1.0) is f
    with pytest.raises(ValueError):
        scale_map(f, 0.0)


def test_descriptor_round_trip():
    R = [[0, -1, 0], [1, 0, 0], [0, 0, 1]]
    maps = [bubble_map(2, 5), whitehead_map(1, 2, k_minus=1), hopf_fibration(capped=True),
            scale_map(rotate_target(bubble_map(2, 3), R), 0.5), constant_map(2, [1.0, 0, 0])]
    for f in maps:
        desc = json.loads(json.dumps(f.descriptor()))
        g = from_descriptor(desc)
        p = random_sphere_points(f.m, 500, 9)
        assert g.descriptor() == f.descriptor()
        assert np.array_equal(g(p), f(p))
    with pytest.raises(ValueError):
        from_descriptor({"family": "nope", "params": {}})
