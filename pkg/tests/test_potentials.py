import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hopfdeg.potentials import (
    BumpTwoForm,
    GridField,
    TrigMap,
    codifferential,
    commutator_experiment,
    exterior_derivative,
    grid_axis,
    grid_coords,
    hodge_laplacian,
    inner,
    newton_kernel,
    periodic_newton_kernel,
    poisson_extension,
    riesz_potential,
    sample_form,
    scalar_laplacian,
)

PI = math.pi


def trig1(X):
    x, y, z = X[..., 0], X[..., 1], X[..., 2]
    return np.stack([np.sin(x + 2 * y) * np.cos(z), np.cos(x - y + z), np.sin(2 * z) * np.sin(y)], -1)


def d_trig1(X):
    x, y, z = X[..., 0], X[..., 1], X[..., 2]
    return np.stack([-np.sin(x - y + z) - 2 * np.cos(x + 2 * y) * np.cos(z),
                     np.sin(x + 2 * y) * np.sin(z),
                     np.sin(2 * z) * np.cos(y) + np.sin(x - y + z)], -1)


def codiff_trig1(X):
    x, y, z = X[..., 0], X[..., 1], X[..., 2]
    return -(np.cos(x + 2 * y) * np.cos(z) + np.sin(x - y + z) + 2 * np.cos(2 * z) * np.sin(y))[..., None]


def bump(X, rad=2.0, power=6):
    return np.clip(1 - np.sum(X * X, -1) / rad ** 2, 0, None) ** power


def test_grid_field_shape_and_compact_checks():
    with pytest.raises(ValueError):
        GridField(3, 1, 1.0, 8, np.zeros((2, 8, 8, 8)))
    with pytest.raises(ValueError):
        GridField(3, 0, 1.0, 8, np.ones((1, 8, 8, 8)), compact=True)
    with pytest.raises(ValueError):
        GridField(3, 0, 1.0, 8, np.ones((1, 8, 8, 8)), "spherical")


def test_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    F = GridField(3, 2, 1.7, 8, rng.normal(size=(3, 8, 8, 8)), "periodic")
    G = GridField.from_bytes(F.to_bytes())
    assert (G.m, G.k, G.L, G.N, G.convention) == (3, 2, 1.7, 8, "periodic")
    assert np.array_equal(G.values, F.values)
    F.save(tmp_path / "f.bin")
    assert np.array_equal(GridField.load(tmp_path / "f.bin").values, F.values)
    with pytest.raises(ValueError):
        GridField.from_bytes(b"nope" + F.to_bytes()[4:])


def test_constant_and_linear_fields():
    C = sample_form(lambda X: np.ones(X.shape[:-1] + (3,)), 3, 1, 2.0, 16, "periodic")
    assert np.abs(exterior_derivative(C).values).max() == 0
    F = sample_form(lambda X: np.stack([0 * X[..., 0], X[..., 0], 0 * X[..., 0]], -1), 3, 1, 2.0, 16)
    inner_sl = (slice(None),) + (slice(2, -2),) * 3
    dF = exterior_derivative(F).values[inner_sl]
    assert np.abs(dF[0] - 1).max() < 1e-10 and np.abs(dF[1:]).max() < 1e-10
    G = sample_form(lambda X: np.stack([X[..., 0], 0 * X[..., 0], 0 * X[..., 0]], -1), 3, 1, 2.0, 16)
    assert np.abs(codifferential(G).values[inner_sl] + 1).max() < 1e-10


def test_degree_errors():
    F = sample_form(trig1, 3, 1, PI, 8, "periodic")
    with pytest.raises(ValueError):
        codifferential(sample_form(lambda X: X[..., :1], 3, 0, PI, 8, "periodic"))
    with pytest.raises(ValueError):
        exterior_derivative(exterior_derivative(exterior_derivative(F)))


def _err(N, op, exact_fn, k):
    F = sample_form(trig1, 3, 1, PI, N, "periodic")
    return np.abs(op(F).values - sample_form(exact_fn, 3, k, PI, N, "periodic").values).max()


@pytest.mark.parametrize("op,exact,k", [(exterior_derivative, d_trig1, 2), (codifferential, codiff_trig1, 0)])
def test_second_order_convergence(op, exact, k):
    assert _err(32, op, exact, k) / _err(64, op, exact, k) >= 3.5


def test_d_squared_and_hodge_equals_scalar():
    F = sample_form(trig1, 3, 1, PI, 32, "periodic")
    assert np.abs(exterior_derivative(exterior_derivative(F)).values).max() < 1e-12
    assert np.abs(hodge_laplacian(F).values - scalar_laplacian(F).values).max() < 1e-12
    S = sample_form(lambda X: bump(X, 1.0)[..., None] * np.ones(3), 3, 2, 2.0, 32)
    assert np.abs(hodge_laplacian(S).values - scalar_laplacian(S).values).max() < 1e-10


def test_spectral_derivative_exact_on_trig():
    F = sample_form(trig1, 3, 1, PI, 16, "periodic")
    ex = sample_form(d_trig1, 3, 2, PI, 16, "periodic")
    assert np.abs(exterior_derivative(F, "spectral").values - ex.values).max() < 1e-12


@given(st.integers(0, 2 ** 32 - 1))
def test_adjointness_random_compact(seed):
    rng = np.random.default_rng(seed)
    N, L = 32, 2.0
    X = grid_coords(3, L, N)
    b = bump(X, 1.2)[..., None]
    A = GridField(3, 1, L, N, np.moveaxis(b * rng.normal(size=3) + b ** 2 * rng.normal(size=3), -1, 0))
    B = GridField(3, 2, L, N, np.moveaxis(b * rng.normal(size=3) * X[..., :1], -1, 0))
    lhs, rhs = inner(exterior_derivative(A), B), inner(A, codifferential(B))
    assert abs(lhs - rhs) <= 1e-3 * max(abs(lhs), 1e-12)


def test_riesz_zero_and_validation():
    Z = GridField(3, 0, 2.0, 8, np.zeros((1, 8, 8, 8)), "periodic")
    assert np.all(riesz_potential(Z, 2.0).values == 0)
    with pytest.raises(ValueError):
        riesz_potential(Z, 0.0)
    with pytest.raises(ValueError):
        riesz_potential(GridField(3, 0, 2.0, 8, np.ones((1, 8, 8, 8))), 2.0)


def test_newton_potential_profile():
    N, L, sig = 96, 6.0, 0.3
    X = grid_coords(3, L, N)
    r = np.linalg.norm(X, axis=-1)
    rho = np.exp(-r ** 2 / (2 * sig ** 2)) / (2 * PI * sig ** 2) ** 1.5
    th = riesz_potential(GridField(3, 0, L, N, rho[None], compact=True), 2.0).values[0]
    G = periodic_newton_kernel(L)
    ax = grid_axis(L, N)
    for R in (1.0, 1.5, 2.0, 2.5):
        i = int(np.argmin(np.abs(ax - R)))
        assert abs(th[i, N // 2, N // 2] / G(ax[i]) - 1) < 0.05
    # far from the box walls the periodic correction is a small perturbation of c/r
    assert newton_kernel(3)(1.0) == pytest.approx(1 / (4 * PI))


def test_inverse_consistency_second_order():
    errs = []
    for N in (32, 64):
        X = grid_coords(3, 3.0, N)
        b = bump(X)
        F = GridField(3, 0, 3.0, N, b[None], compact=True)
        th = riesz_potential(F, 2.0)
        errs.append(np.abs(scalar_laplacian(th).values[0] - (b - b.mean())).max())
    assert errs[0] / errs[1] >= 3.5


def test_riesz_semigroup():
    X = grid_coords(3, PI, 16)
    F = GridField(3, 0, PI, 16, trig1(X)[..., :1].transpose(3, 0, 1, 2), "periodic")
    a = riesz_potential(riesz_potential(F, 0.5), 1.5).values
    assert np.allclose(a, riesz_potential(F, 2.0).values, atol=1e-12)


def test_poisson_unit_mass():
    for conv in ("periodic",):
        one = GridField(3, 0, PI, 32, np.ones((1, 32, 32, 32)), conv)
        assert poisson_extension(one, [0.1, 0.2, 0.0], 0.5) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        poisson_extension(one, [0, 0, 0], 0.0)


def test_poisson_monotone_and_harmonic():
    X = grid_coords(3, PI, 32)
    g = GridField(3, 0, PI, 32, np.exp(-np.sum(X ** 2, -1) / 0.5)[None], "periodic")
    vals = [poisson_extension(g, [0, 0, 0], t) for t in (0.2, 0.4, 0.8, 1.6)]
    assert all(a > b for a, b in zip(vals, vals[1:]))

    x0, t0 = np.array([0.3, -0.2, 0.1]), 0.7

    def lap(d):
        c = poisson_extension(g, x0, t0)
        acc = poisson_extension(g, x0, t0 + d) + poisson_extension(g, x0, t0 - d) - 2 * c
        for e in np.eye(3):
            acc += poisson_extension(g, x0 + d * e, t0) + poisson_extension(g, x0 - d * e, t0) - 2 * c
        return abs(acc) / d ** 2

    assert lap(0.1) / lap(0.05) > 3.5


def test_commutator_constant_map():
    r = commutator_experiment(TrigMap(constant=True), BumpTwoForm(), 0.75, N=16)
    assert r["lhs"] == 0 and r["ratio"] == 0


def test_commutator_kappa_homogeneity():
    f = TrigMap(M=2)
    a = commutator_experiment(f, BumpTwoForm(), 0.75, N=32, mc_samples=20000)
    b = commutator_experiment(f, BumpTwoForm(lam=3.7), 0.75, N=32, mc_samples=20000)
    assert b["lhs"] / a["lhs"] == pytest.approx(3.7 ** 2, rel=1e-10)
    assert abs(b["ratio"] / a["ratio"] - 1) < 1e-8
    with pytest.raises(ValueError):
        commutator_experiment(f, BumpTwoForm(), 0.4, N=16)


def test_bump_form_closed():
    kappa = BumpTwoForm(width=1.3, center=(0.1, 0.0, -0.2))
    # sampled exact forms are discretely closed up to O(h^2)
    e = [np.abs(exterior_derivative(sample_form(kappa, 3, 2, 2.0, N, compact=True)).values).max()
         for N in (24, 48)]
    assert e[0] / e[1] >= 3.5
    rng = np.random.default_rng(0)
    y = rng.uniform(-1, 1, (50, 3))
    h = 1e-6
    fd = np.stack([(kappa(y + h * e) - kappa(y - h * e)) / (2 * h) for e in np.eye(3)], -1)
    assert np.allclose(kappa.derivative(y), fd, atol=1e-6)
