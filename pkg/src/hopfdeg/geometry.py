"""Spheres, quadrature, the stereographic chart, pointwise forms and pullbacks.

Points of S^m are plain float arrays with a trailing axis of length m+1.
Forms are stored as coefficient arrays indexed by increasing multi-indices
(``itertools.combinations`` order), with a trailing axis of length C(m, k).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_legendre


# ---------------------------------------------------------------------------
# basic sphere helpers

def sphere_area(m: int) -> float:
    """Surface measure of the unit sphere S^m in R^{m+1}."""
    return 2 * math.pi ** ((m + 1) / 2) / gamma((m + 1) / 2)


def ball_volume(m: int) -> float:
    """Volume of the unit ball B^m in R^m."""
    return math.pi ** (m / 2) / gamma(m / 2 + 1)


def as_unit(x) -> np.ndarray:
    """Normalize along the last axis. Raises on zero vectors."""
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("cannot normalize a zero vector")
    return x / n


def random_sphere_points(m: int, n: int, rng=None) -> np.ndarray:
    """n uniformly distributed points on S^m."""
    rng = np.random.default_rng(rng)
    return as_unit(rng.standard_normal((n, m + 1)))


def tangent_frame(p) -> np.ndarray:
    """Orthonormal tangent frame at p, shape (..., m+1, m).

    Built from a Householder reflection taking a coordinate pole to p and
    oriented so that det[p, E] = +1 (outward normal first).
    """
    p = np.asarray(p, dtype=float)
    dim = p.shape[-1]
    e = np.zeros(dim)
    e[-1] = 1.0
    # reflect whichever pole is farther from p, so |v| >= 1
    sgn = np.where(p[..., -1:] < 0, 1.0, -1.0)
    v = sgn * e - p
    vv = np.sum(v * v, axis=-1)[..., None, None]
    H = np.eye(dim) - 2 * v[..., :, None] * v[..., None, :] / vv
    E = H[..., :, :-1].copy()
    d = np.linalg.det(np.concatenate([p[..., :, None], E], axis=-1))
    E[..., :, 0] *= np.sign(d)[..., None]
    return E


# ---------------------------------------------------------------------------
# stereographic chart

def stereographic_inverse(x) -> np.ndarray:
    """Upsilon(x) = (2x/(1+|x|^2), (1-|x|^2)/(1+|x|^2)); R^m -> S^m minus the south pole."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([2 * x / (1 + r2), (1 - r2) / (1 + r2)], axis=-1)


def stereographic_forward(p) -> np.ndarray:
    """Inverse of :func:`stereographic_inverse`: p -> p[:m] / (1 + p[m])."""
    p = np.asarray(p, dtype=float)
    den = 1 + p[..., -1:]
    if np.any(den <= 1e-14):
        raise ValueError("the south pole is the pole of the chart")
    return p[..., :-1] / den


def conformal_factor(x) -> np.ndarray:
    """lambda(x) = 2/(1+|x|^2); DUpsilon(x) is lambda times an isometry."""
    x = np.asarray(x, dtype=float)
    return 2.0 / (1 + np.sum(x * x, axis=-1))


def stereographic_jacobian(x) -> np.ndarray:
    """Closed-form DUpsilon(x), shape (..., m+1, m)."""
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    r2 = np.sum(x * x, axis=-1)[..., None, None]
    top = 2 * np.eye(m) / (1 + r2) - 4 * x[..., :, None] * x[..., None, :] / (1 + r2) ** 2
    bot = -4 * x[..., None, :] / (1 + r2) ** 2
    return np.concatenate([top, bot], axis=-2)


# ---------------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights on S^m; weights sum to |S^m|."""
    m: int
    nodes: np.ndarray
    weights: np.ndarray
    kind: str = ""
    resolution: int = 0

    def __len__(self):
        return len(self.weights)

    def integrate(self, values) -> float | np.ndarray:
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))

    @property
    def mesh_size(self) -> float:
        """Typical node spacing, (|S^m|/N)^(1/m)."""
        return (sphere_area(self.m) / len(self)) ** (1 / self.m)


def make_quadrature(m: int, resolution: int) -> QuadratureRule:
    """Product rules on S^1, S^2, S^3.

    S^1: uniform angles.  S^2: Gauss-Legendre in z times uniform longitude
    (2*resolution of them).  S^3: Hopf coordinates
    p = (cos(eta) e^{i xi1}, sin(eta) e^{i xi2}) with u = sin^2(eta) on a
    Gauss-Legendre rule and uniform xi1, xi2; dV = du dxi1 dxi2 / 2.
    """
    if resolution < 4:
        raise ValueError("resolution must be >= 4")
    n = int(resolution)
    if m == 1:
        t = 2 * np.pi * np.arange(n) / n
        nodes = np.stack([np.cos(t), np.sin(t)], -1)
        w = np.full(n, 2 * np.pi / n)
        return QuadratureRule(1, nodes, w, "circle-uniform", n)
    if m == 2:
        z, wz = roots_legendre(n)
        nphi = 2 * n
        phi = 2 * np.pi * np.arange(nphi) / nphi
        Z, PHI = np.meshgrid(z, phi, indexing="ij")
        R = np.sqrt(1 - Z ** 2)
        nodes = np.stack([R * np.cos(PHI), R * np.sin(PHI), Z], -1).reshape(-1, 3)
        w = np.repeat(wz, nphi) * (2 * np.pi / nphi)
        return QuadratureRule(2, nodes, w, "s2-gauss-product", n)
    if m == 3:
        x, wx = roots_legendre(n)
        u = (x + 1) / 2
        wu = wx / 2
        na = 2 * n
        xi = 2 * np.pi * np.arange(na) / na
        U, X1, X2 = np.meshgrid(u, xi, xi, indexing="ij")
        c, s = np.sqrt(1 - U), np.sqrt(U)
        nodes = np.stack([c * np.cos(X1), c * np.sin(X1), s * np.cos(X2), s * np.sin(X2)], -1)
        nodes = nodes.reshape(-1, 4)
        w = np.repeat(wu, na * na) * 0.5 * (2 * np.pi / na) ** 2
        return QuadratureRule(3, nodes, w, "s3-hopf-product", n)
    raise ValueError(f"unsupported sphere dimension {m}")


# ---------------------------------------------------------------------------
# forms

@lru_cache(maxsize=None)
def multi_indices(m: int, k: int) -> tuple:
    return tuple(itertools.combinations(range(m), k))


@dataclass(frozen=True)
class KFormValue:
    """A k-form on R^m at a point (or a batch of points along leading axes)."""
    m: int
    k: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape[-1] != math.comb(self.m, self.k):
            raise ValueError("coefficient count must equal binomial(m, k)")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, *vectors) -> np.ndarray:
        """Evaluate on k vectors in R^m."""
        V = np.stack([np.asarray(v, float) for v in vectors], -1)
        return pullback(V, self).coeffs[..., 0]


def _perm_sign(seq) -> int:
    seq = list(seq)
    s = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                s = -s
    return s


def wedge(a: KFormValue, b: KFormValue) -> KFormValue:
    if a.m != b.m:
        raise ValueError("dimension mismatch")
    m, k = a.m, a.k + b.k
    out_idx = {I: n for n, I in enumerate(multi_indices(m, k))}
    shape = np.broadcast_shapes(a.coeffs.shape[:-1], b.coeffs.shape[:-1])
    out = np.zeros(shape + (math.comb(m, k),))
    for i, I in enumerate(multi_indices(m, a.k)):
        for j, J in enumerate(multi_indices(m, b.k)):
            if set(I) & set(J):
                continue
            joined = I + J
            out[..., out_idx[tuple(sorted(joined))]] += _perm_sign(joined) * a.coeffs[..., i] * b.coeffs[..., j]
    return KFormValue(m, k, out)


def pullback(jacobian, omega, k: int | None = None) -> KFormValue:
    """Pull back a k-form on R^l through a linear map R^m -> R^l.

    ``jacobian`` has shape (..., l, m); ``omega`` is a KFormValue on R^l (or a
    raw coefficient array with degree ``k``).  (J*omega)_I = sum_K omega_K det J[K, I].
    """
    J = np.asarray(jacobian, dtype=float)
    ell, m = J.shape[-2:]
    if isinstance(omega, KFormValue):
        if omega.m != ell:
            raise ValueError("dimension mismatch between jacobian and form")
        k, w = omega.k, omega.coeffs
    else:
        w = np.asarray(omega, dtype=float)
        if k is None:
            raise ValueError("form degree k is required for raw coefficients")
        if math.comb(ell, k) != w.shape[-1]:
            raise ValueError("dimension mismatch between jacobian and form")
    if k > min(m, ell):
        raise ValueError("form degree exceeds the dimensions")
    Ks = multi_indices(ell, k)
    Is = multi_indices(m, k)
    if k == 0:
        return KFormValue(m, 0, np.broadcast_to(w, np.broadcast_shapes(w.shape, J.shape[:-2] + (1,))).copy())
    Kidx = np.array(Ks)
    out = []
    for I in Is:
        sub = J[..., :, list(I)][..., Kidx, :]          # (..., nK, k, k)
        out.append(np.sum(w * np.linalg.det(sub), axis=-1))
    return KFormValue(m, k, np.stack(out, -1))


def _bump(r, r0, r1, a0, a1):
    """C^2 radial cutoff: 0 outside (r0, r1), 1 on [a0, a1], quintic ramps."""
    r = np.asarray(r, dtype=float)

    def step(t):
        t = np.clip(t, 0, 1)
        return t ** 3 * (10 - 15 * t + 6 * t * t)

    return step((r - r0) / (a0 - r0)) * step((r1 - r) / (r1 - a1))


@dataclass(frozen=True)
class VolumeFormExtension:
    """An m-form on R^{m+1} restricting to the normalized volume form of S^m.

    kind='bump'   : radially projected volume form times a C^2 bump that is 1
                    on [plateau] and vanishes for |y| <= r0 or |y| >= r1.
    kind='linear' : y_0 dy_1 ^ ... ^ dy_m / |B^{m+1}|, homogeneous of degree m+1.
    kind='euler'  : sum_i (-1)^i y_i dy_0^..^dy_i-hat^..^dy_m / |S^m|, also
                    homogeneous of degree m+1, rotation invariant.
    """
    m: int
    kind: str = "bump"
    r0: float = 0.5
    r1: float = 1.5
    plateau: tuple = (0.75, 1.25)

    @property
    def normalization(self) -> float:
        if self.kind == "linear":
            return 1 / ball_volume(self.m + 1)
        return 1 / sphere_area(self.m)

    def __call__(self, y) -> np.ndarray:
        """Coefficients at y, shape (..., m+1), in multi_indices(m+1, m) order."""
        y = np.asarray(y, dtype=float)
        m = self.m
        out = np.zeros(y.shape[:-1] + (m + 1,))
        # multi_indices(m+1, m)[j] omits the index m - j
        if self.kind == "linear":
            out[..., m] = self.normalization * y[..., 0]
            return out
        c = self.normalization
        if self.kind == "bump":
            r = np.linalg.norm(y, axis=-1)
            safe = np.where(r > 0, r, 1.0)
            c = c * _bump(r, self.r0, self.r1, *self.plateau) / safe ** (m + 1)
        elif self.kind != "euler":
            raise ValueError(f"unknown extension kind {self.kind!r}")
        for j in range(m + 1):
            i = m - j
            out[..., j] = c * (-1) ** i * y[..., i]
        return out

    def form(self, y) -> KFormValue:
        return KFormValue(self.m + 1, self.m, self(y))


def volume_density(values, jac_frame, ext: VolumeFormExtension | None = None) -> np.ndarray:
    """Density of f*omega w.r.t. surface measure, from f(p) and Df(p)E.

    ``jac_frame`` is the ambient Jacobian applied to a positively oriented
    tangent frame, shape (..., m+1, m).
    """
    values = np.asarray(values, float)
    if ext is None:
        m = values.shape[-1] - 1
        M = np.concatenate([values[..., :, None], jac_frame], axis=-1)
        return np.linalg.det(M) / sphere_area(m)
    return pullback(jac_frame, ext.form(values)).coeffs[..., 0]


# ---------------------------------------------------------------------------
# differentiation on spheres

def numerical_jacobian(f, p, h: float = 1e-4, frame=None) -> np.ndarray:
    """Geodesic central-difference Jacobian of f at p in a tangent frame.

    Returns shape (..., l, m): column j is d/dt f(exp_p(t e_j)) at t = 0,
    where e_j is column j of ``frame`` (default: :func:`tangent_frame`).
    """
    p = np.asarray(p, dtype=float)
    E = tangent_frame(p) if frame is None else frame
    c, s = math.cos(h), math.sin(h)
    cols = []
    for j in range(E.shape[-1]):
        e = E[..., :, j]
        cols.append((np.asarray(f(c * p + s * e)) - np.asarray(f(c * p - s * e))) / (2 * h))
    return np.stack(cols, -1)
