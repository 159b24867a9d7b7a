"""Explicit map families: bubble maps, Whitehead product maps, the Hopf map.

Every family is returned as a :class:`SphereMap`, an immutable wrapper around
a vectorized evaluator ``p (..., m+1) -> f(p) (..., l)`` plus a JSON-ready
descriptor ``{"family": tag, "params": {...}}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .geometry import (
    as_unit,
    numerical_jacobian,
    random_sphere_points,
    stereographic_inverse,
    tangent_frame,
)


@dataclass(frozen=True)
class SphereMap:
    """A smooth map S^m -> R^l (sphere-valued when ``sphere_valued``)."""
    m: int
    ell: int
    fn: Callable = field(repr=False)
    tag: str = "custom"
    params: dict = field(default_factory=dict)
    sphere_valued: bool = True
    jac: Callable | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, repr=False)

    def __call__(self, p) -> np.ndarray:
        return self.fn(np.asarray(p, dtype=float))

    def jacobian(self, p, h: float = 1e-4, frame=None) -> np.ndarray:
        """Df(p) applied to a tangent frame at p, shape (..., l, m)."""
        p = np.asarray(p, dtype=float)
        E = tangent_frame(p) if frame is None else frame
        if self.jac is not None:
            return self.jac(p) @ E
        return numerical_jacobian(self, p, h, frame=E)

    def descriptor(self) -> dict:
        return {"family": self.tag, "params": dict(self.params)}


@dataclass(frozen=True)
class EuclideanMap:
    """A map R^m -> R^l, constant (equal to ``value_at_infinity``) for |x| > support_radius."""
    m: int
    ell: int
    fn: Callable = field(repr=False)
    support_radius: float | None = None
    value_at_infinity: np.ndarray | None = None
    tag: str = "custom"
    params: dict = field(default_factory=dict)
    sphere_valued: bool = True

    def __call__(self, x) -> np.ndarray:
        return self.fn(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# radial profile

# P' = c (1 - t^4)^2 on [0, 1], P(0) = 0, P(1) = 1.  Theta(r) = pi (1 - P(r/rho)).
_DP = np.array([1.0, 0, 0, 0, -2.0, 0, 0, 0, 1.0])
_P = npoly.polyint(_DP)
PROFILE_C = 1 / npoly.polyval(1.0, _P)     # 45/32
_P = _P * PROFILE_C
_DP = _DP * PROFILE_C


def profile_theta(r, rho):
    """Polar angle of the cap map at distance r from the bubble center."""
    t = np.clip(np.asarray(r, dtype=float) / rho, 0, 1)
    return np.pi * (1 - npoly.polyval(t, _P))


def profile_dtheta(r, rho):
    t = np.asarray(r, dtype=float) / rho
    return np.where(t < 1, -np.pi / rho * npoly.polyval(np.clip(t, 0, 1), _DP), 0.0)


def profile_lipschitz(rho) -> float:
    """sup over r of max(|Theta'(r)|, sin Theta(r) / r) for the flat cap map."""
    r = np.linspace(1e-9, rho, 4001)
    return float(max(np.abs(profile_dtheta(r, rho)).max(), (np.sin(profile_theta(r, rho)) / r).max()))


def _target_frame(b, sign):
    """Frame at the basepoint b whose pushforward makes each cap map of degree ``sign``."""
    G = tangent_frame(b).copy()
    # det[-b, F] = -det[b, F]; flipping one column restores positive orientation at -b
    G[:, 0] *= -sign
    return G


# ---------------------------------------------------------------------------
# bubble maps on S^n

def fibonacci_sphere(n_pts: int) -> np.ndarray:
    i = np.arange(n_pts)
    z = 1 - (2 * i + 1) / n_pts
    phi = i * np.pi * (3 - math.sqrt(5))
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], -1)


def _min_geodesic_distance(a: np.ndarray) -> float:
    if len(a) < 2:
        return math.pi
    G = np.clip(a @ a.T, -1, 1)
    np.fill_diagonal(G, -1)
    return float(np.arccos(G.max()))


@dataclass(frozen=True)
class BubbleParams:
    n: int
    d: int
    centers: np.ndarray
    rho: float
    basepoint: np.ndarray
    sign: int
    packing_constant: float     # rho * |d|^(1/n)


def bubble_params(n: int, d: int, min_separation: float = 1e-3) -> BubbleParams:
    if n not in (1, 2):
        raise ValueError("bubble maps are provided for n in {1, 2}")
    d = int(d)
    b = np.zeros(n + 1)
    b[-1] = 1.0
    k = abs(d)
    if k == 0:
        return BubbleParams(n, 0, np.zeros((0, n + 1)), 0.0, b, 1, 0.0)
    if n == 1:
        t = 2 * np.pi * np.arange(k) / k
        centers = np.stack([np.cos(t), np.sin(t)], -1)
    else:
        centers = fibonacci_sphere(k)
    dmin = _min_geodesic_distance(centers)
    if dmin < min_separation:
        raise ValueError(f"|d| = {k} exceeds the lattice capacity at separation {min_separation}")
    rho = 0.4 * dmin
    return BubbleParams(n, d, centers, rho, b, 1 if d > 0 else -1, rho * k ** (1 / n))


def bubble_map(n: int, d: int, min_separation: float = 1e-3) -> SphereMap:
    """Degree-d map S^n -> S^n, equal to b outside |d| disjoint geodesic balls."""
    bp = bubble_params(n, d, min_separation)
    b = bp.basepoint
    params = {"n": int(n), "d": int(d)}
    meta = {"bubbles": bp}
    if bp.d == 0:
        return SphereMap(n, n + 1, lambda p: np.broadcast_to(b, p.shape[:-1] + (n + 1,)).copy(),
                         "bubble", params, True, meta=meta)
    A = bp.centers
    EA = tangent_frame(A)                       # (k, n+1, n)
    G = _target_frame(b, bp.sign)               # (n+1, n)
    M = np.einsum("ij,kaj->kia", G, EA)          # maps ambient offsets to target tangent
    rho = bp.rho
    lim0 = -profile_dtheta(0.0, rho)

    def fn(p):
        shape = p.shape[:-1]
        q = p.reshape(-1, n + 1)
        out = np.broadcast_to(b, q.shape).copy()
        dots = q @ A.T
        idx = np.argmax(dots, axis=1)
        c = np.clip(dots[np.arange(len(q)), idx], -1, 1)
        r = np.arccos(c)
        inside = r < rho
        if inside.any():
            qi, ii, ri, ci = q[inside], idx[inside], r[inside], c[inside]
            v = qi - ci[:, None] * A[ii]
            th = profile_theta(ri, rho)
            sr = np.sin(ri)
            small = sr < 1e-12
            ratio = np.where(small, lim0, np.sin(th) / np.where(small, 1.0, sr))
            tang = np.einsum("nia,na->ni", M[ii], v)
            out[inside] = np.cos(th)[:, None] * b + ratio[:, None] * tang
        return out.reshape(shape + (n + 1,))

    return SphereMap(n, n + 1, fn, "bubble", params, True, meta=meta)


# ---------------------------------------------------------------------------
# flat bubble clusters in R^{2n} and Whitehead product maps

def ring_layout(k: int, alpha: float, rc: float, dim: int = 2):
    """k equal disks on a ring inside the disk of radius rc about (-alpha, 0, ...).

    The ring starts perpendicular to the +x direction so that the cluster
    stays away from the point (1, 0, ...) of the unit sphere.
    """
    c0 = np.zeros(dim)
    c0[0] = -alpha
    if k == 0:
        return np.zeros((0, dim)), 0.0
    if k == 1:
        return c0[None, :], 0.8 * rc
    s = math.sin(math.pi / k)
    ring = rc / (1 + 0.8 * s)
    ang = np.pi / 2 + 2 * np.pi * np.arange(k) / k
    c = np.tile(c0, (k, 1))
    c[:, 0] += ring * np.cos(ang)
    c[:, 1] += ring * np.sin(ang)
    return c, 0.8 * ring * s


def flat_bubble_map(centers, rho, dim: int, sign: int = 1):
    """g: R^dim -> S^dim, a degree-(sign * #centers) cluster of flat cap maps.

    g equals the north pole a_* outside the union of the disks B_rho(c_i).
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, dim)
    a = np.zeros(dim + 1)
    a[-1] = 1.0
    G = _target_frame(a, sign)
    lim0 = -profile_dtheta(0.0, rho) if rho > 0 else 0.0

    def g(y):
        shape = y.shape[:-1]
        q = y.reshape(-1, dim)
        out = np.broadcast_to(a, (len(q), dim + 1)).copy()
        for c in centers:
            dvec = q - c
            r = np.linalg.norm(dvec, axis=1)
            inside = r < rho
            if not inside.any():
                continue
            ri = r[inside]
            th = profile_theta(ri, rho)
            small = ri < 1e-14
            ratio = np.where(small, lim0, np.sin(th) / np.where(small, 1.0, ri))
            out[inside] = np.cos(th)[:, None] * a + ratio[:, None] * (dvec[inside] @ G.T)
        return out.reshape(shape + (dim + 1,))

    return g


def clifford_rotation(n: int) -> np.ndarray:
    """Q in SO(4n) with Q e_last = -P, P = (e_0 + e_2n)/sqrt(2) a Clifford-torus point.

    With f = f0(Q .), the chart pole (0,...,0,-1) maps to P, where f0 = a_*.
    """
    N = 4 * n
    s = 1 / math.sqrt(2)
    cols = []
    v = np.zeros(N)
    v[0], v[2 * n] = s, -s
    cols.append(v)
    for j in list(range(1, 2 * n)) + list(range(2 * n + 1, N)):
        e = np.zeros(N)
        e[j] = 1.0
        cols.append(e)
    P = np.zeros(N)
    P[0], P[2 * n] = s, s
    cols.append(-P)
    Q = np.stack(cols, -1)
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


def whitehead_layout(k: int, alpha: float = 0.3, rc: float = 0.65):
    return ring_layout(k, alpha, rc)


def whitehead_map(n: int, k: int, k_minus: int | None = None,
                  alpha: float = 0.3, rc: float = 0.65) -> SphereMap:
    """Whitehead product map S^{4n-1} -> S^{2n}.

    Splits x = (x_+, x_-) after the rotation Q and sets
    f(x) = g_+(sqrt2 x_+) where |x_+| < |x_-|, else g_-(sqrt2 x_-),
    with g_+- flat bubble clusters of degree k and k_minus supported in the
    open unit ball.  Hopf invariant 2 k k_minus in absolute value.
    """
    if k < 0 or (k_minus is not None and k_minus < 0):
        raise ValueError("bubble counts must be non-negative")
    if n < 1:
        raise ValueError("n >= 1 required")
    km = k if k_minus is None else int(k_minus)
    dim = 2 * n
    if alpha + rc >= 1:
        raise ValueError("bubble cluster must lie inside the unit ball")
    cp, rp = ring_layout(k, alpha, rc, dim)
    cm, rm = ring_layout(km, alpha, rc, dim)
    gp = flat_bubble_map(cp, rp, dim)
    gm = flat_bubble_map(cm, rm, dim)
    Q = clifford_rotation(n)
    r2 = math.sqrt(2)

    def fn(p):
        q = p @ Q.T
        xp, xm = q[..., :dim], q[..., dim:]
        plus = np.sum(xp * xp, -1) < np.sum(xm * xm, -1)
        return np.where(plus[..., None], gp(r2 * xp), gm(r2 * xm))

    a = np.zeros(dim + 1)
    a[-1] = 1.0
    params = {"n": int(n), "k": int(k), "k_minus": int(km), "alpha": alpha, "rc": rc}
    meta = {"rotation": Q, "basepoint": a, "centers_plus": cp, "rho_plus": rp,
            "centers_minus": cm, "rho_minus": rm, "g_plus": gp, "g_minus": gm,
            "expected_hopf": 2 * k * km,
            "lipschitz_bound": r2 * max(profile_lipschitz(rp) if k else 0.0,
                                        profile_lipschitz(rm) if km else 0.0)}
    return SphereMap(4 * n - 1, 2 * n + 1, fn, "whitehead", params, True, meta=meta)


# ---------------------------------------------------------------------------
# Hopf fibration

def hopf_map(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    z1 = p[..., 0] + 1j * p[..., 1]
    z2 = p[..., 2] + 1j * p[..., 3]
    w = 2 * z1 * np.conj(z2)
    return np.stack([w.real, w.imag, np.abs(z1) ** 2 - np.abs(z2) ** 2], -1)


def _collapse_south(p, delta):
    """Radial reparametrization about the south pole of S^3.

    Geodesic distance r from the south pole goes to R(r), with R = 0 on
    [0, delta], R(r) = r for r >= 2 delta and a quintic smoothstep between.
    Homotopic to the identity, so compositions keep their Hopf invariant.
    """
    south = np.zeros(p.shape[-1])
    south[-1] = -1.0
    c = np.clip(p @ south, -1, 1)
    r = np.arccos(c)
    t = np.clip((r - delta) / delta, 0, 1)
    newr = np.where(r < 2 * delta, 2 * delta * t ** 3 * (10 - 15 * t + 6 * t * t), r)
    v = p - c[..., None] * south
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    nv = np.where(nv < 1e-300, 1.0, nv)
    return np.cos(newr)[..., None] * south + np.sin(newr)[..., None] * v / nv


def hopf_fibration(capped: bool = False, delta: float = 0.64) -> SphereMap:
    """The Hopf map (z1, z2) -> (2 z1 conj(z2), |z1|^2 - |z2|^2).

    With ``capped`` it is precomposed with a collapse of the geodesic ball of
    radius ``delta`` about the south pole, so that f o Upsilon is constant for
    |x| > cot(delta/2).
    """
    params = {"capped": bool(capped)}
    if capped:
        params["delta"] = float(delta)
        return SphereMap(3, 3, lambda p: hopf_map(_collapse_south(p, delta)), "hopf", params, True,
                         meta={"support_radius": 1 / math.tan(delta / 2)})
    return SphereMap(3, 3, hopf_map, "hopf", params, True)


# ---------------------------------------------------------------------------
# simple maps and combinators

def identity_map(m: int) -> SphereMap:
    return SphereMap(m, m + 1, lambda p: p.copy(), "identity", {"m": int(m)}, True,
                     jac=lambda p: np.broadcast_to(np.eye(m + 1), p.shape + (m + 1,)))


def constant_map(m: int, value) -> SphereMap:
    v = np.asarray(value, dtype=float)
    sv = bool(abs(np.linalg.norm(v) - 1) < 1e-12)
    return SphereMap(m, len(v), lambda p: np.broadcast_to(v, p.shape[:-1] + v.shape).copy(),
                     "constant", {"m": int(m), "value": v.tolist()}, sv,
                     jac=lambda p: np.zeros(p.shape[:-1] + (len(v), m + 1)))


def rotate_target(f: SphereMap, R) -> SphereMap:
    """R o f for an orthogonal matrix R."""
    R = np.asarray(R, dtype=float)
    params = dict(f.params)
    params["target_rotation"] = R.tolist()
    return replace(f, fn=lambda p: f.fn(p) @ R.T, params=params, jac=None, tag=f.tag)


def scale_map(f: SphereMap, lam: float) -> SphereMap:
    """Pointwise scaling lam * f; the result is no longer sphere-valued unless lam = 1."""
    if not lam > 0:
        raise ValueError("scale must be positive")
    if lam == 1:
        return f
    params = dict(f.params)
    params["scale"] = float(lam) * params.get("scale", 1.0)
    jac = None if f.jac is None else (lambda p: lam * f.jac(p))
    return replace(f, fn=lambda p: lam * f.fn(p), params=params, sphere_valued=False, jac=jac)


def support_radius(F: Callable, m: int, value, R_max: float = 8.0, N: int = 48,
                   n_shell: int = 4096, tol: float = 1e-12) -> float:
    """Radius outside of which F(x) == value, measured on a grid over [-R_max, R_max]^m.

    Raises if F is not constant on the sphere of radius R_max.
    """
    h = 2 * R_max / N
    xs = -R_max + h * (np.arange(N) + 0.5)
    X = np.stack(np.meshgrid(*([xs] * m), indexing="ij"), -1).reshape(-1, m)
    diff = np.max(np.abs(F(X) - value), axis=-1) > tol
    shell = R_max * random_sphere_points(m - 1, n_shell, 12345)
    if np.any(np.max(np.abs(F(shell) - value), axis=-1) > tol):
        raise ValueError(f"map is not constant outside radius {R_max}")
    if not diff.any():
        return 0.0
    return float(np.linalg.norm(X[diff], axis=1).max() + h * math.sqrt(m))


def compose_with_stereographic(f: SphereMap, R_max: float = 8.0) -> EuclideanMap:
    """x -> f(Upsilon(x)); reports the support radius when f is constant near the pole."""
    m = f.m
    south = np.zeros(m + 1)
    south[-1] = -1.0
    val = f(south)
    F = lambda x: f(stereographic_inverse(x))
    near = as_unit(south + 0.02 * random_sphere_points(m, 256, 7))
    R = None
    if np.max(np.abs(f(near) - val)) < 1e-12:
        R = support_radius(F, m, val, R_max)
    return EuclideanMap(m, f.ell, F, R, val, f.tag, dict(f.params), f.sphere_valued)


# ---------------------------------------------------------------------------
# JSON descriptors

def from_descriptor(desc: dict) -> SphereMap:
    """Rebuild a family member from ``{"family": ..., "params": {...}}``."""
    fam = desc["family"]
    p = dict(desc.get("params", {}))
    scale = p.pop("scale", None)
    if fam == "bubble":
        f = bubble_map(p["n"], p["d"])
    elif fam == "whitehead":
        f = whitehead_map(p.get("n", 1), p["k"], p.get("k_minus"),
                          p.get("alpha", 0.3), p.get("rc", 0.65))
    elif fam == "hopf":
        f = hopf_fibration(p.get("capped", False), p.get("delta", 0.64))
    elif fam == "identity":
        f = identity_map(p["m"])
    elif fam == "constant":
        f = constant_map(p["m"], p["value"])
    else:
        raise ValueError(f"unknown family {fam!r}")
    if "target_rotation" in p:
        f = rotate_target(f, p["target_rotation"])
    if scale is not None:
        f = scale_map(f, scale)
    return f
