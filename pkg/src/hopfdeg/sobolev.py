"""Fractional Sobolev (Gagliardo) seminorms, Lipschitz norms, interpolation ratios.

[f]_{W^{s,p}}^p = int int |f(x) - f(y)|^p / |x - y|^{m + s p} dx dy

on S^m (chordal distance by default) or on R^m.  Two estimators:

* full pair sum over a quadrature rule, with a near-diagonal correction for
  the excluded cells (zeta-function correction on uniform circle rules, a
  local ball model elsewhere);
* Monte Carlo over (x, direction, radius) with a radial importance density
  that makes the estimator's variance finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import zeta

from .geometry import QuadratureRule, ball_volume, sphere_area, tangent_frame

_CHUNK = 256


@dataclass(frozen=True)
class SeminormSpec:
    s: float
    p: float
    domain: str = "sphere"        # "sphere" | "euclidean"
    m: int = 1
    metric: str = "chordal"       # "chordal" | "geodesic" (sphere only)

    def __post_init__(self):
        if not 0 < self.s <= 1:
            raise ValueError("s must lie in (0, 1]")
        if not self.p > 1 and not (self.p == 1 and self.s < 1):
            raise ValueError("p must exceed 1")
        if self.domain not in ("sphere", "euclidean"):
            raise ValueError("domain must be 'sphere' or 'euclidean'")
        if self.metric not in ("chordal", "geodesic"):
            raise ValueError("metric must be 'chordal' or 'geodesic'")

    @property
    def critical(self) -> bool:
        """p s = m, the scale-invariant pairing."""
        return abs(self.p * self.s - self.m) < 1e-12

    def require_critical(self):
        if not self.critical:
            raise ValueError(f"p*s = {self.p * self.s} differs from m = {self.m}")
        return self


@dataclass(frozen=True)
class SeminormEstimate:
    value: float
    method: str
    samples: int
    stderr: float = 0.0
    pth_power: float = 0.0
    pth_stderr: float = 0.0

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# full pair sum

def _direction_average(A, p, m, n_dir=None):
    """int over S^{m-1} of |A theta|^p, A of shape (..., l, m)."""
    if m == 1:
        return 2 * np.sum(A[..., 0] ** 2, -1) ** (p / 2)
    if m == 2:
        n_dir = n_dir or 64
        t = 2 * np.pi * (np.arange(n_dir) + 0.5) / n_dir
        th = np.stack([np.cos(t), np.sin(t)], -1)
    else:
        n_dir = n_dir or 200
        i = np.arange(n_dir)
        z = 1 - (2 * i + 1) / n_dir
        ph = i * np.pi * (3 - math.sqrt(5))
        r = np.sqrt(1 - z * z)
        th = np.stack([r * np.cos(ph), r * np.sin(ph), z], -1)
    v = np.einsum("...lm,dm->...dl", A, th)
    return np.mean(np.linalg.norm(v, axis=-1) ** p, axis=-1) * sphere_area(m - 1)


def fractional_seminorm(f, spec: SeminormSpec, rule: QuadratureRule, correction: bool = True,
                        h_jac: float = 1e-4) -> SeminormEstimate:
    """Deterministic symmetric pair sum over the nodes of ``rule``.

    Pairs closer than half the mesh size are dropped.  With ``correction``
    the dropped near-diagonal mass is restored to leading order from Df:
    on uniform circle rules by the zeta-function correction
    -2 zeta(-alpha) h^(alpha+1) |f'|^p (alpha = p - 1 - s p), elsewhere by
    integrating |Df v|^p |v|^(-m-sp) over a ball of the node's cell volume.
    Nodes are put in lexicographic order first, so the result does not
    depend on the order of the rule's node list.
    """
    if spec.domain != "sphere" or spec.m != rule.m:
        raise ValueError("seminorm spec and quadrature rule disagree on the domain")
    if spec.s >= 1:
        raise ValueError("use gradient_energy for s = 1")
    m, p, s = rule.m, spec.p, spec.s
    order = np.lexsort(rule.nodes.T[::-1])
    X = rule.nodes[order]
    W = rule.weights[order]
    F = np.asarray(f(X), dtype=float)
    F = F.reshape(len(X), -1)
    cut = rule.mesh_size / 2
    expo = (m + s * p) / 2 if spec.metric == "chordal" else (m + s * p)
    total = 0.0
    for a in range(0, len(X), _CHUNK):
        xa, fa, wa = X[a:a + _CHUNK], F[a:a + _CHUNK], W[a:a + _CHUNK]
        if spec.metric == "chordal":
            d2 = np.sum((xa[:, None, :] - X[None, :, :]) ** 2, -1)
            keep = d2 >= cut * cut
            kern = np.where(keep, np.where(keep, d2, 1.0) ** (-expo), 0.0)
        else:
            d = np.arccos(np.clip(xa @ X.T, -1, 1))
            keep = d >= cut
            kern = np.where(keep, np.where(keep, d, 1.0) ** (-expo), 0.0)
        df = np.sum((fa[:, None, :] - F[None, :, :]) ** 2, -1) ** (p / 2)
        total += float(np.sum(wa * np.sum(df * kern * W, axis=1)))
    corr = 0.0
    if correction and np.ptp(F, axis=0).max() > 0:
        J = f.jacobian(X, h_jac) if hasattr(f, "jacobian") else None
        if J is None:
            from .geometry import numerical_jacobian
            J = numerical_jacobian(f, X, h_jac)
        J = J.reshape(len(X), -1, m)
        if rule.kind == "circle-uniform":
            alpha = p - 1 - s * p
            h = 2 * np.pi / len(X)
            g = np.sum(J[:, :, 0] ** 2, -1) ** (p / 2)
            corr = float(np.sum(W * g) * (-2 * zeta(-alpha)) * h ** (alpha + 1))
        else:
            gam = p * (1 - s)
            eps = (W / ball_volume(m)) ** (1 / m)
            corr = float(np.sum(W * eps ** gam / gam * _direction_average(J, p, m)))
    pth = max(total + corr, 0.0)
    return SeminormEstimate(pth ** (1 / p), "full-pair-sum", len(X), 0.0, pth, 0.0)


# ---------------------------------------------------------------------------
# Monte Carlo

class _RadialProposal:
    """Density on (0, r_max) proportional to r^(gam-1) below r_c, 1/r up to r_far,
    and r^(-1-beta) beyond r_far (when r_max is infinite)."""

    def __init__(self, gam, r_c, r_far, beta=None, r_max=np.inf):
        self.g, self.rc, self.rf, self.b = gam, r_c, min(r_far, r_max), beta
        self.tail = np.isinf(r_max)
        a1 = r_c ** gam / gam
        a2 = r_c ** gam * math.log(self.rf / r_c)
        a3 = r_c ** gam / beta if self.tail else 0.0
        z = a1 + a2 + a3
        self.cum = np.array([a1, a1 + a2]) / z
        self.z = z

    def sample(self, rng, n):
        u = rng.random(n)
        v = rng.random(n)
        r = np.where(u < self.cum[0], self.rc * v ** (1 / self.g),
                     self.rc * (self.rf / self.rc) ** v)
        if self.tail:
            r = np.where(u >= self.cum[1], self.rf * (1 - v) ** (-1 / self.b), r)
        return r

    def pdf(self, r):
        rc = self.rc
        q = np.where(r < rc, r ** (self.g - 1), rc ** self.g / r)
        if self.tail:
            q = np.where(r >= self.rf, rc ** self.g / self.rf * (self.rf / r) ** (1 + self.b), q)
        return q / self.z


def _unit_tangent(rng, x):
    g = rng.standard_normal(x.shape)
    g -= np.sum(g * x, -1, keepdims=True) * x
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def fractional_seminorm_mc(f, spec: SeminormSpec, seed: int = 0, n_samples: int = 100000, *,
                           period: float | None = None, box=None, support_radius: float | None = None,
                           value_at_infinity=None, r_c: float | None = None,
                           chunk: int = 50000) -> SeminormEstimate:
    """Unbiased Monte Carlo estimate of [f]^p with its standard error.

    Sphere domain: x uniform on S^m, y = exp_x(r theta).  Euclidean domain:
    either a periodic f (x uniform in the fundamental ``box``, y anywhere) or
    an f constant outside the ball of radius ``support_radius`` (x uniform
    in that ball, pairs with y outside counted twice by symmetry).
    """
    if n_samples < 10000:
        raise ValueError("at least 1e4 samples required")
    rng = np.random.default_rng(seed)
    m, p, s = spec.m, spec.p, spec.s
    gam = p * (1 - s) if s < 1 else p
    if spec.domain == "sphere":
        prop = _RadialProposal(gam, r_c or 0.02 * math.pi, math.pi, r_max=math.pi)
        scale = sphere_area(m) * sphere_area(m - 1)
    else:
        if period is not None:
            lo, hi = box if box is not None else (0.0, period)
            vol = (hi - lo) ** m
            rf = period
        elif support_radius is not None:
            R = float(support_radius)
            vol = ball_volume(m) * R ** m
            rf = 2 * R
        else:
            raise ValueError("euclidean domain needs a period or a support radius")
        prop = _RadialProposal(gam, r_c or 0.02 * rf, rf, beta=s * p)
        scale = vol * sphere_area(m - 1)
    acc = []
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        if spec.domain == "sphere":
            x = rng.standard_normal((n, m + 1))
            x /= np.linalg.norm(x, axis=1, keepdims=True)
            th = _unit_tangent(rng, x)
            r = prop.sample(rng, n)
            y = np.cos(r)[:, None] * x + np.sin(r)[:, None] * th
            dist = 2 * np.sin(r / 2) if spec.metric == "chordal" else r
            jac = np.sin(r) ** (m - 1)
            extra = 1.0
        else:
            if period is not None:
                x = lo + (hi - lo) * rng.random((n, m))
            else:
                g = rng.standard_normal((n, m))
                g /= np.linalg.norm(g, axis=1, keepdims=True)
                x = g * (R * rng.random(n) ** (1 / m))[:, None]
            th = rng.standard_normal((n, m))
            th /= np.linalg.norm(th, axis=1, keepdims=True)
            r = prop.sample(rng, n)
            y = x + r[:, None] * th
            dist = r
            jac = r ** (m - 1)
            extra = 1.0 if period is not None else 1.0 + (np.linalg.norm(y, axis=1) > R)
        fx = np.asarray(f(x), dtype=float).reshape(n, -1)
        fy = np.asarray(f(y), dtype=float).reshape(n, -1)
        diff = np.sum((fx - fy) ** 2, -1) ** (p / 2)
        z = scale * diff * dist ** (-(m + s * p)) * jac / prop.pdf(r) * extra
        acc.append(z)
        done += n
    z = np.concatenate(acc)
    mean = float(np.mean(z))
    se = float(np.std(z, ddof=1) / math.sqrt(len(z)))
    val = mean ** (1 / p) if mean > 0 else 0.0
    vse = (1 / p) * mean ** (1 / p - 1) * se if mean > 0 else 0.0
    return SeminormEstimate(val, "monte-carlo", len(z), vse, mean, se)


# ---------------------------------------------------------------------------
# norms

def _jacobians(f, rule: QuadratureRule, h: float = 1e-4):
    return np.asarray(f.jacobian(rule.nodes, h), dtype=float)


def lipschitz_norm(f, rule: QuadratureRule, h: float = 1e-4) -> float:
    """max over nodes of the operator norm of Df."""
    J = _jacobians(f, rule, h)
    return float(np.linalg.norm(J, ord=2, axis=(-2, -1)).max())


def gradient_energy(f, p: float, rule: QuadratureRule, h: float = 1e-4) -> float:
    """int |Df|^p with the Hilbert-Schmidt norm; the s = 1 seminorm to the p-th power."""
    J = _jacobians(f, rule, h)
    g = np.sum(J * J, axis=(-2, -1)) ** (p / 2)
    return float(rule.integrate(g))


def gagliardo_nirenberg_ratio(f, s: float, rule: QuadratureRule, h: float = 1e-4) -> float | None:
    """[f]_{W^{s,n/s}}^{n/s} / (||f||_inf^{n(1/s - 1)} int |Df|^n).

    The interpolation inequality bounds this ratio above.  Returns None when
    f is constant (the denominator vanishes).
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    n = rule.m
    energy = gradient_energy(f, n, rule, h)
    if energy <= 1e-300:
        return None
    sup = float(np.linalg.norm(np.asarray(f(rule.nodes)), axis=-1).max())
    est = fractional_seminorm(f, SeminormSpec(s, n / s, "sphere", n), rule)
    return est.pth_power / (sup ** (n * (1 / s - 1)) * energy)
