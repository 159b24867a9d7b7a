"""Brouwer degree and Hopf invariant, each computed two independent ways.

Orientation: S^m is oriented as the boundary of B^{m+1}.  The chart Upsilon
then has orientation sign (-1)^m against the standard orientation of R^m,
so integrals over R^m are multiplied by that sign.  With this convention
the Hopf map (z1, z2) -> (2 z1 conj(z2), |z1|^2 - |z2|^2) has invariant +1.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.spatial import cKDTree
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import (
    VolumeFormExtension,
    KFormValue,
    as_unit,
    make_quadrature,
    multi_indices,
    pullback,
    sphere_area,
    tangent_frame,
    volume_density,
    wedge,
)
from .mapzoo import EuclideanMap, SphereMap, compose_with_stereographic, profile_dtheta, profile_theta
from .potentials import GridField, codifferential, exterior_derivative, grid_axis, riesz_potential


class InconclusiveError(RuntimeError):
    """Raised when a computation cannot certify an integer invariant."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class NonRegularValueError(InconclusiveError):
    pass


class SupportError(ValueError):
    """The sampled pullback does not vanish near the boundary of the box."""

    def __init__(self, msg, tail):
        super().__init__(msg)
        self.tail = tail


@dataclass
class InvariantResult:
    raw: float
    rounded: int
    method: str
    params: dict = field(default_factory=dict)
    residual: float = 0.0
    inconclusive: bool = False
    family: dict = field(default_factory=dict)

    @classmethod
    def from_raw(cls, raw, method, params=None, family=None, accept=0.5):
        rounded = int(round(raw))
        res = abs(raw - rounded)
        return cls(float(raw), rounded, method, params or {}, float(res), bool(res >= accept), family or {})

    def to_dict(self):
        d = asdict(self)
        return {"family": d["family"], "params": d["params"], "method": d["method"], "raw": d["raw"],
                "rounded": d["rounded"], "residual": d["residual"], "inconclusive": d["inconclusive"]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def chart_sign(m: int) -> int:
    return -1 if m % 2 else 1


_DEFAULT_RES = {1: 4096, 2: 128, 3: 48}


# ---------------------------------------------------------------------------
# Brouwer degree

def brouwer_degree_integral(f: SphereMap, rule=None, h: float = 1e-4) -> InvariantResult:
    """Quadrature of f*omega for the normalized volume form omega of S^n."""
    n = f.m
    if f.ell != n + 1:
        raise ValueError("need a map S^n -> S^n")
    rule = rule or make_quadrature(n, _DEFAULT_RES[n])
    vals = f(rule.nodes)
    J = f.jacobian(rule.nodes, h)
    raw = float(rule.integrate(volume_density(vals, J)))
    return InvariantResult.from_raw(raw, "degree-integral", {"rule": rule.kind, "resolution": rule.resolution,
                                                             "nodes": len(rule)}, f.descriptor())


def _newton_preimages(f, y, x0, iters=40, tol=1e-13):
    """Damped Newton iteration in geodesic coordinates; converged points drop out."""
    x = x0.copy()
    active = np.ones(len(x), bool)
    for it in range(iters):
        if it == 6:
            # candidates from neighbouring nodes have merged by now
            _, keep = np.unique(np.round(x / 1e-6), axis=0, return_index=True)
            x, active = x[keep], active[keep]
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            break
        xa = x[idx]
        E = tangent_frame(xa)
        fx = f(xa)
        G = tangent_frame(fx)
        J = np.swapaxes(G, -1, -2) @ f.jacobian(xa, 1e-6, frame=E)          # (n, m, m)
        r = np.einsum("nji,nj->ni", G, y - fx)
        step = np.linalg.lstsq(J[0], r[0], rcond=None)[0][None] if len(idx) == 1 else None
        if step is None:
            ok = np.abs(np.linalg.det(J)) > 1e-14
            step = np.zeros_like(r)
            step[ok] = np.linalg.solve(J[ok], r[ok][..., None])[..., 0]
        nrm = np.linalg.norm(step, axis=1)
        # damped geodesic step, never longer than 0.2 rad
        step *= np.minimum(1.0, 0.2 / np.maximum(nrm, 1e-300))[:, None]
        v = np.einsum("nij,nj->ni", E, step)
        t = np.linalg.norm(v, axis=1, keepdims=True)
        safe = np.where(t > 0, t, 1.0)
        xa = as_unit(np.cos(t) * xa + np.sin(t) * v / safe)
        x[idx] = xa
        active[idx] = np.linalg.norm(f(xa) - y, axis=1) >= tol
    return x


def brouwer_degree_count(f: SphereMap, y, rule=None, det_tol: float = 1e-6) -> InvariantResult:
    """Signed count of preimages of the regular value y.

    Preimage candidates come from a scan of the quadrature nodes (all nodes
    whose image lies within a Lipschitz-scaled radius of y), are refined by
    damped Newton iteration in geodesic coordinates, and deduplicated.
    """
    n = f.m
    y = as_unit(y)
    rule = rule or make_quadrature(n, _DEFAULT_RES[n])
    X = rule.nodes
    vals = f(X)
    J = f.jacobian(X)
    lip = float(np.linalg.norm(J, ord=2, axis=(-2, -1)).max())
    spacing = 2 * np.pi / rule.resolution
    thr = max(2.5 * lip * spacing, 1e-3)
    cand = np.linalg.norm(vals - y, axis=1) < thr
    params = {"y": y.tolist(), "candidates": int(cand.sum()), "resolution": rule.resolution}
    if not cand.any():
        return InvariantResult(0.0, 0, "degree-count", params, 0.0, False, f.descriptor())
    x = _newton_preimages(f, y, X[cand])
    ok = np.linalg.norm(f(x) - y, axis=1) < 1e-9
    x = x[ok]
    if not len(x):
        return InvariantResult(0.0, 0, "degree-count", params, 0.0, False, f.descriptor())
    # critical preimages first: a value taken on a whole region (the basepoint
    # of a bubble map, say) converges everywhere and would swamp the dedupe
    Jx = f.jacobian(x, 1e-6, frame=tangent_frame(x))
    dets = np.linalg.det(np.concatenate([f(x)[:, :, None], Jx], axis=-1))
    params["min_abs_det"] = float(np.abs(dets).min())
    if np.abs(dets).min() < det_tol:
        res = InvariantResult(float("nan"), 0, "degree-count", params, float("nan"), True, f.descriptor())
        raise NonRegularValueError("value is not regular (near-critical preimage); perturb y", res)
    pairs = cKDTree(x).query_pairs(1e-7, output_type="ndarray")
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(x), len(x)))
    _, label = connected_components(adj, directed=False)
    _, first = np.unique(label, return_index=True)
    dets = dets[first]
    params["preimages"] = len(first)
    total = int(np.sum(np.sign(dets)))
    return InvariantResult(float(total), total, "degree-count", params, 0.0, False, f.descriptor())


def brouwer_degree_count_auto(f: SphereMap, seed: int = 0, tries: int = 8, rule=None,
                              pool: int = 16) -> InvariantResult:
    """Preimage count at a random regular value, retried until regular.

    Values are drawn in batches of ``pool``; the one with the fewest nodes
    mapping near it is tried first (values close to a large constant region
    of f make every node of that region a Newton candidate).
    """
    rng = np.random.default_rng(seed)
    rule = rule or make_quadrature(f.m, _DEFAULT_RES[f.m])
    vals = f(rule.nodes)
    last = None
    for _ in range(tries):
        Y = as_unit(rng.standard_normal((pool, f.m + 1)))
        crowd = [(np.linalg.norm(vals - y, axis=1) < 0.3).sum() for y in Y]
        y = Y[int(np.argmin(crowd))]
        try:
            return brouwer_degree_count(f, y, rule)
        except NonRegularValueError as e:
            last = e
    raise last


# ---------------------------------------------------------------------------
# Whitehead integral on R^{4n-1}

@dataclass
class PullbackSample:
    F: np.ndarray          # (N,)*m + (l,)
    beta: GridField        # (F)*omega, a 2n-form on R^m
    L: float
    N: int
    support_radius: float | None


def _auto_box(Fe: EuclideanMap, L):
    if L is not None:
        return float(L)
    if Fe.support_radius is None:
        raise SupportError("map is not constant near the chart pole; give the box half-width L", float("nan"))
    return 1.15 * max(Fe.support_radius, 0.5)


def sample_pullback(f, L=None, N: int = 96, ext: VolumeFormExtension | None = None,
                    eps: float = 1e-5) -> PullbackSample:
    """Sample F = f o Upsilon and beta = F*omega on the grid (central differences of F)."""
    Fe = f if isinstance(f, EuclideanMap) else compose_with_stereographic(f)
    L = _auto_box(Fe, L)
    m, ell = Fe.m, Fe.ell
    ext = ext or VolumeFormExtension(ell - 1, "bump")
    ax = grid_axis(L, N)
    k = ell - 1
    nK = math.comb(m, k)
    Fv = np.empty((N,) * m + (ell,))
    beta = np.empty((nK,) + (N,) * m)
    # slabs along the first axis keep the memory footprint small
    slab = max(1, 2 ** 21 // N ** (m - 1))
    for a in range(0, N, slab):
        sl = ax[a:a + slab]
        X = np.stack(np.meshgrid(sl, *([ax] * (m - 1)), indexing="ij"), -1)
        Fx = Fe(X)
        Fv[a:a + slab] = Fx
        cols = []
        for j in range(m):
            e = np.zeros(m)
            e[j] = eps
            cols.append((Fe(X + e) - Fe(X - e)) / (2 * eps))
        D = np.stack(cols, -1)
        beta[:, a:a + slab] = np.moveaxis(pullback(D, ext.form(Fx)).coeffs, -1, 0)
    return PullbackSample(Fv, GridField(m, k, L, N, beta), L, N, Fe.support_radius)


def _top_integral(a: GridField, b: GridField) -> float:
    w = wedge(KFormValue(a.m, a.k, np.moveaxis(a.values, 0, -1)),
              KFormValue(b.m, b.k, np.moveaxis(b.values, 0, -1)))
    return float(np.sum(w.coeffs) * a.h ** a.m)


def _check_tail(beta: GridField, tol=1e-8):
    peak = float(np.abs(beta.values).max())
    tail = beta.shell_max()
    if peak > 0 and tail > tol * peak:
        raise SupportError(f"pullback does not vanish near the box boundary (tail {tail:.3e}, peak {peak:.3e})",
                           tail)
    return tail


def whitehead_integral(sample: PullbackSample, theta_offset: float = 0.0, method: str = "spectral") -> float:
    """Raw int_{R^m} eta ^ beta with theta = Newton potential of beta and eta = d* theta."""
    beta = sample.beta
    _check_tail(beta)
    theta = riesz_potential(GridField(beta.m, beta.k, beta.L, beta.N, beta.values, compact=False,
                                      convention="periodic"), 2.0)
    if theta_offset:
        theta = theta.with_values(theta.values + theta_offset)
    eta = codifferential(theta, method)
    return _top_integral(eta, beta)


def hopf_invariant_whitehead(f, L=None, N: int = 96, ext: VolumeFormExtension | None = None,
                             theta_offset: float = 0.0, sample: PullbackSample | None = None) -> InvariantResult:
    """Hopf invariant via the Whitehead integral of the stereographic pullback.

    beta = (f o Upsilon)*omega, theta = Delta^{-1} beta (spectral, periodic
    box), eta = d* theta, H = sign * int eta ^ beta.  The box half-width
    defaults to 1.15 times the measured support radius of f o Upsilon.
    """
    sample = sample or sample_pullback(f, L, N, ext)
    raw = chart_sign(sample.beta.m) * whitehead_integral(sample, theta_offset)
    params = {"L": sample.L, "N": sample.N, "h": sample.beta.h, "support_radius": sample.support_radius,
              "tail": sample.beta.shell_max()}
    fam = f.descriptor() if hasattr(f, "descriptor") else {}
    return InvariantResult.from_raw(raw, "whitehead", params, fam)


def _compact_bump_field(m, L, N, seed, amplitude, n_bumps=3):
    rng = np.random.default_rng(seed)
    X = np.stack(np.meshgrid(*([grid_axis(L, N)] * m), indexing="ij"), -1)
    phi = np.zeros((N,) * m)
    rad = L / 3
    for _ in range(n_bumps):
        c = rng.uniform(-L / 3, L / 3, m)
        a = rng.uniform(-1, 1)
        z2 = np.sum((X - c) ** 2, -1) / rad ** 2
        phi += a * np.clip(1 - z2, 0, None) ** 4
    return amplitude * phi


def whitehead_integrand_check(f, L=None, N: int = 64, amplitude: float = 1.0, seed: int = 0,
                              sample: PullbackSample | None = None) -> float:
    """|int (eta + d phi) ^ beta - int eta ^ beta| for a random compact potential phi.

    Vanishes in the continuum because d beta = 0; on the grid it measures
    the discrete divergence error of the sampled pullback.
    """
    sample = sample or sample_pullback(f, L, N)
    beta = sample.beta
    if amplitude == 0:
        return 0.0
    k = beta.k - 1          # degree of eta
    if k - 1 < 0:
        raise ValueError("need a form of degree >= 1")
    nc = math.comb(beta.m, k - 1)
    phi = _compact_bump_field(beta.m, beta.L, beta.N, seed, amplitude)
    vals = np.stack([phi] * nc) if nc > 1 else phi[None]
    Phi = GridField(beta.m, k - 1, beta.L, beta.N, vals, "periodic")
    dphi = exterior_derivative(Phi, "spectral")
    return abs(_top_integral(dphi, beta))


# ---------------------------------------------------------------------------
# fibers and linking numbers

_KUHN = [tuple(p) for p in itertools.permutations(range(3))]
_CUBE = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)])


def _tets_of_cube():
    tets = []
    for perm in _KUHN:
        v = np.zeros(3, int)
        verts = [v.copy()]
        for ax in perm:
            v[ax] += 1
            verts.append(v.copy())
        tets.append([int(4 * a + 2 * b + c) for a, b, c in verts])
    return np.array(tets)


_TETS = _tets_of_cube()
_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@dataclass
class FiberCurve:
    """Closed polyline (first vertex repeated last) approximating a fiber f^{-1}(p)."""
    vertices: np.ndarray
    value: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def segments(self):
        return self.vertices[:-1], self.vertices[1:]


def _coarse_flags(Fv, p, E):
    """Coarse cubes on which u = F.e1 and v = F.e2 both change sign (with F.p > 0 somewhere)."""
    N = Fv.shape[0]
    u, v, w = Fv @ E[:, 0], Fv @ E[:, 1], Fv @ p

    def corners(a):
        return np.stack([a[i:N - 1 + i, j:N - 1 + j, k:N - 1 + k] for i, j, k in _CUBE], -1)

    cu, cv, cw = corners(u), corners(v), corners(w)
    straddle = ((cu.min(-1) <= 0) & (cu.max(-1) >= 0) & (cv.min(-1) <= 0) & (cv.max(-1) >= 0)
                & (cw.max(-1) > 0))
    return np.argwhere(straddle)


def _segments_in_cubes(Fe, p, E, cubes, r, L, h, N):
    """Marching tetrahedra on u = F.e1, v = F.e2 (restricted to F.p > 0) inside the
    fine cubes of the lattice x = -L + (h/r) j.  Face keys are sorted global
    fine-vertex ids, so neighbouring tetrahedra agree on shared faces."""
    hf = h / r
    S = r * (N - 1) + 1
    stride = np.array([S * S, S, 1], dtype=np.int64)
    gid = (cubes[:, None, :] + _CUBE[None]) @ stride                      # (nc, 8)
    ug, inv = np.unique(gid, return_inverse=True)
    J = np.stack([ug // (S * S), (ug // S) % S, ug % S], -1)
    Fg = Fe(-L + hf * J)
    ua, va, wa = (Fg @ E[:, 0])[inv].reshape(gid.shape), (Fg @ E[:, 1])[inv].reshape(gid.shape), \
        (Fg @ p)[inv].reshape(gid.shape)
    keep = ((ua.min(-1) <= 0) & (ua.max(-1) >= 0) & (va.min(-1) <= 0) & (va.max(-1) >= 0)
            & (wa.max(-1) > 0))
    if not keep.any():
        return [], [], 0
    gid, U, V, W = gid[keep], ua[keep], va[keep], wa[keep]
    pos = -L + hf * (cubes[keep][:, None, :] + _CUBE[None])
    tg, tp = gid[:, _TETS], pos[:, _TETS]
    tu, tv, tw = U[:, _TETS], V[:, _TETS], W[:, _TETS]
    fg = tg[..., _FACES]
    fp = tp[:, :, _FACES]
    fu, fv = tu[..., _FACES], tv[..., _FACES]
    A = np.stack([fu, fv, np.ones_like(fu)], -2)
    rhs = np.zeros(A.shape[:-1])
    rhs[..., 2] = 1.0
    good = np.abs(np.linalg.det(A)) > 1e-300
    lam = np.zeros(A.shape[:-1])
    lam[good] = np.linalg.solve(A[good], rhs[good][..., None])[..., 0]
    # the mask on F.p is applied at the crossing itself so that neighbouring
    # tetrahedra agree on every shared face
    hit = good & np.all(lam >= 0, -1) & (np.sum(lam * tw[..., _FACES], -1) > 0)
    nhit = hit.sum(-1)
    bad = int(np.sum((nhit != 0) & (nhit != 2)))
    sel = nhit == 2
    if not sel.any():
        return [], [], bad
    P0 = tp[sel][:, 0]
    M = tp[sel][:, 1:] - P0[:, None]
    gu = np.linalg.solve(M, (tu[sel][:, 1:] - tu[sel][:, :1])[..., None])[..., 0]
    gv = np.linalg.solve(M, (tv[sel][:, 1:] - tv[sel][:, :1])[..., None])[..., 0]
    tang = np.cross(gu, gv)
    hs, ls, fgs, fps = hit[sel], lam[sel], fg[sel], fp[sel]
    segs, keys = [], []
    for t in range(len(hs)):
        fi = np.nonzero(hs[t])[0]
        pts = [ls[t, f] @ fps[t, f] for f in fi]
        ks = [tuple(sorted(int(g) for g in fgs[t, f])) for f in fi]
        if np.dot(pts[1] - pts[0], tang[t]) < 0:
            pts, ks = pts[::-1], ks[::-1]
        segs.append(pts)
        keys.append(ks)
    return segs, keys, bad


def _chain(segs, keys):
    """Join oriented segments into closed loops.  Returns (loops, dangling face keys)."""
    start = {}
    ends = set()
    for i, (a, b) in enumerate(keys):
        if a in start:
            return None, [a]
        start[a] = i
        ends.add(b)
    dangling = [b for b in ends if b not in start] + [a for a in start if a not in ends]
    if dangling:
        return None, dangling
    used = np.zeros(len(segs), bool)
    loops = []
    for i0 in range(len(segs)):
        if used[i0]:
            continue
        loop = [segs[i0][0]]
        i = i0
        while True:
            used[i] = True
            loop.append(segs[i][1])
            nxt = start[keys[i][1]]
            if nxt == i0:
                break
            if used[nxt]:
                return None, []
            i = nxt
        loops.append(np.array(loop))
    return loops, []


def _project_to_fiber(Fe, p, x, iters=6, eps=1e-6):
    E = tangent_frame(p)
    B = E[:, :2]
    for _ in range(iters):
        r = Fe(x) @ B
        cols = []
        for j in range(3):
            e = np.zeros(3)
            e[j] = eps
            cols.append((Fe(x + e) - Fe(x - e)) @ B / (2 * eps))
        J = np.stack(cols, -1)                                  # (n, 2, 3)
        JJt = J @ np.swapaxes(J, -1, -2)
        step = np.swapaxes(J, -1, -2) @ np.linalg.solve(JJt, r[..., None])
        x = x - step[..., 0]
    resid = np.linalg.norm(Fe(x) - p, axis=-1)
    return x, resid


def _local_lipschitz(Fe, pts, eps=1e-5):
    out = np.zeros(len(pts))
    for j in range(3):
        e = np.zeros(3)
        e[j] = eps
        out = np.maximum(out, np.linalg.norm(Fe(pts + e) - Fe(pts - e), axis=-1) / (2 * eps))
    return out


def _cubes_across(key, S):
    """Fine cubes sharing the lattice face with sorted vertex ids `key`."""
    J = np.array([[g // (S * S), (g // S) % S, g % S] for g in key])
    lo = J.min(0)
    flat = [ax for ax in range(3) if J[0, ax] == J[1, ax] == J[2, ax]]
    if not flat:
        return [lo]
    out = []
    for ax in flat:
        for d in (-1, 0):
            c = lo.copy()
            c[ax] += d
            out.append(c)
    return out


def extract_fibers(Fe: EuclideanMap, p, Fv, L, N, refine: bool = True, max_spacing: float | None = None,
                   factor: int | None = None, max_steps: int = 20000, chunk: int = 300_000):
    """Fibers (F)^{-1}(p) as closed oriented polylines (orientation along grad u x grad v).

    Marching tetrahedra run on a fine lattice x = -L + (h/factor) j that is
    only evaluated where needed: the fine cubes inside coarse cubes with a
    sign change of u and v seed the curves, and every open chain end pulls
    in the fine cube across its exit face until all chains close.  The
    factor is chosen from the local Lipschitz constant so that F turns by
    at most about 0.6 rad across a fine cube.
    """
    p = as_unit(p)
    E = tangent_frame(p)
    h = 2 * L / N
    C = _coarse_flags(Fv, p, E)
    if len(C) == 0:
        return []
    if factor is None:
        lip = _local_lipschitz(Fe, -L + h * (C + 0.5)).max()
        factor = int(np.clip(np.ceil(lip * h * np.sqrt(3) / 0.6), 1, 16))
    r = factor
    while True:
        S = r * (N - 1) + 1
        stride = np.array([S * S, S, 1], dtype=np.int64)
        offs = np.stack(np.meshgrid(*([np.arange(r)] * 3), indexing="ij"), -1).reshape(-1, 3)
        per = max(1, chunk // r ** 3)
        segs, keys, bad = [], [], 0
        done = set()
        for s in range(0, len(C), per):
            fine = (C[s:s + per, None, :] * r + offs[None]).reshape(-1, 3)
            done.update((fine @ stride).tolist())
            sg, ks, b = _segments_in_cubes(Fe, p, E, fine, r, L, h, N)
            segs += sg
            keys += ks
            bad += b
        steps = 0
        loops = None
        while not bad:
            loops, dangling = _chain(segs, keys)
            if loops is not None or not dangling:
                break
            new = {}
            for key in dangling:
                for c in _cubes_across(key, S):
                    if np.all(c >= 0) and np.all(c < S - 1):
                        g = int(c @ stride)
                        if g not in done:
                            new[g] = c
            if not new or steps > max_steps:
                break
            steps += 1
            done.update(new)
            sg, ks, b = _segments_in_cubes(Fe, p, E, np.array(list(new.values())), r, L, h, N)
            segs += sg
            keys += ks
            bad += b
        if bad and r < 16:
            r = min(16, 2 * r)
            continue
        if bad:
            raise InconclusiveError(f"{bad} degenerate tetrahedra while extracting the fiber over {p}")
        if not segs:
            return []
        if loops is None:
            raise InconclusiveError(f"open or branching fiber over {p}; value not regular or grid too coarse")
        break
    max_spacing = max_spacing or 0.5 * h
    curves = []
    for lp in loops:
        verts = lp[:-1]
        if refine:
            # resample to roughly max_spacing / 2 along the arc before projecting
            arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(lp, axis=0), axis=1))])
            n_keep = int(max(8, min(len(verts), np.ceil(2 * arc[-1] / max_spacing))))
            idx = np.unique(np.searchsorted(arc[:-1], np.linspace(0, arc[-1], n_keep, endpoint=False)))
            verts = verts[np.clip(idx, 0, len(verts) - 1)]
            verts, _ = _project_to_fiber(Fe, p, verts)
            for _ in range(4):
                nxt = np.roll(verts, -1, axis=0)
                long_ = np.linalg.norm(nxt - verts, axis=1) > max_spacing
                if not long_.any():
                    break
                mids, _ = _project_to_fiber(Fe, p, 0.5 * (verts[long_] + nxt[long_]))
                out = []
                j = 0
                for i in range(len(verts)):
                    out.append(verts[i])
                    if long_[i]:
                        out.append(mids[j])
                        j += 1
                verts = np.array(out)
        resid = np.linalg.norm(Fe(verts) - p, axis=-1)
        curves.append(FiberCurve(np.vstack([verts, verts[:1]]), p,
                                 {"n_vertices": len(verts), "max_residual": float(resid.max(initial=0.0)),
                                  "grid_h": h, "refinement": r}))
    return curves


def linking_number(A, B, chunk: int = 400) -> float:
    """Exact linking number of two closed polygons (Klenin-Langowski solid angles).

    A and B are lists of closed polylines (first vertex == last vertex).
    """
    A = [np.asarray(a) for a in (A if isinstance(A, (list, tuple)) else [A])]
    B = [np.asarray(b) for b in (B if isinstance(B, (list, tuple)) else [B])]
    a0 = np.concatenate([a[:-1] for a in A])
    a1 = np.concatenate([a[1:] for a in A])
    b0 = np.concatenate([b[:-1] for b in B])
    b1 = np.concatenate([b[1:] for b in B])
    total = 0.0
    for s in range(0, len(a0), chunk):
        p1, p2 = a0[s:s + chunk, None, :], a1[s:s + chunk, None, :]
        p3, p4 = b0[None], b1[None]
        r13, r14, r23, r24 = p3 - p1, p4 - p1, p3 - p2, p4 - p2

        def nrm(x, y):
            c = np.cross(x, y)
            n = np.linalg.norm(c, axis=-1, keepdims=True)
            return c / np.where(n > 0, n, 1.0)

        n1, n2, n3, n4 = nrm(r13, r14), nrm(r14, r24), nrm(r24, r23), nrm(r23, r13)

        def asin_dot(x, y):
            return np.arcsin(np.clip(np.sum(x * y, -1), -1, 1))

        om = asin_dot(n1, n2) + asin_dot(n2, n3) + asin_dot(n3, n4) + asin_dot(n4, n1)
        sgn = np.sign(np.sum(np.cross(p4 - p3, p2 - p1) * r13, -1))
        total += float(np.sum(om * sgn))
    return total / (4 * np.pi)


def _min_curve_distance(A, B):
    va = np.concatenate([c.vertices for c in A])
    vb = np.concatenate([c.vertices for c in B])
    d, _ = cKDTree(vb).query(va)
    return float(d.min())


def default_regular_values(f):
    """Two generic target points away from f at the chart pole."""
    south = np.zeros(f.m + 1)
    south[-1] = -1.0
    a = f(south)
    a = a / np.linalg.norm(a)
    E = tangent_frame(a)
    p = as_unit(0.15 * a + np.cos(0.1) * E[:, 0] + np.sin(0.1) * E[:, 1])
    q = as_unit(-0.05 * a - np.cos(0.13) * E[:, 0] + np.sin(0.13) * E[:, 1])
    return p, q


def hopf_invariant_linking(f, p=None, q=None, L=None, N: int = 96, sample_F=None,
                           min_separation_cells: float = 0.5) -> InvariantResult:
    """Hopf invariant as the linking number of two regular fibers of f o Upsilon."""
    Fe = f if isinstance(f, EuclideanMap) else compose_with_stereographic(f)
    if Fe.m != 3:
        raise ValueError("linking oracle implemented for maps S^3 -> S^2")
    L = _auto_box(Fe, L)
    if p is None or q is None:
        p0, q0 = default_regular_values(f)
        p = p0 if p is None else p
        q = q0 if q is None else q
    p, q = as_unit(p), as_unit(q)
    if Fe.value_at_infinity is not None:
        ainf = as_unit(Fe.value_at_infinity)
        if min(np.linalg.norm(p - ainf), np.linalg.norm(q - ainf)) < 1e-3:
            raise ValueError("regular values must differ from the value at the chart pole")
    if sample_F is None:
        ax = grid_axis(L, N)
        X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1)
        sample_F = Fe(X)
    h = 2 * L / N
    A = extract_fibers(Fe, p, sample_F, L, N)
    B = extract_fibers(Fe, q, sample_F, L, N)
    params = {"L": L, "N": N, "p": p.tolist(), "q": q.tolist(), "components": [len(A), len(B)]}
    fam = f.descriptor() if hasattr(f, "descriptor") else {}
    if not A or not B:
        raw = 0.0
        return InvariantResult.from_raw(raw, "linking", params, fam)
    dmin = _min_curve_distance(A, B)
    params["min_distance_cells"] = dmin / h
    params["max_residual"] = max(c.meta["max_residual"] for c in A + B)
    if dmin < min_separation_cells * h:
        raise InconclusiveError(f"fibers over p and q come within {dmin / h:.2f} cells")
    raw = chart_sign(3) * linking_number([c.vertices for c in A], [c.vertices for c in B])
    return InvariantResult.from_raw(raw, "linking", params, fam)


# ---------------------------------------------------------------------------
# cross terms of a Whitehead product map

def _flat_primitive(centers, rho, Y):
    """eta with d eta = g*omega for a flat bubble cluster: sum_c A(r) dphi_c."""
    out = np.zeros(Y.shape)
    for c in centers:
        D = Y - c
        r = np.linalg.norm(D, axis=-1)
        A = (1 + np.cos(profile_theta(r, rho))) / (4 * np.pi)
        r2 = np.where(r > 1e-14, r * r, 1.0)
        coef = np.where(r > 1e-14, A / r2, (np.pi * 45 / 32 / rho) ** 2 / (8 * np.pi))
        out[..., 0] += -coef * D[..., 1]
        out[..., 1] += coef * D[..., 0]
    return out


def _flat_density(centers, rho, Y):
    """g*omega = density(y) dy1 ^ dy2 for a flat bubble cluster."""
    out = np.zeros(Y.shape[:-1])
    for c in centers:
        r = np.linalg.norm(Y - c, axis=-1)
        inside = r < rho
        th = profile_theta(r, rho)
        dth = profile_dtheta(r, rho)
        rr = np.where(r > 1e-14, r, 1.0)
        dens = np.where(r > 1e-14, np.sin(th) * -dth / rr, (np.pi * 45 / 32 / rho) ** 2)
        out += np.where(inside, dens / (4 * np.pi), 0.0)
    return out


def whitehead_cross_terms(f: SphereMap, resolution: int = 64):
    """The two cross terms int P_+*eta ^ d P_-*eta and int P_-*eta ^ d P_+*eta on S^3.

    Computed in the rotated coordinates q = Q p (Q in SO(4)), with the
    closed-form primitives of the flat bubble clusters.  Returns the pair in
    the orientation convention of :func:`hopf_invariant_whitehead`.
    """
    meta = f.meta
    if f.tag != "whitehead" or f.m != 3:
        raise ValueError("cross terms are defined for Whitehead maps S^3 -> S^2")
    rule = make_quadrature(3, resolution)
    q = rule.nodes
    E = tangent_frame(q)                       # (n, 4, 3)
    r2 = math.sqrt(2)
    out = []
    for (i_eta, c_eta, rho_eta), (i_b, c_b, rho_b) in (
            ((slice(0, 2), meta["centers_plus"], meta["rho_plus"]), (slice(2, 4), meta["centers_minus"], meta["rho_minus"])),
            ((slice(2, 4), meta["centers_minus"], meta["rho_minus"]), (slice(0, 2), meta["centers_plus"], meta["rho_plus"]))):
        ye = r2 * q[:, i_eta]
        yb = r2 * q[:, i_b]
        eta = _flat_primitive(c_eta, rho_eta, ye)                 # (n, 2)
        dens = _flat_density(c_b, rho_b, yb)                      # (n,)
        Ve = r2 * E[:, i_eta, :]                                  # (n, 2, 3)
        Vb = r2 * E[:, i_b, :]
        a = np.einsum("ni,nij->nj", eta, Ve)                      # alpha(E_j)
        def b(j, k):
            return dens * (Vb[:, 0, j] * Vb[:, 1, k] - Vb[:, 1, j] * Vb[:, 0, k])
        vol = a[:, 0] * b(1, 2) - a[:, 1] * b(0, 2) + a[:, 2] * b(0, 1)
        out.append(float(rule.integrate(vol)))
    return tuple(out)
