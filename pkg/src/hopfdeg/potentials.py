"""Uniform-grid k-form fields, discrete exterior calculus and spectral potentials.

Grid nodes are x_i = -L + h i, i = 0..N-1, h = 2L/N, on every axis.  A k-form
field on R^m stores its C(m, k) coefficient arrays stacked on axis 0, in
increasing multi-index order.

Conventions (Euclidean, standard orientation):
  (dF)_J   = sum_a (-1)^a d_{j_a} F_{J minus j_a}
  (d*F)_I  = -sum_j sign(j, I) d_j F_{{j} u I}      (d* = -div on 1-forms)
  Hodge Laplacian dd* + d*d = -sum_j d_j^2 on every coefficient.
  riesz_potential(F, a) has Fourier multiplier |xi|^(-a); a = 2 is the
  Newton potential (Hodge Laplacian)^(-1).
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gamma

from .geometry import multi_indices, pullback

_MAGIC = b"HDGF"
_CONVENTIONS = ("periodic", "zero-padded")


@dataclass(frozen=True)
class GridField:
    m: int
    k: int
    L: float
    N: int
    values: np.ndarray = field(repr=False)
    convention: str = "zero-padded"
    compact: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        shape = (math.comb(self.m, self.k),) + (self.N,) * self.m
        if v.shape != shape:
            if v.size == math.prod(shape):
                v = v.reshape(shape)
            else:
                raise ValueError(f"values shape {v.shape} inconsistent with (m,k,N) -> {shape}")
        if self.convention not in _CONVENTIONS:
            raise ValueError(f"convention must be one of {_CONVENTIONS}")
        object.__setattr__(self, "values", v)
        if self.compact and self.shell_max() > 1e-12 * max(1.0, np.abs(v).max()):
            raise ValueError("field tagged compact does not vanish on the outer 2-cell shell")

    @property
    def h(self) -> float:
        return 2 * self.L / self.N

    def shell_max(self, width: int = 2) -> float:
        v = np.abs(self.values)
        inner = (slice(None),) + (slice(width, self.N - width),) * self.m
        masked = v.copy()
        masked[inner] = 0
        return float(masked.max()) if masked.size else 0.0

    def coords(self):
        return grid_coords(self.m, self.L, self.N)

    def integral(self) -> np.ndarray:
        return self.values.reshape(len(self.values), -1).sum(1) * self.h ** self.m

    def with_values(self, values, k=None) -> "GridField":
        return replace(self, values=values, k=self.k if k is None else k, compact=False)

    # serialization: header then little-endian float64, C order
    def to_bytes(self) -> bytes:
        head = _MAGIC + struct.pack("<iiid", self.m, self.k, self.N, self.L)
        conv = self.convention.encode()
        head += struct.pack("<i", len(conv)) + conv
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "GridField":
        if buf[:4] != _MAGIC:
            raise ValueError("not a grid-field file")
        m, k, N, L = struct.unpack_from("<iiid", buf, 4)
        off = 4 + struct.calcsize("<iiid")
        (nc,) = struct.unpack_from("<i", buf, off)
        off += 4
        conv = buf[off:off + nc].decode()
        off += nc
        vals = np.frombuffer(buf, dtype="<f8", offset=off).astype(float)
        return cls(m, k, L, N, vals, conv)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "GridField":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def grid_axis(L: float, N: int) -> np.ndarray:
    return -L + (2 * L / N) * np.arange(N)


def grid_coords(m: int, L: float, N: int) -> np.ndarray:
    """Node coordinates, shape (N,)*m + (m,)."""
    ax = grid_axis(L, N)
    return np.stack(np.meshgrid(*([ax] * m), indexing="ij"), -1)


def sample_form(fn, m: int, k: int, L: float, N: int, convention="zero-padded", compact=False) -> GridField:
    """Sample ``fn(X) -> (..., C(m,k))`` at the grid nodes."""
    X = grid_coords(m, L, N)
    vals = np.moveaxis(np.asarray(fn(X), dtype=float), -1, 0)
    return GridField(m, k, L, N, vals, convention, compact)


# ---------------------------------------------------------------------------
# partial derivatives

def _wavenumbers(N: int, h: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(N, d=h)


def partial(a: np.ndarray, axis: int, h: float, method: str = "centered", periodic: bool = True) -> np.ndarray:
    """d/dx_axis of a scalar array sampled on the grid."""
    if method == "centered":
        if periodic:
            return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2 * h)
        pad = [(0, 0)] * a.ndim
        pad[axis] = (1, 1)
        b = np.pad(a, pad)
        sl_hi = [slice(None)] * a.ndim
        sl_lo = [slice(None)] * a.ndim
        sl_hi[axis] = slice(2, None)
        sl_lo[axis] = slice(None, -2)
        return (b[tuple(sl_hi)] - b[tuple(sl_lo)]) / (2 * h)
    if method == "spectral":
        N = a.shape[axis]
        kx = _wavenumbers(N, h)
        if N % 2 == 0:
            kx[N // 2] = 0.0
        shape = [1] * a.ndim
        shape[axis] = N
        return np.real(np.fft.ifft(1j * kx.reshape(shape) * np.fft.fft(a, axis=axis), axis=axis))
    raise ValueError(f"unknown derivative method {method!r}")


def _sign_insert(j: int, I: tuple) -> int:
    """Sign of the permutation sorting (j, I)."""
    return -1 if sum(1 for i in I if i < j) % 2 else 1


def exterior_derivative(F: GridField, method: str = "centered") -> GridField:
    m, k = F.m, F.k
    if k >= m:
        raise ValueError("exterior derivative of a top-degree form")
    per = F.convention == "periodic" or method == "spectral"
    idx_k = {I: n for n, I in enumerate(multi_indices(m, k))}
    out = []
    cache = {}
    for J in multi_indices(m, k + 1):
        acc = np.zeros(F.values.shape[1:])
        for a, j in enumerate(J):
            rest = J[:a] + J[a + 1:]
            key = (j, idx_k[rest])
            if key not in cache:
                cache[key] = partial(F.values[idx_k[rest]], j, F.h, method, per)
            acc += (-1) ** a * cache[key]
        out.append(acc)
    return GridField(m, k + 1, F.L, F.N, np.stack(out), F.convention)


def codifferential(F: GridField, method: str = "centered") -> GridField:
    m, k = F.m, F.k
    if k == 0:
        raise ValueError("codifferential of a 0-form")
    per = F.convention == "periodic" or method == "spectral"
    idx_k = {I: n for n, I in enumerate(multi_indices(m, k))}
    out = []
    for I in multi_indices(m, k - 1):
        acc = np.zeros(F.values.shape[1:])
        for j in range(m):
            if j in I:
                continue
            JI = tuple(sorted((j,) + I))
            acc -= _sign_insert(j, I) * partial(F.values[idx_k[JI]], j, F.h, method, per)
        out.append(acc)
    return GridField(m, k - 1, F.L, F.N, np.stack(out), F.convention)


def hodge_laplacian(F: GridField, method: str = "centered") -> GridField:
    parts = []
    if F.k > 0:
        parts.append(exterior_derivative(codifferential(F, method), method).values)
    if F.k < F.m:
        parts.append(codifferential(exterior_derivative(F, method), method).values)
    return F.with_values(sum(parts))


def scalar_laplacian(F: GridField, method: str = "centered") -> GridField:
    """-sum_j d_j d_j applied to every coefficient (same stencils as d, d*)."""
    per = F.convention == "periodic" or method == "spectral"
    out = np.zeros_like(F.values)
    for c in range(len(F.values)):
        for j in range(F.m):
            out[c] -= partial(partial(F.values[c], j, F.h, method, per), j, F.h, method, per)
    return F.with_values(out)


def inner(A: GridField, B: GridField) -> float:
    return float(np.sum(A.values * B.values) * A.h ** A.m)


# ---------------------------------------------------------------------------
# potentials

RIESZ_ORDERS = (0.5, 1.5, 2.0, 2.5)


def riesz_potential(F: GridField, order: float) -> GridField:
    """Spectral Riesz potential: multiplier |xi|^(-order), zero mode set to 0.

    Dropping the zero mode removes the mean of the input; for order 2 the
    result is the periodic Newton potential, unique up to an additive
    constant, which is fixed by zero mean.
    """
    if order <= 0:
        raise ValueError("order must be positive")
    if F.convention != "periodic" and not F.compact:
        if F.shell_max() > 1e-10 * max(np.abs(F.values).max(), 1e-300):
            raise ValueError("input is not compactly supported in the box; tag it periodic to proceed")
    N, m = F.N, F.m
    kx = _wavenumbers(N, F.h)
    K2 = sum(np.meshgrid(*([kx ** 2] * m), indexing="ij", sparse=True))
    with np.errstate(divide="ignore"):
        mult = np.where(K2 > 0, K2 ** (-order / 2), 0.0)
    axes = tuple(range(1, m + 1))
    out = np.real(np.fft.ifftn(np.fft.fftn(F.values, axes=axes) * mult, axes=axes))
    # the result is periodic and no longer compactly supported
    return GridField(F.m, F.k, F.L, F.N, out, "periodic")


def newton_kernel(m: int):
    """Fundamental solution of -Laplacian on R^m (m >= 3): c / |x|^(m-2)."""
    c = gamma(m / 2) / (4 * math.pi ** (m / 2)) * 2 / (m - 2)
    return lambda r: c / np.asarray(r) ** (m - 2)


# Madelung-type constant of the simple cubic lattice: the zero-mean periodic
# Green's function of -Laplacian on a cube of side l is
#   1/(4 pi r) - XI_CUBIC/(4 pi l) + r^2/(6 l^3) + O(r^4 / l^5).
XI_CUBIC = 2.837297479


def periodic_newton_kernel(L: float):
    """Zero-mean periodic Newton kernel on the box [-L, L)^3 near the origin."""
    ell = 2 * L

    def G(r):
        r = np.asarray(r, dtype=float)
        return 1 / (4 * math.pi * r) - XI_CUBIC / (4 * math.pi * ell) + r ** 2 / (6 * ell ** 3)
    return G


# ---------------------------------------------------------------------------
# harmonic extension

def poisson_kernel_constant(m: int) -> float:
    return gamma((m + 1) / 2) / math.pi ** ((m + 1) / 2)


def poisson_extension(psi: GridField, x, t: float, images: int = 2) -> float:
    """Psi(x, t) = c_m int t psi(y) / (t^2 + |x-y|^2)^((m+1)/2) dy by grid quadrature.

    Zero-padded fields are integrated over the box.  Periodic fields are
    split into their mean (kernel mass 1) plus the zero-mean remainder summed
    over the periodic images within ``images`` box widths.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if psi.k != 0:
        raise ValueError("scalar field required")
    m, h = psi.m, psi.h
    x = np.asarray(x, dtype=float).reshape(m)
    Y = grid_coords(m, psi.L, psi.N).reshape(-1, m)
    v = psi.values[0].reshape(-1)
    c = poisson_kernel_constant(m)

    def kern(shift):
        d2 = np.sum((x - Y - shift) ** 2, axis=1)
        return c * t / (t * t + d2) ** ((m + 1) / 2)

    if psi.convention == "zero-padded":
        return float(np.sum(kern(0.0) * v) * h ** m)
    mean = float(v.mean())
    w = v - mean
    total = 0.0
    rng = range(-images, images + 1)
    for off in np.array(np.meshgrid(*([rng] * m), indexing="ij")).reshape(m, -1).T:
        total += np.sum(kern(2 * psi.L * off) * w)
    return mean + float(total * h ** m)


# ---------------------------------------------------------------------------
# commutator estimate experiment

@dataclass(frozen=True)
class TrigMap:
    """f(x) = y0 + A (sin(M x_i) + cos(M x_{i+1}))_i, periodic on [-pi, pi)^3."""
    M: int = 1
    A: float = 0.002
    y0: tuple = (0.0, 0.0, 0.0)
    constant: bool = False
    m: int = 3
    ell: int = 3
    period: float = 2 * math.pi

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y0 = np.asarray(self.y0, dtype=float)
        if self.constant:
            return np.broadcast_to(y0, x.shape[:-1] + (3,)).copy()
        M, A = self.M, self.A
        s = np.sin(M * x)
        c = np.cos(M * np.roll(x, -1, axis=-1))
        return y0 + A * (s + c)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape[:-1] + (3, 3))
        if self.constant:
            return J
        M, A = self.M, self.A
        for i in range(3):
            j = (i + 1) % 3
            J[..., i, i] = A * M * np.cos(M * x[..., i])
            J[..., i, j] = -A * M * np.sin(M * x[..., j])
        return J


@dataclass(frozen=True)
class BumpTwoForm:
    """kappa = lam * d(phi dy^2), phi(y) = (1 - |y - c|^2 / w^2)_+^5, closed and compact on R^3."""
    lam: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)
    width: float = 1.0

    def _z(self, y):
        return (np.asarray(y, dtype=float) - np.asarray(self.center)) / self.width

    def __call__(self, y):
        """Coefficients in (dy0^dy1, dy0^dy2, dy1^dy2) order."""
        z = self._z(y)
        q = np.clip(1 - np.sum(z * z, -1), 0, None)
        g = -10 * q ** 4 / self.width * self.lam          # dphi = g z
        out = np.zeros(z.shape[:-1] + (3,))
        out[..., 0] = g * z[..., 0]
        out[..., 2] = -g * z[..., 2]
        return out

    def derivative(self, y):
        """d/dy_j of each coefficient, shape (..., 3, 3)."""
        z = self._z(y)
        q = np.clip(1 - np.sum(z * z, -1), 0, None)
        w = self.width
        # Hessian of phi
        H = (-10 * q[..., None, None] ** 4 * np.eye(3)
             + 80 * q[..., None, None] ** 3 * z[..., :, None] * z[..., None, :]) / w ** 2 * self.lam
        D = np.zeros(z.shape[:-1] + (3, 3))
        D[..., 0, :] = H[..., 0, :]
        D[..., 2, :] = -H[..., 2, :]
        return D

    def sup_norms(self, n: int = 200000, seed: int = 0):
        """(||kappa||_inf, ||D kappa||_inf) from dense sampling of the support ball."""
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((n, 3))
        z *= (rng.random(n) ** (1 / 3) / np.linalg.norm(z, axis=1))[:, None]
        # include a radial line through the extremal region of |dphi|
        r = np.linspace(0, 1, 2001)[:, None] * np.array([1.0, 0, 0])
        y = np.concatenate([z, r]) * self.width + np.asarray(self.center)
        k = np.linalg.norm(self(y), axis=-1).max()
        dk = np.linalg.norm(self.derivative(y), axis=(-2, -1)).max()
        return float(k), float(dk)


def commutator_experiment(f, kappa, s: float, N: int = 64, k: int = 2,
                          mc_samples: int = 200000, seed: int = 0) -> dict:
    """lhs = ||Delta^(-1/4) f*kappa||_2^2 on the periodic box and the matching rhs.

    rhs = [f]_{W^{1-1/2k,2k}}^{2k} ||kappa||^{2-1/s} (||kappa|| + ||D kappa|| [f]_{W^{s,m/s}})^{1/s},
    with seminorms over the fundamental domain (Monte Carlo, fixed seed).
    """
    from .sobolev import SeminormSpec, fractional_seminorm_mc

    if not 0.5 < s < 1:
        raise ValueError("s must lie in (1/2, 1)")
    m = f.m
    L = f.period / 2
    X = grid_coords(m, L, N)
    J = f.jacobian(X)
    pulled = pullback(J, kappa(f(X)), k=k).coeffs
    F = GridField(m, k, L, N, np.moveaxis(pulled, -1, 0), "periodic")
    lhs = float(np.sum(riesz_potential(F, 0.5).values ** 2) * F.h ** m)
    if lhs == 0.0:
        return {"lhs": 0.0, "rhs": float("nan"), "ratio": 0.0}
    box = (-L, L)
    sn1 = fractional_seminorm_mc(f, SeminormSpec(1 - 1 / (2 * k), 2 * k, "euclidean", m),
                                 seed, mc_samples, period=f.period, box=box)
    sn2 = fractional_seminorm_mc(f, SeminormSpec(s, m / s, "euclidean", m),
                                 seed + 1, mc_samples, period=f.period, box=box)
    kn, dkn = kappa.sup_norms()
    rhs = sn1.value ** (2 * k) * kn ** (2 - 1 / s) * (kn + dkn * sn2.value) ** (1 / s)
    return {"lhs": lhs, "rhs": float(rhs), "ratio": lhs / rhs,
            "seminorm_lo": sn1.value, "seminorm_s": sn2.value,
            "kappa_sup": kn, "dkappa_sup": dkn}
