"""Grids, spectral operators, the regularized weight and field I/O.

Three discretizations share one interface:

* ``cartesian2d`` -- periodic box [-L, L)^2, FFT.
* ``radial`` N=3 -- cell-centred nodes r_j = (j+1/2)h; the substitution
  v = r u turns the radial Laplacian into d^2/dr^2 with v(0)=0, which is
  diagonalized exactly by the DST-II.
* ``radial`` N=2 -- same nodes; fourth-order flux-form Laplacian
  A = W^-1 D^T W_f D, self-adjoint in the quadrature inner product.
  Multipliers use its eigendecomposition, built lazily.

Every grid exposes ``forward``/``inverse`` normalized so that the
coefficient l2 norm equals the quadrature L2 norm, and ``xi2`` giving the
squared frequency of each coefficient.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import mpmath
import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import expit

from . import kernels

MAX_EIGEN_POINTS = 4096
SHELL_FRACTION = 0.1


# ---------------------------------------------------------------- smooth bump

def _logistic_derivs(s):
    """Derivatives 1..4 of the logistic function expressed through its value."""
    d1 = s * (1 - s)
    d2 = d1 * (1 - 2 * s)
    d3 = d1 * (1 - 6 * s + 6 * s * s)
    d4 = d1 * (1 - 14 * s + 36 * s * s - 24 * s ** 3)
    return d1, d2, d3, d4


def smooth_step(t, order=0):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, and its derivatives.

    step(t) = sigma(1/(1-t) - 1/t) with sigma the logistic function, which
    equals exp(-1/t) / (exp(-1/t) + exp(-1/(1-t))).
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    if order == 0:
        out[t >= 1] = 1.0
    if not inside.any():
        return out
    ti = t[inside]
    a, c = 1.0 / (1.0 - ti), 1.0 / ti
    y = a - c
    s = expit(y)
    if order == 0:
        out[inside] = s
        return out
    # y_k = k! [ (1-t)^{-k-1} - (-1)^k t^{-k-1} ]
    y1 = a ** 2 + c ** 2
    y2 = 2 * (a ** 3 - c ** 3)
    y3 = 6 * (a ** 4 + c ** 4)
    y4 = 24 * (a ** 5 - c ** 5)
    s1, s2, s3, s4 = _logistic_derivs(s)
    if order == 1:
        val = s1 * y1
    elif order == 2:
        val = s2 * y1 ** 2 + s1 * y2
    elif order == 3:
        val = s3 * y1 ** 3 + 3 * s2 * y1 * y2 + s1 * y3
    elif order == 4:
        val = s4 * y1 ** 4 + 6 * s3 * y1 ** 2 * y2 + 3 * s2 * y2 ** 2 + 4 * s2 * y1 * y3 + s1 * y4
    else:
        raise ValueError("order must be 0..4")
    out[inside] = np.nan_to_num(val, nan=0.0, posinf=0.0, neginf=0.0)
    return out


def bump(s, order=0):
    """Radial cutoff profile: 1 on [0, 1], 0 on [2, inf), decreasing between."""
    s = np.asarray(s, dtype=float)
    if order == 0:
        return 1.0 - smooth_step(s - 1.0)
    return -smooth_step(s - 1.0, order)


BUMP_PROFILE = "1 - sigma(1/(2-s) - 1/(s-1)) on [1,2], sigma logistic"


# ---------------------------------------------------------------- grids

class Grid:
    """Base class; use `Grid.cartesian` or `Grid.radial`."""

    mode: str
    dimension: int
    extent: float
    points: int

    @staticmethod
    def cartesian(extent=32.0, points=512):
        return CartesianGrid(float(extent), int(points))

    @staticmethod
    def radial(dimension, extent=32.0, points=256):
        if dimension == 3:
            return RadialSineGrid(float(extent), int(points))
        if dimension == 2:
            return RadialFDGrid(float(extent), int(points))
        raise ValueError("radial grids support dimension 2 or 3")

    @staticmethod
    def make(mode, dimension, extent, points):
        if mode == "cartesian2d":
            if dimension != 2:
                raise ValueError("cartesian mode is two-dimensional")
            return Grid.cartesian(extent, points)
        if mode == "radial":
            return Grid.radial(dimension, extent, points)
        raise ValueError(f"unknown grid mode {mode!r}")

    # -- shared
    @property
    def spacing(self) -> float:
        raise NotImplementedError

    @property
    def shape(self):
        raise NotImplementedError

    @property
    def nyquist(self) -> float:
        return math.pi / self.spacing

    def describe(self):
        return {"mode": self.mode, "dimension": self.dimension, "extent": self.extent,
                "points": self.points, "spacing": self.spacing}

    def integrate(self, f):
        return float(np.sum(self.weights * f).real)

    def inner(self, f, g):
        return complex(np.sum(self.weights * f * np.conj(g)))

    def norm2(self, f):
        return float(np.sum(self.weights * (f.real ** 2 + f.imag ** 2)))

    def propagate(self, u, phase):
        """inverse(phase * forward(u))."""
        return self.inverse(phase * self.forward(u))

    def apply_symbol(self, u, symbol):
        return self.inverse(symbol * self.forward(u))

    def laplacian(self, u):
        return self.apply_symbol(u, -self.xi2)

    def kinetic(self, u):
        c = self.forward(u)
        return float(np.sum(self.xi2 * (c.real ** 2 + c.imag ** 2)))

    def resolvent(self, f):
        """(1 - Laplacian)^{-1} f."""
        return self.apply_symbol(f, 1.0 / (1.0 + self.xi2))

    def shell_mask(self):
        return self.r > (1 - SHELL_FRACTION) * self.extent

    def __eq__(self, other):
        return isinstance(other, Grid) and self.describe() == other.describe()

    def __hash__(self):
        return hash(tuple(self.describe().items()))


class CartesianGrid(Grid):
    mode = "cartesian2d"
    dimension = 2

    def __init__(self, extent, points):
        if points < 16 or points & (points - 1):
            raise ValueError("cartesian grids need a power-of-two point count >= 16")
        self.extent, self.points = extent, points

    @property
    def spacing(self):
        return 2 * self.extent / self.points

    @property
    def shape(self):
        return (self.points, self.points)

    @cached_property
    def axis(self):
        return -self.extent + self.spacing * np.arange(self.points)

    @cached_property
    def coords(self):
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @cached_property
    def r(self):
        x, y = self.coords
        return np.hypot(x, y)

    @cached_property
    def weights(self):
        return np.full(self.shape, self.spacing ** 2)

    @cached_property
    def freqs(self):
        k = 2 * np.pi * sfft.fftfreq(self.points, d=self.spacing)
        return np.meshgrid(k, k, indexing="ij")

    @cached_property
    def xi2(self):
        kx, ky = self.freqs
        return kx ** 2 + ky ** 2

    def forward(self, u):
        return sfft.fft2(u, norm="ortho") * self.spacing

    def inverse(self, c):
        return sfft.ifft2(c / self.spacing, norm="ortho")

    def propagate(self, u, phase):
        # normalizations cancel
        c = sfft.fft2(u)
        c *= phase
        return sfft.ifft2(c, overwrite_x=True)

    def gradient(self, u):
        c = self.forward(u)
        return [self.inverse(1j * k * c) for k in self.freqs]

    def radial_derivative(self, u):
        gx, gy = self.gradient(u)
        x, y = self.coords
        r = self.r
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(r > 0, (x * gx + y * gy) / r, 0.0)
        return out

    def shell_mask(self):
        x, y = self.coords
        edge = (1 - SHELL_FRACTION) * self.extent
        return (np.abs(x) > edge) | (np.abs(y) > edge)

    def singular_density(self, w, b):
        """Origin node replaced by the lattice-sum correction for |x|^-b.

        The punctured lattice sum of |kh|^-b g(kh) h^2 exceeds the integral by
        Z(b/2) h^(2-b) g(0) + O(h^(4-b)), with Z(s) = 4 zeta(s) beta(s) the
        Epstein zeta function of the square lattice.
        """
        if b == 0:
            return w
        origin = self.r == 0
        s = b / 2
        z = float(4 * mpmath.zeta(s) * mpmath.dirichlet(s, [0, 1, 0, -1]))
        out = w.copy()
        out[origin] = -z * self.spacing ** (-b)
        return out


class _RadialGrid(Grid):
    mode = "radial"

    def __init__(self, extent, points):
        if points < 16:
            raise ValueError("radial grids need at least 16 points")
        self.extent, self.points = extent, points

    @property
    def spacing(self):
        return self.extent / self.points

    @property
    def shape(self):
        return (self.points,)

    @cached_property
    def r(self):
        return (np.arange(self.points) + 0.5) * self.spacing

    @property
    def sphere_area(self):
        return 2 * math.pi if self.dimension == 2 else 4 * math.pi

    def radial_derivative(self, u):
        return self.gradient(u)[0]

    def singular_density(self, w, b):
        """Weight samples with the first-node quadrature correction folded in.

        The midpoint rule applied to r^(N-1-b) f(r) with f smooth and even has
        a leading error zeta(-(N-1-b), 1/2) h^(N-b) f(0); subtracting it at
        the first node restores the order of the regular integrand.
        """
        if b == 0:
            return w
        h, N = self.spacing, self.dimension
        p = N - 1 - b
        z = float(mpmath.zeta(-p, 0.5))
        plain = self.sphere_area * self.r[0] ** (N - 1) * h
        out = w.copy()
        out[0] = (plain * w[0] - self.sphere_area * z * h ** (p + 1)) / self.weights[0]
        return out


class RadialSineGrid(_RadialGrid):
    dimension = 3

    @cached_property
    def weights(self):
        return 4 * math.pi * self.r ** 2 * self.spacing

    @cached_property
    def k(self):
        return math.pi * (np.arange(self.points) + 1) / self.extent

    @cached_property
    def xi2(self):
        return self.k ** 2

    @cached_property
    def _scale(self):
        return math.sqrt(4 * math.pi * self.spacing)

    def forward(self, u):
        return self._scale * sfft.dst(self.r * u, type=2, norm="ortho")

    def inverse(self, c):
        return sfft.idst(c / self._scale, type=2, norm="ortho") / self.r

    def gradient(self, u):
        M, r = self.points, self.r
        y = sfft.dst(r * u, type=2)
        beta = y / M
        beta[-1] = beta[-1] / 2
        g = np.zeros(M, dtype=beta.dtype)
        g[1:] = (beta * self.k)[:-1]
        vp = sfft.dct(g, type=3) / 2
        return [(vp - u) / r]


class RadialFDGrid(_RadialGrid):
    dimension = 2

    @cached_property
    def weights(self):
        h = self.spacing
        w = 2 * math.pi * self.r * h
        # endpoint corrections: even integrands at the origin, and the
        # matching far-end term so that the disc area stays exact
        w[0] -= 2 * math.pi * h * h / 24
        w[-1] += 2 * math.pi * h * h / 24
        return w

    @cached_property
    def _face_weights(self):
        h = self.spacing
        return 2 * math.pi * (np.arange(self.points) + 1) * h * h

    @cached_property
    def _D(self):
        """Fourth-order derivative from cells to faces r = (j+1)h.

        Even reflection across the origin, zero ghosts beyond r = L.
        """
        M, h = self.points, self.spacing
        rows, cols, vals = [], [], []
        stencil = ((-1, 1.0), (0, -27.0), (1, 27.0), (2, -1.0))
        for f in range(M):
            for off, c in stencil:
                j = f + off
                if j < 0:
                    j = -1 - j
                if j >= M:
                    continue
                rows.append(f)
                cols.append(j)
                vals.append(c / (24 * h))
        return sp.csr_matrix((vals, (rows, cols)), shape=(M, M))

    @cached_property
    def stiffness(self):
        """D^T W_f D, symmetric positive semidefinite."""
        D = self._D
        return (D.T @ sp.diags(self._face_weights) @ D).tocsc()

    @cached_property
    def _helmholtz_lu(self):
        return spla.splu((sp.diags(self.weights) + self.stiffness).tocsc())

    @cached_property
    def _eigen(self):
        if self.points > MAX_EIGEN_POINTS:
            raise MemoryError(
                f"dense spectral transform limited to {MAX_EIGEN_POINTS} radial points")
        s = 1 / np.sqrt(self.weights)
        B = (self.stiffness.toarray() * s[:, None]) * s[None, :]
        lam, U = np.linalg.eigh(0.5 * (B + B.T))
        return np.clip(lam, 0, None), U

    @property
    def xi2(self):
        return self._eigen[0]

    def forward(self, u):
        return self._eigen[1].T @ (np.sqrt(self.weights) * u)

    def inverse(self, c):
        return (self._eigen[1] @ c) / np.sqrt(self.weights)

    def laplacian(self, u):
        return -(self.stiffness @ u) / self.weights

    def kinetic(self, u):
        du = self._D @ u
        return float(np.sum(self._face_weights * (du.real ** 2 + du.imag ** 2)))

    def resolvent(self, f):
        rhs = self.weights * f
        if np.iscomplexobj(rhs):
            return self._helmholtz_lu.solve(rhs.real) + 1j * self._helmholtz_lu.solve(rhs.imag)
        return self._helmholtz_lu.solve(rhs)

    def gradient(self, u):
        M, h = self.points, self.spacing
        pad = np.zeros(M + 4, dtype=u.dtype)
        pad[2:M + 2] = u
        pad[0], pad[1] = u[1], u[0]
        d = (pad[0:M] - 8 * pad[1:M + 1] + 8 * pad[3:M + 3] - pad[4:M + 4]) / (12 * h)
        return [d]


# ---------------------------------------------------------------- fields

@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @cached_property
    def fourier_cache(self):
        c = self.grid.forward(self.values)
        c.setflags(write=False)
        return c

    def with_values(self, values):
        return SpectralField(self.grid, values)

    def mass(self):
        return self.grid.norm2(self.values)

    def kinetic(self):
        return self.grid.kinetic(self.values)

    def l2(self):
        return math.sqrt(self.mass())


def field_from(grid, values) -> SpectralField:
    return SpectralField(grid, values)


def sobolev_norm(f: SpectralField, s, homogeneous=True):
    if not 0 <= s <= 1:
        raise ValueError("s must lie in [0, 1]")
    g = f.grid
    if isinstance(g, RadialFDGrid) and s in (0, 1):
        m, k = f.mass(), f.kinetic()
        if s == 0:
            return math.sqrt(m)
        return math.sqrt(k if homogeneous else m + k)
    c = f.fourier_cache
    amp = c.real ** 2 + c.imag ** 2
    mult = g.xi2 ** s if homogeneous else (1 + g.xi2) ** s
    return math.sqrt(float(np.sum(mult * amp)))


def h1_norm(grid, u):
    return math.sqrt(grid.norm2(u) + grid.kinetic(u))


def free_propagate(f: SpectralField, t) -> SpectralField:
    if t == 0:
        return f
    g = f.grid
    return f.with_values(g.inverse(np.exp(-1j * t * g.xi2) * f.fourier_cache))


def lp_symbol(grid, cutoff):
    return bump(np.sqrt(grid.xi2) / cutoff)


def littlewood_paley(f: SpectralField, cutoff) -> SpectralField:
    """Smooth projection onto |xi| <~ cutoff (symbol 1 below, 0 above 2*cutoff)."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    g = f.grid
    if cutoff >= g.nyquist:
        warnings.warn("cutoff exceeds the Nyquist frequency; projection is the identity",
                      RuntimeWarning, stacklevel=2)
        return f
    return f.with_values(g.inverse(lp_symbol(g, cutoff) * f.fourier_cache))


def gradient(f: SpectralField):
    return [f.with_values(d) for d in f.grid.gradient(f.values)]


def laplacian(f: SpectralField) -> SpectralField:
    return f.with_values(f.grid.laplacian(f.values))


# ---------------------------------------------------------------- weight

@dataclass(frozen=True, eq=False)
class SingularWeight:
    """Truncated power law max(|x|, rho)^-b on the grid nodes.

    `samples` is the pointwise truncation; `density` is what quadrature and
    the dynamics use (equal to `samples` except for the first-node
    correction on radial grids).
    """
    grid: Grid
    b: float
    reg_radius: float
    samples: np.ndarray
    density: np.ndarray

    def potential(self, u, alpha):
        """Integral of w |u|^(alpha+2)."""
        return kernels.weighted_power(self.grid.weights * self.density, u, float(alpha) + 2)


def make_weight(grid: Grid, b, reg_radius=None, corrected=True) -> SingularWeight:
    b = float(b)
    rho = grid.spacing / 2 if reg_radius is None else float(reg_radius)
    if rho <= 0:
        raise ValueError("reg_radius must be positive")
    samples = np.maximum(grid.r, rho) ** (-b)
    density = samples
    if corrected and rho <= grid.spacing / 2:
        density = grid.singular_density(samples, b)
    samples.setflags(write=False)
    return SingularWeight(grid, b, rho, samples, density)


def zero_weight(grid: Grid) -> SingularWeight:
    z = np.zeros(grid.shape)
    return SingularWeight(grid, 0.0, grid.spacing / 2, z, z)


# ---------------------------------------------------------------- I/O

MAGIC = b"INLS"
VERSION = 1
_MODES = {"cartesian2d": 0, "radial": 1}


def write_snapshot(path, f: SpectralField, b=0.0, timestamp=0.0):
    g = f.grid
    counts = g.shape
    head = struct.pack("<4sIBB", MAGIC, VERSION, _MODES[g.mode], g.dimension)
    head += struct.pack(f"<{len(counts)}I", *counts)
    head += struct.pack("<ddd", g.extent, float(b), float(timestamp))
    data = np.ascontiguousarray(f.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data.tobytes(order="C"))


@dataclass
class Snapshot:
    field: SpectralField
    b: float
    timestamp: float
    version: int = VERSION
    meta: dict = field(default_factory=dict)


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, mode, dim = struct.unpack_from("<4sIBB", raw, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: not an INLS snapshot")
    off = struct.calcsize("<4sIBB")
    mode_name = {v: k for k, v in _MODES.items()}[mode]
    naxes = 2 if mode_name == "cartesian2d" else 1
    counts = struct.unpack_from(f"<{naxes}I", raw, off)
    off += 4 * naxes
    extent, b, ts = struct.unpack_from("<ddd", raw, off)
    off += 24
    grid = Grid.make(mode_name, dim, extent, counts[0])
    vals = np.frombuffer(raw, dtype="<c16", offset=off).reshape(counts)
    return Snapshot(SpectralField(grid, vals.copy()), b, ts, version)


def radial_profile(f: SpectralField):
    """(r, values) along the positive x axis (cartesian) or the nodes (radial)."""
    g = f.grid
    if g.mode == "radial":
        return g.r, f.values
    mid = g.points // 2
    return g.axis[mid:], f.values[mid:, mid]


def write_profile_csv(path, f: SpectralField):
    r, v = radial_profile(f)
    with open(path, "w") as fh:
        fh.write("r,re,im,abs\n")
        for ri, vi in zip(r, v):
            fh.write(f"{ri:.17g},{vi.real:.17g},{vi.imag:.17g},{abs(vi):.17g}\n")


def random_smooth_field(grid: Grid, rng: np.random.Generator, bumps=4, spread=None):
    """Sum of a few complex Gaussian bumps with random centres, widths and chirps."""
    spread = grid.extent / 4 if spread is None else spread
    u = np.zeros(grid.shape, dtype=complex)
    for _ in range(bumps):
        amp = rng.normal() + 1j * rng.normal()
        width = rng.uniform(0.5, 3.0)
        chirp = rng.uniform(-0.5, 0.5)
        if grid.mode == "radial":
            c = rng.uniform(0, spread)
            d2 = (grid.r - c) ** 2
            u += amp * np.exp(-d2 / width ** 2 + 1j * chirp * grid.r ** 2)
        else:
            x, y = grid.coords
            cx, cy = rng.uniform(-spread, spread, size=2)
            kx, ky = rng.uniform(-2, 2, size=2)
            d2 = (x - cx) ** 2 + (y - cy) ** 2
            u += amp * np.exp(-d2 / width ** 2 + 1j * (chirp * d2 + kx * x + ky * y))
    return u
