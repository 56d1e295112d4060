"""Collocation grid for the periodic slab Omega = T^2 x (-b, 0).

Tangential directions carry uniform Fourier nodes on [0, 2*pi); the vertical
direction carries Chebyshev-Gauss-Lobatto nodes on [-b, 0] with
Clenshaw-Curtis quadrature weights.  All fields are plain real ndarrays:

    volume fields   shape (nx, ny, nz)
    surface fields  shape (nx, ny)
    vector fields   shape (3, nx, ny, nz), components indexed 0..2

Vertical node 0 sits exactly at x3 = 0 (the moving top Sigma) and node nz-1
exactly at x3 = -b (the flat bottom Sigma_b).  Transforms use real-to-complex
symmetry internally; no operation returns complex data.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _fft

from .errors import GridError

_WORKERS = min(4, os.cpu_count() or 1)


def rfft(f, axis):
    return _fft.rfft(f, axis=axis, workers=_WORKERS if f.ndim > 3 else 1)


def irfft(f, n, axis):
    return _fft.irfft(f, n=n, axis=axis,
                      workers=_WORKERS if f.ndim > 3 else 1)


def rfft2(f, axes):
    return _fft.rfft2(f, axes=axes, workers=_WORKERS if f.ndim > 3 else 1)


def irfft2(f, s, axes):
    return _fft.irfft2(f, s=s, axes=axes,
                       workers=_WORKERS if f.ndim > 3 else 1)


def chebyshev_nodes(n: int) -> np.ndarray:
    """Gauss-Lobatto nodes cos(k*pi/(n-1)), k = 0..n-1, decreasing from 1 to -1."""
    return np.cos(np.arange(n) * np.pi / (n - 1))


def chebyshev_diff_matrix(n: int) -> np.ndarray:
    """Collocation derivative matrix on the n Gauss-Lobatto nodes of [-1, 1].

    Uses the trigonometric-identity/flipping construction plus the
    negative-sum trick for the diagonal, which keeps the matrix accurate
    for the boundary-clustered nodes.
    """
    if n < 2:
        raise GridError("need at least 2 Chebyshev nodes")
    k = np.arange(n)
    x = chebyshev_nodes(n)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** k
    X = np.tile(x, (n, 1)).T
    dX = X - X.T + np.eye(n)
    D = np.outer(c, 1.0 / c) / dX
    D -= np.diag(D.sum(axis=1))
    return D


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Quadrature weights on the n Gauss-Lobatto nodes of [-1, 1].

    Exact for polynomials of degree <= n-1; weights sum to 2.
    """
    m = n - 1
    if m == 0:
        raise GridError("need at least 2 Chebyshev nodes")
    w = np.zeros(n)
    theta = np.arange(n) * np.pi / m
    for j in range(n):
        s = 0.0
        for kk in range(1, m // 2 + 1):
            factor = 2.0 if 2 * kk < m else 1.0
            s += factor * np.cos(2.0 * kk * theta[j]) / (4.0 * kk * kk - 1.0)
        w[j] = 1.0 - s
    w *= 2.0 / m
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass
class Grid:
    """Discrete slab: node sets, quadrature weights, and spectral operators."""

    nx: int
    ny: int
    nz: int
    b: float
    dealias: bool = True

    x1: np.ndarray = field(init=False, repr=False)
    x2: np.ndarray = field(init=False, repr=False)
    x3: np.ndarray = field(init=False, repr=False)
    wz: np.ndarray = field(init=False, repr=False)
    Dz: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.x1 = 2.0 * np.pi * np.arange(self.nx) / self.nx
        self.x2 = 2.0 * np.pi * np.arange(self.ny) / self.ny
        # affine image of [-1, 1]: node 0 -> 0, node nz-1 -> -b
        self.x3 = (chebyshev_nodes(self.nz) - 1.0) * (self.b / 2.0)
        self.x3[0] = 0.0
        self.x3[-1] = -self.b
        self.wz = clenshaw_curtis_weights(self.nz) * (self.b / 2.0)
        self.Dz = chebyshev_diff_matrix(self.nz) * (2.0 / self.b)
        # derivative multipliers; Nyquist column zeroed so derivatives stay real
        k1 = np.fft.rfftfreq(self.nx, d=1.0 / self.nx)
        k2 = np.fft.rfftfreq(self.ny, d=1.0 / self.ny)
        if self.nx % 2 == 0:
            k1 = k1.copy()
            k1[-1] = 0.0
        if self.ny % 2 == 0:
            k2 = k2.copy()
            k2[-1] = 0.0
        self._ik1 = 1j * k1
        self._ik2 = 1j * k2
        # full-fft layout along axis 0 for rfft2-based operators
        k1_full = np.fft.fftfreq(self.nx, d=1.0 / self.nx)
        if self.nx % 2 == 0:
            k1_full[self.nx // 2] = 0.0
        self._ik1_full = 1j * k1_full
        # true integer wavenumber magnitudes (Nyquist retained) for multipliers
        self.kx = np.fft.rfftfreq(self.nx, d=1.0 / self.nx)
        self.ky = np.fft.rfftfreq(self.ny, d=1.0 / self.ny)

    # -- geometry helpers -------------------------------------------------

    def mesh_surface(self):
        """(X1, X2) coordinate arrays of shape (nx, ny)."""
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def mesh_volume(self):
        """(X1, X2, X3) coordinate arrays of shape (nx, ny, nz)."""
        return np.meshgrid(self.x1, self.x2, self.x3, indexing="ij")

    @property
    def volume(self) -> float:
        return 4.0 * np.pi**2 * self.b

    # -- derivatives ------------------------------------------------------

    def d_tan(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Fourier-spectral tangential derivative; ``axis`` is 1 or 2.

        Surface fields are (nx, ny); anything with more dimensions is
        treated as a (stack of) volume field(s) with trailing (nx, ny, nz).
        """
        if axis not in (1, 2):
            raise GridError(f"tangential axis must be 1 or 2, got {axis}")
        ax = axis - 1 if f.ndim == 2 else f.ndim - 3 + (axis - 1)
        n = self.nx if axis == 1 else self.ny
        if f.shape[ax] != n:
            raise GridError(
                f"axis-{axis} length {f.shape[ax]} does not match grid ({n})")
        ik = self._ik1 if axis == 1 else self._ik2
        fh = rfft(f, axis=ax)
        shape = [1] * fh.ndim
        shape[ax] = fh.shape[ax]
        fh *= ik.reshape(shape)
        return irfft(fh, n=n, axis=ax)

    def d_vert(self, f: np.ndarray) -> np.ndarray:
        """Chebyshev collocation derivative along x3 (last axis)."""
        if f.shape[-1] != self.nz:
            raise GridError(
                f"vertical length {f.shape[-1]} does not match grid ({self.nz})")
        return np.tensordot(f, self.Dz, axes=([-1], [1]))

    # -- quadrature -------------------------------------------------------

    def quad_volume(self, f: np.ndarray) -> float:
        """Integral over Omega.  Any weight (e.g. d3(phi)) must be premultiplied."""
        cell = 4.0 * np.pi**2 / (self.nx * self.ny)
        return float(cell * np.sum(f * self.wz))

    def quad_surface(self, f: np.ndarray) -> float:
        """Integral over one horizontal plane (top or bottom alike)."""
        cell = 4.0 * np.pi**2 / (self.nx * self.ny)
        return float(cell * np.sum(f))

    # -- norms ------------------------------------------------------------

    def norm0(self, f: np.ndarray) -> float:
        """L2 norm: volume fields via quad_volume, surface via quad_surface."""
        if f.ndim == 3:
            return float(np.sqrt(max(self.quad_volume(f * f), 0.0)))
        return float(np.sqrt(max(self.quad_surface(f * f), 0.0)))

    def sobolev_norm(self, f: np.ndarray, s: int) -> float:
        """H^s norm sqrt(sum_{|m|<=s} ||D^m f||_0^2) over plain derivatives.

        Tangential factors are spectral; vertical factors use d_vert.
        Surface fields (ndim 2) take tangential derivatives only.
        """
        if s not in (0, 1, 2, 3, 4):
            raise GridError(f"sobolev order must be in 0..4, got {s}")
        total = 0.0
        if f.ndim == 3:
            # cache the vertical derivative ladder, then walk tangential orders
            vert = [f]
            for _ in range(s):
                vert.append(self.d_vert(vert[-1]))
            for m3 in range(s + 1):
                total += self._tangential_sq_sum(vert[m3], s - m3)
        else:
            total += self._tangential_sq_sum(f, s)
        return float(np.sqrt(max(total, 0.0)))

    def _tangential_sq_sum(self, g: np.ndarray, smax: int) -> float:
        """sum over m1+m2 <= smax of ||d1^m1 d2^m2 g||_0^2."""
        total = self.norm0(g) ** 2
        ladder1 = [g]
        for m1 in range(smax + 1):
            if m1 > 0:
                ladder1.append(self.d_tan(ladder1[-1], 1))
                total += self.norm0(ladder1[-1]) ** 2
            h = ladder1[m1]
            for _ in range(smax - m1):
                h = self.d_tan(h, 2)
                total += self.norm0(h) ** 2
        return total

    def vector_sobolev_norm(self, X: np.ndarray, s: int) -> float:
        """Component-wise H^s norm of a stacked vector field."""
        return float(np.sqrt(sum(self.sobolev_norm(c, s) ** 2 for c in X)))

    def sobolev_norm_fast(self, f: np.ndarray, s: int) -> float:
        """Same value as sobolev_norm via tangential Parseval sums.

        The tangential sum over multi-indices (m1, m2) with m1 + m2 = j
        becomes the homogeneous weight sum_{p+q=j} (k1^2)^p (k2^2)^q on the
        half spectrum; only the vertical ladder stays in physical space.
        """
        if s not in (0, 1, 2, 3, 4):
            raise GridError(f"sobolev order must be in 0..4, got {s}")
        if not f.any():
            return 0.0
        k1sq = np.imag(self._ik1_full) ** 2            # (nx,)
        k2sq = np.imag(self._ik2) ** 2                 # (nyr,)
        nyr = k2sq.size
        count = np.full(nyr, 2.0)
        count[0] = 1.0
        if self.ny % 2 == 0:
            count[-1] = 1.0
        norm = 4.0 * np.pi**2 / (self.nx * self.ny) ** 2
        total = 0.0
        g = f
        for m3 in range(s + 1):
            if f.ndim == 2 and m3 > 0:
                break
            gh = rfft2(g, axes=(0, 1))
            if f.ndim == 3:
                P = np.tensordot(np.abs(gh) ** 2, self.wz, axes=([2], [0]))
            else:
                P = np.abs(gh) ** 2
            J = s - m3
            h = np.ones((self.nx, nyr))
            W = np.ones((self.nx, nyr))
            b_pow = np.ones(nyr)
            for j in range(1, J + 1):
                b_pow = b_pow * k2sq
                h = k1sq[:, None] * h + b_pow[None, :]
                W += h
            total += norm * float(np.sum(count[None, :] * W * P))
            if f.ndim == 3 and m3 < s:
                g = self.d_vert(g)
        return float(np.sqrt(max(total, 0.0)))

    # -- products ---------------------------------------------------------

    def product(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Pointwise product, tangentially dealiased when the grid flag is on.

        The 2/3 rule truncates both factors to |k| <= n/3 before multiplying
        and truncates the product again, so quadratic aliasing never lands
        inside the retained band.  Factors already truncated can skip their
        pass via product_banded.
        """
        if not self.dealias:
            return f * g
        p = self.dealias_tangential(f) * self.dealias_tangential(g)
        return self.dealias_tangential(p)

    def product_banded(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Product of factors known to be band-limited to |k| <= n/3."""
        if not self.dealias:
            return f * g
        return self.dealias_tangential(f * g)

    def _tan_axes(self, f: np.ndarray):
        return (0, 1) if f.ndim == 2 else (f.ndim - 3, f.ndim - 2)

    def dealias_tangential(self, f: np.ndarray) -> np.ndarray:
        """Zero tangential modes with |k| above n/3.

        Works on single fields and on stacks with leading component axes
        (the tangential axes are the last-but-one pair for volume shapes).
        """
        ax = self._tan_axes(f)
        fh = rfft2(f, axes=ax)
        kx = np.abs(np.fft.fftfreq(self.nx, d=1.0 / self.nx))
        shape1 = [1] * fh.ndim
        shape1[ax[0]] = self.nx
        shape2 = [1] * fh.ndim
        shape2[ax[1]] = fh.shape[ax[1]]
        mask = ((kx > self.nx // 3).reshape(shape1)
                | (self.ky > self.ny // 3).reshape(shape2))
        fh = np.where(mask, 0.0, fh)
        return irfft2(fh, s=(self.nx, self.ny), axes=ax)


def make_grid(nx: int, ny: int, nz: int, b: float, dealias: bool = True) -> Grid:
    """Validated grid constructor."""
    for name, n in (("nx", nx), ("ny", ny)):
        if n < 4 or n % 2 != 0:
            raise GridError(f"{name} must be even and >= 4, got {n}")
    if nz < 5:
        raise GridError(f"nz must be >= 5, got {nz}")
    if not (b > 0):
        raise GridError(f"depth b must be positive, got {b}")
    return Grid(int(nx), int(ny), int(nz), float(b), dealias=dealias)
