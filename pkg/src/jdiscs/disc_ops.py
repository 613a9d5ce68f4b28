"""Discrete function spaces on the closed unit disc and the Cauchy, Schwarz
and Cauchy-Green operators.

Grid functions are arrays whose last two axes are (ring, angle): rings are
the ``n_r`` Gauss-Legendre nodes of (0, 1) followed by the boundary circle
``r = 1``; angles are ``2 pi k / n_theta``.  Leading axes (components) are
carried through every operator.

The Cauchy-Green transform

    T f(zeta) = -(1/pi) \\iint_D f(w) / (w - zeta) dA(w)

is applied mode by mode: for ``f = f_m(r) e^{i m theta}``

    T f = 2 e^{i(m-1)theta} \\int_0^r f_m(s) (s/r)^{1-m} ds          (m <= 0)
    T f = -2 e^{i(m-1)theta} \\int_r^1 f_m(s) (r/s)^{m-1} ds         (m >= 1)

and outside the disc only the ``m <= 0`` modes survive, integrated to 1.
The kernels never exceed one, so the radial integrals are stable for every
mode.  A second, quadrature-based route with singularity subtraction is kept
for cross-checks (``method="subtract"``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NonRealInput, TooCloseToBoundary

DEFAULT_N_R = 64
DEFAULT_N_THETA = 512


def barycentric_weights(x: np.ndarray) -> np.ndarray:
    """Weights for barycentric Lagrange interpolation, computed in log space."""
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    logabs = np.log(np.abs(diff)).sum(axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    return sign * np.exp(-(logabs - logabs.min()))


def interpolation_matrix(x: np.ndarray, w: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Rows evaluate the interpolant through nodes ``x`` at points ``s``."""
    s = np.asarray(s, dtype=float).reshape(-1)
    d = s[:, None] - x[None, :]
    exact = d == 0
    d[exact] = 1.0
    c = w[None, :] / d
    m = c / c.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        m[hit] = exact[hit].astype(float)
    return m


def differentiation_matrix(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclass(frozen=True)
class BoundaryGrid:
    n_theta: int

    def __post_init__(self):
        n = self.n_theta
        if n < 16 or n & (n - 1):
            raise ValueError(f"n_theta must be a power of two >= 16, got {n}")

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def points(self) -> np.ndarray:
        return np.exp(1j * self.theta)


@dataclass(frozen=True, eq=False)
class DiscGrid:
    """Polar grid on the closed unit disc with cached operator plans."""

    n_r: int = DEFAULT_N_R
    n_theta: int = DEFAULT_N_THETA
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        BoundaryGrid(self.n_theta)
        if self.n_r < 2:
            raise ValueError("n_r must be at least 2")

    @classmethod
    @lru_cache(maxsize=16)
    def make(cls, n_r=DEFAULT_N_R, n_theta=DEFAULT_N_THETA) -> "DiscGrid":
        return cls(int(n_r), int(n_theta))

    # geometry ---------------------------------------------------------------
    @cached_property
    def _gauss(self):
        x, w = leggauss(self.n_r)
        return (x + 1) / 2, w / 2

    @cached_property
    def r(self) -> np.ndarray:
        return np.append(self._gauss[0], 1.0)

    @property
    def r_interior(self) -> np.ndarray:
        return self._gauss[0]

    @property
    def radial_weights(self) -> np.ndarray:
        """Gauss-Legendre weights of the interior rings on [0, 1]."""
        return self._gauss[1]

    @property
    def n_rings(self) -> int:
        return self.n_r + 1

    @cached_property
    def boundary(self) -> BoundaryGrid:
        return BoundaryGrid(self.n_theta)

    @cached_property
    def theta(self) -> np.ndarray:
        return self.boundary.theta

    @cached_property
    def zeta(self) -> np.ndarray:
        return self.r[:, None] * np.exp(1j * self.theta)[None, :]

    @cached_property
    def area_weights(self) -> np.ndarray:
        w = np.zeros((self.n_rings, self.n_theta))
        w[:-1] = (self.radial_weights * self.r_interior)[:, None] * (2 * np.pi / self.n_theta)
        return w

    @cached_property
    def modes(self) -> np.ndarray:
        return np.rint(np.fft.fftfreq(self.n_theta, 1.0 / self.n_theta)).astype(int)

    @cached_property
    def upper_arc(self) -> np.ndarray:
        """Boolean mask of boundary angles in [0, pi]."""
        th = self.theta
        return th <= np.pi + 1e-14

    @cached_property
    def lower_arc(self) -> np.ndarray:
        return ~self.upper_arc

    def spacing(self) -> float:
        return float(max(np.max(np.diff(self.r)), self.r[0], 2 * np.pi / self.n_theta))

    # radial interpolation -----------------------------------------------------
    @cached_property
    def _bary(self) -> np.ndarray:
        return barycentric_weights(self.r)

    def radial_interp(self, s) -> np.ndarray:
        return interpolation_matrix(self.r, self._bary, s)

    @cached_property
    def D_r(self) -> np.ndarray:
        return differentiation_matrix(self.r, self._bary)

    @cached_property
    def _center_row(self) -> np.ndarray:
        return self.radial_interp(np.array([0.0]))[0]

    # modal Cauchy-Green plan -------------------------------------------------
    @cached_property
    def _quad(self):
        q = (self.n_rings + self.n_theta // 2) // 2 + 8
        x, w = leggauss(q)
        return (x + 1) / 2, w / 2

    def modal_rows(self, radii) -> np.ndarray:
        """Matrices ``M[k, m, j]`` mapping radial samples of mode ``m`` to the
        coefficient of ``e^{i(m-1)theta}`` in ``T f`` at radius ``radii[k]``."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        xq, wq = self._quad
        m = self.modes.astype(float)
        neg = m <= 0
        out = np.zeros((radii.size, self.n_theta, self.n_rings))
        for k, r in enumerate(radii):
            if r > 0:
                s = r * xq
                ker = 2.0 * (xq[None, :]) ** (1.0 - m[neg, None])
                out[k, neg] = (ker * (r * wq)[None, :]) @ self.radial_interp(s)
            if r < 1:
                s = r + (1 - r) * xq
                ker = -2.0 * (r / s[None, :]) ** (m[~neg, None] - 1.0)
                out[k, ~neg] = (ker * ((1 - r) * wq)[None, :]) @ self.radial_interp(s)
        return out

    @cached_property
    def _modal_plan(self) -> np.ndarray:
        # (mode, ring_out, ring_in)
        return np.ascontiguousarray(np.swapaxes(self.modal_rows(self.r), 0, 1))

    # spectral helpers ---------------------------------------------------------
    def fft(self, f) -> np.ndarray:
        return np.fft.fft(f, axis=-1) / self.n_theta

    def ifft(self, c) -> np.ndarray:
        return np.fft.ifft(c, axis=-1) * self.n_theta

    def d_theta(self, f) -> np.ndarray:
        k = self.modes.astype(float)
        k[self.n_theta // 2] = 0.0
        return self.ifft(1j * k * self.fft(f))


# ---------------------------------------------------------------------------
# grid function utilities


def center_value(grid: DiscGrid, f) -> np.ndarray:
    """Value at the origin: the angular mean of each ring extrapolated to r = 0."""
    f = np.asarray(f)
    return np.mean(f, axis=-1) @ grid._center_row


def interpolate(grid: DiscGrid, f, points) -> np.ndarray:
    """Evaluate a grid function at arbitrary points of the closed disc."""
    f = np.asarray(f, dtype=complex)
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    F = grid.fft(f)  # (..., R, N)
    rows = grid.radial_interp(np.abs(points))  # (P, R)
    fm = np.einsum("pr,...rm->...pm", rows, F)
    k = grid.modes.astype(float)
    ph = np.exp(1j * np.angle(points)[:, None] * k[None, :])
    nyq = grid.n_theta // 2
    ph[:, nyq] = np.cos(nyq * np.angle(points))
    return np.sum(fm * ph, axis=-1)


def radial_derivative(grid: DiscGrid, f) -> np.ndarray:
    return np.einsum("ij,...jk->...ik", grid.D_r, f)


def wirtinger_derivatives(grid: DiscGrid, z):
    """``(z_zeta, z_zetabar)`` by spectral differentiation in theta and
    barycentric differentiation in r.

    The Nyquist mode is removed first: its sign of frequency is ambiguous,
    so it cannot be differentiated consistently in both directions.
    """
    z = np.asarray(z, dtype=complex)
    c = grid.fft(z)
    c[..., grid.n_theta // 2] = 0.0
    z = grid.ifft(c)
    zr = radial_derivative(grid, z)
    zt = grid.d_theta(z)
    r = grid.r[:, None]
    e = np.exp(1j * grid.theta)[None, :]
    z_zeta = 0.5 * np.conj(e) * (zr - 1j * zt / r)
    z_zbar = 0.5 * e * (zr + 1j * zt / r)
    return z_zeta, z_zbar


def laplacian(grid: DiscGrid, v) -> np.ndarray:
    v = np.asarray(v)
    vr = radial_derivative(grid, v)
    vrr = radial_derivative(grid, vr)
    k = grid.modes.astype(float)
    vtt = grid.ifft(-(k ** 2) * grid.fft(v))
    if not np.iscomplexobj(v):
        vtt = vtt.real
    r = grid.r[:, None]
    return vrr + vr / r + vtt / r ** 2


# ---------------------------------------------------------------------------
# boundary operators


def mean_p0(phi) -> complex:
    """Average over the equispaced circle (trapezoidal rule)."""
    return np.mean(np.asarray(phi), axis=-1)


def _cauchy_coefficients(b) -> np.ndarray:
    """Coefficients ``c_m`` (m = 0..N/2) of the holomorphic part of boundary data."""
    b = np.asarray(b, dtype=complex)
    n = b.shape[-1]
    c = np.fft.fft(b, axis=-1)[..., : n // 2 + 1] / n
    c[..., n // 2] *= 0.5
    return c


def power_series_on_grid(grid: DiscGrid, coeffs, derivative=False) -> np.ndarray:
    """Evaluate ``sum_m c_m zeta^m`` (or its zeta-derivative) on the grid nodes."""
    coeffs = np.asarray(coeffs, dtype=complex)
    M = coeffs.shape[-1]
    m = np.arange(M)
    r = grid.r
    if derivative:
        c = coeffs[..., 1:] * m[1:]
        powers = m[:-1]
    else:
        c = coeffs
        powers = m
    N = grid.n_theta
    spec = np.zeros(coeffs.shape[:-1] + (grid.n_rings, N), dtype=complex)
    radial = r[:, None] ** powers[None, :]  # (R, M')
    np.add.at(spec, (..., slice(None), powers % N), c[..., None, :] * radial)
    return grid.ifft(spec)


def cauchy_transform(grid: DiscGrid, f_boundary, points=None, method="fourier", margin=1e-3):
    """Cauchy integral of boundary data.

    The Fourier route maps ``e^{i m theta}`` to ``zeta^m`` for m >= 0 and drops
    negative modes.  ``method="quadrature"`` uses the trapezoidal rule on the
    kernel directly and refuses points within ``margin`` of the circle.
    """
    f_boundary = np.asarray(f_boundary, dtype=complex)
    if method == "quadrature":
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        if np.any(np.abs(pts) > 1 - margin):
            raise TooCloseToBoundary(f"direct quadrature needs |zeta| <= 1 - {margin}",
                                     margin=float(np.max(np.abs(pts))))
        w = grid.boundary.points
        ker = w[None, :] / (w[None, :] - pts[:, None])
        return f_boundary @ ker.T / grid.n_theta
    c = _cauchy_coefficients(f_boundary)
    if points is None:
        return power_series_on_grid(grid, c)
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    return np.polynomial.polynomial.polyval(pts, np.moveaxis(c, -1, 0))


def _require_real(phi, tol=1e-13):
    phi = np.asarray(phi)
    if np.iscomplexobj(phi):
        if np.max(np.abs(phi.imag), initial=0.0) > tol * max(1.0, np.max(np.abs(phi), initial=0.0)):
            raise NonRealInput("Schwarz integral needs real boundary data",
                               margin=float(np.max(np.abs(phi.imag))))
        phi = phi.real
    return phi.astype(float)


def schwarz_coefficients(phi) -> np.ndarray:
    """Power-series coefficients of ``S phi = 2 K phi - P0 phi``."""
    phi = _require_real(phi)
    c = 2 * _cauchy_coefficients(phi)
    c[..., 0] -= mean_p0(phi)
    return c


def schwarz_transform(grid: DiscGrid, phi, points=None, derivative=False):
    """Schwarz integral of real boundary data on the grid or at ``points``."""
    c = schwarz_coefficients(phi)
    if points is None:
        return power_series_on_grid(grid, c, derivative)
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    if derivative:
        c = c[..., 1:] * np.arange(1, c.shape[-1])
    return np.polynomial.polynomial.polyval(pts, np.moveaxis(c, -1, 0))


# ---------------------------------------------------------------------------
# Cauchy-Green transform


@dataclass
class CauchyGreenResult:
    """``T g`` on the grid with the pieces the Bishop iteration reuses."""

    values: np.ndarray  # T g at grid nodes
    d_zeta: np.ndarray  # (T g)_zeta at grid nodes
    center: np.ndarray  # T g(0)
    center_d_zeta: np.ndarray  # (T g)_zeta(0)
    exterior_moments: np.ndarray  # I_m = \int_0^1 g_m s^{1-m} ds for m = 0, -1, ..., -N/2


def _exterior_moments(grid: DiscGrid, G) -> np.ndarray:
    """``I_j = \\int_0^1 g_{-j}(s) s^{1+j} ds`` for j = 0..N/2 from mode coefficients G."""
    N = grid.n_theta
    j = np.arange(N // 2 + 1)
    idx = (-j) % N
    s = grid.r_interior
    w = grid.radial_weights
    gm = G[..., :-1, :][..., idx]  # (..., n_r, J)
    ker = w[:, None] * s[:, None] ** (1.0 + j[None, :])
    return np.sum(gm * ker, axis=-2)


def _apply_plan(plan, G) -> np.ndarray:
    # plan (N, R_out, R_in) real; G (..., R_in, N) complex -> (..., R_out, N)
    lead = G.shape[:-2]
    X = np.moveaxis(G.reshape((-1,) + G.shape[-2:]), 0, -1)  # (R, N, k)
    X = np.swapaxes(X, 0, 1)  # (N, R, k)
    k = X.shape[-1]
    Y = plan @ np.concatenate([X.real, X.imag], axis=-1)
    U = Y[..., :k] + 1j * Y[..., k:]  # (N, R, k)
    return np.moveaxis(np.swapaxes(U, 0, 1), -1, 0).reshape(lead + (plan.shape[1], plan.shape[0]))


def cauchy_green_apply(grid: DiscGrid, g) -> CauchyGreenResult:
    """Apply T to a grid function (all leading axes are components)."""
    g = np.asarray(g, dtype=complex)
    G = grid.fft(g)  # (..., R, N) coefficients g_m(r_i)
    U = _apply_plan(grid._modal_plan, G)
    e = np.exp(1j * grid.theta)
    values = grid.ifft(U) * np.conj(e)
    k = grid.modes.astype(float)
    dz_spec = (k - 1.0) * U / grid.r[:, None] + G
    d_zeta = grid.ifft(dz_spec) * np.conj(e) ** 2
    w = grid.radial_weights
    s = grid.r_interior
    center = -2.0 * np.sum(G[..., :-1, 1] * w, axis=-1)
    center_dz = -2.0 * np.sum(G[..., :-1, 2] * w / s, axis=-1)
    return CauchyGreenResult(values, d_zeta, center, center_dz, _exterior_moments(grid, G))


def reflected_term(grid: DiscGrid, moments, derivative=False) -> np.ndarray:
    """``conj(T g(1/conj zeta))`` on the grid, a polynomial in zeta.

    ``T g(w) = sum_j 2 I_j w^{-j-1}`` for |w| > 1, so the reflection is
    ``sum_j 2 conj(I_j) zeta^{j+1}``.
    """
    moments = np.asarray(moments, dtype=complex)
    coeffs = np.concatenate([np.zeros(moments.shape[:-1] + (1,), dtype=complex), 2 * np.conj(moments)], axis=-1)
    return power_series_on_grid(grid, coeffs, derivative)


def _modal_point_values(grid: DiscGrid, G, points) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    r = np.abs(pts)
    th = np.angle(pts)
    k = grid.modes.astype(float)
    out = np.zeros(G.shape[:-2] + pts.shape, dtype=complex)
    inside = r <= 1.0
    if inside.any():
        rows = grid.modal_rows(r[inside])  # (P, N, R)
        U = np.einsum("pmj,...jm->...pm", rows, G)
        ph = np.exp(1j * th[inside, None] * (k[None, :] - 1.0))
        out[..., inside] = np.sum(U * ph, axis=-1)
    if (~inside).any():
        mom = _exterior_moments(grid, G)
        j = np.arange(mom.shape[-1])
        ro = pts[~inside]
        powers = ro[:, None] ** (-(j[None, :] + 1.0))
        out[..., ~inside] = 2 * np.einsum("...j,pj->...p", mom, powers)
    return out


def _subtracted_point_values(grid: DiscGrid, g, points, margin) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    if margin is None:
        margin = grid.spacing()
    w = grid.area_weights.reshape(-1)
    nodes = grid.zeta.reshape(-1)
    gflat = g.reshape(g.shape[:-2] + (-1,))
    out = np.zeros(g.shape[:-2] + pts.shape, dtype=complex)
    for p, zeta in enumerate(pts):
        r = abs(zeta)
        d = nodes - zeta
        near = np.abs(d) < 1e-14
        d[near] = 1.0
        if r > 1 + margin:
            out[..., p] = -(gflat * (w / d)).sum(axis=-1) / np.pi
            continue
        anchor = zeta if r <= 1 else zeta / r
        g0 = interpolate(grid, g, [anchor])[..., 0]
        t1 = np.conj(zeta) if r <= 1 else 1.0 / zeta
        diff = gflat - g0[..., None]
        diff[..., near] = 0.0
        out[..., p] = g0 * t1 - (diff * (w / d)).sum(axis=-1) / np.pi
    return out


def cauchy_green_transform(grid: DiscGrid, f, points=None, method="modal", margin=None):
    """``T f`` at grid nodes (``points=None``) or at arbitrary points of C.

    ``method="modal"`` uses the exact mode-by-mode radial integrals;
    ``method="subtract"`` integrates ``(f - f(zeta)) / (w - zeta)`` with the
    disc quadrature and adds ``f(zeta) T1(zeta)``, with ``T1 = conj(zeta)``
    on the closed disc and ``1/zeta`` outside.  Exterior points within
    ``margin`` of the circle (default: the grid spacing) are also subtracted,
    since direct quadrature is nearly singular there.
    """
    f = np.asarray(f, dtype=complex)
    if method == "modal":
        if points is None:
            return cauchy_green_apply(grid, f).values
        return _modal_point_values(grid, grid.fft(f), points)
    if method == "subtract":
        if points is None:
            points = grid.zeta.reshape(-1)
            return _subtracted_point_values(grid, f, points, margin).reshape(f.shape)
        return _subtracted_point_values(grid, f, points, margin)
    raise ValueError(f"unknown method {method!r}")


def green_schwarz_reconstruct(grid: DiscGrid, f, f_zbar=None, method="modal", margin=None) -> np.ndarray:
    """``S phi + i P0 psi + T f_zbar - conj(T f_zbar(1/conj zeta))``.

    ``phi`` and ``psi`` are the real and imaginary parts of the boundary trace.
    ``f_zbar`` defaults to the grid Wirtinger derivative of ``f``.  With
    ``method="subtract"`` both T terms come from the singularity-subtracted
    quadrature, evaluated at the nodes and at their reflections.
    """
    f = np.asarray(f, dtype=complex)
    if f_zbar is None:
        f_zbar = wirtinger_derivatives(grid, f)[1]
    trace = f[..., -1, :]
    s = schwarz_transform(grid, trace.real)
    if method == "modal":
        res = cauchy_green_apply(grid, f_zbar)
        t_in = res.values
        refl = reflected_term(grid, res.exterior_moments)
    elif method == "subtract":
        nodes = grid.zeta.reshape(-1)
        t_in = _subtracted_point_values(grid, f_zbar, nodes, margin).reshape(f.shape)
        t_out = _subtracted_point_values(grid, f_zbar, 1.0 / np.conj(nodes), margin)
        refl = np.conj(t_out).reshape(f.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return s + 1j * mean_p0(trace.imag)[..., None, None] + t_in - refl


def symmetrization_residual(grid: DiscGrid, g) -> float:
    """Max over boundary nodes of |Re(T g - conj(T g(1/conj zeta)))|."""
    res = cauchy_green_apply(grid, g)
    refl = reflected_term(grid, res.exterior_moments)
    return float(np.max(np.abs((res.values - refl)[..., -1, :].real)))
