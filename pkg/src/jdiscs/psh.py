"""Levi forms, plurisubharmonicity certificates and the subharmonic mechanism
behind boundary uniqueness.

Points and tangent vectors are complex n-vectors; the real picture uses the
interleaved coordinates of :mod:`jdiscs.geometry`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import disc_ops as ops
from .disc_ops import DiscGrid
from .errors import JetCorrectionFailed, MaxIterExceeded
from .geometry import (ComplexMatrixField, RealStructureField, antilinear_matrix, j_standard, to_complex,
                       to_real)
from .poly import Poly

Structure = Union[None, ComplexMatrixField, RealStructureField]


@dataclass(frozen=True)
class ScalarField:
    """A real C^2 function on R^2n with its real gradient and Hessian."""

    dim_n: int
    value: Callable
    gradient: Callable
    hessian: Callable
    label: str = ""

    @classmethod
    def from_poly(cls, u: Poly, label=""):
        if not u.is_real(1e-12):
            raise ValueError("scalar field must be real-valued")
        n = u.n
        first = [d for k in range(n) for d in (u.dx(k), u.dy(k))]
        second = [[d for k in range(n) for d in (f.dx(k), f.dy(k))] for f in first]

        def grad(x):
            z = to_complex(x)
            return np.stack([f(z).real for f in first], axis=-1)

        def hess(x):
            z = to_complex(x)
            return np.stack([np.stack([f(z).real for f in row], -1) for row in second], -2)

        return cls(n, lambda x: u(to_complex(x)).real, grad, hess, label or repr(u))

    def __call__(self, z) -> np.ndarray:
        return self.value(to_real(z))


def _structure_J(J: Structure, n: int) -> Callable:
    if J is None:
        js = j_standard(n)
        return lambda x: np.broadcast_to(js, np.shape(x)[:-1] + js.shape)
    if isinstance(J, ComplexMatrixField):
        return J.J
    return J.J


def _omega(u: ScalarField, x: np.ndarray, Jf: Callable, h=1e-5) -> np.ndarray:
    """Coordinate exterior derivative of beta = J^* du at x: Omega_ab = d_a beta_b - d_b beta_a."""
    m = x.shape[-1]
    grad = u.gradient(x)
    hess = u.hessian(x)
    J0 = Jf(x)
    dbeta = hess @ J0  # d_a (grad_c) J_cb
    for a in range(m):
        e = np.zeros(m)
        e[a] = h
        dJ = (Jf(x + e) - Jf(x - e)) / (2 * h)
        dbeta[a] += grad @ dJ
    return dbeta - dbeta.T


def levi_form(u: ScalarField, p, V, J: Structure = None, h=1e-5) -> float:
    """``H(u)(p, V) = -(d J^* du)_p(V, J V)``."""
    x = to_real(np.atleast_1d(p))
    v = to_real(np.atleast_1d(V))
    Jf = _structure_J(J, u.dim_n)
    om = _omega(u, x, Jf, h)
    return float(-(v @ om @ (Jf(x) @ v)))


def levi_matrix(u: ScalarField, p, J: Structure = None) -> np.ndarray:
    """Symmetric matrix of the quadratic form V -> H(u)(p, V), by polarization on a real basis."""
    n = u.dim_n
    m = 2 * n
    basis = [to_complex(e) for e in np.eye(m)]
    diag = [levi_form(u, p, b, J) for b in basis]
    out = np.diag(diag)
    for a in range(m):
        for b in range(a + 1, m):
            q = levi_form(u, p, basis[a] + basis[b], J)
            out[a, b] = out[b, a] = 0.5 * (q - diag[a] - diag[b])
    return out


@dataclass
class HessianReport:
    points: np.ndarray
    min_eigenvalues: np.ndarray
    verdict: str
    tol: float

    @property
    def min_eigenvalue(self) -> float:
        return float(np.min(self.min_eigenvalues)) if self.min_eigenvalues.size else math.inf

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "min_eigenvalue": self.min_eigenvalue, "tol": self.tol,
                "sample_count": int(self.min_eigenvalues.size)}


def psh_certificate(u: ScalarField, points, J: Structure = None, tol=1e-8) -> HessianReport:
    """Minimum Levi eigenvalue at each point and a verdict.

    ``points`` are complex (P, n) or real (P, 2n).  The verdict is
    ``"strictly psh"`` when every minimum exceeds ``tol``, ``"psh"`` when
    none is below ``-tol``, otherwise ``"not psh"``.
    """
    pts = np.asarray(points)
    if not np.iscomplexobj(pts) and pts.shape[-1] == 2 * u.dim_n:
        pts = to_complex(pts)
    pts = pts.reshape(-1, u.dim_n)
    mins = np.array([np.linalg.eigvalsh(levi_matrix(u, p, J))[0] for p in pts])
    lo = float(np.min(mins)) if mins.size else math.inf
    verdict = "strictly psh" if lo > tol else ("psh" if lo >= -tol else "not psh")
    return HessianReport(pts, mins, verdict, tol)


# ---------------------------------------------------------------------------
# Levi form through a small disc


@dataclass
class DiscLevi:
    value: float
    disc: np.ndarray = field(repr=False)
    iterations: int = 0
    jet_error: float = 0.0


def small_disc(A: ComplexMatrixField, p, V, r0: float, grid: DiscGrid | None = None, tol=1e-13,
               max_iter=200) -> DiscLevi:
    """J-disc ``F(zeta) = f(r0 zeta)`` with ``f(0) = p`` and ``df(0)(d/dxi) = V``.

    ``F = p + a zeta + T g - T g(0) - zeta (T g)_zeta(0)`` with
    ``g = A(F) conj(F_zeta)``, where ``a + A(p) conj(a) = r0 V`` fixes the
    1-jet at the center.
    """
    grid = grid or DiscGrid.make(24, 64)
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    V = np.atleast_1d(np.asarray(V, dtype=complex))
    n = p.size
    Ap = A(p)
    lhs = np.eye(2 * n) + antilinear_matrix(Ap)
    a = to_complex(np.linalg.solve(lhs, to_real(r0 * V)))
    zeta = grid.zeta
    base = p[:, None, None] + a[:, None, None] * zeta[None]
    F = base.copy()
    dF = np.broadcast_to(a[:, None, None], F.shape).astype(complex)
    prev = math.inf
    for it in range(1, max_iter + 1):
        M = A(np.moveaxis(F, 0, -1))
        g = np.einsum("rajl,lra->jra", M, np.conj(dF))
        tg = ops.cauchy_green_apply(grid, g)
        F_new = base + tg.values - tg.center[:, None, None] - zeta[None] * tg.center_d_zeta[:, None, None]
        dF = a[:, None, None] + tg.d_zeta - tg.center_d_zeta[:, None, None]
        corr = float(np.max(np.abs(F_new - F)))
        F = F_new
        if corr < tol * max(1.0, float(np.max(np.abs(p)))):
            break
        if it > 5 and corr > prev:
            raise MaxIterExceeded(f"small-disc iteration diverges (correction {corr:.3e})", margin=corr)
        prev = corr
    else:
        raise MaxIterExceeded(f"small-disc iteration did not converge ({corr:.3e})", margin=corr)
    # independent check of the jet from grid values
    c0 = ops.center_value(grid, F)
    zz, zb = ops.wirtinger_derivatives(grid, F)
    xi0 = ops.center_value(grid, zz + zb)
    jet = max(float(np.max(np.abs(c0 - p))), float(np.max(np.abs(xi0 - r0 * V))) / max(r0, 1e-300))
    return DiscLevi(math.nan, F, it, jet)


def levi_form_via_disc(u: ScalarField, p, V, A: ComplexMatrixField, r0=0.01, grid: DiscGrid | None = None,
                       jet_tol=1e-6) -> DiscLevi:
    """Laplacian of ``u o f`` at the center of a small J-disc tangent to V.

    The Laplacian is the mean-value quotient ``4 (mean_{|zeta|=1} v - v(0)) / r0^2``
    on the circle of physical radius ``r0``; its error is O(r0^2).
    """
    res = small_disc(A, p, V, r0, grid)
    if not res.jet_error < jet_tol:
        raise JetCorrectionFailed(f"1-jet not preserved (error {res.jet_error:.3e})", margin=res.jet_error)
    F = res.disc
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    ring = np.moveaxis(F[:, -1, :], 0, -1)
    v_ring = u(ring)
    v0 = float(u(p[None])[0])
    res.value = float(4 * (np.mean(v_ring) - v0) / r0 ** 2)
    return res


# ---------------------------------------------------------------------------
# subharmonicity on discs


@dataclass
class SubharmonicReport:
    mean_value_violations: int
    laplacian_violations: int
    min_mean_margin: float
    min_laplacian: float
    tolerance: float
    checked_nodes: int

    @property
    def ok(self) -> bool:
        return self.mean_value_violations == 0 and self.laplacian_violations == 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("mean_value_violations", "laplacian_violations", "min_mean_margin",
                                              "min_laplacian", "tolerance", "checked_nodes")} | {"ok": self.ok}


def subharmonic_composition_check(u: ScalarField, disc, atol=1e-8) -> SubharmonicReport:
    """Discrete sub-mean-value and Laplacian tests for ``v = u o z`` on a disc.

    Sub-mean-value: ``v(0) <= mean of v over each ring``.  Laplacian: at every
    interior node ``Lap v >= -tol_node`` with ``tol_node = atol max(1, |v|_inf)
    + h_node^2 |D^3 v|_node`` plus a rounding term (machine epsilon times
    ``|v|_inf`` times the stencil norm of the discrete Laplacian at the node).
    ``h_node`` is the local spacing and ``D^3`` the largest third derivative
    (radial or arclength) at that node.
    """
    grid = disc.grid
    v = u(disc.points())
    v0 = float(u(np.asarray(disc.center)[None])[0])
    scale = max(1.0, float(np.max(np.abs(v))))
    base = atol * scale
    ring_means = np.mean(v, axis=-1)
    margins = ring_means - v0
    mv_viol = int(np.sum(margins < -base))

    lap = ops.laplacian(grid, v)[:-1]
    r = grid.r[:, None]
    vr3 = ops.radial_derivative(grid, ops.radial_derivative(grid, ops.radial_derivative(grid, v)))
    k = grid.modes.astype(float)
    vt3 = grid.ifft(-1j * k ** 3 * grid.fft(v)).real / r ** 3
    d3 = np.maximum(np.abs(vr3), np.abs(vt3))[:-1]
    dr = np.gradient(grid.r)[:-1, None]
    h = np.maximum(dr, grid.r[:-1, None] * 2 * np.pi / grid.n_theta)
    # rounding in the discrete operator: eps |v| times its stencil norm at the node
    dr_norm = np.max(np.sum(np.abs(grid.D_r), axis=1))
    stencil = dr_norm ** 2 + dr_norm / grid.r[:-1, None] + (grid.n_theta / 2) ** 2 / grid.r[:-1, None] ** 2
    rounding = 16 * np.finfo(float).eps * float(np.max(np.abs(v))) * stencil
    tol_node = base + h ** 2 * d3 + rounding
    lap_viol = int(np.sum(lap < -tol_node))
    return SubharmonicReport(mv_viol, lap_viol, float(np.min(margins)), float(np.min(lap)),
                             float(np.max(tol_node)), int(lap.size))


# ---------------------------------------------------------------------------
# boundary uniqueness mechanism


def harmonic_measure_upper(zeta=0.0) -> float:
    """Harmonic measure of the upper semicircle seen from ``zeta`` in the unit disc."""
    zeta = complex(zeta)
    return float(np.angle((-1 - zeta) / (1 - zeta)) % (2 * np.pi) / np.pi - 0.5)


def boundary_uniqueness_bound(v_boundary, M: float, grid: DiscGrid | None = None) -> dict:
    """Upper bound for ``v(0)`` when ``v <= -M`` on the upper arc.

    ``B(M) = w(-M) + (1 - w) max_{lower arc} v`` with ``w = 1/2`` the harmonic
    measure of the upper arc at the center.  ``mean_truncated`` is the
    trapezoidal mean of the boundary data with the upper arc replaced by
    ``min(v, -M)``, which lies below ``B(M)``; ``mean`` is the plain
    boundary mean, an upper bound for ``v(0)`` when v is subharmonic.
    """
    v = np.asarray(v_boundary, dtype=float)
    N = v.shape[-1]
    grid = grid or DiscGrid.make(8, N)
    w_up = harmonic_measure_upper(0.0)
    upper = grid.upper_arc
    lower_sup = float(np.max(v[..., ~upper]))
    bound = w_up * (-M) + (1 - w_up) * lower_sup
    trunc = np.where(upper, np.minimum(v, -M), v)
    # endpoints of the arc carry half weight so that the upper arc has measure exactly 1/2
    wts = np.ones(N)
    ends = np.isclose(grid.theta, 0.0) | np.isclose(grid.theta, np.pi)
    wts[ends] = 0.5
    wts[~upper] *= (N / 2) / np.sum(wts[~upper])
    wts[upper] *= (N / 2) / np.sum(wts[upper])
    mean_trunc = float(np.sum(wts * np.where(upper, -M, trunc)) / N)
    return {"M": float(M), "bound": float(bound), "harmonic_measure_upper": w_up, "sup_lower": lower_sup,
            "mean": float(np.mean(v)), "mean_truncated": mean_trunc}
