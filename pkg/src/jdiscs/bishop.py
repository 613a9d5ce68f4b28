"""Model discs of the standard structure and the Bishop-type fixed-point solver.

Discs are maps ``z: D -> C^n`` sampled on a :class:`~jdiscs.disc_ops.DiscGrid`
as arrays of shape ``(n, rings, angles)``.  The equation solved is

    z = t S phi + i c + T g - conj(T g(1 / conj zeta)),   g = A(z, lam) conj(z_zeta),

whose right-hand side has ``dbar = g``, so any fixed point satisfies
``z_zetabar = A(z) conj(z)_zetabar``.  Its real part on the circle is
``t phi``: zero on the upper arc, negative on the lower one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import disc_ops as ops
from .disc_ops import DiscGrid
from .errors import MaxIterExceeded, NoContraction, RangeEscape
from .geometry import ComplexMatrixField, dilate_structure

log = logging.getLogger(__name__)

LAMBDA_MAX = 0.1


def cutoff_values(theta) -> np.ndarray:
    """The boundary cutoff: 0 on [0, pi], ``-exp(-1/((theta-pi)(2pi-theta)))`` on (pi, 2pi)."""
    theta = np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
    out = np.zeros_like(theta)
    lower = (theta > np.pi) & (theta < 2 * np.pi)
    s = theta[lower]
    out[lower] = -np.exp(-1.0 / ((s - np.pi) * (2 * np.pi - s)))
    return out


@dataclass(frozen=True, eq=False)
class BoundaryCutoff:
    """Cutoff sampled on the boundary of ``grid`` with its Schwarz integral."""

    grid: DiscGrid

    @property
    def values(self) -> np.ndarray:
        return cutoff_values(self.grid.theta)

    @property
    def coefficients(self) -> np.ndarray:
        return ops.schwarz_coefficients(self.values)

    @property
    def mean(self) -> float:
        """``P0 phi``, which is also ``S phi(0)``."""
        return float(ops.mean_p0(self.values))

    def schwarz(self, derivative=False) -> np.ndarray:
        return ops.power_series_on_grid(self.grid, self.coefficients, derivative)


@lru_cache(maxsize=8)
def _cutoff_tables(grid: DiscGrid):
    cut = BoundaryCutoff(grid)
    return cut.mean, cut.schwarz(), cut.schwarz(derivative=True)


@dataclass(frozen=True)
class DiscFamilyParams:
    c: tuple
    t: tuple
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in np.atleast_1d(self.c)))
        object.__setattr__(self, "t", tuple(float(v) for v in np.atleast_1d(self.t)))
        if len(self.c) != len(self.t):
            raise ValueError("c and t must have the same length")
        if any(v < 0 for v in self.t):
            raise ValueError("t_j must be nonnegative")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.c)

    def with_lam(self, lam) -> "DiscFamilyParams":
        return DiscFamilyParams(self.c, self.t, lam)


@dataclass
class Disc:
    """A sampled disc with the derivative and center value the solver tracks."""

    grid: DiscGrid
    z: np.ndarray  # (n, rings, angles)
    z_zeta: np.ndarray
    center: np.ndarray  # z(0), shape (n,)
    params: DiscFamilyParams
    iterations: int = 0
    ratios: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def contraction_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def boundary(self) -> np.ndarray:
        return self.z[:, -1, :]

    def points(self) -> np.ndarray:
        """Image points, shape (rings, angles, n)."""
        return np.moveaxis(self.z, 0, -1)


def model_disc(params: DiscFamilyParams, grid: DiscGrid | None = None) -> Disc:
    """``z_j = t_j S phi + i c_j`` (the disc family of the standard structure)."""
    grid = grid or DiscGrid.make()
    mean, s, ds = _cutoff_tables(grid)
    t = np.asarray(params.t)[:, None, None]
    c = np.asarray(params.c)
    z = t * s[None] + 1j * c[:, None, None]
    center = np.asarray(params.t) * mean + 1j * c
    return Disc(grid, z, t * ds[None], center, params)


def _pointwise_matrix(A: ComplexMatrixField, z: np.ndarray) -> np.ndarray:
    pts = np.moveaxis(z, 0, -1)
    rad = float(np.max(np.linalg.norm(pts, axis=-1)))
    if rad > A.domain_radius:
        raise RangeEscape(f"disc image reaches |z| = {rad:.3e} beyond chart radius {A.domain_radius:.3e}",
                          margin=rad - A.domain_radius)
    M = A(pts)
    norm = operator_norm_max(M)
    if norm >= 1.0:
        raise RangeEscape(f"|A| reaches {norm:.3f} on the disc image", margin=norm)
    return M


def operator_norm_max(M) -> float:
    """Max spectral norm over a stack of matrices; SVDs only where the Frobenius bound is >= 1."""
    fro = np.sqrt(np.sum(np.abs(M) ** 2, axis=(-2, -1)))
    worst = float(np.max(fro, initial=0.0))
    if worst < 1.0 or M.shape[-1] == 1:
        return worst
    big = fro >= 1.0
    return max(float(np.max(fro[~big], initial=0.0)),
               float(np.max(np.linalg.norm(M[big], ord=2, axis=(-2, -1)))))


def apply_matrix_field(M, w) -> np.ndarray:
    """``(M w)_j`` for M of shape (R, N, n, n) and w of shape (n, R, N)."""
    if M.shape[-1] == 1:
        return M[..., 0, 0][None] * w
    return np.einsum("rajl,lra->jra", M, w)


@dataclass
class RhsResult:
    values: np.ndarray
    d_zeta: np.ndarray
    center: np.ndarray
    holomorphy_defect: float


def bishop_rhs(z: np.ndarray, z_zeta: np.ndarray, params: DiscFamilyParams, A_lam: ComplexMatrixField,
               grid: DiscGrid) -> RhsResult:
    """Right-hand side of the Bishop equation and its zeta-derivative.

    ``A_lam`` is the already dilated field.  The density is
    ``g = A(z) conj(z_zeta)`` (which is ``A(z) conj(z)_zetabar``).
    """
    mean, s, ds = _cutoff_tables(grid)
    t = np.asarray(params.t)
    c = np.asarray(params.c)
    base = t[:, None, None] * s[None] + 1j * c[:, None, None]
    dbase = t[:, None, None] * ds[None]
    center = t * mean + 1j * c
    M = _pointwise_matrix(A_lam, z)  # (R, N, n, n)
    g = apply_matrix_field(M, np.conj(z_zeta))
    if not np.any(g):
        return RhsResult(base, dbase, center, 0.0)
    tg = ops.cauchy_green_apply(grid, g)
    refl = ops.reflected_term(grid, tg.exterior_moments)
    drefl = ops.reflected_term(grid, tg.exterior_moments, derivative=True)
    values = base + tg.values - refl
    d_zeta = dbase + tg.d_zeta - drefl
    holo = base - refl
    defect = float(np.max(np.abs(negative_modes(grid, holo[:, -1, :]))))
    return RhsResult(values, d_zeta, center + tg.center, defect)


def negative_modes(grid: DiscGrid, trace) -> np.ndarray:
    """Fourier coefficients of negative index (Nyquist excluded) of a boundary trace."""
    c = grid.fft(trace)
    return c[..., grid.n_theta // 2 + 1:]


def cr_residual(disc: Disc, A_lam: ComplexMatrixField) -> float:
    """Sup over interior nodes of |z_zetabar - A(z) conj(z)_zetabar| from grid derivatives."""
    grid = disc.grid
    zz, zb = ops.wirtinger_derivatives(grid, disc.z)
    M = A_lam(disc.points())
    res = zb - apply_matrix_field(M, np.conj(zz))
    return float(np.max(np.linalg.norm(res[:, :-1, :], axis=0)))


def disc_residuals(disc: Disc, A_lam: ComplexMatrixField) -> dict:
    grid = disc.grid
    x = disc.z.real
    upper = grid.upper_arc
    return {
        "cr": cr_residual(disc, A_lam),
        "attachment": float(np.max(np.abs(x[:, -1, upper]))),
        "containment": float(np.max(x)),
        "interior_max_re": float(np.max(x[:, :-1, :])),
    }


def solve_bishop(A: ComplexMatrixField, params: DiscFamilyParams, grid: DiscGrid | None = None,
                 tol=1e-12, max_iter=200, damping=1.0, lam_max=LAMBDA_MAX, initial: Disc | None = None,
                 check=True) -> Disc:
    """Picard iteration for the Bishop equation starting from the model disc.

    ``A`` is the normalized, flattened field; it is dilated by ``params.lam``.
    Raises :class:`NoContraction` when the correction ratio is >= 1 for three
    consecutive steps.
    """
    grid = grid or DiscGrid.make()
    if params.lam > lam_max:
        raise ValueError(f"lam = {params.lam} exceeds the configured threshold {lam_max}")
    A_lam = dilate_structure(A, params.lam)
    start = initial if initial is not None else model_disc(params, grid)
    z, dz = start.z, start.z_zeta
    ratios = []
    prev = None
    bad = 0
    for it in range(1, max_iter + 1):
        rhs = bishop_rhs(z, dz, params, A_lam, grid)
        corr = float(np.max(np.abs(rhs.values - z)))
        if prev is not None and prev > 0:
            q = corr / prev
            ratios.append(q)
            bad = bad + 1 if q >= 1.0 else 0
            if bad >= 3:
                raise NoContraction(f"correction ratio {q:.3f} >= 1 for 3 steps at lam = {params.lam}",
                                    margin=q)
        z = z + damping * (rhs.values - z)
        dz = dz + damping * (rhs.d_zeta - dz)
        center = rhs.center
        prev = corr
        if corr < tol:
            break
    else:
        raise MaxIterExceeded(f"no convergence in {max_iter} iterations (last correction {corr:.3e})",
                              margin=corr)
    disc = Disc(grid, z, dz, center, params, it, ratios)
    if check:
        final = bishop_rhs(z, dz, params, A_lam, grid)
        disc.residuals = {"fixed_point": float(np.max(np.abs(final.values - z))),
                          "holomorphy": final.holomorphy_defect}
        disc.residuals.update(disc_residuals(disc, A_lam))
    log.debug("solve_bishop %s: %d iterations, q=%.3g", params, it, disc.contraction_ratio)
    return disc


def find_working_scale(A: ComplexMatrixField, params: DiscFamilyParams, grid=None, min_lam=1e-4, **kw):
    """Halve ``lam`` until the Picard iteration contracts; returns the solved disc.

    Besides :class:`NoContraction`, a disc leaving the chart and a stalled
    iteration also trigger a halving, since both mean ``lam`` is too large
    for the requested ``(c, t)``.
    """
    lam = params.lam
    while True:
        try:
            return solve_bishop(A, params.with_lam(lam), grid, **kw)
        except (NoContraction, RangeEscape, MaxIterExceeded):
            lam /= 2
            if lam < min_lam:
                raise
            log.info("reducing lam to %g", lam)


def stock_structure() -> ComplexMatrixField:
    """The one-dimensional example ``A(z) = conj(z)`` (normalized: A(0) = 0, A_z(0) = 0)."""
    from .poly import Poly

    return ComplexMatrixField.from_polys([[Poly.zbar(0, 1)]], domain_radius=0.9, label="zbar")


def sup_distance(d1: Disc, d2: Disc) -> float:
    return float(np.max(np.abs(d1.z - d2.z)))


def attachment_ok(disc: Disc, tol=1e-8) -> bool:
    r = disc.residuals
    return r.get("attachment", math.inf) < tol and r.get("containment", math.inf) <= tol
