"""Parameter sweeps over the disc family, the evaluation map and its inverse,
and the sampled covering check for truncated wedges."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bishop import Disc, DiscFamilyParams, _cutoff_tables, solve_bishop
from .disc_ops import DiscGrid
from .errors import JDiscError, NewtonStalled, OutsideWedge
from .geometry import ComplexMatrixField, PolynomialDiffeo

log = logging.getLogger(__name__)

SOLVER_TOL = 1e-12
FD_REL_STEP = 1e-5


def evaluation_map(A: ComplexMatrixField, params: DiscFamilyParams, grid: DiscGrid | None = None,
                   tol=SOLVER_TOL, initial: Disc | None = None, return_disc=False):
    """Center ``z(0)`` of the disc with parameters ``params``."""
    disc = solve_bishop(A, params, grid, tol=tol, initial=initial, check=False)
    return (disc.center, disc) if return_disc else disc.center


def linear_inverse(p, grid: DiscGrid | None = None) -> DiscFamilyParams:
    """Exact inverse of the standard-structure map ``(c, t) -> t P0(phi) + i c``."""
    mean = _cutoff_tables(grid or DiscGrid.make())[0]
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    t = np.maximum(p.real / mean, 0.0)
    return DiscFamilyParams(p.imag, t)


@dataclass
class Inversion:
    params: DiscFamilyParams
    residual: float
    iterations: int
    disc: Disc | None = field(default=None, repr=False)


def invert_evaluation(A: ComplexMatrixField, p, lam: float, grid: DiscGrid | None = None, tol=1e-10,
                      max_steps=8, solver_tol=SOLVER_TOL, fd_step=FD_REL_STEP) -> Inversion:
    """Find ``(c, t)`` with ``Ev_lam(c, t) = p`` by Newton's method.

    Starts from the linear inverse; the Jacobian is a forward finite
    difference with relative step ``fd_step`` (forward so that ``t`` never
    goes negative).
    """
    grid = grid or DiscGrid.make()
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    n = p.size
    if np.any(p.real > 0):
        raise OutsideWedge(f"target has Re p_j = {np.max(p.real):.3e} > 0", margin=float(np.max(p.real)))
    start = linear_inverse(p, grid)
    x = np.concatenate([start.c, start.t])

    def params_of(v):
        return DiscFamilyParams(v[:n], np.maximum(v[n:], 0.0), lam)

    def residual_of(center):
        d = center - p
        return np.concatenate([d.real, d.imag])

    center, disc = evaluation_map(A, params_of(x), grid, solver_tol, return_disc=True)
    F = residual_of(center)
    res = float(np.max(np.abs(F)))
    steps = 0
    while res >= tol:
        if steps >= max_steps:
            raise NewtonStalled(f"residual {res:.3e} after {steps} Newton steps", margin=res)
        scale = max(1e-3, float(np.max(np.abs(x))))
        jac = np.empty((2 * n, 2 * n))
        for k in range(2 * n):
            h = fd_step * max(abs(x[k]), scale)
            xk = x.copy()
            xk[k] += h
            ck = evaluation_map(A, params_of(xk), grid, solver_tol, initial=disc)
            jac[:, k] = (residual_of(ck) - F) / h
        if np.linalg.cond(jac) > 1e10:
            raise NewtonStalled("finite-difference Jacobian is near singular", margin=float(np.linalg.cond(jac)))
        dx = np.linalg.solve(jac, -F)
        damp = 1.0
        while True:
            trial = x + damp * dx
            if np.all(trial[n:] >= 0) or damp < 1e-3:
                break
            damp /= 2
        trial[n:] = np.maximum(trial[n:], 0.0)
        c_new, d_new = evaluation_map(A, params_of(trial), grid, solver_tol, initial=disc, return_disc=True)
        F_new = residual_of(c_new)
        res_new = float(np.max(np.abs(F_new)))
        steps += 1
        if not res_new < res:
            raise NewtonStalled(f"Newton step did not reduce the residual ({res:.3e} -> {res_new:.3e})",
                                margin=res_new)
        x, F, res, disc = trial, F_new, res_new, d_new
    return Inversion(params_of(x), res, steps, disc)


# ---------------------------------------------------------------------------
# covering


def truncated_wedge_mask(x: np.ndarray, alpha: float) -> np.ndarray:
    """Membership in ``{x_j - alpha sum_{k != j} x_k < 0 for all j}`` (x real, shape (..., n))."""
    total = np.sum(x, axis=-1, keepdims=True)
    return np.all(x - alpha * (total - x) < 0, axis=-1)


def sample_truncated_wedge(n: int, delta: float, count: int, scale=0.1, seed=42) -> np.ndarray:
    """Rejection-sample ``count`` points of the truncated wedge inside the box of half-width ``scale``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        x = -scale * rng.uniform(size=(max(count, 16), n))
        y = scale * rng.uniform(-1, 1, size=(max(count, 16), n))
        keep = truncated_wedge_mask(x, delta) & np.all(x < 0, axis=-1)
        out.extend((x + 1j * y)[keep])
    return np.array(out[:count], dtype=complex).reshape(count, n)


@dataclass
class CoveringReport:
    delta: float
    lam: float
    targets: np.ndarray
    hits: list
    misses: list
    tol: float
    original_targets: np.ndarray | None = None

    @property
    def miss_count(self) -> int:
        return len(self.misses)

    @property
    def max_residual(self) -> float:
        return max((h["residual"] for h in self.hits), default=0.0)

    @property
    def max_newton_steps(self) -> int:
        return max((h["iterations"] for h in self.hits), default=0)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "lam": self.lam,
            "tol": self.tol,
            "sample_count": int(len(self.targets)),
            "miss_count": self.miss_count,
            "max_residual": self.max_residual,
            "max_newton_steps": self.max_newton_steps,
            "min_t": min((min(h["t"]) for h in self.hits), default=None),
            "hits": self.hits,
            "misses": self.misses,
        }


def _invert_one(args):
    idx, A, p, lam, grid, tol = args
    try:
        inv = invert_evaluation(A, p, lam, grid, tol=tol)
    except JDiscError as exc:
        return idx, None, f"{type(exc).__name__}: {exc}"
    return idx, inv, None


def covering_check(A: ComplexMatrixField, delta: float, sample_count: int, lam: float,
                   grid: DiscGrid | None = None, scale=0.1, seed=42, tol=1e-10, accept_tol=1e-8,
                   workers=1, chart: PolynomialDiffeo | None = None) -> CoveringReport:
    """Invert the evaluation map on seeded samples of the truncated wedge.

    Targets are drawn in flattened coordinates.  ``chart`` (the flattening
    map) is only used to report the targets in the original coordinates.
    A target is a hit when Newton reaches ``accept_tol`` with every ``t_j > 0``.
    """
    grid = grid or DiscGrid.make()
    n = A.dim_n
    targets = sample_truncated_wedge(n, delta, sample_count, scale, seed) if sample_count else np.zeros((0, n), complex)
    jobs = [(i, A, targets[i], lam, grid, tol) for i in range(len(targets))]
    if workers > 1 and jobs:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(_invert_one, jobs))
    else:
        results = [_invert_one(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    hits, misses = [], []
    for idx, inv, err in results:
        p = targets[idx]
        rec = {"index": idx, "target": [[v.real, v.imag] for v in p]}
        if inv is None:
            misses.append({**rec, "error": err})
        elif inv.residual < accept_tol and all(v > 0 for v in inv.params.t):
            hits.append({**rec, "c": list(inv.params.c), "t": list(inv.params.t), "residual": inv.residual,
                         "iterations": inv.iterations})
        else:
            misses.append({**rec, "error": f"residual {inv.residual:.3e}, t = {inv.params.t}"})
    original = chart.inverse(targets) if chart is not None and len(targets) else None
    return CoveringReport(delta, lam, targets, hits, misses, accept_tol, original)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class FamilySweep:
    lam: float
    params: list = field(default_factory=list)
    discs: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    tol: float = 1e-8

    def add(self, disc: Disc):
        """Store a disc after re-checking the attachment and containment invariants."""
        r = disc.residuals
        problems = []
        if not r.get("attachment", math.inf) < self.tol:
            problems.append(f"attachment {r.get('attachment'):.3e}")
        if not r.get("containment", math.inf) <= self.tol:
            problems.append(f"containment {r.get('containment'):.3e}")
        if any(v > 0 for v in disc.params.t) and not r.get("interior_max_re", math.inf) < 0:
            problems.append(f"interior Re z reaches {r.get('interior_max_re'):.3e}")
        if problems:
            self.failures.append({"params": _params_dict(disc.params), "error": "; ".join(problems)})
            return False
        self.params.append(disc.params)
        self.discs.append(disc)
        return True


def _params_dict(p: DiscFamilyParams) -> dict:
    return {"c": list(p.c), "t": list(p.t), "lam": p.lam}


def parameter_grid(n: int, c_range, t_range, c_count: int, t_count: int) -> list:
    """All (c, t) combinations with each coordinate on its own linspace."""
    cs = np.linspace(*c_range, c_count)
    ts = np.linspace(*t_range, t_count)
    out = []
    for c in itertools.product(cs, repeat=n):
        for t in itertools.product(ts, repeat=n):
            out.append((np.array(c), np.array(t)))
    return out


def sweep(A: ComplexMatrixField, lam: float, c_range=(-0.05, 0.05), t_range=(0.05, 0.3), c_count=3,
          t_count=3, grid: DiscGrid | None = None, tol=SOLVER_TOL, workers=1) -> FamilySweep:
    grid = grid or DiscGrid.make()
    combos = parameter_grid(A.dim_n, c_range, t_range, c_count, t_count)
    out = FamilySweep(lam)

    def run(item):
        c, t = item
        params = DiscFamilyParams(c, t, lam)
        try:
            return params, solve_bishop(A, params, grid, tol=tol), None
        except JDiscError as exc:
            return params, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, combos))
    else:
        results = [run(x) for x in combos]
    for params, disc, err in results:
        if disc is None:
            out.failures.append({"params": _params_dict(params), "error": err})
        else:
            out.add(disc)
    return out
