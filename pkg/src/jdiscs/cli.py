"""Command-line front end: configuration, command dispatch and file output.

Usage::

    jdiscs solve-disc --config run.json --out results/

Every command writes ``<command>.json`` (a deterministic report whose only
run-dependent content sits under ``"metadata"``) and, where it makes sense,
CSV dumps of the sampled discs.  Exit status: 0 when every certification
passes, 1 when one fails, 2 for configuration errors, 3 for solver errors.
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import bishop, disc_ops as ops, family, geometry, psh
from .disc_ops import DiscGrid
from .errors import ConfigError, JDiscError
from .poly import Poly, PolyParseError

log = logging.getLogger("jdiscs")

COMMANDS = ("verify-structure", "normalize", "flatten", "solve-disc", "sweep", "cover", "hessian",
            "uniqueness-demo", "operators-selftest")

EXIT_OK, EXIT_CERT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

# ---------------------------------------------------------------------------
# configuration

DEFAULTS = {
    "structure": {"n": 1, "entries": [[{"zb1": [1.0, 0.0]}]], "domain_radius": 0.9, "label": "zbar"},
    "wedge": None,
    "solver": {"tol": 1e-12, "max_iter": 200, "lam": 0.05, "damping": 1.0, "lam_max": 0.1, "c": [0.0],
               "t": [1.0], "newton_tol": 1e-10, "accept_tol": 1e-8, "cr_tol": 1e-6, "bisect_lam": True,
               "min_lam": 1e-4},
    "grid": {"n_r": ops.DEFAULT_N_R, "n_theta": ops.DEFAULT_N_THETA},
    "sweep": {"c_range": [-0.05, 0.05], "t_range": [0.05, 0.3], "c_count": 3, "t_count": 3,
              "sample_count": 100, "scale": 0.1, "workers": 1},
    "psh": {"samples": 32, "radius": 0.05, "r0": [0.01, 0.005], "tol": 1e-8, "levi_tol": 1e-3,
            "levels": [10.0, 100.0, 1000.0]},
    "seed": 42,
    "output": "jdiscs-out",
}
WEDGE_DEFAULTS = {"rho": None, "tau": 0.0, "big_c": 1.0, "delta": 0.3, "cert_radius": 0.05,
                  "cert_samples": 64, "margin": 0.0}


@dataclass
class RunConfig:
    """Validated configuration tree plus the objects parsed from it."""

    raw: dict
    structure: geometry.ComplexMatrixField
    wedge: geometry.WedgeSpec | None
    grid: DiscGrid

    @property
    def solver(self) -> dict:
        return self.raw["solver"]

    @property
    def sweep(self) -> dict:
        return self.raw["sweep"]

    @property
    def psh(self) -> dict:
        return self.raw["psh"]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def wedge_options(self) -> dict:
        return self.raw["wedge"] or {}


def _merge(defaults: dict, given: dict, path: str) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{path or '<root>'}: expected an object, got {type(given).__name__}")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(defaults[key], dict) and value is not None:
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


def _number(tree: dict, key: str, path: str, kind=float, positive=False, nonneg=False):
    value = tree[key]
    where = f"{path}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    value = kind(value)
    if positive and not value > 0:
        raise ConfigError(f"{where}: must be positive, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(f"{where}: must be nonnegative, got {value!r}")
    return value


def _poly(spec, n: int, path: str) -> Poly:
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: polynomial must be a {{monomial: coefficient}} object")
    try:
        return Poly.from_dict(n, spec)
    except (PolyParseError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _vector(value, n: int, path: str) -> list:
    if not isinstance(value, list) or len(value) != n or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{path}: expected a list of {n} numbers")
    return [float(v) for v in value]


def parse_config(tree: dict, seed: int | None = None, grid: tuple | None = None) -> RunConfig:
    """Validate a configuration tree; errors name the offending field."""
    raw = _merge({k: v for k, v in DEFAULTS.items() if k != "wedge"} | {"wedge": None}, tree, "")
    if raw["wedge"] is not None:
        raw["wedge"] = _merge(WEDGE_DEFAULTS, raw["wedge"], "wedge")
    if seed is not None:
        raw["seed"] = seed
    if grid is not None:
        raw["grid"] = {"n_r": grid[0], "n_theta": grid[1]}

    st = raw["structure"]
    n = _number(st, "n", "structure", int, positive=True)
    entries = st["entries"]
    if not isinstance(entries, list) or len(entries) != n or any(not isinstance(r, list) or len(r) != n
                                                                 for r in entries):
        raise ConfigError(f"structure.entries: expected an {n}x{n} nested list of polynomials")
    polys = [[_poly(e, n, f"structure.entries[{i}][{j}]") for j, e in enumerate(row)]
             for i, row in enumerate(entries)]
    radius = st["domain_radius"]
    radius = math.inf if radius is None else _number(st, "domain_radius", "structure", positive=True)
    if not isinstance(st["label"], str):
        raise ConfigError("structure.label: expected a string")
    A = geometry.ComplexMatrixField.from_polys(polys, domain_radius=radius, label=st["label"])

    wedge = None
    if raw["wedge"] is not None:
        w = raw["wedge"]
        if w["rho"] is None:
            rho = tuple(Poly.x(k, n) for k in range(n))
        else:
            if not isinstance(w["rho"], list) or len(w["rho"]) != n:
                raise ConfigError(f"wedge.rho: expected a list of {n} polynomials")
            rho = tuple(_poly(r, n, f"wedge.rho[{j}]") for j, r in enumerate(w["rho"]))
            for j, r in enumerate(rho):
                if not r.is_real(1e-12):
                    raise ConfigError(f"wedge.rho[{j}]: defining functions must be real")
        wedge = geometry.WedgeSpec(rho, _number(w, "tau", "wedge", nonneg=True),
                                   _number(w, "big_c", "wedge", nonneg=True),
                                   _number(w, "delta", "wedge", positive=True))
        _number(w, "cert_radius", "wedge", positive=True)
        _number(w, "cert_samples", "wedge", int, positive=True)
        _number(w, "margin", "wedge")

    sv = raw["solver"]
    for key in ("tol", "newton_tol", "accept_tol", "cr_tol", "damping", "lam_max", "min_lam"):
        _number(sv, key, "solver", positive=True)
    _number(sv, "max_iter", "solver", int, positive=True)
    if _number(sv, "lam", "solver", nonneg=True) > sv["lam_max"]:
        raise ConfigError(f"solver.lam: {sv['lam']!r} exceeds solver.lam_max = {sv['lam_max']!r}")
    if not isinstance(sv["bisect_lam"], bool):
        raise ConfigError(f"solver.bisect_lam: expected true or false, got {sv['bisect_lam']!r}")
    sv["c"] = _vector(sv["c"], n, "solver.c")
    sv["t"] = _vector(sv["t"], n, "solver.t")
    if any(v < 0 for v in sv["t"]):
        raise ConfigError("solver.t: entries must be nonnegative")

    g = raw["grid"]
    n_r = _number(g, "n_r", "grid", int, positive=True)
    n_theta = _number(g, "n_theta", "grid", int, positive=True)
    try:
        grid_obj = DiscGrid.make(n_r, n_theta)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    sw = raw["sweep"]
    for key in ("c_range", "t_range"):
        val = sw[key]
        if not isinstance(val, list) or len(val) != 2 or not all(isinstance(v, (int, float)) for v in val):
            raise ConfigError(f"sweep.{key}: expected [low, high]")
    if min(sw["t_range"]) < 0:
        raise ConfigError("sweep.t_range: t must be nonnegative")
    for key in ("c_count", "t_count", "workers"):
        _number(sw, key, "sweep", int, positive=True)
    _number(sw, "sample_count", "sweep", int, nonneg=True)
    _number(sw, "scale", "sweep", positive=True)

    ps = raw["psh"]
    _number(ps, "samples", "psh", int, positive=True)
    for key in ("radius", "tol", "levi_tol"):
        _number(ps, key, "psh", positive=True)
    for key in ("r0", "levels"):
        if not isinstance(ps[key], list) or not ps[key] or not all(
                isinstance(v, (int, float)) and v > 0 for v in ps[key]):
            raise ConfigError(f"psh.{key}: expected a nonempty list of positive numbers")
    if isinstance(raw["seed"], bool) or not isinstance(raw["seed"], int):
        raise ConfigError(f"seed: expected an integer, got {raw['seed']!r}")
    if not isinstance(raw["output"], str):
        raise ConfigError("output: expected a directory path string")
    return RunConfig(raw, A, wedge, grid_obj)


def load_config(path, seed=None, grid=None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(tree, seed, grid)


# ---------------------------------------------------------------------------
# output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_disc(disc: bishop.Disc, path, residuals: dict | None = None):
    """CSV dump: one ``#`` header line with params and residuals, then one row per node."""
    grid = disc.grid
    header = {"params": {"c": list(disc.params.c), "t": list(disc.params.t), "lam": disc.params.lam},
              "residuals": residuals if residuals is not None else disc.residuals,
              "grid": {"n_r": grid.n_r, "n_theta": grid.n_theta}, "n": disc.n}
    cols = ["i_r", "i_theta", "r", "theta"]
    for j in range(disc.n):
        cols += [f"re_z{j + 1}", f"im_z{j + 1}"]
    lines = ["# " + json.dumps(_jsonable(header), sort_keys=True), ",".join(cols)]
    r, th = grid.r, grid.theta
    for i in range(grid.n_rings):
        for k in range(grid.n_theta):
            vals = [repr(float(r[i])), repr(float(th[k]))]
            for j in range(disc.n):
                v = disc.z[j, i, k]
                vals += [repr(float(v.real)), repr(float(v.imag))]
            lines.append(f"{i},{k}," + ",".join(vals))
    atomic_write(path, "\n".join(lines) + "\n")


def load_disc_dump(path):
    """Read a dump back; returns ``(grid, z, params, header)``."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError("missing header line")
        header = json.loads(first[2:])
        data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    grid = DiscGrid.make(header["grid"]["n_r"], header["grid"]["n_theta"])
    n = header["n"]
    z = np.zeros((n, grid.n_rings, grid.n_theta), dtype=complex)
    ir, ik = data[:, 0].astype(int), data[:, 1].astype(int)
    for j in range(n):
        z[j, ir, ik] = data[:, 4 + 2 * j] + 1j * data[:, 5 + 2 * j]
    p = header["params"]
    return grid, z, bishop.DiscFamilyParams(p["c"], p["t"], p["lam"]), header


def recompute_residuals(path, A: geometry.ComplexMatrixField) -> dict:
    """Residuals of a dumped disc recomputed from the stored node values."""
    grid, z, params, _ = load_disc_dump(path)
    disc = bishop.Disc(grid, z, np.zeros_like(z), np.zeros(z.shape[0], complex), params)
    return bishop.disc_residuals(disc, geometry.dilate_structure(A, params.lam))


# ---------------------------------------------------------------------------
# commands


@dataclass
class Outcome:
    results: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def check(self, name: str, passed: bool, measured=None, limit=None):
        self.checks[name] = {"passed": bool(passed), "measured": measured, "limit": limit}
        if not passed:
            log.warning("certification %s failed: measured %s, limit %s", name, measured, limit)

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks.values())


def _working_field(cfg: RunConfig):
    """The field the disc solver sees: flattened when a wedge is configured."""
    A = cfg.structure
    if cfg.wedge is None:
        return A, None
    w = cfg.wedge_options
    res = geometry.flatten_edge(cfg.wedge, A, w["cert_radius"], w["cert_samples"], w["margin"], cfg.seed)
    return res.field, res


def _ball(rng, count, n, radius):
    pts = rng.normal(size=(count, 2 * n))
    pts *= radius * rng.uniform(size=(count, 1)) ** (1 / (2 * n)) / np.linalg.norm(pts, axis=1, keepdims=True)
    return geometry.to_complex(pts)


def cmd_verify_structure(cfg: RunConfig, out_dir: Path) -> Outcome:
    A = cfg.structure
    n = A.dim_n
    rng = np.random.default_rng(cfg.seed)
    radius = 0.5 * min(1.0, A.domain_radius)
    pts = _ball(rng, 64, n, radius)
    M = A(pts)
    norm = float(np.max(np.linalg.norm(M, ord=2, axis=(-2, -1))))
    o = Outcome()
    o.check("norm_below_one", norm < 1.0, norm, 1.0)
    axiom = trip = 0.0
    if norm < 1.0:
        eye = np.eye(2 * n)
        for p, a in zip(pts, M):
            J = geometry.structure_from_complex_matrix(a)
            axiom = max(axiom, float(np.max(np.abs(J @ J + eye))))
            trip = max(trip, float(np.max(np.abs(geometry.complex_matrix_from_structure(J) - a))))
    o.check("structure_axiom", axiom < geometry.STRUCTURE_TOL, axiom, geometry.STRUCTURE_TOL)
    o.check("round_trip", trip < geometry.STRUCTURE_TOL, trip, geometry.STRUCTURE_TOL)
    a0 = float(np.max(np.abs(A(np.zeros(n)))))
    o.results = {"sample_radius": radius, "samples": len(pts), "max_norm": norm, "A_at_origin": a0,
                 "normalized": A.is_normalized()}
    return o


def cmd_normalize(cfg: RunConfig, out_dir: Path) -> Outcome:
    phi, An = geometry.normalize_structure(cfg.structure)
    jet = geometry.z_jet_residual(An)
    o = Outcome()
    o.check("z_jet_vanishes", jet < geometry.NORMALIZATION_TOL, jet, geometry.NORMALIZATION_TOL)
    a0 = float(np.max(np.abs(An(np.zeros(An.dim_n)))))
    o.check("centered", a0 < geometry.NORMALIZATION_TOL, a0, geometry.NORMALIZATION_TOL)
    o.results = {"diffeo": [c.to_dict() for c in phi.components], "z_jet_residual": jet}
    return o


def cmd_flatten(cfg: RunConfig, out_dir: Path) -> Outcome:
    if cfg.wedge is None:
        raise ConfigError("wedge: the flatten command needs a wedge section")
    res = geometry.flatten_edge(cfg.wedge, cfg.structure, **{k: cfg.wedge_options[k] for k in
                                                              ("cert_radius", "cert_samples", "margin")},
                                seed=cfg.seed)
    n = cfg.structure.dim_n
    rng = np.random.default_rng(cfg.seed)
    edge_img = 1j * rng.uniform(-0.05, 0.05, size=(200, n))
    edge_pts = res.phi.inverse(edge_img)
    rho_err = float(np.max(np.abs(cfg.wedge.values(edge_pts))))
    re_err = float(np.max(np.abs(res.phi(edge_pts).real)))
    o = Outcome()
    o.check("edge_is_flat", re_err < 1e-8, re_err, 1e-8)
    o.check("edge_preimages_on_edge", rho_err < 1e-8, rho_err, 1e-8)
    o.check("coordinates_strictly_psh", res.min_levi_eigenvalue > cfg.wedge_options["margin"],
            res.min_levi_eigenvalue, cfg.wedge_options["margin"])
    o.results = {"diffeo": [c.to_dict() for c in res.phi.components], "min_levi_eigenvalue": res.min_levi_eigenvalue,
                 "edge_re_residual": re_err, "edge_rho_residual": rho_err}
    return o


def _solver_kw(cfg: RunConfig) -> dict:
    s = cfg.solver
    return {"tol": s["tol"], "max_iter": s["max_iter"], "damping": s["damping"], "lam_max": s["lam_max"]}


def _disc_checks(o: Outcome, disc: bishop.Disc, cfg: RunConfig, prefix=""):
    r = disc.residuals
    o.check(prefix + "cr_residual", r["cr"] < cfg.solver["cr_tol"], r["cr"], cfg.solver["cr_tol"])
    o.check(prefix + "attachment", r["attachment"] < 1e-8, r["attachment"], 1e-8)
    o.check(prefix + "containment", r["containment"] <= 1e-10, r["containment"], 1e-10)


def cmd_solve_disc(cfg: RunConfig, out_dir: Path) -> Outcome:
    A, _ = _working_field(cfg)
    s = cfg.solver
    params = bishop.DiscFamilyParams(s["c"], s["t"], s["lam"])
    if s["bisect_lam"]:
        disc = bishop.find_working_scale(A, params, cfg.grid, min_lam=s["min_lam"], **_solver_kw(cfg))
        if disc.params.lam < params.lam:
            log.warning("solve-disc: lam reduced from %g to %g", params.lam, disc.params.lam)
        params = disc.params
    else:
        disc = bishop.solve_bishop(A, params, cfg.grid, **_solver_kw(cfg))
    o = Outcome()
    _disc_checks(o, disc, cfg)
    o.check("fixed_point", disc.residuals["fixed_point"] < 10 * s["tol"], disc.residuals["fixed_point"],
            10 * s["tol"])
    dump = out_dir / "disc.csv"
    z_residuals = {k: disc.residuals[k] for k in ("cr", "attachment", "containment", "interior_max_re")}
    dump_disc(disc, dump, z_residuals)
    o.results = {"params": {"c": list(params.c), "t": list(params.t), "lam": params.lam},
                 "requested_lam": s["lam"], "center": disc.center, "iterations": disc.iterations,
                 "contraction_ratio": disc.contraction_ratio, "ratios": disc.ratios, "residuals": disc.residuals,
                 "dump": dump.name}
    return o


def cmd_sweep(cfg: RunConfig, out_dir: Path) -> Outcome:
    A, _ = _working_field(cfg)
    sw = cfg.sweep
    res = family.sweep(A, cfg.solver["lam"], tuple(sw["c_range"]), tuple(sw["t_range"]), sw["c_count"],
                       sw["t_count"], cfg.grid, cfg.solver["tol"], sw["workers"])
    o = Outcome()
    o.check("no_failures", not res.failures, len(res.failures), 0)
    rows = []
    for k, d in enumerate(res.discs):
        rows.append({"index": k, "c": list(d.params.c), "t": list(d.params.t), "center": d.center,
                     "iterations": d.iterations, "contraction_ratio": d.contraction_ratio,
                     "residuals": d.residuals})
        dump_disc(d, out_dir / f"sweep_disc_{k:03d}.csv")
    worst_cr = max((d.residuals["cr"] for d in res.discs), default=0.0)
    o.check("cr_residual", worst_cr < cfg.solver["cr_tol"], worst_cr, cfg.solver["cr_tol"])
    o.results = {"lam": res.lam, "discs": rows, "failures": res.failures}
    return o


def cmd_cover(cfg: RunConfig, out_dir: Path) -> Outcome:
    A, flat = _working_field(cfg)
    sw, s = cfg.sweep, cfg.solver
    delta = cfg.wedge.delta if cfg.wedge is not None else 0.3
    rep = family.covering_check(A, delta, sw["sample_count"], s["lam"], cfg.grid, sw["scale"], cfg.seed,
                                s["newton_tol"], s["accept_tol"], sw["workers"],
                                chart=flat.phi if flat is not None else None)
    o = Outcome()
    o.check("zero_misses", rep.miss_count == 0, rep.miss_count, 0)
    o.check("hit_residuals", rep.max_residual < s["accept_tol"], rep.max_residual, s["accept_tol"])
    o.results = rep.to_dict()
    if rep.original_targets is not None:
        o.results["original_targets"] = rep.original_targets
    return o


def cmd_hessian(cfg: RunConfig, out_dir: Path) -> Outcome:
    A, _ = _working_field(cfg)
    ps = cfg.psh
    n = A.dim_n
    A_lam = geometry.dilate_structure(A, cfg.solver["lam"])
    J = geometry.RealStructureField.from_complex_matrix_field(A_lam)
    rng = np.random.default_rng(cfg.seed)
    pts = _ball(rng, ps["samples"], n, ps["radius"])
    pts = -np.abs(pts.real) + 1j * pts.imag  # fold onto the closed wedge side x <= 0
    sq = Poly(n)
    for k in range(n):
        sq = sq + Poly.x(k, n) ** 2
    u = psh.ScalarField.from_poly(sq, "sum x_j^2")
    cert = psh.psh_certificate(u, pts, J, ps["tol"])
    norm2 = Poly(n)
    for k in range(n):
        norm2 = norm2 + Poly.z(k, n) * Poly.zbar(k, n)
    neg = psh.psh_certificate(psh.ScalarField.from_poly(-norm2, "-|z|^2"), pts[:4], None, ps["tol"])
    o = Outcome()
    o.check("sum_x_squared_strictly_psh", cert.verdict == "strictly psh", cert.min_eigenvalue, ps["tol"])
    o.check("negative_control_rejected", neg.verdict == "not psh", neg.min_eigenvalue, -ps["tol"])
    # the two definitions of the Levi form at a sample point
    p = pts[0]
    V = np.zeros(n, complex)
    V[0] = 1.0
    exact = psh.levi_form(u, p, V, A_lam)
    diffs = []
    for r0 in ps["r0"]:
        via = psh.levi_form_via_disc(u, p, V, A_lam, r0)
        diffs.append({"r0": r0, "via_disc": via.value, "difference": abs(via.value - exact)})
    o.check("levi_disc_agreement", diffs[0]["difference"] < ps["levi_tol"], diffs[0]["difference"], ps["levi_tol"])
    if len(diffs) > 1:
        o.check("levi_disc_improves", diffs[-1]["difference"] < diffs[0]["difference"], diffs[-1]["difference"],
                diffs[0]["difference"])
    o.results = {"certificate": cert.to_dict(), "negative_control": neg.to_dict(), "levi_form": exact,
                 "levi_point": p, "levi_via_disc": diffs}
    return o


def cmd_uniqueness_demo(cfg: RunConfig, out_dir: Path) -> Outcome:
    A, _ = _working_field(cfg)
    sw = cfg.sweep
    ps = cfg.psh
    res = family.sweep(A, cfg.solver["lam"], tuple(sw["c_range"]), tuple(sw["t_range"]), sw["c_count"],
                       sw["t_count"], cfg.grid, cfg.solver["tol"], sw["workers"])
    n = A.dim_n
    sq = Poly(n)
    for k in range(n):
        sq = sq + Poly.x(k, n) ** 2
    u = psh.ScalarField.from_poly(sq, "sum x_j^2")
    J = geometry.RealStructureField.from_complex_matrix_field(geometry.dilate_structure(A, cfg.solver["lam"]))
    o = Outcome()
    o.check("no_failures", not res.failures, len(res.failures), 0)
    rows = []
    violations = 0
    for k, d in enumerate(res.discs):
        image = d.points()
        sub = image[:: max(1, image.shape[0] // 6), :: max(1, image.shape[1] // 16)].reshape(-1, n)
        cert = psh.psh_certificate(u, sub, J, ps["tol"])
        sh = psh.subharmonic_composition_check(u, d)
        if cert.verdict != "not psh":
            violations += sh.mean_value_violations
        v_bdry = u(np.moveaxis(d.boundary(), 0, -1))
        bounds = [psh.boundary_uniqueness_bound(v_bdry, M, d.grid) for M in ps["levels"]]
        slopes = [(b2["bound"] - b1["bound"]) / (b2["M"] - b1["M"]) for b1, b2 in zip(bounds, bounds[1:])]
        rows.append({"index": k, "c": list(d.params.c), "t": list(d.params.t), "psh_verdict": cert.verdict,
                     "subharmonic": sh.to_dict(), "bounds": bounds, "slopes": slopes})
    all_slopes = [s for r in rows for s in r["slopes"]]
    o.check("zero_sub_mean_value_violations", violations == 0, violations, 0)
    worst = max((abs(s + 0.5) for s in all_slopes), default=0.0)
    o.check("bound_slope_is_minus_half", worst == 0.0, worst, 0.0)
    o.results = {"discs": rows, "levels": ps["levels"]}
    return o


def cmd_operators_selftest(cfg: RunConfig, out_dir: Path) -> Outcome:
    grid = cfg.grid
    rng = np.random.default_rng(cfg.seed)
    o = Outcome()
    N = grid.n_theta
    th = grid.theta
    deg = N // 4
    a, b = rng.normal(size=deg + 1), rng.normal(size=deg + 1)
    m = np.arange(deg + 1)
    phi = a @ np.cos(np.outer(m, th)) + b @ np.sin(np.outer(m, th))
    pts = 0.9 * np.sqrt(rng.uniform(size=20)) * np.exp(2j * np.pi * rng.uniform(size=20))
    lhs = ops.schwarz_transform(grid, phi, pts)
    rhs = 2 * ops.cauchy_transform(grid, phi, pts) - ops.mean_p0(phi)
    e = float(np.max(np.abs(lhs - rhs)))
    o.check("schwarz_identity", e < 1e-12, e, 1e-12)
    zeta = grid.zeta
    ones = np.ones_like(zeta)
    outside = np.array([1.5, -2.0j, 1.2 + 1.2j])
    e1 = float(np.max(np.abs(ops.cauchy_green_transform(grid, ones) - np.conj(zeta))))
    e1o = float(np.max(np.abs(ops.cauchy_green_transform(grid, ones, outside) - 1 / outside)))
    o.check("T_one_inside", e1 < 1e-6, e1, 1e-6)
    o.check("T_one_outside", e1o < 1e-6, e1o, 1e-6)
    e2 = float(np.max(np.abs(ops.cauchy_green_transform(grid, np.conj(zeta)) - np.conj(zeta) ** 2 / 2)))
    o.check("T_conj", e2 < 1e-5, e2, 1e-5)
    e3 = float(np.max(np.abs(ops.green_schwarz_reconstruct(grid, zeta ** 3) - zeta ** 3)))
    o.check("green_schwarz_holomorphic", e3 < 1e-8, e3, 1e-8)
    g = (rng.normal() + 1j * rng.normal()) * zeta ** 2 + (rng.normal() + 1j * rng.normal()) * np.conj(zeta) * zeta
    e4 = ops.symmetrization_residual(grid, g)
    o.check("boundary_symmetrization", e4 < 1e-10, e4, 1e-10)
    h = 1e-5
    p0 = np.array([1.5])
    f = zeta * np.conj(zeta) + np.conj(zeta) ** 2

    def T(q):
        return ops.cauchy_green_transform(grid, f, np.atleast_1d(q))[0]

    dbar = 0.5 * ((T(p0 + h) - T(p0 - h)) / (2 * h) + 1j * (T(p0 + 1j * h) - T(p0 - 1j * h)) / (2 * h))
    e5 = float(abs(dbar))
    o.check("exterior_holomorphy", e5 < 1e-8, e5, 1e-8)
    o.results = {"grid": {"n_r": grid.n_r, "n_theta": grid.n_theta}}
    return o


HANDLERS = {
    "verify-structure": cmd_verify_structure,
    "normalize": cmd_normalize,
    "flatten": cmd_flatten,
    "solve-disc": cmd_solve_disc,
    "sweep": cmd_sweep,
    "cover": cmd_cover,
    "hessian": cmd_hessian,
    "uniqueness-demo": cmd_uniqueness_demo,
    "operators-selftest": cmd_operators_selftest,
}


def run_command(name: str, cfg: RunConfig, out_dir=None) -> tuple[int, dict]:
    """Run one command, write its report and return ``(exit_status, report)``."""
    if name not in HANDLERS:
        raise ConfigError(f"unknown command {name!r}; choose from {', '.join(COMMANDS)}")
    out_dir = Path(out_dir if out_dir is not None else cfg.raw["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"command": name, "config": cfg.raw}
    try:
        outcome = HANDLERS[name](cfg, out_dir)
        status = EXIT_OK if outcome.ok else EXIT_CERT
        report.update({"ok": outcome.ok, "results": outcome.results, "certifications": outcome.checks})
    except ConfigError:
        raise
    except JDiscError as exc:
        status = EXIT_SOLVER
        report.update({"ok": False, "error": {"type": type(exc).__name__, "message": str(exc),
                                               "margin": exc.margin}})
        log.error("%s: %s", type(exc).__name__, exc)
    report["metadata"] = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__}
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2)
    atomic_write(out_dir / f"{name}.json", text + "\n")
    return status, report


def _grid_arg(text: str):
    try:
        n_r, n_theta = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected n_r,n_theta") from None
    return n_r, n_theta


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jdiscs", description="Bishop discs for almost complex structures.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", help="output directory (overrides config 'output')")
    parser.add_argument("--seed", type=int, help="random seed (overrides config 'seed')")
    parser.add_argument("--grid", type=_grid_arg, help="n_r,n_theta (overrides config 'grid')")
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.grid)
        status, report = run_command(args.command, cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        verdict = "ok" if status == EXIT_OK else ("certification failed" if status == EXIT_CERT else "solver error")
        print(f"{args.command}: {verdict}")
        for name, c in report.get("certifications", {}).items():
            print(f"  {'PASS' if c['passed'] else 'FAIL'} {name}: measured {c['measured']} limit {c['limit']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
