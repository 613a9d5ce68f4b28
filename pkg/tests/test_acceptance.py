"""Acceptance suite: one PASS/FAIL line per criterion.

Every tolerance is pinned in ``TOL`` below.  Run under pytest (the lines are
written past output capture) or directly with ``python3 tests/test_acceptance.py``.
"""

import json
import sys

import numpy as np

from jdiscs import bishop, cli, family, psh
from jdiscs import disc_ops as ops
from jdiscs.bishop import DiscFamilyParams, model_disc, solve_bishop
from jdiscs.disc_ops import DiscGrid
from jdiscs.geometry import (ComplexMatrixField, WedgeSpec, complex_matrix_from_structure, dilate_structure,
                             flatten_edge, normalize_structure, structure_from_complex_matrix, z_jet_residual)
from jdiscs.poly import Poly

TOL = {
    "schwarz_identity": 1e-12,
    "T_one_exterior": 1e-6,
    "T_one_interior": 1e-6,
    "T_conj": 1e-5,
    "dbar_order": 2.0,
    "gs_holomorphic": 1e-8,
    "symmetrization": 1e-10,
    "model_disc": 1e-12,
    "contraction": 0.2,
    "cr": 1e-6,
    "attachment": 1e-8,
    "containment": 1e-10,
    "resolutions": 1e-6,
    "perturbation": (0.3, 0.7),
    "covering_residual": 1e-8,
    "round_trip": 1e-8,
    "levi_norm2": 1e-8,
    "levi_disc": 1e-3,
    "structure_round_trip": 1e-10,
    "normalized_jet": 1e-8,
    "dilation_ratio": (0.4, 0.6),
}

SEED = 42
STOCK = bishop.stock_structure()


def _line(k, title, passed, detail):
    return f"criterion {k} {'PASS' if passed else 'FAIL'}: {title} | {detail}"


def _emit(capsys, line):
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)


def _sum_x2(n):
    out = Poly(n)
    for k in range(n):
        out = out + Poly.x(k, n) ** 2
    return out


def _norm2(n):
    out = Poly(n)
    for k in range(n):
        out = out + Poly.z(k, n) * Poly.zbar(k, n)
    return out


def _random_poly(rng, deg=4):
    terms = [(a, b, complex(rng.normal(), rng.normal())) for a in range(deg + 1) for b in range(deg + 1 - a)]
    return lambda z: sum(c * z ** a * np.conj(z) ** b for a, b, c in terms)


# ---------------------------------------------------------------------------


def criterion_1():
    rng = np.random.default_rng(SEED)
    grid = DiscGrid.make(32, 128)
    th = grid.theta
    deg = grid.n_theta // 4
    m = np.arange(deg + 1)
    s_err = 0.0
    for _ in range(20):
        phi = rng.normal(size=deg + 1) @ np.cos(np.outer(m, th)) + rng.normal(size=deg + 1) @ np.sin(np.outer(m, th))
        pts = np.sqrt(rng.uniform(size=16)) * np.exp(2j * np.pi * rng.uniform(size=16))
        lhs = ops.schwarz_transform(grid, phi, pts)
        rhs = 2 * ops.cauchy_transform(grid, phi, pts) - ops.mean_p0(phi)
        s_err = max(s_err, float(np.max(np.abs(lhs - rhs))))
    zeta = grid.zeta
    one = np.ones_like(zeta)
    inside = np.sqrt(rng.uniform(size=16)) * np.exp(2j * np.pi * rng.uniform(size=16))
    outside = (1.2 + 2 * rng.uniform(size=16)) * np.exp(2j * np.pi * rng.uniform(size=16))
    e_in = float(np.max(np.abs(ops.cauchy_green_transform(grid, one) - np.conj(zeta))))
    e_in = max(e_in, float(np.max(np.abs(ops.cauchy_green_transform(grid, one, inside) - np.conj(inside)))))
    e_out = float(np.max(np.abs(ops.cauchy_green_transform(grid, one, outside) - 1 / outside)))
    e_conj = float(np.max(np.abs(ops.cauchy_green_transform(grid, np.conj(zeta)) - np.conj(zeta) ** 2 / 2)))

    f = _random_poly(np.random.default_rng(5))
    pts = 0.7 * np.sqrt(rng.uniform(size=8)) * np.exp(2j * np.pi * rng.uniform(size=8))
    errors = []
    for n_r in (12, 24, 48):
        g = DiscGrid.make(n_r, 64)
        vals = f(g.zeta)
        h = 1.0 / n_r
        T = lambda q: ops.cauchy_green_transform(g, vals, q)
        dbar = 0.5 * ((T(pts + h) - T(pts - h)) + 1j * (T(pts + 1j * h) - T(pts - 1j * h))) / (2 * h)
        errors.append(float(np.max(np.abs(dbar - f(pts)))))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    order_ok = bool(np.all(orders >= TOL["dbar_order"]))
    passed = (s_err < TOL["schwarz_identity"] and e_in < TOL["T_one_interior"] and e_out < TOL["T_one_exterior"]
              and e_conj < TOL["T_conj"] and order_ok)
    detail = (f"S identity {s_err:.1e}, T(1) in {e_in:.1e} out {e_out:.1e}, T(conj) {e_conj:.1e}, "
              f"dbar errors {[f'{e:.1e}' for e in errors]} orders {[round(float(o), 4) for o in orders]}")
    return passed, "operator identities", detail


def criterion_2():
    grid = DiscGrid.make(32, 128)
    z = grid.zeta
    e_holo = float(np.max(np.abs(ops.green_schwarz_reconstruct(grid, z ** 3) - z ** 3)))
    errs = []
    for n_r in (12, 24, 48):
        g = DiscGrid.make(n_r, 256)
        f = np.conj(g.zeta) ** 2
        errs.append(float(np.max(np.abs(ops.green_schwarz_reconstruct(g, f, method="subtract") - f))))
    monotone = errs[0] > errs[1] > errs[2]
    rng = np.random.default_rng(SEED)
    sym = max(ops.symmetrization_residual(grid, _random_poly(rng, 3)(z)) for _ in range(5))
    passed = e_holo < TOL["gs_holomorphic"] and monotone and sym < TOL["symmetrization"]
    detail = f"zeta^3 error {e_holo:.1e}, conj(zeta)^2 errors {[f'{e:.1e}' for e in errs]}, symmetrization {sym:.1e}"
    return passed, "Green-Schwarz reconstruction", detail


def criterion_3():
    params0 = DiscFamilyParams([0.1], [0.7], 0.0)
    d0 = solve_bishop(STOCK, params0)
    e0 = float(np.max(np.abs(d0.z - model_disc(params0).z)))
    params = DiscFamilyParams([0.0], [1.0], 0.05)
    d = solve_bishop(STOCK, params)
    r = d.residuals
    hi = solve_bishop(STOCK, params, DiscGrid.make(96, 1024))
    res_gap = float(abs(d.center[0] - hi.center[0]))
    passed = (e0 < TOL["model_disc"] and d0.iterations == 1 and d.contraction_ratio < TOL["contraction"]
              and r["cr"] < TOL["cr"] and r["attachment"] < TOL["attachment"]
              and r["containment"] <= TOL["containment"] and res_gap < TOL["resolutions"])
    detail = (f"lam=0: {d0.iterations} iteration, error {e0:.1e}; lam=0.05: q {d.contraction_ratio:.3f}, "
              f"CR {r['cr']:.1e}, attachment {r['attachment']:.1e}, max Re z {r['containment']:.1e}, "
              f"z(0) gap 64x512 vs 96x1024 {res_gap:.1e}")
    return passed, "Bishop solver", detail


def criterion_4():
    base = solve_bishop(STOCK, DiscFamilyParams([0.0], [1.0], 0.0))
    dist = {lam: bishop.sup_distance(solve_bishop(STOCK, DiscFamilyParams([0.0], [1.0], lam)), base)
            for lam in (0.05, 0.025)}
    ratio = dist[0.025] / dist[0.05]
    lo, hi = TOL["perturbation"]
    return lo <= ratio <= hi, "perturbation scaling", f"ratio {ratio:.4f} in [{lo}, {hi}]"


def criterion_5():
    rep = family.covering_check(STOCK, 0.3, 100, 0.05, seed=SEED, accept_tol=TOL["covering_residual"])
    trip = 0.0
    for h in rep.hits:
        p = np.array([complex(*v) for v in h["target"]])
        back = family.evaluation_map(STOCK, DiscFamilyParams(h["c"], h["t"], 0.05))
        trip = max(trip, float(np.max(np.abs(back - p))))
    passed = len(rep.hits) == 100 and rep.miss_count == 0 and trip < TOL["round_trip"]
    detail = (f"{len(rep.hits)}/100 hits, max residual {rep.max_residual:.1e}, min t {rep.to_dict()['min_t']:.2e}, "
              f"round trip {trip:.1e}")
    return passed, "covering", detail


def criterion_6():
    rng = np.random.default_rng(SEED)
    V = rng.normal(size=2) + 1j * rng.normal(size=2)
    V /= np.linalg.norm(V)
    p = 0.1 * (rng.normal(size=2) + 1j * rng.normal(size=2))
    e_norm = abs(psh.levi_form(psh.ScalarField.from_poly(_norm2(2)), p, V) - 4)

    u = psh.ScalarField.from_poly(_sum_x2(1))
    lam = 0.05
    A_lam = dilate_structure(STOCK, lam)
    gaps = []
    for _ in range(3):
        q = 0.1 * rng.uniform() * np.exp(2j * np.pi * rng.uniform(size=1))
        W = np.exp(2j * np.pi * rng.uniform(size=1))
        exact = psh.levi_form(u, q, W, A_lam)
        gaps.append([abs(psh.levi_form_via_disc(u, q, W, A_lam, r0).value - exact) for r0 in (0.01, 0.005)])
    gaps = np.array(gaps)
    levi_ok = bool(np.all(gaps[:, 0] < TOL["levi_disc"]) and np.all(gaps[:, 1] < gaps[:, 0]))

    flat = flatten_edge(WedgeSpec.flat(1, 0.0, 1.0), STOCK)
    pts = 0.05 * (rng.normal(size=(32, 1)) + 1j * rng.normal(size=(32, 1)))
    pts.real = -np.abs(pts.real)
    cert = psh.psh_certificate(u, pts, dilate_structure(flat.field, lam))
    neg = psh.psh_certificate(psh.ScalarField.from_poly(-1 * _norm2(2)), 0.05 * (rng.normal(size=(8, 2)) + 0j))
    passed = (e_norm < TOL["levi_norm2"] and levi_ok and cert.verdict == "strictly psh"
              and neg.verdict == "not psh")
    detail = (f"|z|^2 Levi error {e_norm:.1e}, disc gaps r0=0.01 {np.max(gaps[:, 0]):.1e} r0=0.005 "
              f"{np.max(gaps[:, 1]):.1e}, sum x^2 '{cert.verdict}' (min {cert.min_eigenvalue:.3f}), "
              f"-|z|^2 '{neg.verdict}'")
    return passed, "psh machinery", detail


def criterion_7(tmp_dir):
    lam = 0.05
    u = psh.ScalarField.from_poly(_sum_x2(1))
    A_lam = dilate_structure(STOCK, lam)
    sw = family.sweep(STOCK, lam, c_count=3, t_count=3)
    violations = 0
    certified = True
    for d in sw.discs:
        pts = d.points()[::8, ::32].reshape(-1, 1)
        certified &= psh.psh_certificate(u, pts, A_lam).verdict == "strictly psh"
        violations += psh.subharmonic_composition_check(u, d).mean_value_violations
    grid = DiscGrid.make()
    v = np.where(grid.upper_arc, -1000.0, -0.25)
    b = [psh.boundary_uniqueness_bound(v, M, grid)["bound"] for M in (10.0, 100.0, 1000.0)]
    slope = (b[2] - b[1]) / 900.0

    cfg = cli.parse_config({"sweep": {"c_count": 1, "t_count": 2}}, seed=SEED)
    status, _ = cli.run_command("uniqueness-demo", cfg, tmp_dir)
    report = json.loads((tmp_dir / "uniqueness-demo.json").read_text())
    demo_ok = status == 0
    for entry in report["results"]["discs"]:
        ms = [x["M"] for x in entry["bounds"]]
        bs = [x["bound"] for x in entry["bounds"]]
        consts = [bb + m / 2 for m, bb in zip(ms, bs)]
        demo_ok &= ms == [10.0, 100.0, 1000.0] and bs[0] > bs[1] > bs[2]
        demo_ok &= max(consts) - min(consts) < 1e-12
    passed = (len(sw.discs) == 9 and not sw.failures and certified and violations == 0 and slope == -0.5
              and demo_ok)
    detail = (f"{len(sw.discs)} discs, {violations} sub-mean-value violations, slope {slope!r}, "
              f"demo B(M) {[round(x['bound'], 6) for x in report['results']['discs'][0]['bounds']]}")
    return passed, "uniqueness mechanism", detail


def criterion_8():
    rng = np.random.default_rng(SEED)
    trip = 0.0
    for n in (1, 2, 3):
        for _ in range(20):
            A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            A *= 0.9 * rng.uniform() / np.linalg.norm(A, 2)
            trip = max(trip, float(np.max(np.abs(complex_matrix_from_structure(structure_from_complex_matrix(A))
                                                 - A))))
    jets = []
    for seed in (11, 12, 13):
        r = np.random.default_rng(seed)
        n = 2
        entries = []
        for _ in range(n):
            row = []
            for _ in range(n):
                p = Poly(n)
                for k in range(n):
                    p = p + complex(0.2 * (r.normal() + 1j * r.normal())) * Poly.z(k, n)
                    p = p + complex(0.2 * (r.normal() + 1j * r.normal())) * Poly.zbar(k, n)
                    for m in range(n):
                        p = p + complex(0.1 * (r.normal() + 1j * r.normal())) * Poly.z(k, n) * Poly.zbar(m, n)
                row.append(p)
            entries.append(row)
        _, An = normalize_structure(ComplexMatrixField.from_polys(entries))
        jets.append(z_jet_residual(An))
    A = ComplexMatrixField.from_polys([[Poly.zbar(0, 1) + Poly.z(0, 1) ** 2]])
    pts = (np.sqrt(rng.uniform(size=400)) * np.exp(2j * np.pi * rng.uniform(size=400)))[:, None]
    sup = {lam: float(np.max(np.abs(dilate_structure(A, lam)(pts)))) for lam in (0.1, 0.05, 0.025)}
    ratios = [sup[0.05] / sup[0.1], sup[0.025] / sup[0.05]]
    lo, hi = TOL["dilation_ratio"]
    passed = (trip < TOL["structure_round_trip"] and max(jets) < TOL["normalized_jet"]
              and all(lo <= x <= hi for x in ratios))
    detail = (f"J<->A round trip {trip:.1e}, normalized z-jets {[f'{j:.1e}' for j in jets]}, "
              f"dilation ratios {[round(x, 4) for x in ratios]}")
    return passed, "structure algebra", detail


def _check(k, capsys, *args):
    passed, title, detail = CRITERIA[k](*args)
    _emit(capsys, _line(k, title, passed, detail))
    assert passed, detail


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
            7: criterion_7, 8: criterion_8}


def test_criterion_1_operator_identities(capsys):
    _check(1, capsys)


def test_criterion_2_green_schwarz(capsys):
    _check(2, capsys)


def test_criterion_3_bishop_solver(capsys):
    _check(3, capsys)


def test_criterion_4_perturbation_scaling(capsys):
    _check(4, capsys)


def test_criterion_5_covering(capsys):
    _check(5, capsys)


def test_criterion_6_psh_machinery(capsys):
    _check(6, capsys)


def test_criterion_7_uniqueness(capsys, tmp_path):
    _check(7, capsys, tmp_path)


def test_criterion_8_structure_algebra(capsys):
    _check(8, capsys)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failed = 0
    for k, fn in CRITERIA.items():
        with tempfile.TemporaryDirectory() as tmp:
            passed, title, detail = fn(Path(tmp)) if k == 7 else fn()
        print(_line(k, title, passed, detail))
        failed += not passed
    sys.exit(1 if failed else 0)
