import numpy as np
import pytest

from jdiscs import bishop, psh
from jdiscs.bishop import DiscFamilyParams
from jdiscs.disc_ops import DiscGrid
from jdiscs.geometry import ComplexMatrixField, RealStructureField, dilate_structure, linear_matrix, to_real
from jdiscs.poly import Poly

STOCK = bishop.stock_structure()


def field(poly):
    return psh.ScalarField.from_poly(poly)


def norm2(n):
    out = Poly(n)
    for k in range(n):
        out = out + Poly.z(k, n) * Poly.zbar(k, n)
    return out


def sum_x2(n):
    out = Poly(n)
    for k in range(n):
        out = out + Poly.x(k, n) ** 2
    return out


def test_pluriharmonic_has_zero_levi_form():
    u = field(Poly.x(0, 2))
    rng = np.random.default_rng(0)
    for _ in range(5):
        p = rng.normal(size=2) + 1j * rng.normal(size=2)
        V = rng.normal(size=2) + 1j * rng.normal(size=2)
        assert abs(psh.levi_form(u, p, V)) < 1e-9


def test_norm_squared_levi_form():
    u = field(norm2(2))
    V = np.array([0.6, 0.8j])
    assert abs(psh.levi_form(u, [0.1, 0.2j], V) - 4) < 1e-8


def test_x_squared_levi_form():
    assert abs(psh.levi_form(field(Poly.x(0, 1) ** 2), [0.3 - 0.1j], [1.0]) - 2) < 1e-9


def test_levi_form_is_quadratic_in_V():
    u = field(sum_x2(1) + Poly.z(0, 1) ** 2 * Poly.zbar(0, 1) + Poly.zbar(0, 1) ** 2 * Poly.z(0, 1))
    p, V = [0.05 + 0.03j], [0.3 - 0.4j]
    base = psh.levi_form(u, p, V, STOCK)
    for s in (-2.0, 0.5, 3.0):
        assert abs(psh.levi_form(u, p, [s * V[0]], STOCK) - s ** 2 * base) < 1e-10


def test_holomorphic_linear_invariance():
    rng = np.random.default_rng(4)
    n = 2
    P = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    L = linear_matrix(P)
    u = field(norm2(n) + Poly.x(0, n) ** 2 + Poly.x(0, n) * Poly.y(1, n))
    composed = psh.ScalarField(n, lambda x: u.value(x @ L.T), lambda x: u.gradient(x @ L.T) @ L,
                               lambda x: L.T @ u.hessian(x @ L.T) @ L)
    p = np.array([0.1 + 0.2j, -0.3j])
    V = np.array([1.0, 0.5 - 0.5j])
    assert abs(psh.levi_form(composed, p, V) - psh.levi_form(u, P @ p, P @ V)) < 1e-9


def test_levi_form_accepts_real_structure_field():
    u = field(sum_x2(1))
    J = RealStructureField.from_complex_matrix_field(STOCK)
    p, V = [0.02 - 0.04j], [1.0]
    assert abs(psh.levi_form(u, p, V, J) - psh.levi_form(u, p, V, STOCK)) < 1e-12


def test_levi_via_disc_flat_case():
    u = field(norm2(2))
    V = np.array([0.3, 0.4j])
    res = psh.levi_form_via_disc(u, [0.1, -0.2j], V, ComplexMatrixField.zero(2), 0.01)
    assert abs(res.value - 4 * np.sum(np.abs(V) ** 2)) < 1e-8
    grid = DiscGrid.make(24, 64)
    expected = np.array([0.1, -0.2j])[:, None, None] + 0.01 * V[:, None, None] * grid.zeta[None]
    assert np.max(np.abs(res.disc - expected)) < 1e-15


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_levi_definitions_agree(seed):
    rng = np.random.default_rng(seed)
    u = field(sum_x2(1))
    p = 0.1 * rng.uniform() * np.exp(2j * np.pi * rng.uniform(size=1))
    V = np.exp(2j * np.pi * rng.uniform(size=1))
    exact = psh.levi_form(u, p, V, STOCK)
    d1 = abs(psh.levi_form_via_disc(u, p, V, STOCK, 0.01).value - exact)
    d2 = abs(psh.levi_form_via_disc(u, p, V, STOCK, 0.005).value - exact)
    assert d1 < 1e-3
    assert d2 < d1
    assert np.log2(d1 / d2) >= 1.0


def test_certificate_examples():
    rng = np.random.default_rng(1)
    pts = 0.05 * (rng.normal(size=(16, 1)) + 1j * rng.normal(size=(16, 1)))
    pts.real = -np.abs(pts.real)
    A_lam = dilate_structure(STOCK, 0.05)
    rep = psh.psh_certificate(field(sum_x2(1)), pts, A_lam)
    assert rep.verdict == "strictly psh" and rep.min_eigenvalue > 1
    neg = psh.psh_certificate(field(-norm2(2)), np.zeros((3, 2)))
    assert neg.verdict == "not psh"
    assert abs(neg.min_eigenvalue + 4) < 1e-8
    flat = psh.psh_certificate(field(Poly.x(0, 2)), np.ones((3, 2)) * 0.1j)
    assert flat.verdict == "psh"
    assert abs(flat.min_eigenvalue) < 1e-8


def test_certificate_accepts_real_points():
    rep = psh.psh_certificate(field(norm2(1)), to_real(np.array([[0.1 + 0.1j], [0.2j]])))
    assert rep.min_eigenvalues.shape == (2,)


def test_harmonic_composition_has_equality():
    d = bishop.model_disc(DiscFamilyParams([0.1, 0.0], [1.0, 0.3]))
    u = field(Poly.x(0, 2) + Poly.x(1, 2))
    rep = psh.subharmonic_composition_check(u, d)
    assert rep.ok
    assert abs(rep.min_mean_margin) < 1e-8


def test_psh_composition_has_strict_margin():
    d = bishop.model_disc(DiscFamilyParams([0.0], [1.0]))
    rep = psh.subharmonic_composition_check(field(sum_x2(1)), d)
    assert rep.ok
    assert rep.min_mean_margin > 0
    assert rep.min_laplacian > 0


def test_negative_control_reports_violations():
    d = bishop.model_disc(DiscFamilyParams([0.0], [1.0]))
    rep = psh.subharmonic_composition_check(field(-sum_x2(1)), d)
    assert not rep.ok
    assert rep.mean_value_violations > 0 and rep.laplacian_violations > 0


def test_bishop_discs_have_no_violations_for_certified_u():
    u = field(sum_x2(1))
    A_lam = dilate_structure(STOCK, 0.05)
    for t, c in ((1.0, 0.0), (0.3, 0.05), (2.0, -0.1)):
        d = bishop.solve_bishop(STOCK, DiscFamilyParams([c], [t], 0.05))
        pts = d.points()[::8, ::32].reshape(-1, 1)
        assert psh.psh_certificate(u, pts, A_lam).verdict == "strictly psh"
        assert psh.subharmonic_composition_check(u, d).mean_value_violations == 0


def test_harmonic_measure():
    assert psh.harmonic_measure_upper(0.0) == 0.5
    zeta = 0.3 + 0.2j
    th = np.linspace(0, 2 * np.pi, 200000, endpoint=False)
    poisson = (1 - abs(zeta) ** 2) / np.abs(np.exp(1j * th) - zeta) ** 2
    assert abs(psh.harmonic_measure_upper(zeta) - np.mean(poisson * (th < np.pi))) < 1e-4


def test_uniqueness_bound_arithmetic():
    grid = DiscGrid.make(8, 64)
    v = np.where(grid.upper_arc, -100.0, 0.0)
    out = psh.boundary_uniqueness_bound(v, 10, grid)
    assert out["bound"] == -5.0
    b1 = psh.boundary_uniqueness_bound(v, 100, grid)["bound"]
    b2 = psh.boundary_uniqueness_bound(v, 1000, grid)["bound"]
    assert (b2 - b1) / 900 == -0.5


def test_uniqueness_bound_on_harmonic_data():
    grid = DiscGrid.make(8, 64)
    v = np.cos(grid.theta)  # Re zeta on the circle, value 0 at the center
    out = psh.boundary_uniqueness_bound(v, 10, grid)
    assert 0.0 <= out["mean"] + 1e-15
    assert abs(out["mean"]) < 1e-15
    assert out["mean_truncated"] <= out["bound"]
