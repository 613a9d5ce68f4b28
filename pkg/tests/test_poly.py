import numpy as np
import pytest

from jdiscs.poly import Poly, PolyParseError, poly_matrix_eval


def test_parse_and_evaluate_monomials():
    p = Poly.from_dict(2, {"z1^2 zb2": [1.0, 2.0], "1": 3})
    z = np.array([0.3 + 0.1j, -0.2 + 0.4j])
    expected = (1 + 2j) * z[0] ** 2 * np.conj(z[1]) + 3
    assert abs(p(z) - expected) < 1e-15


def test_real_tokens_expand():
    p = Poly.from_dict(1, {"x1": 1, "y1^2": 1})
    z = np.array([0.3 - 0.7j])
    assert abs(p(z) - (0.3 + 0.49)) < 1e-15
    assert p.is_real()


@pytest.mark.parametrize("bad", [{"w1": 1}, {"z3": 1}, {"z1": [1, 2, 3]}, {"z1": "a"}])
def test_parse_errors(bad):
    with pytest.raises(PolyParseError):
        Poly.from_dict(2, bad)


def test_wirtinger_and_real_derivatives():
    z, zb = Poly.z(0, 1), Poly.zbar(0, 1)
    p = z * z * zb
    pt = np.array([0.4 + 0.3j])
    assert abs(p.dz(0)(pt) - 2 * pt[0] * np.conj(pt[0])) < 1e-15
    assert abs(p.dzbar(0)(pt) - pt[0] ** 2) < 1e-15
    h = 1e-6
    fd = (p(pt + h) - p(pt - h)) / (2 * h)
    assert abs(p.dx(0)(pt) - fd) < 1e-9


def test_round_trip_dict_and_truncation():
    p = Poly.from_dict(2, {"z1 zb1": [0.5, 0], "z2^3": [0, 1], "zb2": 2})
    q = Poly.from_dict(2, p.to_dict())
    pts = np.random.default_rng(0).normal(size=(5, 2)) + 0j
    assert np.allclose(p(pts), q(pts))
    assert p.degree() == 3
    assert p.truncate(2).degree() == 2


def test_matrix_eval_shape():
    ent = [[Poly.z(0, 2), Poly.const(2, 1.0)], [Poly.zbar(1, 2), Poly(2)]]
    out = poly_matrix_eval(ent, np.zeros((4, 3, 2), complex))
    assert out.shape == (4, 3, 2, 2)
    assert np.all(out[..., 0, 1] == 1)
