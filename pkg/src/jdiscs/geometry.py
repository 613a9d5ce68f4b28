"""Almost complex structures on a chart of C^n.

Real coordinates are interleaved, ``(x_1, y_1, ..., x_n, y_n)``, so the
standard structure is ``diag(J2, ..., J2)`` with ``J2 = [[0, -1], [1, 0]]``.

A structure is carried primarily by its complex matrix ``A(z)``: a map
``z`` is J-holomorphic iff ``z_zetabar = A(z) conj(z)_zetabar``.  With
``L = (J_st + J)^{-1} (J_st - J)`` one has ``L v = A conj(v)`` and
conversely ``J = J_st (I - L) (I + L)^{-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateDefiningFunction,
    InverseDidNotConverge,
    NormTooLarge,
    NotAStructure,
    NotCentered,
    NotConjugateLinear,
    NotTotallyReal,
    PshCertificationFailed,
    SingularJacobianFactor,
    SingularResolvent,
)
from .poly import Poly, poly_matrix_eval

STRUCTURE_TOL = 1e-10
NORMALIZATION_TOL = 1e-8
FD_STEP = 1e-5


# ---------------------------------------------------------------------------
# real <-> complex linear algebra


def j_standard(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, -1.0], [1.0, 0.0]]))


def to_real(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.stack([v.real, v.imag], axis=-1).reshape(v.shape[:-1] + (2 * v.shape[-1],))


def to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x = x.reshape(x.shape[:-1] + (x.shape[-1] // 2, 2))
    return x[..., 0] + 1j * x[..., 1]


def _blocks(b00, b01, b10, b11):
    # (..., n, n) blocks -> (..., 2n, 2n) interleaved real matrix
    blk = np.stack([np.stack([b00, b01], -1), np.stack([b10, b11], -1)], -2)  # (..., n, n, 2, 2)
    n = blk.shape[-3]
    blk = np.swapaxes(blk, -3, -2)  # (..., n, 2, n, 2)
    return blk.reshape(blk.shape[:-4] + (2 * n, 2 * n))


def linear_matrix(P) -> np.ndarray:
    """Real matrix of v -> P v."""
    P = np.asarray(P, dtype=complex)
    return _blocks(P.real, -P.imag, P.imag, P.real)


def antilinear_matrix(A) -> np.ndarray:
    """Real matrix of v -> A conj(v)."""
    A = np.asarray(A, dtype=complex)
    return _blocks(A.real, A.imag, A.imag, -A.real)


def _opnorm(A) -> np.ndarray:
    return np.linalg.norm(np.asarray(A, dtype=complex), ord=2, axis=(-2, -1))


# ---------------------------------------------------------------------------
# structure fields


@dataclass(frozen=True)
class ComplexMatrixField:
    """The complex matrix ``A(z)`` of an almost complex structure on a chart.

    ``A_at`` maps complex points of shape (..., n) to (..., n, n).  ``polys``
    keeps the polynomial entries when the field was given that way; derived
    fields (pushforwards, dilations) only carry the callable.
    """

    dim_n: int
    A_at: Callable[[np.ndarray], np.ndarray]
    domain_radius: float = math.inf
    polys: Optional[tuple] = None
    label: str = ""

    @classmethod
    def from_polys(cls, entries: Sequence[Sequence[Poly]], domain_radius=math.inf, label=""):
        entries = tuple(tuple(row) for row in entries)
        n = len(entries)
        if any(len(row) != n for row in entries):
            raise ValueError("complex matrix must be square")
        return cls(n, lambda z: poly_matrix_eval(entries, z), domain_radius, entries, label)

    @classmethod
    def zero(cls, n: int):
        return cls(n, lambda z: np.zeros(np.shape(z)[:-1] + (n, n), dtype=complex), label="standard")

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.asarray(self.A_at(z), dtype=complex)

    def J(self, x) -> np.ndarray:
        """Real structure at real points ``x`` of shape (..., 2n)."""
        return structure_from_complex_matrix(self(to_complex(x)))

    def derivatives(self, z0, h=FD_STEP):
        """Centered finite-difference Wirtinger derivatives at ``z0``.

        Returns ``(dA_dz, dA_dzbar)`` of shape (n, n, n): index ``[k]`` is the
        derivative in ``z_k`` (resp. ``conj z_k``).
        """
        z0 = np.asarray(z0, dtype=complex)
        n = self.dim_n
        dz = np.empty((n, n, n), dtype=complex)
        dzb = np.empty((n, n, n), dtype=complex)
        for k in range(n):
            e = np.zeros(n, dtype=complex)
            e[k] = h
            ax = (self(z0 + e) - self(z0 - e)) / (2 * h)
            ay = (self(z0 + 1j * e) - self(z0 - 1j * e)) / (2 * h)
            dz[k] = 0.5 * (ax - 1j * ay)
            dzb[k] = 0.5 * (ax + 1j * ay)
        return dz, dzb

    def is_normalized(self, tol=NORMALIZATION_TOL) -> bool:
        zero = np.zeros(self.dim_n, dtype=complex)
        if np.max(np.abs(self(zero))) > tol:
            return False
        dz, _ = self.derivatives(zero)
        return float(np.max(np.abs(dz))) < tol


@dataclass(frozen=True)
class RealStructureField:
    """``J`` as a 2n x 2n real matrix field on real points of shape (..., 2n)."""

    dim_n: int
    J_at: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_complex_matrix_field(cls, A: ComplexMatrixField):
        return cls(A.dim_n, A.J)

    @classmethod
    def standard(cls, n: int):
        js = j_standard(n)
        return cls(n, lambda x: np.broadcast_to(js, np.shape(x)[:-1] + js.shape).copy())

    def J(self, x) -> np.ndarray:
        return np.asarray(self.J_at(np.asarray(x, dtype=float)), dtype=float)

    def check(self, points, tol=STRUCTURE_TOL) -> float:
        """Max deviation of J^2 from -I over ``points``; raises NotAStructure above tol."""
        J = self.J(points)
        eye = np.eye(2 * self.dim_n)
        dev = float(np.max(np.abs(J @ J + eye)))
        if dev > tol:
            raise NotAStructure(f"J^2 + I has entry {dev:.3e} > {tol:.1e}", margin=dev)
        return dev


# ---------------------------------------------------------------------------
# A <-> J


def complex_matrix_from_structure(J, p=None, tol=STRUCTURE_TOL) -> np.ndarray:
    """Complex matrix ``A`` with ``L v = A conj(v)`` for ``L = (J_st + J)^{-1}(J_st - J)``.

    ``J`` is a real (..., 2n, 2n) array, or a :class:`RealStructureField`
    evaluated at the real point ``p``.
    """
    if isinstance(J, RealStructureField):
        J = J.J(p)
    J = np.asarray(J, dtype=float)
    m = J.shape[-1]
    n = m // 2
    eye = np.eye(m)
    dev = float(np.max(np.abs(J @ J + eye)))
    if dev > tol:
        raise NotAStructure(f"J^2 + I has entry {dev:.3e} > {tol:.1e}", margin=dev)
    jst = j_standard(n)
    resolvent = jst + J
    cond = np.linalg.cond(resolvent)
    if not np.all(np.isfinite(cond)) or np.max(cond) > 1e12:
        raise SingularResolvent("J_st + J is not invertible", margin=float(np.max(cond)))
    L = np.linalg.solve(resolvent, jst - J)
    anti = float(np.max(np.abs(L @ jst + jst @ L)))
    if anti > tol * max(1.0, float(np.max(np.abs(L)))) * 10:
        raise NotConjugateLinear(f"L J_st + J_st L has entry {anti:.3e}", margin=anti)
    return L[..., 0::2, 0::2] + 1j * L[..., 1::2, 0::2]


def structure_from_complex_matrix(A, p=None) -> np.ndarray:
    """Real structure ``J = J_st (I - L)(I + L)^{-1}`` with ``L v = A conj(v)``."""
    if isinstance(A, ComplexMatrixField):
        A = A(p)
    A = np.asarray(A, dtype=complex)
    norm = _opnorm(A)
    if np.any(norm >= 1.0):
        raise NormTooLarge(f"operator norm of A is {np.max(norm):.4f} >= 1", margin=float(np.max(norm)))
    n = A.shape[-1]
    L = antilinear_matrix(A)
    eye = np.eye(2 * n)
    # J = J_st (I - L)(I + L)^{-1}, via a right solve
    rhs = j_standard(n) @ (eye - L)
    return np.swapaxes(np.linalg.solve(np.swapaxes(eye + L, -1, -2), np.swapaxes(rhs, -1, -2)), -1, -2)


# ---------------------------------------------------------------------------
# polynomial diffeomorphisms


@dataclass(frozen=True)
class PolynomialDiffeo:
    """A polynomial map ``z -> Phi(z)`` of C^n with an invertible linear part at 0.

    ``inverse_hint`` (optional) is a truncated polynomial inverse used to seed
    the Newton inversion.
    """

    components: tuple
    inverse_hint: Optional[tuple] = None

    @property
    def dim_n(self) -> int:
        return len(self.components)

    @classmethod
    def identity(cls, n):
        comps = tuple(Poly.z(k, n) for k in range(n))
        return cls(comps, comps)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.stack([p(z) for p in self.components], axis=-1)

    def jacobians(self, z):
        """``(P, Q)`` with ``P[j, k] = d Phi_j / d z_k`` and ``Q[j, k] = d Phi_j / d conj(z_k)``."""
        n = self.dim_n
        z = np.asarray(z, dtype=complex)
        P = np.stack([np.stack([p.dz(k)(z) for k in range(n)], -1) for p in self.components], -2)
        Q = np.stack([np.stack([p.dzbar(k)(z) for k in range(n)], -1) for p in self.components], -2)
        return P, Q

    def real_jacobian(self, z) -> np.ndarray:
        P, Q = self.jacobians(z)
        return linear_matrix(P) + antilinear_matrix(Q)

    def inverse(self, w, tol=1e-14, max_iter=60) -> np.ndarray:
        """Solve ``Phi(z) = w`` by Newton's method (vectorized over points)."""
        w = np.asarray(w, dtype=complex)
        if self.inverse_hint is not None:
            z = np.stack([p(w) for p in self.inverse_hint], axis=-1)
        else:
            z = w.copy()
        scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
        for _ in range(max_iter):
            res = self(z) - w
            err = float(np.max(np.abs(res), initial=0.0))
            if err <= tol * scale:
                return z
            step = np.linalg.solve(self.real_jacobian(z), -to_real(res)[..., None])[..., 0]
            z = z + to_complex(step)
        res = float(np.max(np.abs(self(z) - w), initial=0.0))
        if res > 1e3 * tol * scale:
            raise InverseDidNotConverge(f"Newton inverse residual {res:.3e}", margin=res)
        return z

    def compose_after(self, other: "PolynomialDiffeo") -> "PolynomialDiffeo":
        """``self o other`` as a new diffeo (exact polynomial composition)."""
        n = self.dim_n
        subs_z = list(other.components)
        subs_zb = [p.conj() for p in subs_z]
        comps = []
        for p in self.components:
            acc = Poly(n)
            for (a, b), c in p.terms.items():
                term = Poly.const(n, c)
                for k in range(n):
                    term = term * subs_z[k] ** a[k] * subs_zb[k] ** b[k]
                acc = acc + term
            comps.append(acc)
        return PolynomialDiffeo(tuple(comps))


# ---------------------------------------------------------------------------
# transformation rule, pushforward, normalization, dilation


def transform_complex_matrix(A: ComplexMatrixField, phi: PolynomialDiffeo, zp) -> np.ndarray:
    """Complex matrix of ``phi_*(J)`` at the new-coordinate point ``zp``.

    ``A' = (P A + Q)(conj(P) + conj(Q) A)^{-1}`` evaluated at ``z = phi^{-1}(zp)``.
    """
    z = phi.inverse(zp)
    P, Q = phi.jacobians(z)
    Az = A(z)
    num = P @ Az + Q
    den = np.conj(P) + np.conj(Q) @ Az
    cond = np.linalg.cond(den)
    if not np.all(np.isfinite(cond)) or np.max(cond) > 1e12:
        raise SingularJacobianFactor("conj(P) + conj(Q) A is singular", margin=float(np.max(cond)))
    # num @ den^{-1}
    return np.swapaxes(np.linalg.solve(np.swapaxes(den, -1, -2), np.swapaxes(num, -1, -2)), -1, -2)


def pushforward_field(A: ComplexMatrixField, phi: PolynomialDiffeo, label="") -> ComplexMatrixField:
    """Field of ``phi_*(J)`` evaluated exactly (pointwise Newton inverse, no truncation)."""
    return ComplexMatrixField(A.dim_n, lambda zp: transform_complex_matrix(A, phi, zp),
                              A.domain_radius, None, label or f"pushforward({A.label})")


def pushforward_structure(J: np.ndarray, phi: PolynomialDiffeo, z) -> np.ndarray:
    """``d phi J d phi^{-1}`` at the source point ``z`` (independent route for checks)."""
    D = phi.real_jacobian(z)
    return D @ J @ np.linalg.inv(D)


def normalize_structure(A: ComplexMatrixField, tol=NORMALIZATION_TOL):
    """Remove the z-linear part of A at the origin.

    Uses ``Phi_j(z) = z_j - sum_{k,l} dA_{jl}/dz_k(0) z_k conj(z_l)`` and returns
    ``(Phi, A')`` with ``A' = Phi_*(A)``.  The result is checked with finite
    differences; a residual above ``tol`` raises :class:`NotCentered` only for
    the precondition, otherwise it is left for the caller to read off via
    :func:`z_jet_residual`.
    """
    n = A.dim_n
    zero = np.zeros(n, dtype=complex)
    a0 = float(np.max(np.abs(A(zero))))
    if a0 > tol:
        raise NotCentered(f"A(0) has entry {a0:.3e}; translate so that J(0) = J_st first", margin=a0)
    if A.polys is not None:
        dz = np.array([[[complex(A.polys[j][l].dz(k)(zero)) for l in range(n)] for j in range(n)]
                       for k in range(n)])
    else:
        dz, _ = A.derivatives(zero)
    comps, hint = [], []
    for j in range(n):
        quad = Poly(n)
        for k in range(n):
            for l in range(n):
                if dz[k, j, l] != 0:
                    quad = quad + dz[k, j, l] * Poly.z(k, n) * Poly.zbar(l, n)
        comps.append(Poly.z(j, n) - quad)
        hint.append(Poly.z(j, n) + quad)
    phi = PolynomialDiffeo(tuple(comps), tuple(hint))
    return phi, pushforward_field(A, phi, label=f"normalized({A.label})")


def z_jet_residual(A: ComplexMatrixField) -> float:
    """Max entry of the finite-difference ``dA/dz_k(0)``."""
    dz, _ = A.derivatives(np.zeros(A.dim_n, dtype=complex))
    return float(np.max(np.abs(dz)))


def dilate_structure(A: ComplexMatrixField, lam: float) -> ComplexMatrixField:
    """Complex matrix of ``(d_lam)_* J`` for ``d_lam: z -> z / lam``, i.e. ``A(lam z)``."""
    lam = float(lam)
    if lam < 0:
        raise ValueError("dilation scale must be nonnegative")
    radius = math.inf if lam == 0 else A.domain_radius / lam
    return ComplexMatrixField(A.dim_n, lambda z: A(lam * np.asarray(z, dtype=complex)), radius,
                              None, f"dilate({A.label}, {lam:g})")


# ---------------------------------------------------------------------------
# wedges


@dataclass(frozen=True)
class WedgeSpec:
    """Defining functions of an edge ``{rho_j = 0}`` and wedge ``{rho_j < 0}``."""

    rho: tuple
    tau: float = 0.0
    big_c: float = 0.0
    delta: float = 0.3

    @property
    def dim_n(self) -> int:
        return len(self.rho)

    @classmethod
    def flat(cls, n, tau=0.0, big_c=0.0, delta=0.3):
        return cls(tuple(Poly.x(k, n) for k in range(n)), tau, big_c, delta)

    def truncated(self) -> tuple:
        """``rho_j - tau sum_{k != j} rho_k + C sum_k rho_k^2``."""
        n = self.dim_n
        sq = Poly(n)
        for r in self.rho:
            sq = sq + r * r
        out = []
        for j in range(n):
            others = Poly(n)
            for k in range(n):
                if k != j:
                    others = others + self.rho[k]
            out.append(self.rho[j] - self.tau * others + self.big_c * sq)
        return tuple(out)

    def values(self, z, truncated=False) -> np.ndarray:
        funcs = self.truncated() if truncated else self.rho
        return np.stack([f(z).real for f in funcs], axis=-1)

    def contains(self, z, truncated=False) -> np.ndarray:
        return np.all(self.values(z, truncated) < 0, axis=-1)

    def complex_gradients(self, z, truncated=False) -> np.ndarray:
        """``B[j, k] = 2 d rho_j / d z_k`` (so ``rho_j ~ Re (B z)_j`` to first order)."""
        funcs = self.truncated() if truncated else self.rho
        z = np.asarray(z, dtype=complex)
        return 2 * np.stack([np.stack([f.dz(k)(z) for k in range(self.dim_n)], -1) for f in funcs], -2)

    def check_edge(self, points) -> float:
        """Verify nonvanishing gradients and total reality at edge points; returns min |det B|."""
        B = self.complex_gradients(points)
        grad = np.min(np.linalg.norm(B, axis=-1))
        if grad < 1e-12:
            raise DegenerateDefiningFunction("a defining function has vanishing gradient on the edge",
                                             margin=float(grad))
        det = float(np.min(np.abs(np.linalg.det(B))))
        if det < 1e-10:
            raise NotTotallyReal("complex-linear parts of d rho_j are dependent", margin=det)
        return det


@dataclass
class FlatteningResult:
    phi: PolynomialDiffeo
    field: ComplexMatrixField
    wedge: WedgeSpec
    min_levi_eigenvalue: float
    certificate: object = field(default=None, repr=False)

    def __iter__(self):
        return iter((self.phi, self.field, self.wedge))


def flatten_edge(W: WedgeSpec, A: ComplexMatrixField, cert_radius=0.05, cert_samples=64,
                 margin=0.0, seed=0, certify=True) -> FlatteningResult:
    """Straighten the truncated wedge of ``W``.

    The composite map is ``Phi(z) = rho~(z) + i Im(B z)`` where ``B`` is the
    complex gradient of ``rho~`` at 0.  In the new coordinates the edge is
    ``i R^n`` and the truncated wedge is ``{x_j < 0}``.  When ``certify`` is
    set, each ``x_j`` must have a strictly positive Levi form for the pushed
    structure at ``cert_samples`` points in the ball of radius ``cert_radius``.
    """
    from . import psh

    n = W.dim_n
    zero = np.zeros(n, dtype=complex)
    rho0 = W.values(zero)
    if np.max(np.abs(rho0)) > 1e-12:
        raise NotCentered("edge does not pass through the origin", margin=float(np.max(np.abs(rho0))))
    W.check_edge(zero)
    a0 = float(np.max(np.abs(A(zero))))
    if a0 > NORMALIZATION_TOL:
        raise NotCentered(f"A(0) has entry {a0:.3e}", margin=a0)

    tilde = W.truncated()
    B = W.complex_gradients(zero, truncated=True)
    if abs(np.linalg.det(B)) < 1e-10:
        raise NotTotallyReal("truncated defining functions are not totally real at 0",
                             margin=float(abs(np.linalg.det(B))))
    comps = []
    for j in range(n):
        lin = Poly(n)
        for k in range(n):
            lin = lin + complex(B[j, k]) * Poly.z(k, n)
        im_part = 0.5 * (lin - lin.conj())  # i Im(Bz)_j
        comps.append(tilde[j] + im_part)
    Binv = np.linalg.inv(B)
    hint = []
    for j in range(n):
        h = Poly(n)
        for k in range(n):
            h = h + complex(Binv[j, k]) * Poly.z(k, n)
        hint.append(h)
    phi = PolynomialDiffeo(tuple(comps), tuple(hint))
    pushed = pushforward_field(A, phi, label=f"flattened({A.label})")
    flat = WedgeSpec.flat(n, W.tau, W.big_c, W.delta)

    min_eig = math.nan
    report = None
    if certify:
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(cert_samples, 2 * n))
        pts *= cert_radius * rng.uniform(size=(cert_samples, 1)) ** (1 / (2 * n)) / np.linalg.norm(
            pts, axis=1, keepdims=True)
        J = RealStructureField.from_complex_matrix_field(pushed)
        min_eig = math.inf
        for j in range(n):
            report = psh.psh_certificate(psh.ScalarField.from_poly(Poly.x(j, n)), pts, J)
            min_eig = min(min_eig, report.min_eigenvalue)
        if not min_eig > margin:
            raise PshCertificationFailed(
                f"coordinate functions are not strictly psh (min Levi eigenvalue {min_eig:.3e}); "
                "enlarge C or shrink the chart", margin=min_eig)
    return FlatteningResult(phi, pushed, flat, min_eig, report)
