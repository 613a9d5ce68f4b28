"""Polynomials in (z, zbar) with complex coefficients.

A term is keyed by a pair of exponent tuples ``(a, b)`` meaning
``z_1^a_1 ... z_n^a_n * conj(z_1)^b_1 ... conj(z_n)^b_n``.  Real-valued
functions on R^2n (defining functions, potentials) use the same
representation; :meth:`Poly.is_real` checks Hermitian symmetry.

Monomial strings follow the config format, e.g. ``"z1^2 zb2"``; the empty
string or ``"1"`` is the constant monomial.
"""

from __future__ import annotations

import re
from typing import Iterable, Mapping

import numpy as np

_TOKEN = re.compile(r"^(zb|z|x|y)(\d+)(?:\^(\d+))?$")


class PolyParseError(ValueError):
    pass


class Poly:
    """Sparse polynomial in n complex variables and their conjugates."""

    __slots__ = ("n", "terms", "_cache")

    def __init__(self, n: int, terms: Mapping | None = None):
        self.n = int(n)
        clean = {}
        for (a, b), c in (terms or {}).items():
            a, b = tuple(int(v) for v in a), tuple(int(v) for v in b)
            if len(a) != self.n or len(b) != self.n:
                raise ValueError("exponent length does not match dimension")
            c = complex(c)
            if c != 0:
                clean[(a, b)] = clean.get((a, b), 0) + c
        self.terms = {k: v for k, v in clean.items() if v != 0}
        self._cache = None

    # construction -----------------------------------------------------
    @classmethod
    def const(cls, n, c=1.0):
        zero = (0,) * n
        return cls(n, {(zero, zero): c})

    @classmethod
    def z(cls, k, n):
        a = [0] * n
        a[k] = 1
        return cls(n, {(tuple(a), (0,) * n): 1.0})

    @classmethod
    def zbar(cls, k, n):
        b = [0] * n
        b[k] = 1
        return cls(n, {((0,) * n, tuple(b)): 1.0})

    @classmethod
    def x(cls, k, n):
        return 0.5 * (cls.z(k, n) + cls.zbar(k, n))

    @classmethod
    def y(cls, k, n):
        return -0.5j * (cls.z(k, n) - cls.zbar(k, n))

    @classmethod
    def from_dict(cls, n: int, spec: Mapping[str, object]) -> "Poly":
        """Parse ``{"z1^2 zb2": [re, im], ...}``; a bare number is a real coefficient.

        ``x1``/``y1`` tokens are also accepted and expanded into z, zbar.
        """
        out = cls(n)
        for key, coef in spec.items():
            if isinstance(coef, (list, tuple)):
                if len(coef) != 2:
                    raise PolyParseError(f"coefficient for {key!r} must be [re, im]")
                c = complex(float(coef[0]), float(coef[1]))
            elif isinstance(coef, (int, float)):
                c = complex(coef)
            else:
                raise PolyParseError(f"bad coefficient for {key!r}: {coef!r}")
            out = out + c * cls._parse_monomial(n, key)
        return out

    @classmethod
    def _parse_monomial(cls, n, key):
        key = key.strip()
        mono = cls.const(n)
        if key in ("", "1"):
            return mono
        for tok in key.replace("*", " ").split():
            m = _TOKEN.match(tok)
            if not m:
                raise PolyParseError(f"bad monomial token {tok!r} in {key!r}")
            kind, idx, power = m.group(1), int(m.group(2)), int(m.group(3) or 1)
            if not 1 <= idx <= n:
                raise PolyParseError(f"variable index {idx} out of range 1..{n} in {key!r}")
            base = {"z": cls.z, "zb": cls.zbar, "x": cls.x, "y": cls.y}[kind](idx - 1, n)
            mono = mono * base ** power
        return mono

    def to_dict(self) -> dict:
        out = {}
        for (a, b), c in sorted(self.terms.items()):
            toks = []
            for k in range(self.n):
                if a[k]:
                    toks.append(f"z{k + 1}" + (f"^{a[k]}" if a[k] > 1 else ""))
                if b[k]:
                    toks.append(f"zb{k + 1}" + (f"^{b[k]}" if b[k] > 1 else ""))
            out[" ".join(toks) or "1"] = [c.real, c.imag]
        return out

    # algebra ------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            return other
        return Poly.const(self.n, other)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0) + c
        return Poly(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.n, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(self.n, {k: c * complex(other) for k, c in self.terms.items()})
        other = self._coerce(other)
        terms = {}
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                key = (tuple(p + q for p, q in zip(a1, a2)), tuple(p + q for p, q in zip(b1, b2)))
                terms[key] = terms.get(key, 0) + c1 * c2
        return Poly(self.n, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(self.n)
        for _ in range(int(k)):
            out = out * self
        return out

    def conj(self) -> "Poly":
        return Poly(self.n, {(b, a): c.conjugate() for (a, b), c in self.terms.items()})

    def is_real(self, tol=1e-14) -> bool:
        diff = self - self.conj()
        return all(abs(c) <= tol for c in diff.terms.values())

    def degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    def truncate(self, degree: int) -> "Poly":
        return Poly(self.n, {k: c for k, c in self.terms.items() if sum(k[0]) + sum(k[1]) <= degree})

    def homogeneous(self, degree: int) -> "Poly":
        return Poly(self.n, {k: c for k, c in self.terms.items() if sum(k[0]) + sum(k[1]) == degree})

    def dz(self, k: int) -> "Poly":
        terms = {}
        for (a, b), c in self.terms.items():
            if a[k]:
                a2 = list(a)
                a2[k] -= 1
                terms[(tuple(a2), b)] = c * a[k]
        return Poly(self.n, terms)

    def dzbar(self, k: int) -> "Poly":
        terms = {}
        for (a, b), c in self.terms.items():
            if b[k]:
                b2 = list(b)
                b2[k] -= 1
                terms[(a, tuple(b2))] = c * b[k]
        return Poly(self.n, terms)

    def dx(self, k):
        return self.dz(k) + self.dzbar(k)

    def dy(self, k):
        return 1j * (self.dz(k) - self.dzbar(k))

    # evaluation ---------------------------------------------------------
    def _arrays(self):
        if self._cache is None:
            keys = list(self.terms)
            ea = np.array([k[0] for k in keys], dtype=int).reshape(len(keys), self.n)
            eb = np.array([k[1] for k in keys], dtype=int).reshape(len(keys), self.n)
            co = np.array([self.terms[k] for k in keys], dtype=complex)
            self._cache = (ea, eb, co)
        return self._cache

    def __call__(self, z) -> np.ndarray:
        """Evaluate at complex points ``z`` of shape (..., n)."""
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.n:
            raise ValueError(f"expected trailing dimension {self.n}, got {z.shape}")
        ea, eb, co = self._arrays()
        if co.size == 0:
            return np.zeros(z.shape[:-1], dtype=complex)
        zz = z[..., None, :]
        mono = np.prod(zz ** ea * np.conj(zz) ** eb, axis=-1)
        return mono @ co

    def real_eval(self, z) -> np.ndarray:
        return self(z).real

    def __repr__(self):
        return f"Poly(n={self.n}, {self.to_dict()})"


def poly_matrix_eval(entries: Iterable[Iterable[Poly]], z) -> np.ndarray:
    """Evaluate a nested list of polys into an array of shape (..., rows, cols)."""
    rows = [[p(z) for p in row] for row in entries]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)
