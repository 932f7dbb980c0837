"""Polynomials in holomorphic variables Z and their conjugates.

A polynomial is a finite sum  c * Z^a * conj(Z)^b  stored as a dict keyed by
the exponent pair (a, b).  Defining functions of hypersurfaces and the
components of holomorphic maps are both represented this way.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

Key = Tuple[Tuple[int, ...], Tuple[int, ...]]


def _clean(terms: Dict[Key, complex], drop: float = 0.0) -> Dict[Key, complex]:
    return {k: complex(v) for k, v in terms.items() if abs(v) > drop}


@dataclass(frozen=True)
class PolynomialSpec:
    num_complex_vars: int
    monomials: Tuple[Tuple[complex, Tuple[int, ...], Tuple[int, ...]], ...] = field(default=())

    def __post_init__(self):
        seen = set()
        mons = []
        for coef, za, zb in self.monomials:
            za, zb = tuple(int(e) for e in za), tuple(int(e) for e in zb)
            if len(za) != self.num_complex_vars or len(zb) != self.num_complex_vars:
                raise ValueError("exponent vector length does not match num_complex_vars")
            if min(za + zb, default=0) < 0:
                raise ValueError("negative exponent")
            if (za, zb) in seen:
                raise ValueError(f"duplicate monomial {za},{zb}")
            seen.add((za, zb))
            mons.append((complex(coef), za, zb))
        object.__setattr__(self, "monomials", tuple(mons))

    # -- construction -----------------------------------------------------
    @classmethod
    def from_terms(cls, n: int, terms: Dict[Key, complex]) -> "PolynomialSpec":
        items = sorted(_clean(terms).items())
        return cls(n, tuple((c, a, b) for (a, b), c in items))

    @classmethod
    def constant(cls, n: int, c: complex) -> "PolynomialSpec":
        z = (0,) * n
        return cls.from_terms(n, {(z, z): c})

    @classmethod
    def z(cls, n: int, k: int) -> "PolynomialSpec":
        e = tuple(int(i == k) for i in range(n))
        return cls.from_terms(n, {(e, (0,) * n): 1.0})

    @classmethod
    def zbar(cls, n: int, k: int) -> "PolynomialSpec":
        e = tuple(int(i == k) for i in range(n))
        return cls.from_terms(n, {((0,) * n, e): 1.0})

    @classmethod
    def sphere(cls, n: int, radius: float = 1.0) -> "PolynomialSpec":
        """sum |Z_k|^2 - radius^2."""
        p = cls.constant(n, -radius**2)
        for k in range(n):
            p = p + cls.z(n, k) * cls.zbar(n, k)
        return p

    def terms(self) -> Dict[Key, complex]:
        return {(a, b): c for c, a, b in self.monomials}

    # -- algebra ----------------------------------------------------------
    def _coerce(self, other) -> "PolynomialSpec":
        if isinstance(other, PolynomialSpec):
            if other.num_complex_vars != self.num_complex_vars:
                raise ValueError("variable count mismatch")
            return other
        return PolynomialSpec.constant(self.num_complex_vars, complex(other))

    def __add__(self, other):
        other = self._coerce(other)
        t = dict(self.terms())
        for k, v in other.terms().items():
            t[k] = t.get(k, 0) + v
        return PolynomialSpec.from_terms(self.num_complex_vars, t)

    __radd__ = __add__

    def __neg__(self):
        return PolynomialSpec.from_terms(self.num_complex_vars, {k: -v for k, v in self.terms().items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        t: Dict[Key, complex] = {}
        for (a1, b1), c1 in self.terms().items():
            for (a2, b2), c2 in other.terms().items():
                k = (tuple(x + y for x, y in zip(a1, a2)), tuple(x + y for x, y in zip(b1, b2)))
                t[k] = t.get(k, 0) + c1 * c2
        return PolynomialSpec.from_terms(self.num_complex_vars, t)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        out = PolynomialSpec.constant(self.num_complex_vars, 1.0)
        for _ in range(int(e)):
            out = out * self
        return out

    def conj(self) -> "PolynomialSpec":
        """Complex conjugate function: swaps Z and conj(Z) exponents."""
        return PolynomialSpec.from_terms(
            self.num_complex_vars, {(b, a): np.conj(c) for (a, b), c in self.terms().items()})

    def d_z(self, j: int) -> "PolynomialSpec":
        t = {}
        for (a, b), c in self.terms().items():
            if a[j]:
                a2 = a[:j] + (a[j] - 1,) + a[j + 1:]
                t[(a2, b)] = c * a[j]
        return PolynomialSpec.from_terms(self.num_complex_vars, t)

    def d_zbar(self, k: int) -> "PolynomialSpec":
        t = {}
        for (a, b), c in self.terms().items():
            if b[k]:
                b2 = b[:k] + (b[k] - 1,) + b[k + 1:]
                t[(a, b2)] = c * b[k]
        return PolynomialSpec.from_terms(self.num_complex_vars, t)

    def is_holomorphic(self) -> bool:
        return all(sum(b) == 0 for _, _, b in self.monomials)

    def is_real(self, tol: float = 1e-14) -> bool:
        t, tc = self.terms(), self.conj().terms()
        keys = set(t) | set(tc)
        return all(abs(t.get(k, 0) - tc.get(k, 0)) <= tol for k in keys)

    def degree(self) -> int:
        return max((sum(a) + sum(b) for _, a, b in self.monomials), default=0)

    def compose(self, maps: Sequence["PolynomialSpec"]) -> "PolynomialSpec":
        """Substitute holomorphic polynomials for the Z variables (and their
        conjugates for conj(Z)).  Result lives in the variables of `maps`."""
        if len(maps) != self.num_complex_vars:
            raise ValueError("need one map component per variable")
        m = maps[0].num_complex_vars
        conjs = [f.conj() for f in maps]
        out = PolynomialSpec.constant(m, 0.0)
        for c, a, b in self.monomials:
            term = PolynomialSpec.constant(m, c)
            for k in range(self.num_complex_vars):
                if a[k]:
                    term = term * maps[k] ** a[k]
                if b[k]:
                    term = term * conjs[k] ** b[k]
            out = out + term
        return out

    # -- evaluation -------------------------------------------------------
    def __call__(self, z: Sequence[complex]) -> complex:
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)
        return complex(sum(c * np.prod(z**np.array(a)) * np.prod(zb**np.array(b))
                           for c, a, b in self.monomials))

    def evaluate_jets(self, Z, Zbar):
        """Evaluate with jet-valued arguments (lists of scalar Jets)."""
        from .jets import Jet
        ctx = Z[0].ctx
        cache: Dict[Tuple[int, int, int], Jet] = {}

        def power(k, conj, e):
            key = (k, conj, e)
            if key not in cache:
                base = Zbar[k] if conj else Z[k]
                cache[key] = base if e == 1 else power(k, conj, e - 1) * base
            return cache[key]

        out = Jet.constant(ctx, 0.0, trusted=min(j.trusted for j in list(Z) + list(Zbar)))
        for c, a, b in self.monomials:
            term = None
            for k in range(self.num_complex_vars):
                for conj, e in ((0, a[k]), (1, b[k])):
                    if e:
                        p = power(k, conj, e)
                        term = p if term is None else term * p
            out = out + (c if term is None else term * c)
        return out

    # -- serialization ----------------------------------------------------
    def to_records(self):
        return [{"re": c.real, "im": c.imag, "z_exponents": list(a), "zbar_exponents": list(b)}
                for c, a, b in self.monomials]

    @classmethod
    def from_records(cls, n: int, records: Iterable[dict]) -> "PolynomialSpec":
        mons = []
        for i, r in enumerate(records):
            try:
                mons.append((complex(r["re"], r.get("im", 0.0)), tuple(r["z_exponents"]),
                             tuple(r["zbar_exponents"])))
            except KeyError as exc:
                raise ValueError(f"monomial record {i}: missing field {exc}") from None
        return cls(n, tuple(mons))
