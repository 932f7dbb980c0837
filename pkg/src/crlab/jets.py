"""Truncated multivariate Taylor series ("jets") with array support.

A Jet holds an array of germs at a base point.  Coefficients live in the last
axis, indexed by monomials of total degree <= K sorted by degree, so the
monomials of degree <= r always form a prefix of length ``ctx.size(r)``.

Every jet carries a ``trusted`` order r <= K.  Coefficients above r are kept
at zero.  Differentiation lowers r by one and products take the minimum, so
truncation error never leaks silently into later results: a quantity that
is evaluated at the base point only needs ``trusted >= 0``.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .polynomial import PolynomialSpec

# rows * pairs processed per chunk in products
_CHUNK = 3_000_000


class JetError(ValueError):
    pass


class JetContext:
    """Monomial bookkeeping for jets in ``num_vars`` real variables up to ``order``."""

    def __init__(self, num_vars: int, order: int):
        if num_vars < 1 or order < 0:
            raise JetError("need num_vars >= 1 and order >= 0")
        self.num_vars = int(num_vars)
        self.order = int(order)
        exps = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(num_vars), d):
                exps.append(np.bincount(np.array(combo, dtype=int), minlength=num_vars)
                            if d else np.zeros(num_vars, dtype=int))
        self.exponents = np.array(exps, dtype=int).reshape(-1, num_vars)
        self.degrees = self.exponents.sum(axis=1)
        self.N = len(self.exponents)
        self._ends = np.searchsorted(self.degrees, np.arange(order + 1), side="right")
        self._radix = (order + 1) ** np.arange(num_vars)
        keys = self.exponents @ self._radix
        self._key_order = np.argsort(keys)
        self._sorted_keys = keys[self._key_order]
        self._mul = {}
        self._deriv = {}

    def __repr__(self):
        return f"JetContext(num_vars={self.num_vars}, order={self.order})"

    def __eq__(self, other):
        return isinstance(other, JetContext) and (other.num_vars, other.order) == (self.num_vars, self.order)

    def __hash__(self):
        return hash((self.num_vars, self.order))

    def size(self, r: int) -> int:
        """Number of monomials of total degree <= r."""
        if r < 0:
            return 0
        return int(self._ends[min(r, self.order)])

    def lookup(self, exps: np.ndarray) -> np.ndarray:
        keys = np.asarray(exps) @ self._radix
        pos = np.searchsorted(self._sorted_keys, keys)
        return self._key_order[pos]

    def index(self, multi_index: Sequence[int]) -> int:
        e = np.asarray(multi_index, dtype=int)
        if e.shape != (self.num_vars,) or e.min() < 0 or e.sum() > self.order:
            raise JetError(f"multi-index {tuple(multi_index)} outside context")
        return int(self.lookup(e[None])[0])

    def mul_table(self, r: int):
        """Pairs (I, J) with deg I + deg J <= r, and the sparse scatter P x size(r)."""
        if r not in self._mul:
            Nr = self.size(r)
            Is, Js = [], []
            for d1 in range(r + 1):
                a = np.arange(self.size(d1 - 1), self.size(d1))
                b = np.arange(0, self.size(r - d1))
                Is.append(np.repeat(a, len(b)))
                Js.append(np.tile(b, len(a)))
            I = np.concatenate(Is)
            J = np.concatenate(Js)
            K = self.lookup(self.exponents[I] + self.exponents[J])
            S = scipy.sparse.csr_matrix((np.ones(len(I)), (np.arange(len(I)), K)), shape=(len(I), Nr))
            self._mul[r] = (I, J, S)
        return self._mul[r]

    def deriv_table(self, var: int):
        if var not in self._deriv:
            src = np.nonzero(self.exponents[:, var] > 0)[0]
            e = self.exponents[src].copy()
            fac = e[:, var].astype(float)
            e[:, var] -= 1
            self._deriv[var] = (src, self.lookup(e), fac)
        return self._deriv[var]


@lru_cache(maxsize=None)
def get_context(num_vars: int, order: int) -> JetContext:
    return JetContext(num_vars, order)


def _as_coeffs(x) -> np.ndarray:
    return np.asarray(x, dtype=complex)


class Jet:
    """Array of truncated Taylor series; leading axes are the array shape."""

    __slots__ = ("ctx", "c", "trusted")
    __array_priority__ = 100

    def __init__(self, ctx: JetContext, coeffs, trusted: Optional[int] = None):
        c = _as_coeffs(coeffs)
        if c.shape[-1:] != (ctx.N,):
            raise JetError(f"coefficient axis has length {c.shape[-1:]}, expected {ctx.N}")
        t = ctx.order if trusted is None else int(trusted)
        if t < ctx.order:
            c = c.copy()
            c[..., ctx.size(t):] = 0
        self.ctx = ctx
        self.c = c
        self.trusted = t

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, ctx, value, trusted=None) -> "Jet":
        v = _as_coeffs(value)
        c = np.zeros(v.shape + (ctx.N,), dtype=complex)
        c[..., 0] = v
        return cls(ctx, c, trusted)

    @classmethod
    def zeros(cls, ctx, shape=(), trusted=None) -> "Jet":
        return cls(ctx, np.zeros(tuple(shape) + (ctx.N,), dtype=complex), trusted)

    @classmethod
    def variable(cls, ctx, i: int) -> "Jet":
        c = np.zeros(ctx.N, dtype=complex)
        e = np.zeros(ctx.num_vars, dtype=int)
        e[i] = 1
        if ctx.order >= 1:
            c[ctx.index(e)] = 1.0
        return cls(ctx, c)

    @classmethod
    def from_map(cls, ctx, coeff_map: dict) -> "Jet":
        c = np.zeros(ctx.N, dtype=complex)
        for mi, v in coeff_map.items():
            c[ctx.index(mi)] += v
        return cls(ctx, c)

    @staticmethod
    def stack(jets: Sequence["Jet"], axis: int = 0) -> "Jet":
        jets = list(jets)
        ctx = jets[0].ctx
        for j in jets:
            if j.ctx != ctx:
                raise JetError("context mismatch")
        t = min(j.trusted for j in jets)
        ax = axis if axis >= 0 else axis - 1
        return Jet(ctx, np.stack([j.c for j in jets], axis=ax), t)

    # -- views ------------------------------------------------------------
    @property
    def shape(self):
        return self.c.shape[:-1]

    @property
    def ndim(self):
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        """Values at the base point (zero-order coefficients)."""
        return self.c[..., 0]

    def coeff_map(self, tol: float = 0.0) -> dict:
        if self.shape != ():
            raise JetError("coeff_map needs a scalar jet")
        return {tuple(int(x) for x in self.ctx.exponents[k]): complex(self.c[k])
                for k in range(self.ctx.size(self.trusted)) if abs(self.c[k]) > tol}

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.c))) if self.c.size else 0.0

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.ctx, self.c[key + (slice(None),)], self.trusted)

    def __len__(self):
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.ctx.order}, trusted={self.trusted})"

    def _norm_axis(self, axis):
        if axis is None:
            return tuple(range(self.ndim))
        axes = axis if isinstance(axis, tuple) else (axis,)
        return tuple(a % self.ndim for a in axes)

    def sum(self, axis=None) -> "Jet":
        return Jet(self.ctx, self.c.sum(axis=self._norm_axis(axis)), self.trusted)

    def transpose(self, *axes) -> "Jet":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return Jet(self.ctx, self.c.transpose(tuple(axes) + (self.ndim,)), self.trusted)

    def swapaxes(self, a, b) -> "Jet":
        return Jet(self.ctx, np.swapaxes(self.c, a % self.ndim, b % self.ndim), self.trusted)

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet(self.ctx, self.c.reshape(tuple(shape) + (self.ctx.N,)), self.trusted)

    def broadcast_to(self, shape) -> "Jet":
        return Jet(self.ctx, np.broadcast_to(self.c, tuple(shape) + (self.ctx.N,)), self.trusted)

    def truncate(self, r: int) -> "Jet":
        return Jet(self.ctx, self.c, min(r, self.trusted))

    def conj(self) -> "Jet":
        # chart variables are real, so conjugating coefficients conjugates the function
        return Jet(self.ctx, np.conj(self.c), self.trusted)

    @property
    def real(self) -> "Jet":
        return Jet(self.ctx, self.c.real.astype(complex), self.trusted)

    @property
    def imag(self) -> "Jet":
        return Jet(self.ctx, self.c.imag.astype(complex), self.trusted)

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "Jet"):
        if other.ctx != self.ctx:
            raise JetError("jets from different contexts combined")

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.ctx, self.c + other.c, min(self.trusted, other.trusted))
        v = _as_coeffs(other)
        c = np.array(np.broadcast_to(self.c, np.broadcast_shapes(self.shape, v.shape) + (self.ctx.N,)))
        c[..., 0] += v
        return Jet(self.ctx, c, self.trusted)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.ctx, -self.c, self.trusted)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return _product(self, other)
        v = _as_coeffs(other)
        return Jet(self.ctx, self.c * v[..., None], self.trusted)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / _as_coeffs(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, int) and p >= 0:
            out = Jet.constant(self.ctx, np.ones(self.shape), self.trusted)
            for _ in range(p):
                out = out * self
            return out
        return self.power(p)

    def _series(self, coefs) -> "Jet":
        """sum_k coefs[k] * y^k with y = self/self0 - 1 (zero constant term)."""
        v = self.value
        y = self * (1.0 / v) - 1.0
        r = self.trusted
        out = Jet.constant(self.ctx, np.full(self.shape, coefs[r], dtype=complex), r)
        for k in range(r - 1, -1, -1):
            out = y * out + coefs[k]
        return out

    def reciprocal(self) -> "Jet":
        v = self.value
        if np.any(np.abs(v) == 0):
            raise JetError("division by a jet with zero constant term")
        coefs = [(-1.0) ** k for k in range(self.trusted + 1)]
        return self._series(coefs) * (1.0 / v)

    def power(self, p: float) -> "Jet":
        v = self.value
        if np.any(np.abs(v) == 0):
            raise JetError("fractional power of a jet with zero constant term")
        coefs = [1.0]
        for k in range(1, self.trusted + 1):
            coefs.append(coefs[-1] * (p - k + 1) / k)
        return self._series(coefs) * (v.astype(complex) ** p)

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    # -- calculus ---------------------------------------------------------
    def partial(self, var: int) -> "Jet":
        if not 0 <= var < self.ctx.num_vars:
            raise JetError(f"variable index {var} out of range")
        src, dst, fac = self.ctx.deriv_table(var)
        c = np.zeros_like(self.c)
        c[..., dst] = self.c[..., src] * fac
        return Jet(self.ctx, c, self.trusted - 1)

    def gradient(self) -> "Jet":
        """Stack of partials along a new last axis."""
        return Jet.stack([self.partial(i) for i in range(self.ctx.num_vars)], axis=-1)


def _product(a: Jet, b: Jet) -> Jet:
    ctx = a.ctx
    r = min(a.trusted, b.trusted)
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.zeros(shape + (ctx.N,), dtype=complex)
    if r < 0:
        return Jet(ctx, out, r)
    Nr = ctx.size(r)
    I, J, S = ctx.mul_table(r)
    A = np.broadcast_to(a.c[..., :Nr], shape + (Nr,)).reshape(-1, Nr)
    B = np.broadcast_to(b.c[..., :Nr], shape + (Nr,)).reshape(-1, Nr)
    flat = out.reshape(-1, ctx.N)
    rows = A.shape[0]
    step = max(1, _CHUNK // max(len(I), 1))
    for s in range(0, rows, step):
        g = A[s:s + step][:, I] * B[s:s + step][:, J]
        flat[s:s + step, :Nr] = (S.T @ g.T).T
    return Jet(ctx, out, r)


def contract(subscripts: str, a: Jet, b: Jet) -> Jet:
    """Jet version of ``np.einsum(subscripts, a, b)`` over the leading axes."""
    a._check(b)
    ctx = a.ctx
    r = min(a.trusted, b.trusted)
    ins, outs = subscripts.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    dims = {}
    for s, j in ((sa, a), (sb, b)):
        for ch, n in zip(s, j.shape):
            dims[ch] = n
    oshape = tuple(dims[ch] for ch in outs)
    out = np.zeros(oshape + (ctx.N,), dtype=complex)
    if r < 0:
        return Jet(ctx, out, r)
    Nr = ctx.size(r)
    I, J, S = ctx.mul_table(r)
    P = len(I)
    width = max(int(np.prod(a.shape)), int(np.prod(b.shape)), int(np.prod(oshape)), 1)
    step = max(1, _CHUNK // width)
    expr = f"{sa}Z,{sb}Z->{outs}Z"
    acc = np.zeros((int(np.prod(oshape)), Nr), dtype=complex)
    for s in range(0, P, step):
        sl = slice(s, min(P, s + step))
        g = np.einsum(expr, a.c[..., I[sl]], b.c[..., J[sl]])
        acc += (S[sl].T @ g.reshape(-1, g.shape[-1]).T).T
    out.reshape(-1, ctx.N)[:, :Nr] = acc
    return Jet(ctx, out, r)


def matmul(a: Jet, b: Jet) -> Jet:
    """Matrix product over the last leading axis of a and the first of b."""
    la = "abcdefgh"[: a.ndim]
    lb = "x" + "pqrstu"[: b.ndim - 1]
    lb = la[-1] + lb[1:]
    return contract(f"{la},{lb}->{la[:-1] + lb[1:]}", a, b)


# -- construction from polynomials ---------------------------------------

def jet_from_polynomial(spec: PolynomialSpec, base, vars_to_jet_map, ctx: JetContext) -> Jet:
    """Taylor jet of ``spec`` recentred at ``base``.

    ``vars_to_jet_map[k] = (i_re, i_im)`` names the jet variables carrying the
    real and imaginary parts of Z_k - base_k; ``None`` freezes that part.
    """
    base = np.asarray(base, dtype=complex)
    if base.shape != (spec.num_complex_vars,):
        raise JetError("base point length does not match polynomial")
    if len(vars_to_jet_map) != spec.num_complex_vars:
        raise JetError("variable map length does not match polynomial")
    Z = []
    for k, (ire, iim) in enumerate(vars_to_jet_map):
        z = Jet.constant(ctx, base[k])
        for idx, unit in ((ire, 1.0), (iim, 1j)):
            if idx is None:
                continue
            if not 0 <= idx < ctx.num_vars:
                raise JetError(f"variable map index {idx} out of range")
            z = z + Jet.variable(ctx, idx) * unit
        Z.append(z)
    return spec.evaluate_jets(Z, [z.conj() for z in Z])


# -- linear algebra -------------------------------------------------------

COND_LIMIT = 1e12


def jet_linear_solve(A: Jet, b: Jet, cond_limit: float = COND_LIMIT) -> Jet:
    """Solve A x = b for jets; A has shape (n, n), b shape (n,) or (n, k)."""
    A._check(b)
    A0 = A.value
    n = A0.shape[0]
    if A.shape != (n, n) or b.shape[0] != n:
        raise JetError("shape mismatch in jet_linear_solve")
    cond = np.linalg.cond(A0)
    if not np.isfinite(cond) or cond > cond_limit:
        raise JetError(f"constant-term matrix singular or ill-conditioned (cond={cond:.3g})")
    lu = scipy.linalg.lu_factor(A0)
    ctx = A.ctx
    r = min(A.trusted, b.trusted)
    tail = b.shape[1:]

    def solve(rhs: Jet) -> Jet:
        flat = rhs.c.reshape(n, -1)
        return Jet(ctx, scipy.linalg.lu_solve(lu, flat).reshape(rhs.c.shape), r)

    Nmat = A - Jet.constant(ctx, A0)
    sub = "ij,j->i" if not tail else "ij,jk->ik"
    x = solve(b)
    for _ in range(r):
        x = solve(b - contract(sub, Nmat, x))
    return x.truncate(r)


# -- implicit graph -------------------------------------------------------

def _solve_partial(rho: PolynomialSpec, solve_var: int) -> PolynomialSpec:
    k, part = divmod(solve_var, 2)
    if part == 0:
        return rho.d_z(k) + rho.d_zbar(k)
    return (rho.d_z(k) - rho.d_zbar(k)) * 1j


def graph_embedding(base, solve_var: int, h: Jet):
    """Complex coordinates Z_k as jets on the graph chart (h = solved coordinate)."""
    ctx = h.ctx
    base = np.asarray(base, dtype=complex)
    Z = []
    v = 0
    for k in range(len(base)):
        parts = []
        for part in (0, 1):
            if 2 * k + part == solve_var:
                parts.append(h)
            else:
                parts.append(Jet.variable(ctx, v))
                v += 1
        Z.append(parts[0] + parts[1] * 1j + base[k])
    return Z


def implicit_graph_jet(rho: PolynomialSpec, base, solve_var: int, ctx: JetContext,
                       tol: float = 1e-10) -> Jet:
    """Jet of h with rho(..., solved coordinate = h(x), ...) = 0 to order K.

    Real coordinates are ordered (Re Z_0, Im Z_0, Re Z_1, ...); ``solve_var``
    indexes that list and the chart variables are the remaining ones in order.
    """
    base = np.asarray(base, dtype=complex)
    if ctx.num_vars != 2 * len(base) - 1:
        raise JetError("context must have 2n+1 variables for a hypersurface in C^(n+1)")
    drho = _solve_partial(rho, solve_var)
    g0 = drho(base)
    if abs(g0) < 1e-12:
        raise JetError("degenerate gradient: defining function has zero derivative in the solved coordinate")
    h = Jet.zeros(ctx)
    scale = max(1.0, max((abs(c) for c, _, _ in rho.monomials), default=1.0))
    max_iter = math.ceil(math.log2(max(ctx.order, 1))) + 2
    for _ in range(max_iter + 1):
        Z = graph_embedding(base, solve_var, h)
        F = rho.evaluate_jets(Z, [z.conj() for z in Z])
        if F.max_abs() < tol * scale:
            return h
        G = drho.evaluate_jets(Z, [z.conj() for z in Z])
        h = (h - F / G).real
    raise JetError("Newton iteration for the graph jet did not converge")


# -- moving jets between contexts ------------------------------------------

def restrict_jet(J: Jet, ctx: JetContext) -> Jet:
    """Restrict to the first ``ctx.num_vars`` variables (the others set to zero)."""
    big = J.ctx
    k = ctx.num_vars
    if k > big.num_vars:
        raise JetError("target context has more variables than the source")
    keep = np.nonzero(big.exponents[:, k:].sum(axis=1) == 0)[0] if k < big.num_vars else np.arange(big.N)
    keep = keep[big.degrees[keep] <= ctx.order]
    dst = ctx.lookup(big.exponents[keep, :k])
    c = np.zeros(J.c.shape[:-1] + (ctx.N,), dtype=complex)
    c[..., dst] = J.c[..., keep]
    return Jet(ctx, c, min(J.trusted, ctx.order))


def extend_jet(J: Jet, ctx: JetContext) -> Jet:
    """View a jet as one in a larger context that does not depend on the extra variables."""
    small = J.ctx
    if ctx.num_vars < small.num_vars:
        raise JetError("target context has fewer variables than the source")
    src = np.nonzero(small.degrees <= ctx.order)[0]
    e = np.zeros((len(src), ctx.num_vars), dtype=int)
    e[:, :small.num_vars] = small.exponents[src]
    dst = ctx.lookup(e)
    c = np.zeros(J.c.shape[:-1] + (ctx.N,), dtype=complex)
    c[..., dst] = J.c[..., src]
    return Jet(ctx, c, min(J.trusted, ctx.order))
