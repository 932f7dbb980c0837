import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from crlab.jets import (Jet, JetError, contract, extend_jet, get_context, implicit_graph_jet, jet_from_polynomial,
                        jet_linear_solve, restrict_jet)
from crlab.polynomial import PolynomialSpec as P


def coeff(J, *exps):
    return J.c[..., J.ctx.index(exps)]


def random_jet(ctx, rng, shape=()):
    return Jet(ctx, rng.normal(size=shape + (ctx.N,)) + 1j * rng.normal(size=shape + (ctx.N,)))


def sympy_jet(expr, xs, ctx):
    """Taylor coefficients of a sympy expression at 0 through ctx.order (independent oracle)."""
    c = np.zeros(ctx.N, dtype=complex)
    for k, e in enumerate(ctx.exponents):
        d = expr
        for x, p in zip(xs, e):
            if p:
                d = sp.diff(d, x, int(p))
        val = d.subs({x: 0 for x in xs}) / np.prod([float(sp.factorial(int(p))) for p in e])
        c[k] = complex(sp.N(val))
    return Jet(ctx, c)


# -- examples ------------------------------------------------------------------------

def test_polynomial_abs_square():
    ctx = get_context(2, 2)
    J = jet_from_polynomial(P.z(1, 0) * P.zbar(1, 0), [0], [(0, 1)], ctx)
    assert coeff(J, 2, 0) == 1 and coeff(J, 0, 2) == 1
    assert np.count_nonzero(J.c) == 2


def test_polynomial_linear_recentering():
    ctx = get_context(2, 1)
    J = jet_from_polynomial(P.z(1, 0), [1], [(0, 1)], ctx)
    np.testing.assert_allclose(J.c, [1, 1, 1j])


def test_polynomial_base_on_zero_set():
    ctx = get_context(4, 2)
    J = jet_from_polynomial(P.sphere(2), [0, 1], [(0, 1), (2, 3)], ctx)
    assert abs(J.value) < 1e-15


def test_polynomial_frozen_part():
    ctx = get_context(1, 2)
    J = jet_from_polynomial(P.z(1, 0) * P.zbar(1, 0), [2j], [(None, 0)], ctx)
    # z = 2i + i y, |z|^2 = (2 + y)^2
    np.testing.assert_allclose(J.c, [4, 4, 1])


def test_polynomial_map_errors():
    ctx = get_context(2, 2)
    with pytest.raises(JetError):
        jet_from_polynomial(P.z(1, 0), [0], [(0, 5)], ctx)
    with pytest.raises(JetError):
        jet_from_polynomial(P.z(1, 0), [0, 1], [(0, 1)], ctx)


def test_product_and_quotient():
    ctx = get_context(1, 3)
    x = Jet.variable(ctx, 0)
    np.testing.assert_allclose(((1 + x) * (1 - x)).c, [1, 0, -1, 0])
    np.testing.assert_allclose((1 / (1 + x)).c, [1, -1, 1, -1])
    assert (x - x).max_abs() == 0


def test_division_by_zero_constant_term():
    ctx = get_context(1, 3)
    x = Jet.variable(ctx, 0)
    with pytest.raises(JetError):
        1 / x


def test_partials():
    ctx = get_context(2, 3)
    x, y = Jet.variable(ctx, 0), Jet.variable(ctx, 1)
    d = (x * x * y).partial(0)
    np.testing.assert_allclose(d.c, (2 * x * y).c)
    assert d.trusted == 2
    assert Jet.constant(ctx, 3.0).partial(0).max_abs() == 0


def test_mixed_partials_random(rng):
    ctx = get_context(3, 4)
    f = random_jet(ctx, rng)
    assert (f.partial(0).partial(1) - f.partial(1).partial(0)).max_abs() == 0


def test_series_functions_against_sympy():
    ctx = get_context(2, 4)
    xs = sp.symbols("x0 x1")
    x, y = Jet.variable(ctx, 0), Jet.variable(ctx, 1)
    a = 2 + x + 0.5j * y + x * y
    expr = 2 + xs[0] + sp.I / 2 * xs[1] + xs[0] * xs[1]
    for got, want in [(a.reciprocal(), 1 / expr), (a.sqrt(), sp.sqrt(expr)),
                      (a.power(-1.5), expr ** sp.Rational(-3, 2)), (a ** 3, expr ** 3)]:
        np.testing.assert_allclose(got.c, sympy_jet(want, xs, ctx).c, atol=1e-12)


def test_trusted_order_tracking():
    ctx = get_context(2, 4)
    f = Jet.variable(ctx, 0) + 1
    g = f.partial(0).partial(1)
    assert g.trusted == 2
    assert (f * g).trusted == 2
    assert (f + g).trusted == 2


def test_contract_matches_einsum_at_base(rng):
    ctx = get_context(2, 3)
    A = random_jet(ctx, rng, (3, 4))
    B = random_jet(ctx, rng, (4, 2))
    C = contract("ij,jk->ik", A, B)
    np.testing.assert_allclose(C.value, A.value @ B.value)
    prod = sum(A[0, j] * B[j, 1] for j in range(4))
    np.testing.assert_allclose(C[0, 1].c, prod.c, atol=1e-12)


def test_linear_solve_identity(rng):
    ctx = get_context(3, 3)
    b = random_jet(ctx, rng, (4,))
    x = jet_linear_solve(Jet.constant(ctx, np.eye(4)), b)
    np.testing.assert_allclose(x.c, b.c)


def test_linear_solve_residual(rng):
    ctx = get_context(3, 4)
    A = random_jet(ctx, rng, (4, 4)) * 0.3 + Jet.constant(ctx, 3 * np.eye(4))
    b = random_jet(ctx, rng, (4,))
    x = jet_linear_solve(A, b)
    assert (contract("ij,j->i", A, x) - b).max_abs() < 1e-10


def test_linear_solve_singular(rng):
    ctx = get_context(2, 2)
    A = random_jet(ctx, rng, (3, 3))
    c = A.c.copy()
    c[2, :, 0] = c[0, :, 0]
    with pytest.raises(JetError):
        jet_linear_solve(Jet(ctx, c), random_jet(ctx, rng, (3,)))


def test_implicit_graph_heisenberg():
    # rho = |z|^2 - Im w, solve Im w (real index 3) over (x, y, u)
    rho = P.from_terms(2, {((1, 0), (1, 0)): 1.0, ((0, 1), (0, 0)): 0.5j, ((0, 0), (0, 1)): -0.5j})
    ctx = get_context(3, 4)
    h = implicit_graph_jet(rho, [0, 0], 3, ctx)
    x, y = Jet.variable(ctx, 0), Jet.variable(ctx, 1)
    assert (h - (x * x + y * y)).max_abs() < 1e-14


def test_implicit_graph_sphere_against_sympy():
    rho = P.sphere(2)
    ctx = get_context(3, 5)
    h = implicit_graph_jet(rho, [0, 1], 2, ctx)          # solve Re w
    xs = sp.symbols("x0 x1 x2")
    want = sympy_jet(sp.sqrt(1 - xs[0] ** 2 - xs[1] ** 2 - xs[2] ** 2) - 1, xs, ctx)
    np.testing.assert_allclose(h.c, want.c, atol=1e-12)


def test_implicit_graph_degenerate():
    ctx = get_context(3, 3)
    with pytest.raises(JetError):
        implicit_graph_jet(P.sphere(2), [0, 1], 0, ctx)


def test_restrict_extend_roundtrip(rng):
    small = get_context(2, 3)
    big = get_context(4, 3)
    J = random_jet(small, rng, (2,))
    assert (restrict_jet(extend_jet(J, big), small) - J).max_abs() == 0


# -- properties ------------------------------------------------------------------------

seeds = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_ring_axioms(seed):
    rng = np.random.default_rng(seed)
    ctx = get_context(3, 4)
    a, b, c = (random_jet(ctx, rng) for _ in range(3))
    scale = max(1.0, float(np.max(np.abs(((a * b) * c).c))))
    assert ((a * b) * c - a * (b * c)).max_abs() < 1e-12 * scale
    assert (a * (b + c) - (a * b + a * c)).max_abs() < 1e-12 * scale
    assert (a * b - b * a).max_abs() < 1e-12 * scale


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(0, 2), st.integers(0, 2))
def test_partials_commute(seed, i, j):
    rng = np.random.default_rng(seed)
    ctx = get_context(3, 5)
    f = random_jet(ctx, rng)
    assert (f.partial(i).partial(j) - f.partial(j).partial(i)).max_abs() < 1e-12


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_product_rule(seed):
    rng = np.random.default_rng(seed)
    ctx = get_context(2, 4)
    f, g = random_jet(ctx, rng), random_jet(ctx, rng)
    lhs = (f * g).partial(1)
    rhs = f.partial(1) * g + f * g.partial(1)
    assert (lhs - rhs).max_abs() < 1e-11


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(2, 5))
def test_linear_solve_reproduces_rhs(seed, n):
    rng = np.random.default_rng(seed)
    ctx = get_context(2, 4)
    A = random_jet(ctx, rng, (n, n)) * 0.2 + Jet.constant(ctx, 2 * np.eye(n))
    b = random_jet(ctx, rng, (n, 2))
    x = jet_linear_solve(A, b)
    assert (contract("ij,jk->ik", A, x) - b).max_abs() < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_graph_residual_on_sphere(r, a, b):
    base = [r * np.exp(1j * a), np.sqrt(1 - r * r) * np.exp(1j * b)]
    ctx = get_context(3, 5)
    g = np.array([2 * base[0].real, 2 * base[0].imag, 2 * base[1].real, 2 * base[1].imag])
    sv = int(np.argmax(np.abs(g)))
    h = implicit_graph_jet(P.sphere(2), base, sv, ctx)
    from crlab.jets import graph_embedding
    Z = graph_embedding(base, sv, h)
    assert P.sphere(2).evaluate_jets(Z, [z.conj() for z in Z]).max_abs() < 1e-10
