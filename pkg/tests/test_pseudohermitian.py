import numpy as np
import pytest
from scipy.stats import unitary_group

from crlab.jets import Jet
from crlab.pseudohermitian import covariant_derivative, lee_identity_residual
from crlab.tensors import IndexedTensor, levi_multiple

from conftest import Source


def test_heisenberg_flat(heis):
    assert heis.conn.torsion.max_abs() == 0
    assert np.max(np.abs(heis.conn.omega.value)) < 1e-14
    assert heis.pack.R.max_abs() < 1e-14


@pytest.mark.parametrize("name", ["sphere2", "sphere2_north", "perturbed", "heis"])
def test_structure_residuals(name, request):
    s = request.getfixturevalue(name)
    assert s.conn.info.rank == s.conn.info.n_unknown
    for key, val in {**s.conn.residuals, **s.pack.residuals}.items():
        assert val < 1e-9, key


@pytest.mark.parametrize("name", ["sphere2", "sphere2_north"])
def test_sphere_torsion_free_and_curvature(name, request):
    s = request.getfixturevalue(name)
    assert s.conn.torsion.max_abs() < 1e-10
    # R = g g + g g for theta = i dbar(|Z|^2 - 1), the same at every base point
    model = levi_multiple(0.5 * np.eye(2))
    np.testing.assert_allclose(s.pack.R.value, model, atol=1e-12)


def test_covariant_derivative_of_levi_form(perturbed):
    g = IndexedTensor(Jet.constant(perturbed.ctx, np.eye(2)), ("u", "b"), "g")
    assert covariant_derivative(g, perturbed.conns).data.max_abs() < 1e-10


def test_covariant_derivative_of_scalar(perturbed):
    f = perturbed.pack.scalar
    d = covariant_derivative(IndexedTensor(f, (), "R"), perturbed.conns).data
    assert (d - perturbed.calc.dfun(f)).max_abs() == 0


def test_leibniz(perturbed):
    s = perturbed.pack.scalar
    t = IndexedTensor(perturbed.conn.torsion, ("b", "b"), "A")
    lhs = covariant_derivative(IndexedTensor(t.data * s, t.kinds), perturbed.conns).data
    rhs = (covariant_derivative(t, perturbed.conns).data * s
           + t.data[:, :, None] * perturbed.calc.dfun(s)[None, None, :])
    assert (lhs - rhs).max_abs() < 1e-9


def test_lee_identity(sphere2, heis, perturbed):
    assert lee_identity_residual(sphere2.pack, sphere2.conn, sphere2.conns)["lee"] < 1e-9
    assert lee_identity_residual(heis.pack, heis.conn, heis.conns)["lee"] == 0
    out = lee_identity_residual(perturbed.pack, perturbed.conn, perturbed.conns)
    assert out["lee"] < 1e-8
    assert out["W_norm"] > 1e-2 and out["dA_norm"] > 1e-2


def test_unitary_rotation_covariance(perturbed):
    U = unitary_group.rvs(2, random_state=7)
    rot = Source(perturbed.spec, order=5, rotation=U)
    for key, val in {**rot.conn.residuals, **rot.pack.residuals}.items():
        assert val < 1e-9, key
    # omega_a^b transforms by conjugation with U on the frame index too
    w0 = perturbed.conn.omega.value                      # [a, b, k]
    w1 = rot.conn.omega.value
    Ubig = np.eye(5, dtype=complex)
    Ubig[1:3, 1:3] = U
    Ubig[3:, 3:] = U.conj()
    expected = np.einsum("ac,cdk,bd,jk->abj", U, w0, U.conj(), Ubig)
    np.testing.assert_allclose(w1, expected, atol=1e-12)
    np.testing.assert_allclose(rot.pack.scalar.value, perturbed.pack.scalar.value, atol=1e-12)
