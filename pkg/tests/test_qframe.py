import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from crlab.jets import Jet
from crlab.qframe import (QFrameError, QFrameField, adapted_qframe_along, induced_route_agreement, jet_det,
                          maurer_cartan, mc_residuals, piphi_dictionary_residual, q_gram, q_inner, q_metric,
                          sphere_to_quadric, validate_q_frame, xi_form)


def e(size, k):
    v = np.zeros(size, dtype=complex)
    v[k] = 1
    return v


def test_q_inner_examples():
    size = 5
    assert q_inner(e(size, 0), e(size, 0)) == 0
    assert q_inner(e(size, 4), e(size, 0)) == 0.5j
    assert q_inner(e(size, 2), e(size, 2)) == 1
    with pytest.raises(QFrameError):
        q_inner(e(5, 0), e(4, 0))


def test_validate_identity_and_scaled():
    assert validate_q_frame(np.eye(6)) == 0
    Z = np.eye(6)
    Z[0, 0] = 2
    assert validate_q_frame(Z) >= 1


def random_group_element(rng, size):
    """exp of a traceless element of the Lie algebra of the quadric form."""
    G = q_metric(size)
    K = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    K = (K - K.conj().T) / 2
    X = K @ np.linalg.inv(G)
    X -= np.trace(X) / size * np.eye(size)
    return scipy.linalg.expm(0.3 * X)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(3, 6))
def test_group_preserves_frames(seed, size):
    M = random_group_element(np.random.default_rng(seed), size)
    assert validate_q_frame(M) < 1e-10          # the rows of M are the transformed identity frame


def test_sphere_to_quadric_carries_forms():
    size = 5
    C = sphere_to_quadric(size)
    rng = np.random.default_rng(0)
    W = rng.normal(size=size) + 1j * rng.normal(size=size)
    sphere_form = np.sum(np.abs(W[1:]) ** 2) - abs(W[0]) ** 2
    assert abs(q_inner(C @ W, C @ W) - sphere_form) < 1e-12


def test_jet_det_matches_numpy(rng, linear_geom):
    ctx = linear_geom.ctx
    A = Jet(ctx, rng.normal(size=(4, 4, ctx.N)) * 0.1) + Jet.constant(ctx, np.eye(4) * 2)
    np.testing.assert_allclose(jet_det(A).value, np.linalg.det(A.value))
    x = Jet.variable(ctx, 0)
    D = Jet.stack([Jet.stack([x + 2, x]), Jet.stack([x * 0 + 1, x + 3])])
    assert (jet_det(D) - ((x + 2) * (x + 3) - x)).max_abs() < 1e-14


def test_constant_frame_has_zero_mc_forms(linear_geom):
    Z = Jet.constant(linear_geom.ctx, np.eye(5))
    pi = maurer_cartan(QFrameField(Z, linear_geom.src_calc))
    assert pi.max_abs() == 0


@pytest.fixture(scope="module")
def linear_frame(linear_geom):
    fr = adapted_qframe_along(linear_geom)
    return fr, maurer_cartan(fr)


@pytest.fixture(scope="module")
def whitney_frame(whitney_geom):
    fr = adapted_qframe_along(whitney_geom)
    return fr, maurer_cartan(fr)


@pytest.mark.parametrize("name", ["linear_frame", "whitney_frame"])
def test_frame_invariants(name, request):
    fr, pi = request.getfixturevalue(name)
    assert fr.residuals["frame"] < 1e-9
    assert fr.residuals["adapted"] < 1e-9
    res = mc_residuals(fr, pi)
    assert res["flatness"] < 1e-8
    assert res["form_preservation"] < 1e-9
    assert res["trace"] < 1e-9


def test_gram_as_jets(linear_frame):
    fr, _ = linear_frame
    G = q_gram(fr.Z)
    assert (G - Jet.constant(G.ctx, q_metric(fr.size))).max_abs() < 1e-9


def test_xi_vanishes(linear_frame, whitney_frame):
    for fr, pi in (linear_frame, whitney_frame):
        assert xi_form(fr, pi).max_abs() < 1e-9


def test_dictionary_linear(linear_frame, linear_geom):
    fr, pi = linear_frame
    res = piphi_dictionary_residual(fr, pi, linear_geom)
    for key, val in res.items():
        assert val < 1e-8, key


def test_dictionary_whitney(whitney_frame, whitney_geom):
    fr, pi = whitney_frame
    res = piphi_dictionary_residual(fr, pi, whitney_geom)
    for key, val in res.items():
        assert val < 1e-8, key


def test_induced_route_whitney(whitney_geom):
    for key, val in induced_route_agreement(whitney_geom).items():
        assert val < 1e-7, key
