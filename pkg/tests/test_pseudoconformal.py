import numpy as np
import pytest

from crlab.pseudoconformal import cm_structure_residuals, pulled_back_phi_forms
from crlab.tensors import check_curvature_symmetry, trace_free_violation


def report(s):
    phi = pulled_back_phi_forms(s.conn, s.deb, s.cf, s.calc)
    return phi, cm_structure_residuals(phi, s.pack, s.cf, s.calc)


def test_sphere_flat(sphere2, sphere2_north):
    for s in (sphere2, sphere2_north):
        assert s.pack.S.data.max_abs() < 1e-8


def test_heisenberg_all_zero(heis):
    D, E, B = heis.deb
    assert D.max_abs() == 0 and E.max_abs() == 0 and B.max_abs() == 0
    phi, rep = report(heis)
    assert (phi.phi_beta_alpha - heis.conn.omega).max_abs() == 0
    assert phi.phi_alpha.max_abs() == 0 and phi.psi.max_abs() == 0
    assert all(v == 0 for v in rep.residuals.values())


def test_perturbed_sphere_nonflat(perturbed):
    S = perturbed.pack.S
    assert np.max(np.abs(S.at_base())) > 1e-2
    assert trace_free_violation(S) < 1e-9
    assert check_curvature_symmetry(S) < 1e-9


def test_sphere_deb_constant(sphere2, sphere2_north):
    # D is the same multiple of the Levi form at unrelated base points, and E vanishes
    for s in (sphere2, sphere2_north):
        D, E, B = s.deb
        np.testing.assert_allclose(D.value, 0.5j * np.eye(2), atol=1e-12)
        assert np.max(np.abs(E.value)) < 1e-12
        assert abs(B.value - 0.5) < 1e-12


@pytest.mark.parametrize("name", ["sphere2", "perturbed"])
def test_D_skew_hermitian_B_real(name, request):
    D, E, B = request.getfixturevalue(name).deb
    np.testing.assert_allclose(D.value, -D.value.conj().T, atol=1e-12)
    assert abs(B.value.imag) < 1e-12


def test_phi_skew(sphere2):
    phi, rep = report(sphere2)
    assert phi.skew_residual(sphere2.calc) < 1e-10
    assert rep.residuals["skew_phi"] < 1e-10


@pytest.mark.parametrize("name", ["sphere2", "perturbed"])
def test_structure_equations(name, request):
    s = request.getfixturevalue(name)
    _, rep = report(s)
    bad = {k: v for k, v in rep.residuals.items() if not k.endswith("_norm") and v > 1e-8}
    assert not bad


def test_dual_routes_perturbed(perturbed):
    _, rep = report(perturbed)
    assert rep.residuals["S_dual_route"] < 1e-7
    assert rep.residuals["E_dual_route"] < 1e-7
    assert rep.residuals["S_norm"] > 1e-2
    assert np.max(np.abs(perturbed.deb[1].value)) > 1e-3
