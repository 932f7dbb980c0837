import dataclasses

import numpy as np
import pytest
from scipy.stats import unitary_group

from crlab.corpus import EX53_Q, EX53_QT, ex53_samples, sphere_spec, whitney_map
from crlab.immersion import (CRMapSpec, MapError, MapGeometry, degeneracy_from_sff, ek_spaces,
                             huang_polarization_check)
from crlab.jets import Jet
from crlab.polynomial import PolynomialSpec as P


# -- map specifications ------------------------------------------------------------------

def test_whitney_image_points():
    w = whitney_map(2, base=(0, 0, 1))
    np.testing.assert_allclose(w.image_point(), [0, 0, 0, 0, 1])
    w = whitney_map(2)
    s = 2 ** -0.5
    np.testing.assert_allclose(w.image_point(), [s, 0, 0.5, 0, 0.5], atol=1e-15)
    assert abs(np.sum(np.abs(w.image_point()) ** 2) - 1) < 1e-15
    assert (w.n, w.n_hat, w.d) == (2, 4, 2)


def test_whitney_sends_sphere_to_sphere(whitney_geom):
    chk = whitney_geom.map_check
    assert chk["composed_rho"] < 1e-10
    assert chk["pushforward_rank"] == 2


def test_map_validation_errors():
    src = sphere_spec(2, (0, 0, 1))
    with pytest.raises(MapError, match="not holomorphic"):
        CRMapSpec.to_sphere(src, [P.z(3, 0), P.zbar(3, 1), P.z(3, 2)])
    target = sphere_spec(2, (1, 0, 0))
    with pytest.raises(MapError, match="image"):
        CRMapSpec(src, target, (P.z(3, 0), P.z(3, 1), P.z(3, 2)))


def test_non_immersive_map_rejected():
    src = sphere_spec(2, (0, 0, 1))
    const = CRMapSpec.to_sphere(src, [P.constant(3, 0.0), P.constant(3, 0.0), P.constant(3, 1.0)])
    with pytest.raises(MapError, match="immersive"):
        MapGeometry(const, order=3).map_check


def test_map_off_sphere_rejected():
    src = sphere_spec(2, (0, 0, 1))
    bad = CRMapSpec.to_sphere(src, [P.z(3, 0) * 2, P.z(3, 1), P.z(3, 2)])
    with pytest.raises(MapError, match="does not vanish"):
        MapGeometry(bad, order=3).map_check


# -- adapted frames ------------------------------------------------------------------------

def test_linear_adapted_frame_identity(linear_geom):
    ad = linear_geom.adapted
    assert (ad.U - Jet.constant(linear_geom.ctx, np.eye(3))).max_abs() < 1e-12
    assert max(ad.residuals.values()) < 1e-9


@pytest.mark.parametrize("name", ["whitney_geom", "linear_geom", "section_geom"])
def test_pullback_residuals(name, request):
    ad = request.getfixturevalue(name).adapted
    assert ad.residuals["pullback"] < 1e-9
    assert ad.residuals["unitary"] < 1e-9


# -- second fundamental form -----------------------------------------------------------------

@pytest.mark.parametrize("name", ["linear_geom", "section_geom"])
def test_linear_maps_are_totally_geodesic(name, request):
    g = request.getfixturevalue(name)
    sff = g.sff
    assert sff.omega_sff.max_abs() < 1e-10
    assert all(d.max_abs() < 1e-9 for d in sff.derivs.values())
    assert sff.residuals["normal_torsion"] < 1e-9
    assert g.codazzi()["Dhat_norm"] < 1e-9


def test_whitney_sff(whitney_geom):
    sff = whitney_geom.sff
    res = sff.residuals
    assert res["route_agreement"] < 1e-8
    assert res["symmetry"] < 1e-9
    assert np.linalg.norm(sff.omega_sff.value) > 0.5
    for key in ("form_type", "normal_torsion", "tangential_connection", "tangential_torsion"):
        assert res[key] < 1e-9, key


def test_whitney_degeneracy_dual_route(whitney_geom):
    # regression baseline from the first verified run: both routes give [1, 3, 5, 5]
    a = whitney_geom.ek_profile(3)
    b = whitney_geom.sff_profile(3)
    assert a.dims == b.dims == [1, 3, 5, 5]
    assert (a.s0, a.k0) == (b.s0, b.k0) == (0, 2)
    assert not a.unstable and not b.unstable


def test_linear_degeneracy(linear_geom):
    a = linear_geom.ek_profile(3)
    assert a.dims == linear_geom.sff_profile(3).dims == [1, 3, 3, 3]
    assert (a.s0, a.k0) == (1, 1)


def test_ek_k_max_zero(whitney_geom):
    assert ek_spaces(whitney_geom.map, whitney_geom.src_cf, 0).dims == [1]


def test_truncated_derivatives_flagged(whitney_geom):
    sff = whitney_geom.sff
    short = dataclasses.replace(sff, derivs={k: v for k, v in sff.derivs.items() if k <= 2})
    prof = degeneracy_from_sff(short, 3)
    assert prof.lower_bound
    assert prof.dims[:3] == [1, 3, 5]


def test_profile_monotone(whitney_geom):
    dims = whitney_geom.ek_profile(4).dims
    assert dims == sorted(dims) and dims[1] == 3


# -- Codazzi, Gauss, induced connection ------------------------------------------------------

def test_codazzi(whitney_geom):
    out = whitney_geom.codazzi()
    assert out["codazzi"] < 1e-7
    assert out["Dhat_dual_route"] < 1e-7
    assert out["Dhat_norm"] > 1e-2


@pytest.mark.parametrize("name", ["whitney_geom", "linear_geom", "section_geom"])
def test_gauss(name, request):
    out = request.getfixturevalue(name).gauss()
    assert out["pseudohermitian"] < 1e-8
    assert out["pseudoconformal"] < 1e-7
    assert out["pseudoconformal_expanded"] < 1e-7


def test_whitney_sff_square_conformally_flat(whitney_geom):
    out = whitney_geom.gauss()
    assert out["sff_traceless_norm"] < 1e-7
    assert out["sff_product_norm"] > 1e-2


def test_induced_whitney(whitney_geom):
    res = whitney_geom.induced()["residuals"]
    for key in ("C_dual_route", "F_dual_route", "slot_identity", "A_dual_route"):
        assert res[key] < 1e-7, key


def test_induced_linear_vanishes(linear_geom):
    out = linear_geom.induced()
    assert out["C"].max_abs() < 1e-9
    assert out["F"].max_abs() < 1e-9
    assert abs(out["A"].value) < 1e-9
    assert out["residuals"]["C_dual_route"] < 1e-7


def test_unitary_covariance_whitney(whitney_geom):
    U = unitary_group.rvs(2, random_state=3)
    rot = MapGeometry(whitney_geom.map, order=4, rotation=U)
    ref = MapGeometry(whitney_geom.map, order=4)
    # the second fundamental form transforms as a tensor: its norm is frame independent
    a = np.linalg.norm(rot.sff.omega_sff.value)
    b = np.linalg.norm(ref.sff.omega_sff.value)
    assert abs(a - b) < 1e-10
    for key, val in ref.sff.residuals.items():
        if not key.endswith("_norm"):
            assert abs(rot.sff.residuals[key] - val) < 1e-9, key
    assert rot.ek_profile(3).dims == ref.ek_profile(3).dims


# -- the quadratic form pair ---------------------------------------------------------------

def test_quadratic_pair_identity_at_samples():
    z = np.array([[1, 0], [1, 1]], dtype=complex)
    out = huang_polarization_check(EX53_Q, EX53_QT, z)
    np.testing.assert_allclose(out["lhs"], [0, 32], atol=1e-12)
    np.testing.assert_allclose(out["Hzz"] * np.sum(np.abs(z) ** 2, axis=1), [0, 32], atol=1e-12)


def test_quadratic_pair_decomposition():
    z = ex53_samples()
    out = huang_polarization_check(EX53_Q, EX53_QT, z)
    assert out["traceless_residual"] < 1e-12
    np.testing.assert_allclose(out["H"], [[0, 8], [8, 0]], atol=1e-12)
    model = 8 * 2 * np.real(z[:, 0] * z[:, 1].conj())
    np.testing.assert_allclose(out["Hzz"], model, atol=1e-11)
    assert out["identity_residual"] < 1e-10


def test_equal_quadratic_forms_give_zero():
    out = huang_polarization_check(EX53_Q, EX53_Q, ex53_samples(5))
    assert np.max(np.abs(out["H"])) < 1e-14
