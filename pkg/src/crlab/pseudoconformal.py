"""Chern-Moser curvature, the D/E/B coefficients and the pulled-back
pseudoconformal connection forms, with residual checks of their structure
equations.

Conventions follow pseudohermitian.py (unitary frame, all indices lowered):
    D[a, b]   = D_{a bbar}            (so D_b^a = D[b, a])
    E[a]      = E^a                   (E_a = conj E^a)
    phi_beta_alpha[b, a, k] = phi_b^a on frame vector k
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .cr_manifold import AdmissibleCoframe
from .forms import FrameCalculus
from .jets import Jet, contract
from .pseudohermitian import ConnectionData, Connections, CurvaturePack, covariant_derivative
from .tensors import (IndexedTensor, check_curvature_symmetry, trace_free_violation,
                      traceless_project)


def chern_moser_tensor(pack: CurvaturePack, g=None) -> IndexedTensor:
    """S = trace-free part of the Webster curvature (g must be the identity)."""
    if g is not None and not np.allclose(np.asarray(g), np.eye(pack.R.shape[0])):
        raise ValueError("chern_moser_tensor expects a unitary frame (g = identity)")
    S = traceless_project(pack.tensor())
    S.name = "S"
    pack.S = S
    return S


def deb_coefficients(pack: CurvaturePack, conn: ConnectionData, cf: AdmissibleCoframe,
                     calc: Optional[FrameCalculus] = None) -> Tuple[Jet, Jet, Jet]:
    """D, E and B built from Ricci, torsion and their covariant derivatives."""
    calc = calc or FrameCalculus(cf.E, cf.Theta)
    conns = Connections(calc, conn.omega)
    n = conn.n
    if pack.R.trusted < 2:
        raise ValueError("order budget exhausted: need curvature trusted to order 2")
    eye = Jet.constant(pack.R.ctx, np.eye(n))
    D = (pack.ricci * (1j / (n + 2)) - eye * pack.scalar * (1j / (2 * (n + 1) * (n + 2))))
    A = conn.torsion
    dA = covariant_derivative(IndexedTensor(A, ("b", "b"), "A"), conns).data
    dD = covariant_derivative(IndexedTensor(D, ("u", "b"), "D"), conns).data
    divA = Jet.stack([sum(dA[a, mu, 1 + mu] for mu in range(n)) for a in range(n)])
    divD = Jet.stack([sum(dD[nu, a, n + 1 + nu] for nu in range(n)) for a in range(n)])
    E = (divA - divD) * (2j / (2 * n + 1))
    dE = covariant_derivative(IndexedTensor(E, ("b",), "E"), conns).data
    divE = sum(dE[mu, 1 + mu] for mu in range(n))
    AA = sum(A[b, mu] * A[b, mu].conj() for b in range(n) for mu in range(n))
    DD = sum(D[nu, a] * D[nu, a].conj() for nu in range(n) for a in range(n))
    B = (divE + divE.conj() - AA * 2 + DD * 2) * (1.0 / n)
    pack.D, pack.E, pack.B = D, E, B
    return D, E, B


@dataclass
class PhiForms:
    phi_beta_alpha: Jet      # (n, n, m)
    phi_alpha: Jet           # (n, m)
    psi: Jet                 # (m,)

    @property
    def n(self) -> int:
        return self.phi_alpha.shape[0]

    def skew_residual(self, calc: FrameCalculus) -> float:
        """phi_{a bbar} + phi_{bbar a}, which must vanish when phi = 0."""
        p = self.phi_beta_alpha
        return (p + calc.conj(p.transpose(1, 0, 2))).max_abs()


def pulled_back_phi_forms(conn: ConnectionData, DEB, cf: AdmissibleCoframe,
                          calc: Optional[FrameCalculus] = None) -> PhiForms:
    calc = calc or FrameCalculus(cf.E, cf.Theta)
    D, E, B = DEB
    n = conn.n
    th = calc.unit(0)
    phi_ba = conn.omega + D[:, :, None] * th[None, None, :]
    rows = []
    for a in range(n):
        comps = [E[a]] + [D[mu, a] for mu in range(n)] + [conn.torsion[a, nu] for nu in range(n)]
        rows.append(Jet.stack(comps))
    phi_a = Jet.stack(rows)
    Ec = E.conj()
    psi = Jet.stack([B] + [Ec[mu] * 1j for mu in range(n)] + [E[nu] * -1j for nu in range(n)])
    return PhiForms(phi_ba, phi_a, psi)


@dataclass
class StructureReport:
    residuals: Dict[str, float] = field(default_factory=dict)
    S: Optional[Jet] = None
    V_tan: Optional[Jet] = None       # V_b^a_m        [b, a, m]
    V_mixed: Optional[Jet] = None     # V^a_{b nubar}  [b, a, nu] from Phi_b^a
    V: Optional[Jet] = None           # V^a_{m nubar}  [a, m, nu] from Phi^a
    P: Optional[Jet] = None           # P_m^a          [m, a]
    Q: Optional[Jet] = None           # Q_{nubar}^a    [nu, a]
    P_psi: Optional[Jet] = None       # P_{m nubar}    [m, nu]
    R_mu: Optional[Jet] = None
    E_slot: Optional[np.ndarray] = None
    B_slot: Optional[complex] = None

    def passed(self, tol: float = 1e-8) -> bool:
        return all(v < tol for k, v in self.residuals.items() if not k.endswith("_norm"))


def _outer(a: Jet, b: Jet) -> Jet:
    """a ^ b for 1-forms broadcast over leading axes."""
    return FrameCalculus.wedge(a, b)


def cm_structure_residuals(phi: PhiForms, pack: CurvaturePack, cf: AdmissibleCoframe,
                           calc: Optional[FrameCalculus] = None) -> StructureReport:
    """Check the pulled-back structure equations and read off the curvature pieces."""
    calc = calc or FrameCalculus(cf.E, cf.Theta)
    n, m = phi.n, calc.m
    u = slice(1, n + 1)
    b = slice(n + 1, m)
    th = calc.unit(0)
    th_up = Jet.stack([calc.unit(1 + a) for a in range(n)])          # theta^a
    th_bar = Jet.stack([calc.unit(n + 1 + a) for a in range(n)])     # theta_a = theta^abar
    pba, pa, psi = phi.phi_beta_alpha, phi.phi_alpha, phi.psi
    pa_low = calc.conj(pa)                                            # phi_a = conj phi^a
    eye = np.eye(n)
    rep = StructureReport()
    res = rep.residuals

    # d theta = i theta^mu ^ theta_mu
    dth = calc.de[0]
    res["eq_contact"] = (dth - sum(_outer(th_up[k], th_bar[k]) for k in range(n)) * 1j).max_abs()

    # d theta^a = theta^mu ^ phi_mu^a + theta ^ phi^a
    lhs = calc.de[1:n + 1]
    x = contract("mk,mal->akl", th_up, pba)
    rhs = x - x.swapaxes(-1, -2) + _outer(th[None, :], pa)
    res["eq_coframe"] = (lhs - rhs).max_abs()

    # 0 = i theta^nu ^ conj(phi^nu) + i phi^nu ^ theta^nubar + theta ^ psi  (theta slots)
    F4 = (sum(_outer(th_up[k], calc.conj(pa[k])) + _outer(pa[k], th_bar[k]) for k in range(n)) * 1j
          + _outer(th, psi))
    res["eq_phi_theta_slots"] = F4[0].max_abs()

    # Phi_b^a
    dpba = calc.d1(pba)
    Phi_ba = (dpba - FrameCalculus.wedge_mat(pba, pba)
              - _outer(th_bar[:, None, :], pa[None, :, :]) * 1j
              + _outer(pa_low[:, None, :], th_up[None, :, :]) * 1j)
    trace_term = (sum(_outer(pa_low[k], th_up[k]) for k in range(n)) * 1j
                  + _outer(psi, th) * 0.5)
    Phi_ba = Phi_ba + Jet.constant(psi.ctx, eye)[:, :, None, None] * trace_term[None, None]
    S = Phi_ba[:, :, u, b]
    rep.S = S
    rep.V_tan = Phi_ba[:, :, u, 0]
    rep.V_mixed = Phi_ba[:, :, 0, b]
    res["phi_ba_20"] = Phi_ba[:, :, u, u].max_abs()
    res["phi_ba_02"] = Phi_ba[:, :, b, b].max_abs()

    # Phi^a
    x = contract("mk,mal->akl", pa, pba)
    Phi_a = calc.d1(pa) - (x - x.swapaxes(-1, -2))
    Phi_a = Phi_a + _outer(psi[None, :], th_up) * 0.5
    rep.V = Phi_a[:, u, b]
    rep.P = Phi_a[:, u, 0].transpose(1, 0)
    rep.Q = Phi_a[:, b, 0].transpose(1, 0)
    res["phi_a_20"] = Phi_a[:, u, u].max_abs()
    res["phi_a_02"] = Phi_a[:, b, b].max_abs()

    # Psi
    x = sum(_outer(pa[k], pa_low[k]) for k in range(n))
    Psi = calc.d1(psi) - x * 2j
    rep.P_psi = Psi[u, b] * (1 / -2j)
    rep.R_mu = Psi[u, 0]
    res["psi_20"] = Psi[u, u].max_abs()
    res["psi_02"] = Psi[b, b].max_abs()

    # trace conditions and symmetries
    res["S_trace"] = trace_free_violation(S)
    res["S_symmetry"] = check_curvature_symmetry(S)
    res["V_trace"] = float(np.max(np.abs(np.einsum("amm->a", rep.V_tan.value)), initial=0.0))
    res["P_trace"] = float(abs(np.trace(rep.P.value)))
    # the same V and P read off from two different equations
    res["V_consistency"] = (rep.V_mixed.transpose(1, 0, 2) - rep.V).max_abs()
    res["P_consistency"] = (rep.P - rep.P_psi).max_abs()

    # S from the structure equations against the projected Webster curvature
    S_proj = traceless_project(pack.R, check=False)
    res["S_dual_route"] = (S - S_proj).max_abs()
    res["S_norm"] = S.max_abs()

    # slot identification of E and B: the trace of V^a_{mu nubar} is
    # i(n + 1/2) times the error in E, the trace of P_{mu nubar} is -n/2 times the error in B
    trV = np.einsum("amm->a", rep.V.value)
    E_val = pa.value[:, 0]
    rep.E_slot = E_val - trV / (1j * (n + 0.5))
    trP = np.trace(rep.P_psi.value)
    rep.B_slot = complex(psi.value[0] + 2 * trP / n)
    res["E_dual_route"] = float(np.max(np.abs(rep.E_slot - E_val), initial=0.0))
    res["B_dual_route"] = float(abs(rep.B_slot - psi.value[0]))
    res["skew_phi"] = phi.skew_residual(calc)
    return rep
