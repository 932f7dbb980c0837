"""Q-frames of the hyperquadric model of the sphere and their Maurer-Cartan forms.

The sphere sum |Z'_k|^2 = r^2 in C^{N} (N = n_hat + 1) is realized as the quadric
(zeta, zeta) = 0 in P^{N} through the fixed linear map

    zeta^0 = W_0 + W_N,   zeta^A = W_A,   zeta^N = i (W_0 - W_N),

applied to homogeneous coordinates W = (r, Z'_1, .., Z'_N).  It carries the
sphere form sum_k |W_k|^2 - |W_0|^2 to the quadric form (., .).

Frames are stored row-wise: Z[L, i] is the i-th component of Z_L, with L
running over 0, 1..n_hat, n_hat + 1.  Maurer-Cartan forms are stored as
pi[L, M, k] = pi_L^M evaluated on source frame vector k.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .forms import FrameCalculus
from .jets import Jet, JetError, contract, jet_linear_solve


class QFrameError(ValueError):
    pass


def q_metric(size: int) -> np.ndarray:
    """Matrix G with (zeta, tau) = zeta^T G conj(tau)."""
    G = np.eye(size, dtype=complex)
    N = size - 1
    G[0, 0] = G[N, N] = 0
    G[N, 0] = 0.5j
    G[0, N] = -0.5j
    return G


def q_gram_target(size: int) -> np.ndarray:
    """Required products (Z_L, Z_M) of a Q-frame."""
    return q_metric(size)


def q_inner(zeta, tau):
    """(zeta, tau) = sum_A zeta^A conj(tau^A) + (i/2)(zeta^N conj(tau^0) - zeta^0 conj(tau^N))."""
    z = np.asarray(zeta, dtype=complex)
    t = np.asarray(tau, dtype=complex)
    if z.shape != t.shape or z.ndim != 1 or len(z) < 2:
        raise QFrameError("q_inner needs two vectors of the same length >= 2")
    return complex(z @ q_metric(len(z)) @ t.conj())


def q_gram(Z):
    """All products (Z_L, Z_M) for a frame stored row-wise (array or jet)."""
    size = Z.shape[0]
    G = q_metric(size)
    if isinstance(Z, Jet):
        ZG = contract("li,ij->lj", Z, Jet.constant(Z.ctx, G))
        return contract("lj,mj->lm", ZG, Z.conj())
    Z = np.asarray(Z, dtype=complex)
    return Z @ G @ Z.conj().T


def jet_det(M: Jet) -> Jet:
    """Determinant of a square jet matrix by Gaussian elimination with partial pivoting."""
    n = M.shape[0]
    c = M.c.copy()
    ctx, tr = M.ctx, M.trusted
    det = Jet.constant(ctx, 1.0, tr)
    for k in range(n):
        p = k + int(np.argmax(np.abs(c[k:, k, 0])))
        if abs(c[p, k, 0]) == 0:
            raise QFrameError("singular frame matrix")
        if p != k:
            c[[k, p]] = c[[p, k]]
            det = -det
        piv = Jet(ctx, c[k, k], tr)
        det = det * piv
        if k + 1 < n:
            fac = Jet(ctx, c[k + 1:, k], tr) * piv.reciprocal()
            row = Jet(ctx, c[k, k + 1:], tr)
            c[k + 1:, k + 1:] = (Jet(ctx, c[k + 1:, k + 1:], tr) - fac[:, None] * row[None, :]).c
    return det


def validate_q_frame(Z) -> float:
    """Max deviation from the Q-frame products and from det = 1 (arrays or jets)."""
    size = Z.shape[0]
    target = q_gram_target(size)
    if isinstance(Z, Jet):
        gram = (q_gram(Z) - Jet.constant(Z.ctx, target)).max_abs()
        det = (jet_det(Z) - 1.0).max_abs()
        return float(max(gram, det))
    Z = np.asarray(Z, dtype=complex)
    gram = float(np.max(np.abs(q_gram(Z) - target)))
    return float(max(gram, abs(np.linalg.det(Z) - 1)))


def sphere_to_quadric(size: int) -> np.ndarray:
    """Matrix C with zeta = C W (W in sphere homogeneous coordinates)."""
    C = np.eye(size, dtype=complex)
    N = size - 1
    C[0, 0], C[0, N] = 1, 1
    C[N, 0], C[N, N] = 1j, -1j
    return C


@dataclass
class QFrameField:
    Z: Jet                                  # (n_hat + 2, n_hat + 2), rows are Z_L
    calc: FrameCalculus
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.Z.shape[0]

    @property
    def n_hat(self) -> int:
        return self.size - 2


def adapted_qframe_along(geom) -> QFrameField:
    """Adapted Q-frame field along the source matched to the adapted target coframe with xi = 0.

    ``geom`` is a MapGeometry.  Z_0 is a multiple of the lift of f; the remaining
    columns come from the pushed-forward frame vectors, and the H_1 freedom
    (multiples of Z_0 added to Z_A and Z_N, and the scale of Z_0) is fixed by
    the Q-frame products, xi = 0 and unimodularity.
    """
    cr_map = geom.map
    calc = geom.src_calc
    ad = geom.adapted
    n, nh = cr_map.n, cr_map.n_hat
    size = nh + 2
    ctx = geom.ctx
    F = cr_map.map_jets(geom.src_cf.chart)
    dF = calc.dfun(F)                                       # [k, frame]
    C = Jet.constant(ctx, sphere_to_quadric(size))

    def lift(first, vec):
        return contract("ij,j->i", C, Jet.stack([first] + list(vec)))

    zero = Jet.zeros(ctx, (), F.trusted)
    W0 = lift(Jet.constant(ctx, cr_map.radius), F)
    ell = [dF[:, 1 + a] for a in range(n)] + [ad.L_hol[A] for A in range(n, nh)]
    Y = [lift(zero, v) for v in ell]
    YN = lift(zero, dF[:, 0]) * 0.5

    def ip(a, b):
        G = Jet.constant(ctx, q_metric(size))
        return contract("i,i->", contract("i,ij->j", a, G), b.conj())

    c = ip(W0, YN)
    cinv = c.reciprocal()
    # (Z_A, Z_N) = 0 and (Z_N, Z_N) = 0 are linear in the Z_0 coefficients;
    # the remaining real part of the Z_N coefficient is fixed by xi(T) = 0
    kN = ip(YN, YN) * cinv * -0.5
    rows = [W0]
    for y in Y:
        kA = ip(y, YN) * cinv * -1.0
        rows.append(y + W0 * kA)
    rows.append(YN + W0 * kN)
    Z0 = Jet.stack(rows)
    det = jet_det(Z0)
    lam = det.power(-1.0 / size)
    Z = Z0 * lam
    out = QFrameField(Z, calc)
    out.residuals["frame"] = validate_q_frame(Z)
    out.residuals["adapted"] = _adaptedness(Z[0], W0)
    return out


def _adaptedness(Z0: Jet, W0: Jet) -> float:
    """|Z_0 ^ W_0| measuring proportionality of Z_0 to the lift of f."""
    x = contract("i,j->ij", Z0, W0)
    return (x - x.transpose(1, 0)).max_abs()


def maurer_cartan(frame: QFrameField) -> Jet:
    """pi with dZ_L = pi_L^M Z_M, solved column by column."""
    Z = frame.Z
    size = frame.size
    dZ = frame.calc.dfun(Z)                                # [L, i, k]
    m = dZ.shape[-1]
    rhs = dZ.transpose(1, 0, 2).reshape(size, size * m)    # [i, (L, k)]
    try:
        x = jet_linear_solve(Z.transpose(1, 0), rhs)       # [M, (L, k)]
    except JetError as exc:
        raise QFrameError(f"singular frame matrix: {exc}") from None
    return x.reshape(size, size, m).transpose(1, 0, 2)


def mc_residuals(frame: QFrameField, pi: Jet) -> Dict[str, float]:
    """Flatness d pi = pi ^ pi and preservation of the quadric form."""
    calc = frame.calc
    size = frame.size
    flat = calc.d1(pi) - FrameCalculus.wedge_mat(pi, pi)
    J = Jet.constant(pi.ctx, q_gram_target(size))
    form = contract("lgk,gm->lmk", pi, J) + contract("lg,mgk->lmk", J, calc.conj(pi))
    trace = sum(pi[L, L] for L in range(size))
    return {"flatness": flat.max_abs(), "form_preservation": form.max_abs(),
            "trace": trace.max_abs()}


def xi_form(frame: QFrameField, pi: Jet) -> Jet:
    """xi = -pi_0^0 - conj(pi_0^0), the form in d theta = i theta^A ^ theta_A + theta ^ xi."""
    return -pi[0, 0] - frame.calc.conj(pi[0, 0])


def target_phi_forms(geom):
    """Pulled-back target forms (phi_B^A, phi^A, psi) in the adapted frame, from target tensors."""
    calc = geom.src_calc
    ad = geom.adapted
    n, nh = geom.map.n, geom.map.n_hat
    tt = geom.target_tensors
    D, E, B = tt["D"], tt["E"], tt["B"]
    A = ad.torsion
    th = calc.unit(0)
    phi_ba = ad.omega + D[:, :, None] * th[None, None, :]
    rows = []
    for a in range(nh):
        comps = [E[a]] + [D[mu, a] for mu in range(n)] + [A[a, nu] for nu in range(n)]
        rows.append(Jet.stack(comps))
    phi_a = Jet.stack(rows)
    psi = Jet.stack([B] + [E[mu].conj() * 1j for mu in range(n)] + [E[nu] * -1j for nu in range(n)])
    return phi_ba, phi_a, psi


def induced_phi_forms(geom):
    """Tangential blocks of the target forms from the source forms and C, F, A."""
    from .pseudoconformal import pulled_back_phi_forms
    calc = geom.src_calc
    n = geom.map.n
    phi = pulled_back_phi_forms(geom.src_conn, geom.src_deb, geom.src_cf, calc)
    ic = geom.induced()
    C, F, A = ic["C"], ic["F"], ic["A"]
    th = calc.unit(0)
    th_up = Jet.stack([calc.unit(1 + a) for a in range(n)])
    th_bar = Jet.stack([calc.unit(n + 1 + a) for a in range(n)])
    phi_ba = phi.phi_beta_alpha + C[:, :, None] * th[None, None, :]
    phi_a = phi.phi_alpha + contract("ma,mk->ak", C, th_up) + F[:, None] * th[None, :]
    psi = (phi.psi + contract("m,mk->k", F.conj(), th_up) * 1j - contract("m,mk->k", F, th_bar) * 1j
           + A * th)
    return phi_ba, phi_a, psi


def piphi_dictionary_residual(frame: QFrameField, pi: Jet, geom, phi=None) -> Dict[str, float]:
    """Residuals of the relations between pi and the adapted coframe and target forms."""
    calc = frame.calc
    nh = frame.n_hat
    N = nh + 1
    ad = geom.adapted
    pb = ad.pullbacks                                    # (2 nh + 1, m)
    phi_ba, phi_a, psi = phi if phi is not None else target_phi_forms(geom)
    xi = xi_form(frame, pi)
    res = {}
    res["theta"] = (pi[0, N] - pb[0] * 2).max_abs()
    res["theta_A"] = (pi[0, 1:N] - pb[1:N]).max_abs()
    res["pi_A_N"] = (pi[1:N, N] - pb[N:] * 2j).max_abs()
    res["xi"] = xi.max_abs()
    eye = Jet.constant(pi.ctx, np.eye(nh))
    res["phi_BA"] = (phi_ba - (pi[1:N, 1:N] - eye[:, :, None] * pi[0, 0][None, None, :])).max_abs()
    res["phi_A"] = (phi_a - pi[N, 1:N] * 2).max_abs()
    res["psi"] = (psi + pi[N, 0] * 4).max_abs()
    res["pi_A_0"] = (pi[1:N, 0] + calc.conj(phi_a) * 1j).max_abs()
    trace = sum(phi_ba[C, C] for C in range(nh))
    res["trace"] = (pi[0, 0] * (nh + 2) + trace + xi).max_abs()
    res["pi_N_N"] = (pi[N, N] * (nh + 2) - calc.conj(trace) - xi).max_abs()
    return res


def induced_route_agreement(geom) -> Dict[str, float]:
    """Tangential target forms from target tensors against the source forms shifted by C, F, A."""
    n = geom.map.n
    a_ba, a_a, a_psi = target_phi_forms(geom)
    b_ba, b_a, b_psi = induced_phi_forms(geom)
    return {"phi_ba": (a_ba[:n, :n] - b_ba).max_abs(), "phi_a": (a_a[:n] - b_a).max_abs(),
            "psi": (a_psi - b_psi).max_abs()}
