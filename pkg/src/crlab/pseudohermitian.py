"""Webster connection, torsion, curvature and covariant differentiation.

Storage (unitary frame, g = delta):
    omega[a, b, k]   = omega_a^b evaluated on frame vector k
    torsion[b, v]    = A^b_{v bar}  (= A^{bv})
    R[a, b, m, v]    = R_a^b_{m vbar} = R_{a bbar m vbar}
    W[a, b, m]       = W_a^b_m,   Wbar[a, b, v] = W^b_{a vbar}
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .cr_manifold import AdmissibleCoframe
from .forms import FrameCalculus
from .jets import Jet, contract
from .numerics import LinearSolveInfo, solve_real_linear
from .tensors import IndexedTensor, ricci_trace


@dataclass
class ConnectionData:
    omega: Jet
    torsion: Jet
    info: LinearSolveInfo
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def n(self):
        return self.torsion.shape[0]


def torsion_forms(calc: FrameCalculus, A: Jet):
    """(tau^b, tau_a) as 1-form arrays: tau^b = A^b_vbar theta^vbar, tau_a = conj(A^{av}) theta^v."""
    n = calc.n
    z = Jet.zeros(A.ctx, (n, 1), A.trusted)
    up = Jet.stack([z[:, 0]] + [z[:, 0]] * n + [A[:, v] for v in range(n)], axis=1)
    low = Jet.stack([z[:, 0]] + [A.conj()[:, v] for v in range(n)] + [z[:, 0]] * n, axis=1)
    return up, low


def webster_connection(cf: AdmissibleCoframe, calc: Optional[FrameCalculus] = None) -> ConnectionData:
    """Solve d theta^b = theta^a ^ omega_a^b + theta ^ tau^b with omega skew-Hermitian."""
    calc = calc or FrameCalculus(cf.E, cf.Theta)
    n, m = calc.n, calc.m
    sig = calc.sigma
    nw = n * n * m
    iu = np.triu_indices(m, 1)

    def op(u):
        w = u[:nw].reshape(n, n, m)
        A = u[nw:].reshape(n, n)
        eqs = []
        for b in range(n):
            F = np.zeros((m, m), dtype=complex)
            for a in range(n):
                F[1 + a, :] += w[a, b]
                F[:, 1 + a] -= w[a, b]
            tau = np.zeros(m, dtype=complex)
            tau[n + 1:] = A[b]
            F[0, :] += tau
            F[:, 0] -= tau
            eqs.append(F[iu])
        skew = w + np.conj(w.transpose(1, 0, 2)[..., sig])
        return np.concatenate(eqs + [skew.ravel()])

    rhs_struct = Jet.stack([calc.de[1 + b][iu] for b in range(n)]).reshape(-1)
    zero = Jet.zeros(calc.de.ctx, (n * n * m,), calc.de.trusted)
    rhs = Jet(zero.ctx, np.concatenate([rhs_struct.c, zero.c]), calc.de.trusted)
    u, info = solve_real_linear(op, nw + n * n, rhs)
    omega = u[:nw].reshape(n, n, m)
    A = u[nw:].reshape(n, n)
    conn = ConnectionData(omega, A, info)
    conn.residuals = connection_residuals(conn, calc)
    return conn


def connection_residuals(conn: ConnectionData, calc: FrameCalculus) -> Dict[str, float]:
    n = calc.n
    w, A = conn.omega, conn.torsion
    tau, _ = torsion_forms(calc, A)
    units = Jet.stack([calc.unit(1 + a) for a in range(n)])
    x = contract("ab,ajc->jbc", units, w)                # sum_a theta^a (x) omega_a^j
    wedge = x - x.swapaxes(-1, -2)
    t = calc.unit(0)[None, :, None] * tau[:, None, :]
    struct = (calc.de[1:n + 1] - wedge - (t - t.swapaxes(-1, -2))).max_abs()
    skew = (w + calc.conj(w.transpose(1, 0, 2))).max_abs()
    sym = (A - A.transpose(1, 0)).max_abs()
    return {"structure": struct, "skew_hermitian": skew, "torsion_symmetry": sym}


@dataclass
class CurvaturePack:
    R: Jet
    W: Jet
    Wbar: Jet
    ricci: Jet
    scalar: Jet
    residuals: Dict[str, float]
    Omega: Jet = None
    S: Optional[IndexedTensor] = None
    D: Optional[Jet] = None
    E: Optional[Jet] = None
    B: Optional[Jet] = None

    def tensor(self) -> IndexedTensor:
        return IndexedTensor(self.R, ("u", "b", "u", "b"), "R")


def webster_curvature(conn: ConnectionData, cf: AdmissibleCoframe,
                      calc: Optional[FrameCalculus] = None) -> CurvaturePack:
    """Decompose d omega - omega ^ omega into R, W and the torsion terms."""
    calc = calc or FrameCalculus(cf.E, cf.Theta)
    n = calc.n
    w = conn.omega
    Omega = calc.d1(w) - FrameCalculus.wedge_mat(w, w)
    tau_up, tau_low = torsion_forms(calc, conn.torsion)
    th_low = Jet.stack([calc.unit(n + 1 + a) for a in range(n)])      # theta_a = theta^abar
    th_up = Jet.stack([calc.unit(1 + b) for b in range(n)])
    t1 = th_low[:, None, :, None] * tau_up[None, :, None, :]
    t2 = tau_low[:, None, :, None] * th_up[None, :, None, :]
    extra = (t1 - t1.swapaxes(-1, -2) - t2 + t2.swapaxes(-1, -2)) * 1j
    Rem = Omega - extra
    u = slice(1, n + 1)
    b = slice(n + 1, 2 * n + 1)
    R = Rem[:, :, u, b]
    W = Rem[:, :, u, 0]
    Wbar = -Rem[:, :, b, 0]
    resid = max(Rem[:, :, u, u].max_abs(), Rem[:, :, b, b].max_abs())
    herm = (R - R.transpose(1, 0, 3, 2).conj()).max_abs()
    ric, scal = ricci_trace(R)
    return CurvaturePack(R, W, Wbar, ric, scal,
                         {"decomposition": resid, "hermitian_pair": herm}, Omega=Omega)


# -- covariant differentiation --------------------------------------------

class Connections:
    """Connection matrices used when differentiating tensors.

    ``omega`` is the tangential connection (n, n, m); ``normal`` the optional
    normal connection (d, d, m); both skew-Hermitian in unitary frames.
    """

    def __init__(self, calc: FrameCalculus, omega: Jet, normal: Optional[Jet] = None):
        self.calc = calc
        self.omega = omega
        self.normal = normal
        n, m = calc.n, calc.m
        self._gamma = {"u": omega, "b": calc.conj(omega)}
        if normal is not None:
            self._gamma["nu"] = normal
            self._gamma["nb"] = calc.conj(normal)
        # full frame slot: 0 untouched, unbarred and barred blocks
        z = Jet.zeros(omega.ctx, (m, m, m), omega.trusted)
        c = z.c.copy()
        c[1:n + 1, 1:n + 1] = self._gamma["u"].c
        c[n + 1:, n + 1:] = self._gamma["b"].c
        self._gamma["f"] = Jet(omega.ctx, c, omega.trusted)

    def gamma(self, kind: str) -> Optional[Jet]:
        if kind == "0":
            return None
        if kind not in self._gamma:
            raise ValueError(f"no connection available for slot kind {kind!r}")
        return self._gamma[kind]


_LETTERS = "abcdefghijkl"


def covariant_derivative(t: IndexedTensor, conns: Connections) -> IndexedTensor:
    """nabla t with an extra last 'f' index over the frame (T, L_mu, L_mubar).

    Lowered slot with connection matrix G (tangential or normal, possibly
    conjugated) contributes  - sum_j t[.., j, ..] G[i, j](E_k).
    """
    data = t.data
    out = conns.calc.dfun(data)
    r = data.ndim
    letters = _LETTERS[:r]
    for s, kind in enumerate(t.kinds):
        G = conns.gamma(kind)
        if G is None:
            continue
        tl = letters[:s] + "y" + letters[s + 1:]
        out = out - contract(f"{tl},{letters[s]}yz->{letters}z", data, G)
    return IndexedTensor(out, t.kinds + ("f",), f"nabla {t.name}")


def lee_identity_residual(pack: CurvaturePack, conn: ConnectionData, conns: Connections) -> Dict[str, float]:
    """Compare W with derivatives of the torsion (both evaluated at the base point)."""
    n = conn.n
    A_low = IndexedTensor(conn.torsion.conj(), ("u", "u"), "A_low")
    A_up = IndexedTensor(conn.torsion, ("b", "b"), "A_up")
    dAl = covariant_derivative(A_low, conns).data
    dAu = covariant_derivative(A_up, conns).data
    # W_a^b_m = A_{am;}^b  (derivative along conj L_b);  W^b_{a vbar} = A^b_{vbar;a}
    lhs1 = pack.W.value                                   # [a, b, m]
    rhs1 = np.transpose(dAl.value[:, :, n + 1:], (0, 2, 1))
    lhs2 = pack.Wbar.value                                # [a, b, v]
    rhs2 = np.transpose(dAu.value[:, :, 1:n + 1], (2, 0, 1))
    r1 = float(np.max(np.abs(lhs1 - rhs1)))
    r2 = float(np.max(np.abs(lhs2 - rhs2)))
    return {"lee": max(r1, r2), "W_norm": float(max(np.abs(lhs1).max(), np.abs(lhs2).max())),
            "dA_norm": float(max(np.abs(rhs1).max(), np.abs(rhs2).max()))}
