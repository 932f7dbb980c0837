"""Charts of real hypersurfaces and their admissible coframes.

Conventions
-----------
Ambient real coordinates are ordered (Re Z_0, Im Z_0, Re Z_1, ...).  A chart
has m real variables and an embedding Z(x) given by n+1 complex jets.

Vector fields are arrays of chart components, 1-forms arrays of components
in the dx basis, 2-forms antisymmetric m x m arrays with
(a wedge b)_{ij} = a_i b_j - a_j b_i.

The frame of an admissible coframe is stored as an m x m jet matrix ``E``
whose rows are T, L_1..L_n, conj(L_1)..conj(L_n); the coframe ``Theta`` has
rows theta, theta^1..theta^n, conj(theta^1).. and satisfies Theta E^T = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .jets import Jet, JetContext, JetError, contract, graph_embedding, implicit_graph_jet, jet_linear_solve
from .polynomial import PolynomialSpec


class CRError(ValueError):
    pass


@dataclass(frozen=True)
class HypersurfaceSpec:
    ambient_complex_dim: int
    rho: PolynomialSpec
    base_point: tuple

    def __post_init__(self):
        bp = tuple(complex(z) for z in self.base_point)
        object.__setattr__(self, "base_point", bp)
        if self.rho.num_complex_vars != self.ambient_complex_dim or len(bp) != self.ambient_complex_dim:
            raise CRError("dimension mismatch between rho, base point and ambient dimension")

    @property
    def n(self) -> int:
        return self.ambient_complex_dim - 1

    def validate(self):
        """Raise if the base point is off the zero set or rho is singular there."""
        if not self.rho.is_real():
            raise CRError("defining polynomial is not real-valued")
        val = self.rho(self.base_point)
        if abs(val) > 1e-12:
            raise CRError(f"base point is off the zero set: rho = {val:.3e}")
        grad = np.array([self.rho.d_z(j)(self.base_point) for j in range(self.ambient_complex_dim)])
        if np.max(np.abs(grad)) < 1e-12:
            raise CRError("d rho vanishes at the base point")
        return self

    def real_gradient(self) -> np.ndarray:
        """Gradient of rho in the real coordinates at the base point."""
        g = []
        for j in range(self.ambient_complex_dim):
            rz = self.rho.d_z(j)(self.base_point)
            g += [2 * rz.real, -2 * rz.imag]
        return np.array(g)


class Chart:
    """A parametrization x -> Z(x) of a neighbourhood of the base point.

    ``coords`` lists, for graph charts, which ambient real coordinate each
    chart variable equals; it is None for general parametrizations, in which
    case tangent vectors are converted with the Jacobian.
    """

    def __init__(self, hypersurface: HypersurfaceSpec, ctx: JetContext, embedding: Sequence[Jet],
                 graph_jet: Optional[Jet] = None, solve_var: Optional[int] = None,
                 coords: Optional[List[int]] = None):
        self.hypersurface = hypersurface
        self.ctx = ctx
        self.embedding = Jet.stack(list(embedding))
        self.graph_jet = graph_jet
        self.solve_var = solve_var
        self.coords = coords
        self.dZ = self.embedding.gradient()           # (n+1, m)
        self._rho_cache = {}

    @property
    def m(self) -> int:
        return self.ctx.num_vars

    @property
    def n(self) -> int:
        return self.hypersurface.n

    def ambient(self, poly: PolynomialSpec) -> Jet:
        """Pull back an ambient polynomial function."""
        Z = list(self.embedding)
        return poly.evaluate_jets(Z, [z.conj() for z in Z])

    def rho_derivs(self):
        """(rho_Z, rho_Zbar, rho_{Z Zbar}) composed with the embedding."""
        if not self._rho_cache:
            rho = self.hypersurface.rho
            N = self.n + 1
            rz = Jet.stack([self.ambient(rho.d_z(j)) for j in range(N)])
            rzb = Jet.stack([self.ambient(rho.d_zbar(k)) for k in range(N)])
            hess = Jet.stack([Jet.stack([self.ambient(rho.d_z(j).d_zbar(k)) for k in range(N)])
                              for j in range(N)])
            self._rho_cache.update(rz=rz, rzb=rzb, hess=hess)
        c = self._rho_cache
        return c["rz"], c["rzb"], c["hess"]

    def real_jacobian(self) -> Jet:
        """d(ambient real coordinates)/dx, shape (2(n+1), m)."""
        re = (self.dZ + self.dZ.conj()) * 0.5
        im = (self.dZ - self.dZ.conj()) * (-0.5j)
        N = self.n + 1
        return Jet.stack([re, im], axis=1).reshape(2 * N, self.m)

    def from_ambient_real(self, w: Jet) -> Jet:
        """Chart components of a tangent vector given by its real ambient components (axis 0)."""
        if self.coords is not None:
            return w[self.coords]
        J = self.real_jacobian()
        JtJ = contract("ki,kj->ij", J, J)
        tail = "".join("pqrs"[: w.ndim - 1])
        rhs = contract(f"ki,k{tail}->i{tail}", J, w)
        if w.ndim == 1:
            return jet_linear_solve(JtJ, rhs)
        flat = rhs.reshape(self.m, -1)
        return jet_linear_solve(JtJ, flat).reshape(rhs.shape)

    def from_holomorphic(self, v: Jet) -> Jet:
        """Chart components of the tangent (1,0) vector sum_k v_k d/dZ_k (axis 0 of v)."""
        N = self.n + 1
        w = Jet.stack([v * 0.5, v * (-0.5j)], axis=1).reshape((2 * N,) + v.shape[1:])
        return self.from_ambient_real(w)

    def pushforward_holomorphic(self, X: Jet) -> Jet:
        """Holomorphic ambient components X(Z_k) of chart vectors X (last axis = chart index)."""
        lead = "abcd"[: X.ndim - 1]
        return contract(f"{lead}i,ki->{lead}k", X, self.dZ)


def build_chart(h: HypersurfaceSpec, ctx: JetContext) -> Chart:
    """Graph chart solving for the real coordinate with the largest gradient component."""
    h.validate()
    g = h.real_gradient()
    solve_var = int(np.argmax(np.abs(g)))
    graph = implicit_graph_jet(h.rho, h.base_point, solve_var, ctx)
    emb = graph_embedding(h.base_point, solve_var, graph)
    coords = [k for k in range(2 * (h.n + 1)) if k != solve_var]
    return Chart(h, ctx, emb, graph_jet=graph, solve_var=solve_var, coords=coords)


@dataclass
class ContactData:
    """A contact form on the chart together with its exterior derivative."""
    theta: Jet          # (m,)
    dtheta: Jet         # (m, m)

    def scaled(self, c: float) -> "ContactData":
        return ContactData(self.theta * c, self.dtheta * c)


def ambient_contact(chart: Chart, poly: Optional[PolynomialSpec] = None) -> ContactData:
    """Pullback of i dbar(rho) and of its differential i d dbar(rho).

    ``poly`` defaults to the chart's defining polynomial.
    """
    if poly is None:
        _, rzb, hess = chart.rho_derivs()
    else:
        N = chart.n + 1
        rzb = Jet.stack([chart.ambient(poly.d_zbar(k)) for k in range(N)])
        hess = Jet.stack([Jet.stack([chart.ambient(poly.d_z(j).d_zbar(k)) for k in range(N)])
                          for j in range(N)])
    dZ = chart.dZ
    dZb = dZ.conj()
    theta = contract("k,ki->i", rzb, dZb) * 1j
    A = contract("jk,ji->ki", hess, dZ)          # sum_j rho_{j kbar} dZ_j
    dtheta = (contract("ki,kl->il", A, dZb) - contract("kl,ki->il", A, dZb)) * 1j
    return ContactData(theta, dtheta)


@dataclass
class RawFrame:
    L: Jet              # (n, m) chart components
    L_hol: Jet          # (n, n+1) ambient holomorphic components
    contact: ContactData
    pivot: int


def raw_cr_frame(chart: Chart) -> RawFrame:
    """CR vector fields rho_{Z_j*} d_{Z_a} - rho_{Z_a} d_{Z_j*} and theta = i dbar(rho)."""
    rz, _, _ = chart.rho_derivs()
    N = chart.n + 1
    j_star = int(np.argmax(np.abs(rz.value)))
    rows = []
    zero = Jet.zeros(chart.ctx)
    for a in range(N):
        if a == j_star:
            continue
        comp = [zero] * N
        comp[a] = rz[j_star]
        comp[j_star] = -rz[a]
        rows.append(Jet.stack(comp))
    L_hol = Jet.stack(rows)                                  # (n, N)
    L = chart.from_holomorphic(L_hol.transpose(1, 0)).transpose(1, 0)
    return RawFrame(L, L_hol, ambient_contact(chart), j_star)


def two_form_eval(F: Jet, X: Jet, Y: Jet) -> Jet:
    """F(X_a, Y_b) for stacks of vectors X (a, m) and Y (b, m)."""
    return contract("aj,bj->ab", contract("ai,ij->aj", X, F), Y)


def characteristic_field(contact: ContactData, chart: Optional[Chart] = None) -> Jet:
    """Reeb field: T contracted into d theta vanishes and theta(T) = 1.

    Solved as (d theta^T + theta theta^T) T = theta, which has the same unique
    solution whenever d theta is nondegenerate on ker theta.
    """
    th, dth = contact.theta, contact.dtheta
    A = dth.transpose(1, 0) + contract("i,j->ij", th, th)
    try:
        return jet_linear_solve(A, th)
    except JetError as exc:
        raise CRError(f"Levi-degenerate contact form: {exc}") from None


@dataclass
class AdmissibleCoframe:
    chart: Chart
    contact: ContactData
    E: Jet              # (m, m) frame rows T, L, conj L
    Theta: Jet          # (m, m) coframe rows theta, theta^a, conj theta^a
    levi: Jet           # (n, n) normalized Levi matrix
    L_hol: Jet          # (n, n+1) ambient holomorphic components of L_alpha
    raw_levi: Jet       # Levi matrix of the raw frame

    @property
    def n(self) -> int:
        return (self.E.shape[0] - 1) // 2

    @property
    def m(self) -> int:
        return self.E.shape[0]

    @property
    def T(self) -> Jet:
        return self.E[0]

    @property
    def L(self) -> Jet:
        return self.E[1:self.n + 1]

    @property
    def theta(self) -> Jet:
        return self.Theta[0]

    @property
    def theta_alpha(self) -> Jet:
        return self.Theta[1:self.n + 1]

    def residuals(self) -> dict:
        """Duality, Reeb, realness and Levi normalization residuals (max over jet coefficients)."""
        m, n = self.m, self.n
        eye = Jet.constant(self.E.ctx, np.eye(m))
        dual = (contract("ai,bi->ab", self.Theta, self.E) - eye).max_abs()
        th, dth = self.contact.theta, self.contact.dtheta
        reeb = max(contract("i,ij->j", self.T, dth).max_abs(), (contract("i,i->", th, self.T) - 1).max_abs())
        real = max(th.imag.max_abs(), self.T.imag.max_abs())
        # d theta = i sum theta^a ^ conj(theta^a)
        ta, tb = self.Theta[1:n + 1], self.Theta[n + 1:]
        model = (contract("ai,aj->ij", ta, tb) - contract("aj,ai->ij", ta, tb)) * 1j
        levi_form = (dth - model).max_abs()
        levi_id = (self.levi - Jet.constant(self.E.ctx, np.eye(n))).max_abs()
        return {"duality": dual, "reeb": reeb, "realness": real, "dtheta_levi": levi_form,
                "levi_identity": levi_id}


def levi_matrix(L: Jet, dtheta: Jet) -> Jet:
    """g_{a bbar} = -i d theta(L_a, conj L_b)."""
    return two_form_eval(dtheta, L, L.conj()) * (-1j)


def normalize_admissible(raw: RawFrame, chart: Chart, contact: Optional[ContactData] = None,
                         rotation: Optional[np.ndarray] = None) -> AdmissibleCoframe:
    """Gram-Schmidt the CR frame in index order and build the dual coframe.

    ``rotation`` optionally applies a constant unitary matrix to the
    normalized frame (L_a -> sum_b U_ab L_b).
    """
    contact = raw.contact if contact is None else contact
    L, Lh = raw.L, raw.L_hol
    n = L.shape[0]
    g_raw = levi_matrix(L, contact.dtheta)
    g0 = g_raw.value
    if np.max(np.abs(g0 - g0.conj().T)) > 1e-8 or np.min(np.linalg.eigvalsh((g0 + g0.conj().T) / 2)) <= 1e-12:
        raise CRError("Levi form is not positive definite at the base point")

    def inner(X, Y):
        return (two_form_eval(contact.dtheta, X[None], Y.conj()[None]) * (-1j))[0, 0]

    vecs, hols = [], []
    for a in range(n):
        v, vh = L[a], Lh[a]
        for u, uh in zip(vecs, hols):
            c = inner(v, u)
            v = v - u * c
            vh = vh - uh * c
        nrm = inner(v, v).real.sqrt()
        v, vh = v / nrm, vh / nrm
        vecs.append(v)
        hols.append(vh)
    L = Jet.stack(vecs)
    Lh = Jet.stack(hols)
    if rotation is not None:
        U = Jet.constant(L.ctx, np.asarray(rotation, dtype=complex))
        L = contract("ab,bi->ai", U, L)
        Lh = contract("ab,bk->ak", U, Lh)
    T = characteristic_field(contact, chart)
    E = Jet.stack([T] + list(L) + list(L.conj()))
    m = E.shape[0]
    Theta = jet_linear_solve(E, Jet.constant(E.ctx, np.eye(m))).transpose(1, 0)
    levi = levi_matrix(L, contact.dtheta)
    return AdmissibleCoframe(chart, contact, E, Theta, levi, Lh, g_raw)


def admissible_coframe(h: HypersurfaceSpec, ctx: JetContext, rotation=None) -> AdmissibleCoframe:
    """Chart, raw frame and normalization in one call, with theta = i dbar(rho)."""
    chart = build_chart(h, ctx)
    return normalize_admissible(raw_cr_frame(chart), chart, rotation=rotation)
