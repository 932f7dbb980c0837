"""CR immersions into spheres.

A map f is given by holomorphic polynomial components sending the source
hypersurface M into a sphere.  The source carries the contact form
theta = i dbar(rho_hat o f), which is the pullback of the sphere's
i dbar(rho_hat).  The target is parametrized near f(M) by

    Phi(x, s) = r P / |P|,   P = f(Z(x)) + sum_k s_k N_k,

where x are the source chart variables and the N_k span the complex normal
directions, so the slice s = 0 is f(M) and restriction to M means dropping
the s variables.  The target contact form is rescaled by
u = 1 + sum_k s_k u_k so that its Reeb field is tangent to f(M).

Index conventions follow pseudohermitian.py; adapted target indices run
over A = (alpha, a) with the n tangential ones first.  Stored arrays:

    sff[alpha, a, beta]             = omega_alpha^a_beta
    derivs[l][g1, a, g2, g3, ..]    = omega_{g1}^a_{g2; g3 ..}
    Dhat[beta, a]                   = Dhat_beta^a
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .cr_manifold import (AdmissibleCoframe, Chart, ContactData, HypersurfaceSpec,
                          ambient_contact, build_chart, normalize_admissible, raw_cr_frame)
from .forms import FrameCalculus
from .jets import Jet, JetContext, contract, extend_jet, get_context, restrict_jet
from .numerics import numerical_rank
from .polynomial import PolynomialSpec
from .pseudoconformal import (chern_moser_tensor, cm_structure_residuals, deb_coefficients,
                              pulled_back_phi_forms)
from .pseudohermitian import (Connections, covariant_derivative, webster_connection,
                              webster_curvature)
from .tensors import IndexedTensor, conformal_flat_decompose, levi_multiple, traceless_project


class MapError(ValueError):
    pass


class BudgetError(MapError):
    """Raised when the jet order is too small for the requested derivatives."""


def _require(J: Jet, what: str):
    if J.trusted < 0:
        raise BudgetError(f"jet order budget exhausted while computing {what}")
    return J


# -- map specification ---------------------------------------------------------

@dataclass(frozen=True)
class CRMapSpec:
    source: HypersurfaceSpec
    target: HypersurfaceSpec
    components: Tuple[PolynomialSpec, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        N = self.source.ambient_complex_dim
        if len(comps) != self.target.ambient_complex_dim:
            raise MapError(f"{len(comps)} components for a target in C^{self.target.ambient_complex_dim}")
        for k, c in enumerate(comps):
            if c.num_complex_vars != N:
                raise MapError(f"component {k} lives in C^{c.num_complex_vars}, expected C^{N}")
            if not c.is_holomorphic():
                raise MapError(f"component {k} is not holomorphic")
        if self.d < 0:
            raise MapError("target dimension is smaller than the source dimension")
        img = self.image_point()
        if np.max(np.abs(img - np.asarray(self.target.base_point))) > 1e-10:
            raise MapError("target base point is not the image of the source base point")
        if not self.is_sphere_target():
            raise MapError("target must be a sphere sum |Z'|^2 - r^2")

    @classmethod
    def to_sphere(cls, source: HypersurfaceSpec, components: Sequence[PolynomialSpec],
                  radius: float = 1.0) -> "CRMapSpec":
        comps = tuple(components)
        img = tuple(complex(c(source.base_point)) for c in comps)
        target = HypersurfaceSpec(len(comps), PolynomialSpec.sphere(len(comps), radius), img)
        return cls(source, target, comps)

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def n_hat(self) -> int:
        return self.target.n

    @property
    def d(self) -> int:
        return self.n_hat - self.n

    @property
    def radius(self) -> float:
        const = self.target.rho.terms().get(((0,) * self.n_hat + (0,), (0,) * (self.n_hat + 1)), 0)
        return float(np.sqrt(max(-complex(const).real, 0.0)))

    def is_sphere_target(self) -> bool:
        r = self.radius
        if r <= 0:
            return False
        diff = (self.target.rho - PolynomialSpec.sphere(self.n_hat + 1, r)).terms()
        return all(abs(v) < 1e-12 for v in diff.values())

    def image_point(self) -> np.ndarray:
        return np.array([complex(c(self.source.base_point)) for c in self.components])

    def composed_rho(self) -> PolynomialSpec:
        return self.target.rho.compose(list(self.components))

    def map_jets(self, chart: Chart) -> Jet:
        """f o embedding on the source chart."""
        Z = list(chart.embedding)
        Zb = [z.conj() for z in Z]
        return Jet.stack([c.evaluate_jets(Z, Zb) for c in self.components])

    def check(self, chart: Chart, tol: float = 1e-10) -> Dict[str, float]:
        """Sphere-to-sphere and immersivity invariants on a source chart."""
        comp = chart.ambient(self.composed_rho()).max_abs()
        if comp > tol:
            raise MapError(f"rho_hat o f does not vanish on the source: {comp:.3e}")
        raw = raw_cr_frame(chart)
        F = self.map_jets(chart)
        push = contract("ai,ki->ak", raw.L, F.gradient()).value
        rank = numerical_rank(push).rank
        if rank < self.n:
            raise MapError(f"map is not immersive at the base point (rank {rank} < {self.n})")
        return {"composed_rho": comp, "pushforward_rank": rank}


# -- coframes ---------------------------------------------------------------------

def source_coframe(cr_map: CRMapSpec, ctx: JetContext, rotation=None) -> AdmissibleCoframe:
    """Admissible coframe on M for theta = i dbar(rho_hat o f)."""
    chart = build_chart(cr_map.source, ctx)
    contact = ambient_contact(chart, cr_map.composed_rho())
    return normalize_admissible(raw_cr_frame(chart), chart, contact, rotation=rotation)


def _times_variable(J: Jet, var: int) -> Jet:
    """Exact product with a coordinate variable (raises the trusted order by one)."""
    ctx = J.ctx
    src = np.nonzero(ctx.degrees < ctx.order)[0]
    e = ctx.exponents[src].copy()
    e[:, var] += 1
    c = np.zeros_like(J.c)
    c[..., ctx.lookup(e)] = J.c[..., src]
    return Jet(ctx, c, min(J.trusted + 1, ctx.order))


def _outer(a: Jet, b: Jet) -> Jet:
    return contract("i,j->ij", a, b)


def normal_directions(cr_map: CRMapSpec, src_cf: AdmissibleCoframe) -> np.ndarray:
    """Orthonormal complex directions orthogonal to f(p) and f_* T^{1,0}_p M."""
    F = cr_map.map_jets(src_cf.chart)
    push = contract("ai,ki->ak", src_cf.L, F.gradient()).value
    W = np.vstack([F.value[None, :], push])
    return scipy.linalg.null_space(W.conj()).T


def target_reference_coframe(cr_map: CRMapSpec, src_cf: AdmissibleCoframe,
                             ctx_hat: JetContext) -> AdmissibleCoframe:
    """Admissible (not yet adapted) coframe on the target chart around f(M)."""
    m = src_cf.m
    ctx = src_cf.E.ctx
    if ctx_hat.num_vars != 2 * cr_map.n_hat + 1 or ctx_hat.order != ctx.order:
        raise MapError("target context must have 2 n_hat + 1 variables and the source order")
    F = cr_map.map_jets(src_cf.chart)
    vs = normal_directions(cr_map, src_cf)
    if vs.shape[0] != cr_map.d:
        raise MapError("could not find the normal directions")
    normals = [v * u for v in vs for u in (1.0, 1j)]
    P = extend_jet(F, ctx_hat)
    for k, Nk in enumerate(normals):
        s = Jet.variable(ctx_hat, m + k)
        P = P + Jet.stack([s * complex(z) for z in Nk])
    norm2 = sum(P[k] * P[k].conj() for k in range(P.shape[0])).real
    Phi = P * (cr_map.radius / norm2.sqrt())
    chart = Chart(cr_map.target, ctx_hat, list(Phi))
    raw = raw_cr_frame(chart)
    c0 = raw.contact
    # rescale so that the Reeb field is tangent to f(M) along s = 0
    dth_r = restrict_jet(c0.dtheta, ctx)
    T = src_cf.T
    u = Jet.constant(ctx_hat, 1.0)
    for k in range(len(normals)):
        uk = contract("i,i->", T, dth_r[:m, m + k])
        u = u + _times_variable(extend_jet(uk, ctx_hat), m + k)
    du = u.gradient()
    theta = c0.theta * u
    dtheta = c0.dtheta * u + _outer(du, c0.theta) - _outer(c0.theta, du)
    return normalize_admissible(raw, chart, ContactData(theta, dtheta))


# -- adapted frames -----------------------------------------------------------------

def _frame_transform(U: Jet) -> Jet:
    """Matrix acting on coframe rows (theta, theta^A, theta^Abar) for frame change U."""
    nh = U.shape[0]
    ctx = U.ctx
    one = Jet.constant(ctx, np.ones(1))
    z = Jet.zeros(ctx, (nh,), U.trusted)
    rows = [Jet.stack([one[0]] + list(z) + list(z))]
    Uc = U.conj()
    for A in range(nh):
        rows.append(Jet.stack([z[0]] + list(Uc[A]) + list(z)))
    for A in range(nh):
        rows.append(Jet.stack([z[0]] + list(z) + list(U[A])))
    return Jet.stack(rows)


def transform_tensor(data: Jet, kinds: Sequence[str], U: Jet) -> Jet:
    """Components in the adapted frame L~_A = U_AB L^_B (unbarred slots by U, barred by conj U)."""
    out = data
    Uc = U.conj()
    letters = "abcdefgh"[: len(kinds)]
    for s, kind in enumerate(kinds):
        if kind == "0":
            continue
        M = U if kind == "u" else Uc
        src = letters[:s] + "y" + letters[s + 1:]
        out = contract(f"{letters[s]}y,{src}->{letters}", M, out)
    return out


@dataclass
class AdaptedFrameData:
    target_coframe: AdmissibleCoframe
    U: Jet                      # (n_hat, n_hat) along M
    pullbacks: Jet              # adapted coframe on the source frame, (2 n_hat + 1, m)
    P: Jet                      # reference coframe on the source frame
    L_hol: Jet                  # adapted L~_A in ambient holomorphic components along M
    complement: List[int]
    omega: Optional[Jet] = None     # adapted target connection on the source frame (n_hat, n_hat, m)
    torsion: Optional[Jet] = None   # adapted target torsion along M
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def n_hat(self) -> int:
        return self.U.shape[0]

    def pull_back(self, eta: Jet) -> Jet:
        """Pullback to the source frame of target 1-forms in reference frame components."""
        ctx = self.U.ctx
        lead = "pqrs"[: eta.ndim - 1]
        return contract(f"{lead}j,jk->{lead}k", restrict_jet(eta, ctx), self.P)

    def restrict(self, data: Jet, kinds: Sequence[str]) -> Jet:
        """Target tensor (reference frame) restricted to M in the adapted frame."""
        return transform_tensor(restrict_jet(data, self.U.ctx), kinds, self.U)


def _complete_unitary(rows: List[Jet], nh: int, thresh: float = 0.1) -> Tuple[List[Jet], List[int]]:
    """Gram-Schmidt completion by reference basis vectors in index order."""
    ctx = rows[0].ctx
    out = list(rows)
    chosen = []

    def project(e):
        v = e
        for r in out:
            v = v - r * contract("i,i->", e, r.conj())
        return v

    cands = [Jet.constant(ctx, np.eye(nh)[A]) for A in range(nh)]
    resid = [float(np.linalg.norm(project(e).value)) for e in cands]
    order = [A for A in range(nh) if resid[A] > thresh]
    order += sorted((A for A in range(nh) if resid[A] <= thresh), key=lambda A: -resid[A])
    for A in order:
        if len(out) == nh:
            break
        v = project(cands[A])
        nv = float(np.linalg.norm(v.value))
        if nv < 1e-6:
            continue
        v = v / contract("i,i->", v, v.conj()).real.sqrt()
        out.append(v)
        chosen.append(A)
    if len(out) != nh:
        raise MapError("could not complete the adapted frame")
    return out, chosen


def adapt_target_frame(cr_map: CRMapSpec, src_cf: AdmissibleCoframe, tgt_cf: AdmissibleCoframe,
                       tgt_conn=None, src_calc: Optional[FrameCalculus] = None) -> AdaptedFrameData:
    """Frame change U along M putting the target frame in adapted position."""
    ctx = src_cf.E.ctx
    n, nh, m = cr_map.n, cr_map.n_hat, src_cf.m
    calc = src_calc or FrameCalculus(src_cf.E, src_cf.Theta)
    Th = restrict_jet(tgt_cf.Theta, ctx)
    P = contract("ji,ki->jk", Th[:, :m], src_cf.E)             # theta^_j (f_* E_k)
    c = [P[1:nh + 1, 1 + b] for b in range(n)]
    if numerical_rank(np.array([r.value for r in c])).rank < n:
        raise MapError("pushforward of the CR frame is rank deficient")
    rows, chosen = _complete_unitary(c, nh)
    U = Jet.stack(rows)
    Mfull = _frame_transform(U)
    pull = contract("ij,jk->ik", Mfull, P)
    expected = np.zeros((2 * nh + 1, m))
    expected[0, 0] = 1
    for a in range(n):
        expected[1 + a, 1 + a] = 1
        expected[1 + nh + a, 1 + n + a] = 1
    eye = Jet.constant(ctx, np.eye(nh))
    res = {
        "pullback": (pull - Jet.constant(ctx, expected)).max_abs(),
        "unitary": (contract("ab,cb->ac", U, U.conj()) - eye).max_abs(),
    }
    Lh = contract("ab,bk->ak", U, restrict_jet(tgt_cf.L_hol, ctx))
    data = AdaptedFrameData(tgt_cf, U, pull, P, Lh, chosen, residuals=res)
    if tgt_conn is None:
        tgt_conn = webster_connection(tgt_cf)
    w_ref = data.pull_back(tgt_conn.omega)
    dU = calc.dfun(U)
    Uh = U.conj().transpose(1, 0)
    data.omega = (contract("abk,bc->ack", dU, Uh)
                  + contract("ab,bdk->adk", U, contract("bdk,dc->bck", w_ref, Uh)))
    data.torsion = data.restrict(tgt_conn.torsion, ("b", "b"))
    return data


# -- second fundamental form ---------------------------------------------------------

@dataclass
class SffData:
    omega_sff: Jet                  # (n, d, n)
    derivs: Dict[int, Jet] = field(default_factory=dict)
    Dhat: Optional[Jet] = None      # (n, d)
    extrinsic: Optional[Jet] = None
    barred: Optional[Jet] = None    # omega_alpha^a_{beta; gamma bar}, (n, d, n, n)
    conns: Optional[Connections] = None
    normal_connection: Optional[Jet] = None
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.omega_sff.shape[0]

    @property
    def d(self) -> int:
        return self.omega_sff.shape[1]

    def tensor(self) -> IndexedTensor:
        return IndexedTensor(self.omega_sff, ("u", "nb", "u"), "sff")


def extrinsic_sff(cr_map: CRMapSpec, src_cf: AdmissibleCoframe, adapted: AdaptedFrameData,
                  calc: Optional[FrameCalculus] = None) -> Jet:
    """omega_{alpha abar beta} as the theta^abar coefficient of L_alpha L_beta (rho_hat_Zbar o f)."""
    calc = calc or FrameCalculus(src_cf.E, src_cf.Theta)
    n, nh = cr_map.n, cr_map.n_hat
    chart = src_cf.chart
    rho = cr_map.target.rho
    g = Jet.stack([chart.ambient(rho.d_zbar(k).compose(list(cr_map.components)))
                   for k in range(nh + 1)])
    W = calc.dfun(calc.dfun(g))                         # [k, b, a] = E_a E_b g_k
    W = W[:, 1:n + 1, 1:n + 1]
    Ln = adapted.L_hol[n:].conj()                       # conj(L~_a Z_k)
    return _require(contract("kba,ck->acb", W, Ln), "the extrinsic second fundamental form")


def second_fundamental_form(cr_map: CRMapSpec, adapted: AdaptedFrameData, src_cf: AdmissibleCoframe,
                            src_conn=None, calc: Optional[FrameCalculus] = None) -> SffData:
    """Intrinsic and extrinsic second fundamental forms and their agreement."""
    calc = calc or FrameCalculus(src_cf.E, src_cf.Theta)
    n, nh = cr_map.n, cr_map.n_hat
    w = adapted.omega
    sff_form = w[:n, n:]                                # omega_alpha^a on the source frame
    sff = sff_form[:, :, 1:n + 1]
    ext = extrinsic_sff(cr_map, src_cf, adapted, calc)
    res = {
        "route_agreement": (sff - ext).max_abs(),
        "symmetry": (sff - sff.transpose(2, 1, 0)).max_abs(),
        "form_type": max(sff_form[:, :, 0].max_abs(), sff_form[:, :, n + 1:].max_abs()),
        "normal_torsion": adapted.torsion[n:, :n].max_abs() if n < nh else 0.0,
        "sff_norm": sff.max_abs(),
    }
    if src_conn is not None:
        res["tangential_connection"] = (w[:n, :n] - src_conn.omega).max_abs()
        res["tangential_torsion"] = (adapted.torsion[:n, :n] - src_conn.torsion).max_abs()
    out = SffData(sff, {2: sff}, extrinsic=ext, normal_connection=w[n:, n:], residuals=res)
    if src_conn is not None:
        out.conns = Connections(calc, src_conn.omega, w[n:, n:])
    return out


def sff_covariant_derivatives(sff: SffData, conns: Optional[Connections] = None,
                              max_order: int = 3) -> SffData:
    """omega_{g1}^a_{g2; g3 .. gl} for l <= max_order, plus the barred first derivative."""
    conns = conns or sff.conns
    if conns is None:
        raise MapError("connections are required for covariant derivatives")
    n = sff.n
    cur = IndexedTensor(sff.omega_sff, ("u", "nb", "u"), "sff")
    full = covariant_derivative(cur, conns)
    sff.barred = full.data[..., n + 1:]
    sff.derivs = {2: sff.omega_sff}
    for l in range(3, max_order + 1):
        nxt = full.data[..., 1:n + 1]
        if nxt.trusted < 0:
            raise BudgetError(f"jet order budget exhausted at derivative order {l}")
        sff.derivs[l] = nxt
        cur = IndexedTensor(nxt, cur.kinds + ("u",), f"sff;{l - 2}")
        if l < max_order:
            full = covariant_derivative(cur, conns)
    return sff


# -- degeneracy filtration -------------------------------------------------------------

@dataclass
class DegeneracyProfile:
    dims: List[int]
    s0: int
    k0: int
    ambient_dim: int
    unstable: bool = False
    lower_bound: bool = False
    singular_values: List[List[float]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"dims": list(self.dims), "s0": self.s0, "k0": self.k0, "unstable": self.unstable,
                "lower_bound": self.lower_bound}


def _profile(blocks: List[np.ndarray], ambient_dim: int, base_dims: Dict[int, int] = None,
             offset: int = 0) -> DegeneracyProfile:
    dims, svs, unstable = [], [], False
    acc = []
    for k, blk in enumerate(blocks):
        acc.extend(list(blk))
        if base_dims and k in base_dims:
            dims.append(base_dims[k])
            svs.append([])
            continue
        rr = numerical_rank(np.array(acc)) if acc else None
        rank = (rr.rank if rr else 0) + offset
        unstable |= bool(rr and rr.unstable)
        dims.append(rank)
        svs.append(rr.singular_values if rr else [])
    top = max(dims)
    return DegeneracyProfile(dims, ambient_dim - top, dims.index(top), ambient_dim, unstable,
                             singular_values=svs)


def ek_spaces(cr_map: CRMapSpec, src_cf: AdmissibleCoframe, k_max: int,
              calc: Optional[FrameCalculus] = None) -> DegeneracyProfile:
    """dim E_k from barred CR derivatives of rho_hat_Z' o f, k = 0..k_max."""
    calc = calc or FrameCalculus(src_cf.E, src_cf.Theta)
    n = cr_map.n
    chart = src_cf.chart
    rho = cr_map.target.rho
    v0 = Jet.stack([chart.ambient(rho.d_z(k).compose(list(cr_map.components)))
                    for k in range(cr_map.n_hat + 1)])
    # words in application order; canonical ordering L1bar^J1 .. Lnbar^Jn applies
    # the highest index first, so words are non-increasing
    level = {(): v0}
    blocks = [np.array([v0.value])]
    for k in range(1, k_max + 1):
        nxt = {}
        for word, v in level.items():
            dv = None
            for g in range(n):
                if word and g > word[-1]:
                    continue
                if dv is None:
                    dv = calc.dfun(v)
                nxt[word + (g,)] = _require(dv[:, n + 1 + g], f"E_{k}")
        level = nxt
        blocks.append(np.array([v.value for v in level.values()]))
    return _profile(blocks, cr_map.n_hat + 1)


def degeneracy_from_sff(sff: SffData, k_max: int) -> DegeneracyProfile:
    """E_k dims from spans of covariant derivatives of the second fundamental form."""
    n, d = sff.n, sff.d
    blocks = [np.zeros((0, d)), np.zeros((0, d))]
    lower = False
    for k in range(2, k_max + 1):
        if k not in sff.derivs:
            lower = True
            blocks.append(np.zeros((0, d)))
            continue
        a = np.moveaxis(sff.derivs[k].value, 1, -1).reshape(-1, d)
        blocks.append(a)
    base = {0: 1, 1: n + 1} if k_max >= 1 else {0: 1}
    prof = _profile(blocks[:k_max + 1], n + d + 1, base_dims=base, offset=n + 1)
    prof.lower_bound = lower
    return prof


# -- Codazzi, Gauss, quadratic pairs ---------------------------------------------------

def codazzi_check(sff: SffData, Dhat_direct: Optional[Jet] = None) -> Dict[str, float]:
    """Dhat from the traced barred derivative and the full barred-derivative identity."""
    if sff.barred is None:
        raise MapError("barred covariant derivative missing; run sff_covariant_derivatives first")
    n = sff.n
    B = sff.barred                                       # [alpha, a, beta, gamma]
    tr = sum(B[mu, :, :, mu] for mu in range(n))         # [a, beta]
    Dhat = (tr * (1.0 / (1j * (n + 1)))).transpose(1, 0)
    sff.Dhat = Dhat
    eye = Jet.constant(B.ctx, np.eye(n))
    # i (delta_{alpha gamma} Dhat_beta^a + delta_{beta gamma} Dhat_alpha^a)  [alpha, a, beta, gamma]
    model = (contract("xg,ba->xabg", eye, Dhat) + contract("bg,xa->xabg", eye, Dhat)) * 1j
    out = {"codazzi": _require(B - model, "the Codazzi identity").max_abs(),
           "Dhat_norm": Dhat.max_abs()}
    if Dhat_direct is not None:
        out["Dhat_dual_route"] = (Dhat - Dhat_direct).max_abs()
    return out


def gauss_residuals(sff: SffData, R_src: Jet, S_src: Jet, R_hat: Jet) -> Dict[str, float]:
    """Pseudohermitian and pseudoconformal Gauss equations.

    ``R_hat`` is the target curvature along M in the adapted frame (n_hat^4).
    """
    n = sff.n
    w = sff.omega_sff
    PP = contract("xam,yan->xymn", w, w.conj())
    Rt = R_hat[:n, :n, :n, :n]
    S_hat = traceless_project(R_hat, check=False)
    St = S_hat[:n, :n, :n, :n]
    out = {"pseudohermitian": (Rt - R_src - PP).max_abs()}
    out["pseudoconformal"] = (traceless_project(St, check=False) - S_src
                              - traceless_project(PP, check=False)).max_abs()
    # expanded form of the traceless part, written out term by term
    eye = Jet.constant(w.ctx, np.eye(n))
    tS = sum(St[g, g] for g in range(n))
    ttS = sum(tS[g, g] for g in range(n))
    tP = sum(PP[g, g] for g in range(n))
    ttP = sum(tP[g, g] for g in range(n))
    gg = levi_multiple(eye) * 0.5
    expl = (St - levi_multiple(tS) * (1.0 / (n + 2)) + gg * ttS * (1.0 / ((n + 1) * (n + 2)))
            - PP + levi_multiple(tP) * (1.0 / (n + 2)) - gg * ttP * (1.0 / ((n + 1) * (n + 2))))
    out["pseudoconformal_expanded"] = (expl - S_src).max_abs()
    out["sff_traceless_norm"] = traceless_project(PP, check=False).max_abs()
    out["sff_product_norm"] = PP.max_abs()
    out["S_hat_norm"] = S_hat.max_abs()
    return out


def huang_polarization_check(Q: np.ndarray, Qt: np.ndarray, samples: np.ndarray) -> Dict[str, object]:
    """Compare |Q|^2 - |Qt|^2 with (z, z) H(z, z) for H recovered from the difference tensor.

    Q and Qt are symmetric coefficient matrices of quadratic forms (Q(z) = z^T Q z)
    with scalar values.  H is normalised so that the identity reads
    |Q(z)|^2 - |Qt(z)|^2 = (z, z) H(z, z) whenever the traceless part vanishes.
    """
    Q = np.asarray(Q, dtype=complex)
    Qt = np.asarray(Qt, dtype=complex)
    T = np.einsum("am,bn->abmn", Q, Q.conj()) - np.einsum("am,bn->abmn", Qt, Qt.conj())
    H4, resid = conformal_flat_decompose(T)
    H = 4 * np.asarray(H4)                  # levi_multiple(H4)(z,z,z,z) = 4 (z,z) H4(z,z)
    z = np.asarray(samples, dtype=complex)
    lhs = np.abs(np.einsum("si,ij,sj->s", z, Q, z)) ** 2 - np.abs(np.einsum("si,ij,sj->s", z, Qt, z)) ** 2
    zz = np.einsum("si,si->s", z, z.conj()).real
    Hzz = np.einsum("si,ij,sj->s", z, H, z.conj())
    return {"H": H, "traceless_residual": float(np.max(np.abs(resid))),
            "identity_residual": float(np.max(np.abs(lhs - zz * Hzz))),
            "lhs": lhs, "Hzz": Hzz}


# -- induced connection --------------------------------------------------------------

def induced_connection_coefficients(sff: SffData, src: "MapGeometry") -> Dict[str, object]:
    """C, F and A from the second fundamental form, with the direct target routes."""
    n = sff.n
    if sff.Dhat is None:
        codazzi_check(sff)
    w = sff.omega_sff
    PP = contract("xam,yan->xymn", w, w.conj())
    tP = sum(PP[g, g] for g in range(n))
    ttP = sum(tP[g, g] for g in range(n))
    S_hat = src.target_tensors["S"]
    nh = S_hat.shape[0]
    tSa = sum(S_hat[a, a, :n, :n] for a in range(n, nh)) if nh > n else tP * 0
    ttSa = sum(tSa[g, g] for g in range(n))
    eye = Jet.constant(w.ctx, np.eye(n))
    C = ((tP + tSa) * (1j / (n + 2))
         - eye * (ttP + ttSa) * (1j / (2 * (n + 1) * (n + 2))))
    D, E, B = src.src_deb
    Dt = src.target_tensors["D"]
    C_direct = Dt[:n, :n] - D
    out = {"C": C, "C_direct": C_direct, "residuals": {"C_dual_route": (C - C_direct).max_abs()}}
    res = out["residuals"]
    if n < 2:
        out["F"] = None
        return out
    conns = Connections(src.src_calc, src.src_conn.omega)
    dC = covariant_derivative(IndexedTensor(C, ("u", "b"), "C"), conns).data
    trC = sum(dC[mu, mu] for mu in range(n))                       # [k]
    # antisymmetrizing the slot identity below in (alpha, gamma) and tracing gives
    # (n - 1)/2 i F^alpha = C_mu^alpha_;^mu - C_mu^mu_;^alpha
    F = ((Jet.stack([sum(dC[mu, a, n + 1 + mu] for mu in range(n)) for a in range(n)]) - trC[n + 1:])
         * (2.0 / ((n - 1) * 1j)))
    _require(F, "F")
    out["F"] = F
    if "E" in src.target_tensors:
        out["F_direct"] = src.target_tensors["E"][:n] - E
        res["F_dual_route"] = (F - out["F_direct"]).max_abs()
    # the (mu, nubar) slot identity behind F
    Dh = sff.Dhat
    wn = src.adapted.omega[n:, :n, n + 1:]                       # omega_a^alpha_{nubar}
    rep = src.src_structure
    V = rep.V                                                    # [alpha, mu, nu]
    lhs = contract("ma,aln->lmn", Dh, wn)                       # [alpha, mu, nu]
    lhs = lhs - eye[None] * F[:, None, None] * 1j
    lhs = lhs - F[None, None, :] * eye[:, :, None] * 0.5j
    rhs = V - dC[:, :, n + 1:].transpose(1, 0, 2)
    res["slot_identity"] = _require(lhs - rhs, "the F slot identity").max_abs()
    # A, using the vanishing Chern-Moser curvature of the sphere target
    Fl = IndexedTensor(F.conj(), ("u",), "F_low")
    Fu = IndexedTensor(F, ("b",), "F_up")
    dFl = covariant_derivative(Fl, conns).data
    dFu = covariant_derivative(Fu, conns).data
    div = sum(dFl[mu, n + 1 + mu] + dFu[mu, 1 + mu] for mu in range(n))
    quad = sum(C[a, b] * C[a, b].conj() + C[a, b] * D[a, b].conj() + C[a, b].conj() * D[a, b]
               for a in range(n) for b in range(n))
    quad = quad + sum(Dh[a, b] * Dh[a, b].conj() for a in range(n) for b in range(Dh.shape[1]))
    A = (div + quad * 2) * (1.0 / n)
    _require(A, "A")
    out["A"] = A
    if "B" in src.target_tensors:
        out["A_direct"] = src.target_tensors["B"] - B
        res["A_dual_route"] = (A - out["A_direct"]).max_abs()
    return out


# -- orchestration -------------------------------------------------------------------

class MapGeometry:
    """Lazily computed source, target and immersion data for one CR map."""

    def __init__(self, cr_map: CRMapSpec, order: int = 5, rotation=None, k_max: int = 3):
        self.map = cr_map
        self.order = order
        self.rotation = rotation
        self.k_max = k_max
        self.ctx = get_context(2 * cr_map.n + 1, order)
        self.ctx_hat = get_context(2 * cr_map.n_hat + 1, order)

    @cached_property
    def map_check(self):
        return self.map.check(build_chart(self.map.source, self.ctx))

    @cached_property
    def src_cf(self) -> AdmissibleCoframe:
        self.map_check
        return source_coframe(self.map, self.ctx, self.rotation)

    @cached_property
    def src_calc(self) -> FrameCalculus:
        return FrameCalculus(self.src_cf.E, self.src_cf.Theta)

    @cached_property
    def src_conn(self):
        return webster_connection(self.src_cf, self.src_calc)

    @cached_property
    def src_pack(self):
        pack = webster_curvature(self.src_conn, self.src_cf, self.src_calc)
        chern_moser_tensor(pack)
        return pack

    @cached_property
    def src_deb(self):
        return deb_coefficients(self.src_pack, self.src_conn, self.src_cf, self.src_calc)

    @cached_property
    def src_structure(self):
        phi = pulled_back_phi_forms(self.src_conn, self.src_deb, self.src_cf, self.src_calc)
        return cm_structure_residuals(phi, self.src_pack, self.src_cf, self.src_calc)

    @cached_property
    def tgt_cf(self) -> AdmissibleCoframe:
        return target_reference_coframe(self.map, self.src_cf, self.ctx_hat)

    @cached_property
    def tgt_calc(self) -> FrameCalculus:
        return FrameCalculus(self.tgt_cf.E, self.tgt_cf.Theta)

    @cached_property
    def tgt_conn(self):
        return webster_connection(self.tgt_cf, self.tgt_calc)

    @cached_property
    def tgt_pack(self):
        return webster_curvature(self.tgt_conn, self.tgt_cf, self.tgt_calc)

    @cached_property
    def adapted(self) -> AdaptedFrameData:
        return adapt_target_frame(self.map, self.src_cf, self.tgt_cf, self.tgt_conn, self.src_calc)

    @cached_property
    def target_tensors(self) -> Dict[str, Jet]:
        """Target curvature quantities along M in the adapted frame."""
        ad = self.adapted
        pack = self.tgt_pack
        out = {"R": ad.restrict(pack.R, ("u", "b", "u", "b"))}
        out["S"] = traceless_project(out["R"], check=False)
        D, E, B = None, None, None
        try:
            D, E, B = deb_coefficients(pack, self.tgt_conn, self.tgt_cf, self.tgt_calc)
        except ValueError:
            pass
        if D is not None:
            out["D"] = ad.restrict(D, ("u", "b"))
            if E.trusted >= 0:
                out["E"] = ad.restrict(E, ("b",))
            if B.trusted >= 0:
                out["B"] = restrict_jet(B, self.ctx)
        if "D" not in out:
            nh = self.map.n_hat
            ric = sum(pack.R[g, g] for g in range(nh))
            scal = sum(ric[g, g] for g in range(nh))
            eye = Jet.constant(pack.R.ctx, np.eye(nh))
            Dr = ric * (1j / (nh + 2)) - eye * scal * (1j / (2 * (nh + 1) * (nh + 2)))
            out["D"] = ad.restrict(Dr, ("u", "b"))
        return out

    @cached_property
    def sff(self) -> SffData:
        s = second_fundamental_form(self.map, self.adapted, self.src_cf, self.src_conn, self.src_calc)
        return sff_covariant_derivatives(s, max_order=self.k_max)

    def ek_profile(self, k_max: Optional[int] = None) -> DegeneracyProfile:
        return ek_spaces(self.map, self.src_cf, self.k_max if k_max is None else k_max, self.src_calc)

    def sff_profile(self, k_max: Optional[int] = None) -> DegeneracyProfile:
        return degeneracy_from_sff(self.sff, self.k_max if k_max is None else k_max)

    def codazzi(self) -> Dict[str, float]:
        n = self.map.n
        Dd = self.target_tensors["D"][:n, n:]
        return codazzi_check(self.sff, Dd)

    def gauss(self) -> Dict[str, float]:
        return gauss_residuals(self.sff, self.src_pack.R, self.src_pack.S.data, self.target_tensors["R"])

    def induced(self) -> Dict[str, object]:
        if self.sff.Dhat is None:
            self.codazzi()
        return induced_connection_coefficients(self.sff, self)
