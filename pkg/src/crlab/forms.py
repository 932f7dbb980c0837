"""Exterior calculus in the moving coframe (theta, theta^a, conj theta^a).

Frame index convention (m = 2n+1): 0 is theta / T, 1..n the theta^a / L_a,
n+1..2n their conjugates.  A 1-form is an array whose last axis holds its
values on the frame, a 2-form one whose last two axes hold F(E_b, E_c).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .jets import Jet, contract


def _perm(J: Jet, src: str, dst: str) -> Jet:
    return Jet(J.ctx, np.einsum(f"...{src}z->...{dst}z", J.c), J.trusted)


def conj_perm(n: int) -> np.ndarray:
    """Frame index of the conjugate basis element."""
    return np.array([0] + list(range(n + 1, 2 * n + 1)) + list(range(1, n + 1)))


def basis_words(n: int) -> List[Tuple[int, int]]:
    """Canonical 2-form basis order as frame index pairs (b, c) meaning e^b ^ e^c."""
    u = list(range(1, n + 1))
    b = list(range(n + 1, 2 * n + 1))
    words = [(0, i) for i in u] + [(0, i) for i in b]
    words += [(i, j) for i in u for j in u if i < j]
    words += [(i, j) for i in u for j in b]
    words += [(i, j) for i in b for j in b if i < j]
    return words


def word_label(n: int, w: Tuple[int, int]) -> str:
    def name(k):
        if k == 0:
            return "theta"
        return f"theta^{k}" if k <= n else f"theta^{k - n}bar"
    return f"{name(w[0])}^{name(w[1])}"


class FrameCalculus:
    """d, wedge and conjugation for forms expressed in a coframe."""

    def __init__(self, E: Jet, Theta: Jet):
        self.E = E
        self.Theta = Theta
        self.m = E.shape[0]
        self.n = (self.m - 1) // 2
        self.sigma = conj_perm(self.n)
        # structure functions de^a(E_b, E_c)
        dTh = Theta.gradient()                          # [a, j, i] = d_i Theta[a, j]
        curl = dTh.transpose(0, 2, 1) - dTh             # [a, i, j] = d_i Th_j - d_j Th_i
        t = contract("aij,cj->aic", curl, E)
        self.de = contract("aic,bi->abc", t, E)

    def dfun(self, f: Jet) -> Jet:
        """Frame components E_a(f), appended as a last axis."""
        lead = "pqrst"[: f.ndim]
        return contract(f"ai,{lead}i->{lead}a", self.E, f.gradient())

    def d1(self, eta: Jet) -> Jet:
        """Exterior derivative of 1-forms (last axis = frame index)."""
        lead = "pqrst"[: eta.ndim - 1]
        De = self.dfun(eta)                                   # [.., c, b] = E_b(eta_c)
        out = De.swapaxes(-1, -2) - De
        return out + contract(f"{lead}a,abc->{lead}bc", eta, self.de)

    def d2_check(self, F: Jet) -> Jet:
        """dF(E_a, E_b, E_c) for 2-forms, used for d^2 = 0 checks.

        dF(a,b,c) = cyclic sum of E_a F(b,c) + sum_k de^k(a,b) F(k,c).
        """
        lead = "pqrst"[: F.ndim - 2]
        P = _perm(self.dfun(F), "bca", "abc")
        G = contract(f"{lead}kc,kab->{lead}abc", F, self.de)
        S = P + G
        return S + _perm(S, "bca", "abc") + _perm(S, "cab", "abc")

    @staticmethod
    def wedge(a: Jet, b: Jet) -> Jet:
        """Pointwise wedge of broadcast-compatible 1-form arrays."""
        x = a[..., :, None] * b[..., None, :]
        return x - x.swapaxes(-1, -2)

    @staticmethod
    def wedge_mat(A: Jet, B: Jet) -> Jet:
        """Matrix wedge (A ^ B)_ij = sum_k A_ik ^ B_kj for matrices of 1-forms."""
        x = contract("ikb,kjc->ijbc", A, B)
        return x - x.swapaxes(-1, -2)

    def conj(self, eta: Jet) -> Jet:
        """Conjugate of 1-forms."""
        return eta.conj()[..., self.sigma]

    def conj2(self, F: Jet) -> Jet:
        return F.conj()[..., self.sigma, :][..., self.sigma]

    def unit(self, a: int) -> Jet:
        """Coframe element e^a as a constant 1-form."""
        v = np.zeros(self.m)
        v[a] = 1.0
        return Jet.constant(self.E.ctx, v)

    def words(self) -> List[Tuple[int, int]]:
        return basis_words(self.n)

    def canonical(self, F: Jet) -> Jet:
        """Coefficients of a 2-form in the canonical basis order (last axis)."""
        w = self.words()
        idx_b = [p for p, _ in w]
        idx_c = [q for _, q in w]
        return Jet(F.ctx, F.c[..., idx_b, idx_c, :], F.trusted)

    def as_coframe_form(self, F: Jet, degree: int) -> "CoframeForm":
        if degree == 1:
            return CoframeForm.from_one_form(self.n, F)
        return CoframeForm.from_two_form(self.n, F)


@dataclass
class CoframeForm:
    """A 0-, 1- or 2-form as a map from coframe basis words to scalar jets."""
    degree: int
    components: Dict[Tuple[int, ...], Jet]
    n: int

    @classmethod
    def from_one_form(cls, n: int, eta: Jet) -> "CoframeForm":
        return cls(1, {(a,): eta[a] for a in range(2 * n + 1)}, n)

    @classmethod
    def from_two_form(cls, n: int, F: Jet) -> "CoframeForm":
        return cls(2, {w: F[w] for w in basis_words(n)}, n)

    def component(self, word: Tuple[int, ...]) -> Jet:
        if self.degree == 2 and word[0] > word[1]:
            return -self.components[(word[1], word[0])]
        return self.components[word]

    def labels(self) -> List[str]:
        if self.degree == 2:
            return [word_label(self.n, w) for w in self.components]
        return [str(w) for w in self.components]

    def to_array(self) -> Jet:
        m = 2 * self.n + 1
        if self.degree == 1:
            return Jet.stack([self.components[(a,)] for a in range(m)])
        ctx = next(iter(self.components.values())).ctx
        zero = Jet.zeros(ctx)
        rows = []
        for b in range(m):
            row = []
            for c in range(m):
                if b == c:
                    row.append(zero)
                else:
                    row.append(self.component((b, c)))
            rows.append(Jet.stack(row))
        return Jet.stack(rows)


def exterior_derivative(form: CoframeForm, calc: FrameCalculus) -> CoframeForm:
    """d of a 0- or 1-form given by coframe components."""
    if form.degree == 0:
        return CoframeForm.from_one_form(calc.n, calc.dfun(form.components[()]))
    if form.degree == 1:
        return CoframeForm.from_two_form(calc.n, calc.d1(form.to_array()))
    raise ValueError("exterior derivative implemented for degree <= 1")
