"""Indexed tensors in a unitary frame (Levi form = identity).

All indices are stored lowered; raising with g = delta only flips the bar, so
an upper unbarred index is stored as a lowered barred one.  Slot kinds:

    'u'  unbarred tangent      'b'  barred tangent
    'nu' unbarred normal       'nb' barred normal
    '0'  the T direction       'f'  full frame index (0, mu, nu-bar)

Data are jets (coefficients in the trailing axis) or plain complex arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .jets import Jet

CONJ_KIND = {"u": "b", "b": "u", "nu": "nb", "nb": "nu", "0": "0", "f": "f"}
KIND_LABEL = {"u": "unbarred", "b": "barred", "nu": "normal-unbarred", "nb": "normal-barred",
              "0": "reeb", "f": "frame"}


class TensorError(ValueError):
    pass


@dataclass
class IndexedTensor:
    data: Union[Jet, np.ndarray]
    kinds: Tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        self.kinds = tuple(self.kinds)
        if len(self.kinds) != len(self.shape):
            raise TensorError(f"{self.name}: {len(self.kinds)} kinds for shape {self.shape}")

    @property
    def shape(self):
        return self.data.shape

    @property
    def is_jet(self) -> bool:
        return isinstance(self.data, Jet)

    def at_base(self) -> np.ndarray:
        return np.asarray(self.data.value if self.is_jet else self.data)

    def conj(self) -> "IndexedTensor":
        if self.is_jet:
            d = self.data.conj()
            for ax, k in enumerate(self.kinds):
                if k == "f":
                    from .forms import conj_perm
                    n = (self.shape[ax] - 1) // 2
                    idx = [slice(None)] * len(self.kinds)
                    idx[ax] = conj_perm(n)
                    d = d[tuple(idx)]
        else:
            d = np.conj(self.data)
        return IndexedTensor(d, tuple(CONJ_KIND[k] for k in self.kinds), self.name + "*")

    def norm(self) -> float:
        a = self.at_base()
        return float(np.max(np.abs(a))) if a.size else 0.0

    def signature(self):
        return [{"kind": KIND_LABEL[k], "position": "down"} for k in self.kinds]

    def dump(self) -> dict:
        a = self.at_base()
        return {"name": self.name, "index_signature": self.signature(), "shape": list(a.shape),
                "data": [[float(z.real), float(z.imag)] for z in a.ravel()]}


def _arr(T):
    return T.data if isinstance(T, IndexedTensor) else T


def _coeffs(x):
    """Return (array with trailing coefficient axis or None, rebuild function)."""
    if isinstance(x, Jet):
        return x.c, lambda c: Jet(x.ctx, c, x.trusted)
    a = np.asarray(x, dtype=complex)
    return a[..., None], lambda c: c[..., 0]


def check_curvature_symmetry(T, tol: float = 1e-9) -> float:
    """Deviation from T_{a bb m nb} = T_{m bb a nb} and T = conj(T_{b aa n mb})."""
    c, _ = _coeffs(_arr(T))
    s1 = np.max(np.abs(c - c.transpose(2, 1, 0, 3, 4)), initial=0.0)
    s2 = np.max(np.abs(c - np.conj(c.transpose(1, 0, 3, 2, 4))), initial=0.0)
    return float(max(s1, s2))


def ricci_trace(T):
    """T_mu^mu_{a bb} and its full trace (g = delta)."""
    c, re = _coeffs(_arr(T))
    ric = np.einsum("mmab...->ab...", c)
    scal = np.einsum("aa...->...", ric)
    return re(ric), re(scal)


def levi_multiple(H):
    """Tensor H_{a bb} g_{m nb} + H_{m bb} g_{a nb} + H_{a nb} g_{m bb} + H_{m nb} g_{a bb}."""
    c, re = _coeffs(H)
    n = c.shape[0]
    d = np.eye(n)
    out = (np.einsum("ab...,mv->abmv...", c, d) + np.einsum("mb...,av->abmv...", c, d)
           + np.einsum("av...,mb->abmv...", c, d) + np.einsum("mv...,ab->abmv...", c, d))
    return re(out)


def levi_part(T):
    """Hermitian H with T - levi_multiple(H) trace-free."""
    c, re = _coeffs(_arr(T))
    n = c.shape[0]
    ric = np.einsum("mmab...->ab...", c)
    scal = np.einsum("aa...->...", ric)
    H = ric / (n + 2) - np.einsum("...,ab->ab...", scal, np.eye(n)) / (2 * (n + 1) * (n + 2))
    return re(H)


def traceless_project(T, check: bool = True, tol: float = 1e-9):
    """Trace-free part of a curvature-type tensor T_{a bb m nb} (g = delta)."""
    data = _arr(T)
    if check:
        dev = check_curvature_symmetry(data)
        scale = max(1.0, float(np.max(np.abs(_coeffs(data)[0]))))
        if dev > tol * scale:
            raise TensorError(f"curvature symmetry violated by {dev:.3e}")
    out = data - levi_multiple(levi_part(data))
    if isinstance(T, IndexedTensor):
        return IndexedTensor(out, T.kinds, f"[{T.name}]")
    return out


def conformal_flat_decompose(T, tol: float = 1e-9):
    """Return (H, residual) with T = levi_multiple(H) + residual and residual trace-free."""
    data = _arr(T)
    H = levi_part(data)
    return H, traceless_project(data, tol=tol)


def trace_free_violation(S) -> float:
    c, _ = _coeffs(_arr(S))
    return float(np.max(np.abs(np.einsum("mmab...->ab...", c)[..., 0]), initial=0.0))
