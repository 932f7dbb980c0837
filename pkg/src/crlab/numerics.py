"""Small numerical helpers: real-linear solves with jet right-hand sides, ranks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .jets import Jet

RANK_REL = 1e-8
UNSTABLE_FACTOR = 10.0


class SolveError(ValueError):
    pass


def real_matrix(op: Callable[[np.ndarray], np.ndarray], n_unknown: int) -> np.ndarray:
    """Matrix of an R-linear map C^U -> C^E acting on [Re u; Im u] -> [Re; Im]."""
    cols = []
    for unit in (1.0, 1j):
        for j in range(n_unknown):
            e = np.zeros(n_unknown, dtype=complex)
            e[j] = unit
            v = op(e)
            cols.append(np.concatenate([v.real, v.imag]))
    return np.array(cols).T


@dataclass
class LinearSolveInfo:
    rank: int
    n_unknown: int
    smallest_sv: float
    residual: float


def solve_real_linear(op, n_unknown: int, rhs: Jet, rank_tol: float = 1e-10):
    """Solve op(u) = rhs coefficientwise; rhs is a jet vector of equations.

    ``op`` must be R-linear with constant coefficients (it may conjugate).
    Returns (u as a jet vector, LinearSolveInfo).  Raises if the real
    matrix does not have full column rank.
    """
    M = real_matrix(op, n_unknown)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > rank_tol * s[0]))
    if rank < 2 * n_unknown:
        raise SolveError(f"linear system rank {rank} < {2 * n_unknown} unknowns")
    c = rhs.c
    B = np.concatenate([c.real, c.imag], axis=0)            # (2E, N)
    X = Vt.T @ ((U.T @ B) / s[:, None])
    resid = float(np.max(np.abs(M @ X - B), initial=0.0))
    u = X[:n_unknown] + 1j * X[n_unknown:]
    return Jet(rhs.ctx, u, rhs.trusted), LinearSolveInfo(rank, 2 * n_unknown, float(s[-1]), resid)


@dataclass
class RankResult:
    rank: int
    singular_values: List[float]
    threshold: float
    unstable: bool


def numerical_rank(vectors: np.ndarray, rel: float = RANK_REL) -> RankResult:
    """Rank by singular values below rel * max(1, sigma_max); flags values near the threshold."""
    A = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if A.size == 0:
        return RankResult(0, [], rel, False)
    s = np.linalg.svd(A, compute_uv=False)
    thr = rel * max(1.0, float(s[0]) if len(s) else 0.0)
    rank = int(np.sum(s > thr))
    unstable = bool(np.any((s > thr / UNSTABLE_FACTOR) & (s < thr * UNSTABLE_FACTOR)))
    return RankResult(rank, [float(x) for x in s], thr, unstable)
