"""Generalized Wong sequences and their limits for a tuple (E, A, B, C).

The sequences

    V^0 = ker C,   V^{i+1} = A^{-1}(E V^i + im B) ∩ ker C
    W^0 = {0},     W^{i+1} = E^{-1}(A W^i + im B) ∩ ker C

stabilize after at most n steps (n = ambient state dimension).  B may have
zero columns and C zero rows, which encodes the degenerate tuples such as
W*_{[E,A,0,C]} with a single code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError
from .linalg import (
    DEFAULT_TOL,
    Subspace,
    Tolerance,
    apply_map,
    as_matrix,
    contains,
    image,
    intersect,
    kernel,
    preimage,
    subspace_sum,
)


@dataclass(frozen=True)
class WongLimits:
    V_star: Subspace
    W_star: Subspace
    V_chain: list[Subspace] = field(repr=False)
    W_chain: list[Subspace] = field(repr=False)


def _stabilized(prev: Subspace, cur: Subspace) -> bool:
    # Dimension equality alone is not enough under tolerance-induced basis
    # drift; require containment both ways.
    return prev.dim == cur.dim and contains(prev, cur) and contains(cur, prev)


def wong_limits(E, A, B=None, C=None, tol: Tolerance = DEFAULT_TOL) -> WongLimits:
    """Chains and limits of the generalized Wong sequences for {E, A, B, C}."""
    E = as_matrix(E)
    A = as_matrix(A, rows=E.shape[0], cols=E.shape[1])
    m, n = E.shape
    B = np.zeros((m, 0)) if B is None else as_matrix(B, rows=m)
    C = np.zeros((0, n)) if C is None else as_matrix(C, cols=n)

    im_B = image(B, tol)
    ker_C = kernel(C, tol)

    V_chain = [ker_C]
    for _ in range(n + 1):
        prev = V_chain[-1]
        nxt = intersect(
            preimage(A, subspace_sum(apply_map(E, prev, tol), im_B, tol), tol),
            ker_C, tol)
        V_chain.append(nxt)
        if _stabilized(prev, nxt):
            break

    W_chain = [Subspace.zero(n)]
    for _ in range(n + 1):
        prev = W_chain[-1]
        nxt = intersect(
            preimage(E, subspace_sum(apply_map(A, prev, tol), im_B, tol), tol),
            ker_C, tol)
        W_chain.append(nxt)
        if _stabilized(prev, nxt):
            break

    return WongLimits(V_chain[-1], W_chain[-1], V_chain, W_chain)


def wong_V_at(E, A, B, C, step: int, tol: Tolerance = DEFAULT_TOL) -> Subspace:
    """The subspace V^step of the V-chain (chain held constant once stabilized)."""
    if step < 0:
        raise DimensionMismatchError("step must be >= 0")
    chain = wong_limits(E, A, B, C, tol).V_chain
    return chain[step] if step < len(chain) else chain[-1]
