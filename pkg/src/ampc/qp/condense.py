"""Eliminate states from a QP whose states are affine in the decision vector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import CondenseError
from .problem import QpProblem


@dataclass
class AffineMap:
    """``states = offset + matrix @ z``."""
    offset: np.ndarray
    matrix: np.ndarray

    def __call__(self, z):
        return self.offset + self.matrix @ np.asarray(z, dtype=float)

    @property
    def n_in(self) -> int:
        return self.matrix.shape[1]


def as_affine(fn, n_in: int, rng=None, tol: float = 1e-9) -> AffineMap:
    """Extract the affine map behind callable ``fn``; raise if it is not affine."""
    rng = np.random.default_rng(0) if rng is None else rng
    offset = np.asarray(fn(np.zeros(n_in)), dtype=float).reshape(-1)
    cols = [np.asarray(fn(e), dtype=float).reshape(-1) - offset for e in np.eye(n_in)]
    amap = AffineMap(offset, np.stack(cols, axis=1) if cols else np.zeros((offset.size, 0)))
    for _ in range(3):
        z = rng.normal(scale=3.0, size=n_in)
        err = np.abs(np.asarray(fn(z), dtype=float).reshape(-1) - amap(z))
        if err.max(initial=0) > tol * max(1.0, np.abs(amap(z)).max(initial=0)):
            raise CondenseError("state map is not affine in the decision variables")
    return amap


def condense(state_map, *, Q=None, x_ref=None, R=None, g=None,
             E=None, F=None, f=None, lb=None, ub=None, n_in: int | None = None) -> QpProblem:
    """Build the decision-only QP for

        min 1/2 (X - x_ref)' Q (X - x_ref) + 1/2 z' R z + g' z
        s.t. E X + F z <= f,   lb <= z <= ub,    X = state_map(z)

    ``state_map`` is an :class:`AffineMap` or a callable (checked for
    affinity).  ``Q`` and ``E`` may be dense or scipy sparse.
    """
    if not isinstance(state_map, AffineMap):
        if not callable(state_map) or n_in is None:
            raise CondenseError("state_map must be an AffineMap, or a callable with n_in given")
        state_map = as_affine(state_map, n_in)
    B = np.asarray(state_map.matrix, dtype=float)
    x0 = np.asarray(state_map.offset, dtype=float).reshape(-1)
    nx, nz = B.shape
    if x0.size != nx:
        raise CondenseError("offset and matrix disagree on the state dimension")

    H = np.zeros((nz, nz)) if R is None else np.array(R, dtype=float, copy=True)
    lin = np.zeros(nz) if g is None else np.array(g, dtype=float, copy=True).reshape(-1)
    const = 0.0
    if Q is not None:
        ref = np.zeros(nx) if x_ref is None else np.asarray(x_ref, dtype=float).reshape(-1)
        e0 = x0 - ref
        QB = np.asarray(Q @ B)
        Qe = np.asarray(Q @ e0).reshape(-1)
        H += B.T @ QB
        lin += B.T @ Qe
        const = 0.5 * float(e0 @ Qe)
    H = 0.5 * (H + H.T)

    A_rows, b_rows = [], []
    if E is not None or F is not None:
        if f is None:
            raise CondenseError("constraint right-hand side f missing")
        f = np.asarray(f, dtype=float).reshape(-1)
        A = np.zeros((f.size, nz))
        b = f.copy()
        if E is not None:
            EB = E @ B
            A += np.asarray(EB.toarray() if sp.issparse(EB) else EB)
            b -= np.asarray(E @ x0).reshape(-1)
        if F is not None:
            A += np.asarray(F.toarray() if sp.issparse(F) else F)
        A_rows.append(A)
        b_rows.append(b)
    A_ineq = np.vstack(A_rows) if A_rows else np.zeros((0, nz))
    b_ineq = np.concatenate(b_rows) if b_rows else np.zeros(0)
    return QpProblem(H, lin, A_ineq, b_ineq, lb, ub, constant=const)
