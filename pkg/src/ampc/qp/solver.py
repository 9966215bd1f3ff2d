"""Dense convex QP solver used by both planner layers.

Variables are Jacobi-scaled and constraint rows normalised before the dual
active-set iteration; residuals are reported in the original units.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidProblemError
from ._gi import gi_kernel
from .problem import QpProblem, QpSolution, QpStatus

TOL = 1e-6
MAX_ITER = 5000
REG = 1e-8


def _stack_rows(p: QpProblem):
    """All constraints as ``N z >= c``."""
    n = p.n
    eye = np.eye(n)
    lo = np.isfinite(p.lb)
    hi = np.isfinite(p.ub)
    N = np.vstack([-p.A_ineq, eye[lo], -eye[hi]])
    c = np.concatenate([-p.b_ineq, p.lb[lo], -p.ub[hi]])
    return N, c


def _inverse_factor(Hs: np.ndarray):
    """``J = L^{-T}`` for ``Hs + reg I``, escalating ``reg`` from 0 while Cholesky fails."""
    n = Hs.shape[0]
    reg = 0.0
    while True:
        try:
            L = np.linalg.cholesky(Hs + reg * np.eye(n))
            if np.min(np.diag(L)) > 1e-7:
                break
        except np.linalg.LinAlgError:
            pass
        reg = REG if reg == 0.0 else reg * 100.0
        if reg > 1e-2:
            raise np.linalg.LinAlgError("Hessian is not positive semidefinite")
    Linv = np.linalg.solve(L, np.eye(n))
    return np.asfortranarray(Linv.T), reg


def kkt_residuals(p: QpProblem, z, lam, N, c):
    """``(stationarity, primal violation, complementarity)`` in original units.

    Stationarity is relative to the largest term of the gradient balance and
    complementarity to the largest multiplier, so that heavily penalised
    slacks (multipliers near the penalty weight) are judged on the slack
    gap itself rather than on a product inflated by the weight.
    """
    Hz = p.H @ z
    dual = N.T @ lam
    grad = Hz + p.g - dual
    scale = max(1.0, np.abs(Hz).max(initial=0), np.abs(p.g).max(initial=0), np.abs(dual).max(initial=0))
    slack = N @ z - c
    primal = max(0.0, float(-slack.min(initial=0.0)))
    comp = float(np.abs(lam * slack).max(initial=0.0)) / max(1.0, float(np.abs(lam).max(initial=0.0)))
    return float(np.abs(grad).max(initial=0) / scale), primal, comp


def _kkt_solve(p: QpProblem, N, c, act):
    n = p.n
    Na = N[act]
    K = np.zeros((n + act.size, n + act.size))
    K[:n, :n] = p.H
    K[:n, n:] = -Na.T
    K[n:, :n] = Na
    try:
        sol = np.linalg.solve(K, np.concatenate([-p.g, c[act]]))
    except np.linalg.LinAlgError:
        return None
    return sol if np.all(np.isfinite(sol)) else None


def _polish(p: QpProblem, z, lam, N, c, rounds: int = 20):
    """Refine the final active set with exact KKT solves.

    Near-degenerate problems leave the dual iteration with a small
    stationarity error; re-solving on its active set can in turn violate a
    weakly inactive row.  A few primal active-set moves (add the most violated
    row, drop the most negative multiplier) settle both.  The result is kept
    only if it beats the unpolished point.
    """
    best = (max(kkt_residuals(p, z, lam, N, c)), z, lam)
    act = list(np.nonzero(lam > 0)[0])
    n = p.n
    for _ in range(rounds):
        sol = _kkt_solve(p, N, c, np.array(act, dtype=int))
        if sol is None:
            break
        z2 = sol[:n]
        mult = sol[n:]
        if mult.size and mult.min() < 0:
            act.pop(int(np.argmin(mult)))
            continue
        lam2 = np.zeros_like(lam)
        lam2[act] = mult
        score = max(kkt_residuals(p, z2, lam2, N, c))
        if score < best[0]:
            best = (score, z2, lam2)
        viol = c - N @ z2
        viol[act] = -np.inf
        if viol.size == 0:
            break
        worst = int(np.argmax(viol))
        if viol[worst] <= 1e-12:
            break
        act.append(worst)
    return best[1], best[2]


def solve_qp(p: QpProblem, tol: float = TOL, max_iter: int = MAX_ITER) -> QpSolution:
    p.validate()
    n = p.n
    if np.any(p.lb > p.ub):
        z = np.clip(np.zeros(n), np.where(np.isfinite(p.lb), p.lb, -1e300), np.where(np.isfinite(p.ub), p.ub, 1e300))
        return QpSolution(z, np.nan, QpStatus.INFEASIBLE, np.inf)
    N, c = _stack_rows(p)

    diag = np.diag(p.H).copy()
    D = np.where(diag > 1e-12, 1.0 / np.sqrt(np.maximum(diag, 1e-300)), 1.0)
    Hs = p.H * D[:, None] * D[None, :]
    Hs = 0.5 * (Hs + Hs.T)
    gs = p.g * D
    Ns = N * D[None, :]
    norms = np.linalg.norm(Ns, axis=1)
    keep = norms > 1e-12
    if np.any(~keep & (c > tol)):
        return QpSolution(np.zeros(n), np.nan, QpStatus.INFEASIBLE, np.inf)
    Ns = np.ascontiguousarray(Ns[keep] / norms[keep, None])
    cs = c[keep] / norms[keep]

    try:
        J, _ = _inverse_factor(Hs)
    except np.linalg.LinAlgError:
        return QpSolution(np.zeros(n), np.nan, QpStatus.MAX_ITER, np.inf)
    zs, lam_s, code, iters = gi_kernel(J, gs, Ns, cs, max_iter, 1e-9)

    z = zs * D
    lam = np.zeros(N.shape[0])
    lam[keep] = lam_s / norms[keep]
    if code == 2:
        return QpSolution(z, p.objective(z), QpStatus.INFEASIBLE, np.inf, iters, lam, p.max_violation(z))
    if code == 0:
        z, lam = _polish(p, z, lam, N, c)
    stat, primal, comp = kkt_residuals(p, z, lam, N, c)
    resid = max(stat, primal, comp)
    status = QpStatus.OPTIMAL if (code == 0 and resid <= tol) else QpStatus.MAX_ITER
    return QpSolution(z, p.objective(z), status, resid, iters, lam, primal)
