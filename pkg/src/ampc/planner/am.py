"""Alternating-minimisation planner.

Each outer iteration solves two convex QPs: the angular layer optimises the
angular accelerations with the commanded velocities frozen, then the
velocity layer optimises the commanded velocities with the heading profile
frozen.  Positions are linearised in the heading for the first layer and are
exactly affine in the commands for the second.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from ..dynamics import ControlSequence, VehicleState
from ..errors import PlannerFailure
from ..qp import QpProblem, QpStatus, solve_qp
from ..dynamics import chain_affine_map
from .common import (GuessTrajectory, PlannerResult, Scene, build_scene, collision_rows, costs,
                     goal_heading_ref, heading_operators, initial_traj, jerk_operator, merit,
                     min_clearance, retau, rollout, step_violation, strict_cumsum)
from .config import PlannerConfig

log = logging.getLogger("ampc.planner")


@dataclass
class LayerSolution:
    values: np.ndarray          # theta_ddot or v_c, length N
    slacks: np.ndarray          # per step k = 1..N
    objective: float            # layer objective at the QP optimum (model values)
    qp: object = None           # QpSolution


def add_lsq(H, g, M, r0, w, cols=slice(None)):
    """Accumulate ``w * |r0 + M z[cols]|^2`` into ``1/2 z'Hz + g'z`` (returns the constant)."""
    M = np.atleast_2d(M)
    r0 = np.atleast_1d(np.asarray(r0, dtype=float))
    H[cols, cols] += 2.0 * w * (M.T @ M)
    g[cols] += 2.0 * w * (M.T @ r0)
    return w * float(r0 @ r0)


def _slack_block(steps: np.ndarray, values: np.ndarray, N: int):
    """Slack columns for the collision rows.

    Only steps with a row violated at the guess get a slack; every other
    constraint already holds at the guess, so rows at the remaining steps can
    stay hard without making the QP infeasible.  Returns the slacked steps
    and, per row, its slack column (``-1`` for hard rows).
    """
    used = np.unique(steps[values > 0.0])
    col = np.full(N + 1, -1)
    col[used] = np.arange(used.size)
    return used, col[steps]


def _slack_matrix(s_col: np.ndarray, n_s: int):
    Sr = np.zeros((s_col.size, n_s))
    soft = s_col >= 0
    Sr[np.nonzero(soft)[0], s_col[soft]] = -1.0
    return Sr


def _solve(problem: QpProblem, layer: str, qp_log: list):
    sol = solve_qp(problem)
    qp_log.append({"layer": layer, "status": sol.status.value, "kkt": sol.kkt_residual,
                   "iterations": sol.iterations, "n": problem.n, "m": problem.m})
    if sol.status is QpStatus.INFEASIBLE:
        raise PlannerFailure(f"{layer} QP infeasible")
    return sol


def angular_layer(guess: GuessTrajectory, w_theta: float, trust: float, config: PlannerConfig,
                  scene: Scene, qp_log: list | None = None) -> LayerSolution:
    """One angular-acceleration QP around ``guess`` (commands and body velocities fixed)."""
    qp_log = [] if qp_log is None else qp_log
    N, dt = config.N, config.dt
    G_th, G_om = heading_operators(N, dt)
    S = strict_cumsum(N)
    a_hat = guess.theta_ddot
    th_hat = guess.theta
    # d(x, y)/da through the first-order expansion of cos/sin at the guess heading
    Jx = S @ ((-guess.v * np.sin(th_hat) * dt)[:, None] * G_th)
    Jy = S @ ((guess.v * np.cos(th_hat) * dt)[:, None] * G_th)

    rows = collision_rows(guess, scene, config)
    k_row, e_row, gx, gy, val = rows
    used, s_col = _slack_block(k_row, val, N)
    n_s = used.size
    n = N + n_s
    H = np.zeros((n, n))
    g = np.zeros(n)
    a_cols = slice(0, N)
    H[a_cols, a_cols] += 2.0 * config.w_smooth_theta * np.eye(N)

    xf, yf, thf = config.goal
    # residuals written as r0 + M a, linear part offset by the guess
    const = add_lsq(H, g, Jx[N], guess.x[N] - xf - Jx[N] @ a_hat, config.w_goal_pos, a_cols)
    const += add_lsq(H, g, Jy[N], guess.y[N] - yf - Jy[N] @ a_hat, config.w_goal_pos, a_cols)
    th_free = guess.theta[0] + np.arange(N + 1) * dt * guess.theta_dot[0]
    const += add_lsq(H, g, G_th[N], th_free[N] - goal_heading_ref(th_hat[N], thf), config.w_goal_heading, a_cols)
    if n_s:
        g[N:] += w_theta
        H[N:, N:] += config.slack_reg * np.eye(n_s)

    A, b = [], []
    # heading rate: box and curvature with the frozen commands, widened to contain the guess
    om_free = guess.theta_dot[0]
    om_hat = guess.theta_dot[1:]
    hi = np.maximum(np.minimum(config.theta_dot_max, config.kappa_max * np.abs(guess.v_c)), om_hat)
    lo = np.minimum(np.maximum(config.theta_dot_min, -config.kappa_max * np.abs(guess.v_c)), om_hat)
    Gw = G_om[1:]
    A += [np.hstack([Gw, np.zeros((N, n_s))]), np.hstack([-Gw, np.zeros((N, n_s))])]
    b += [hi - om_free, om_free - lo]
    # trust region on the heading
    Gt = G_th[1:]
    A += [np.hstack([Gt, np.zeros((N, n_s))]), np.hstack([-Gt, np.zeros((N, n_s))])]
    b += [trust + th_hat[1:] - th_free[1:], trust - th_hat[1:] + th_free[1:]]
    if k_row.size:
        off = np.asarray(config.ego_offsets, dtype=float)[e_row]
        dth = gx * (-off * np.sin(th_hat[k_row])) + gy * (off * np.cos(th_hat[k_row]))
        Ar = gx[:, None] * Jx[k_row] + gy[:, None] * Jy[k_row] + dth[:, None] * G_th[k_row]
        A.append(np.hstack([Ar, _slack_matrix(s_col, n_s)]))
        b.append(Ar @ a_hat - val)
    lb = np.concatenate([np.full(N, config.theta_ddot_min), np.zeros(n_s)])
    ub = np.concatenate([np.full(N, config.theta_ddot_max), np.full(n_s, np.inf)])
    lb[:N] = np.minimum(lb[:N], a_hat)
    ub[:N] = np.maximum(ub[:N], a_hat)
    prob = QpProblem(H, g, np.vstack(A), np.concatenate(b), lb, ub, constant=const)
    sol = _solve(prob, "angular", qp_log)
    slacks = np.zeros(N)
    slacks[used - 1] = sol.z[N:]
    return LayerSolution(sol.z[:N].copy(), slacks, sol.objective, sol)


def velocity_layer(guess: GuessTrajectory, w_v: float, config: PlannerConfig, scene: Scene,
                   anchor: float | None = None, qp_log: list | None = None) -> LayerSolution:
    """One commanded-velocity QP with the heading profile of ``guess`` frozen."""
    qp_log = [] if qp_log is None else qp_log
    N, dt = config.N, config.dt
    anchor = guess.v[0] if anchor is None else anchor
    S = strict_cumsum(N)
    v_off, v_gain = chain_affine_map(guess.v[0], guess.decay)
    c_th, s_th = np.cos(guess.theta), np.sin(guess.theta)
    # positions are exactly affine in the commands for fixed headings
    x_off = guess.x[0] + S @ (c_th * dt * v_off)
    y_off = guess.y[0] + S @ (s_th * dt * v_off)
    Jx = S @ ((c_th * dt)[:, None] * v_gain)
    Jy = S @ ((s_th * dt)[:, None] * v_gain)

    rows = collision_rows(guess, scene, config)
    k_row, e_row, gx, gy, val = rows
    used, s_col = _slack_block(k_row, val, N)
    n_s = used.size
    n = N + n_s
    H = np.zeros((n, n))
    g = np.zeros(n)
    c_cols = slice(0, N)
    D, e0 = jerk_operator(N, dt)
    const = add_lsq(H, g, D, e0 * anchor, config.w_smooth_v, c_cols)
    xf, yf, _ = config.goal
    const += add_lsq(H, g, Jx[N], x_off[N] - xf, config.w_goal_pos, c_cols)
    const += add_lsq(H, g, Jy[N], y_off[N] - yf, config.w_goal_pos, c_cols)
    if n_s:
        g[N:] += w_v
        H[N:, N:] += config.slack_reg * np.eye(n_s)

    c_hat = guess.v_c
    Z = np.zeros((N, n_s))
    A, b = [], []
    # acceleration limits, widened to contain the guess
    if config.accel_mode == "command":
        Dd = np.eye(N) - np.eye(N, k=-1)
        d_off = np.zeros(N)
        d_off[0] = -anchor
    else:
        Dd = np.eye(N) - v_gain[:N]
        d_off = -v_off[:N]
    d_hat = Dd @ c_hat + d_off
    hi = np.maximum(config.a_max * dt, d_hat)
    lo = np.minimum(config.a_min * dt, d_hat)
    A += [np.hstack([Dd, Z]), np.hstack([-Dd, Z])]
    b += [hi - d_off, d_off - lo]
    # curvature on the body velocity: kappa v_k >= |theta_dot_k|
    need = np.minimum(np.abs(guess.theta_dot[1:]) / config.kappa_max, guess.v[1:])
    A.append(np.hstack([-v_gain[1:], Z]))
    b.append(v_off[1:] - need)
    if k_row.size:
        Ar = gx[:, None] * Jx[k_row] + gy[:, None] * Jy[k_row]
        A.append(np.hstack([Ar, _slack_matrix(s_col, n_s)]))
        b.append(Ar @ c_hat - val)
    lb = np.concatenate([np.minimum(0.0, c_hat), np.zeros(n_s)])
    ub = np.concatenate([np.maximum(config.v_max, c_hat), np.full(n_s, np.inf)])
    prob = QpProblem(H, g, np.vstack(A), np.concatenate(b), lb, ub, constant=const)
    sol = _solve(prob, "velocity", qp_log)
    slacks = np.zeros(N)
    slacks[used - 1] = sol.z[N:]
    return LayerSolution(sol.z[:N].copy(), slacks, sol.objective, sol)


def layer_costs(traj: GuessTrajectory, scene: Scene, anchor: float, w_theta: float, w_v: float,
                config: PlannerConfig):
    """True (rolled-out) objectives of both layers and the worst violation."""
    c = costs(traj, anchor, config)
    viol = step_violation(traj, scene, config)
    pen = float(np.maximum(viol - config.violation_tol, 0.0).sum())
    worst = float(viol.max(initial=-np.inf))
    return c.J_theta + c.J_goal + w_theta * pen, c.J_v + c.J_goal + w_v * pen, worst


def _start(state0, config, warm, theta_ddot_guess=None):
    if warm is None:
        return initial_traj(None, None, state0, config)
    return initial_traj(warm.v_c, warm.theta_ddot, state0, config)


def finish(guess: GuessTrajectory, scene: Scene, state0: VehicleState, anchor: float, config: PlannerConfig,
           *, iterations, converged, t_start, w, qp_log, trace, cls=PlannerResult, **extra):
    viol = step_violation(guess, scene, config)
    worst = max(float(viol.max(initial=-np.inf)), 0.0) if viol.size else 0.0
    return cls(
        controls=ControlSequence(guess.v_c.copy(), guess.theta_ddot.copy(), config.dt, state0.v),
        trajectory=guess.states(),
        iterations=iterations,
        converged=converged,
        max_violation=worst,
        costs=costs(guess, anchor, config),
        wall_time=time.perf_counter() - t_start,
        guess=guess,
        min_clearance=min_clearance(guess, scene, config),
        weights=w,
        qp_log=qp_log,
        trace=trace,
        qp_solves=len(qp_log),
        **extra,
    )


def plan(state0: VehicleState, obstacles, config: PlannerConfig, warm: GuessTrajectory | None = None,
         t: float = 0.0, v_c_prev: float | None = None) -> PlannerResult:
    """Run the alternating loop from ``state0``.

    ``warm`` is used as given (callers shift it between ticks); ``v_c_prev``
    is the command applied on the previous tick and anchors the jerk and
    command-rate terms (defaults to the current body velocity).
    """
    t_start = time.perf_counter()
    scene = build_scene(obstacles, state0, t, config)
    anchor = state0.v if v_c_prev is None else float(v_c_prev)
    guess = _start(state0, config, warm)
    w_th, w_v = config.w_theta0, config.w_v0
    trust, trust_cap = config.theta_trust0, 4.0 * config.theta_trust0
    J_th, J_v, worst = layer_costs(guess, scene, anchor, w_th, w_v, config)
    qp_log, trace = [], []
    converged = False
    k = 0
    for k in range(1, config.max_am_iters + 1):
        # angular layer with merit-based trust adaptation
        sol = angular_layer(guess, w_th, trust, config, scene, qp_log)
        cand = rollout(state0, sol.values, guess.v_c, guess.decay, config.dt)
        m_old, _ = merit(guess, scene, anchor, w_th, config)
        m_new, _ = merit(cand, scene, anchor, w_th, config)
        accepted = sol.qp.ok and m_new <= m_old + 1e-9 * max(1.0, abs(m_old))
        if accepted:
            guess = cand
            trust = min(1.5 * trust, trust_cap)
        else:
            trust *= 0.5
        if step_violation(guess, scene, config).max(initial=-np.inf) > config.violation_tol:
            w_th = min(w_th * config.delta, config.w_max)

        # velocity layer: exact model, no trust region
        sol = velocity_layer(guess, w_v, config, scene, anchor, qp_log)
        if sol.qp.ok:
            guess = rollout(state0, guess.theta_ddot, sol.values, guess.decay, config.dt)
        if step_violation(guess, scene, config).max(initial=-np.inf) > config.violation_tol:
            w_v = min(w_v * config.delta, config.w_max)
        guess = retau(guess, state0, config)

        J_th_new, J_v_new, worst = layer_costs(guess, scene, anchor, w_th, w_v, config)
        d_th, d_v = abs(J_th_new - J_th), abs(J_v_new - J_v)
        J_th, J_v = J_th_new, J_v_new
        trace.append({"k": k, "J_theta": J_th, "J_v": J_v, "max_violation": worst,
                      "w_theta": w_th, "w_v": w_v, "trust": trust, "accepted": accepted})
        log.debug("k=%d J_theta=%.6g J_v=%.6g max_violation=%.3g w_theta=%.3g w_v=%.3g trust=%.3g",
                  k, J_th, J_v, worst, w_th, w_v, trust)
        small = d_th < config.epsilon and d_v < config.epsilon
        if small and (accepted or trust < config.trust_min):
            converged = worst <= config.violation_tol
            break
    return finish(guess, scene, state0, anchor, config, iterations=k, converged=converged,
                  t_start=t_start, w=(w_th, w_v), qp_log=qp_log, trace=trace)
