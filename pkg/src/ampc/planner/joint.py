"""Joint SQP baseline: angular accelerations and commands in one QP per iteration.

Positions are linearised jointly in heading and body velocity (the bilinear
``v cos(theta)`` term gets its full first-order expansion).  Costs,
collision rows, penalties and stopping rules are shared with the
alternating planner so that both report comparable numbers.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..dynamics import VehicleState, chain_affine_map
from ..qp import QpProblem
from .am import _slack_block, _slack_matrix, _solve, _start, add_lsq, finish
from .common import (GuessTrajectory, PlannerResult, Scene, build_scene, collision_rows, costs,
                     goal_heading_ref, heading_operators, jerk_operator, merit, retau, rollout,
                     step_violation, strict_cumsum)
from .config import PlannerConfig

log = logging.getLogger("ampc.planner")


@dataclass
class JointResult(PlannerResult):
    cost_trace: list = field(default_factory=list)


def joint_qp(guess: GuessTrajectory, w: float, trust: float, v_trust: float, config: PlannerConfig,
             scene: Scene, anchor: float) -> tuple[QpProblem, np.ndarray]:
    """Build the stacked QP over ``z = [theta_ddot, v_c, slacks]``; also returns the slack steps."""
    N, dt = config.N, config.dt
    G_th, G_om = heading_operators(N, dt)
    S = strict_cumsum(N)
    a_hat, c_hat, th_hat = guess.theta_ddot, guess.v_c, guess.theta
    v_off, v_gain = chain_affine_map(guess.v[0], guess.decay)
    ct, st = np.cos(th_hat) * dt, np.sin(th_hat) * dt
    # x = x_hat + Jx_a (a - a_hat) + Jx_c (c - c_hat)
    Jx_a = S @ ((-guess.v * st)[:, None] * G_th)
    Jy_a = S @ ((guess.v * ct)[:, None] * G_th)
    Jx_c = S @ (ct[:, None] * v_gain)
    Jy_c = S @ (st[:, None] * v_gain)
    Jx = np.hstack([Jx_a, Jx_c])
    Jy = np.hstack([Jy_a, Jy_c])
    z_hat = np.concatenate([a_hat, c_hat])

    k_row, e_row, gx, gy, val = collision_rows(guess, scene, config)
    used, s_col = _slack_block(k_row, val, N)
    n_s = used.size
    nz = 2 * N
    n = nz + n_s
    H = np.zeros((n, n))
    g = np.zeros(n)
    a_cols, c_cols, z_cols = slice(0, N), slice(N, nz), slice(0, nz)
    H[a_cols, a_cols] += 2.0 * config.w_smooth_theta * np.eye(N)
    D, e0 = jerk_operator(N, dt)
    const = add_lsq(H, g, D, e0 * anchor, config.w_smooth_v, c_cols)
    xf, yf, thf = config.goal
    const += add_lsq(H, g, Jx[N], guess.x[N] - xf - Jx[N] @ z_hat, config.w_goal_pos, z_cols)
    const += add_lsq(H, g, Jy[N], guess.y[N] - yf - Jy[N] @ z_hat, config.w_goal_pos, z_cols)
    th_free = guess.theta[0] + np.arange(N + 1) * dt * guess.theta_dot[0]
    const += add_lsq(H, g, G_th[N], th_free[N] - goal_heading_ref(th_hat[N], thf), config.w_goal_heading, a_cols)
    if n_s:
        g[nz:] += w
        H[nz:, nz:] += config.slack_reg * np.eye(n_s)

    def blk(Ma=None, Mc=None, rows=N):
        out = np.zeros((rows, n))
        if Ma is not None:
            out[:, a_cols] = Ma
        if Mc is not None:
            out[:, c_cols] = Mc
        return out

    A, b = [], []
    Gw = G_om[1:]
    om0 = guess.theta_dot[0]
    om_hat = guess.theta_dot[1:]
    A += [blk(Gw), blk(-Gw)]
    b += [np.maximum(config.theta_dot_max, om_hat) - om0, om0 - np.minimum(config.theta_dot_min, om_hat)]
    # curvature |theta_dot_k| <= kappa v_k is exactly affine in (a, c)
    kv = config.kappa_max * v_gain[1:]
    kv0 = config.kappa_max * v_off[1:]
    slack_cur = np.maximum(0.0, np.abs(om_hat) - config.kappa_max * guess.v[1:])
    A += [blk(Gw, -kv), blk(-Gw, -kv)]
    b += [kv0 - om0 + slack_cur, kv0 + om0 + slack_cur]
    # acceleration
    if config.accel_mode == "command":
        Dd = np.eye(N) - np.eye(N, k=-1)
        d_off = np.zeros(N)
        d_off[0] = -anchor
    else:
        Dd = np.eye(N) - v_gain[:N]
        d_off = -v_off[:N]
    d_hat = Dd @ c_hat + d_off
    A += [blk(None, Dd), blk(None, -Dd)]
    b += [np.maximum(config.a_max * dt, d_hat) - d_off, d_off - np.minimum(config.a_min * dt, d_hat)]
    # heading trust region
    Gt = G_th[1:]
    A += [blk(Gt), blk(-Gt)]
    b += [trust + th_hat[1:] - th_free[1:], trust - th_hat[1:] + th_free[1:]]
    if k_row.size:
        off = np.asarray(config.ego_offsets, dtype=float)[e_row]
        dth = gx * (-off * np.sin(th_hat[k_row])) + gy * (off * np.cos(th_hat[k_row]))
        Ar = gx[:, None] * Jx[k_row] + gy[:, None] * Jy[k_row]
        Ar[:, a_cols] += dth[:, None] * G_th[k_row]
        A.append(np.hstack([Ar, _slack_matrix(s_col, n_s)]))
        b.append(Ar @ z_hat - val)
    # boxes; command trust region folded into the bounds
    lb = np.concatenate([np.minimum(config.theta_ddot_min, a_hat),
                         np.maximum(np.minimum(0.0, c_hat), c_hat - v_trust), np.zeros(n_s)])
    ub = np.concatenate([np.maximum(config.theta_ddot_max, a_hat),
                         np.minimum(np.maximum(config.v_max, c_hat), c_hat + v_trust), np.full(n_s, np.inf)])
    return QpProblem(H, g, np.vstack(A), np.concatenate(b), lb, ub, constant=const), used


def joint_cost(traj: GuessTrajectory, scene: Scene, anchor: float, w: float, config: PlannerConfig):
    return merit(traj, scene, anchor, w, config)


def plan_joint(state0: VehicleState, obstacles, config: PlannerConfig, warm: GuessTrajectory | None = None,
               t: float = 0.0, v_c_prev: float | None = None) -> JointResult:
    """SQP over both control blocks with the same acceptance, penalty and stopping rules."""
    t_start = time.perf_counter()
    scene = build_scene(obstacles, state0, t, config)
    anchor = state0.v if v_c_prev is None else float(v_c_prev)
    guess = _start(state0, config, warm)
    N = config.N
    w = config.w_theta0
    trust, v_trust = config.theta_trust0, config.v_trust0
    J, worst = joint_cost(guess, scene, anchor, w, config)
    qp_log, trace, cost_trace = [], [], [J]
    converged = False
    k = 0
    for k in range(1, config.max_am_iters + 1):
        prob, used = joint_qp(guess, w, trust, v_trust, config, scene, anchor)
        sol = _solve(prob, "joint", qp_log)
        accepted = False
        if sol.ok:
            cand = retau(rollout(state0, sol.z[:N], sol.z[N:2 * N], guess.decay, config.dt), state0, config)
            m_new, _ = joint_cost(cand, scene, anchor, w, config)
            m_old, _ = joint_cost(guess, scene, anchor, w, config)
            accepted = m_new <= m_old + 1e-9 * max(1.0, abs(m_old))
        if accepted:
            guess = cand
            trust = min(1.5 * trust, 4.0 * config.theta_trust0)
            v_trust = min(1.5 * v_trust, 4.0 * config.v_trust0)
        else:
            trust *= 0.5
            v_trust *= 0.5
        if step_violation(guess, scene, config).max(initial=-np.inf) > config.violation_tol:
            w = min(w * config.delta, config.w_max)
        J_new, worst = joint_cost(guess, scene, anchor, w, config)
        dJ = abs(J_new - J)
        J = J_new
        cost_trace.append(J)
        c = costs(guess, anchor, config)
        trace.append({"k": k, "J_theta": c.J_theta, "J_v": c.J_v, "max_violation": worst,
                      "w_theta": w, "w_v": w, "trust": trust, "accepted": accepted})
        log.debug("k=%d J_theta=%.6g J_v=%.6g max_violation=%.3g w_theta=%.3g w_v=%.3g trust=%.3g",
                  k, c.J_theta, c.J_v, worst, w, w, trust)
        if dJ < config.epsilon and (accepted or trust < config.trust_min):
            converged = worst <= config.violation_tol
            break
    return finish(guess, scene, state0, anchor, config, iterations=k, converged=converged, t_start=t_start,
                  w=(w, w), qp_log=qp_log, trace=trace, cls=JointResult, cost_trace=cost_trace)
