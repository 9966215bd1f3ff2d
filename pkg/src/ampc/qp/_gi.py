"""Goldfarb-Idnani dual active-set iteration.

Solves ``min 1/2 z'Hz + g'z  s.t.  C z >= b`` given ``J = L^{-T}`` where
``H = L L'``.  ``J`` must be Fortran-ordered: the updates rotate its columns.
Status codes: 0 optimal, 1 iteration cap, 2 infeasible.
"""
import numpy as np

from .._accel import kernel


@kernel
def gi_kernel(J, g, C, b, max_iter, tol):
    n = J.shape[0]
    m = C.shape[0]
    z = -(J @ (J.T @ g))
    R = np.zeros((n, n))
    active = np.full(n, -1)
    u = np.zeros(n)
    is_active = np.zeros(m, dtype=np.bool_)
    d = np.zeros(n)
    r = np.zeros(n)
    d2 = np.zeros(n)
    q = 0
    it = 0
    status = 0
    while True:
        s = C @ z - b
        p = -1
        smin = -tol
        for i in range(m):
            if not is_active[i] and s[i] < smin:
                smin = s[i]
                p = i
        if p < 0:
            break
        sp = s[p]
        up = 0.0
        while True:
            it += 1
            if it > max_iter:
                status = 1
                break
            d[:] = J.T @ C[p]
            d2[:] = d
            d2[:q] = 0.0
            zs = J @ d2
            dz = d2 @ d2
            for i in range(q - 1, -1, -1):
                acc = d[i]
                for j in range(i + 1, q):
                    acc -= R[i, j] * r[j]
                r[i] = acc / R[i, i]
            t1 = np.inf
            kdrop = -1
            for j in range(q):
                if r[j] > 0.0:
                    tj = u[j] / r[j]
                    if tj < t1:
                        t1 = tj
                        kdrop = j
            t2 = np.inf
            if dz > 1e-14:
                t2 = -sp / dz
            if t1 == np.inf and t2 == np.inf:
                status = 2
                break
            t = min(t1, t2)
            if t2 < np.inf:
                z += t * zs
                sp += t * dz
            for j in range(q):
                u[j] = max(u[j] - t * r[j], 0.0)
            up += t
            if t2 <= t1:
                # add p: rotate d[q+1:] into d[q]
                for j in range(n - 1, q, -1):
                    bb = d[j]
                    if bb == 0.0:
                        continue
                    aa = d[j - 1]
                    h = np.hypot(aa, bb)
                    c = aa / h
                    sn = bb / h
                    d[j - 1] = h
                    d[j] = 0.0
                    for i in range(n):
                        a0 = J[i, j - 1]
                        a1 = J[i, j]
                        J[i, j - 1] = c * a0 + sn * a1
                        J[i, j] = -sn * a0 + c * a1
                for i in range(q + 1):
                    R[i, q] = d[i]
                active[q] = p
                u[q] = up
                is_active[p] = True
                q += 1
                break
            # partial step: drop kdrop and retriangularise R
            is_active[active[kdrop]] = False
            for j in range(kdrop, q - 1):
                active[j] = active[j + 1]
                u[j] = u[j + 1]
                for i in range(n):
                    R[i, j] = R[i, j + 1]
            active[q - 1] = -1
            u[q - 1] = 0.0
            for i in range(n):
                R[i, q - 1] = 0.0
            q -= 1
            for j in range(kdrop, q):
                bb = R[j + 1, j]
                if bb == 0.0:
                    continue
                aa = R[j, j]
                h = np.hypot(aa, bb)
                c = aa / h
                sn = bb / h
                for k in range(j, q):
                    r0 = R[j, k]
                    r1 = R[j + 1, k]
                    R[j, k] = c * r0 + sn * r1
                    R[j + 1, k] = -sn * r0 + c * r1
                for i in range(n):
                    a0 = J[i, j]
                    a1 = J[i, j + 1]
                    J[i, j] = c * a0 + sn * a1
                    J[i, j + 1] = -sn * a0 + c * a1
        if status != 0:
            break
    lam = np.zeros(m)
    for j in range(q):
        lam[active[j]] = u[j]
    return z, lam, status, it
