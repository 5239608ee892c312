"""Pure-Python closed-loop kernel; reference for and fallback to ``_ckernel``.

State layout (length ``5N``): ``[x_1, y_1, th_1, ..., x_N, y_N, th_N,
ux_1, uy_1, ..., ux_N, uy_N]``.

The input flow is evaluated edge by edge from neighbour lists in CSR form:
agent ``i`` owns entries ``ptr[i]:ptr[i+1]`` of ``nbr`` (neighbour index) and
``sd`` (signed displacement, ``+d`` on out-edges, ``-d`` on in-edges), so that
``u_dot_i = -ea * sum (p_i - p_j - sd) - eb * (p_i - q)``. Out-edges come
first, each group in label order; the distributed law sums in the same order,
which keeps the two modes bit-for-bit comparable. Trig goes through ``math``
(libm) for the same reason.
"""
import math

import numpy as np

RHO_EPS = 1e-12
TWO_PI = 2.0 * np.pi


def n_records(n_steps, stride):
    return n_steps // stride + 1 + (1 if n_steps % stride else 0)


def neighbour_lists(incidence, displacements):
    """``(ptr, nbr, sd)`` for an incidence matrix and per-edge displacements."""
    inc = np.asarray(incidence)
    disp = np.asarray(displacements, dtype=float)
    n, m = inc.shape
    tails = np.argmax(inc == 1, axis=0)
    heads = np.argmax(inc == -1, axis=0)
    ptr, nbr, sd = [0], [], []
    for i in range(n):
        for e in range(m):
            if tails[e] == i:
                nbr.append(heads[e])
                sd.append(disp[e])
        for e in range(m):
            if heads[e] == i:
                nbr.append(tails[e])
                sd.append(-disp[e])
        ptr.append(len(nbr))
    return (
        np.array(ptr, dtype=np.int64),
        np.array(nbr, dtype=np.int64),
        np.array(sd, dtype=float).reshape(-1, 2),
    )


def plant_rates(poses, u, k):
    """Vectorised pose derivatives ``(N, 3)`` of unicycles tracking ``u``; used for plant-only runs."""
    ex = u[:, 0] - poses[:, 0]
    ey = u[:, 1] - poses[:, 1]
    th = poses[:, 2]
    rho = np.sqrt(ex * ex + ey * ey)
    phi = np.arctan2(ey, ex) - th
    phi[rho < RHO_EPS] = 0.0
    cphi = np.cos(phi)
    v = k * rho * cphi
    out = np.empty_like(poses)
    out[:, 0] = v * np.cos(th)
    out[:, 1] = v * np.sin(th)
    out[:, 2] = k * (cphi + 1.0) * np.sin(phi)
    return out


def closed_loop_rhs(y, ptr, nbr, sd, target, k, ea, eb):
    flat = np.asarray(y, dtype=float).tolist()
    return np.array(_rhs_lists(flat, ptr.tolist(), nbr.tolist(), sd.tolist(),
                               float(target[0]), float(target[1]), list(k), ea, eb))


def _rhs_lists(flat, ptr, nbr, sd, qx, qy, k, ea, eb):
    n = len(k)
    dpose = []
    du = []
    for i in range(n):
        x, y, th = flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]
        ex = flat[3 * n + 2 * i] - x
        ey = flat[3 * n + 2 * i + 1] - y
        rho = math.sqrt(ex * ex + ey * ey)
        phi = 0.0 if rho < RHO_EPS else math.atan2(ey, ex) - th
        c = math.cos(phi)
        v = k[i] * rho * c
        dpose += (v * math.cos(th), v * math.sin(th), k[i] * (c + 1.0) * math.sin(phi))
        sx = sy = 0.0
        for e in range(ptr[i], ptr[i + 1]):
            j = nbr[e]
            sx += (x - flat[3 * j]) - sd[e][0]
            sy += (y - flat[3 * j + 1]) - sd[e][1]
        du += (-ea * sx - eb * (x - qx), -ea * sy - eb * (y - qy))
    return dpose + du


def wrap_headings(y, n):
    th = y[2 : 3 * n : 3]
    y[2 : 3 * n : 3] = np.pi - np.mod(np.pi - th, TWO_PI)


def rk4_run(rhs, y0, n_agents, dt, n_steps, stride):
    """Fixed-step RK4 with heading wrap after every step.

    Returns ``(records, failed_step)``; ``failed_step`` is ``-1`` unless a
    non-finite component appeared, in which case ``records`` stops at the
    last finite sample.
    """
    y = np.array(y0, dtype=float, copy=True)
    records = np.empty((n_records(n_steps, stride), y.size))
    records[0] = y
    idx = 1
    half = 0.5 * dt
    sixth = dt / 6.0
    for step in range(1, n_steps + 1):
        # overflow is reported through failed_step, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(y)
            k2 = rhs(y + half * k1)
            k3 = rhs(y + half * k2)
            k4 = rhs(y + dt * k3)
            y = y + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        wrap_headings(y, n_agents)
        if not np.all(np.isfinite(y)):
            return records[:idx], step
        if step % stride == 0 or step == n_steps:
            records[idx] = y
            idx += 1
    return records, -1


def rk4_integrate(y0, ptr, nbr, sd, target, k, ea, eb, dt, n_steps, stride):
    args = (ptr.tolist(), nbr.tolist(), np.asarray(sd, dtype=float).tolist(),
            float(target[0]), float(target[1]), [float(v) for v in k], float(ea), float(eb))

    def rhs(y):
        return np.array(_rhs_lists(y.tolist(), *args))

    return rk4_run(rhs, y0, len(args[5]), dt, n_steps, stride)
