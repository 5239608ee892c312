# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop RK4 kernel; same contract and arithmetic order as ``_pykernel``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, fmod, isfinite, sin, sqrt, M_PI
from libc.stdint cimport int64_t

cnp.import_array()

cdef double RHO_EPS = 1e-12
cdef double TWO_PI = 2.0 * M_PI


def n_records(Py_ssize_t n_steps, Py_ssize_t stride):
    return n_steps // stride + 1 + (1 if n_steps % stride else 0)


cdef inline double wrap(double x) nogil:
    # numpy's floor-mod, then reflect: (-pi, pi]
    cdef double r = fmod(M_PI - x, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return M_PI - r


cdef struct Net:
    Py_ssize_t n
    const int64_t* ptr
    const int64_t* nbr
    const double* sd
    const double* k
    double qx, qy, ea, eb


cdef void rhs(const Net* net, const double* y, double* dy) nogil:
    cdef Py_ssize_t i, e, j, n = net.n
    cdef double x, yy, ex, ey, th, rho, phi, c, v, sx, sy, ki
    cdef const double* u = y + 3 * n
    for i in range(n):
        x = y[3 * i]
        yy = y[3 * i + 1]
        th = y[3 * i + 2]
        ki = net.k[i]
        ex = u[2 * i] - x
        ey = u[2 * i + 1] - yy
        rho = sqrt(ex * ex + ey * ey)
        if rho < RHO_EPS:
            phi = 0.0
        else:
            phi = atan2(ey, ex) - th
        c = cos(phi)
        v = ki * rho * c
        dy[3 * i] = v * cos(th)
        dy[3 * i + 1] = v * sin(th)
        dy[3 * i + 2] = ki * (c + 1.0) * sin(phi)
        sx = 0.0
        sy = 0.0
        for e in range(net.ptr[i], net.ptr[i + 1]):
            j = net.nbr[e]
            sx = sx + ((x - y[3 * j]) - net.sd[2 * e])
            sy = sy + ((yy - y[3 * j + 1]) - net.sd[2 * e + 1])
        dy[3 * n + 2 * i] = (-net.ea) * sx - net.eb * (x - net.qx)
        dy[3 * n + 2 * i + 1] = (-net.ea) * sy - net.eb * (yy - net.qy)


cdef class _Arrays:
    cdef int64_t[::1] ptr
    cdef int64_t[::1] nbr
    cdef double[:, ::1] sd
    cdef double[::1] k
    cdef Net net

    def __init__(self, ptr, nbr, sd, target, k, double ea, double eb):
        self.ptr = np.ascontiguousarray(ptr, dtype=np.int64)
        self.nbr = np.ascontiguousarray(nbr, dtype=np.int64)
        sd = np.ascontiguousarray(sd, dtype=np.float64).reshape(-1, 2)
        # keep a valid pointer when there are no edges
        self.sd = sd if sd.shape[0] else np.zeros((1, 2))
        self.k = np.ascontiguousarray(k, dtype=np.float64)
        nb = self.nbr if self.nbr.shape[0] else np.zeros(1, dtype=np.int64)
        self.nbr = nb
        self.net.n = self.k.shape[0]
        self.net.ptr = &self.ptr[0]
        self.net.nbr = &self.nbr[0]
        self.net.sd = &self.sd[0, 0]
        self.net.k = &self.k[0]
        self.net.qx = float(target[0])
        self.net.qy = float(target[1])
        self.net.ea = ea
        self.net.eb = eb


def closed_loop_rhs(y, ptr, nbr, sd, target, k, double ea, double eb):
    cdef _Arrays a = _Arrays(ptr, nbr, sd, target, k, ea, eb)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty(yv.shape[0])
    cdef double[::1] ov = out
    rhs(&a.net, &yv[0], &ov[0])
    return out


def rk4_integrate(y0, ptr, nbr, sd, target, k, double ea, double eb,
                  double dt, Py_ssize_t n_steps, Py_ssize_t stride):
    cdef _Arrays a = _Arrays(ptr, nbr, sd, target, k, ea, eb)
    cdef const Net* net = &a.net
    cdef Py_ssize_t n = net.n
    cdef Py_ssize_t m = 5 * n
    cdef double[::1] y = np.array(y0, dtype=np.float64, copy=True)
    records = np.empty((n_records(n_steps, stride), m))
    cdef double[:, ::1] rec = records
    work = np.empty((5, m))
    cdef double[:, ::1] w = work
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef Py_ssize_t step, i, idx = 1
    cdef bint ok
    rec[0, :] = y
    with nogil:
        for step in range(1, n_steps + 1):
            rhs(net, &y[0], &w[0, 0])
            for i in range(m):
                w[4, i] = y[i] + half * w[0, i]
            rhs(net, &w[4, 0], &w[1, 0])
            for i in range(m):
                w[4, i] = y[i] + half * w[1, i]
            rhs(net, &w[4, 0], &w[2, 0])
            for i in range(m):
                w[4, i] = y[i] + dt * w[2, i]
            rhs(net, &w[4, 0], &w[3, 0])
            ok = True
            for i in range(m):
                y[i] = y[i] + sixth * (((w[0, i] + 2.0 * w[1, i]) + 2.0 * w[2, i]) + w[3, i])
            for i in range(n):
                y[3 * i + 2] = wrap(y[3 * i + 2])
            for i in range(m):
                if not isfinite(y[i]):
                    ok = False
            if not ok:
                with gil:
                    return records[:idx], step
            if step % stride == 0 or step == n_steps:
                rec[idx, :] = y
                idx += 1
    return records, -1
