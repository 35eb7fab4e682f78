# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernels for the built-in systems.

Each kernel integrates the state together with (optionally) the forward
sensitivity matrix on a fixed grid of ``n`` steps over ``[0, T]``. The input
is affine in integration time, ``u(t) = c0 + c1 t``, and the vector field is
multiplied by ``scale`` (time reparametrization). Status codes: 0 ok,
1 blow-up, 2 state left the domain.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, isfinite, fabs

cnp.import_array()

cdef enum:
    MAXY = 64

ctypedef struct Params:
    double x[8]
    double c0
    double c1
    double scale
    int sens
    int extended

ctypedef void (*rhs_t)(const double* y, double t, const Params* p, double* dy, int* bad) noexcept nogil


cdef void operon_rhs(const double* y, double t, const Params* p, double* dy, int* bad) noexcept nogil:
    cdef double M = y[0]
    cdef double E = y[1]
    cdef double s = p.scale
    cdef double u = p.c0 + p.c1 * t
    cdef double m = p.x[2]
    cdef double a = p.x[3]
    cdef double b = p.x[4]
    cdef double lE, Em, den, j11, j12, j21, j22, s0, s1
    cdef int j
    if not (E > 0.0):
        bad[0] = 2
        return
    lE = log(E)
    Em = exp(m * lE)
    den = 1.0 + Em
    dy[0] = s * (Em / den - a * M)
    dy[1] = s * (M - b * E - u * E)
    if p.sens:
        j11 = -a * s
        j12 = s * m * Em / (E * den * den)
        j21 = s
        j22 = -s * (b + u)
        for j in range(5):
            s0 = y[2 + j]
            s1 = y[7 + j]
            dy[2 + j] = j11 * s0 + j12 * s1
            dy[7 + j] = j21 * s0 + j22 * s1
        dy[4] += s * Em * lE / (den * den)
        dy[5] += -s * M
        dy[11] += -s * E


cdef void nine_rhs(const double* y, double t, const Params* p, double* dy, int* bad) noexcept nogil:
    cdef double s = p.scale
    cdef double u = p.c0 + p.c1 * t
    cdef int nz = 10 if p.extended else 9
    cdef double z1 = y[0], z2 = y[1], z3 = y[2], z4 = y[3], z5 = y[4]
    cdef double z6 = y[5], z7 = y[6], z8 = y[7], z9 = y[8]
    cdef const double* S
    dy[0] = 0.0
    dy[1] = 0.0
    dy[2] = s * (u * z2)
    dy[3] = s * (2.0 * u * z3)
    dy[4] = s * (-z1 * z6)
    dy[5] = s * (z1 * z5)
    dy[6] = s * (-2.0 * z1 * z8)
    dy[7] = s * (2.0 * z1 * z7)
    dy[8] = s * (z1 * z9)
    if p.extended:
        dy[9] = s * (z2 * z5 + z3 * z6 + z4 * z8 * z9)
    if p.sens:
        # one parameter (a); f has no explicit parameter dependence
        S = y + nz
        dy[nz + 0] = 0.0
        dy[nz + 1] = 0.0
        dy[nz + 2] = s * (u * S[1])
        dy[nz + 3] = s * (2.0 * u * S[2])
        dy[nz + 4] = s * (-z6 * S[0] - z1 * S[5])
        dy[nz + 5] = s * (z5 * S[0] + z1 * S[4])
        dy[nz + 6] = s * (-2.0 * z8 * S[0] - 2.0 * z1 * S[7])
        dy[nz + 7] = s * (2.0 * z7 * S[0] + 2.0 * z1 * S[6])
        dy[nz + 8] = s * (z9 * S[0] + z1 * S[8])
        if p.extended:
            dy[nz + 9] = s * (z5 * S[1] + z2 * S[4] + z6 * S[2] + z3 * S[5]
                              + z8 * z9 * S[3] + z4 * z9 * S[7] + z4 * z8 * S[8])


cdef int drive(rhs_t f, const Params* p, int ny, int nz, double T, Py_ssize_t n,
               double bound, double* out, Py_ssize_t* fail) noexcept nogil:
    cdef double h = T / n
    cdef double k1[MAXY]
    cdef double k2[MAXY]
    cdef double k3[MAXY]
    cdef double k4[MAXY]
    cdef double tmp[MAXY]
    cdef double* y
    cdef double* yn
    cdef double t, h6 = h / 6.0
    cdef int bad = 0
    cdef int i
    cdef Py_ssize_t step
    for step in range(n):
        t = step * h
        y = out + step * ny
        yn = out + (step + 1) * ny
        f(y, t, p, k1, &bad)
        if bad:
            fail[0] = step
            return bad
        for i in range(ny):
            tmp[i] = y[i] + 0.5 * h * k1[i]
        f(tmp, t + 0.5 * h, p, k2, &bad)
        if bad:
            fail[0] = step
            return bad
        for i in range(ny):
            tmp[i] = y[i] + 0.5 * h * k2[i]
        f(tmp, t + 0.5 * h, p, k3, &bad)
        if bad:
            fail[0] = step
            return bad
        for i in range(ny):
            tmp[i] = y[i] + h * k3[i]
        f(tmp, t + h, p, k4, &bad)
        if bad:
            fail[0] = step
            return bad
        for i in range(ny):
            yn[i] = y[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(ny):
            if not isfinite(yn[i]) or (i < nz and fabs(yn[i]) > bound):
                fail[0] = step + 1
                return 1
    return 0


def operon(x, double c0, double c1, double scale, double T, Py_ssize_t n,
           double bound, bint sens):
    """Integrate the operon system; returns ``(status, fail_step, Y)`` with Y of shape (n+1, ny)."""
    cdef Params p
    cdef int i, status
    cdef Py_ssize_t fail = -1
    cdef int ny = 12 if sens else 2
    xs = np.asarray(x, dtype=np.float64)
    for i in range(5):
        p.x[i] = xs[i]
    p.c0 = c0
    p.c1 = c1
    p.scale = scale
    p.sens = sens
    p.extended = 0
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Y = np.zeros((n + 1, ny))
    Y[0, 0] = xs[0]
    Y[0, 1] = xs[1]
    if sens:
        Y[0, 2] = 1.0
        Y[0, 8] = 1.0
    cdef double* buf = <double*> Y.data
    with nogil:
        status = drive(operon_rhs, &p, ny, 2, T, n, bound, buf, &fail)
    return status, fail, Y


def nine_state(double a, double c0, double c1, double scale, double T, Py_ssize_t n,
               double bound, bint sens, bint extended):
    """Integrate the nine-state polynomial system (ten states when ``extended``)."""
    cdef Params p
    cdef int status
    cdef Py_ssize_t fail = -1
    cdef int nz = 10 if extended else 9
    cdef int ny = 2 * nz if sens else nz
    p.x[0] = a
    p.c0 = c0
    p.c1 = c1
    p.scale = scale
    p.sens = sens
    p.extended = extended
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Y = np.zeros((n + 1, ny))
    Y[0, 0] = a
    Y[0, 1] = 1.0
    Y[0, 4] = 1.0
    Y[0, 6] = 1.0
    Y[0, 8] = 1.0
    if sens:
        Y[0, nz] = 1.0
    cdef double* buf = <double*> Y.data
    with nogil:
        status = drive(nine_rhs, &p, ny, nz, T, n, bound, buf, &fail)
    return status, fail, Y
