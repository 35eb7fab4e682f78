"""Pure-Python versions of the compiled kernels (same signatures, same arithmetic order)."""
from __future__ import annotations

import math

import numpy as np


def _operon_rhs(y, t, x, c0, c1, s, sens):
    M, E = y[0], y[1]
    if not E > 0.0:
        return None
    m, a, b = x[2], x[3], x[4]
    u = c0 + c1 * t
    lE = math.log(E)
    Em = math.exp(m * lE)
    den = 1.0 + Em
    dy = [s * (Em / den - a * M), s * (M - b * E - u * E)]
    if sens:
        j11 = -a * s
        j12 = s * m * Em / (E * den * den)
        j21 = s
        j22 = -s * (b + u)
        top = [j11 * y[2 + j] + j12 * y[7 + j] for j in range(5)]
        bot = [j21 * y[2 + j] + j22 * y[7 + j] for j in range(5)]
        top[2] += s * Em * lE / (den * den)
        top[3] += -s * M
        bot[4] += -s * E
        dy.extend(top)
        dy.extend(bot)
    return dy


def _nine_rhs(y, t, a, c0, c1, s, sens, extended):
    u = c0 + c1 * t
    z1, z2, z3, z4, z5, z6, z7, z8, z9 = y[:9]
    dy = [0.0, 0.0, s * (u * z2), s * (2.0 * u * z3), s * (-z1 * z6), s * (z1 * z5),
          s * (-2.0 * z1 * z8), s * (2.0 * z1 * z7), s * (z1 * z9)]
    nz = 9
    if extended:
        dy.append(s * (z2 * z5 + z3 * z6 + z4 * z8 * z9))
        nz = 10
    if sens:
        S = y[nz:]
        ds = [0.0, 0.0, s * (u * S[1]), s * (2.0 * u * S[2]),
              s * (-z6 * S[0] - z1 * S[5]), s * (z5 * S[0] + z1 * S[4]),
              s * (-2.0 * z8 * S[0] - 2.0 * z1 * S[7]), s * (2.0 * z7 * S[0] + 2.0 * z1 * S[6]),
              s * (z9 * S[0] + z1 * S[8])]
        if extended:
            ds.append(s * (z5 * S[1] + z2 * S[4] + z6 * S[2] + z3 * S[5]
                           + z8 * z9 * S[3] + z4 * z9 * S[7] + z4 * z8 * S[8]))
        dy.extend(ds)
    return dy


def _drive(f, y0, nz, T, n, bound):
    h = T / n
    h6 = h / 6.0
    rows = [list(y0)]
    y = rows[0]
    ny = len(y)
    rng = range(ny)
    for step in range(n):
        t = step * h
        k1 = f(y, t)
        if k1 is None:
            return 2, step, rows
        k2 = f([y[i] + 0.5 * h * k1[i] for i in rng], t + 0.5 * h)
        if k2 is None:
            return 2, step, rows
        k3 = f([y[i] + 0.5 * h * k2[i] for i in rng], t + 0.5 * h)
        if k3 is None:
            return 2, step, rows
        k4 = f([y[i] + h * k3[i] for i in rng], t + h)
        if k4 is None:
            return 2, step, rows
        y = [y[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in rng]
        rows.append(y)
        for i in rng:
            v = y[i]
            if not math.isfinite(v) or (i < nz and abs(v) > bound):
                return 1, step + 1, rows
    return 0, -1, rows


def _pack(status, fail, rows, n, ny):
    Y = np.zeros((n + 1, ny))
    Y[: len(rows)] = rows
    return status, fail, Y


def operon(x, c0, c1, scale, T, n, bound, sens):
    xs = [float(v) for v in x]
    ny = 12 if sens else 2
    y0 = [0.0] * ny
    y0[0], y0[1] = xs[0], xs[1]
    if sens:
        y0[2] = 1.0
        y0[8] = 1.0
    c0, c1, scale = float(c0), float(c1), float(scale)

    def f(y, t):
        return _operon_rhs(y, t, xs, c0, c1, scale, sens)

    status, fail, rows = _drive(f, y0, 2, float(T), int(n), float(bound))
    return _pack(status, fail, rows, int(n), ny)


def nine_state(a, c0, c1, scale, T, n, bound, sens, extended):
    nz = 10 if extended else 9
    ny = 2 * nz if sens else nz
    y0 = [0.0] * ny
    y0[0], y0[1], y0[4], y0[6], y0[8] = float(a), 1.0, 1.0, 1.0, 1.0
    if sens:
        y0[nz] = 1.0
    a, c0, c1, scale = float(a), float(c0), float(c1), float(scale)

    def f(y, t):
        return _nine_rhs(y, t, a, c0, c1, scale, sens, extended)

    status, fail, rows = _drive(f, y0, nz, float(T), int(n), float(bound))
    return _pack(status, fail, rows, int(n), ny)
