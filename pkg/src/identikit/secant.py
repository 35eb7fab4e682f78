"""Secant geometry of curves and constructive chord solvers.

Curves used here (see :mod:`identikit.modelzoo`):

* spiral ``S``: t -> t e^{it}, t >= 0, in R^2;
* ``R``: t -> (e^{it}, e^t sin 2t), t >= 0, in R^3;
* ``R_r``: r-1 spiral factors followed by one ``R`` factor, in R^{2r+1}.

The solvers find curve arguments whose chord equals a prescribed vector
(spiral), or a positive multiple of it (``R``, ``R_r``).  Every root is
found by bisection on a bracket whose end signs are checked numerically,
and every returned solution carries the residual of its chord equation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .errors import (ConvergenceFailure, DegenerateInputs, MarginTooSmall, OutOfBracket,
                     ValidationError, ZeroDirection)
from .modelzoo import psi, r_point, rr_point, spiral_point
from .rng import stream
from .spaces import Box, ExperimentSet

TWO_PI = 2.0 * math.pi


def bisect(fn: Callable[[float], float], lo: float, hi: float, xtol: float = 1e-12,
           max_iter: int = 400) -> float:
    """Root of ``fn`` on [lo, hi] given opposite end signs; runs to machine resolution."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise OutOfBracket(f"no sign change on [{lo}, {hi}]: f={flo:.3g}, {fhi:.3g}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    if hi - lo > xtol * max(1.0, abs(lo)):
        raise ConvergenceFailure(f"bisection stalled on [{lo}, {hi}]")
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ChordSolution:
    t: float
    s: float
    chi: float
    residual: float

    def to_dict(self) -> dict:
        return {"t": self.t, "s": self.s, "chi": self.chi, "residual": self.residual}


# ---------------------------------------------------------------- fold map of (x + a) sin x


def _fold(a: float, x: float) -> float:
    return (x + a) * math.sin(x)


def m_k(a: float, k: int) -> float:
    """Turning point of (x + a) sin x in ((2k + 1/2) pi, (2k + 1) pi): root of tan x + x + a."""
    if not a > 0 or k < 0:
        raise ValidationError("m_k needs a > 0 and k >= 0")
    lo, hi = (2 * k + 0.5) * math.pi, (2 * k + 1) * math.pi
    # derivative of the fold; has no pole on the bracket unlike tan x + x + a
    return bisect(lambda x: math.sin(x) + (x + a) * math.cos(x), lo, hi)


def alpha(a: float, k: int, x: float, mk: Optional[float] = None) -> float:
    """Partner point on the falling branch: alpha(x) in [M_k, (2k+1) pi] with equal fold value."""
    mk = m_k(a, k) if mk is None else mk
    lo = 2 * k * math.pi
    if not (lo <= x <= mk):
        raise OutOfBracket(f"x={x} outside [{lo}, {mk}]")
    top = (2 * k + 1) * math.pi
    if x == lo:
        return top
    if x == mk:
        return mk
    y = _fold(a, x)
    # near the turning point rounding can put y a hair above the maximum
    if _fold(a, mk) - y <= 0:
        return mk
    # sin((2k+1) pi) is not exactly 0 in floating point
    if y <= 0 or _fold(a, top) - y >= 0:
        return top
    return bisect(lambda s: _fold(a, s) - y, mk, top)


# ---------------------------------------------------------------- spiral chords


def spiral_chord(z: complex) -> ChordSolution:
    """t, s >= 0 with t e^{it} - s e^{is} = z."""
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValidationError("target must be finite")
    r = abs(z)
    if r == 0:
        return ChordSolution(0.0, 0.0, 1.0, 0.0)
    phi = math.atan2(z.imag, z.real) % TWO_PI
    if phi == 0:
        phi = TWO_PI
    k = 0
    while phi + 2 * k * math.pi <= r / 2:
        k += 1
    mk = m_k(phi, k)

    def partner(t):
        return phi + alpha(phi, k, min(max(t - phi, 2 * k * math.pi), mk), mk)

    def gamma(t):
        s = partner(t)
        return t * math.cos(t - phi) - s * math.cos(s - phi) - r

    t = bisect(gamma, phi + 2 * k * math.pi, phi + mk)
    t, s = _polish_spiral(t, partner(t), z)
    res = abs(t * complex(math.cos(t), math.sin(t)) - s * complex(math.cos(s), math.sin(s)) - z)
    return ChordSolution(t, s, 1.0, res)


def _spiral_gap(t: float, d: float) -> complex:
    """t e^{it} - (t - d) e^{i(t - d)} without cancellation for small d."""
    e = complex(math.cos(t), math.sin(t))
    return t * e * 2j * math.sin(d / 2) * complex(math.cos(d / 2), -math.sin(d / 2)) + d * e * complex(
        math.cos(d), -math.sin(d))


def _polish_spiral(t: float, s: float, z: complex, iters: int = 8) -> tuple[float, float]:
    """Newton steps in (t, d = t - s); near the fold's turning point the partner
    map has a square-root singularity and bisection alone leaves sqrt(eps) errors."""
    d = t - s
    best = abs(_spiral_gap(t, d) - z)
    for _ in range(iters):
        g = _spiral_gap(t, d) - z
        sd = t - d
        e, es = complex(math.cos(t), math.sin(t)), complex(math.cos(sd), math.sin(sd))
        jt = e * (1 + 1j * t) - es * (1 + 1j * sd)
        jd = es * (1 + 1j * sd)
        J = np.array([[jt.real, jd.real], [jt.imag, jd.imag]])
        try:
            step = np.linalg.solve(J, [g.real, g.imag])
        except np.linalg.LinAlgError:
            break
        t2, d2 = t - step[0], d - step[1]
        r2 = abs(_spiral_gap(t2, d2) - z)
        if not (r2 < best and t2 >= 0 and t2 - d2 >= 0):
            break
        t, d, best = t2, d2, r2
    return t, t - d


def spiral_bracket_values(z: complex) -> tuple[float, float, float]:
    """(gamma at the left end, gamma at the right end, r) for the bracket used by spiral_chord."""
    r = abs(z)
    phi = math.atan2(z.imag, z.real) % TWO_PI or TWO_PI
    k = 0
    while phi + 2 * k * math.pi <= r / 2:
        k += 1
    mk = m_k(phi, k)

    def gamma(t):
        s = phi + alpha(phi, k, t - phi, mk)
        return t * math.cos(t - phi) - s * math.cos(s - phi)

    return gamma(phi + 2 * k * math.pi), gamma(phi + mk), r


# ---------------------------------------------------------------- chords of R


def _r_residual(t, s, chi, w) -> float:
    return float(np.max(np.abs(r_point(t) - r_point(s) - chi * np.asarray(w))))


def _H(theta, phi, n, q0):
    a = math.exp(theta) * math.sin(2 * (phi + theta))
    b = math.exp(2 * math.pi * n - theta) * math.sin(2 * (phi - theta))
    return a - b - q0 * math.sin(theta)


def _H_off(eps, m, phi, n, q0):
    """_H at theta = m pi + eps, exact for small eps (chords of nearly vertical w)."""
    sgn = -1.0 if m % 2 else 1.0
    a = math.exp(m * math.pi + eps) * math.sin(2 * (phi + eps))
    b = math.exp(2 * math.pi * n - m * math.pi - eps) * math.sin(2 * (phi - eps))
    return a - b - q0 * sgn * math.sin(eps)


def _solve_cell(phi, n, q0, rho, lo, hi):
    """Root of _H on [lo, hi], bisected in the offset from the nearest multiple of pi.

    Returns (t, s, chi); chi = 2 sin(theta) / rho keeps full relative precision
    even when theta is within rounding of a multiple of pi.
    """
    m = int(round(0.5 * (lo + hi) / math.pi))
    f = lambda e: _H_off(e, m, phi, n, q0)
    e1, e2 = lo - m * math.pi, hi - m * math.pi
    f1, f2 = f(e1), f(e2)
    if (f1 > 0) == (f2 > 0):
        # the scan saw a sign change at rounding level: the root is an endpoint
        eps = e1 if abs(f1) <= abs(f2) else e2
    else:
        eps = bisect(f, e1, e2)
    c = phi + math.pi / 2
    t = (c - m * math.pi + TWO_PI * n) - eps
    s = (c + m * math.pi) + eps
    chi = 2 * (-1.0 if m % 2 else 1.0) * math.sin(eps) / rho
    return t, s, chi


def _args(theta, phi, n):
    c = phi + math.pi / 2
    return c - theta + TWO_PI * n, c + theta  # t, s


def _min_n(theta, phi):
    return max(0, math.ceil((theta - phi - math.pi / 2) / TWO_PI - 1e-15))


def r_proof_bracket(phi: float, q0: float, k: Optional[int] = None, max_k: int = 40):
    """Bracket [theta1, theta2] and shift n on which C_n(theta) - q0 changes sign.

    C_n(theta) = (e^theta sin 2(phi+theta) - e^{2 pi n - theta} sin 2(phi-theta)) / sin theta,
    with n the smallest shift keeping t >= 0 over the bracket.  Returns
    (theta1, theta2, n, C(theta1), C(theta2)).  ``phi`` must lie in [0, pi/2);
    k grows from its minimal value until the end signs hold numerically.
    """
    if not 0 <= phi < math.pi / 2:
        raise ValidationError("phi must lie in [0, pi/2) for the bracket")

    def C(theta, n):
        return (_H(theta, phi, n, 0.0)) / math.sin(theta)

    def flat_cells():
        # cells of the phi = 0 case; sign-checked, so also usable when phi is within rounding of 0 or pi/2
        for kk in range(1, max_k + 1):
            t1, t2 = 2 * kk * math.pi + math.pi / 4, 2 * kk * math.pi + 3 * math.pi / 4
            n = _min_n(t2, phi)
            c1, c2 = C(t1, n), C(t2, n)
            if (c1 > q0) != (c2 > q0):
                return t1, t2, n, c1, c2
        return None

    if phi == 0:
        k0 = 1 if k is None else k
        for kk in range(k0, max_k + 1):
            t1, t2 = 2 * kk * math.pi + math.pi / 4, 2 * kk * math.pi + 3 * math.pi / 4
            n = _min_n(t2, phi)
            c1, c2 = C(t1, n), C(t2, n)
            if c1 > q0 and c2 < q0:
                return t1, t2, n, c1, c2
            if k is not None:
                break
    else:
        if k is None and min(phi, math.pi / 2 - phi) < 1e-3:
            found = flat_cells()
            if found:
                return found
        al = 0.25 * min(phi, math.pi / 2 - phi)
        k0 = 1 if k is None else k
        if k0 % 2 == 0:
            k0 += 1
        for kk in range(k0, max_k + 1, 2):
            t1, t2 = kk * math.pi - math.pi / 2 + 2 * al, kk * math.pi - 2 * al
            n = _min_n(t2, phi)
            c1, c2 = C(t1, n), C(t2, n)
            if c1 < q0 and c2 > q0:
                return t1, t2, n, c1, c2
            if k is not None:
                break
        found = flat_cells() if k is None else None
        if found:
            return found
    raise OutOfBracket(f"no bracket for phi={phi}, q={q0} up to k={max_k}")


def _scan_roots(phi, q0, rho, n_max=6, per_pi=96, min_scale=1e-2):
    """All sign changes of H_n on sin(theta) > 0 with t >= 0, for n = 0..n_max."""
    sols = []
    for n in range(n_max + 1):
        top = phi + math.pi / 2 + TWO_PI * n
        j = 0
        while 2 * j * math.pi < top:
            lo = 2 * j * math.pi
            hi = min((2 * j + 1) * math.pi, top)
            grid = np.linspace(lo, hi, per_pi + 1)[1:]
            if j == 0 or hi < (2 * j + 1) * math.pi:
                grid = grid[grid > lo]
            grid = grid[np.sin(grid) > 0]
            vals = [_H(th, phi, n, q0) for th in grid]
            for i in range(len(grid) - 1):
                if (vals[i] > 0) != (vals[i + 1] > 0):
                    t, s, chi = _solve_cell(phi, n, q0, rho, grid[i], grid[i + 1])
                    if t >= 0 and s >= 0 and chi > 0:
                        sols.append((max(t, s), chi < min_scale, (t, s, chi)))
            j += 1
        if any(not small for _, small, _ in sols):
            break
    return sols


def r_chord(w, method: str = "auto", min_scale: float = 1e-2) -> ChordSolution:
    """t, s >= 0 and chi > 0 with r_point(t) - r_point(s) = chi w.

    Writing the planar part of w as rho e^{i phi}, the planar equations hold
    identically on s = phi + pi/2 + theta, t = phi + pi/2 - theta + 2 pi n
    with chi = 2 sin(theta) / rho; the third coordinate leaves one scalar
    equation in theta.  ``method="auto"`` scans for the root with the
    smallest arguments (best conditioned), preferring chi >= ``min_scale``,
    and falls back to the bracket construction; ``method="proof"`` uses only
    the bracket construction.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (3,):
        raise ValidationError("w must have 3 components")
    if not np.all(np.isfinite(w)):
        raise ValidationError("w must be finite")
    if np.all(w == 0):
        raise ZeroDirection("w = 0 has no chord direction")
    rho = math.hypot(w[0], w[1])
    p = w[2]
    if rho <= 1e-13 * abs(p):
        # theta = pi: planar parts coincide, chi comes from the third coordinate alone;
        # for a planar part this small the chord misses w by chi * rho only
        phi = 5 * math.pi / 4 if p > 0 else 3 * math.pi / 4
        theta = math.pi
        t, s = _args(theta, phi, 0)
        chi = (math.exp(t) * math.sin(2 * t) - math.exp(s) * math.sin(2 * s)) / p
        return ChordSolution(t, s, chi, _r_residual(t, s, chi, w))
    psi_ = math.atan2(w[1], w[0]) % TWO_PI
    if psi_ >= TWO_PI:  # a tiny negative angle rounds up to 2 pi
        psi_ = 0.0
    if psi_ >= math.pi:
        # solve for -w, whose planar angle is psi - pi, and swap the endpoints
        sol = _r_chord_upper(-w, min(max(0.0, psi_ - math.pi), math.nextafter(math.pi, 0.0)), rho, method, min_scale)
        return ChordSolution(sol.s, sol.t, sol.chi, _r_residual(sol.s, sol.t, sol.chi, w))
    return _r_chord_upper(w, psi_, rho, method, min_scale)


def _r_chord_upper(w, phi, rho, method, min_scale) -> ChordSolution:
    """r_chord for a planar angle phi in [0, pi)."""
    q0 = (2 * w[2] / rho) * math.exp(-(phi + math.pi / 2))
    if method == "auto":
        sols = _scan_roots(phi, q0, rho, min_scale=min_scale)
        if sols:
            sols.sort(key=lambda c: (c[1], c[0]))
            t, s, chi = sols[0][2]
            return ChordSolution(t, s, chi, _r_residual(t, s, chi, w))
    elif method != "proof":
        raise ValidationError(f"unknown method {method!r}")
    if phi < math.pi / 2:
        t1, t2, n, _, _ = r_proof_bracket(phi, q0)
    else:
        # shifting phi by pi/2 flips the sign of both terms; same theta, same shift n
        t1, t2, n, _, _ = r_proof_bracket(phi - math.pi / 2, -q0)
    t, s, chi = _solve_cell(phi, n, q0, rho, t1, t2)
    return ChordSolution(t, s, chi, _r_residual(t, s, chi, w))


# ---------------------------------------------------------------- product curve


@dataclass(frozen=True)
class ProductChord:
    args1: np.ndarray  # curve arguments of the first point
    args2: np.ndarray
    chi: float
    residual: float

    @property
    def point1(self) -> np.ndarray:
        return rr_point(self.args1)

    @property
    def point2(self) -> np.ndarray:
        return rr_point(self.args2)

    def to_dict(self) -> dict:
        return {"args1": self.args1.tolist(), "args2": self.args2.tolist(), "chi": self.chi,
                "residual": self.residual}


def r_r_chord(direction, r: int, method: str = "auto") -> ProductChord:
    """Points a1, a2 of R_r with a1 - a2 = chi * direction, chi > 0."""
    d = np.asarray(direction, dtype=float).reshape(-1)
    if r < 1 or d.shape != (2 * r + 1,):
        raise ValidationError(f"direction must have {2 * r + 1} components")
    norm = np.linalg.norm(d)
    if not abs(norm - 1.0) < 1e-9:
        raise ValidationError(f"direction must be a unit vector, norm {norm}")
    w = d[2 * r - 2:]
    if np.all(w == 0):
        chi, tr, sr = 1.0, TWO_PI, TWO_PI
    else:
        sol = r_chord(w, method)
        chi, tr, sr = sol.chi, sol.t, sol.s
    a1, a2 = [], []
    for i in range(r - 1):
        sc = spiral_chord(chi * complex(d[2 * i], d[2 * i + 1]))
        a1.append(sc.t)
        a2.append(sc.s)
    args1 = np.array(a1 + [tr])
    args2 = np.array(a2 + [sr])
    res = float(np.max(np.abs(rr_point(args1) - rr_point(args2) - chi * d)))
    return ProductChord(args1, args2, chi, res)


@dataclass(frozen=True)
class LowerBoundPair:
    x1: np.ndarray
    x2: np.ndarray
    direction: np.ndarray
    chord: ProductChord
    set_gap: float
    curve_gap: float

    def to_dict(self) -> dict:
        return {"x1": self.x1.tolist(), "x2": self.x2.tolist(), "direction": self.direction.tolist(),
                "chord": self.chord.to_dict(), "set_gap": self.set_gap, "curve_gap": self.curve_gap}


def lower_bound_pair(u_set, r: int, method: str = "auto") -> LowerBoundPair:
    """Two parameters the scalar-input linear response cannot tell apart on 2r given inputs.

    The moment vectors psi(u_i) span a hyperplane; a unit normal a of it is a
    secant direction of R_r, so f(x1) - f(x2) = chi a for some parameters, and
    then f(x1).psi(u_i) = f(x2).psi(u_i) for every i.
    """
    u = np.asarray(u_set, dtype=float).reshape(-1)
    if u.size != 2 * r:
        raise ValidationError(f"need exactly {2 * r} inputs, got {u.size}")
    P = np.array([psi(ui, r) for ui in u])
    _, sv, Vt = np.linalg.svd(P)
    if sv[-1] <= 1e-12 * sv[0] or np.unique(u).size != u.size:
        raise DegenerateInputs("moment vectors are linearly dependent (inputs not distinct)")
    a = Vt[-1] / np.linalg.norm(Vt[-1])
    for sign in (1.0, -1.0):
        ch = r_r_chord(sign * a, r, method)
        if ch.args1[-1] > 0 and ch.args2[-1] > 0:
            break
    else:
        raise ConvergenceFailure("chord endpoints hit the excluded boundary t_r = 0 for both signs")
    x1 = np.concatenate([np.sqrt(ch.args1[:-1]), ch.args1[-1:]])
    x2 = np.concatenate([np.sqrt(ch.args2[:-1]), ch.args2[-1:]])
    from .modelzoo import linear_curve

    f1, f2 = linear_curve(x1), linear_curve(x2)
    gaps = np.abs(P @ f1 - P @ f2)
    return LowerBoundPair(x1, x2, sign * a, ch, float(gaps.max()), float(np.linalg.norm(f1 - f2)))


# ---------------------------------------------------------------- secant membership


def _angle(v: np.ndarray, u: np.ndarray) -> float:
    """Angle between unit vectors, accurate for small angles."""
    return 2.0 * math.asin(min(1.0, np.linalg.norm(v - u) / 2.0))


@dataclass(frozen=True)
class SecantEvidence:
    angle: float
    witness: Optional[tuple]

    @property
    def member(self) -> bool:
        return self.angle < 1e-4

    def to_dict(self) -> dict:
        w = None if self.witness is None else [np.asarray(p).tolist() for p in self.witness]
        return {"angle": self.angle, "witness": w}


def secant_membership(curve: Callable, box: Box, u, n_grid: int = 60, n_polish: int = 8,
                      seed: int = 0, min_chord: float = 1e-9) -> SecantEvidence:
    """Smallest angle between ``u`` and unit chords (f(a) - f(b))/|f(a) - f(b)| over a, b in ``box``.

    A coarse pair grid plus random pairs seeds a Nelder-Mead polish of the
    best candidates.  Returns angle = inf when no chord is longer than
    ``min_chord`` (e.g. a constant curve).  This is evidence, not a proof.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    u = u / np.linalg.norm(u)
    d = box.dim
    rng = stream(seed, "secant")
    pts = box.grid(max(2, int(round(n_grid ** (1.0 / d))))) if d <= 2 else box.sample(rng, n_grid)
    pts = np.vstack([pts, box.sample(rng, n_grid)])
    vals = np.array([curve(p) for p in pts])
    diff = vals[:, None, :] - vals[None, :, :]
    norms = np.linalg.norm(diff, axis=2)
    ok = norms > min_chord
    if not ok.any():
        return SecantEvidence(float("inf"), None)
    cos = np.where(ok, (diff @ u) / np.where(ok, norms, 1.0), -2.0)
    order = np.argsort(cos, axis=None)[::-1][:n_polish]

    def obj(v):
        a, b = v[:d], v[d:]
        if not (box.contains(a) and box.contains(b)):
            return 4.0
        dv = curve(a) - curve(b)
        nv = np.linalg.norm(dv)
        if nv <= min_chord:
            return 4.0
        return float(np.sum((dv / nv - u) ** 2))

    best = (float("inf"), None)
    for flat in order:
        i, j = np.unravel_index(flat, cos.shape)
        v0 = np.concatenate([pts[i], pts[j]])
        res = minimize(obj, v0, method="Nelder-Mead",
                       options={"xatol": 1e-13, "fatol": 1e-20, "maxiter": 4000, "adaptive": True})
        v = res.x if res.fun < obj(v0) else v0
        a, b = v[:d], v[d:]
        dv = curve(a) - curve(b)
        nv = np.linalg.norm(dv)
        if nv <= min_chord:
            continue
        ang = _angle(dv / nv, u)
        if ang < best[0]:
            best = (ang, (a, b))
    return SecantEvidence(*best)


def universal_set_from_direction(u, m: Optional[int] = None, curve: Optional[Callable] = None,
                                 box: Optional[Box] = None, margin: float = 1e-2,
                                 seed: int = 0) -> ExperimentSet:
    """Orthonormal basis of the complement of ``u`` as m - 1 input vectors.

    When ``curve`` and ``box`` are given, both u and -u must stay at least
    ``margin`` radians away from every sampled unit chord.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    m = u.size if m is None else m
    if u.size != m or m < 2:
        raise ValidationError("direction length must equal m >= 2")
    nrm = np.linalg.norm(u)
    if nrm == 0:
        raise ZeroDirection("zero direction")
    u = u / nrm
    if curve is not None:
        if box is None:
            raise ValidationError("a parameter box is needed to test the direction")
        for sgn in (1.0, -1.0):
            ev = secant_membership(curve, box, sgn * u, seed=seed)
            if ev.angle <= margin:
                raise MarginTooSmall(f"direction {(sgn * u).tolist()} is within {ev.angle:.3g} rad "
                                     f"of a chord (margin {margin:g})")
    _, _, Vt = np.linalg.svd(u.reshape(1, -1))
    return ExperimentSet(Vt[1:])
