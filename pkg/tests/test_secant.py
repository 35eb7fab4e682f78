import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from identikit import modelzoo
from identikit.errors import (ConvergenceFailure, DegenerateInputs, MarginTooSmall, OutOfBracket,
                              ValidationError, ZeroDirection)
from identikit.secant import (alpha, bisect, lower_bound_pair, m_k, r_chord, r_proof_bracket, r_r_chord,
                              secant_membership, spiral_bracket_values, spiral_chord,
                              universal_set_from_direction)
from identikit.spaces import Box

FINITE = dict(allow_nan=False, allow_infinity=False)


def fold(a, x):
    return (x + a) * math.sin(x)


def test_bisect():
    assert bisect(lambda x: x * x - 2, 0.0, 2.0) == pytest.approx(math.sqrt(2), abs=1e-12)
    with pytest.raises(OutOfBracket):
        bisect(lambda x: x * x + 1, -1.0, 1.0)


@pytest.mark.parametrize("a", [0.5, 1.0, math.pi])
@pytest.mark.parametrize("k", [0, 1, 3])
def test_m_k_turning_point(a, k):
    m = m_k(a, k)
    assert abs(math.tan(m) + m + a) < 1e-9
    assert (2 * k + 0.5) * math.pi < m < (2 * k + 1) * math.pi
    d = lambda x: math.sin(x) + (x + a) * math.cos(x)
    assert d(m - 1e-6) > 0 > d(m + 1e-6)


@pytest.mark.parametrize("a,k", [(0.5, 0), (1.0, 1), (math.pi, 2)])
def test_alpha_fold(a, k):
    m = m_k(a, k)
    assert alpha(a, k, 2 * k * math.pi) == (2 * k + 1) * math.pi
    assert alpha(a, k, m) == pytest.approx(m, abs=1e-9)
    rng = np.random.default_rng(0)
    for x in rng.uniform(2 * k * math.pi, m, 20):
        y = alpha(a, k, x)
        assert m <= y <= (2 * k + 1) * math.pi
        assert abs(fold(a, y) - fold(a, x)) < 1e-9


def test_spiral_examples():
    sol = spiral_chord(0j)
    assert sol.t == sol.s == 0.0
    sol = spiral_chord(3 + 4j)
    z = complex(*modelzoo.spiral_point(sol.t)) - complex(*modelzoo.spiral_point(sol.s))
    assert abs(z - (3 + 4j)) < 1e-8 and sol.t >= 0 and sol.s >= 0
    left, right, r = spiral_bracket_values(3 + 4j)
    assert left > r and right == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=100)
@given(st.floats(-50, 50, **FINITE), st.floats(-50, 50, **FINITE))
def test_spiral_residual_property(x, y):
    sol = spiral_chord(complex(x, y))
    z = complex(*modelzoo.spiral_point(sol.t)) - complex(*modelzoo.spiral_point(sol.s))
    assert abs(z - complex(x, y)) < 1e-8 * max(1.0, abs(complex(x, y)))


def _r_res(sol, w):
    return np.max(np.abs(modelzoo.r_point(sol.t) - modelzoo.r_point(sol.s) - sol.chi * np.asarray(w)))


def _r_scale(sol):
    # rounding in r(t) - r(s) is proportional to the size of the curve points themselves
    return max(1.0, sol.chi, np.max(np.abs(modelzoo.r_point(sol.t))), np.max(np.abs(modelzoo.r_point(sol.s))))


def test_r_chord_planar_zero():
    for p in (1.0, -2.0):
        w = [0.0, 0.0, p]
        sol = r_chord(w)
        assert sol.chi > 0 and _r_res(sol, w) < 1e-8
        g = lambda t: math.exp(t) * math.sin(2 * t)
        assert sol.chi == pytest.approx((g(sol.t) - g(sol.s)) / p, rel=1e-12)


def test_r_chord_zero_rejected():
    with pytest.raises(ZeroDirection):
        r_chord([0.0, 0.0, 0.0])


def test_proof_bracket_signs():
    for phi in (0.0, 0.4, 1.2):
        for q0 in (-3.0, 0.0, 2.0):
            t1, t2, n, c1, c2 = r_proof_bracket(phi, q0)
            assert c1 * c2 < 0


def _unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


vec3 = st.tuples(*[st.floats(-1, 1, **FINITE)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3)


@settings(max_examples=100)
@given(vec3, st.sampled_from(["auto", "proof"]))
def test_r_chord_residual_property(v, method):
    w = _unit(v)
    sol = r_chord(w, method)
    assert sol.chi > 0 and sol.t >= 0 and sol.s >= 0
    # nearly vertical w with planar angle near pi/2 admits only long chords (chi ~ 1/rho),
    # so the residual is measured against the size of the chord endpoints
    assert _r_res(sol, w) < 1e-8 * _r_scale(sol)


def test_r_chord_nearly_vertical():
    for e in (1e-4, 1e-8, 1e-12, 1e-16, 1e-300):
        w = _unit([e, 0.3 * e, 1.0])
        sol = r_chord(w)
        assert sol.chi > 0 and _r_res(sol, w) < 1e-8
    for v in ([-1.0, 1e-20, 0.0], [1.0, -1e-20, 0.0], [1.0, -1e-300, -0.2]):
        for method in ("auto", "proof"):
            sol = r_chord(_unit(v), method)
            assert _r_res(sol, _unit(v)) < 1e-8 * _r_scale(sol)


def test_r_r_examples():
    w = _unit([0.3, -0.2, 0.9])
    a = r_r_chord(w, 1)
    b = r_chord(w)
    assert (a.args1[0], a.args2[0], a.chi) == (b.t, b.s, b.chi)
    d = np.zeros(5)
    d[4] = 1.0
    pc = r_r_chord(d, 2)
    assert pc.args1[0] == pc.args2[0]
    with pytest.raises(ValidationError):
        r_r_chord([1.0, 0.0, 0.0], 2)


@settings(max_examples=50)
@given(st.integers(1, 3), st.integers(0, 2**31))
def test_r_r_residual_property(r, seed):
    d = _unit(np.random.default_rng(seed).normal(size=2 * r + 1))
    pc = r_r_chord(d, r)
    assert pc.chi > 0
    assert np.max(np.abs(pc.point1 - pc.point2 - pc.chi * d)) < 1e-7


def test_lower_bound_example():
    pair = lower_bound_pair([0.0, 1.0], 1)
    f1, f2 = modelzoo.linear_curve(pair.x1), modelzoo.linear_curve(pair.x2)
    for u in (0.0, 1.0):
        assert abs(f1 @ modelzoo.psi(u, 1) - f2 @ modelzoo.psi(u, 1)) < 1e-7
    assert np.max(np.abs(f1 - f2)) > 1e-3
    assert abs(pair.direction @ np.array([1.0, 0.0, 0.0])) < 1e-12  # normal to psi(0)


def test_lower_bound_r2():
    pair = lower_bound_pair([-1.0, -0.3, 0.4, 1.5], 2)
    assert pair.set_gap < 1e-7 and pair.curve_gap > 1e-3


def test_lower_bound_degenerate():
    with pytest.raises(DegenerateInputs):
        lower_bound_pair([0.5, 0.5], 1)
    with pytest.raises(ValidationError):
        lower_bound_pair([0.5], 1)


def test_secant_membership():
    spiral = lambda x: modelzoo.spiral_point(x[0])
    box = Box.of((0.0,), (15.0,))
    for u in ([1.0, 0.0], [0.6, -0.8]):
        assert secant_membership(spiral, box, u).member
    const = secant_membership(lambda x: np.array([1.0, 2.0]), box, [1.0, 0.0])
    assert math.isinf(const.angle) and not const.member


def test_secant_antisymmetry():
    curve = lambda x: np.array([math.cos(x[0]), math.sin(x[0]), math.sin(2 * x[0])])
    box = Box.of((0.0,), (2 * math.pi,))
    u = _unit([0.2, 0.5, 0.8])
    a = secant_membership(curve, box, u).angle
    b = secant_membership(curve, box, -u).angle
    assert a == pytest.approx(b, abs=1e-6)


def test_circle_sine_misses_a_direction():
    curve = lambda x: np.array([math.cos(x[0]), math.sin(x[0]), math.sin(2 * x[0])])
    box = Box.of((0.0,), (2 * math.pi,))
    ev = secant_membership(curve, box, [0.0, 0.0, 1.0])
    assert ev.angle > 0.1


def test_universal_set_planar():
    planar = lambda x: np.array([math.cos(x[0]), math.sin(2 * x[0]), 0.0])
    box = Box.of((0.0,), (2 * math.pi,))
    s = universal_set_from_direction([0.0, 0.0, 1.0], curve=planar, box=box)
    assert s.q == 2
    assert np.allclose(s.points @ s.points.T, np.eye(2), atol=1e-12)
    assert np.allclose(np.abs(s.points[:, 2]), 0.0)


def test_universal_set_circle_sine_separates():
    desc = modelzoo.circle_sine()
    curve = lambda x: np.array([math.cos(x[0]), math.sin(x[0]), math.sin(2 * x[0])])
    s = universal_set_from_direction([0.0, 0.0, 1.0], curve=curve, box=desc.param_box)
    rng = np.random.default_rng(5)
    for _ in range(100):
        x1, x2 = desc.param_box.sample(rng), desc.param_box.sample(rng)
        d = curve(x1) - curve(x2)
        if np.linalg.norm(d) > 1e-6:
            assert np.max(np.abs(s.points @ d)) > 1e-9


def test_universal_set_margin():
    spiral3 = lambda x: np.array([*modelzoo.spiral_point(x[0]), 0.0])
    with pytest.raises(MarginTooSmall):
        universal_set_from_direction([1.0, 0.0, 0.0], curve=spiral3, box=Box.of((0.0,), (15.0,)))
    with pytest.raises(ZeroDirection):
        universal_set_from_direction([0.0, 0.0])
