"""Built-in systems and abstract responses.

ODE systems: the mRNA/enzyme feedback loop with and without a degrading
input, and a nine-state polynomial system whose response is available in
closed form.  Abstract responses: responses linear in the input built from
spiral and exponential-sine curves, a smooth compactly supported example,
and a figure-8 demo curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import DomainError, ValidationError
from .odecore import Partials, SystemModel, reparametrize_time
from .response import Response
from .spaces import Box

NOMINAL_OPERON = (1.0, 1.0, 2.0, 0.4, 0.8)


@dataclass(frozen=True)
class ModelDescriptor:
    name: str
    model: object  # SystemModel or Response
    closed_form: Optional[Callable] = None
    notes: str = ""
    param_box: Optional[Box] = None
    experiment_box: Optional[Box] = None
    nominal_x: tuple = ()
    nominal_lam: tuple = ()
    extras: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.model.r_params

    @property
    def d(self) -> int:
        return self.model.d_experiment

    @property
    def p(self) -> int:
        return self.model.p_outputs

    def summary(self) -> dict:
        return {"name": self.name, "r": self.r, "d": self.d, "p": self.p,
                "ode": isinstance(self.model, SystemModel), "closed_form": self.closed_form is not None,
                "notes": self.notes}


# ---------------------------------------------------------------- operon


def _hill(E, m):
    if not E > 0:
        raise DomainError(f"E^m needs E > 0, got E={E}")
    lE = math.log(E)
    return math.exp(m * lE), lE


def _operon_rhs(z, u, x):
    M, E = z
    m, a, b = x[2], x[3], x[4]
    uu = u[0] if len(u) else 0.0
    Em, _ = _hill(E, m)
    return np.array([Em / (1.0 + Em) - a * M, M - b * E - uu * E])


def _operon_dz(z, u, x):
    M, E = z
    m, a, b = x[2], x[3], x[4]
    uu = u[0] if len(u) else 0.0
    Em, _ = _hill(E, m)
    den = 1.0 + Em
    return np.array([[-a, m * Em / (E * den * den)], [1.0, -(b + uu)]])


def _operon_dx(z, u, x):
    M, E = z
    Em, lE = _hill(E, x[2])
    den = 1.0 + Em
    return np.array([[0.0, 0.0, Em * lE / (den * den), -M, 0.0],
                     [0.0, 0.0, 0.0, 0.0, -E]])


_OPERON_PARTIALS = Partials(
    rhs_dz=_operon_dz,
    rhs_dx=_operon_dx,
    init_dx=lambda x: np.array([[1.0, 0, 0, 0, 0], [0, 1.0, 0, 0, 0]]),
    output_dz=lambda z, u, x: np.array([[1.0, 0.0]]),
    output_dx=lambda z, u, x: np.zeros((1, 5)),
)

_OPERON_PARAMS = ("M0", "E0", "m", "a", "b")
_OPERON_PARAM_BOX = Box.of((0.5, 0.5, 0.5, 0.2, 0.2), (2.0, 2.0, 4.0, 2.0, 2.0))


def _operon_base(name: str, inputs: str) -> SystemModel:
    if inputs == "none":
        d, m = 0, 0
        mu = lambda lam, t: np.zeros(0)
        names = ()
    elif inputs == "constant":
        d, m = 1, 1
        mu = lambda lam, t: np.array([lam[0] * lam[0]])
        names = ("v",)
    else:
        d, m = 2, 1
        mu = lambda lam, t: np.array([lam[0] * lam[0] + lam[1] * lam[1] * t])
        names = ("v0", "v1")
    return SystemModel(
        name=name, n_states=2, r_params=5, m_inputs=m, p_outputs=1, d_experiment=d,
        rhs=_operon_rhs, init=lambda x: np.array([x[0], x[1]], dtype=float),
        output=lambda z, u, x: np.array([z[0]]), input_gen=mu,
        param_domain=Box.positive(5), experiment_domain=Box.unbounded(d),
        state_domain=Box.of((-np.inf, 0.0), (np.inf, np.inf), (False, True)),
        partials=_OPERON_PARTIALS, param_names=_OPERON_PARAMS, state_names=("M", "E"),
        experiment_names=names,
    )


def _operon_native(inputs: str):
    def native(x, lam, T, steps, bound, sens):
        dur = lam[-1]
        if inputs == "none":
            c0, c1 = 0.0, 0.0
        elif inputs == "constant":
            c0, c1 = lam[0] * lam[0], 0.0
        else:
            c0, c1 = lam[0] * lam[0], lam[1] * lam[1] * dur
        return _kernels.operon(x, c0, c1, dur, T, steps, bound, sens)

    return native


def _operon(name, inputs, exp_box, nominal_lam, notes) -> ModelDescriptor:
    model = reparametrize_time(_operon_base(name, inputs)).with_native(_operon_native(inputs))
    return ModelDescriptor(name, model, None, notes, _OPERON_PARAM_BOX, exp_box,
                           NOMINAL_OPERON, nominal_lam)


def operon_free() -> ModelDescriptor:
    """Feedback loop without input; experiments are durations T."""
    return _operon("operon-free", "none", Box.of((0.1,), (5.0,)), (1.0,),
                   "mRNA/enzyme feedback loop, output M, experiment (T,)")


def operon_input() -> ModelDescriptor:
    """Constant input u = v^2 degrading the enzyme; experiments (v, T)."""
    return _operon("operon-input", "constant", Box.of((0.0, 0.1), (3.0, 5.0)), (1.0, 1.0),
                   "feedback loop with enzyme-degrading input u = v^2, experiment (v, T)")


def operon_linear_input() -> ModelDescriptor:
    """Input ramp u(t) = v0^2 + v1^2 t; experiments (v0, v1, T)."""
    return _operon("operon-linear-input", "linear", Box.of((0.0, 0.0, 0.1), (3.0, 3.0, 5.0)),
                   (1.0, 0.5, 1.0), "feedback loop with input ramp v0^2 + v1^2 t, experiment (v0, v1, T)")


def operon_indistinguishable_family(k: float, l: float) -> np.ndarray:
    """Parameters for which M(t) = 1 for all t (E stays at k)."""
    if not (k > 0 and l > 0):
        raise ValidationError("family needs k > 0 and l > 0")
    kl = math.exp(l * math.log(k))
    return np.array([1.0, k, l, kl / (1.0 + kl), 1.0 / k])


# ---------------------------------------------------------------- nine-state


def _nine_rhs(z, u, x):
    z1, z2, z3, z4, z5, z6, z7, z8, z9 = z[:9]
    lam = u[0]
    out = [0.0, 0.0, lam * z2, 2.0 * lam * z3, -z1 * z6, z1 * z5, -2.0 * z1 * z8, 2.0 * z1 * z7, z1 * z9]
    if len(z) == 10:
        out.append(z2 * z5 + z3 * z6 + z4 * z8 * z9)
    return np.array(out)


def _nine_dz(z, u, x):
    n = len(z)
    J = np.zeros((n, n))
    z1, z2, z3, z4, z5, z6, z7, z8, z9 = z[:9]
    lam = u[0]
    J[2, 1] = lam
    J[3, 2] = 2.0 * lam
    J[4, 0], J[4, 5] = -z6, -z1
    J[5, 0], J[5, 4] = z5, z1
    J[6, 0], J[6, 7] = -2.0 * z8, -2.0 * z1
    J[7, 0], J[7, 6] = 2.0 * z7, 2.0 * z1
    J[8, 0], J[8, 8] = z9, z1
    if n == 10:
        J[9, 1], J[9, 4] = z5, z2
        J[9, 2], J[9, 5] = z6, z3
        J[9, 3], J[9, 7], J[9, 8] = z8 * z9, z4 * z9, z4 * z8
    return J


def _nine_h(z):
    return z[1] * z[4] + z[2] * z[5] + z[3] * z[7] * z[8]


def _nine_h_dz(z):
    g = np.zeros(9)
    g[1], g[4] = z[4], z[1]
    g[2], g[5] = z[5], z[2]
    g[3], g[7], g[8] = z[7] * z[8], z[3] * z[8], z[3] * z[7]
    return g


def nine_closed_form(x, lam) -> np.ndarray:
    a, l = float(np.ravel(x)[0]), float(np.ravel(lam)[0])
    return np.array([math.cos(a) + l * math.sin(a) + l * l * math.exp(a) * math.sin(2 * a)])


def nine_closed_form_da(a: float, lam: float) -> float:
    return -math.sin(a) + lam * math.cos(a) + lam * lam * math.exp(a) * (math.sin(2 * a) + 2 * math.cos(2 * a))


def _nine(extended: bool) -> SystemModel:
    n = 10 if extended else 9

    def init(x):
        z = np.zeros(n)
        z[0], z[1], z[4], z[6], z[8] = x[0], 1.0, 1.0, 1.0, 1.0
        return z

    def init_dx(x):
        S = np.zeros((n, 1))
        S[0, 0] = 1.0
        return S

    if extended:
        output = lambda z, u, x: np.array([z[9]])
        out_dz = lambda z, u, x: np.eye(1, 10, 9)
    else:
        output = lambda z, u, x: np.array([_nine_h(z)])
        out_dz = lambda z, u, x: _nine_h_dz(z).reshape(1, 9)

    def native(x, lam, T, steps, bound, sens):
        return _kernels.nine_state(float(x[0]), float(lam[0]), 0.0, 1.0, T, steps, bound, sens, extended)

    return SystemModel(
        name="nine-state-linear-h" if extended else "nine-state",
        n_states=n, r_params=1, m_inputs=1, p_outputs=1, d_experiment=1,
        rhs=_nine_rhs, init=init, output=output,
        input_gen=lambda lam, t: np.array([lam[0]]),
        param_domain=Box.positive(1), experiment_domain=Box.unbounded(1),
        partials=Partials(rhs_dz=_nine_dz, rhs_dx=lambda z, u, x: np.zeros((n, 1)), init_dx=init_dx,
                          output_dz=out_dz, output_dx=lambda z, u, x: np.zeros((1, 1))),
        native=native, param_names=("a",), state_names=tuple(f"z{i + 1}" for i in range(n)),
        experiment_names=("lambda",),
    )


def nine_state() -> ModelDescriptor:
    """Polynomial system whose response is cos a + lam sin a + lam^2 e^a sin 2a."""
    return ModelDescriptor("nine-state", _nine(False), nine_closed_form,
                           "polynomial system, response phi(a).psi(lambda)",
                           Box.of((0.1,), (3.0,)), Box.of((-2.0,), (2.0,)), (1.0,), (2.0,))


def nine_state_linear_h() -> ModelDescriptor:
    """Nine-state system plus an integrator state; output is that state."""
    return ModelDescriptor("nine-state-linear-h", _nine(True), None,
                           "nine-state system with the output integrated into a tenth state",
                           Box.of((0.1,), (3.0,)), Box.of((-2.0,), (2.0,)), (1.0,), (2.0,))


# ---------------------------------------------------------------- curves and linear responses


def spiral_point(t: float) -> np.ndarray:
    """t e^{it} as a planar pair."""
    return np.array([t * math.cos(t), t * math.sin(t)])


def r_point(t: float) -> np.ndarray:
    """(e^{it}, e^t sin 2t) in R^3."""
    return np.array([math.cos(t), math.sin(t), math.exp(t) * math.sin(2 * t)])


def rr_point(args) -> np.ndarray:
    """Point of the product curve: r-1 spiral factors followed by one exp-sine factor."""
    args = np.asarray(args, dtype=float).reshape(-1)
    parts = [spiral_point(t) for t in args[:-1]] + [r_point(args[-1])]
    return np.concatenate(parts)


def linear_curve(x) -> np.ndarray:
    """f(x) = g(x_1^2, ..., x_{r-1}^2, x_r)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return rr_point(np.concatenate([x[:-1] ** 2, x[-1:]]))


def linear_curve_jacobian(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    r = x.size
    J = np.zeros((2 * r + 1, r))
    for i in range(r - 1):
        s = x[i] * x[i]
        ds = 2.0 * x[i]
        J[2 * i, i] = (math.cos(s) - s * math.sin(s)) * ds
        J[2 * i + 1, i] = (math.sin(s) + s * math.cos(s)) * ds
    t = x[-1]
    J[2 * r - 2, r - 1] = -math.sin(t)
    J[2 * r - 1, r - 1] = math.cos(t)
    J[2 * r, r - 1] = math.exp(t) * (math.sin(2 * t) + 2 * math.cos(2 * t))
    return J


def psi(u: float, r: int) -> np.ndarray:
    """Moment vector (1, u, ..., u^{2r})."""
    return np.array([float(u) ** k for k in range(2 * r + 1)])


class CurveResponse(Response):
    """beta(x, u) = f(x) . u for a parametrized curve f (vector input)."""

    has_partials = True

    def __init__(self, name, curve, curve_jac, r, m, param_domain, experiment_domain=None):
        self.name = name
        self.curve = curve
        self.curve_jacobian = curve_jac
        self.r_params = r
        self.p_outputs = 1
        self.d_experiment = m
        self.param_domain = param_domain
        self.experiment_domain = experiment_domain or Box.unbounded(m)

    def __call__(self, x, lam):
        x = self.param_domain.check(x, "parameter")
        lam = self.experiment_domain.check(lam, "experiment")
        return np.array([float(self.curve(x) @ lam)])

    def jacobian(self, x, lam):
        x = self.param_domain.check(x, "parameter")
        lam = self.experiment_domain.check(lam, "experiment")
        return (lam @ self.curve_jacobian(x)).reshape(1, self.r_params)


class ScalarCurveResponse(CurveResponse):
    """beta(x, u) = f(x) . psi(u) with a scalar input u."""

    def __init__(self, name, curve, curve_jac, r, param_domain):
        super().__init__(name, curve, curve_jac, r, 1, param_domain)
        self.order = r

    def __call__(self, x, lam):
        x = self.param_domain.check(x, "parameter")
        u = self.experiment_domain.check(lam, "experiment")[0]
        return np.array([float(self.curve(x) @ psi(u, self.order))])

    def jacobian(self, x, lam):
        x = self.param_domain.check(x, "parameter")
        u = self.experiment_domain.check(lam, "experiment")[0]
        return (psi(u, self.order) @ self.curve_jacobian(x)).reshape(1, self.r_params)


def _linear_domain(r: int) -> Box:
    return Box.of((-np.inf,) * (r - 1) + (0.0,), (np.inf,) * r, (False,) * (r - 1) + (True,))


def linear_response(r: int) -> ModelDescriptor:
    if r < 1:
        raise ValidationError("r must be >= 1")
    resp = CurveResponse(f"linear-response-{r}", linear_curve, linear_curve_jacobian, r, 2 * r + 1,
                         _linear_domain(r))
    return ModelDescriptor(resp.name, resp, lambda x, lam: np.array([linear_curve(x) @ np.asarray(lam)]),
                           "f(x).u with spiral factors and an exp-sine factor",
                           Box.of((0.1,) * (r - 1) + (0.1,), (3.0,) * r),
                           Box.of((-1.0,) * (2 * r + 1), (1.0,) * (2 * r + 1)),
                           (1.0,) * r, (0.5,) * (2 * r + 1))


def scalar_linear_response(r: int) -> ModelDescriptor:
    if r < 1:
        raise ValidationError("r must be >= 1")
    resp = ScalarCurveResponse(f"scalar-linear-response-{r}", linear_curve, linear_curve_jacobian, r,
                               _linear_domain(r))
    return ModelDescriptor(resp.name, resp,
                           lambda x, lam: np.array([linear_curve(x) @ psi(np.ravel(lam)[0], r)]),
                           "f(x).psi(u) with scalar input u", Box.of((0.1,) * r, (3.0,) * r),
                           Box.of((-2.0,), (2.0,)), (1.0,) * r, (2.0,))


def bump(s: float) -> float:
    """Smooth, positive on s < 0 and identically zero on s >= 0."""
    return math.exp(1.0 / s) if s < 0 else 0.0


class SmoothCounterexample(Response):
    """beta(x, u) = bump(x - u) on X = U = (0, inf)."""

    name = "smooth-counterexample"
    has_partials = True

    def __init__(self):
        self.r_params = 1
        self.p_outputs = 1
        self.d_experiment = 1
        self.param_domain = Box.positive(1)
        self.experiment_domain = Box.positive(1)

    def __call__(self, x, lam):
        x = self.param_domain.check(x, "parameter")[0]
        u = self.experiment_domain.check(lam, "experiment")[0]
        return np.array([bump(x - u)])

    def jacobian(self, x, lam):
        x = self.param_domain.check(x, "parameter")[0]
        u = self.experiment_domain.check(lam, "experiment")[0]
        s = x - u
        return np.array([[-bump(s) / (s * s) if s < 0 else 0.0]])


def smooth_counterexample() -> ModelDescriptor:
    resp = SmoothCounterexample()
    return ModelDescriptor(resp.name, resp, lambda x, lam: np.array([bump(np.ravel(x)[0] - np.ravel(lam)[0])]),
                           "bump(x - u); no finite set separates parameters beyond its largest input",
                           Box.of((0.1,), (10.0,)), Box.of((0.1,), (10.0,)), (1.0,), (2.0,))


def figure_eight() -> ModelDescriptor:
    """Demo: f(x) = (sin 2x, sin x) passes through the origin at x = 0 and x = pi."""
    curve = lambda x: np.array([math.sin(2 * x[0]), math.sin(x[0])])
    jac = lambda x: np.array([[2 * math.cos(2 * x[0])], [math.cos(x[0])]])
    resp = CurveResponse("figure-eight", curve, jac, 1, 2, Box.unbounded(1))
    return ModelDescriptor(resp.name, resp, None, "f(x).u for a figure-8 curve (demo fixture)",
                           Box.of((-1.0,), (4.0,)), Box.of((-1.0, -1.0), (1.0, 1.0)), (0.0,), (1.0, 0.0))


def circle_sine() -> ModelDescriptor:
    """Demo: f(t) = (cos t, sin t, sin 2t); its unit secant set misses some directions."""
    curve = lambda x: np.array([math.cos(x[0]), math.sin(x[0]), math.sin(2 * x[0])])
    jac = lambda x: np.array([[-math.sin(x[0])], [math.cos(x[0])], [2 * math.cos(2 * x[0])]])
    resp = CurveResponse("circle-sine", curve, jac, 1, 3, Box.unbounded(1))
    return ModelDescriptor(resp.name, resp, None, "f(t).u for (cos t, sin t, sin 2t) (demo fixture)",
                           Box.of((0.0,), (2 * math.pi,)), Box.of((-1.0,) * 3, (1.0,) * 3), (1.0,),
                           (0.5, 0.5, 0.5))


# ---------------------------------------------------------------- registry

_FIXED = {
    "nine-state": nine_state,
    "nine-state-linear-h": nine_state_linear_h,
    "operon-free": operon_free,
    "operon-input": operon_input,
    "operon-linear-input": operon_linear_input,
    "smooth-counterexample": smooth_counterexample,
    "figure-eight": figure_eight,
    "circle-sine": circle_sine,
}


def names() -> list[str]:
    return list(_FIXED) + ["linear-response-<r>", "scalar-linear-response-<r>"]


def get(name: str) -> ModelDescriptor:
    """Look up a built-in by name; linear responses take a suffix, e.g. ``linear-response-2``."""
    if name in _FIXED:
        return _FIXED[name]()
    for prefix, ctor in (("scalar-linear-response-", scalar_linear_response),
                         ("linear-response-", linear_response)):
        if name.startswith(prefix):
            try:
                r = int(name[len(prefix):])
            except ValueError:
                break
            return ctor(r)
    raise ValidationError(f"unknown model {name!r}; known: {', '.join(names())}")


def all_descriptors() -> list[ModelDescriptor]:
    return [f() for f in _FIXED.values()] + [linear_response(1), linear_response(2),
                                             scalar_linear_response(1), scalar_linear_response(2)]
