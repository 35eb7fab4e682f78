"""Integration of parametrized ODE systems, response maps and forward sensitivities.

A :class:`SystemModel` is the tuple (f, chi, h, mu) together with its
dimensions and domains.  Trajectories are computed by classical RK4 on a
fixed grid ``h = T/N``; sensitivities dz/dx are co-integrated through the
variational equations ``S' = f_z S + f_x``, ``S(0) = chi_x``.

Models may carry a ``native`` hook (see :mod:`identikit._kernels`) which
performs the same RK4 recursion in compiled code.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import (BlowUp, ConvergenceFailure, DomainError, DomainExit,
                     MissingPartials, ValidationError)
from .response import Response
from .spaces import Box

log = logging.getLogger(__name__)

Array = np.ndarray


@dataclass(frozen=True)
class Partials:
    """Analytic derivatives of a model's maps.

    Shapes: rhs_dz (n, n), rhs_dx (n, r), init_dx (n, r),
    output_dz (p, n), output_dx (p, r).
    """

    rhs_dz: Callable[[Array, Array, Array], Array]
    rhs_dx: Callable[[Array, Array, Array], Array]
    init_dx: Callable[[Array], Array]
    output_dz: Callable[[Array, Array, Array], Array]
    output_dx: Callable[[Array, Array, Array], Array]


@dataclass(frozen=True)
class SystemModel:
    name: str
    n_states: int
    r_params: int
    m_inputs: int
    p_outputs: int
    d_experiment: int
    rhs: Callable[[Array, Array, Array], Array]
    init: Callable[[Array], Array]
    output: Callable[[Array, Array, Array], Array]
    input_gen: Callable[[Array, float], Array]
    param_domain: Box
    experiment_domain: Box
    state_domain: Optional[Box] = None
    partials: Optional[Partials] = None
    # native(x, lam, T, steps, bound, sens) -> (status, fail_step, Y)
    native: Optional[Callable] = field(default=None, compare=False)
    param_names: tuple = ()
    state_names: tuple = ()
    experiment_names: tuple = ()

    def __post_init__(self):
        if self.param_domain.dim != self.r_params:
            raise ValidationError("parameter domain dimension does not match r_params")
        if self.experiment_domain.dim != self.d_experiment:
            raise ValidationError("experiment domain dimension does not match d_experiment")
        if self.p_outputs < 1:
            raise ValidationError("a model needs at least one output")
        if self.state_domain is not None and self.state_domain.dim != self.n_states:
            raise ValidationError("state domain dimension does not match n_states")

    @property
    def has_partials(self) -> bool:
        return self.partials is not None or self.native is not None

    def with_native(self, native) -> "SystemModel":
        return replace(self, native=native)

    def dims(self) -> dict:
        return {"n_states": self.n_states, "r_params": self.r_params, "m_inputs": self.m_inputs,
                "p_outputs": self.p_outputs, "d_experiment": self.d_experiment}


@dataclass(frozen=True)
class IntegrationOptions:
    """RK4 settings.

    In fixed mode the grid has ``steps`` intervals.  In adaptive mode the
    step count doubles until two successive endpoints agree within
    ``tol * max(1, |z|_inf)``; numerical failures at a given step also
    trigger a doubling.  Step sizes below ``min_step`` raise BlowUp.
    """

    steps: int = 2000
    adaptive: bool = False
    tol: float = 1e-10
    max_doublings: int = 8
    blowup_bound: float = 1e12
    min_step: float = 1e-14
    use_native: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if not self.blowup_bound > 0:
            raise ValidationError("blowup bound must be positive")

    def to_dict(self) -> dict:
        return {"steps": self.steps, "adaptive": self.adaptive, "tol": self.tol,
                "max_doublings": self.max_doublings, "blowup_bound": self.blowup_bound,
                "min_step": self.min_step}


DEFAULT_OPTIONS = IntegrationOptions()


@dataclass(frozen=True)
class Trajectory:
    times: Array
    states: Array
    sensitivities: Optional[Array] = None
    steps: int = 0

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> Array:
        return self.states[-1]

    def at(self, t: float) -> Array:
        """State at time t by linear interpolation on the RK4 grid."""
        if not (0.0 <= t <= self.T):
            raise ValidationError(f"t={t} outside [0, {self.T}]")
        return np.array([np.interp(t, self.times, col) for col in self.states.T])


def _check_inputs(model: SystemModel, x, lam, T) -> tuple[Array, Array, float]:
    x = model.param_domain.check(x, "parameter")
    lam = model.experiment_domain.check(lam, "experiment")
    T = float(T)
    if not (T > 0 and np.isfinite(T)):
        raise ValidationError(f"duration must be positive and finite, got {T}")
    return x, lam, T


def _rk4_generic(model: SystemModel, x, lam, T, n, bound, sens):
    """Python RK4 on the callables; same recursion as the compiled kernels."""
    nz = model.n_states
    z0 = np.asarray(model.init(x), dtype=float).reshape(nz)
    P = model.partials
    if sens:
        S0 = np.asarray(P.init_dx(x), dtype=float).reshape(nz, model.r_params)
        y0 = np.concatenate([z0, S0.reshape(-1)])
    else:
        y0 = z0
    r = model.r_params

    def F(y, t):
        z = y[:nz]
        u = np.asarray(model.input_gen(lam, t), dtype=float).reshape(-1)
        dz = np.asarray(model.rhs(z, u, x), dtype=float).reshape(nz)
        if not sens:
            return dz
        S = y[nz:].reshape(nz, r)
        dS = np.asarray(P.rhs_dz(z, u, x)) @ S + np.asarray(P.rhs_dx(z, u, x))
        return np.concatenate([dz, dS.reshape(-1)])

    h = T / n
    h6 = h / 6.0
    Y = np.zeros((n + 1, y0.size))
    Y[0] = y0
    y = y0
    for step in range(n):
        t = step * h
        try:
            k1 = F(y, t)
            k2 = F(y + 0.5 * h * k1, t + 0.5 * h)
            k3 = F(y + 0.5 * h * k2, t + 0.5 * h)
            k4 = F(y + h * k3, t + h)
        except (DomainError, ZeroDivisionError, OverflowError, ValueError):
            return 2, step, Y
        y = y + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        Y[step + 1] = y
        if not np.all(np.isfinite(y)) or np.max(np.abs(y[:nz])) > bound:
            return 1, step + 1, Y
        if model.state_domain is not None and not model.state_domain.contains(y[:nz]):
            return 2, step + 1, Y
    return 0, -1, Y


def _run(model, x, lam, T, n, opts, sens):
    if opts.use_native and model.native is not None:
        status, fail, Y = model.native(x, lam, T, n, opts.blowup_bound, sens)
        # kernels reject out-of-domain states at every stage evaluation, which
        # covers all rows but the last
        if status == 0 and model.state_domain is not None and not model.state_domain.contains(Y[-1, : model.n_states]):
            status, fail = 2, n
    else:
        status, fail, Y = _rk4_generic(model, x, lam, T, n, opts.blowup_bound, sens)
    h = T / n
    if status == 1:
        raise BlowUp(f"{model.name}: state norm exceeded {opts.blowup_bound:g} "
                     f"(or became non-finite) near t={fail * h:.6g}")
    if status == 2:
        raise DomainExit(f"{model.name}: state left its domain near t={max(fail, 0) * h:.6g}")
    return Y


def _trajectory(model, Y, T, n, sens) -> Trajectory:
    nz = model.n_states
    times = np.linspace(0.0, T, n + 1)
    S = Y[:, nz:].reshape(n + 1, nz, model.r_params) if sens else None
    return Trajectory(times, Y[:, :nz].copy(), S, n)


def _integrate(model, x, lam, T, opts, sens) -> Trajectory:
    if sens and not model.has_partials:
        raise MissingPartials(f"{model.name} provides no derivatives")
    n = opts.steps
    if not opts.adaptive:
        return _trajectory(model, _run(model, x, lam, T, n, opts, sens), T, n, sens)
    prev = None
    for _ in range(opts.max_doublings + 1):
        if T / n < opts.min_step:
            raise BlowUp(f"{model.name}: step size {T / n:.3g} underflows {opts.min_step:g}")
        try:
            Y = _run(model, x, lam, T, n, opts, sens)
        except (BlowUp, DomainExit):
            prev = None
            n *= 2
            continue
        end = Y[-1, : model.n_states]
        if prev is not None:
            gap = np.max(np.abs(end - prev))
            if gap <= opts.tol * max(1.0, np.max(np.abs(end))):
                return _trajectory(model, Y, T, n, sens)
        prev = end
        n *= 2
    raise ConvergenceFailure(f"{model.name}: adaptive refinement did not converge "
                             f"within {opts.max_doublings} doublings")


def integrate(model: SystemModel, x, lam, T: float, opts: IntegrationOptions = DEFAULT_OPTIONS) -> Trajectory:
    x, lam, T = _check_inputs(model, x, lam, T)
    return _integrate(model, x, lam, T, opts, False)


def integrate_with_sensitivities(model: SystemModel, x, lam, T: float,
                                 opts: IntegrationOptions = DEFAULT_OPTIONS) -> Trajectory:
    x, lam, T = _check_inputs(model, x, lam, T)
    return _integrate(model, x, lam, T, opts, True)


def response_at(model: SystemModel, x, lam, T: float, opts: IntegrationOptions = DEFAULT_OPTIONS) -> Array:
    """Output at time T under the input mu(lam, .)."""
    x, lam, T = _check_inputs(model, x, lam, T)
    traj = _integrate(model, x, lam, T, opts, False)
    u = np.asarray(model.input_gen(lam, T), dtype=float).reshape(-1)
    return np.asarray(model.output(traj.final, u, x), dtype=float).reshape(model.p_outputs)


def response(model: SystemModel, x, lam, opts: IntegrationOptions = DEFAULT_OPTIONS) -> Array:
    """The response map: output at the normalized final time 1."""
    return response_at(model, x, lam, 1.0, opts)


def response_jacobian_at(model: SystemModel, x, lam, T: float,
                         opts: IntegrationOptions = DEFAULT_OPTIONS) -> tuple[Array, Array]:
    """Return ``(value, d value / dx)`` at time T, shapes (p,) and (p, r)."""
    x, lam, T = _check_inputs(model, x, lam, T)
    P = model.partials
    if P is None:
        raise MissingPartials(f"{model.name} provides no output derivatives")
    traj = _integrate(model, x, lam, T, opts, True)
    z, S = traj.final, traj.sensitivities[-1]
    u = np.asarray(model.input_gen(lam, T), dtype=float).reshape(-1)
    val = np.asarray(model.output(z, u, x), dtype=float).reshape(model.p_outputs)
    jac = np.asarray(P.output_dz(z, u, x)) @ S + np.asarray(P.output_dx(z, u, x))
    return val, jac.reshape(model.p_outputs, model.r_params)


def reparametrize_time(model: SystemModel) -> SystemModel:
    """Append the duration T as an experiment coordinate.

    The new system has input values (u0, u), vector field u0 * f(z, u, x)
    and input generator ((lam, T), t) -> (T, mu(lam, T t)), so its response
    at time 1 equals the original output at time T.
    """
    d, m = model.d_experiment, model.m_inputs
    f, h, mu = model.rhs, model.output, model.input_gen

    def rhs(z, u, x):
        return u[0] * np.asarray(f(z, u[1:], x), dtype=float)

    def output(z, u, x):
        return h(z, u[1:], x)

    def input_gen(lam, t):
        lam = np.asarray(lam, dtype=float)
        T = lam[d]
        inner = np.asarray(mu(lam[:d], T * t), dtype=float).reshape(-1)
        return np.concatenate([[T], inner])

    partials = None
    if model.partials is not None:
        P = model.partials
        partials = Partials(
            rhs_dz=lambda z, u, x: u[0] * np.asarray(P.rhs_dz(z, u[1:], x), dtype=float),
            rhs_dx=lambda z, u, x: u[0] * np.asarray(P.rhs_dx(z, u[1:], x), dtype=float),
            init_dx=P.init_dx,
            output_dz=lambda z, u, x: P.output_dz(z, u[1:], x),
            output_dx=lambda z, u, x: P.output_dx(z, u[1:], x),
        )
    dom = model.experiment_domain
    exp_domain = Box(dom.lower + (0.0,), dom.upper + (np.inf,), dom.open_lower + (True,))
    return SystemModel(
        name=model.name, n_states=model.n_states, r_params=model.r_params,
        m_inputs=m + 1, p_outputs=model.p_outputs, d_experiment=d + 1,
        rhs=rhs, init=model.init, output=output, input_gen=input_gen,
        param_domain=model.param_domain, experiment_domain=exp_domain,
        state_domain=model.state_domain, partials=partials, native=None,
        param_names=model.param_names, state_names=model.state_names,
        experiment_names=tuple(model.experiment_names) + ("T",) if model.experiment_names else (),
    )


class ODEResponse(Response):
    """Response map of a SystemModel (output at time 1)."""

    def __init__(self, model: SystemModel, opts: Optional[IntegrationOptions] = None):
        self.model = model
        self.opts = opts or DEFAULT_OPTIONS
        self.name = model.name
        self.r_params = model.r_params
        self.p_outputs = model.p_outputs
        self.d_experiment = model.d_experiment
        self.param_domain = model.param_domain
        self.experiment_domain = model.experiment_domain
        self.has_partials = model.partials is not None

    def __call__(self, x, lam) -> Array:
        return response(self.model, x, lam, self.opts)

    def jacobian(self, x, lam) -> Array:
        return response_jacobian_at(self.model, x, lam, 1.0, self.opts)[1]
