"""Uniform response interface shared by ODE models and abstract responses.

A response maps a parameter ``x`` (length r) and an experiment ``lam``
(length d) to an output vector of length p.  ODE systems are wrapped by
:class:`identikit.odecore.ODEResponse`; the abstract responses of the model
zoo subclass :class:`Response` directly.
"""
from __future__ import annotations

import numpy as np

from .errors import MissingPartials
from .spaces import Box


class Response:
    name: str = "response"
    r_params: int
    p_outputs: int
    d_experiment: int
    param_domain: Box
    experiment_domain: Box
    has_partials: bool = False

    def __call__(self, x, lam) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x, lam) -> np.ndarray:
        """Partial derivatives of the output w.r.t. the parameter, shape (p, r)."""
        raise MissingPartials(f"{self.name} has no derivative support")

    def evaluate_set(self, x, experiments) -> np.ndarray:
        """Stacked responses, shape (q, p)."""
        return np.array([self(x, lam) for lam in experiments], dtype=float).reshape(-1, self.p_outputs)

    def jacobian_set(self, x, experiments) -> np.ndarray:
        """Stacked Jacobians, shape (q*p, r)."""
        return np.vstack([self.jacobian(x, lam) for lam in experiments])

    def describe(self) -> dict:
        return {"name": self.name, "r": self.r_params, "p": self.p_outputs,
                "d": self.d_experiment}


def as_response(obj, opts=None) -> Response:
    """Coerce a SystemModel, ModelDescriptor or Response into a Response."""
    if isinstance(obj, Response):
        return obj
    from .odecore import ODEResponse, SystemModel

    model = getattr(obj, "model", obj)
    if isinstance(model, Response):
        return model
    if isinstance(model, SystemModel):
        return ODEResponse(model, opts)
    raise TypeError(f"cannot use {type(obj).__name__} as a response")
