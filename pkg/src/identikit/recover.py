"""Least-squares parameter recovery from noiseless or measured responses.

Multi-start Nelder-Mead (scipy, adaptive simplex) in log coordinates for
positive parameters.  Each start restarts from its own best point until a
restart no longer improves, which guards against simplex collapse.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .errors import IdentikitError, ValidationError
from .response import as_response
from .rng import ordered_map, stream
from .spaces import Box, ExperimentSet


@dataclass(frozen=True)
class MultistartConfig:
    param_box: Box
    n_starts: int = 20
    xatol: float = 1e-9
    max_evals: int = 20000
    max_restarts: int = 4
    log_space: bool = True


@dataclass
class FitResult:
    x_hat: np.ndarray
    residual: float
    starts: int
    per_start: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"x_hat": self.x_hat.tolist(), "residual": self.residual, "starts": self.starts,
                "per_start": self.per_start}


def sum_squares(model, x, experiments: ExperimentSet, measurements) -> float:
    resp = as_response(model)
    try:
        pred = resp.evaluate_set(x, experiments)
    except (IdentikitError, ValueError, OverflowError):
        return float("inf")
    d = pred - measurements
    return float(np.sum(d * d))


def fit(model, experiments: ExperimentSet, measurements, config: MultistartConfig, seed: int) -> FitResult:
    """Best of ``n_starts`` local searches; ties go to the lower start index."""
    resp = as_response(model)
    exps = experiments if isinstance(experiments, ExperimentSet) else ExperimentSet(experiments)
    Y = np.asarray(measurements, dtype=float)
    if Y.size != exps.q * resp.p_outputs:
        raise ValidationError(f"expected {exps.q * resp.p_outputs} measurements "
                              f"({exps.q} experiments x {resp.p_outputs} outputs), got {Y.size}")
    Y = Y.reshape(exps.q, resp.p_outputs)
    if config.n_starts < 1:
        raise ValidationError("need at least one start")
    box = config.param_box
    logmask = (box.lo > 0) if config.log_space else np.zeros(box.dim, dtype=bool)
    dom = resp.param_domain

    def to_x(v):
        return np.where(logmask, np.exp(np.where(logmask, v, 0.0)), v)

    def to_v(x):
        return np.where(logmask, np.log(np.where(logmask, x, 1.0)), x)

    def objective(v):
        x = to_x(v)
        if not dom.contains(x):
            return float("inf")
        return sum_squares(resp, x, exps, Y)

    rng = stream(seed, "fit_starts")
    x0s = box.sample_log(rng, config.n_starts) if config.log_space else box.sample(rng, config.n_starts)

    def run(i):
        v = to_v(x0s[i])
        history: list[float] = []

        def tracked(w):
            f = objective(w)
            # running best over all evaluations of this start; non-increasing
            history.append(f if not history else min(history[-1], f))
            return f

        best = tracked(v)
        nfev, budget = 1, config.max_evals
        for _ in range(config.max_restarts + 1):
            if budget <= 0:
                break
            res = minimize(tracked, v, method="Nelder-Mead",
                           options={"xatol": config.xatol, "fatol": np.inf, "maxfev": budget,
                                    "adaptive": True})
            nfev += res.nfev
            budget -= res.nfev
            if not res.fun < best:
                break
            improved = best - res.fun > 1e-14 * max(best, 1e-300)
            v, best = res.x, float(res.fun)
            if not improved:
                break
        step = max(1, len(history) // 50)
        return {"start": i, "x0": x0s[i].tolist(), "x": to_x(v).tolist(), "residual": best,
                "nfev": nfev, "history": history[::step] + [history[-1]]}

    runs = ordered_map(run, range(config.n_starts))
    winner = min(runs, key=lambda d: (d["residual"], d["start"]))
    return FitResult(np.array(winner["x"]), winner["residual"], config.n_starts, runs)
