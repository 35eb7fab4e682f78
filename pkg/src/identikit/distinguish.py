"""Distinguishability of parameter pairs by finite experiment sets.

"Distinguishable at all" (some experiment separates the pair) is
approximated by a dense grid over a finite experiment box followed by one
refinement pass around the most promising cell.  Every report states the
grid used.  Universal-set testing is falsification only: a failed search for
a violating pair proves nothing.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import IdentikitError, NumericalFailure, SamplingExhausted, ValidationError
from .response import Response, as_response
from .rng import ordered_map, stream
from .spaces import Box, ExperimentSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ToleranceSpec:
    atol: float = 1e-9
    rtol: float = 1e-6

    def __post_init__(self):
        if not (self.atol >= 0 and self.rtol >= 0):
            raise ValidationError("tolerances must be nonnegative")

    def threshold(self, v1, v2) -> np.ndarray:
        return self.atol + self.rtol * np.maximum(np.abs(v1), np.abs(v2))


DEFAULT_TOL = ToleranceSpec()


def equal_response(v1, v2, tol: ToleranceSpec = DEFAULT_TOL) -> bool:
    v1 = np.asarray(v1, dtype=float).reshape(-1)
    v2 = np.asarray(v2, dtype=float).reshape(-1)
    if v1.shape != v2.shape:
        raise ValidationError(f"response dimensions differ: {v1.size} vs {v2.size}")
    return bool(np.all(np.abs(v1 - v2) <= tol.threshold(v1, v2)))


@dataclass(frozen=True)
class Verdict:
    distinguished: bool
    witness: Optional[int]
    max_gap: float

    def to_dict(self) -> dict:
        return asdict(self)


def compare_values(V1: np.ndarray, V2: np.ndarray, tol: ToleranceSpec = DEFAULT_TOL) -> Verdict:
    """Verdict from two (q, p) response matrices; outputs are compared coordinatewise."""
    V1, V2 = np.atleast_2d(V1), np.atleast_2d(V2)
    gap = np.abs(V1 - V2)
    sep = np.any(gap > tol.threshold(V1, V2), axis=1)
    idx = np.flatnonzero(sep)
    return Verdict(bool(idx.size), int(idx[0]) if idx.size else None, float(gap.max()))


def distinguishable_on_set(model, x1, x2, experiments: ExperimentSet,
                           tol: ToleranceSpec = DEFAULT_TOL) -> Verdict:
    resp = as_response(model)
    exps = experiments if isinstance(experiments, ExperimentSet) else ExperimentSet(experiments)
    V1 = resp.evaluate_set(x1, exps)
    V2 = resp.evaluate_set(x2, exps)
    return compare_values(V1, V2, tol)


def sample_experiment_set(box: Box, q: int, seed: int, min_separation: float = 0.0,
                          max_tries: int = 1000, stream_key=("set",)) -> ExperimentSet:
    """q i.i.d. uniform points in ``box``, redrawing points closer than ``min_separation``."""
    if q < 1:
        raise ValidationError("q must be >= 1")
    if min_separation > 0 and q > 1 and min_separation > box.diameter:
        raise SamplingExhausted(f"separation {min_separation:g} exceeds box diameter {box.diameter:g}")
    rng = stream(seed, *stream_key)
    pts: list[np.ndarray] = []
    tries = 0
    while len(pts) < q:
        cand = box.sample(rng)
        if all(np.max(np.abs(cand - p)) > 0 and np.max(np.abs(cand - p)) >= min_separation for p in pts):
            pts.append(cand)
            continue
        tries += 1
        if tries > max_tries:
            raise SamplingExhausted(f"could not place {q} points {min_separation:g} apart in "
                                    f"{box.describe()} after {max_tries} redraws")
    return ExperimentSet(np.array(pts), min_separation)


# ---------------------------------------------------------------- grid oracle


@dataclass(frozen=True)
class GridSpec:
    """Dense grid standing in for "some experiment separates the pair"."""

    box: Box
    points: int = 12
    refine: bool = True
    refine_points: int = 7

    def nodes(self) -> np.ndarray:
        return self.box.grid(self.points)

    def to_dict(self) -> dict:
        return {"box": self.box.to_dict(), "points_per_axis": self.points, "refine": self.refine,
                "refine_points": self.refine_points,
                "note": "existence of a separating experiment is approximated on this grid"}


def _safe_eval(resp: Response, x, lam):
    try:
        return resp(x, lam)
    except NumericalFailure:
        return None


def scan_distinguishable(model, x1, x2, grid: GridSpec, tol: ToleranceSpec = DEFAULT_TOL) -> bool:
    """True iff some grid experiment (or refined neighbour of the best cell) separates the pair.

    Grid points where either response fails numerically are skipped.
    """
    return scan_witness(model, x1, x2, grid, tol) is not None


def scan_witness(model, x1, x2, grid: GridSpec, tol: ToleranceSpec = DEFAULT_TOL) -> Optional[np.ndarray]:
    resp = as_response(model)
    best_ratio, best = -1.0, None
    for lam in grid.nodes():
        v1, v2 = _safe_eval(resp, x1, lam), _safe_eval(resp, x2, lam)
        if v1 is None or v2 is None:
            continue
        ratio = float(np.max(np.abs(v1 - v2) / tol.threshold(v1, v2)))
        if ratio > 1.0:
            return lam
        if ratio > best_ratio:
            best_ratio, best = ratio, lam
    if not grid.refine or best is None:
        return None
    box = grid.box
    step = (box.hi - box.lo) / max(grid.points - 1, 1)
    local = Box.of(np.maximum(best - step, box.lo), np.minimum(best + step, box.hi))
    for lam in local.grid(grid.refine_points):
        v1, v2 = _safe_eval(resp, x1, lam), _safe_eval(resp, x2, lam)
        if v1 is None or v2 is None:
            continue
        if not equal_response(v1, v2, tol):
            return lam
    return None


# ---------------------------------------------------------------- Monte-Carlo trials


@dataclass
class TrialReport:
    kind: str
    model: str
    q: int
    seed: int
    tolerance: dict
    grid: dict
    experiments: list
    n_requested: int
    n_separable: int = 0
    n_separated: int = 0
    n_rejected_draws: int = 0
    n_exhausted: int = 0
    failures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def fraction(self) -> float:
        return self.n_separated / self.n_separable if self.n_separable else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["separation_fraction"] = None if self.n_separable == 0 else self.fraction
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


@dataclass(frozen=True)
class _Trial:
    separable: bool
    separated: bool
    rejected: int
    pair: Optional[tuple]
    gap: float


def _run_trial(resp, exps, draw, grid, tol, max_draws):
    """Draw pairs until the grid oracle calls one separable, then test the set on it."""
    rejected = 0
    for _ in range(max_draws):
        x1, x2 = draw()
        if x1 is None:
            return _Trial(False, False, rejected, None, 0.0)
        try:
            if not scan_distinguishable(resp, x1, x2, grid, tol):
                rejected += 1
                continue
            v = compare_values(resp.evaluate_set(x1, exps), resp.evaluate_set(x2, exps), tol)
        except NumericalFailure:
            rejected += 1
            continue
        return _Trial(True, v.distinguished, rejected, (x1.tolist(), x2.tolist()), v.max_gap)
    return _Trial(False, False, rejected, None, 0.0)


def _tally(report: TrialReport, trials: Sequence[_Trial]) -> TrialReport:
    for i, tr in enumerate(trials):
        report.n_rejected_draws += tr.rejected
        if not tr.separable:
            report.n_exhausted += 1
            continue
        report.n_separable += 1
        if tr.separated:
            report.n_separated += 1
        else:
            report.failures.append({"trial": i, "x1": tr.pair[0], "x2": tr.pair[1], "max_gap": tr.gap})
    return report


def monte_carlo_theorem(model, q: int, n_pairs: int, seed: int, grid: GridSpec, param_box: Box,
                        experiment_box: Optional[Box] = None, tol: ToleranceSpec = DEFAULT_TOL,
                        min_separation: float = 1e-3, max_draws: int = 20,
                        extra_pairs: Sequence = (), experiments: Optional[ExperimentSet] = None) -> TrialReport:
    """One random q-set against ``n_pairs`` random pairs that the grid oracle calls separable.

    ``extra_pairs`` are appended as additional trials (after the random ones).
    """
    if q < 1:
        raise ValidationError("q must be >= 1")
    resp = as_response(model)
    if experiments is None:
        experiments = sample_experiment_set(experiment_box or grid.box, q, seed, min_separation)
    elif experiments.q != q:
        raise ValidationError("experiment set size does not match q")

    def trial(i):
        rng = stream(seed, "pair", i)
        return _run_trial(resp, experiments, lambda: (param_box.sample(rng), param_box.sample(rng)),
                          grid, tol, max_draws)

    def fixed(pair):
        it = iter([tuple(np.asarray(p, dtype=float) for p in pair)])
        return _run_trial(resp, experiments, lambda: next(it, (None, None)), grid, tol, 1)

    trials = ordered_map(trial, range(n_pairs)) + [fixed(p) for p in extra_pairs]
    report = TrialReport("monte_carlo_theorem", getattr(resp, "name", "model"), q, int(seed),
                         asdict(tol), grid.to_dict(), experiments.points.tolist(), n_pairs + len(extra_pairs),
                         extra={"param_box": param_box.to_dict(), "max_draws": max_draws})
    return _tally(report, trials)


def distinguish_from_reference(model, x0, n_trials: int, seed: int, grid: GridSpec, param_box: Box,
                               q: Optional[int] = None, experiment_box: Optional[Box] = None,
                               tol: ToleranceSpec = DEFAULT_TOL, min_separation: float = 1e-3,
                               max_draws: int = 20) -> TrialReport:
    """Random pairs (x, x0) against a random set of q = r + 1 experiments (by default).

    Draws with x equal to x0 are discarded.
    """
    resp = as_response(model)
    x0 = resp.param_domain.check(x0, "reference parameter")
    q = resp.r_params + 1 if q is None else q
    if q < 1:
        raise ValidationError("q must be >= 1")
    experiments = sample_experiment_set(experiment_box or grid.box, q, seed, min_separation)

    def trial(i):
        rng = stream(seed, "reference", i)

        def draw():
            x = param_box.sample(rng)
            while np.array_equal(x, x0):
                x = param_box.sample(rng)
            return x, x0

        return _run_trial(resp, experiments, draw, grid, tol, max_draws)

    trials = ordered_map(trial, range(n_trials))
    report = TrialReport("distinguish_from_reference", getattr(resp, "name", "model"), q, int(seed),
                         asdict(tol), grid.to_dict(), experiments.points.tolist(), n_trials,
                         extra={"x0": x0.tolist(), "param_box": param_box.to_dict(), "max_draws": max_draws})
    return _tally(report, trials)


# ---------------------------------------------------------------- violating pairs


@dataclass(frozen=True)
class SearchConfig:
    param_box: Box
    grid: GridSpec
    n_starts: int = 20
    seed: int = 0
    atol: float = 1e-8
    min_separation: float = 1e-3
    penalty: float = 1e3
    maxiter: int = 4000
    tol: ToleranceSpec = DEFAULT_TOL


@dataclass
class ViolationSearch:
    pair: Optional[tuple]
    residual: float
    candidates: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.pair is not None


def set_residual(resp: Response, x1, x2, experiments: ExperimentSet) -> float:
    """Largest response gap over the set; infinite when evaluation fails."""
    try:
        return float(np.max(np.abs(resp.evaluate_set(x1, experiments) - resp.evaluate_set(x2, experiments))))
    except (IdentikitError, ValueError):
        return float("inf")


def find_violating_pair(model, experiments: ExperimentSet, config: SearchConfig,
                        initial_pairs: Sequence = ()) -> ViolationSearch:
    """Search for x1, x2 that the set cannot tell apart but the grid oracle can.

    Minimizes the summed squared gaps plus a penalty keeping the pair at
    least ``min_separation`` apart (max-norm).  A candidate is accepted when
    its largest gap is below ``atol`` and the grid oracle separates it.
    """
    resp = as_response(model)
    r = resp.r_params
    dom = resp.param_domain

    def objective(v):
        x1, x2 = v[:r], v[r:]
        if not (dom.contains(x1) and dom.contains(x2)):
            return 1e30
        try:
            g = resp.evaluate_set(x1, experiments) - resp.evaluate_set(x2, experiments)
        except (IdentikitError, ValueError, OverflowError):
            return 1e30
        sep = np.max(np.abs(x1 - x2))
        short = max(0.0, config.min_separation - sep)
        return float(np.sum(g * g) + config.penalty * short * short)

    rng = stream(config.seed, "violation")
    starts = [np.concatenate([np.asarray(a, dtype=float), np.asarray(b, dtype=float)]) for a, b in initial_pairs]
    starts += [np.concatenate([config.param_box.sample(rng), config.param_box.sample(rng)])
               for _ in range(config.n_starts)]
    best = ViolationSearch(None, float("inf"))
    for v0 in starts:
        res = minimize(objective, v0, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": config.maxiter,
                                "maxfev": 2 * config.maxiter, "adaptive": True})
        v = res.x if res.fun <= objective(v0) else v0
        x1, x2 = v[:r], v[r:]
        resid = set_residual(resp, x1, x2, experiments)
        separable = resid < config.atol and scan_distinguishable(resp, x1, x2, config.grid, config.tol)
        best.candidates.append({"x1": x1.tolist(), "x2": x2.tolist(), "residual": resid, "separable": separable})
        if separable and resid < best.residual:
            best.pair, best.residual = (x1, x2), resid
    return best
