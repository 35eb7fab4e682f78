"""Local identifiability rank from stacked parameter Jacobians.

``rho(x, w)`` is the numerical rank of d beta_q(x, w) / dx; ``rho(x)`` is its
maximum over experiment tuples, searched greedily.  Nonsingularity (local
constancy of rho) is reported as sampled evidence, never certified.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .distinguish import DEFAULT_TOL, GridSpec, ToleranceSpec, equal_response
from .errors import NumericalFailure, SingularParameter, ValidationError
from .response import as_response
from .rng import ordered_map, stream
from .spaces import Box, ExperimentSet

RANK_THRESHOLD = 1e-7
PATIENCE = 50


def numerical_rank(J: np.ndarray, threshold: float = RANK_THRESHOLD) -> tuple[int, np.ndarray]:
    sv = np.linalg.svd(np.atleast_2d(J), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0, sv
    return int(np.sum(sv > threshold * sv[0])), sv


@dataclass
class RankReport:
    jacobian: np.ndarray
    singular_values: np.ndarray
    rank: int
    threshold: float
    experiments: Optional[list] = None

    def to_dict(self) -> dict:
        return {"jacobian": self.jacobian.tolist(), "singular_values": self.singular_values.tolist(),
                "rank": self.rank, "threshold": self.threshold, "experiments": self.experiments}


def jacobian(model, x, experiments: ExperimentSet) -> np.ndarray:
    """Stacked d beta(x, u_i)/dx, shape (q*p, r)."""
    resp = as_response(model)
    exps = experiments if isinstance(experiments, ExperimentSet) else ExperimentSet(experiments)
    return resp.jacobian_set(x, exps)


def rho(model, x, experiments: ExperimentSet, threshold: float = RANK_THRESHOLD) -> RankReport:
    exps = experiments if isinstance(experiments, ExperimentSet) else ExperimentSet(experiments)
    J = jacobian(model, x, exps)
    rank, sv = numerical_rank(J, threshold)
    return RankReport(J, sv, rank, threshold, exps.points.tolist())


@dataclass(frozen=True)
class RankSearch:
    experiment_box: Box
    patience: int = PATIENCE
    seed: int = 0
    threshold: float = RANK_THRESHOLD


@dataclass
class RhoMax:
    rank: int
    experiments: Optional[ExperimentSet]
    report: Optional[RankReport]
    candidates_tried: int

    def to_dict(self) -> dict:
        return {"rho": self.rank, "experiments": None if self.experiments is None else self.experiments.points.tolist(),
                "report": None if self.report is None else self.report.to_dict(),
                "candidates_tried": self.candidates_tried}


def rho_max(model, x, search: RankSearch, stream_key=("rho_max",)) -> RhoMax:
    """Greedy maximal rank: keep a random candidate experiment only if it raises the rank.

    Stops at rank r or after ``patience`` consecutive candidates that do not help.
    The achieving set therefore never exceeds r elements.
    """
    resp = as_response(model)
    x = resp.param_domain.check(x, "parameter")
    r = resp.r_params
    rng = stream(search.seed, *stream_key)
    rows = np.zeros((0, r))
    chosen: list[np.ndarray] = []
    rank, misses, tried = 0, 0, 0
    while rank < r and misses < search.patience:
        lam = search.experiment_box.sample(rng)
        tried += 1
        if any(np.array_equal(lam, c) for c in chosen):
            misses += 1
            continue
        try:
            Jl = np.atleast_2d(resp.jacobian(x, lam))
        except NumericalFailure:
            misses += 1
            continue
        trial = np.vstack([rows, Jl])
        new_rank, _ = numerical_rank(trial, search.threshold)
        if new_rank > rank:
            rows, rank, misses = trial, new_rank, 0
            chosen.append(lam)
        else:
            misses += 1
    if not chosen:
        return RhoMax(0, None, None, tried)
    exps = ExperimentSet(np.array(chosen))
    _, sv = numerical_rank(rows, search.threshold)
    return RhoMax(rank, exps, RankReport(rows, sv, rank, search.threshold, exps.points.tolist()), tried)


@dataclass
class NonsingularEvidence:
    nonsingular: bool
    rank_at_x: int
    probes: list = field(default_factory=list)
    probe_ranks: list = field(default_factory=list)
    note: str = ("sampled evidence only: local constancy of the maximal rank is not finitely checkable; "
                 "every probe used the same greedy budget")

    def __bool__(self) -> bool:
        return self.nonsingular

    def to_dict(self) -> dict:
        return asdict(self)


def _ball(dom: Box, x: np.ndarray, radius: float, rng) -> np.ndarray:
    for _ in range(1000):
        xi = x + radius * (2.0 * rng.random(x.size) - 1.0)
        if dom.contains(xi):
            return xi
    raise ValidationError(f"no probe inside the parameter domain within radius {radius:g}")


def is_nonsingular(model, x, radius: float, n_probe: int, search: RankSearch) -> NonsingularEvidence:
    """Compare the greedy maximal rank at ``x`` with ranks at probes in the max-norm ball."""
    resp = as_response(model)
    x = resp.param_domain.check(x, "parameter")
    base = rho_max(resp, x, search, ("rho_max", "center")).rank
    if radius <= 0 or n_probe <= 0:
        return NonsingularEvidence(True, base)
    rng = stream(search.seed, "probes")
    probes = [_ball(resp.param_domain, x, radius, rng) for _ in range(n_probe)]
    ranks = ordered_map(lambda ip: rho_max(resp, ip[1], search, ("rho_max", "probe", ip[0])).rank,
                        list(enumerate(probes)))
    return NonsingularEvidence(all(k == base for k in ranks), base, [p.tolist() for p in probes], ranks)


@dataclass
class LocalSet:
    experiments: ExperimentSet
    rank: int
    evidence: NonsingularEvidence
    pairs_checked: int
    counterexamples: list
    fiber_pairs: int
    rank_checks: int
    rank_violations: int

    @property
    def passed(self) -> bool:
        return not self.counterexamples and self.rank_violations == 0

    def to_dict(self) -> dict:
        return {"experiments": self.experiments.points.tolist(), "rank": self.rank,
                "evidence": self.evidence.to_dict(), "pairs_checked": self.pairs_checked,
                "fiber_pairs": self.fiber_pairs, "counterexamples": self.counterexamples,
                "rank_checks": self.rank_checks, "rank_violations": self.rank_violations,
                "passed": self.passed}


def _fiber_partner(resp, x1, exps, dom, step, rng, iters=30):
    """A second parameter near x1 with the same responses on ``exps`` (Gauss-Newton along the fibre)."""
    J = resp.jacobian_set(x1, exps)
    _, s, Vt = np.linalg.svd(J)
    rank = int(np.sum(s > RANK_THRESHOLD * s[0])) if s.size else 0
    null = Vt[rank:]
    if null.shape[0] == 0:
        return None
    target = resp.evaluate_set(x1, exps).reshape(-1)
    x2 = x1 + step * (rng.standard_normal(null.shape[0]) @ null)
    for _ in range(iters):
        if not dom.contains(x2):
            return None
        g = resp.evaluate_set(x2, exps).reshape(-1) - target
        if np.max(np.abs(g)) < 1e-13:
            return x2
        x2 = x2 - np.linalg.pinv(resp.jacobian_set(x2, exps), rcond=RANK_THRESHOLD) @ g
    return x2


def local_distinguishing_set(model, x, search: RankSearch, radius: float = 0.05, n_probe: int = 5,
                             n_pairs: int = 100, grid: Optional[GridSpec] = None,
                             tol: ToleranceSpec = DEFAULT_TOL) -> LocalSet:
    """Greedy rank-achieving set at a nonsingular ``x``, checked by sampled pairs in a small ball.

    A counterexample is a pair whose responses agree on the set but differ at
    some grid experiment.  Pairs are drawn uniformly in the ball and, when the
    set leaves directions unresolved, also along the level set of the set's
    responses.  The rank of the set plus each grid experiment must stay rho.
    """
    resp = as_response(model)
    x = resp.param_domain.check(x, "parameter")
    ev = is_nonsingular(resp, x, radius, n_probe, search)
    if not ev.nonsingular:
        raise SingularParameter(f"rank is not locally constant near {x.tolist()}: "
                                f"{ev.rank_at_x} at x, probes {ev.probe_ranks}")
    best = rho_max(resp, x, search, ("rho_max", "center"))
    exps = best.experiments
    if exps is None:
        raise SingularParameter("no experiment gives a nonzero derivative")
    grid = grid or GridSpec(search.experiment_box, 6, refine=False)
    nodes = grid.nodes()

    base = best.report.jacobian
    rank_violations = 0
    for lam in nodes:
        try:
            Jl = np.atleast_2d(resp.jacobian(x, lam))
        except NumericalFailure:
            continue
        if numerical_rank(np.vstack([base, Jl]), search.threshold)[0] != best.rank:
            rank_violations += 1

    rng = stream(search.seed, "local_pairs")
    dom = resp.param_domain
    counter, fiber = [], 0
    for i in range(n_pairs):
        x1 = _ball(dom, x, radius, rng)
        x2 = None
        if i % 2 == 0:
            x2 = _fiber_partner(resp, x1, exps, dom, radius / 4, rng)
            fiber += x2 is not None
        if x2 is None:
            x2 = _ball(dom, x, radius, rng)
        try:
            same = all(equal_response(resp(x1, lam), resp(x2, lam), tol) for lam in exps)
            if not same:
                continue
            for lam in nodes:
                if not equal_response(resp(x1, lam), resp(x2, lam), tol):
                    counter.append({"x1": x1.tolist(), "x2": x2.tolist(), "experiment": lam.tolist()})
                    break
        except NumericalFailure:
            continue
    return LocalSet(exps, best.rank, ev, n_pairs, counter, fiber, len(nodes), rank_violations)
