import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from identikit import modelzoo
from identikit.errors import SingularParameter, ValidationError
from identikit.localrank import (RankSearch, is_nonsingular, jacobian, local_distinguishing_set,
                                 numerical_rank, rho, rho_max)
from identikit.response import as_response
from identikit.spaces import ExperimentSet


def test_nine_state_jacobian_at_zero_input():
    for a in (0.5, 1.0, 2.0):
        J = jacobian(modelzoo.nine_state(), [a], ExperimentSet([[0.0]]))
        assert J[0, 0] == pytest.approx(-math.sin(a), abs=1e-8)


def test_empty_set_rejected():
    with pytest.raises(ValidationError):
        ExperimentSet(np.zeros((0, 1)))
    with pytest.raises(ValidationError):
        ExperimentSet([[1.0], [1.0]])


def test_operon_jacobian_fd():
    desc = modelzoo.operon_input()
    resp = as_response(desc)
    x, lam = np.array(desc.nominal_x), desc.nominal_lam
    J = resp.jacobian(x, lam)
    h = 1e-6
    F = np.column_stack([(resp(x + h * e, lam) - resp(x - h * e, lam)) / (2 * h) for e in np.eye(5)])
    assert np.linalg.norm(J - F) / np.linalg.norm(J) < 1e-4


def test_nine_state_rank_one():
    assert rho(modelzoo.nine_state(), [1.0], ExperimentSet([[0.7]])).rank == 1
    best = rho_max(modelzoo.nine_state(), [1.0], RankSearch(modelzoo.nine_state().experiment_box))
    assert best.rank == 1 and best.experiments.q == 1


def test_operon_full_rank_and_plateau():
    desc = modelzoo.operon_input()
    best = rho_max(desc, desc.nominal_x, RankSearch(desc.experiment_box, seed=4))
    assert best.rank <= 5 and best.experiments.q == best.rank
    assert best.rank == 5
    rev = ExperimentSet(best.experiments.points[::-1])
    assert rho(desc, desc.nominal_x, rev).rank == best.rank


def test_family_point_is_rank_deficient():
    desc = modelzoo.operon_free()
    x = modelzoo.operon_indistinguishable_family(2.0, 2.5)
    best = rho_max(desc, x, RankSearch(desc.experiment_box, seed=1))
    assert best.rank <= 4


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_rank_invariances(seed):
    rng = np.random.default_rng(seed)
    J = rng.normal(size=(6, 4)) @ np.diag([1.0, 1.0, 1.0, 0.0])
    k = numerical_rank(J)[0]
    assert k == numerical_rank(J[rng.permutation(6)])[0] == 3
    assert numerical_rank(np.vstack([J, J[:1]]))[0] == k
    assert numerical_rank(J[:3])[0] <= k


def test_nonsingular_evidence():
    desc = modelzoo.nine_state()
    search = RankSearch(desc.experiment_box)
    assert is_nonsingular(desc, [1.0], 0.1, 4, search).nonsingular
    ev = is_nonsingular(desc, [1.0], 0.0, 4, search)
    assert ev.nonsingular and ev.probes == []


def test_local_set_nine_state():
    desc = modelzoo.nine_state()
    res = local_distinguishing_set(desc, [1.0], RankSearch(desc.experiment_box), n_pairs=30)
    assert res.passed and res.experiments.q == res.rank == 1


def test_local_set_operon():
    desc = modelzoo.operon_input()
    res = local_distinguishing_set(desc, desc.nominal_x, RankSearch(desc.experiment_box, seed=2),
                                   n_pairs=100, n_probe=3)
    assert res.experiments.q <= 5 and res.passed and not res.counterexamples


def test_singular_parameter_raises():
    # zero response gradient everywhere: rank 0 has no achieving set
    desc = modelzoo.smooth_counterexample()
    search = RankSearch(desc.experiment_box, patience=5)
    with pytest.raises(SingularParameter):
        local_distinguishing_set(desc, [20.0], search, radius=0.5, n_probe=2, n_pairs=2)


def test_figure_eight_cross_branch_pairs():
    # illustrative: points on either branch through the crossing share the same f(x).u on a single input
    desc = modelzoo.figure_eight()
    resp = as_response(desc)
    u = np.array([1.0, 0.0])
    a, b = 0.05, math.pi - 0.05
    assert resp([a], u)[0] == pytest.approx(-resp([b], u)[0], abs=1e-12)
    assert resp([0.0], u)[0] == pytest.approx(resp([math.pi], u)[0], abs=1e-12)
