import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from identikit import modelzoo
from identikit.distinguish import (GridSpec, SearchConfig, ToleranceSpec, compare_values,
                                   distinguish_from_reference, distinguishable_on_set, equal_response,
                                   find_violating_pair, monte_carlo_theorem, sample_experiment_set,
                                   scan_distinguishable, scan_witness, set_residual)
from identikit.errors import SamplingExhausted, ValidationError
from identikit.response import as_response
from identikit.secant import lower_bound_pair
from identikit.spaces import Box, ExperimentSet

NINE = as_response(modelzoo.nine_state())


def test_equal_response_examples():
    assert equal_response([1.0], [1.0])
    assert not equal_response([0.0, 0.0], [0.0, 1e-3])
    assert equal_response(NINE([1.0], [2.0]), NINE([1.0 + 1e-12], [2.0]))


def test_family_not_distinguished():
    free = as_response(modelzoo.operon_free())
    x1 = modelzoo.operon_indistinguishable_family(1.0, 1.0)
    x2 = modelzoo.operon_indistinguishable_family(2.0, 3.0)
    exps = ExperimentSet([[0.5], [1.0], [2.5], [4.0]])
    assert not distinguishable_on_set(free, x1, x2, exps).distinguished
    assert not scan_distinguishable(free, x1, x2, GridSpec(modelzoo.operon_free().experiment_box, 12))


def test_reflexive_and_closed_form_gap():
    exps = ExperimentSet([[0.0]])
    assert not distinguishable_on_set(NINE, [1.3], [1.3], exps).distinguished
    v = distinguishable_on_set(NINE, [1.0], [2.0], exps)
    assert v.distinguished and v.witness == 0
    assert v.max_gap == pytest.approx(abs(math.cos(1) - math.cos(2)), abs=1e-6)


def test_vector_output_reduction():
    V1 = np.array([[1.0, 2.0], [3.0, 4.0]])
    V2 = V1.copy()
    assert not compare_values(V1, V2).distinguished
    V2[1, 1] += 1e-2
    v = compare_values(V1, V2)
    assert v.distinguished and v.witness == 1


def test_sampling():
    box = modelzoo.operon_input().experiment_box
    s = sample_experiment_set(box, 11, seed=3, min_separation=1e-3)
    assert s.q == 11 and all(box.contains(p) for p in s)
    assert np.array_equal(s.points, sample_experiment_set(box, 11, seed=3, min_separation=1e-3).points)
    one = sample_experiment_set(box, 1, seed=9)
    assert np.array_equal(one.points, sample_experiment_set(box, 1, seed=9).points)
    with pytest.raises(SamplingExhausted):
        sample_experiment_set(box, 3, seed=0, min_separation=100.0)
    with pytest.raises(ValidationError):
        sample_experiment_set(box, 0, seed=0)


def test_scan_on_generic_operon_pair():
    desc = modelzoo.operon_input()
    rng = np.random.default_rng(1)
    x1, x2 = desc.param_box.sample(rng), desc.param_box.sample(rng)
    assert scan_distinguishable(as_response(desc), x1, x2, GridSpec(desc.experiment_box, 20))


def test_scan_smooth_counterexample_midpoint():
    resp = as_response(modelzoo.smooth_counterexample())
    w = scan_witness(resp, [1.0], [2.0], GridSpec(Box.of((0.5,), (2.5,)), 5, refine=False))
    assert w is not None and 1.0 < w[0] < 2.0


def test_mc_rejects_q_zero():
    desc = modelzoo.nine_state()
    with pytest.raises(ValidationError):
        monte_carlo_theorem(desc, 0, 5, 0, GridSpec(desc.experiment_box), desc.param_box)


def test_mc_reports_smooth_failures():
    desc = modelzoo.smooth_counterexample()
    exps = ExperimentSet([[1.0], [2.5], [4.0]])
    grid = GridSpec(desc.experiment_box, 40)
    rep = monte_carlo_theorem(desc, 3, 5, 1, grid, desc.param_box, experiments=exps,
                              extra_pairs=[([5.0], [6.0])])
    assert rep.n_requested == 6
    assert any(f["x1"] == [5.0] for f in rep.failures)


def test_mc_is_deterministic():
    desc = modelzoo.operon_input()
    grid = GridSpec(desc.experiment_box, 6)
    a = monte_carlo_theorem(desc, 11, 10, 7, grid, desc.param_box).to_json()
    b = monte_carlo_theorem(desc, 11, 10, 7, grid, desc.param_box).to_json()
    assert a == b and '"separation_fraction"' in a


def test_reference_nine_state():
    desc = modelzoo.nine_state()
    rep = distinguish_from_reference(desc, [1.0], 200, 3, GridSpec(desc.experiment_box, 12), desc.param_box, q=2)
    assert rep.q == 2 and rep.fraction == 1.0
    assert all(p["x1"] != [1.0] for p in rep.failures)


def test_violation_search_nine_state_none():
    desc = modelzoo.nine_state()
    exps = ExperimentSet([[0.0], [1.0], [2.0]])
    cfg = SearchConfig(desc.param_box, GridSpec(desc.experiment_box, 12), n_starts=6, seed=1)
    assert not find_violating_pair(desc, exps, cfg).found


def test_violation_search_confirms_constructed_pair():
    desc = modelzoo.scalar_linear_response(1)
    u = [0.3, 1.7]
    pair = lower_bound_pair(u, 1)
    exps = ExperimentSet([[ui] for ui in u])
    cfg = SearchConfig(Box.of((0.0,), (30.0,)), GridSpec(desc.experiment_box, 21), n_starts=2, seed=0)
    res = find_violating_pair(desc, exps, cfg, initial_pairs=[(pair.x1, pair.x2)])
    assert res.found and res.residual < 1e-8
    assert set_residual(as_response(desc), pair.x1, pair.x2, exps) < 1e-8


@settings(max_examples=40)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0),
       st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=4, unique=True))
def test_symmetry_and_monotonicity(a, b, lams):
    exps = ExperimentSet([[l] for l in lams])
    v12 = distinguishable_on_set(NINE, [a], [b], exps)
    v21 = distinguishable_on_set(NINE, [b], [a], exps)
    assert v12.distinguished == v21.distinguished
    if v12.distinguished:
        # witness re-checks in isolation and survives a superset
        lam = exps[v12.witness]
        assert distinguishable_on_set(NINE, [a], [b], ExperimentSet([lam])).distinguished
        extra = [l for l in (-1.95, 1.95) if all(abs(l - x) > 0 for x in lams)]
        bigger = ExperimentSet([[l] for l in lams + extra])
        assert distinguishable_on_set(NINE, [a], [b], bigger).distinguished


def test_tolerance_spec_validation():
    with pytest.raises(ValidationError):
        ToleranceSpec(-1.0, 1e-6)
