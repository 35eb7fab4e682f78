import numpy as np
import pytest

from identikit import modelzoo
from identikit.distinguish import sample_experiment_set
from identikit.errors import ValidationError
from identikit.recover import MultistartConfig, fit, sum_squares
from identikit.response import as_response
from identikit.spaces import ExperimentSet


def test_residual_floor_at_truth():
    desc = modelzoo.operon_input()
    exps = sample_experiment_set(desc.experiment_box, 6, seed=1)
    Y = as_response(desc).evaluate_set(desc.nominal_x, exps)
    assert sum_squares(desc, desc.nominal_x, exps, Y) == 0.0


def test_nine_state_recovery_and_determinism():
    desc = modelzoo.nine_state()
    exps = ExperimentSet([[-1.0], [0.5], [1.5]])
    Y = as_response(desc).evaluate_set([1.7], exps)
    cfg = MultistartConfig(desc.param_box, n_starts=4)
    a = fit(desc, exps, Y, cfg, seed=3)
    b = fit(desc, exps, Y, cfg, seed=3)
    assert a.residual < 1e-12 and abs(a.x_hat[0] - 1.7) < 1e-6
    assert a.to_dict() == b.to_dict()


def test_history_non_increasing():
    desc = modelzoo.nine_state()
    exps = ExperimentSet([[-1.0], [1.5]])
    Y = as_response(desc).evaluate_set([0.8], exps)
    res = fit(desc, exps, Y, MultistartConfig(desc.param_box, n_starts=3), seed=0)
    for run in res.per_start:
        h = run["history"]
        assert all(h[i + 1] <= h[i] for i in range(len(h) - 1))


def test_underdetermined_fit():
    desc = modelzoo.operon_input()
    exps = ExperimentSet([[1.0, 1.0]])
    Y = as_response(desc).evaluate_set(desc.nominal_x, exps)
    cfg = MultistartConfig(desc.param_box, n_starts=2, max_evals=3000)
    a = fit(desc, exps, Y, cfg, seed=1)
    b = fit(desc, exps, Y, cfg, seed=2)
    assert a.residual < 1e-10 and b.residual < 1e-10
    assert np.max(np.abs(a.x_hat - b.x_hat)) > 1e-6


def test_shape_checks():
    desc = modelzoo.nine_state()
    exps = ExperimentSet([[0.0], [1.0]])
    with pytest.raises(ValidationError):
        fit(desc, exps, np.zeros(3), MultistartConfig(desc.param_box), seed=0)
    with pytest.raises(ValidationError):
        fit(desc, exps, np.zeros(2), MultistartConfig(desc.param_box, n_starts=0), seed=0)
