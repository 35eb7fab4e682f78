import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from identikit.errors import ValidationError
from identikit.rng import ordered_map, stream, threads
from identikit.spaces import Box, ExperimentSet


def test_streams_are_reproducible_and_independent():
    a = stream(5, "pair", 3).random(4)
    assert np.array_equal(a, stream(5, "pair", 3).random(4))
    assert not np.array_equal(a, stream(5, "pair", 4).random(4))
    assert not np.array_equal(a, stream(6, "pair", 3).random(4))


def test_ordered_map_threads(monkeypatch):
    monkeypatch.setenv("IDENTIKIT_THREADS", "4")
    assert threads() == 4
    assert ordered_map(lambda i: i * i, range(20)) == [i * i for i in range(20)]
    monkeypatch.setenv("IDENTIKIT_THREADS", "junk")
    assert threads() == 1


def test_box_basics():
    b = Box.of((0.0, 1.0), (1.0, 3.0), open_lower=(True, False))
    assert b.contains([0.5, 1.0]) and not b.contains([0.0, 2.0])
    with pytest.raises(ValidationError):
        b.check([2.0, 2.0])
    assert Box.from_dict(b.to_dict()) == b
    u = Box.unbounded(2)
    assert Box.from_dict(u.to_dict()) == u


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_samples_inside(seed):
    b = Box.of((0.5, 0.1), (2.0, 5.0))
    rng = stream(seed)
    pts = b.sample(rng, 20)
    assert all(b.contains(p) for p in pts)
    assert all(b.contains(p) for p in b.sample_log(rng, 20))


def test_experiment_set_round_trip():
    s = ExperimentSet([[0.1, 1.0], [0.2, 1.0]], min_separation=0.05)
    assert ExperimentSet.from_dict(s.to_dict()) == s
    with pytest.raises(ValidationError):
        ExperimentSet([[0.1, 1.0], [0.12, 1.0]], min_separation=0.05)
    with pytest.raises(ValidationError):
        ExperimentSet([[np.nan]])
