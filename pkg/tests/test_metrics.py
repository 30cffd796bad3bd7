import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from topospec import metrics
from topospec.errors import DegenerateInputError, ValidationError
from topospec.metrics import TrialRecord

from oracles import oracle_trajectory


def rec(truth, est, D=None):
    return TrialRecord(truth, est, D if D is not None else [0.0] * (len(truth) - 1))


def test_cumulative_error_examples():
    assert metrics.cumulative_error(rec([0, 1, 2], [0, 1, 2])) == 0
    assert metrics.cumulative_error(rec([0, 1, 2], [0, 1.5, 1])) == 1.5
    assert metrics.cumulative_error(rec([3, 4], [3, 4.25])) == 0.25


def test_cumulative_error_ignores_step_zero():
    assert metrics.cumulative_error(rec([0, 1], [5, 1])) == 0


def test_record_validation():
    with pytest.raises(ValidationError):
        TrialRecord([0, 1], [0], [0])
    with pytest.raises(ValidationError):
        TrialRecord([0, 1, 2], [0, 1, 2], [0])


def test_pairwise_disagreement_examples():
    assert metrics.pairwise_disagreement([1, 3]) == 2
    assert metrics.pairwise_disagreement([5, 5, 5, 5]) == 0
    assert metrics.pairwise_disagreement([0, 1, 2]) == pytest.approx(4 / 3, abs=1e-15)
    with pytest.raises(DegenerateInputError):
        metrics.pairwise_disagreement([1])


def test_consensus_decay_examples():
    assert metrics.consensus_decay([4, 2, 1]) == pytest.approx(math.log(0.5), abs=1e-15)
    assert metrics.consensus_decay([3, 3, 3, 3]) == 0
    r = metrics.consensus_decay([1, 0])
    assert math.isfinite(r) and r == pytest.approx(math.log(1e-9))


def test_perturbation_sensitivity():
    assert metrics.perturbation_sensitivity(70.0, 70.0) == 0
    assert metrics.perturbation_sensitivity(70.0, 85.5) == 15.5


def test_deterministic_perturbation_sensitivity():
    base = oracle_trajectory((50.0, "A", 3), 12)[-1][0]
    moved = oracle_trajectory((65.0, "A", 3), 12)[-1][0]
    from topospec.task import TaskState, trajectory
    got = metrics.perturbation_sensitivity(
        trajectory(TaskState(50.0, "A", 3), 12)[-1].value,
        trajectory(TaskState(65.0, "A", 3), 12)[-1].value,
    )
    assert got == abs(moved - base)


values = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=8)


@settings(max_examples=200, deadline=None)
@given(values, st.randoms(), st.floats(0.01, 100))
def test_disagreement_symmetries(v, rnd, c):
    d = metrics.pairwise_disagreement(v)
    shuffled = list(v)
    rnd.shuffle(shuffled)
    assert metrics.pairwise_disagreement(shuffled) == pytest.approx(d, rel=1e-12, abs=1e-12)
    assert metrics.pairwise_disagreement([c * x for x in v]) == pytest.approx(c * d, rel=1e-9, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(values, values)
def test_cumulative_error_nonnegative(a, b):
    n = min(len(a), len(b))
    r = rec(a[:n], b[:n])
    e = metrics.cumulative_error(r)
    assert e >= 0
    assert (e == 0) == all(x == y for x, y in zip(a[1:n], b[1:n]))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.05, 3.0), st.integers(2, 12))
def test_geometric_decay(a, q, T):
    D = [a * q**t for t in range(T)]
    assume(min(D) > metrics.D_FLOOR)
    assert metrics.consensus_decay(D) == pytest.approx(math.log(q), abs=1e-12)
