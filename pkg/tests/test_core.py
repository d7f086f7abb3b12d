import numpy as np
import pytest

from proxgen.core import (
    BatchSampler,
    ConfigurationError,
    LambdaSchedule,
    MomentumSchedule,
    RngStream,
    StepSchedule,
    as_param_vector,
    one_two_five_grid,
    schedule_lambda,
    schedule_momentum,
    schedule_stepsize,
)


def test_param_vector_validation():
    v = as_param_vector([1, 2, 3])
    assert v.dtype == np.float64
    for bad in ([], [[1.0, 2.0]], [1.0, np.nan], [np.inf]):
        with pytest.raises(ConfigurationError):
            as_param_vector(bad)


def test_step_decay_schedule():
    s = StepSchedule("step-decay", 0.1, 0.5, (10, 20))
    assert [schedule_stepsize(s, t) for t in (1, 9, 10, 19, 20, 100)] == [0.1, 0.1, 0.05, 0.05, 0.025, 0.025]
    assert StepSchedule()(12345) == 1e-3


@pytest.mark.parametrize("kwargs", [dict(alpha0=0.0), dict(decay_factor=1.5), dict(milestones=(5, 2)), dict(kind="cosine")])
def test_step_schedule_rejects(kwargs):
    with pytest.raises(ConfigurationError):
        StepSchedule(**kwargs)


def test_momentum_schedules():
    assert schedule_momentum(MomentumSchedule(), 7) == 0.9
    s = MomentumSchedule("exponential", 0.9, 0.5)
    assert [s(t) for t in (1, 2, 3)] == [0.9, 0.45, 0.225]
    with pytest.raises(ConfigurationError):
        MomentumSchedule("constant", 1.0)
    with pytest.raises(ConfigurationError):
        MomentumSchedule("exponential", 0.9, 1.0)


def test_homotopy_lambda():
    s = LambdaSchedule("homotopy", 0.01, 5)
    assert [s.epoch(t) for t in (1, 5, 6, 10, 11)] == [1, 1, 2, 2, 3]
    assert schedule_lambda(s, 11) == pytest.approx(0.03)
    assert LambdaSchedule("constant", 0.2)(99) == 0.2
    with pytest.raises(ConfigurationError):
        LambdaSchedule("constant", -1.0)
    with pytest.raises(ConfigurationError):
        LambdaSchedule("homotopy", 1.0, 0)


def test_rng_streams_replay_and_separate():
    a = RngStream(42, 1).generator().standard_normal(5)
    b = RngStream(42, 1).generator().standard_normal(5)
    c = RngStream(42, 2).generator().standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(42).child(2) == RngStream(42, 2)


def test_rng_accepts_64bit_seed():
    RngStream(2**64 - 1).generator().random()


def test_batch_sampler_covers_each_epoch_once():
    s = BatchSampler(10, 3, RngStream(0))
    assert s.batches_per_epoch == 3
    epoch = np.concatenate([s.next() for _ in range(3)])
    assert len(set(epoch.tolist())) == 9  # remainder of one dropped
    again = BatchSampler(10, 3, RngStream(0))
    np.testing.assert_array_equal(np.concatenate([again.next() for _ in range(3)]), epoch)


def test_batch_sampler_full_batch_is_ordered():
    s = BatchSampler(5, 10, RngStream(0))
    assert s.full_batch
    np.testing.assert_array_equal(s.next(), np.arange(5))


def test_one_two_five_grid():
    grid = one_two_five_grid(1e-3, 5.0)
    assert grid[:4] == [0.001, 0.002, 0.005, 0.01]
    assert grid[-3:] == [1.0, 2.0, 5.0]
    assert len(grid) == 12
