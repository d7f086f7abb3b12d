import numpy as np
import pytest

from proxgen.core import ConfigurationError
from proxgen.precond import (
    MomentumState,
    PrecondState,
    check_c4,
    effective_diag,
    update_momentum,
    update_preconditioner,
)


def test_momentum_update():
    s = update_momentum(MomentumState.zeros(2), np.array([1.0, -2.0]), 0.9)
    np.testing.assert_allclose(s.m, [0.1, -0.2])
    s = update_momentum(s, np.array([1.0, -2.0]), 0.9)
    np.testing.assert_allclose(s.m, [0.19, -0.38])
    assert s.t == 2


def test_momentum_rejects():
    with pytest.raises(ConfigurationError):
        update_momentum(MomentumState.zeros(2), np.ones(3), 0.5)
    with pytest.raises(ConfigurationError):
        update_momentum(MomentumState.zeros(2), np.ones(2), 1.0)


def test_zero_momentum_parameter_copies_gradient():
    g = np.array([0.3, -4.0])
    np.testing.assert_array_equal(update_momentum(MomentumState(np.ones(2)), g, 0.0).m, g)


def test_identity_preconditioner():
    s = PrecondState.fresh("identity", 3)
    s = update_preconditioner(s, np.array([5.0, 0.0, -1.0]))
    np.testing.assert_array_equal(s.C, np.ones(3))
    ok, eig = check_c4(s, 0.1, 0.05)
    assert ok and eig == 0.1 / (1.0 + 1e-8)


def test_adagrad_is_time_normalized():
    s = PrecondState.fresh("adagrad", 2)
    s = update_preconditioner(s, np.array([3.0, 0.0]))
    s = update_preconditioner(s, np.array([1.0, 2.0]))
    np.testing.assert_allclose(s.C, np.sqrt([5.0, 2.0]))


def test_adam_ema_without_bias_correction():
    s = PrecondState.fresh("adam-ema", 1, beta=0.9)
    s = update_preconditioner(s, np.array([2.0]))
    np.testing.assert_allclose(s.C, [np.sqrt(0.1 * 4.0)])
    np.testing.assert_allclose(effective_diag(s), s.C + 1e-8)


def test_c4_is_smallest_eigenvalue():
    s = PrecondState("adam-ema", np.array([0.5, 2.0, 1.0]), np.zeros(3))
    ok, eig = check_c4(s, 0.1, 0.1 / 2.0)
    assert eig == 0.1 / (2.0 + 1e-8)
    assert not ok


def test_precond_state_rejects():
    with pytest.raises(ConfigurationError):
        PrecondState.fresh("rmsprop", 2)
    with pytest.raises(ConfigurationError):
        PrecondState.fresh("adam-ema", 2, beta=1.0)
    with pytest.raises(ConfigurationError):
        PrecondState.fresh("adam-ema", 2, delta=0.0)
