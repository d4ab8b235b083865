import math

import numpy as np
import pytest

from annihilation.integrate import dopri45


def test_exponential_decay_hits_requested_times():
    times = [0.0, 0.3, 1.0, 2.5]
    states, stats = dopri45(lambda y: -y, [1.0], times, atol=1e-12)
    np.testing.assert_allclose(states[:, 0], np.exp(-np.array(times)), atol=1e-11)
    assert stats.accepted > 0


def test_rotation_conserves_norm():
    rhs = lambda y: np.array([-y[1], y[0]])
    states, _ = dopri45(rhs, [1.0, 0.0], [2 * math.pi], atol=1e-11)
    np.testing.assert_allclose(states[-1], [1.0, 0.0], atol=1e-9)


def test_relative_tolerance_only():
    states, _ = dopri45(lambda y: -3.0 * y, [1e-20], [1.0], atol=0.0, rtol=1e-10)
    assert abs(states[-1, 0] / (1e-20 * math.exp(-3.0)) - 1.0) < 1e-8


def test_zero_time_returns_initial_state():
    states, stats = dopri45(lambda y: -y, [2.0], [0.0], atol=1e-8)
    assert states[0, 0] == 2.0
    assert stats.accepted == 0


@pytest.mark.parametrize("times", [[1.0, 0.5], [-1.0]])
def test_bad_time_grids(times):
    with pytest.raises(ValueError):
        dopri45(lambda y: y, [1.0], times, atol=1e-8)


def test_needs_some_tolerance():
    with pytest.raises(ValueError):
        dopri45(lambda y: y, [1.0], [1.0], atol=0.0, rtol=0.0)


def test_undefined_continuation_raises():
    # the right-hand side stops being defined at y = 2, reached at t = 1
    with pytest.raises(RuntimeError, match="underflow"):
        dopri45(lambda y: np.where(y < 2.0, 1.0, np.nan), [1.0], [2.0], atol=1e-8)


def test_components_born_at_zero_accept_relative_control():
    # y2 grows like t^7 from exactly zero, below what a fifth-order step resolves relatively
    def rhs(y):
        return np.array([0.0, 7.0 * y[2], 6.0 * y[3], 5.0 * y[4], 4.0 * y[5], 3.0 * y[6], 2.0 * y[7], y[0]])

    y0 = np.zeros(8)
    y0[0] = 1.0
    out, _ = dopri45(rhs, y0, [0.5], atol=1e-30, rtol=1e-12)
    assert out[0, 1] == pytest.approx(0.5**7, rel=1e-10)
