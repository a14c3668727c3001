import numpy as np
import pytest

from fnsda.dynamics import euler_step, rk4_step, solver_for
from fnsda.errors import IntegrationError


def test_rk4_matches_hand_evaluated_polynomial():
    # u' = u, one step of dt=0.1 from 1: 1 + h + h^2/2 + h^3/6 + h^4/24
    out = rk4_step(lambda u: u, np.array([1.0]), 0.1)
    assert out[0] == pytest.approx(1.1051708333333333, abs=1e-15)


def test_zero_rhs_fixed_point():
    state = np.array([2.0, -1.0])
    np.testing.assert_array_equal(rk4_step(lambda u: 0.0 * u, state, 0.3), state)
    np.testing.assert_array_equal(euler_step(lambda u: 0.0 * u, state, 0.3), state)


def test_euler_constant_rhs_exact():
    out = euler_step(lambda u: np.full_like(u, 2.0), np.array([1.0, 1.0]), 0.25)
    np.testing.assert_array_equal(out, [1.5, 1.5])


def _order(step, dts):
    errs = []
    for dt in dts:
        n = int(round(1.0 / dt))
        u = np.array([1.0])
        for _ in range(n):
            u = step(lambda v: v, u, dt)
        errs.append(abs(u[0] - np.e))
    errs = np.array(errs)
    return np.polyfit(np.log(dts), np.log(errs), 1)[0]


def test_rk4_empirical_order():
    assert _order(rk4_step, [0.2, 0.1, 0.05]) >= 3.8


def test_euler_empirical_order():
    assert _order(euler_step, [0.2, 0.1, 0.05]) >= 0.9


def test_non_finite_intermediate_raises_with_time():
    def blowup(u):
        return u * u * 1e300

    with pytest.raises(IntegrationError) as exc:
        rk4_step(blowup, np.array([1e200]), 0.5, t=3.0)
    assert "t=3.5" in str(exc.value)


def test_solver_assignment_per_family():
    assert solver_for("lv") is rk4_step
    assert solver_for("go") is rk4_step
    assert solver_for("gs") is rk4_step
    assert solver_for("ns") is euler_step
