import numpy as np
import pytest

from lpstab.dynamics import (MIDPOINT, RK4, IntegratorConfig, ScenarioReport, SolverError, convergence_order,
                             final_state, integrate, midpoint_step)


def rotation(t, z):
    return np.array([-z[1], z[0]])


def test_rk4_order():
    assert abs(convergence_order(rotation, np.array([1.0, 0.0]), [0.1, 0.05, 0.025], 2.0) - 4) < 0.1


def test_midpoint_order_and_invariant():
    z0 = np.array([1.0, 0.0])
    assert abs(convergence_order(rotation, z0, [0.1, 0.05, 0.025], 2.0, MIDPOINT) - 2) < 0.1
    z = final_state(rotation, z0, 0.1, 10.0, MIDPOINT)
    assert abs(z @ z - 1.0) < 1e-10


def test_accuracy():
    z = final_state(rotation, np.array([1.0, 0.0]), 1e-3, 1.0)
    assert np.allclose(z, [np.cos(1.0), np.sin(1.0)], atol=1e-12)


def test_monitors_and_stride():
    cfg = IntegratorConfig(RK4, 0.1, 1.0, monitor_stride=3)
    tr = integrate(rotation, [1.0, 0.0], cfg, {"r": lambda z: float(z @ z)})
    assert np.allclose(tr.times, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert tr.monitors["r"].shape == (5,)
    assert np.allclose(tr.final, final_state(rotation, np.array([1.0, 0.0]), 0.1, 1.0))


def test_blowup_stops_early():
    tr = integrate(lambda t, z: z ** 2, [1.0], IntegratorConfig(RK4, 0.01, 5.0))
    assert tr.blew_up and tr.times[-1] < 1.1


def test_midpoint_failure():
    with pytest.raises(SolverError), np.errstate(over="ignore", invalid="ignore"):
        midpoint_step(lambda t, z: 1e3 * z ** 3, 0.0, np.array([10.0]), 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig("euler")
    with pytest.raises(ValueError):
        IntegratorConfig(RK4, 2.0, 1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(RK4, 0.1, 1.0, 0)
    with pytest.raises(ValueError):
        convergence_order(rotation, np.ones(2), [0.1, 0.05], 1.0)


def test_report():
    r = ScenarioReport("x", verdicts={"a": True, "b": False})
    assert not r.passed and r.first_failure() == "b"
    assert r.to_dict()["passed"] is False
