import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from lpstab import mhd2d
from lpstab.closed_loop import g_c_eval, ida_field_z
from lpstab.estimators import ChannelClosedLoop, SatelliteClosedLoop


def test_satellite_round_trip_and_predict(rng):
    est = SatelliteClosedLoop(k=2.0).fit()
    X = rng.standard_normal((6, 4))
    Z = est.transform(X)
    assert np.allclose(est.inverse_transform(Z), X, atol=1e-13)
    F = est.predict(Z)
    sys = est.system_
    for z, f in zip(Z, F):
        assert np.allclose(f, np.concatenate(ida_field_z(sys, z[:3], z[3:])))
    assert np.allclose(est.energy(Z), [g_c_eval(sys, z[:3], z[3:]) for z in Z])


def test_params_and_clone():
    est = SatelliteClosedLoop(k=0.5, s=-1)
    c = clone(est)
    assert c.get_params() == est.get_params()
    assert c.set_params(k=3.0).k == 3.0


def test_not_fitted_and_width(rng):
    with pytest.raises(NotFittedError):
        SatelliteClosedLoop().transform(np.zeros((1, 4)))
    est = SatelliteClosedLoop().fit(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        est.transform(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        SatelliteClosedLoop().fit(np.zeros((2, 5)))


def test_channel_estimator(rng):
    est = ChannelClosedLoop(Nx=4, Ny=4)
    X = rng.standard_normal((3, 32))
    Z = est.fit_transform(X)
    assert np.allclose(est.inverse_transform(Z), X, atol=1e-12)
    assert est.predict(Z).shape == (3, 32)
    assert est.system_.s == -1 and est.system_.sign == -1


def test_in_pipeline(rng):
    pipe = make_pipeline(SatelliteClosedLoop())
    X = rng.standard_normal((2, 4))
    assert np.allclose(pipe.fit(X).transform(X), SatelliteClosedLoop().fit().transform(X))
