import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpstab.gains import (EPData, GainSet, MatchFailure, NotInvertible, check_lp_conditions, ep_from_lp,
                          ep_residuals, gain_from_structure, identity_gains, lp_from_ep, lp_local_residuals,
                          match_structure, mu_c_from_gain, random_ep_instance, random_kaluza_klein)
from lpstab.satellite import SatelliteParams, kaluza_klein


def sat_gains(p, G=None):
    G = p.matched_gains()[0] if G is None else G
    return GainSet([[0.0, 0.0, p.k * p.i3 / p.I3]], [[G]])


def test_satellite_matched_values():
    p = SatelliteParams()
    kk = kaluza_klein(p)
    ms = match_structure(kk, sat_gains(p))
    assert np.allclose(ms.muC.matrix, np.diag([1.0, 2.0, 1.8]))
    assert np.isclose(p.matched_gains()[0], 11 / 3)
    assert np.allclose(ms.AC.matrix, [[0, 0, 11 / 5]])
    assert np.isclose(p.matched_gains()[1], 11 / 5) and np.isclose(p.matched_gains()[2], 5 / 11)
    assert np.allclose(ms.IC.matrix, [[5 / 11]])
    assert max(check_lp_conditions(kk, ms)) < 1e-10


def test_wrong_G_fails_matching():
    p = SatelliteParams()
    with pytest.raises(MatchFailure) as exc:
        match_structure(kaluza_klein(p), sat_gains(p, G=1.0))
    assert "A0^T G" in exc.value.condition


def test_non_spd_mu_c_rejected():
    kk = kaluza_klein(SatelliteParams())
    muC, ok = mu_c_from_gain(kk, [[0.0, 0.0, -2.0]])
    assert not ok
    with pytest.raises(NotInvertible):
        mu_c_from_gain(kk, [[0.0, 0.0, -1.0]])


def test_singular_G_rejected():
    with pytest.raises(NotInvertible):
        GainSet(np.zeros((1, 3)), [[0.0]])
    with pytest.raises(ValueError):
        GainSet(np.zeros((1, 3)), [[1.0]], s=2)


def test_identity_gains_match_trivially():
    kk = kaluza_klein(SatelliteParams())
    ms = match_structure(kk, identity_gains(kk))
    assert np.allclose(ms.muC.matrix, kk.mu0.matrix)
    ep = ep_from_lp(kk, ms)
    assert not np.any(ep.tau)
    back = lp_from_ep(kk, ep)
    assert np.allclose(back.muC.matrix, kk.mu0.matrix)
    with pytest.raises(NotInvertible):
        ep.sigma


def test_gain_round_trip():
    p = SatelliteParams(k=0.7)
    kk = kaluza_klein(p)
    g = sat_gains(p)
    g2 = gain_from_structure(kk, match_structure(kk, g))
    assert np.allclose(g2.C.matrix, g.C.matrix) and np.allclose(g2.G.matrix, g.G.matrix)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 4), st.integers(1, 3))
def test_ep_lp_equivalence(seed, nd, ng):
    rng = np.random.default_rng(seed)
    kk = random_kaluza_klein(rng, nd, ng)
    ep = random_ep_instance(rng, kk)
    assert max(ep_residuals(kk, ep)) < 1e-10
    ms = lp_from_ep(kk, ep)
    assert max(check_lp_conditions(kk, ms)) < 1e-9
    ep2 = ep_from_lp(kk, ms)
    assert np.allclose(ep2.tau, ep.tau) and np.allclose(ep2.rho, ep.rho)
    assert max(lp_local_residuals(kk, ep2)) < 1e-9


def test_perturbed_structure_fails_both(rng):
    kk = random_kaluza_klein(rng, 3, 2)
    ms = lp_from_ep(kk, random_ep_instance(rng, kk))
    bad = type(ms)(ms.muC, ms.IC, type(ms.AC)(ms.AC.matrix + 1e-3))
    assert max(check_lp_conditions(kk, bad)) > 1e-6
    assert max(ep_residuals(kk, ep_from_lp(kk, bad))) > 1e-6
