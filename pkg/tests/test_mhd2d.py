import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpstab import mhd2d as M
from lpstab.closed_loop import dissipation_rate, g_c_eval, ida_field_z

CFG = M.ChannelConfig(Nx=8, Ny=8)
GRID = M.SpectralGrid(CFG)
seeds = st.integers(0, 2 ** 31)


def randc(rng, cfg=CFG, scale=1.0):
    return scale * rng.standard_normal(cfg.shape)


def test_config_validation():
    with pytest.raises(ValueError):
        M.ChannelConfig(gamma=1.0)
    with pytest.raises(ValueError):
        M.ChannelConfig(Nx=3)
    with pytest.raises(ValueError):
        M.ChannelConfig(e=0.0)
    assert np.isclose(M.ChannelConfig(L=2, W=2).c2, np.pi ** 2)


def test_spectral_field_validation():
    M.SpectralField(np.zeros(CFG.shape), CFG)
    with pytest.raises(ValueError):
        M.SpectralField(np.zeros((3, 3)), CFG)
    with pytest.raises(ValueError):
        M.SpectralField(np.full(CFG.shape, np.nan), CFG)
    d = M.ChannelConfig(Nx=8, Ny=8, dealias=True)
    with pytest.raises(ValueError):
        M.SpectralField(np.ones(d.shape), d)


def test_delta_gamma():
    cfg = M.ChannelConfig(gamma=0.0, Nx=4, Ny=4)
    f = np.zeros(cfg.shape)
    f[0, 0] = 1.0
    assert np.isclose(M.delta_gamma_apply(cfg, f)[0, 0], -0.5)
    g = np.random.default_rng(0).standard_normal(CFG.shape)
    assert np.allclose(M.delta_gamma_solve(CFG, M.delta_gamma_apply(CFG, g)), g, atol=1e-13)


def test_lambda1_and_margins():
    assert np.isclose(M.lambda1_gamma(M.ChannelConfig(gamma=0.0)), 0.5)
    assert np.isclose(M.lambda1_gamma(M.ChannelConfig(gamma=0.8)), 0.3)
    assert np.isclose(M.uncontrolled_margin(M.ChannelConfig()), -0.5)
    assert np.isclose(M.stability_margin(M.ChannelConfig(gamma=0.0)), -0.5)
    assert abs(M.stability_margin(M.ChannelConfig(gamma=2 / 3))) < 1e-14
    assert np.isclose(M.stability_margin(M.ChannelConfig(gamma=0.8)), 0.5)
    assert M.stability_margin(M.ChannelConfig(gamma=0.5)) < 0


def test_transform_round_trip(rng):
    a = randc(rng)
    assert np.allclose(GRID.project(GRID.values(a)), a, atol=1e-13)


def test_derivative_values():
    a = np.zeros(CFG.shape)
    a[1, 2] = 1.0  # sin(2x/L) sin(3y/W)
    x = np.arange(1, GRID.Mx) * np.pi * CFG.L / GRID.Mx
    y = np.arange(1, GRID.My) * np.pi * CFG.W / GRID.My
    X, Y = np.meshgrid(x, y, indexing="ij")
    assert np.allclose(GRID.values(a), np.sin(2 * X / CFG.L) * np.sin(3 * Y / CFG.W), atol=1e-13)
    ref = (2 / CFG.L) * np.cos(2 * X / CFG.L) * np.sin(3 * Y / CFG.W)
    assert np.allclose(GRID.values(a, dx=True), ref, atol=1e-13)


def test_two_mode_advect_matches_oracle(oracle8):
    psi = np.zeros(CFG.shape)
    om = np.zeros(CFG.shape)
    psi[0, 1] = 1.0
    om[2, 0] = 1.0
    fast = M.advect(CFG, psi, om).ravel()
    ref = oracle8.J(psi.ravel(), om.ravel())
    assert np.linalg.norm(fast - ref) / np.linalg.norm(ref) < 1e-10


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_advect_skew(seed):
    rng = np.random.default_rng(seed)
    psi, om = randc(rng), randc(rng)
    r = M.advect(CFG, psi, om)
    assert abs(np.sum(om * r)) < 1e-12 * np.sum(np.abs(om)) * np.abs(r).max() * 10
    assert np.allclose(M.advect(CFG, psi, psi), 0.0, atol=1e-12)


def test_background_operators_match_quadrature(oracle8, rng):
    bg = M.Background(CFG)
    f = randc(rng)
    assert np.allclose(bg.sin_y_dx(f).ravel(), oracle8.S @ f.ravel(), atol=1e-12)
    assert np.allclose(bg.cos_y.ravel(), oracle8.cos_y, atol=1e-13)


def test_x_independent_vorticity_not_advected_by_shear():
    # u_e . grad omega = sin(y) omega_x vanishes for omega = omega(y)
    x = np.arange(1, GRID.Mx) * np.pi * CFG.L / GRID.Mx
    y = np.arange(1, GRID.My) * np.pi * CFG.W / GRID.My
    X, Y = np.meshgrid(x, y, indexing="ij")
    u1, u2 = M.ShearEquilibrium(0.8).u_e(X, Y)
    omega_x = np.zeros_like(X)
    omega_y = 2 * np.cos(2 * Y / CFG.W)
    assert np.abs(GRID.project(u1 * omega_x + u2 * omega_y)).max() == 0.0


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_fluid_algebra_duality_and_enstrophy(seed):
    rng = np.random.default_rng(seed)
    alg = M.fluid_algebra(CFG)
    u, w, p = (rng.standard_normal(CFG.size) for _ in range(3))
    lhs = alg.coad(u, p) @ w
    rhs = p @ alg.ad(u, w)
    assert abs(lhs - rhs) < 1e-10 * (1 + abs(lhs))
    assert np.allclose(alg.ad(u, w), -alg.ad(w, u), atol=1e-12)
    ens = alg.casimirs["enstrophy"]
    assert abs(ens.grad(p) @ alg.coad(u, p)) < 1e-10 * np.abs(p).sum()
    assert np.allclose(alg.coad_matrix(p) @ u, alg.coad(u, p), atol=1e-12)


def test_coordinates_and_pairing(rng):
    om, psi = randc(rng), randc(rng)
    p, q = M.vorticity_to_dual(CFG, om), M.stream_to_element(CFG, psi)
    assert np.isclose(p @ q, M.l2_pairing(CFG, om, psi))
    assert np.allclose(M.dual_to_vorticity(CFG, p), om)
    assert np.allclose(M.element_to_stream(CFG, q), psi)
    # mu0 is the flat map: omega = Laplacian psi
    sys = M.build_mhd_system(CFG)
    assert np.allclose(M.dual_to_vorticity(CFG, sys.kk.mu0 @ q), -M.k2(CFG) * psi)
    assert np.allclose(np.diag(sys.muC.matrix), M.k2_gamma(CFG).ravel())


def test_mean_vorticity_weights():
    om = np.zeros(CFG.shape)
    om[0, 0] = 1.0
    p = M.vorticity_to_dual(CFG, om)
    w = M.mean_vorticity_weights(CFG)
    assert np.isclose(w @ p, 4 * CFG.L * CFG.W)


def test_gamma_zero_is_free():
    cfg = M.ChannelConfig(Nx=6, Ny=6, gamma=0.0)
    assert not np.any(M.gain_C(cfg))


def test_projected_equilibrium_residual():
    cfg = M.ChannelConfig(Nx=8, Ny=8, gamma=0.0)
    bg = M.Background(cfg)
    w = -bg.cos_y
    psi = -w / M.k2(cfg)
    residual = np.sqrt(cfg.c2 * np.sum(M.advect(cfg, psi, w) ** 2))
    projection_error = np.sqrt(cfg.c2 * np.sum((psi - bg.cos_y) ** 2))
    assert residual < projection_error
    # the exact relation omega_e = -(1 - gamma) psi_e survives projection
    assert np.allclose(M.advect(cfg, bg.cos_y, (1 - 0.8) * -bg.cos_y), 0.0, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_fast_field_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    sys = M.build_mhd_system(CFG)
    orc = ORACLE
    om, b = randc(rng), randc(rng)
    dn, db = ida_field_z(sys, M.vorticity_to_dual(CFG, om), M.vorticity_to_dual(CFG, b))
    ro, rb = orc.field_z(om.ravel(), b.ravel())
    assert np.linalg.norm(M.dual_to_vorticity(CFG, dn).ravel() - ro) < 1e-9 * np.linalg.norm(ro)
    assert np.linalg.norm(M.dual_to_vorticity(CFG, db).ravel() - rb) < 1e-9 * np.linalg.norm(rb)


ORACLE = M.DenseOracle(CFG)


@pytest.mark.parametrize("controlled", [True, False])
def test_shear_model_matches_oracle(rng, controlled):
    cfg = CFG if controlled else M.ChannelConfig(Nx=8, Ny=8, gamma=0.0)
    model = M.ShearModel(cfg, controlled=controlled)
    orc = M.DenseOracle(cfg)
    dw, b = randc(rng, scale=0.1), randc(rng, scale=0.1)
    z = np.concatenate([dw.ravel(), b.ravel()])
    ref = np.concatenate(orc.shear_field(dw.ravel(), b.ravel(), controlled))
    assert np.linalg.norm(model.field(0, z) - ref) < 1e-10 * np.linalg.norm(ref)


def test_shear_model_without_background_is_generic(rng):
    model = M.ShearModel(CFG, background=0.0)
    sys = M.build_mhd_system(CFG)
    om, b = randc(rng), randc(rng)
    dn, db = ida_field_z(sys, M.vorticity_to_dual(CFG, om), M.vorticity_to_dual(CFG, b))
    f = model.field(0, np.concatenate([om.ravel(), b.ravel()]))
    ref = np.concatenate([M.dual_to_vorticity(CFG, dn).ravel(), M.dual_to_vorticity(CFG, db).ravel()])
    assert np.allclose(f, ref, atol=1e-12 * np.abs(ref).max())


def test_rate_sign_for_energy_maximum(rng):
    sys = M.build_mhd_system(CFG)
    nu, beta = rng.standard_normal(CFG.size), rng.standard_normal(CFG.size)
    assert dissipation_rate(sys, nu, beta) >= 0


def test_l_c(rng):
    model = M.ShearModel(CFG)
    zero = np.zeros(2 * CFG.size)
    assert M.l_c_eval(model, zero) == 0.0
    assert not np.any(model.field(0, zero))
    z = np.concatenate([M.single_mode(CFG, 1, 1, 1e-2).ravel(), np.zeros(CFG.size)])
    assert M.l_c_eval(model, z) >= M.l_c_lower_bound(CFG, model, z) * (1 - 1e-12) > 0
    for _ in range(10):
        z = np.concatenate([randc(rng, scale=1e-2).ravel(), randc(rng, scale=1e-2).ravel()])
        assert M.l_c_eval(model, z) >= M.l_c_lower_bound(CFG, model, z) - 1e-15
    # background cross terms cancel
    flat = M.ShearModel(CFG, background=0.0)
    assert np.isclose(M.l_c_eval(model, z), M.l_c_eval(flat, z), rtol=1e-12)


def test_l_c_decreases_along_short_run():
    cfg = M.ChannelConfig(Nx=8, Ny=8)
    rep = M.scenario_shear(cfg, horizon=1.0, step=1e-2, monitor_stride=1, run_uncontrolled=False)
    assert rep.verdicts["L_C_monotone"] and rep.verdicts["controlled_bounded"]
    assert rep.notes["certificate"].startswith("L_C")


def test_zero_perturbation_stays_at_equilibrium():
    rep = M.scenario_shear(CFG, amplitude=0.0, horizon=0.5, step=1e-2, run_uncontrolled=False)
    assert np.abs(rep.trajectories["controlled"].states).max() == 0.0


def test_negative_margin_withholds_certificate():
    rep = M.scenario_shear(M.ChannelConfig(Nx=6, Ny=6, gamma=0.5), horizon=0.1, step=1e-2,
                           run_uncontrolled=False)
    assert rep.notes["certificate"] == "no Lyapunov certificate"


def test_dealias_zeroes_high_modes(rng):
    cfg = M.ChannelConfig(Nx=9, Ny=9, dealias=True)
    out = M.advect(cfg, randc(rng, cfg), randc(rng, cfg))
    assert not np.any(out[~M.dealias_mask(cfg)])


def test_snapshot_round_trip(tmp_path, rng):
    a = randc(rng)
    path = tmp_path / "snap.txt"
    M.export_snapshot(path, CFG, a, 1.25)
    assert path.read_text().splitlines()[0] == "8 8 2.0 2.0 0.8 1.25"
    meta, vals = M.read_snapshot(path)
    assert meta["t"] == 1.25 and vals.shape == (8, 8)
    assert np.allclose(vals, M.grid_values(CFG, a))
    x = np.arange(1, 9) * np.pi * CFG.L / 9
    y = np.arange(1, 9) * np.pi * CFG.W / 9
    X, Y = np.meshgrid(x, y, indexing="ij")
    ref = sum(a[m, n] * np.sin((m + 1) * X / CFG.L) * np.sin((n + 1) * Y / CFG.W)
              for m in range(8) for n in range(8))
    assert np.allclose(vals, ref)
