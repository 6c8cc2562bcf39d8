"""
Structural residual checks shared by the command line and the test suite.

Each check returns a ``Check`` with the worst residual found and the
tolerance it is held to.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List

import numpy as np

from . import mhd2d, satellite
from .closed_loop import MATCHED, dn_apply, g_c_eval, g_c_grad, ida_field_z, n_map, structure_matrices
from .gains import (check_lp_conditions, ep_from_lp, ep_residuals, lp_from_ep, random_ep_instance,
                    random_kaluza_klein)

Array = np.ndarray


@dataclass
class Check:
    name: str
    residual: float
    tol: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual < self.tol)

    def to_dict(self):
        return {**asdict(self), "passed": self.passed}


def mhd_test_config(n: int = 8) -> mhd2d.ChannelConfig:
    return mhd2d.ChannelConfig(Nx=n, Ny=n)


def structure_check(sys, states: Array, label: str) -> List[Check]:
    """Skewness of Pi_C, symmetry of R_C and semidefiniteness of s R_C."""
    skew = sym = neg = 0.0
    for nu in states:
        P, R = structure_matrices(sys, nu)
        scale = max(1.0, float(np.abs(P).max()), float(np.abs(R).max()))
        skew = max(skew, float(np.abs(P + P.T).max()) / scale)
        sym = max(sym, float(np.abs(R - R.T).max()) / scale)
        lam = float(np.linalg.eigvalsh(sys.s * 0.5 * (R + R.T)).min())
        neg = max(neg, -lam / scale)
    return [
        Check(f"{label}: Pi_C skew", skew, 1e-12),
        Check(f"{label}: R_C symmetric", sym, 1e-12),
        Check(f"{label}: s R_C semidefinite", max(neg, 0.0), 1e-12),
    ]


def satellite_states(rng: np.random.Generator, n: int) -> Array:
    return rng.standard_normal((n, 3))


def mhd_states(rng: np.random.Generator, cfg: mhd2d.ChannelConfig, n: int) -> Array:
    return rng.standard_normal((n, cfg.size))


def lp_check(p: satellite.SatelliteParams = satellite.SatelliteParams()) -> Check:
    sys = satellite.build_satellite(p, MATCHED)
    r1, r2 = check_lp_conditions(sys.kk, sys.matched)
    return Check("matched satellite: LP1/LP2", max(r1, r2), 1e-10)


def ep_lp_check(rng: np.random.Generator, n: int = 50) -> Check:
    """
    On random instances EP residuals vanish iff LP residuals vanish.

    Exact instances must give both below 1e-10; a perturbed A_C must make
    both nonzero.
    """
    worst = 0.0
    mismatched = 0
    for _ in range(n):
        nd, ng = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        kk = random_kaluza_klein(rng, nd, ng)
        ep = random_ep_instance(rng, kk)
        ms = lp_from_ep(kk, ep)
        lp = max(check_lp_conditions(kk, ms))
        epr = max(ep_residuals(kk, ep_from_lp(kk, ms)))
        worst = max(worst, lp, epr)
        bad = type(ms)(ms.muC, ms.IC, type(ms.AC)(ms.AC.matrix + 1e-3 * rng.standard_normal(ms.AC.shape)))
        lp_bad = max(check_lp_conditions(kk, bad)) > 1e-8
        ep_bad = max(ep_residuals(kk, ep_from_lp(kk, bad))) > 1e-8
        if lp_bad != ep_bad or not lp_bad:
            mismatched += 1
    return Check("EP <-> LP residual equivalence", worst if mismatched == 0 else np.inf, 1e-10,
                 f"{n} instances, {mismatched} disagreements")


def oracle_check(rng: np.random.Generator, cfg: mhd2d.ChannelConfig, n: int = 20) -> Check:
    """Fast spectral closed-loop field against the dense quadrature oracle."""
    sys = mhd2d.build_mhd_system(cfg)
    orc = mhd2d.DenseOracle(cfg)
    worst = 0.0
    for _ in range(n):
        om = rng.standard_normal(cfg.shape)
        b = rng.standard_normal(cfg.shape)
        dn, db = ida_field_z(sys, mhd2d.vorticity_to_dual(cfg, om), mhd2d.vorticity_to_dual(cfg, b))
        fast = np.concatenate([mhd2d.dual_to_vorticity(cfg, dn).ravel(), mhd2d.dual_to_vorticity(cfg, db).ravel()])
        ref = np.concatenate(orc.field_z(om.ravel(), b.ravel()))
        worst = max(worst, float(np.linalg.norm(fast - ref) / np.linalg.norm(ref)))
    return Check("MHD fast field vs dense oracle", worst, 1e-9, f"{n} states, {cfg.Nx}x{cfg.Ny} modes")


def fd_check(sys, states: Array, label: str, eps: float = 1e-5) -> List[Check]:
    """dn_apply and g_c_grad against central differences."""
    nd = sys.d.dim
    wn = wg = 0.0
    rng = np.random.default_rng(0)
    for z in states:
        nu, beta = z[:nd], z[nd:]
        eta = rng.standard_normal(nd)
        fd = (n_map(sys, nu + eps * eta) - n_map(sys, nu - eps * eta)) / (2 * eps)
        ex = dn_apply(sys, nu, eta)
        wn = max(wn, float(np.linalg.norm(fd - ex) / max(np.linalg.norm(ex), 1e-300)))
        dz = rng.standard_normal(z.size)
        fdg = (g_c_eval(sys, nu + eps * dz[:nd], beta + eps * dz[nd:])
               - g_c_eval(sys, nu - eps * dz[:nd], beta - eps * dz[nd:])) / (2 * eps)
        gn, gb = g_c_grad(sys, nu, beta)
        exg = float(gn @ dz[:nd] + gb @ dz[nd:])
        wg = max(wg, abs(fdg - exg) / max(abs(exg), 1e-300))
    return [Check(f"{label}: dN vs finite differences", wn, 1e-6),
            Check(f"{label}: grad g_C vs finite differences", wg, 1e-6)]


def structural_suite(seed: int, n_states: int = 100, mhd_modes: int = 8) -> List[Check]:
    rng = np.random.default_rng(seed)
    sat = satellite.build_satellite(satellite.SatelliteParams())
    cfg = mhd_test_config(mhd_modes)
    mhd = mhd2d.build_mhd_system(cfg)
    checks = []
    checks += structure_check(sat, satellite_states(rng, n_states), "satellite")
    checks += structure_check(mhd, mhd_states(rng, cfg, n_states), f"MHD {mhd_modes}x{mhd_modes}")
    checks.append(lp_check())
    checks.append(ep_lp_check(rng))
    checks.append(oracle_check(rng, cfg))
    checks += fd_check(sat, rng.standard_normal((50, 4)), "satellite")
    checks += fd_check(mhd, rng.standard_normal((50, 2 * cfg.size)), f"MHD {mhd_modes}x{mhd_modes}")
    return checks
