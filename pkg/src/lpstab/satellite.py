"""
Rigid body with a rotor on its third (short) axis.

d = so(3) in the body frame, g = R (the rotor), ``mu0 = diag(lambda1,
lambda2, I3)``, ``I0 = i3`` and ``A0 = e3^T``.  The feedback gain is
``C = k (i3 / I3) e3^T``.  The target is steady rotation about the middle
axis e2, which is unstable without control.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .algebra import LinearMap, ProductAlgebra, abelian, so3
from .analysis import CasimirProfile, gain_threshold_satellite, lyapunov_eval
from .closed_loop import DISSIPATIVE, MATCHED, ControlledSystem
from .dynamics import IntegratorConfig, ScenarioReport, integrate
from .gains import GainSet
from .kaluza import KaluzaKlein

Array = np.ndarray


@dataclass(frozen=True)
class SatelliteParams:
    lambda1: float = 1.0
    lambda2: float = 2.0
    I3: float = 3.0
    i3: float = 1.0
    k: float = 2.0

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.I3, self.i3) <= 0:
            raise ValueError("moments of inertia must be positive")
        if not self.lambda1 < self.lambda2 < self.I3:
            raise ValueError("need lambda1 < lambda2 < I3")
        if not self.k * self.i3 / self.I3 > -1:
            raise ValueError("need k i3 / I3 > -1")

    @property
    def c3(self) -> float:
        """Third diagonal entry of 1 + A0^T C."""
        return 1.0 + self.k * self.i3 / self.I3

    def matched_gains(self):
        """G, A_C (scalar on e3) and I_C of the matched controlled Lagrangian."""
        k, i3, I3 = self.k, self.i3, self.I3
        G = 1.0 + k * (i3 + I3) / I3
        AC = (I3 + k * i3 + k * I3) / (I3 + k * i3)
        IC = i3 * (I3 + k * i3) / (I3 + k * i3 + k * I3)
        return G, AC, IC


def kaluza_klein(p: SatelliteParams) -> KaluzaKlein:
    mu0 = LinearMap(np.diag([p.lambda1, p.lambda2, p.I3]), symmetric=True, positive_definite=True)
    I0 = LinearMap([[p.i3]], symmetric=True, positive_definite=True)
    A0 = LinearMap([[0.0, 0.0, 1.0]])
    return KaluzaKlein(mu0, I0, A0, ProductAlgebra(so3(), abelian(1)))


def build_satellite(p: SatelliteParams, mode: str = DISSIPATIVE, s: int = 1) -> ControlledSystem:
    """Assemble the controlled satellite; matched mode uses the matched G."""
    kk = kaluza_klein(p)
    C = np.array([[0.0, 0.0, p.k * p.i3 / p.I3]])
    if mode == MATCHED:
        G = p.matched_gains()[0]
    else:
        G = 1.0
    return ControlledSystem(kk, GainSet(C, [[G]], s=s, sign=1), mode=mode)


def default_profile(p: SatelliteParams, curvature: float = 1.0) -> CasimirProfile:
    """rho(x) = -(x - 1/2)/lambda2 + curvature/2 (x - 1/2)^2 on |nu|^2/2."""
    return CasimirProfile.quadratic("norm2", 0.5, -1.0 / p.lambda2, curvature)


def hessian_closed_form(p: SatelliteParams, s: int = 1, curvature: float = 1.0) -> Array:
    """Diagonal second variation at (e2, 0) for G = 1."""
    return np.diag([
        1 / p.lambda1 - 1 / p.lambda2,
        curvature,
        p.c3 / p.I3 - 1 / p.lambda2,
        s / p.i3,
    ])


def n_closed_form(p: SatelliteParams, nu: Array, s: int = 1) -> float:
    return -s * (p.i3 / p.I3) * (1 / p.lambda1 - 1 / p.lambda2) * nu[0] * nu[1]


def fast_field_z(p: SatelliteParams, s: int = 1) -> Callable[[float, Array], Array]:
    """Closed-form (nu, beta) field in double-bracket mode (G = 1)."""
    l1, l2, I3, i3 = p.lambda1, p.lambda2, p.I3, p.i3
    c3 = p.c3
    kn = -s * (i3 / I3) * (1 / l1 - 1 / l2)

    def f(t, z):
        n1, n2, n3, b = z[0], z[1], z[2], z[3]
        w1, w2, w3 = n1 / l1, n2 / l2, n3 * c3 / I3
        N = kn * n1 * n2
        r = (b - N) / I3
        return np.array([
            -(w2 * n3 - w3 * n2) - r * n2,
            -(w3 * n1 - w1 * n3) + r * n1,
            -(w1 * n2 - w2 * n1),
            -b - N,
        ])

    return f


def fast_field_x(p: SatelliteParams, s: int = 1) -> Callable[[float, Array], Array]:
    """Closed-form (nu, alpha) feedback field in double-bracket mode (G = 1)."""
    l1, l2, I3, i3 = p.lambda1, p.lambda2, p.I3, p.i3
    c = p.k * i3 / I3
    kn = -s * (i3 / I3) * (1 / l1 - 1 / l2)

    def f(t, z):
        n1, n2, n3, a = z[0], z[1], z[2], z[3]
        u1, u2, u3 = n1 / l1, n2 / l2, (n3 - a) / I3
        # ad(u)* nu = -u x nu
        c1 = -(u2 * n3 - u3 * n2)
        c2 = -(u3 * n1 - u1 * n3)
        c3 = -(u1 * n2 - u2 * n1)
        N = kn * n1 * n2
        dN = kn * (c1 * n2 + n1 * c2)
        return np.array([c1, c2, c3, -(c * c3 + dN) - a - c * n3 - 2.0 * N])

    return f


def free_field(p: SatelliteParams) -> Callable[[float, Array], Array]:
    """Uncontrolled body-frame equations, (nu, alpha) chart."""
    l1, l2, I3 = p.lambda1, p.lambda2, p.I3

    def f(t, z):
        n1, n2, n3, a = z[0], z[1], z[2], z[3]
        u1, u2, u3 = n1 / l1, n2 / l2, (n3 - a) / I3
        return np.array([-(u2 * n3 - u3 * n2), -(u3 * n1 - u1 * n3), -(u1 * n2 - u2 * n1), 0.0])

    return f


def phi_closed_form(p: SatelliteParams, z: Array, s: int = 1) -> Array:
    """Phi for G = 1: beta = alpha + C nu + N(nu)."""
    out = np.array(z, dtype=float)
    out[..., 3] = z[..., 3] + p.k * p.i3 / p.I3 * z[..., 2] + n_closed_form(p, np.moveaxis(z, -1, 0), s)
    return out


def axis_distance(z: Array) -> Array:
    """Distance of (nu, beta) from the set R e2 x {0}."""
    z = np.asarray(z)
    return np.sqrt(z[..., 0] ** 2 + z[..., 2] ** 2 + z[..., 3] ** 2)


def scenario_middle_axis(p: SatelliteParams = SatelliteParams(), perturbation: float = 1e-2,
                         horizon: float = 200.0, step: float = 1e-3, s: int = 1,
                         curvature: float = 1.0, monitor_stride: int = 1) -> ScenarioReport:
    """
    Stabilization of rotation about e2.

    The initial state is ``nu = e2 + eps (e1 + e3)``, ``beta = eps``.  With
    ``k = 0`` the uncontrolled equations are integrated instead and the
    verdict is whether the perturbation grows beyond 0.5.
    """
    eps = perturbation
    z0 = np.array([eps, 1.0, eps, eps])
    report = ScenarioReport("satellite", params={**asdict(p), "perturbation": eps, "horizon": horizon,
                                                  "step": step, "s": s, "rho_curvature": curvature})
    thr = gain_threshold_satellite(p)
    report.metrics["gain_threshold"] = thr
    cfg = IntegratorConfig("rk4", step, horizon, monitor_stride)

    if p.k == 0:
        traj = integrate(free_field(p), z0, cfg, {"axis_distance": axis_distance}, chart="x")
        grow = float(np.max(traj.monitors["axis_distance"]))
        report.metrics["max_axis_distance"] = grow
        report.verdicts["perturbation_bounded"] = grow <= 0.5 and not traj.blew_up
        report.notes["mode"] = "uncontrolled"
        report.trajectories["free"] = traj
        return report

    sys = build_satellite(p, DISSIPATIVE, s)
    prof = default_profile(p, curvature)
    z_e = np.array([0.0, 1.0, 0.0, 0.0])
    kn = -s * (p.i3 / p.I3) * (1 / p.lambda1 - 1 / p.lambda2)
    monitors = {
        "lyapunov": lambda z: lyapunov_eval(sys, prof, z, z_e),
        "axis_distance": axis_distance,
        "norm_nu": lambda z: math.sqrt(z[0] ** 2 + z[1] ** 2 + z[2] ** 2),
        "norm_N": lambda z: abs(kn * z[0] * z[1]),
        "norm_beta": lambda z: abs(z[3]),
    }
    traj = integrate(fast_field_z(p, s), z0, cfg, monitors, chart="z")
    L = traj.monitors["lyapunov"]
    viol = int(np.sum(np.diff(L) > 1e-12))
    nn = traj.monitors["norm_nu"]
    report.trajectories["controlled"] = traj
    report.metrics.update(
        lyapunov_violations=viol,
        lyapunov_initial=float(L[0]),
        lyapunov_final=float(L[-1]),
        terminal_axis_distance=float(traj.monitors["axis_distance"][-1]),
        terminal_norm_N=float(traj.monitors["norm_N"][-1]),
        terminal_norm_beta=float(traj.monitors["norm_beta"][-1]),
        norm_nu_drift=float(abs(nn[-1] - nn[0])),
    )
    report.verdicts["gain_above_threshold"] = p.k > thr
    report.verdicts["lyapunov_monotone"] = viol == 0
    report.verdicts["axis_distance_below_1e-6"] = report.metrics["terminal_axis_distance"] < 1e-6
    report.verdicts["norm_nu_preserved"] = report.metrics["norm_nu_drift"] < 1e-8
    report.verdicts["no_blowup"] = not traj.blew_up
    return report
