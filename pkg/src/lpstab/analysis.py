"""
Energy-Casimir analysis of closed-loop equilibria.

The Lyapunov candidate is ``g_C + K_rho`` with ``K_rho(nu) = rho(K(nu))`` for
a registered Casimir ``K`` of d*.  Its Hessian is exact:

    D^2 g_C = diag(mu_C^{-1}, s G^T I0^{-1} G)
    D^2 K_rho = rho'' grad K grad K^T + rho' D^2 K.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .closed_loop import ControlledSystem, g_c_eval, g_c_grad

Array = np.ndarray

CLASS_TOL = 1e-10


@dataclass(frozen=True)
class CasimirProfile:
    """rho composed with a named Casimir of d*."""

    base: str
    rho: Callable[[float], float]
    drho: Callable[[float], float]
    d2rho: Callable[[float], float]

    @classmethod
    def quadratic(cls, base: str, level: float, slope: float, curvature: float) -> "CasimirProfile":
        """rho(x) = slope (x - level) + curvature/2 (x - level)^2."""
        return cls(
            base,
            rho=lambda x: slope * (x - level) + 0.5 * curvature * (x - level) ** 2,
            drho=lambda x: slope + curvature * (x - level),
            d2rho=lambda x: curvature,
        )

    @classmethod
    def linear(cls, base: str, slope: float) -> "CasimirProfile":
        return cls(base, rho=lambda x: slope * x, drho=lambda x: slope, d2rho=lambda x: 0.0)


@dataclass
class VariationReport:
    gradient_norm: float
    hessian: Array
    classification: str
    margin: float
    eigenvalues: Array = field(default_factory=lambda: np.zeros(0))


def _casimir(sys: ControlledSystem, profile: CasimirProfile):
    try:
        return sys.d.casimirs[profile.base]
    except KeyError:
        raise KeyError(f"{sys.d.name} has no Casimir {profile.base!r}") from None


def k_rho_eval(sys: ControlledSystem, profile: CasimirProfile, nu: Array) -> float:
    return float(profile.rho(_casimir(sys, profile).value(nu)))


def energy_casimir(sys: ControlledSystem, profile: CasimirProfile, nu: Array, beta: Array) -> float:
    return g_c_eval(sys, nu, beta) + k_rho_eval(sys, profile, nu)


def first_variation(sys: ControlledSystem, profile: CasimirProfile, z_e: Array):
    """
    Gradient of g_C + K_rho at z_e.

    Returns
    -------
    grad : ndarray
    rho_prime : float or None
        The value of rho' at the equilibrium level that annihilates the
        nu-gradient, when grad K is parallel to mu_C^{-1} nu_e.
    """
    nu, beta = sys.split(z_e)
    cas = _casimir(sys, profile)
    gn, gb = g_c_grad(sys, nu, beta)
    level = cas.value(nu)
    kg = cas.grad(nu)
    grad = np.concatenate([gn + profile.drho(level) * kg, gb])
    rho_prime = None
    kk = float(kg @ kg)
    if kk > 0:
        c = float(gn @ kg) / kk
        if np.allclose(gn, c * kg, atol=1e-12 * max(1.0, np.abs(gn).max())):
            rho_prime = -c
    return grad, rho_prime


def hessian_exact(sys: ControlledSystem, profile: CasimirProfile, z_e: Array) -> Array:
    nu, _ = sys.split(z_e)
    cas = _casimir(sys, profile)
    if cas.hess is None:
        raise ValueError(f"Casimir {cas.name!r} has no Hessian")
    level = cas.value(nu)
    kg = cas.grad(nu)
    hk = profile.d2rho(level) * np.outer(kg, kg) + profile.drho(level) * cas.hess(nu)
    nd = sys.d.dim
    H = np.zeros((sys.algebra.dim, sys.algebra.dim))
    H[:nd, :nd] = sys._muC_inv + hk
    G = sys._G
    H[nd:, nd:] = sys.s * (G.T @ sys._I0_inv @ G)
    return 0.5 * (H + H.T)


def hessian_fd(fun: Callable[[Array], float], z: Array, step: float = 1e-4) -> Array:
    """Central-difference Hessian with one Richardson step (h and h/2)."""

    def at(h):
        n = z.size
        H = np.zeros((n, n))
        eye = np.eye(n)
        for i in range(n):
            for j in range(i, n):
                ei, ej = h * eye[i], h * eye[j]
                v = (fun(z + ei + ej) - fun(z + ei - ej) - fun(z - ei + ej) + fun(z - ei - ej)) / (4 * h * h)
                H[i, j] = H[j, i] = v
        return H

    h1, h2 = at(step), at(step / 2)
    H = (4.0 * h2 - h1) / 3.0
    return 0.5 * (H + H.T)


def classify(eigs: Array, tol: float = CLASS_TOL):
    lo, hi = float(eigs.min()), float(eigs.max())
    if np.any(np.abs(eigs) <= tol):
        return "degenerate", float(np.abs(eigs).min())
    if lo > tol:
        return "positive-definite", lo
    if hi < -tol:
        return "negative-definite", hi
    return "indefinite", lo


def second_variation(sys: ControlledSystem, profile: CasimirProfile, z_e: Array,
                     basis: Optional[Array] = None, exact: bool = True) -> VariationReport:
    """Hessian of g_C + K_rho at z_e, restricted to ``basis`` columns if given."""
    if exact:
        H = hessian_exact(sys, profile, z_e)
    else:
        nd = sys.d.dim
        H = hessian_fd(lambda z: energy_casimir(sys, profile, z[:nd], z[nd:]), np.asarray(z_e, float))
    if basis is not None:
        H = basis.T @ H @ basis
    eigs = np.linalg.eigvalsh(H)
    cls, margin = classify(eigs)
    grad, _ = first_variation(sys, profile, z_e)
    return VariationReport(float(np.linalg.norm(grad)), H, cls, margin, eigs)


def lyapunov_eval(sys: ControlledSystem, profile: CasimirProfile, z: Array, z_e: Array) -> float:
    """s (g_C + K_rho)(z) - s (g_C + K_rho)(z_e)."""
    nu, beta = sys.split(z)
    nue, betae = sys.split(z_e)
    return sys.s * (energy_casimir(sys, profile, nu, beta) - energy_casimir(sys, profile, nue, betae))


def gain_threshold_satellite(params) -> float:
    """k above which the satellite second variation is positive definite."""
    return params.I3 * (params.I3 - params.lambda2) / (params.i3 * params.lambda2)


def bisect_threshold(is_definite: Callable[[float], bool], lo: float, hi: float, tol: float = 1e-8) -> float:
    """Locate the parameter where ``is_definite`` switches from False to True."""
    if is_definite(lo) or not is_definite(hi):
        raise ValueError("bracket does not contain a switch")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_definite(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
