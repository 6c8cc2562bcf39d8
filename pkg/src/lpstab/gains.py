"""
Control gains, matching conditions and the Euler-Poincare correspondence.

Given gains ``C: d* -> g*`` and ``G: g* -> g*`` the matched structure is

    mu_C = (1 + A0^T C)^{-1} mu0
    A_C  = A0 + I0^{-1} C mu_C
    I_C  = (G - C A_C^T)^{-1} I0

subject to ``A0^T G = mu0 mu_C^{-1} A_C^T``.  A matched structure satisfies

    (LP1)  I_C A_C = I0 A0
    (LP2)  mu_C + A_C^T I_C A_C = mu0 + A0^T I0 A0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .algebra import LinearMap, as_map
from .kaluza import KaluzaKlein

Array = np.ndarray

SYM_TOL = 1e-10
EIG_TOL = 1e-12
MATCH_TOL = 1e-10


class NotInvertible(ValueError):
    pass


class MatchFailure(ValueError):
    """Matching failed; ``condition`` names the violated requirement."""

    def __init__(self, condition: str, residual: float = np.nan):
        super().__init__(f"matching failed on {condition} (residual {residual:.3g})")
        self.condition = condition
        self.residual = residual


@dataclass(frozen=True)
class GainSet:
    C: LinearMap
    G: LinearMap
    s: int = 1
    sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "C", as_map(self.C))
        object.__setattr__(self, "G", as_map(self.G))
        if self.s not in (1, -1) or self.sign not in (1, -1):
            raise ValueError("s and sign must be +1 or -1")
        if not np.isfinite(np.linalg.cond(self.G.matrix)):
            raise NotInvertible("G is singular")


@dataclass(frozen=True)
class MatchedStructure:
    muC: LinearMap
    IC: LinearMap
    AC: LinearMap


@dataclass(frozen=True)
class EPData:
    """Euler-Poincare data.  ``sigma_inv`` may be singular (sigma infinite)."""

    tau: Array
    sigma_inv: Array
    rho: Array

    @property
    def sigma(self) -> Array:
        if _singular(self.sigma_inv):
            raise NotInvertible("sigma is infinite along some direction")
        return np.linalg.inv(self.sigma_inv)


def identity_gains(kk: KaluzaKlein, s: int = 1, sign: int = 1) -> GainSet:
    nd, ng = kk.dims
    return GainSet(np.zeros((ng, nd)), np.eye(ng), s, sign)


def _singular(m: Array) -> bool:
    return not np.linalg.cond(m) < 1e13


def _is_spd(m: Array) -> Tuple[bool, float, float]:
    sym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    lam = float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())
    return sym < SYM_TOL * max(1.0, np.abs(m).max()) and lam > EIG_TOL, sym, lam


def mu_c_from_gain(kk: KaluzaKlein, C) -> Tuple[LinearMap, bool]:
    """Return mu_C = (1 + A0^T C)^{-1} mu0 and whether it is admissible (SPD)."""
    C = as_map(C).matrix
    nd, _ = kk.dims
    m = np.eye(nd) + kk.A0.matrix.T @ C
    if _singular(m):
        raise NotInvertible("1 + A0^T C is singular")
    muC = np.linalg.solve(m, kk.mu0.matrix)
    ok, _, _ = _is_spd(muC)
    return LinearMap(muC, symmetric=ok, positive_definite=ok, source="d", target="d*"), ok


def match_structure(kk: KaluzaKlein, gains: GainSet) -> MatchedStructure:
    muC, ok = mu_c_from_gain(kk, gains.C)
    if not ok:
        raise MatchFailure("mu_C symmetric positive definite")
    C, G = gains.C.matrix, gains.G.matrix
    AC = kk.A0.matrix + kk.I0.solve(C @ muC.matrix)
    lhs = kk.A0.matrix.T @ G
    rhs = kk.mu0.matrix @ np.linalg.solve(muC.matrix, AC.T)
    res = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
    if res > MATCH_TOL * max(1.0, np.abs(lhs).max()):
        raise MatchFailure("A0^T G = mu0 mu_C^{-1} A_C^T", res)
    m = G - C @ AC.T
    if _singular(m):
        raise MatchFailure("G - C A_C^T invertible")
    IC = np.linalg.solve(m, kk.I0.matrix)
    ok, _, lam = _is_spd(IC)
    if not ok:
        raise MatchFailure("I_C symmetric positive definite", lam)
    return MatchedStructure(
        muC,
        LinearMap(IC, symmetric=True, positive_definite=True, source="g", target="g*"),
        LinearMap(AC, source="d", target="g"),
    )


def gain_from_structure(kk: KaluzaKlein, ms: MatchedStructure, s: int = 1, sign: int = 1) -> GainSet:
    """Recover C = I0 (A_C - A0) mu_C^{-1} and G = I0 I_C^{-1} + C A_C^T."""
    dA = ms.AC.matrix - kk.A0.matrix
    C = kk.I0.matrix @ np.linalg.solve(ms.muC.matrix.T, dA.T).T
    G = kk.I0.matrix @ np.linalg.inv(ms.IC.matrix) + C @ ms.AC.matrix.T
    return GainSet(C, G, s, sign)


def check_lp_conditions(kk: KaluzaKlein, ms: MatchedStructure) -> Tuple[float, float]:
    """Spectral-norm residuals of (LP1) and (LP2)."""
    I0, A0, mu0 = kk.I0.matrix, kk.A0.matrix, kk.mu0.matrix
    IC, AC, muC = ms.IC.matrix, ms.AC.matrix, ms.muC.matrix
    r1 = IC @ AC - I0 @ A0
    r2 = muC + AC.T @ IC @ AC - mu0 - A0.T @ I0 @ A0
    return _opnorm(r1), _opnorm(r2)


def _opnorm(m: Array) -> float:
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


def ep_from_lp(kk: KaluzaKlein, ms: MatchedStructure) -> EPData:
    """tau = A_C - A0, rho = I_C, sigma^{-1} = I0^{-1} - rho^{-1}."""
    rho = ms.IC.matrix
    if _singular(rho):
        raise NotInvertible("rho is singular")
    sig_inv = np.linalg.inv(kk.I0.matrix) - np.linalg.inv(rho)
    return EPData(ms.AC.matrix - kk.A0.matrix, sig_inv, rho)


def lp_from_ep(kk: KaluzaKlein, ep: EPData) -> MatchedStructure:
    """I_C = rho, A_C = A0 + tau, mu_C = mu0 + tau^T sigma tau."""
    if _singular(ep.rho):
        raise NotInvertible("rho is singular")
    if np.any(ep.tau):
        muC = kk.mu0.matrix + ep.tau.T @ np.linalg.solve(ep.sigma_inv, ep.tau)
    else:
        muC = kk.mu0.matrix.copy()
    return MatchedStructure(
        LinearMap(muC, symmetric=True, source="d", target="d*"),
        LinearMap(ep.rho, symmetric=True, source="g", target="g*"),
        LinearMap(kk.A0.matrix + ep.tau, source="d", target="g"),
    )


def ep_residuals(kk: KaluzaKlein, ep: EPData) -> Tuple[float, float]:
    """Residuals of EP1 (tau = -sigma^{-1} I0 A0) and EP2 (sigma^{-1} + rho^{-1} = I0^{-1})."""
    I0, A0 = kk.I0.matrix, kk.A0.matrix
    sig_inv = ep.sigma_inv
    r1 = ep.tau + sig_inv @ I0 @ A0
    r2 = sig_inv + np.linalg.inv(ep.rho) - np.linalg.inv(I0)
    return _opnorm(r1), _opnorm(r2)


def lp_local_residuals(kk: KaluzaKlein, ep: EPData) -> Tuple[float, float]:
    """Residuals of the local forms tau = (rho^{-1} - I0^{-1}) I0 A0 and sigma^{-1} = I0^{-1} - rho^{-1}."""
    I0, A0 = kk.I0.matrix, kk.A0.matrix
    d = np.linalg.inv(ep.rho) - np.linalg.inv(I0)
    return _opnorm(ep.tau - d @ I0 @ A0), _opnorm(ep.sigma_inv + d)


def _random_spd(rng: np.random.Generator, n: int, floor: float = 0.5) -> Array:
    a = rng.standard_normal((n, n))
    return a @ a.T / n + floor * np.eye(n)


def random_kaluza_klein(rng: np.random.Generator, nd: int, ng: int) -> KaluzaKlein:
    """Random positive definite (mu0, I0) and connection A0, no algebra attached."""
    return KaluzaKlein(
        LinearMap(_random_spd(rng, nd), symmetric=True, positive_definite=True),
        LinearMap(_random_spd(rng, ng), symmetric=True, positive_definite=True),
        LinearMap(rng.standard_normal((ng, nd))),
    )


def random_ep_instance(rng: np.random.Generator, kk: KaluzaKlein) -> EPData:
    """EP data solving EP1-EP2 exactly: pick rho, then sigma^{-1} and tau follow."""
    _, ng = kk.dims
    rho = np.linalg.inv(np.linalg.inv(kk.I0.matrix) + 0.5 * _random_spd(rng, ng, 0.2))
    rho = 0.5 * (rho + rho.T)
    sig_inv = np.linalg.inv(kk.I0.matrix) - np.linalg.inv(rho)
    tau = -sig_inv @ kk.I0.matrix @ kk.A0.matrix
    return EPData(tau, sig_inv, rho)
