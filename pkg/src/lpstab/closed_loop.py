"""
Double-bracket dissipative feedback and its port-Hamiltonian form.

Notation: ``sign`` is the orientation (+1 left/body, -1 right/space), ``s``
selects whether an energy minimum (+1) or maximum (-1) is stabilized.  With
``u_C = mu_C^{-1} nu`` the shaping map is

    N(nu) = sign * s * I0 A0 mu0^{-1} ad(u_C)* nu

and the closed-loop variable is ``beta = G^{-1}(alpha + C nu + N(nu))``.  In
the (nu, beta) chart the closed loop reads ``z' = (Pi_C - R_C) dg_C/dz``.
"""

from __future__ import annotations

from typing import Callable, Optional, Tuple

import numpy as np

from .algebra import LinearMap, ProductAlgebra
from .gains import GainSet, MatchedStructure, match_structure, mu_c_from_gain
from .kaluza import KaluzaKlein, metric_solve

Array = np.ndarray
Pair = Tuple[Array, Array]

DISSIPATIVE = "double-bracket"
MATCHED = "matched"


class ControlledSystem:
    """
    A Kaluza-Klein Lie-Poisson system together with its control gains.

    Parameters
    ----------
    kk : KaluzaKlein
        Metric data; ``kk.algebra`` must be set.
    gains : GainSet
    mode : {"double-bracket", "matched"}
        The matched mode omits the shaping map and the dissipative force and
        requires gains that satisfy the matching conditions.
    """

    def __init__(self, kk: KaluzaKlein, gains: GainSet, mode: str = DISSIPATIVE):
        if kk.algebra is None:
            raise ValueError("KaluzaKlein must carry its algebra")
        if mode not in (DISSIPATIVE, MATCHED):
            raise ValueError(f"unknown mode {mode!r}")
        self.kk = kk
        self.gains = gains
        self.mode = mode
        self.algebra: ProductAlgebra = kk.algebra
        self.d = kk.algebra.d
        self.g = kk.algebra.g
        self.sign = gains.sign
        self.s = gains.s
        muC, ok = mu_c_from_gain(kk, gains.C)
        self.muC: LinearMap = muC
        self.admissible = ok
        self.matched: Optional[MatchedStructure] = match_structure(kk, gains) if mode == MATCHED else None

        mu0, I0, A0 = kk.mu0.matrix, kk.I0.matrix, kk.A0.matrix
        self._muC_inv = np.linalg.inv(muC.matrix)
        self._mu0_inv = np.linalg.inv(mu0)
        self._I0_inv = np.linalg.inv(I0)
        G = gains.G.matrix
        self._G = G
        self._G_inv = np.linalg.inv(G)
        self._C = gains.C.matrix
        # I0 A0 mu0^{-1}: d* -> g*, used by N and dN
        self._K = I0 @ A0 @ self._mu0_inv
        # mu0^{-1} A0^T: g* -> d
        self._B = self._mu0_inv @ A0.T
        gp = self._mu0_inv @ A0.T @ I0 @ A0 @ self._mu0_inv
        self._Gamma0 = 0.5 * (gp + gp.T)
        self.Gamma = LinearMap(self.sign * self._Gamma0, symmetric=True, source="d*", target="d")

    # -- coordinates ---------------------------------------------------
    def split(self, z: Array) -> Pair:
        return self.algebra.split(z)

    def join(self, a: Array, b: Array) -> Array:
        return self.algebra.join(a, b)

    def coad_d(self, u: Array, nu: Array) -> Array:
        return self.d.coad(u, nu)

    def coad_g(self, X: Array, a: Array) -> Array:
        return self.g.coad(X, a)

    def __repr__(self) -> str:
        return f"ControlledSystem({self.d.name} x {self.g.name}, mode={self.mode}, s={self.s}, sign={self.sign})"


def _n_active(sys: ControlledSystem) -> bool:
    return sys.mode == DISSIPATIVE


def n_map(sys: ControlledSystem, nu: Array) -> Array:
    """N(nu) = sign s I0 A0 mu0^{-1} ad(mu_C^{-1} nu)* nu (zero in matched mode)."""
    if not _n_active(sys):
        return np.zeros(sys.g.dim)
    return sys.sign * sys.s * (sys._K @ sys.coad_d(sys._muC_inv @ nu, nu))


def dn_apply(sys: ControlledSystem, nu: Array, eta: Array) -> Array:
    """Derivative of N at nu in direction eta."""
    if not _n_active(sys):
        return np.zeros(sys.g.dim)
    mi = sys._muC_inv
    w = sys.coad_d(mi @ eta, nu) + sys.coad_d(mi @ nu, eta)
    return sys.sign * sys.s * (sys._K @ w)


def phi_forward(sys: ControlledSystem, nu: Array, alpha: Array) -> Pair:
    """(nu, alpha) -> (nu, beta) with beta = G^{-1}(alpha + C nu + N(nu))."""
    return nu, sys._G_inv @ (alpha + sys._C @ nu + n_map(sys, nu))


def phi_inverse(sys: ControlledSystem, nu: Array, beta: Array) -> Pair:
    """(nu, beta) -> (nu, alpha) with alpha = G beta - C nu - N(nu)."""
    return nu, sys._G @ beta - sys._C @ nu - n_map(sys, nu)


def tangent_phi(sys: ControlledSystem, nu: Array, dnu: Array, dalpha: Array) -> Pair:
    """Exact tangent map of Phi at nu applied to (dnu, dalpha)."""
    return dnu, sys._G_inv @ (dalpha + sys._C @ dnu + dn_apply(sys, nu, dnu))


def u_lp_force(sys: ControlledSystem, nu: Array, alpha: Array) -> Array:
    """Lie-Poisson control force U_LP(nu, alpha)."""
    u, X = metric_solve(sys.kk, nu, alpha)
    adu = sys.coad_d(u, nu)
    w = sys._G_inv @ (sys._C @ nu + n_map(sys, nu) + alpha)
    out = (sys._G @ sys.coad_g(X, w) - sys._C @ adu - dn_apply(sys, nu, adu)
           - sys.coad_g(X, alpha))
    return sys.sign * out


def u_diss_force(sys: ControlledSystem, nu: Array, beta: Array) -> Array:
    """U_diss(nu, beta) = -sign ad(X)* beta - beta - G^{-1} N(nu), X at alpha = Phi^{-1}."""
    if not _n_active(sys):
        return np.zeros(sys.g.dim)
    _, alpha = phi_inverse(sys, nu, beta)
    _, X = metric_solve(sys.kk, nu, alpha)
    return -sys.sign * sys.coad_g(X, beta) - beta - sys._G_inv @ n_map(sys, nu)


def u_diss_tilde(sys: ControlledSystem, nu: Array, alpha: Array) -> Array:
    """Dissipative force in the x-chart, G U_diss(Phi(nu, alpha))."""
    _, beta = phi_forward(sys, nu, alpha)
    return sys._G @ u_diss_force(sys, nu, beta)


def controlled_field_x(sys: ControlledSystem, nu: Array, alpha: Array) -> Pair:
    """Feedback-controlled field in the (nu, alpha) chart."""
    u, X = metric_solve(sys.kk, nu, alpha)
    dnu = sys.sign * sys.coad_d(u, nu)
    dalpha = sys.sign * sys.coad_g(X, alpha) + u_lp_force(sys, nu, alpha) + u_diss_tilde(sys, nu, alpha)
    return dnu, dalpha


def controlled_field_x_reduced(sys: ControlledSystem, nu: Array, alpha: Array) -> Pair:
    """
    Same field after cancelling the g-coadjoint terms.

    nu' = sign ad(u)* nu,
    alpha' = -sign (C + dN(nu)) ad(u)* nu - alpha - C nu - 2 N(nu).
    In matched mode the last three terms are replaced by sign G ad(X)* beta.
    """
    u, X = metric_solve(sys.kk, nu, alpha)
    adu = sys.coad_d(u, nu)
    if sys.mode == MATCHED:
        _, beta = phi_forward(sys, nu, alpha)
        return sys.sign * adu, sys.sign * (sys._G @ sys.coad_g(X, beta) - sys._C @ adu)
    n = n_map(sys, nu)
    dalpha = -sys.sign * (sys._C @ adu + dn_apply(sys, nu, adu)) - alpha - sys._C @ nu - 2.0 * n
    return sys.sign * adu, dalpha


def g_c_eval(sys: ControlledSystem, nu: Array, beta: Array) -> float:
    """g_C = 1/2 <nu, mu_C^{-1} nu> + s/2 <G beta, I0^{-1} G beta>."""
    gb = sys._G @ beta
    return 0.5 * float(nu @ (sys._muC_inv @ nu)) + 0.5 * sys.s * float(gb @ (sys._I0_inv @ gb))


def g_c_grad(sys: ControlledSystem, nu: Array, beta: Array) -> Pair:
    return sys._muC_inv @ nu, sys.s * (sys._G.T @ (sys._I0_inv @ (sys._G @ beta)))


def h_d_eval(sys: ControlledSystem, nu: Array, alpha: Array) -> float:
    return g_c_eval(sys, *phi_forward(sys, nu, alpha))


def pi_c_apply(sys: ControlledSystem, nu: Array, v: Array, Y: Array) -> Pair:
    """Skew interconnection Pi_C(nu) applied to a covector (v, Y) in d x g."""
    sg, s = sys.sign, sys.s
    I0 = sys.kk.I0.matrix
    w = sys._B @ (I0 @ np.linalg.solve(sys._G.T, Y))
    a = sg * sys.coad_d(v, nu) - sg * s * sys.coad_d(w, nu)
    b = -sg * s * (sys._G_inv @ (sys._K @ sys.coad_d(v, nu)))
    return a, b


def r_c_apply(sys: ControlledSystem, nu: Array, v: Array, Y: Array) -> Pair:
    """Symmetric damping R_C(nu) applied to (v, Y); s R_C is positive semidefinite."""
    s = sys.s
    I0 = sys.kk.I0.matrix
    a = -s * sys.coad_d(sys._Gamma0 @ sys.coad_d(v, nu), nu)
    if not _n_active(sys):
        a = np.zeros_like(a)
    b = s * (sys._G_inv @ (I0 @ np.linalg.solve(sys._G.T, Y)))
    if not _n_active(sys):
        b = np.zeros_like(b)
    return a, b


def ida_field_z(sys: ControlledSystem, nu: Array, beta: Array, path: str = "structure") -> Pair:
    """
    Closed-loop field in the (nu, beta) chart.

    ``path="structure"`` evaluates (Pi_C - R_C) dg_C; ``path="direct"`` uses
    the expanded equations.  Both are kept as mutual checks.
    """
    if path == "structure":
        if sys.mode == MATCHED:
            return matched_field_z(sys, nu, beta)
        v, Y = g_c_grad(sys, nu, beta)
        p1, p2 = pi_c_apply(sys, nu, v, Y)
        r1, r2 = r_c_apply(sys, nu, v, Y)
        return p1 - r1, p2 - r2
    if path == "direct":
        if sys.mode == MATCHED:
            return matched_field_z(sys, nu, beta)
        sg = sys.sign
        n = n_map(sys, nu)
        a = (sg * sys.coad_d(sys._muC_inv @ nu, nu)
             - sg * sys.coad_d(sys._B @ (sys._G @ beta), nu)
             + sg * sys.coad_d(sys._B @ n, nu))
        return a, -beta - sys._G_inv @ n
    raise ValueError(f"unknown path {path!r}")


def matched_field_z(sys: ControlledSystem, nu: Array, beta: Array) -> Pair:
    """Non-dissipative matched flow: nu' = sign ad(u)* nu, beta' = sign ad(X)* beta."""
    _, alpha = phi_inverse(sys, nu, beta)
    u, X = metric_solve(sys.kk, nu, alpha)
    return sys.sign * sys.coad_d(u, nu), sys.sign * sys.coad_g(X, beta)


def dissipation_rate(sys: ControlledSystem, nu: Array, beta: Array) -> float:
    """d g_C / dt = -s |N(nu)|^2 - s |G beta|^2, norms weighted by I0^{-1}."""
    if not _n_active(sys):
        return 0.0
    n = n_map(sys, nu)
    gb = sys._G @ beta
    return -sys.s * (float(n @ (sys._I0_inv @ n)) + float(gb @ (sys._I0_inv @ gb)))


def symmetric_bracket(sys: ControlledSystem, df: Array, dh: Array, nu: Array) -> float:
    """{{f, h}}(nu) = <ad(df)* nu, Gamma ad(dh)* nu> for gradients df, dh at nu."""
    return float(sys.coad_d(df, nu) @ (sys.Gamma.matrix @ sys.coad_d(dh, nu)))


def dissipative_nu_term(sys: ControlledSystem, nu: Array) -> Array:
    """The double-bracket part of the nu-leg, s ad(Gamma0 ad(mu_C^{-1} nu)* nu)* nu."""
    if not _n_active(sys):
        return np.zeros(sys.d.dim)
    c = sys.coad_d(sys._muC_inv @ nu, nu)
    return sys.s * sys.coad_d(sys._Gamma0 @ c, nu)


def pushforward_residual(sys: ControlledSystem, nu: Array, alpha: Array) -> float:
    """|T Phi . F_x - F_z o Phi| at (nu, alpha)."""
    fx = controlled_field_x(sys, nu, alpha)
    lhs = tangent_phi(sys, nu, *fx)
    rhs = ida_field_z(sys, *phi_forward(sys, nu, alpha))
    return float(max(np.max(np.abs(lhs[0] - rhs[0])), np.max(np.abs(lhs[1] - rhs[1]))))


def as_flat_field(sys: ControlledSystem, chart: str = "z", path: str = "structure") -> Callable[[float, Array], Array]:
    """Wrap a chart field as f(t, z) on concatenated vectors."""
    nd = sys.d.dim

    if chart == "z":
        def f(t, z):
            a, b = ida_field_z(sys, z[:nd], z[nd:], path)
            return np.concatenate([a, b])
    elif chart == "x":
        def f(t, z):
            a, b = controlled_field_x(sys, z[:nd], z[nd:])
            return np.concatenate([a, b])
    else:
        raise ValueError("chart must be 'x' or 'z'")
    return f


def structure_matrices(sys: ControlledSystem, nu: Array, columnwise: bool = False) -> Pair:
    """
    Dense Pi_C(nu) and R_C(nu).

    By default the blocks are composed from the coadjoint matrix at nu;
    ``columnwise=True`` applies ``pi_c_apply``/``r_c_apply`` to basis vectors.
    """
    n = sys.algebra.dim
    nd = sys.d.dim
    if columnwise:
        P = np.zeros((n, n))
        R = np.zeros((n, n))
        eye = np.eye(n)
        for j in range(n):
            v, Y = eye[j, :nd], eye[j, nd:]
            P[:, j] = np.concatenate(pi_c_apply(sys, nu, v, Y))
            R[:, j] = np.concatenate(r_c_apply(sys, nu, v, Y))
        return P, R
    sg, s = sys.sign, sys.s
    A = sys.d.coad_matrix(nu)
    I0 = sys.kk.I0.matrix
    W = sys._B @ I0 @ np.linalg.inv(sys._G.T)
    P = np.block([[sg * A, -sg * s * (A @ W)],
                  [-sg * s * (sys._G_inv @ sys._K @ A), np.zeros((n - nd, n - nd))]])
    if _n_active(sys):
        R = np.block([[-s * (A @ sys._Gamma0 @ A), np.zeros((nd, n - nd))],
                      [np.zeros((n - nd, nd)), s * (sys._G_inv @ I0 @ np.linalg.inv(sys._G.T))]])
    else:
        R = np.zeros((n, n))
    return P, R
