"""
Galerkin-truncated 2D incompressible MHD in a rectangular channel.

Domain ``[0, L pi] x [0, W pi]``.  Stream functions and vorticities are
expanded in ``phi_mn = sin(m x / L) sin(n y / W)``, ``1 <= m <= Nx``,
``1 <= n <= Ny``, with ``int phi_mn^2 = c^2 = pi^2 L W / 4``.

Algebra elements are stream functions psi, velocity ``u = (-psi_y, psi_x)``;
dual elements are stored by their vorticity ``omega``.  The pairing is
``<nu, u> = -int psi omega``.  The coadjoint action is vorticity transport,
``ad(psi)* omega = P J(psi, omega)`` with ``J(a, b) = a_x b_y - a_y b_x``,
and the Lie bracket is ``ad(psi1, psi2) = -P J(psi1, psi2)``.

The generic closed-loop code works in normalized coordinates where the
pairing is Euclidean:

    q = c psi_hat  (algebra),      p = -c omega_hat  (dual).

In these coordinates ``mu0 = diag(k^2)``, ``I0 = e^2``, ``A0 = -1`` and
``mu_C = diag(k_gamma^2)`` with ``k^2 = m^2/L^2 + n^2/W^2`` and
``k_gamma^2 = m^2/L^2 + (1 - gamma) n^2/W^2``.

Quadratic products are evaluated on a padded DST-I grid with more than 3N/2
points per direction, which makes them exact Galerkin projections.  Terms
involving the shear background ``psi_e = cos y`` use exact one-dimensional
projection matrices.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.fft import dct, dst

from .algebra import AlgebraDescriptor, Casimir, LinearMap, ProductAlgebra
from .closed_loop import DISSIPATIVE, ControlledSystem
from .dynamics import IntegratorConfig, ScenarioReport, integrate
from .gains import GainSet
from .kaluza import KaluzaKlein

Array = np.ndarray


@dataclass(frozen=True)
class ChannelConfig:
    L: float = 2.0
    W: float = 2.0
    gamma: float = 0.8
    e: float = 1.0
    Nx: int = 24
    Ny: int = 24
    dealias: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("need 0 <= gamma < 1")
        if self.Nx < 4 or self.Ny < 4:
            raise ValueError("need at least 4 modes per direction")
        if self.L <= 0 or self.W <= 0 or self.e <= 0:
            raise ValueError("L, W and e must be positive")

    @property
    def c2(self) -> float:
        return math.pi ** 2 * self.L * self.W / 4.0

    @property
    def c(self) -> float:
        return math.sqrt(self.c2)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.Nx, self.Ny

    @property
    def size(self) -> int:
        return self.Nx * self.Ny


@dataclass(frozen=True)
class SpectralField:
    """Sine-sine coefficients of a scalar field vanishing on the boundary."""

    coeffs: Array
    cfg: ChannelConfig

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=float)
        if a.shape != self.cfg.shape:
            raise ValueError(f"expected shape {self.cfg.shape}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite coefficients")
        if self.cfg.dealias and np.any(a[~dealias_mask(self.cfg)]):
            raise ValueError("dealiased modes must be zero")
        object.__setattr__(self, "coeffs", a)


# -- elementary spectral operators -------------------------------------------

def wavenumbers(cfg: ChannelConfig) -> Tuple[Array, Array]:
    return np.arange(1, cfg.Nx + 1) / cfg.L, np.arange(1, cfg.Ny + 1) / cfg.W


def k2(cfg: ChannelConfig) -> Array:
    kx, ky = wavenumbers(cfg)
    return kx[:, None] ** 2 + ky[None, :] ** 2


def k2_gamma(cfg: ChannelConfig, gamma: Optional[float] = None) -> Array:
    g = cfg.gamma if gamma is None else gamma
    kx, ky = wavenumbers(cfg)
    return kx[:, None] ** 2 + (1.0 - g) * ky[None, :] ** 2


def dealias_mask(cfg: ChannelConfig) -> Array:
    m = np.arange(1, cfg.Nx + 1)[:, None] <= (2 * cfg.Nx) // 3
    n = np.arange(1, cfg.Ny + 1)[None, :] <= (2 * cfg.Ny) // 3
    return m & n


def delta_gamma_apply(cfg: ChannelConfig, f: Array) -> Array:
    """Delta_gamma = d_xx + (1 - gamma) d_yy on sine coefficients."""
    return -k2_gamma(cfg) * f


def delta_gamma_solve(cfg: ChannelConfig, f: Array) -> Array:
    return -f / k2_gamma(cfg)


def lambda1_gamma(cfg: ChannelConfig, gamma: Optional[float] = None) -> float:
    """Smallest eigenvalue of -Delta_gamma, 1/L^2 + (1 - gamma)/W^2."""
    g = cfg.gamma if gamma is None else gamma
    lam = 1.0 / cfg.L ** 2 + (1.0 - g) / cfg.W ** 2
    assert abs(lam - k2_gamma(cfg, g).min()) <= 1e-14 * lam
    return lam


def stability_margin(cfg: ChannelConfig, gamma: Optional[float] = None) -> float:
    """1/((1 - gamma) L^2) + 1/W^2 - 1; positive certifies the controlled equilibrium."""
    g = cfg.gamma if gamma is None else gamma
    return 1.0 / ((1.0 - g) * cfg.L ** 2) + 1.0 / cfg.W ** 2 - 1.0


def uncontrolled_margin(cfg: ChannelConfig) -> float:
    """lambda1 - 1 for the free channel (stable if positive)."""
    return lambda1_gamma(cfg, 0.0) - 1.0


# -- transforms ---------------------------------------------------------------

def _pad(n: int) -> int:
    return (3 * n) // 2 + 2


class SpectralGrid:
    """Padded DST-I grid used for exact quadratic products."""

    def __init__(self, cfg: ChannelConfig):
        self.cfg = cfg
        self.Nx, self.Ny = cfg.shape
        self.Mx, self.My = _pad(self.Nx), _pad(self.Ny)
        self.kx, self.ky = wavenumbers(cfg)

    def _synth(self, a: Array, axis: int, cos: bool) -> Array:
        """Sine (or cosine) synthesis along ``axis`` (-2 for x, -1 for y)."""
        n = a.shape[axis]
        M = self.Mx if axis == -2 else self.My
        shape = list(a.shape)
        idx = [slice(None)] * a.ndim
        if cos:
            shape[axis] = M + 1
            z = np.zeros(shape)
            idx[axis] = slice(1, n + 1)
            z[tuple(idx)] = a
            out = dct(z, type=1, axis=axis) / 2.0
            idx[axis] = slice(1, M)
            return out[tuple(idx)]
        shape[axis] = M - 1
        z = np.zeros(shape)
        idx[axis] = slice(0, n)
        z[tuple(idx)] = a
        return dst(z, type=1, axis=axis) / 2.0

    def values(self, a: Array, dx: bool = False, dy: bool = False) -> Array:
        """Grid values of the field (or one first derivative) on interior points."""
        c = a
        if dx:
            c = c * self.kx[:, None]
        if dy:
            c = c * self.ky[None, :]
        g = self._synth(c, -2, dx)
        return self._synth(g, -1, dy)

    def project(self, g: Array) -> Array:
        """Sine-sine Galerkin coefficients of grid values (leading axes are batch axes)."""
        a = dst(g, type=1, axis=-2)[..., : self.Nx, :] / self.Mx
        return dst(a, type=1, axis=-1)[..., : self.Ny] / self.My

    def gradient(self, a: Array) -> Tuple[Array, Array]:
        return self.values(a, dx=True), self.values(a, dy=True)

    def jacobian(self, a: Array, b: Array) -> Array:
        """P J(a, b) for sine-sine coefficient arrays."""
        ax, ay = self.gradient(a)
        bx, by = self.gradient(b)
        return self.project(ax * by - ay * bx)

    def jacobian_grad(self, a: Array, bgrad: Tuple[Array, Array]) -> Array:
        ax, ay = self.gradient(a)
        bx, by = bgrad
        return self.project(ax * by - ay * bx)


def _int_sin(w: float) -> float:
    """int_0^pi sin(w t) dt."""
    if abs(w) < 1e-14:
        return 0.0
    return (1.0 - math.cos(w * math.pi)) / w


class Background:
    """Exact projections of products with the shear profile psi_e = cos y."""

    def __init__(self, cfg: ChannelConfig):
        self.cfg = cfg
        Nx, Ny = cfg.shape
        p = np.arange(1, Nx + 1)[:, None]
        m = np.arange(1, Nx + 1)[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            cx = (2.0 / np.pi) * p * (1.0 - (-1.0) ** (p + m)) / (p ** 2 - m ** 2)
        cx[p.repeat(Nx, 1) == m.repeat(Nx, 0)] = 0.0
        # P_x d/dx acting on sin(m x / L)
        self.Dx = cx * (m / cfg.L)
        W = cfg.W
        My = np.zeros((Ny, Ny))
        for n in range(1, Ny + 1):
            for q in range(1, Ny + 1):
                # (2/pi) int sin(W t) sin(q t) sin(n t) dt
                tot = 0.0
                for a, sgn in ((q - n, 1.0), (q + n, -1.0)):
                    tot += sgn * 0.5 * (_int_sin(W + a) + _int_sin(W - a))
                My[n - 1, q - 1] = (2.0 / np.pi) * 0.5 * tot
        self.My = My
        px = np.array([(2.0 / np.pi) * _int_sin(k) for k in range(1, Nx + 1)])
        py = np.array([(1.0 / np.pi) * (_int_sin(n + W) + _int_sin(n - W)) for n in range(1, Ny + 1)])
        # sine coefficients of cos y
        self.cos_y = px[:, None] * py[None, :]
        self.cos2_integral = cfg.L * math.pi * (W * math.pi / 2.0 + math.sin(2.0 * W * math.pi) / 4.0)

    def sin_y_dx(self, f: Array) -> Array:
        """P[sin(y) f_x]."""
        return self.Dx @ f @ self.My.T


# -- algebra ------------------------------------------------------------------

def fluid_algebra(cfg: ChannelConfig, grid: Optional[SpectralGrid] = None, name: str = "fluid") -> AlgebraDescriptor:
    """Truncated area-preserving vector fields, normalized coordinates."""
    grid = grid or SpectralGrid(cfg)
    c = cfg.c
    shape = cfg.shape
    mask = dealias_mask(cfg) if cfg.dealias else None

    def clip(a):
        return a * mask if mask is not None else a

    def bracket(u, v):
        out = -grid.jacobian(u.reshape(shape), v.reshape(shape)) / c
        return clip(out).ravel()

    def coadjoint(u, nu):
        out = grid.jacobian(u.reshape(shape), nu.reshape(shape)) / c
        return clip(out).ravel()

    basis = np.eye(cfg.size).reshape(cfg.size, *shape)

    def coadjoint_matrix(nu):
        out = grid.jacobian_grad(basis, grid.gradient(nu.reshape(shape))) / c
        return clip(out).reshape(cfg.size, cfg.size).T

    w = mean_vorticity_weights(cfg)
    casimirs = [
        Casimir("enstrophy", value=lambda p: float(p @ p), grad=lambda p: 2.0 * np.asarray(p),
                hess=lambda p: 2.0 * np.eye(p.size)),
        Casimir("mean_vorticity", value=lambda p: float(w @ p), grad=lambda p: w.copy(),
                hess=lambda p: np.zeros((p.size, p.size))),
    ]
    return AlgebraDescriptor(cfg.size, name, bracket=bracket, coadjoint=coadjoint,
                             casimirs=casimirs, exact_jacobi=False,
                             coadjoint_matrix=coadjoint_matrix)


def mean_vorticity_weights(cfg: ChannelConfig) -> Array:
    """int omega = w . p in normalized coordinates."""
    m = np.arange(1, cfg.Nx + 1)
    n = np.arange(1, cfg.Ny + 1)
    ix = cfg.L * (1.0 - (-1.0) ** m) / m
    iy = cfg.W * (1.0 - (-1.0) ** n) / n
    return (-(ix[:, None] * iy[None, :]) / cfg.c).ravel()


def vorticity_to_dual(cfg: ChannelConfig, omega_hat: Array) -> Array:
    return -cfg.c * np.asarray(omega_hat).ravel()


def dual_to_vorticity(cfg: ChannelConfig, p: Array) -> Array:
    return (-np.asarray(p) / cfg.c).reshape(cfg.shape)


def stream_to_element(cfg: ChannelConfig, psi_hat: Array) -> Array:
    return cfg.c * np.asarray(psi_hat).ravel()


def element_to_stream(cfg: ChannelConfig, q: Array) -> Array:
    return (np.asarray(q) / cfg.c).reshape(cfg.shape)


def l2_pairing(cfg: ChannelConfig, omega_hat: Array, psi_hat: Array) -> float:
    """<nu, u> = -int psi omega for sine coefficient arrays."""
    return -cfg.c2 * float(np.sum(omega_hat * psi_hat))


def advect(cfg: ChannelConfig, psi_hat: Array, omega_hat: Array, grid: Optional[SpectralGrid] = None) -> Array:
    """Sine coefficients of P(u . grad omega) = P J(psi, omega)."""
    grid = grid or SpectralGrid(cfg)
    out = grid.jacobian(psi_hat, omega_hat)
    return out * dealias_mask(cfg) if cfg.dealias else out


# -- system -------------------------------------------------------------------

def kaluza_klein(cfg: ChannelConfig, algebra: Optional[ProductAlgebra] = None) -> KaluzaKlein:
    n = cfg.size
    if algebra is None:
        grid = SpectralGrid(cfg)
        algebra = ProductAlgebra(fluid_algebra(cfg, grid, "d"), fluid_algebra(cfg, grid, "g"))
    mu0 = LinearMap(np.diag(k2(cfg).ravel()), symmetric=True, positive_definite=True)
    I0 = LinearMap(cfg.e ** 2 * np.eye(n), symmetric=True, positive_definite=True)
    A0 = LinearMap(-np.eye(n))
    return KaluzaKlein(mu0, I0, A0, algebra)


def gain_C(cfg: ChannelConfig, gamma: Optional[float] = None) -> Array:
    """C = 1 - mu0 Delta_gamma^{-1} Delta mu0^{-1}, diagonal 1 - k^2/k_gamma^2."""
    return np.diag((1.0 - k2(cfg) / k2_gamma(cfg, gamma)).ravel())


def build_mhd_system(cfg: ChannelConfig, gamma: Optional[float] = None, s: int = -1) -> ControlledSystem:
    """Controlled channel flow in space representation (orientation -1), G = 1."""
    kk = kaluza_klein(cfg)
    gains = GainSet(gain_C(cfg, gamma), np.eye(cfg.size), s=s, sign=-1)
    return ControlledSystem(kk, gains, DISSIPATIVE)


# -- shear equilibrium and perturbation model ---------------------------------

@dataclass(frozen=True)
class ShearEquilibrium:
    """u_e = (sin y, 0), psi_e = cos y, omega_e = -(1 - gamma) cos y, A_e = -(gamma/e)(sin y, 0)."""

    gamma: float
    e: float = 1.0

    def u_e(self, x, y):
        return np.sin(y) + 0.0 * x, 0.0 * x * y

    def psi_e(self, x, y):
        return np.cos(y) + 0.0 * x

    def omega_e(self, x, y):
        return -(1.0 - self.gamma) * np.cos(y) + 0.0 * x

    @property
    def A_e_coefficient(self) -> float:
        return -self.gamma / self.e


class ShearModel:
    """
    Closed loop linearized about nothing: the full nonlinear field for
    ``omega = omega_e + d_omega`` with the shear background kept analytic.

    State: sine coefficients ``d_omega`` (vorticity perturbation) and ``b``
    (vorticity of beta), flattened into one vector.  With ``controlled=False``
    the free Euler flow about ``psi_e = cos y, omega_e = -cos y`` is used.
    """

    def __init__(self, cfg: ChannelConfig, s: int = -1, controlled: bool = True,
                 background: float = 1.0):
        self.cfg = cfg
        self.s = s
        self.controlled = controlled
        self.grid = SpectralGrid(cfg)
        self.bg = Background(cfg)
        self.amp = background
        g = cfg.gamma if controlled else 0.0
        self.gamma = g
        self.K2 = k2(cfg)
        self.KG2 = k2_gamma(cfg, g) if controlled else self.K2
        self.e2 = cfg.e ** 2
        self.shape = cfg.shape
        self.n = cfg.size
        self.mask = dealias_mask(cfg) if cfg.dealias else None
        # omega_e = -(1 - g) psi_e with psi_e = amp cos y
        self.we = (1.0 - g) * self.amp

    def split(self, z: Array) -> Tuple[Array, Array]:
        return z[: self.n].reshape(self.shape), z[self.n:].reshape(self.shape)

    def _transport(self, psi: Array, omega_grad, dw: Array) -> Array:
        """P J(psi_e + psi, omega_e + dw) with psi sine-series."""
        out = self.grid.jacobian_grad(psi, omega_grad)
        if self.amp:
            # J(psi_e, dw) = sin y dw_x ;  J(psi, omega_e) = (1 - g) sin y psi_x
            out = out + self.amp * self.bg.sin_y_dx(dw) + self.we * self.bg.sin_y_dx(psi)
        return out if self.mask is None else out * self.mask

    def parts(self, z: Array):
        dw, b = self.split(z)
        wg = self.grid.gradient(dw)
        psi_c = -dw / self.KG2
        if not self.controlled:
            return dw, b, wg, psi_c, np.zeros_like(dw)
        jp = self._transport(psi_c, wg, dw)
        N = self.s * self.e2 * jp / self.K2
        return dw, b, wg, psi_c, N

    def field(self, t: float, z: Array) -> Array:
        dw, b, wg, psi_c, N = self.parts(z)
        if not self.controlled:
            dwdot = -self._transport(psi_c, wg, dw)
            return np.concatenate([dwdot.ravel(), np.zeros(self.n)])
        psi = psi_c - b / self.K2 + N / self.K2
        dwdot = -self._transport(psi, wg, dw)
        bdot = -b - N
        return np.concatenate([dwdot.ravel(), bdot.ravel()])

    def n_map(self, z: Array) -> Array:
        return self.parts(z)[4]

    # -- monitors -------------------------------------------------------
    def l_c(self, z: Array) -> float:
        return l_c_eval(self, z)

    def enstrophy(self, z: Array) -> float:
        """int (omega_e + d_omega)^2 with the background integrals done exactly."""
        dw, _ = self.split(z)
        c2 = self.cfg.c2
        we = -self.we
        return (we ** 2 * self.bg.cos2_integral
                + 2.0 * we * c2 * float(np.sum(self.bg.cos_y * dw))
                + c2 * float(np.sum(dw * dw)))

    def perturbation_energy(self, z: Array) -> float:
        """1/2 int |grad d_psi|^2 with the unshaped Laplacian."""
        dw, _ = self.split(z)
        return 0.5 * self.cfg.c2 * float(np.sum(dw * dw / self.K2))

    def norm_N(self, z: Array) -> float:
        N = self.n_map(z)
        return math.sqrt(self.cfg.c2 * float(np.sum(N * N)) / self.e2)

    def norm_b(self, z: Array) -> float:
        _, b = self.split(z)
        return math.sqrt(self.cfg.c2 * float(np.sum(b * b)) / self.e2)

    def h1_norm2(self, z: Array) -> float:
        """int |grad d_psi|^2 + int d_omega^2 (Laplacian-weighted H1 choice)."""
        dw, _ = self.split(z)
        return self.cfg.c2 * float(np.sum(dw * dw * (1.0 + 1.0 / self.K2)))


def l_c_eval(model: ShearModel, z: Array) -> float:
    """
    L_C = -g_C - K_C + g_C(nu_e, 0) + K_C(nu_e) with
    K_C = -1/(2(1 - gamma)) int omega^2.

    The cross terms with the background are evaluated explicitly.
    """
    cfg = model.cfg
    g = model.gamma
    c2 = cfg.c2
    dw, b = model.split(z)
    psi_e_dw = model.amp * c2 * float(np.sum(model.bg.cos_y * dw))  # int psi_e d_omega
    omega_e_dw = -model.we / model.amp * psi_e_dw if model.amp else 0.0  # int omega_e d_omega
    # g_C(nu) - g_C(nu_e) = -int psi_e d_omega + 1/2 <d_nu, mu_C^-1 d_nu> + s/(2e^2) int b^2
    dg = -psi_e_dw + 0.5 * c2 * float(np.sum(dw * dw / model.KG2)) \
        + 0.5 * model.s / model.e2 * c2 * float(np.sum(b * b))
    dk = -(2.0 * omega_e_dw + c2 * float(np.sum(dw * dw))) / (2.0 * (1.0 - g))
    return -dg - dk


def l_c_lower_bound(cfg: ChannelConfig, model: ShearModel, z: Array) -> float:
    """Quadratic lower bound margin/(2 lambda1(gamma)) int d_omega^2 - s/(2e^2) int b^2."""
    dw, b = model.split(z)
    return (0.5 * stability_margin(cfg) / lambda1_gamma(cfg) * cfg.c2 * float(np.sum(dw * dw))
            - model.s / model.e2 * 0.5 * cfg.c2 * float(np.sum(b * b)))


def single_mode(cfg: ChannelConfig, m: int = 1, n: int = 1, amplitude: float = 1e-2) -> Array:
    a = np.zeros(cfg.shape)
    a[m - 1, n - 1] = amplitude
    return a


def _ratio(a: float, b: float) -> float:
    return float(a / b) if b > 0 else float("nan")


def scenario_shear(cfg: ChannelConfig = ChannelConfig(), amplitude: float = 1e-2, mode=(1, 1),
                   horizon: float = 50.0, step: float = 1e-3, s: int = -1,
                   monitor_stride: int = 10, run_uncontrolled: bool = True) -> ScenarioReport:
    """
    Controlled shear flow with a single-mode vorticity perturbation.

    Runs the closed loop at ``cfg.gamma`` and, for comparison, the free
    flow at gamma = 0.
    """
    margin = stability_margin(cfg)
    rep = ScenarioReport("mhd", params={**asdict(cfg), "amplitude": amplitude, "mode": list(mode),
                                        "horizon": horizon, "step": step, "s": s,
                                        "h1_norm": "int |grad psi|^2 + int omega^2 (Laplacian weight)"})
    rep.metrics["stability_margin"] = margin
    rep.metrics["uncontrolled_margin"] = uncontrolled_margin(cfg)
    rep.metrics["lambda1_gamma"] = lambda1_gamma(cfg)
    if margin <= 0 or s != -1:
        rep.notes["certificate"] = "no Lyapunov certificate"
    else:
        rep.notes["certificate"] = "L_C negative-definite second variation"

    dw0 = single_mode(cfg, *mode, amplitude)
    z0 = np.concatenate([dw0.ravel(), np.zeros(cfg.size)])
    icfg = IntegratorConfig("rk4", step, horizon, monitor_stride)

    model = ShearModel(cfg, s=s, controlled=True)
    mon = {
        "L_C": model.l_c,
        "enstrophy": model.enstrophy,
        "norm_N": model.norm_N,
        "norm_b": model.norm_b,
        "energy": model.perturbation_energy,
        "sup_domega": lambda z: float(np.max(np.abs(z[: cfg.size]))),
    }
    tr = integrate(model.field, z0, icfg, mon, chart="z")
    rep.trajectories["controlled"] = tr
    L = tr.monitors["L_C"]
    scale = max(abs(float(L[0])), 1e-300)
    viol = int(np.sum(np.diff(L) > 1e-10 * scale))
    Z = tr.monitors["enstrophy"]
    drift = float(np.max(np.abs(Z - Z[0])) / abs(Z[0]))
    rep.metrics.update(
        L_C_initial=float(L[0]),
        L_C_final=float(L[-1]),
        L_C_violations=viol,
        enstrophy_relative_drift=drift,
        terminal_norm_N=float(tr.monitors["norm_N"][-1]),
        terminal_norm_b=float(tr.monitors["norm_b"][-1]),
        sup_domega_max=float(np.max(tr.monitors["sup_domega"])),
        controlled_energy_ratio=_ratio(tr.monitors["energy"][-1], tr.monitors["energy"][0]),
    )
    rep.verdicts["controlled_bounded"] = not tr.blew_up
    rep.verdicts["L_C_monotone"] = viol == 0
    rep.verdicts["enstrophy_drift_below_1e-6"] = drift < 1e-6
    rep.verdicts["terminal_N_below_1e-4"] = rep.metrics["terminal_norm_N"] < 1e-4
    rep.verdicts["terminal_b_below_1e-4"] = rep.metrics["terminal_norm_b"] < 1e-4

    if run_uncontrolled:
        free = ShearModel(replace(cfg, gamma=0.0), s=s, controlled=False)
        tf = integrate(free.field, z0, icfg, {"energy": free.perturbation_energy}, chart="x")
        rep.trajectories["uncontrolled"] = tf
        E = tf.monitors["energy"]
        growth = _ratio(np.max(E), E[0])
        rep.metrics["uncontrolled_energy_growth"] = growth
        rep.verdicts["uncontrolled_growth_at_least_2"] = growth >= 2.0
    return rep


# -- snapshots ----------------------------------------------------------------

def grid_values(cfg: ChannelConfig, coeffs: Array) -> Array:
    """Values on the Nx x Ny interior grid x_i = i L pi/(Nx+1), y_j = j W pi/(Ny+1)."""
    a = dst(np.asarray(coeffs, float), type=1, axis=0) / 2.0
    return dst(a, type=1, axis=1) / 2.0


def export_snapshot(path, cfg: ChannelConfig, coeffs: Array, t: float, gamma: Optional[float] = None) -> None:
    """Write grid values row-major (row = x index) under a header 'Nx Ny L W gamma t'."""
    g = cfg.gamma if gamma is None else gamma
    vals = grid_values(cfg, coeffs)
    header = f"{cfg.Nx} {cfg.Ny} {cfg.L!r} {cfg.W!r} {g!r} {t!r}"
    np.savetxt(path, vals, header=header, comments="", fmt="%.17g")


def read_snapshot(path):
    with open(path) as fh:
        head = fh.readline().split()
    nx, ny = int(head[0]), int(head[1])
    meta = dict(Nx=nx, Ny=ny, L=float(head[2]), W=float(head[3]), gamma=float(head[4]), t=float(head[5]))
    vals = np.loadtxt(path, skiprows=1, ndmin=2)
    return meta, vals.reshape(nx, ny)


# -- dense quadrature oracle --------------------------------------------------

def _gauss(n_nodes: int, length: float):
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    return 0.5 * length * (t + 1.0), 0.5 * length * w


def galerkin_bracket_oracle(cfg: ChannelConfig, nodes: Optional[int] = None) -> Array:
    """
    Dense tensor T[k, i, j] = int phi_k J(phi_i, phi_j) / c^2 by Gauss-Legendre
    quadrature, modes flattened row-major over (m, n).
    """
    Nx, Ny = cfg.shape
    L, W = cfg.L, cfg.W
    qx = nodes or 4 * Nx + 40
    qy = nodes or 4 * Ny + 40
    x, wx = _gauss(qx, L * math.pi)
    y, wy = _gauss(qy, W * math.pi)
    m = np.arange(1, Nx + 1)[:, None]
    n = np.arange(1, Ny + 1)[:, None]
    sx, dsx = np.sin(m * x / L), (m / L) * np.cos(m * x / L)
    sy, dsy = np.sin(n * y / W), (n / W) * np.cos(n * y / W)
    # X1[a,b,c] = int sx_a dsx_b sx_c ; X2 = int sx_a sx_b dsx_c
    X1 = np.einsum("aq,bq,cq,q->abc", sx, dsx, sx, wx)
    X2 = np.einsum("aq,bq,cq,q->abc", sx, sx, dsx, wx)
    Y1 = np.einsum("aq,bq,cq,q->abc", sy, sy, dsy, wy)
    Y2 = np.einsum("aq,bq,cq,q->abc", sy, dsy, sy, wy)
    # axes ordered (mk, nk, mi, ni, mj, nj)
    T = np.einsum("kac,lbd->klabcd", X1, Y1) - np.einsum("kac,lbd->klabcd", X2, Y2)
    T = T.reshape(Nx * Ny, Nx * Ny, Nx * Ny)
    return T / cfg.c2


def background_oracle(cfg: ChannelConfig, nodes: Optional[int] = None) -> Array:
    """Dense matrix S with (P[sin(y) f_x])_k = S[k, j] f_j, by quadrature."""
    Nx, Ny = cfg.shape
    L, W = cfg.L, cfg.W
    x, wx = _gauss(nodes or 4 * Nx + 40, L * math.pi)
    y, wy = _gauss(nodes or 4 * Ny + 40, W * math.pi)
    m = np.arange(1, Nx + 1)[:, None]
    n = np.arange(1, Ny + 1)[:, None]
    sx, dsx = np.sin(m * x / L), (m / L) * np.cos(m * x / L)
    sy = np.sin(n * y / W)
    Ax = np.einsum("aq,bq,q->ab", sx, dsx, wx) * (2.0 / (L * math.pi))
    Ay = np.einsum("aq,q,bq,q->ab", sy, np.sin(y), sy, wy) * (2.0 / (W * math.pi))
    return np.kron(Ax, Ay)


def cos_y_oracle(cfg: ChannelConfig, nodes: Optional[int] = None) -> Array:
    Nx, Ny = cfg.shape
    L, W = cfg.L, cfg.W
    x, wx = _gauss(nodes or 4 * Nx + 40, L * math.pi)
    y, wy = _gauss(nodes or 4 * Ny + 40, W * math.pi)
    m = np.arange(1, Nx + 1)[:, None]
    n = np.arange(1, Ny + 1)[:, None]
    cx = (np.sin(m * x / L) @ wx) * (2.0 / (L * math.pi))
    cy = (np.sin(n * y / W) @ (wy * np.cos(y))) * (2.0 / (W * math.pi))
    return np.outer(cx, cy)


class DenseOracle:
    """
    Operator-composition reference for the closed loop, built from dense
    matrices and the quadrature bracket tensor.  Works in physical sine
    coefficients (vorticity for duals, stream function for elements).
    """

    def __init__(self, cfg: ChannelConfig, s: int = -1, gamma: Optional[float] = None):
        self.cfg = cfg
        self.s = s
        g = cfg.gamma if gamma is None else gamma
        self.gamma = g
        n = cfg.size
        self.T = galerkin_bracket_oracle(cfg)
        self.S = background_oracle(cfg)
        self.cos_y = cos_y_oracle(cfg).ravel()
        k = k2(cfg).ravel()
        kg = k2_gamma(cfg, g).ravel()
        e2 = cfg.e ** 2
        # maps on physical coefficients
        self.mu0 = np.diag(-k)              # psi -> omega
        self.muC = np.diag(-kg)
        self.I0 = -e2 * np.eye(n)          # stream of X -> vorticity of alpha
        self.A0 = -np.eye(n)
        self.sign = -1

    def J(self, a: Array, b: Array) -> Array:
        return np.einsum("kij,i,j->k", self.T, a, b)

    def coad(self, psi: Array, omega: Array) -> Array:
        return self.J(psi, omega)

    def n_map(self, omega: Array) -> Array:
        psi_c = np.linalg.solve(self.muC, omega)
        c = self.coad(psi_c, omega)
        # I0 A0 mu0^{-1}; the pairing sign cancels between A0^T and A0
        return self.sign * self.s * (self.I0 @ self.A0 @ np.linalg.solve(self.mu0, c))

    def field_z(self, omega: Array, b: Array) -> Tuple[Array, Array]:
        """Direct expansion in physical coefficients, no background."""
        N = self.n_map(omega)
        B = lambda v: np.linalg.solve(self.mu0, self.A0.T @ v)
        psi_c = np.linalg.solve(self.muC, omega)
        sg = self.sign
        a = sg * self.coad(psi_c, omega) - sg * self.coad(B(b), omega) + sg * self.coad(B(N), omega)
        return a, -b - N

    def shear_field(self, dw: Array, b: Array, controlled: bool = True) -> Tuple[Array, Array]:
        """Perturbation field about psi_e = cos y built from dense matrices."""
        g = self.gamma if controlled else 0.0
        we = 1.0 - g
        k = k2(self.cfg).ravel()
        kg = k2_gamma(self.cfg, g).ravel() if controlled else k
        psi_c = -dw / kg

        def transport(psi):
            return self.J(psi, dw) + self.S @ dw + we * (self.S @ psi)

        if not controlled:
            return -transport(psi_c), np.zeros_like(b)
        N = self.s * self.cfg.e ** 2 * transport(psi_c) / k
        psi = psi_c - b / k + N / k
        return -transport(psi), -b - N
