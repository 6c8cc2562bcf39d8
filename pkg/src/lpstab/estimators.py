"""
scikit-learn style wrappers around the closed-loop systems.

``fit`` assembles the controlled system from the constructor parameters,
``transform`` maps rows ``(nu, alpha)`` to ``(nu, beta)``, ``inverse_transform``
maps back and ``predict`` returns the closed-loop vector field at rows
``(nu, beta)``.  No data is learned; ``fit`` ignores its arguments apart
from validating their width.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import mhd2d, satellite
from .closed_loop import DISSIPATIVE, g_c_eval, ida_field_z, phi_forward, phi_inverse


class _ClosedLoopBase(TransformerMixin, BaseEstimator):
    def _build(self):
        raise NotImplementedError

    def fit(self, X=None, y=None):
        self.system_ = self._build()
        self.n_features_in_ = self.system_.algebra.dim
        if X is not None:
            self._check(X)
        return self

    def _check(self, X):
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return X

    def _rows(self, X, fn):
        check_is_fitted(self, "system_")
        X = self._check(X)
        sys = self.system_
        nd = sys.d.dim
        return np.array([np.concatenate(fn(sys, row[:nd], row[nd:])) for row in X])

    def transform(self, X):
        """(nu, alpha) -> (nu, beta)."""
        return self._rows(X, phi_forward)

    def inverse_transform(self, X):
        """(nu, beta) -> (nu, alpha)."""
        return self._rows(X, phi_inverse)

    def predict(self, X):
        """Closed-loop field (nu', beta') at rows (nu, beta)."""
        return self._rows(X, ida_field_z)

    def energy(self, X):
        """g_C at rows (nu, beta)."""
        check_is_fitted(self, "system_")
        X = self._check(X)
        nd = self.system_.d.dim
        return np.array([g_c_eval(self.system_, r[:nd], r[nd:]) for r in X])


class SatelliteClosedLoop(_ClosedLoopBase):
    """Rotor satellite with double-bracket feedback; 4 columns (nu1, nu2, nu3, beta)."""

    def __init__(self, lambda1=1.0, lambda2=2.0, I3=3.0, i3=1.0, k=2.0, s=1, mode=DISSIPATIVE):
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.I3 = I3
        self.i3 = i3
        self.k = k
        self.s = s
        self.mode = mode

    def _build(self):
        p = satellite.SatelliteParams(self.lambda1, self.lambda2, self.I3, self.i3, self.k)
        return satellite.build_satellite(p, self.mode, self.s)


class ChannelClosedLoop(_ClosedLoopBase):
    """
    Truncated MHD channel; columns are normalized dual coordinates
    ``p = -c omega_hat`` for nu and beta, each ``Nx * Ny`` long.
    """

    def __init__(self, L=2.0, W=2.0, gamma=0.8, e=1.0, Nx=8, Ny=8, s=-1):
        self.L = L
        self.W = W
        self.gamma = gamma
        self.e = e
        self.Nx = Nx
        self.Ny = Ny
        self.s = s

    def _build(self):
        cfg = mhd2d.ChannelConfig(self.L, self.W, self.gamma, self.e, self.Nx, self.Ny)
        return mhd2d.build_mhd_system(cfg, s=self.s)
