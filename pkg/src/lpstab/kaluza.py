"""
Kaluza-Klein metric data on d x g and the free Lie-Poisson vector field.

The block metric is

    [[mu0 + A0^T I0 A0, A0^T I0],
     [I0 A0,            I0     ]]

and its inverse is applied through the closed-form legs
``u = mu0^{-1}(nu - A0^T alpha)``, ``X = I0^{-1} alpha - A0 u``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .algebra import DimensionError, LinearMap, ProductAlgebra, as_map

Array = np.ndarray


@dataclass(frozen=True)
class KaluzaKlein:
    """The triple (mu0, I0, A0) plus the product algebra it lives on."""

    mu0: LinearMap
    I0: LinearMap
    A0: LinearMap
    algebra: Optional[ProductAlgebra] = None

    def __post_init__(self):
        for name in ("mu0", "I0", "A0"):
            object.__setattr__(self, name, as_map(getattr(self, name)))
        nd, ng = self.dims
        if self.mu0.shape != (nd, nd) or self.I0.shape != (ng, ng):
            raise DimensionError("mu0 and I0 must be square")
        if self.algebra is not None and (self.algebra.d.dim, self.algebra.g.dim) != (nd, ng):
            raise DimensionError("metric and algebra dimensions differ")

    @property
    def dims(self) -> Tuple[int, int]:
        ng, nd = self.A0.shape
        return nd, ng

    def block_metric(self) -> Array:
        m, i, a = self.mu0.matrix, self.I0.matrix, self.A0.matrix
        return np.block([[m + a.T @ i @ a, a.T @ i], [i @ a, i]])

    def block_inverse(self) -> Array:
        """Displayed block form of the inverse metric."""
        mi = np.linalg.inv(self.mu0.matrix)
        ii = np.linalg.inv(self.I0.matrix)
        a = self.A0.matrix
        return np.block([[mi, -mi @ a.T], [-a @ mi, ii + a @ mi @ a.T]])

    def is_positive_definite(self) -> bool:
        b = self.block_metric()
        return bool(np.max(np.abs(b - b.T)) < 1e-12 * max(1.0, np.abs(b).max())
                    and np.linalg.eigvalsh(0.5 * (b + b.T)).min() > 0)


def metric_apply(kk: KaluzaKlein, u: Array, X: Array) -> Tuple[Array, Array]:
    """(nu, alpha) = mu0^P (u, X)."""
    ia = kk.I0 @ (kk.A0 @ u + X)
    return kk.mu0 @ u + kk.A0.matrix.T @ ia, ia


def metric_solve(kk: KaluzaKlein, nu: Array, alpha: Array) -> Tuple[Array, Array]:
    """(u, X) = (mu0^P)^{-1} (nu, alpha) via the closed-form legs."""
    u = kk.mu0.solve(nu - kk.A0.matrix.T @ alpha)
    X = kk.I0.solve(alpha) - kk.A0 @ u
    return u, X


def h0_eval(kk: KaluzaKlein, nu: Array, alpha: Array) -> float:
    u, X = metric_solve(kk, nu, alpha)
    return 0.5 * (float(np.dot(nu, u)) + float(np.dot(alpha, X)))


def free_lp_field(kk: KaluzaKlein, sign: int, nu: Array, alpha: Array) -> Tuple[Array, Array]:
    """Free Lie-Poisson field nu' = sign ad(u)* nu, alpha' = sign ad(X)* alpha."""
    if kk.algebra is None:
        raise ValueError("KaluzaKlein has no algebra attached")
    u, X = metric_solve(kk, nu, alpha)
    return sign * kk.algebra.d.coad(u, nu), sign * kk.algebra.g.coad(X, alpha)
