"""
Finite-dimensional (or truncated) Lie algebras and linear maps between them.

Elements of an algebra and of its dual are stored as real coordinate
vectors with respect to a basis and its dual basis, so the pairing is the
plain Euclidean contraction.  The adjoint of a linear map with respect to the
pairing is then its matrix transpose.

Sign convention for the coadjoint action: ``coad(u, nu)`` is defined by
``<coad(u, nu), w> = <nu, ad(u, w)>``.  For so(3) with ``ad(u, v) = u x v``
this gives ``coad(u, nu) = -u x nu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

Array = np.ndarray


class DimensionError(ValueError):
    """Raised when a vector does not match the dimension of its algebra."""


@dataclass(frozen=True)
class Casimir:
    """A named function on the dual with its gradient and Hessian."""

    name: str
    value: Callable[[Array], float]
    grad: Callable[[Array], Array]
    hess: Optional[Callable[[Array], Array]] = None


class AlgebraDescriptor:
    """
    A Lie algebra given by structure constants or by callables.

    Parameters
    ----------
    dim : int
        Dimension of the (possibly truncated) algebra.
    name : str
        Label used in reports.
    structure_constants : ndarray, optional
        Tensor ``c[k, i, j]`` with ``[e_i, e_j] = c[k, i, j] e_k``.
    bracket, coadjoint : callable, optional
        Used instead of structure constants for large algebras.  Both must be
        given together.
    coadjoint_matrix : callable, optional
        ``nu -> M`` with ``M @ u = coad(u, nu)``; a batched shortcut for
        callable algebras.
    casimirs : iterable of Casimir, optional
    exact_jacobi : bool
        False for truncated algebras where the Jacobi identity only holds up
        to truncation error.
    """

    def __init__(
        self,
        dim: int,
        name: str,
        structure_constants: Optional[Array] = None,
        bracket: Optional[Callable[[Array, Array], Array]] = None,
        coadjoint: Optional[Callable[[Array, Array], Array]] = None,
        casimirs=(),
        exact_jacobi: bool = True,
        coadjoint_matrix: Optional[Callable[[Array], Array]] = None,
    ):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self.name = name
        self.exact_jacobi = exact_jacobi
        self.casimirs: Dict[str, Casimir] = {c.name: c for c in casimirs}
        self._coad_matrix = coadjoint_matrix
        if structure_constants is not None:
            c = np.asarray(structure_constants, dtype=float)
            if c.shape != (dim, dim, dim):
                raise DimensionError("structure constants must have shape (dim, dim, dim)")
            self.structure_constants = c
            self._bracket = lambda u, v: np.einsum("kij,i,j->k", c, u, v)
            self._coad = lambda u, nu: np.einsum("kij,k,i->j", c, nu, u)
        elif bracket is not None and coadjoint is not None:
            self.structure_constants = None
            self._bracket = bracket
            self._coad = coadjoint
        else:
            raise ValueError("need structure constants or both bracket and coadjoint callables")

    @property
    def is_abelian(self) -> bool:
        c = self.structure_constants
        return c is not None and not np.any(c)

    def check(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"{self.name}: expected length {self.dim}, got {x.shape[-1]}")
        return x

    def ad(self, u: Array, v: Array) -> Array:
        return self._bracket(self.check(u), self.check(v))

    def coad(self, u: Array, nu: Array) -> Array:
        return self._coad(self.check(u), self.check(nu))

    def coad_matrix(self, nu: Array) -> Array:
        """Matrix of u -> coad(u, nu)."""
        nu = self.check(nu)
        if self.structure_constants is not None:
            return np.einsum("kij,k->ji", self.structure_constants, nu)
        if self._coad_matrix is not None:
            return self._coad_matrix(nu)
        eye = np.eye(self.dim)
        return np.stack([self._coad(eye[i], nu) for i in range(self.dim)], axis=1)

    def pairing(self, nu: Array, u: Array) -> float:
        return float(np.dot(self.check(nu), self.check(u)))

    def casimir(self, name: str, nu: Array) -> float:
        try:
            return float(self.casimirs[name].value(self.check(nu)))
        except KeyError:
            raise KeyError(f"{self.name} has no Casimir named {name!r}") from None

    def jacobi_residual(self) -> float:
        """Largest Jacobi defect over all basis triples."""
        eye = np.eye(self.dim)
        worst = 0.0
        for i in range(self.dim):
            for j in range(self.dim):
                for k in range(self.dim):
                    a, b, c = eye[i], eye[j], eye[k]
                    r = (self.ad(a, self.ad(b, c)) + self.ad(b, self.ad(c, a))
                         + self.ad(c, self.ad(a, b)))
                    worst = max(worst, float(np.max(np.abs(r))))
        return worst

    def antisymmetry_residual(self) -> float:
        eye = np.eye(self.dim)
        return max(
            float(np.max(np.abs(self.ad(eye[i], eye[j]) + self.ad(eye[j], eye[i]))))
            for i in range(self.dim) for j in range(self.dim)
        )

    def __repr__(self) -> str:
        return f"AlgebraDescriptor({self.name!r}, dim={self.dim})"


@dataclass(frozen=True)
class DualElement:
    """Coordinates of an element of the dual algebra."""

    coeffs: Array
    algebra: AlgebraDescriptor

    def __post_init__(self):
        object.__setattr__(self, "coeffs", self.algebra.check(self.coeffs))


def ad(desc: AlgebraDescriptor, u, v) -> Array:
    return desc.ad(u, v)


def coad(desc: AlgebraDescriptor, u, nu) -> Array:
    if isinstance(nu, DualElement):
        return desc.coad(u, nu.coeffs)
    return desc.coad(u, nu)


def pairing(nu, u, desc: Optional[AlgebraDescriptor] = None) -> float:
    if isinstance(nu, DualElement):
        return nu.algebra.pairing(nu.coeffs, u)
    if desc is not None:
        return desc.pairing(nu, u)
    return float(np.dot(nu, u))


def casimir_eval(desc: AlgebraDescriptor, name: str, nu) -> float:
    if isinstance(nu, DualElement):
        nu = nu.coeffs
    return desc.casimir(name, nu)


def so3() -> AlgebraDescriptor:
    """so(3) identified with R^3 and the cross product."""
    c = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        c[k, i, j] = 1.0
        c[k, j, i] = -1.0
    norm = Casimir(
        "norm2",
        value=lambda nu: 0.5 * float(nu @ nu),
        grad=lambda nu: np.array(nu, dtype=float),
        hess=lambda nu: np.eye(3),
    )
    return AlgebraDescriptor(3, "so3", structure_constants=c, casimirs=[norm])


def abelian(dim: int = 1) -> AlgebraDescriptor:
    return AlgebraDescriptor(dim, f"R^{dim}", structure_constants=np.zeros((dim, dim, dim)))


def random_structure_constants(dim: int, rng: np.random.Generator) -> Array:
    """Random antisymmetric structure constants (Jacobi not enforced)."""
    c = rng.standard_normal((dim, dim, dim))
    return c - np.swapaxes(c, 1, 2)


class LinearMap:
    """
    A dense linear map between algebras or duals.

    ``symmetric`` and ``positive_definite`` are declared flags, verified on
    demand by :meth:`verify`.
    """

    def __init__(self, matrix, symmetric: bool = False, positive_definite: bool = False,
                 source: str = "", target: str = ""):
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.matrix = m
        self.symmetric = symmetric
        self.positive_definite = positive_definite
        self.source = source
        self.target = target

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def __call__(self, x: Array) -> Array:
        return self.matrix @ x

    def __matmul__(self, other):
        if isinstance(other, LinearMap):
            return LinearMap(self.matrix @ other.matrix, source=other.source, target=self.target)
        return self.matrix @ other

    @property
    def T(self) -> "LinearMap":
        return LinearMap(self.matrix.T, self.symmetric, self.positive_definite,
                         source=self.target, target=self.source)

    def inverse(self) -> "LinearMap":
        return LinearMap(np.linalg.inv(self.matrix), self.symmetric, self.positive_definite,
                         source=self.target, target=self.source)

    def solve(self, y: Array) -> Array:
        return np.linalg.solve(self.matrix, y)

    def symmetry_residual(self) -> float:
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            return np.inf
        return float(np.max(np.abs(m - m.T))) if m.size else 0.0

    def min_eigenvalue(self) -> float:
        m = self.matrix
        return float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())

    def verify(self, sym_tol: float = 1e-12, eig_tol: float = 0.0) -> bool:
        ok = True
        if self.symmetric or self.positive_definite:
            ok &= self.symmetry_residual() < sym_tol * max(1.0, np.abs(self.matrix).max())
        if self.positive_definite:
            ok &= self.min_eigenvalue() > eig_tol
        return bool(ok)

    def __repr__(self) -> str:
        return f"LinearMap({self.source}->{self.target}, shape={self.shape})"


def as_map(x, **kw) -> LinearMap:
    return x if isinstance(x, LinearMap) else LinearMap(x, **kw)


class ProductAlgebra:
    """Direct product d x g; brackets do not mix the factors."""

    def __init__(self, d: AlgebraDescriptor, g: AlgebraDescriptor):
        self.d = d
        self.g = g

    @property
    def dim(self) -> int:
        return self.d.dim + self.g.dim

    def split(self, z: Array) -> Tuple[Array, Array]:
        z = np.asarray(z, dtype=float)
        return z[..., : self.d.dim], z[..., self.d.dim:]

    def join(self, a: Array, b: Array) -> Array:
        return np.concatenate([np.atleast_1d(a), np.atleast_1d(b)], axis=-1)

    def ad(self, u: Array, v: Array) -> Array:
        u1, u2 = self.split(u)
        v1, v2 = self.split(v)
        return self.join(self.d.ad(u1, v1), self.g.ad(u2, v2))

    def coad(self, u: Array, nu: Array) -> Array:
        u1, u2 = self.split(u)
        n1, n2 = self.split(nu)
        return self.join(self.d.coad(u1, n1), self.g.coad(u2, n2))
