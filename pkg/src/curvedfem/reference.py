"""Reference simplex: Lagrange bases and collapsed Gauss-Jacobi quadrature.

The reference simplex has vertices ``0, e_1, ..., e_dim``.  Barycentric
coordinates are ordered ``(lambda_0, ..., lambda_dim)`` with
``lambda_0 = 1 - sum(xhat)`` and ``lambda_i = xhat_i``.
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import UnsupportedDegree, UnsupportedOrder

__all__ = [
    "LagrangeBasis",
    "QuadratureRule",
    "lagrange_nodes",
    "lagrange_basis",
    "quadrature",
    "composite_quadrature",
    "eval_basis",
    "eval_basis_grad",
    "barycentric",
    "reference_vertices",
    "volume_order",
    "surface_order",
]

MAX_DEGREE = 10
MAX_ORDER = 20


def reference_vertices(dim):
    return np.vstack([np.zeros(dim), np.eye(dim)])


def barycentric(xhat):
    xhat = np.asarray(xhat, dtype=float)
    return np.concatenate([1.0 - xhat.sum(axis=-1, keepdims=True), xhat], axis=-1)


def _entity_key(alpha):
    # vertices first, then edges, then faces, then the interior; inside a
    # group, by sorted support and then lexicographically
    support = tuple(i for i, a in enumerate(alpha) if a > 0)
    return (len(support), support, tuple(-a for a in alpha))


@lru_cache(maxsize=None)
def _multi_indices(dim, k):
    if dim not in (1, 2, 3):
        raise ValueError("dim must be 1, 2 or 3")
    if k < 1 or k > MAX_DEGREE:
        raise UnsupportedDegree(f"Lagrange degree {k} outside 1..{MAX_DEGREE}")
    alphas = [
        a for a in itertools.product(range(k + 1), repeat=dim + 1) if sum(a) == k
    ]
    alphas.sort(key=_entity_key)
    return np.array(alphas, dtype=np.int64)


def lagrange_nodes(dim, k):
    """Equispaced ``P^k`` nodes as barycentric tuples, shape ``(n, dim + 1)``.

    Nodes are grouped by the sub-entity they belong to: vertices, then edge
    nodes, then face nodes, then interior nodes.
    """
    return _multi_indices(dim, k) / float(k)


class LagrangeBasis:
    """Nodal ``P^k`` basis on the reference simplex.

    Shape function ``alpha`` is the classical product
    ``prod_i prod_{j < alpha_i} (k lambda_i - j) / (j + 1)``, which equals one
    at node ``alpha / k`` and vanishes at every other lattice node.
    """

    def __init__(self, dim, k):
        self.dim = dim
        self.k = k
        self.alphas = _multi_indices(dim, k)
        self.nodes = self.alphas / float(k)
        self.points = self.nodes[:, 1:]
        self.size = len(self.alphas)

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"LagrangeBasis(dim={self.dim}, k={self.k})"

    def _factors(self, lam):
        # P_m(t) = prod_{j<m} (k t - j)/(j+1) and its derivative, m = 0..k
        k = self.k
        shape = lam.shape + (k + 1,)
        val = np.ones(shape)
        der = np.zeros(shape)
        for m in range(1, k + 1):
            fac = (k * lam - (m - 1)) / m
            der[..., m] = der[..., m - 1] * fac + val[..., m - 1] * (k / m)
            val[..., m] = val[..., m - 1] * fac
        return val, der

    def eval(self, xhat):
        """Shape function values, shape ``(npts, size)``."""
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        lam = barycentric(xhat)
        val, _ = self._factors(lam)
        cols = np.arange(self.dim + 1)
        # (npts, size, dim+1) -> product over barycentric slots
        return val[:, cols[None, :], self.alphas].prod(axis=-1)

    def grad(self, xhat):
        """Reference gradients, shape ``(npts, size, dim)``."""
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        lam = barycentric(xhat)
        val, der = self._factors(lam)
        cols = np.arange(self.dim + 1)
        v = val[:, cols[None, :], self.alphas]
        d = der[:, cols[None, :], self.alphas]
        nslot = self.dim + 1
        dlam = np.empty(v.shape)
        for i in range(nslot):
            others = [j for j in range(nslot) if j != i]
            dlam[..., i] = d[..., i] * v[..., others].prod(axis=-1)
        # d lambda_0 / d xhat_j = -1, d lambda_i / d xhat_j = delta_ij
        return dlam[..., 1:] - dlam[..., :1]


@lru_cache(maxsize=None)
def lagrange_basis(dim, k):
    return LagrangeBasis(dim, k)


def eval_basis(basis, xhat):
    return basis.eval(xhat)


def eval_basis_grad(basis, xhat):
    return basis.grad(xhat)


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference simplex.

    ``points`` are reference coordinates of shape ``(n, dim)``; the weights
    sum to the simplex measure ``1 / dim!``.
    """

    dim: int
    order: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def barycentric(self):
        return barycentric(self.points)

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        return np.tensordot(values, self.weights, axes=([-1], [0]))


def _gauss_jacobi01(n, alpha):
    # Gauss-Jacobi on [-1, 1] with weight (1 - t)^alpha
    if alpha == 0:
        t, w = np.polynomial.legendre.leggauss(n)
    else:
        t, w = roots_jacobi(n, alpha, 0.0)
    return t, w


@lru_cache(maxsize=None)
def quadrature(dim, order):
    """Collapsed (Duffy) Gauss-Jacobi rule exact for total degree ``order``."""
    if order < 0 or order > MAX_ORDER:
        raise UnsupportedOrder(f"quadrature order {order} outside 0..{MAX_ORDER}")
    if dim not in (1, 2, 3):
        raise ValueError("dim must be 1, 2 or 3")
    n = max(1, math.ceil((order + 1) / 2))
    if dim == 1:
        t, w = _gauss_jacobi01(n, 0)
        pts = (0.5 * (t + 1.0))[:, None]
        wts = 0.5 * w
    elif dim == 2:
        ta, wa = _gauss_jacobi01(n, 0)
        tb, wb = _gauss_jacobi01(n, 1)
        a, b = np.meshgrid(ta, tb, indexing="ij")
        u, v = 0.5 * (a + 1.0), 0.5 * (b + 1.0)
        pts = np.stack([u * (1.0 - v), v], axis=-1).reshape(-1, 2)
        wts = (wa[:, None] * wb[None, :]).ravel() / 8.0
    else:
        ta, wa = _gauss_jacobi01(n, 0)
        tb, wb = _gauss_jacobi01(n, 1)
        tc, wc = _gauss_jacobi01(n, 2)
        a, b, c = np.meshgrid(ta, tb, tc, indexing="ij")
        u, v, s = 0.5 * (a + 1.0), 0.5 * (b + 1.0), 0.5 * (c + 1.0)
        pts = np.stack(
            [u * (1.0 - v) * (1.0 - s), v * (1.0 - s), s], axis=-1
        ).reshape(-1, 3)
        wts = (wa[:, None, None] * wb[None, :, None] * wc[None, None, :]).ravel() / 64.0
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(dim, order, pts, wts)


@lru_cache(maxsize=None)
def composite_quadrature(order, splits):
    """Triangle rule ``quadrature(2, order)`` repeated on ``4**splits`` sub-triangles.

    Each split cuts every sub-triangle into four similar ones.  The corner
    sub-triangles keep their vertex at the matching reference vertex, so the
    collapsed vertex of the base rule stays at reference vertex 2.
    """
    base = quadrature(2, order)
    tris = [np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])]
    for _ in range(splits):
        nxt = []
        for t in tris:
            m01, m12, m02 = 0.5 * (t[0] + t[1]), 0.5 * (t[1] + t[2]), 0.5 * (t[0] + t[2])
            nxt += [
                np.array([t[0], m01, m02]),
                np.array([m01, t[1], m12]),
                np.array([m02, m12, t[2]]),
                np.array([m12, m02, m01]),
            ]
        tris = nxt
    pts, wts = [], []
    for t in tris:
        jac = np.stack([t[1] - t[0], t[2] - t[0]], axis=1)
        pts.append(t[0] + base.points @ jac.T)
        wts.append(base.weights * abs(np.linalg.det(jac)))
    pts, wts = np.concatenate(pts), np.concatenate(wts)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(2, order, pts, wts)


def volume_order(k, r, dim):
    """Quadrature order for cell integrals on a degree-``r`` mesh."""
    return min(MAX_ORDER, 2 * k + (r - 1) * dim + 2)


def surface_order(k, r):
    """Quadrature order for boundary-face integrals."""
    return min(MAX_ORDER, 2 * k + 2 * r + 2)
