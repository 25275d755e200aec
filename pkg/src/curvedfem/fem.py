"""Continuous ``P^k`` Lagrange spaces on curved meshes and system assembly."""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import DegenerateElement, QuadratureOrderTooLow
from .mesh import FACE_VERTICES, face_points
from .reference import lagrange_basis, quadrature, reference_vertices, surface_order, volume_order

__all__ = [
    "FESpace",
    "LinearSystem",
    "ProblemSpec",
    "build_space",
    "assemble_ventcel",
    "assemble_surface_laplace",
    "eval_fe_function",
    "ventcel_disk_problem",
    "sphere_laplace_problem",
]


class FESpace:
    """Global continuous ``P^k`` space with entity-based DOF numbering.

    Vertex DOFs come first, then ``k - 1`` DOFs per edge ordered from the
    lower to the higher global vertex index, then the cell-interior DOFs.
    """

    def __init__(self, mesh, k):
        if k < 1:
            raise ValueError("finite element degree must be >= 1")
        self.mesh = mesh
        self.k = k
        self.basis = lagrange_basis(2, k)
        self._number()

    def __repr__(self):
        return f"FESpace(k={self.k}, n_dofs={self.n_dofs})"

    def _number(self):
        parent = self.mesh.parent
        k = self.k
        cells = parent.cells
        nc, nv, ne = parent.n_cells, parent.n_vertices, parent.n_edges
        alphas = self.basis.alphas
        dof_map = np.empty((nc, len(alphas)), dtype=np.int64)
        n_int = (k - 1) * (k - 2) // 2
        edge_off = nv
        cell_off = nv + (k - 1) * ne
        interior_count = 0
        for loc, alpha in enumerate(alphas):
            support = np.flatnonzero(alpha)
            if len(support) == 1:
                dof_map[:, loc] = cells[:, support[0]]
            elif len(support) == 2:
                i, j = support
                face = 3 - i - j
                edge = parent.cell_edges[:, face]
                gi, gj = cells[:, i], cells[:, j]
                # position counted from the lower global vertex index
                pos = np.where(gi < gj, alpha[j], alpha[i])
                dof_map[:, loc] = edge_off + edge * (k - 1) + (pos - 1)
            else:
                dof_map[:, loc] = cell_off + np.arange(nc) * n_int + interior_count
                interior_count += 1
        self.dof_map = dof_map
        self.n_dofs = cell_off + nc * n_int
        on_face = np.zeros(len(alphas), dtype=bool)
        bdofs = []
        for f in range(3):
            sel = parent.boundary_faces[parent.boundary_faces[:, 1] == f, 0]
            if len(sel):
                on_face = alphas[:, f] == 0
                bdofs.append(dof_map[np.ix_(sel, np.flatnonzero(on_face))].ravel())
        if parent.surface:
            self.boundary_dofs = np.arange(self.n_dofs)
        else:
            self.boundary_dofs = np.unique(np.concatenate(bdofs)) if bdofs else np.zeros(0, int)

    def dof_points(self):
        """Physical coordinates of every DOF node on the curved mesh."""
        x, _ = self.mesh.map(self.basis.points)
        pts = np.empty((self.n_dofs, self.mesh.gdim))
        pts[self.dof_map.ravel()] = x.reshape(-1, self.mesh.gdim)
        return pts

    def interpolate(self, func):
        """Nodal interpolant of ``func`` (called on points ``(n, gdim)``)."""
        return np.asarray(func(self.dof_points()), dtype=float)

    def expected_dof_count(self):
        p = self.mesh.parent
        k = self.k
        return p.n_vertices + (k - 1) * p.n_edges + (k - 1) * (k - 2) // 2 * p.n_cells


def build_space(mesh, k):
    return FESpace(mesh, k)


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def n(self):
        return len(self.rhs)

    def symmetry_defect(self):
        a = self.matrix
        diff = abs(a - a.T).max() if a.nnz else 0.0
        return diff / max(abs(a).max(), 1e-300)


@dataclass
class ProblemSpec:
    """Coefficients, sources and (optionally) the exact solution.

    ``f`` and ``g`` take points of shape ``(..., dim)``; ``u`` and ``grad_u``
    likewise, with ``grad_u`` returning ``(..., dim)``.
    """

    kappa: float
    alpha: float
    beta: float
    f: Callable
    g: Callable
    u: Optional[Callable] = None
    grad_u: Optional[Callable] = None

    def __post_init__(self):
        if self.kappa < 0 or self.alpha <= 0 or self.beta <= 0:
            raise ValueError("need kappa >= 0 and alpha, beta > 0")


def ventcel_disk_problem():
    """``alpha = beta = 1``, ``kappa = 0`` with exact solution ``y e^x``."""
    return ProblemSpec(
        kappa=0.0,
        alpha=1.0,
        beta=1.0,
        f=lambda p: -p[..., 1] * np.exp(p[..., 0]),
        g=lambda p: p[..., 1] * np.exp(p[..., 0]) * (3.0 + 4.0 * p[..., 0] - p[..., 1] ** 2),
        u=lambda p: p[..., 1] * np.exp(p[..., 0]),
        grad_u=lambda p: np.stack(
            [p[..., 1] * np.exp(p[..., 0]), np.exp(p[..., 0])], axis=-1
        ),
    )


def sphere_laplace_problem():
    """``-Lap_G u + u = e^y (y + 2) y`` on the unit sphere, ``u = e^y``."""

    def grad_u(p):
        out = np.zeros(p.shape)
        out[..., 1] = np.exp(p[..., 1])
        return out

    return ProblemSpec(
        kappa=0.0,
        alpha=1.0,
        beta=1.0,
        f=lambda p: np.zeros(p.shape[:-1]),
        g=lambda p: np.exp(p[..., 1]) * (p[..., 1] + 2.0) * p[..., 1],
        u=lambda p: np.exp(p[..., 1]),
        grad_u=grad_u,
    )


# --------------------------------------------------------------------------
# helpers


def _metric_inverse(jac):
    """Inverse of ``J^T J`` and the area element ``sqrt(det J^T J)``."""
    if jac.shape[-1] == jac.shape[-2]:
        det = np.linalg.det(jac)
        inv = np.linalg.inv(jac)
        return np.einsum("...ia,...ja->...ij", inv, inv), det
    g = np.einsum("...ai,...aj->...ij", jac, jac)
    return np.linalg.inv(g), np.sqrt(np.linalg.det(g))


def _scatter(dof_map, local, n):
    nb = dof_map.shape[1]
    rows = np.repeat(dof_map, nb, axis=1).ravel()
    cols = np.tile(dof_map, (1, nb)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def _chunks(n, size):
    for start in range(0, n, size):
        yield np.arange(start, min(n, start + size))


CHUNK = 2048


def face_groups(mesh):
    """Boundary faces grouped by local face index: ``(face_ids, f, cells)``."""
    faces = mesh.boundary_faces
    for f in range(3):
        ids = np.flatnonzero(faces[:, 1] == f)
        if len(ids):
            yield ids, f, faces[ids, 0]


def face_tangent(dx, f):
    a, b = FACE_VERTICES[f]
    verts = reference_vertices(2)
    return dx @ (verts[b] - verts[a])


def _check_order(order, needed, what):
    if order < needed:
        raise QuadratureOrderTooLow(f"{what} quadrature order {order} < required {needed}")


# --------------------------------------------------------------------------
# assembly


def assemble_ventcel(space, spec, lift, vol_order=None, surf_order=None):
    """Assemble the Ventcel system on a curved volume mesh.

    Volume terms are pulled back with ``(DF^(r))^-T`` and ``|det DF^(r)|``;
    boundary terms live on the curved boundary faces and use the arclength
    element of ``F^(r)``.  The right-hand side integrates ``f o G`` weighted
    by ``J_G`` and ``g o b`` weighted by ``J_b``.  Assembly proceeds in
    a fixed sequential cell order, so results are deterministic.
    """
    mesh = space.mesh
    if mesh.surface:
        raise ValueError("the Ventcel problem needs a volume mesh")
    k, r = space.k, mesh.r
    need_v, need_s = volume_order(k, r, 2), surface_order(k, r)
    vol_order = need_v if vol_order is None else vol_order
    surf_order = need_s if surf_order is None else surf_order
    _check_order(vol_order, need_v, "volume")
    _check_order(surf_order, need_s, "surface")
    basis = space.basis
    n = space.n_dofs

    q = quadrature(2, vol_order)
    phi = basis.eval(q.points)
    dphi = basis.grad(q.points)
    stiff_blocks, mass_blocks = [], []
    rhs = np.zeros(n)
    for cells in _chunks(mesh.n_cells, CHUNK):
        data = lift.evaluate(q.points, cells)
        ginv, det = _metric_inverse(data.dx)
        if np.any(det <= 0):
            raise DegenerateElement(f"non-positive det DF^(r) ({det.min():.3e})")
        kk, mm = _kernels.element_matrices(dphi, phi, ginv, det * q.weights)
        stiff_blocks.append(kk)
        mass_blocks.append(mm)
        fvals = spec.f(data.g) * data.measure * q.weights
        np.add.at(rhs, space.dof_map[cells], fvals @ phi)
    local = np.concatenate(stiff_blocks)
    if spec.kappa:
        local = local + spec.kappa * np.concatenate(mass_blocks)
    mat = _scatter(space.dof_map, local, n)

    q1 = quadrature(1, surf_order)
    bmat = sp.csr_matrix((n, n))
    dom = mesh.domain
    for ids, f, cells in face_groups(mesh):
        pts = face_points(f, q1.points[:, 0])
        phi_f = basis.eval(pts)
        a, b = FACE_VERTICES[f]
        verts = reference_vertices(2)
        dphi_f = (basis.grad(pts) @ (verts[b] - verts[a]))[..., None]
        x, dx = mesh.map(pts, cells)
        tang = face_tangent(dx, f)
        length = np.linalg.norm(tang, axis=-1)
        ginv = (1.0 / length**2)[..., None, None]
        kk, mm = _kernels.element_matrices(dphi_f, phi_f, ginv, length * q1.weights)
        local = spec.beta * kk + spec.alpha * mm
        bmat = bmat + _scatter(space.dof_map[cells], local, n)
        proj, db, _ = dom.projection_data(x)
        jb_len = np.linalg.norm(np.einsum("cqab,cqb->cqa", db, tang), axis=-1)
        gvals = spec.g(proj) * jb_len * q1.weights
        np.add.at(rhs, space.dof_map[cells], gvals @ phi_f)
    return LinearSystem((mat + bmat).tocsr(), rhs)


def assemble_surface_laplace(space, g, order=None):
    """Assemble ``-Lap_G u + u = g`` on a curved surface mesh.

    The tangential gradient uses the pseudo-inverse of the parametric
    Jacobian; the right-hand side is ``g o b`` weighted by ``J_b``.
    """
    mesh = space.mesh
    if not mesh.surface:
        raise ValueError("expected a surface mesh")
    k, r = space.k, mesh.r
    need = surface_order(k, r)
    order = need if order is None else order
    _check_order(order, need, "surface")
    if callable(getattr(g, "g", None)):
        g = g.g
    basis = space.basis
    n = space.n_dofs
    q = quadrature(2, order)
    phi = basis.eval(q.points)
    dphi = basis.grad(q.points)
    dom = mesh.domain
    blocks = []
    rhs = np.zeros(n)
    for cells in _chunks(mesh.n_cells, CHUNK):
        x, dx = mesh.map(q.points, cells)
        ginv, area = _metric_inverse(dx)
        kk, mm = _kernels.element_matrices(dphi, phi, ginv, area * q.weights)
        blocks.append(kk + mm)
        proj, db, _ = dom.projection_data(x)
        lifted = np.einsum("cqab,cqbj->cqaj", db, dx)
        _, lifted_area = _metric_inverse(lifted)
        gvals = g(proj) * lifted_area * q.weights
        np.add.at(rhs, space.dof_map[cells], gvals @ phi)
    mat = _scatter(space.dof_map, np.concatenate(blocks), n)
    return LinearSystem(mat, rhs)


def eval_fe_function(space, coeffs, cell, xhat):
    """Value, reference gradient and physical gradient of a FE function.

    On surface cells the physical gradient is the tangential gradient
    ``J (J^T J)^-1 grad_ref``.
    """
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    local = np.asarray(coeffs)[space.dof_map[cell]]
    val = space.basis.eval(xhat) @ local
    gref = np.einsum("qia,i->qa", space.basis.grad(xhat), local)
    _, dx = space.mesh.map(xhat, [cell])
    dx = dx[0]
    gphys = np.einsum("qai,qi->qa", np.linalg.pinv(dx).transpose(0, 2, 1), gref)
    return val, gref, gphys
