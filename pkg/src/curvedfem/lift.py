"""Lifts from the curved mesh domain onto the exact domain.

Two volume lifts are available, both written piecewise as
``G = E o (F^(r))^-1`` on every curved cell:

``modified``
    ``E(xhat) = x + (lambda*)^(r+2) (b(y) - y)`` with ``x = F^(r)(xhat)`` and
    ``y = F^(r)(yhat)``.  On the curved boundary ``G`` coincides with the
    orthogonal projection, so volume and surface lifts agree on traces.
``elliott``
    ``E = F^(e)`` built from the affine cell (``x = F_T(xhat)``,
    ``y = F_T(yhat)``).  On the boundary it differs from the projection by
    ``O(h^(r+1))``.

The surface lift is always the orthogonal projection ``b``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateFace,
    DegenerateLift,
    NewtonDivergence,
    OutsideElement,
)
from .mesh import FACE_VERTICES, _affine_ymap, boundary_correction, face_points
from .reference import MAX_ORDER, composite_quadrature, reference_vertices

__all__ = [
    "LiftMap",
    "LiftData",
    "inverse_ref_coords",
    "lift_point",
    "lift_jacobian",
    "surface_jacobian",
    "inverse_lift_source",
    "trace_deviation",
    "gram_sqrt",
]

VARIANTS = ("modified", "elliott")


def gram_sqrt(jac):
    """``sqrt(det(J^T J))`` for Jacobians of shape ``(..., gdim, tdim)``."""
    if jac.shape[-1] == 1:
        return np.linalg.norm(jac[..., 0], axis=-1)
    if jac.shape[-1] == jac.shape[-2]:
        return np.abs(np.linalg.det(jac))
    g = np.einsum("...ai,...aj->...ij", jac, jac)
    return np.sqrt(np.linalg.det(g))


@dataclass
class LiftData:
    """Lift evaluated at reference points of a batch of cells.

    ``x``/``dx`` are the curved-mesh points and Jacobians of ``F^(r)``;
    ``g``/``dg`` are the lifted points and the reference Jacobian of the
    composite map ``G o F^(r)``.
    """

    x: np.ndarray
    dx: np.ndarray
    g: np.ndarray
    dg: np.ndarray

    @property
    def measure(self):
        """Area element of ``G o F^(r)``, i.e. ``J_G |det DF^(r)|``."""
        return gram_sqrt(self.dg)

    @property
    def mesh_measure(self):
        return gram_sqrt(self.dx)

    @property
    def jacobian_det(self):
        """``J_G``: ratio of the lifted and curved area elements."""
        return self.measure / self.mesh_measure

    def lift_matrix(self):
        """``DG`` at the curved-mesh points (square, volume meshes only)."""
        return self.dg @ np.linalg.inv(self.dx)


class LiftMap:
    """Volume lift of a curved mesh onto its exact domain.

    Parameters
    ----------
    mesh : CurvedMesh
    variant : {'modified', 'elliott'}
    """

    def __init__(self, mesh, variant="modified"):
        if variant not in VARIANTS:
            raise ValueError(f"unknown lift variant {variant!r}")
        self.mesh = mesh
        self.variant = variant
        self.domain = mesh.domain
        self.power = mesh.r + 2
        self._bnd = np.flatnonzero(mesh.boundary_cells)
        self._origin, self._affine = mesh.parent.affine_map()

    def __repr__(self):
        return f"LiftMap(variant={self.variant!r}, r={self.mesh.r})"

    def evaluate(self, xhat, cells=None):
        """Lift data at shared reference points ``xhat`` for ``cells``."""
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        cells = np.arange(self.mesh.n_cells) if cells is None else np.atleast_1d(cells)
        x, dx = self.mesh.map(xhat, cells)
        g = x.copy()
        dg = dx.copy()
        is_bnd = self.mesh.boundary_cells[cells]
        local = np.flatnonzero(is_bnd)
        if len(local):
            sel = cells[local]
            eps = self.mesh.eps[sel]
            if self.variant == "modified":
                ymap = self.mesh.ymap(sel)
                corr, dcorr = boundary_correction(self.domain, eps, xhat, ymap, self.power)
                g[local] += corr
                dg[local] += dcorr
            else:
                origin, jac = self._origin[sel], self._affine[sel]
                ymap = _affine_ymap(origin, jac)
                corr, dcorr = boundary_correction(self.domain, eps, xhat, ymap, self.power)
                g[local] = origin[:, None, :] + np.einsum("cgj,qj->cqg", jac, xhat) + corr
                dg[local] = jac[:, None] + dcorr
        return LiftData(x, dx, g, dg)

    def check_positive(self, xhat):
        data = self.evaluate(xhat)
        if self.mesh.surface:
            det = data.jacobian_det
        else:
            det = np.linalg.det(data.dg) / np.linalg.det(data.dx)
        if np.any(det <= 0):
            raise DegenerateLift(f"J_G = {det.min():.3e}")
        return det

    def lifted_measure(self, quad=None, tol=1e-14, max_splits=4):
        """``sum_T int J_G dx``: measure of the lifted domain.

        With ``quad`` given the fixed rule is used on every cell.  Otherwise
        cell integrals are computed with the order-20 rule on successively
        subdivided reference triangles until they change by less than
        ``tol``; only coarse cells with strongly curved boundary pieces
        need the extra levels.
        """
        if quad is not None:
            data = self.evaluate(quad.points)
            return float(np.sum(data.measure @ quad.weights))
        cells = np.arange(self.mesh.n_cells)
        q = composite_quadrature(MAX_ORDER, 0)
        vals = self.evaluate(q.points).measure @ q.weights
        active = cells[self.mesh.boundary_cells]
        for splits in range(1, max_splits + 1):
            if len(active) == 0:
                break
            q = composite_quadrature(MAX_ORDER, splits)
            new = self.evaluate(q.points, active).measure @ q.weights
            change = np.abs(new - vals[active])
            vals[active] = new
            active = active[change > tol]
        return float(np.sum(vals))


def lift_point(lift, cell, xhat):
    """Image under ``G`` of the curved-mesh point ``F^(r)(xhat)``."""
    data = lift.evaluate(np.atleast_2d(xhat), [cell])
    g = data.g[0]
    return g[0] if np.ndim(xhat) == 1 else g


def lift_jacobian(lift, cell, xhat):
    """``(DG, J_G)`` at ``F^(r)(xhat)``; raises :class:`DegenerateLift`."""
    data = lift.evaluate(np.atleast_2d(xhat), [cell])
    if lift.mesh.surface:
        dG = np.einsum("qai,qij->qaj", data.dg[0], np.linalg.pinv(data.dx[0]))
        det = data.jacobian_det[0]
    else:
        dG = data.lift_matrix()[0]
        det = np.linalg.det(dG)
    if np.any(det <= 0):
        raise DegenerateLift(f"cell {cell}: J_G = {np.min(det):.3e}")
    if np.ndim(xhat) == 1:
        return dG[0], float(det[0])
    return dG, det


def surface_jacobian(lift, face, xhat_face):
    """``J_b`` on a boundary face of the curved mesh.

    For a volume mesh ``face`` indexes ``mesh.boundary_faces`` and
    ``xhat_face`` holds parameters in [0, 1].  For a surface mesh ``face`` is
    a cell index and ``xhat_face`` reference points of the triangle.
    """
    mesh = lift.mesh
    dom = mesh.domain
    if mesh.surface:
        x, dx = mesh.map(xhat_face, [face])
        x, dx = x[0], dx[0]
    else:
        cell, f = mesh.boundary_faces[face]
        pts = face_points(f, xhat_face)
        a, b = FACE_VERTICES[f]
        verts = reference_vertices(2)
        x, dx = mesh.map(pts, [cell])
        dx = (dx[0] @ (verts[b] - verts[a]))[..., None]
        x = x[0]
    _, db, _ = dom.projection_data(x)
    den = gram_sqrt(dx)
    if np.any(den <= 0):
        raise DegenerateFace(f"face {face} has a vanishing area element")
    jb = gram_sqrt(db @ dx) / den
    if np.any(jb <= 0):
        raise DegenerateFace(f"face {face}: J_b = {np.min(jb):.3e}")
    return jb


def inverse_ref_coords(mesh, cell, x, tol=1e-12, maxiter=50, slack=1e-8):
    """Reference point ``xhat`` with ``F^(r)(xhat) = x`` on a volume cell.

    Newton's method started from the barycentric coordinates of ``x`` in the
    affine parent cell.
    """
    x = np.asarray(x, dtype=float)
    origin, jac = mesh.parent.affine_map()
    b0, b = origin[cell], jac[cell]
    xhat = np.linalg.solve(b, x - b0)
    scale = max(mesh.parent.diameters()[cell], 1.0)
    if mesh.r > 1:
        for it in range(maxiter):
            fx, dfx = mesh.map(xhat, [cell])
            res = fx[0, 0] - x
            if np.linalg.norm(res) <= tol * scale:
                break
            xhat = xhat - np.linalg.solve(dfx[0, 0], res)
        else:
            raise NewtonDivergence(f"cell {cell}: no convergence in {maxiter} iterations")
    lam = np.concatenate([[1.0 - xhat.sum()], xhat])
    if lam.min() < -slack:
        raise OutsideElement(f"point lies outside cell {cell} (min lambda {lam.min():.2e})")
    return xhat


def inverse_lift_source(lift, f, g):
    """Pull the sources back to the mesh: ``f o G`` and ``g o b``.

    Returns two callables: ``f_pull(cells, xhat)`` evaluates ``f`` at the
    lifted images of ``F^(r)(xhat)`` (shape ``(nc, nq)``), and ``g_pull(x)``
    evaluates ``g`` at the projections of points ``x`` of the curved boundary.
    """

    def f_pull(cells, xhat):
        data = lift.evaluate(np.atleast_2d(xhat), cells)
        return f(data.g)

    def g_pull(x):
        return g(lift.domain.project(np.asarray(x, dtype=float)))

    return f_pull, g_pull


def trace_deviation(lift, quad1):
    """Max distance between ``G`` and ``b`` at boundary-face quadrature points."""
    mesh = lift.mesh
    if mesh.surface:
        data = lift.evaluate(quad1.points)
        return float(np.max(np.linalg.norm(data.g - lift.domain.project(data.x), axis=-1)))
    worst = 0.0
    for f in range(3):
        sel = mesh.boundary_faces[mesh.boundary_faces[:, 1] == f, 0]
        if len(sel) == 0:
            continue
        data = lift.evaluate(face_points(f, quad1.points[:, 0]), sel)
        dev = np.linalg.norm(data.g - lift.domain.project(data.x), axis=-1)
        worst = max(worst, float(dev.max()))
    return worst
