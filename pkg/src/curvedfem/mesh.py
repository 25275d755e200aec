"""Affine triangulations, the exact boundary-fitted map and curved meshes.

An :class:`AffineMesh` holds straight triangles whose boundary vertices lie
on the domain boundary.  :func:`elevate` interpolates the exact map of every
cell at the ``P^r`` Lagrange nodes, giving a :class:`CurvedMesh` of degree
``r``.  Triangles are the only cell type; a surface mesh is a set of
triangles embedded in 3D whose vertices all lie on the surface.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .errors import DegenerateElement, InvalidMesh
from .geometry import Ball, Flower, ImplicitDomain
from .reference import barycentric, lagrange_basis, reference_vertices

__all__ = [
    "AffineMesh",
    "CurvedMesh",
    "FACE_VERTICES",
    "generate_disk_mesh",
    "generate_flower_mesh",
    "generate_sphere_surface_mesh",
    "refine",
    "classify",
    "classify_flags",
    "exact_map",
    "elevate",
    "boundary_correction",
    "face_points",
]

# local face f of a triangle is the edge opposite local vertex f
FACE_VERTICES = np.array([[1, 2], [0, 2], [0, 1]])
# reference gradients of the barycentric coordinates
GRAD_LAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
LAMBDA_GUARD = 1e-12


def cross2(a, b):
    """z-component of the cross product of 2D vectors."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def face_points(face, s):
    """Reference coordinates of points ``s`` in [0, 1] on local face ``face``."""
    a, b = FACE_VERTICES[face]
    verts = reference_vertices(2)
    s = np.asarray(s, dtype=float).reshape(-1, 1)
    return (1.0 - s) * verts[a] + s * verts[b]


@dataclass
class AffineMesh:
    """Straight-sided triangulation of a smooth domain or surface.

    Parameters
    ----------
    vertices : ndarray, shape (nv, gdim)
    cells : ndarray of int, shape (nc, 3)
    domain : ImplicitDomain
    boundary : ndarray of bool, shape (nv,)
        Flags of vertices lying on the domain boundary.
    surface : bool
        True when the triangles discretise the boundary surface itself.
    """

    vertices: np.ndarray
    cells: np.ndarray
    domain: ImplicitDomain
    boundary: np.ndarray
    surface: bool = False
    edges: np.ndarray = field(init=False, repr=False)
    cell_edges: np.ndarray = field(init=False, repr=False)
    edge_cells: np.ndarray = field(init=False, repr=False)
    boundary_faces: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        self.boundary = np.asarray(self.boundary, dtype=bool)
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise InvalidMesh("only triangular cells are supported")
        if not self.surface:
            self._orient()
            self._rotate_boundary_cells()
        self._build_edges()
        self.validate()

    @property
    def gdim(self):
        return self.vertices.shape[1]

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    def _orient(self):
        v = self.vertices[self.cells]
        det = cross2(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        flip = det < 0
        self.cells[flip] = self.cells[flip][:, [0, 2, 1]]

    def _rotate_boundary_cells(self):
        # put the interior vertex of each boundary cell in local slot 2, where
        # the collapsed quadrature rules concentrate their points
        flags = self.boundary[self.cells]
        bnd = flags.sum(axis=1) == 2
        shift = np.argmin(flags, axis=1)  # local index of the interior vertex
        for s in (0, 1):
            sel = bnd & (shift == s)
            self.cells[sel] = np.roll(self.cells[sel], 2 - s, axis=1)

    def _build_edges(self):
        local = np.stack([self.cells[:, FACE_VERTICES[f]] for f in range(3)], axis=1)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        self.edges = edges
        self.cell_edges = inverse.reshape(-1, 3)
        counts = np.bincount(inverse, minlength=len(edges))
        if np.any(counts > 2):
            raise InvalidMesh("an edge is shared by more than two cells")
        edge_cells = np.full((len(edges), 2), -1, dtype=np.int64)
        owner = np.repeat(np.arange(self.n_cells), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_edges = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        edge_cells[sorted_edges[first], 0] = owner[order[first]]
        edge_cells[sorted_edges[~first], 1] = owner[order[~first]]
        self.edge_cells = edge_cells
        if self.surface:
            self.boundary_faces = np.zeros((0, 2), dtype=np.int64)
        else:
            bedges = np.flatnonzero(counts == 1)
            cell = edge_cells[bedges, 0]
            face = np.argmax(self.cell_edges[cell] == bedges[:, None], axis=1)
            self.boundary_faces = np.stack([cell, face], axis=1)

    def validate(self):
        """Check the structural invariants the curved construction relies on."""
        dom = self.domain
        bverts = self.vertices[self.boundary]
        if len(bverts):
            dist = np.abs(dom.signed_distance(bverts))
            if np.max(dist) > 1e-12:
                raise InvalidMesh(
                    f"boundary vertex off the boundary by {np.max(dist):.2e}"
                )
        nbc = self.boundary[self.cells].sum(axis=1)
        counts = (self.edge_cells >= 0).sum(axis=1)
        if self.surface:
            if not np.all(self.boundary):
                raise InvalidMesh("surface meshes have every vertex on the surface")
            if np.any(counts != 2):
                raise InvalidMesh("surface mesh is not closed")
            return
        if np.any(nbc == 3):
            raise InvalidMesh("a cell has all its vertices on the boundary")
        both = self.boundary[self.edges].all(axis=1)
        if np.any(both != (counts == 1)):
            raise InvalidMesh(
                "boundary edges must be exactly the edges joining two boundary vertices"
            )

    @property
    def boundary_cells(self):
        """Mask of non-internal cells."""
        return classify(self)

    def diameters(self):
        v = self.vertices[self.cells]
        lens = np.stack(
            [np.linalg.norm(v[:, a] - v[:, b], axis=-1) for a, b in FACE_VERTICES], axis=1
        )
        return lens.max(axis=1)

    @property
    def h(self):
        return float(self.diameters().max())

    def areas(self):
        v = self.vertices[self.cells]
        e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
        if self.gdim == 2:
            return 0.5 * np.abs(cross2(e1, e2))
        return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=-1)

    def affine_map(self):
        """Origins ``(nc, gdim)`` and Jacobians ``(nc, gdim, 2)`` of ``F_T``."""
        v = self.vertices[self.cells]
        return v[:, 0], np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_cells


def classify_flags(eps):
    """'boundary' if at least two vertices of the cell lie on the boundary."""
    return "boundary" if int(np.sum(eps)) >= 2 else "internal"


def classify(mesh):
    """Boolean mask of boundary (non-internal) cells of ``mesh``."""
    if mesh.surface:
        return np.ones(mesh.n_cells, dtype=bool)
    return mesh.boundary[mesh.cells].sum(axis=1) >= 2


def cell_eps(mesh):
    """Per-cell boundary flags, zeroed on internal cells."""
    eps = mesh.boundary[mesh.cells].astype(float)
    eps[~classify(mesh)] = 0.0
    return eps


# --------------------------------------------------------------------------
# generators


def _ring_mesh(n_rings, to_physical):
    """Concentric-ring triangulation of a star-shaped domain.

    Ring ``j`` carries ``6 j`` nodes at normalised radius ``j / n_rings``;
    consecutive rings are stitched by advancing along whichever ring has the
    smaller next angle.
    """
    rho = [np.zeros(1)]
    theta = [np.zeros(1)]
    for j in range(1, n_rings + 1):
        m = 6 * j
        rho.append(np.full(m, j / n_rings))
        theta.append(2.0 * math.pi * np.arange(m) / m)
    offsets = np.cumsum([0] + [len(t) for t in theta])
    cells = []
    for j in range(1, n_rings + 1):
        inner = offsets[j - 1] + np.arange(len(theta[j - 1]))
        outer = offsets[j] + np.arange(len(theta[j]))
        a = np.append(theta[j - 1], theta[j - 1][0] + 2.0 * math.pi)
        b = np.append(theta[j], theta[j][0] + 2.0 * math.pi)
        m1, m2 = len(inner), len(outer)
        i = o = 0
        while i < m1 or o < m2:
            if o < m2 and (i == m1 or b[o + 1] <= a[i + 1] + 1e-12):
                cells.append((inner[i % m1], outer[o % m2], outer[(o + 1) % m2]))
                o += 1
            else:
                if m1 > 1:
                    cells.append((inner[i % m1], outer[o % m2], inner[(i + 1) % m1]))
                i += 1
    rho = np.concatenate(rho)
    theta = np.concatenate(theta)
    vertices = to_physical(rho, theta)
    boundary = np.zeros(len(vertices), dtype=bool)
    boundary[offsets[n_rings]:] = True
    return vertices, np.array(cells, dtype=np.int64), boundary


def _smooth(vertices, cells, boundary, passes=1):
    nv = len(vertices)
    pairs = np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]])
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    out = vertices.copy()
    for _ in range(passes):
        acc = np.zeros_like(out)
        deg = np.zeros(nv)
        np.add.at(acc, pairs[:, 0], out[pairs[:, 1]])
        np.add.at(acc, pairs[:, 1], out[pairs[:, 0]])
        np.add.at(deg, pairs[:, 0], 1.0)
        np.add.at(deg, pairs[:, 1], 1.0)
        interior = ~boundary
        out[interior] = acc[interior] / deg[interior, None]
    return out


def _star_mesh(n, domain, radius_fn):
    if n < 1:
        raise ValueError("subdivision level must be >= 1")
    n_rings = 2**n

    def to_physical(rho, theta):
        r = rho * radius_fn(theta)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)

    vertices, cells, boundary = _ring_mesh(n_rings, to_physical)
    # snap boundary vertices exactly onto the boundary
    vertices[boundary] = domain.project(vertices[boundary])
    vertices = _smooth(vertices, cells, boundary)
    mesh = AffineMesh(vertices, cells, domain, boundary)
    v = mesh.vertices[mesh.cells]
    det = cross2(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    if np.any(det <= 0):
        raise InvalidMesh("smoothing produced an inverted triangle")
    return mesh


def generate_disk_mesh(n, domain=None):
    """Quasi-uniform triangulation of the unit disk with ``2**n`` rings."""
    domain = domain if domain is not None else Ball(2)
    return _star_mesh(n, domain, lambda t: np.full_like(t, domain.radius))


def generate_flower_mesh(n, domain=None):
    """Ring triangulation of the flower domain, boundary nodes on ``r(t)``."""
    domain = domain if domain is not None else Flower()
    return _star_mesh(n, domain, domain.radius)


def _icosahedron():
    phi = 0.5 * (1.0 + math.sqrt(5.0))
    pts = []
    for s1 in (-1.0, 1.0):
        for s2 in (-phi, phi):
            pts += [(0.0, s1, s2), (s1, s2, 0.0), (s2, 0.0, s1)]
    pts = np.array(pts)
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    faces = ConvexHull(pts).simplices.copy()
    v = pts[faces]
    normal = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    flip = (normal * v.mean(axis=1)).sum(axis=1) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return pts, faces


def generate_sphere_surface_mesh(level, domain=None):
    """Icosahedron subdivided ``level`` times, vertices projected radially."""
    if level < 0:
        raise ValueError("level must be >= 0")
    domain = domain if domain is not None else Ball(3)
    pts, faces = _icosahedron()
    pts = domain.project(pts * domain.radius)
    mesh = AffineMesh(pts, faces, domain, np.ones(len(pts), dtype=bool), surface=True)
    for _ in range(level):
        mesh = refine(mesh)
    return mesh


def refine(mesh):
    """Split each triangle into four; new boundary vertices are projected."""
    nv = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    on_boundary = mesh.boundary[mesh.edges].all(axis=1)
    if not mesh.surface:
        on_boundary &= (mesh.edge_cells >= 0).sum(axis=1) == 1
    if np.any(on_boundary):
        mid[on_boundary] = mesh.domain.project(mid[on_boundary])
    vertices = np.vstack([mesh.vertices, mid])
    boundary = np.concatenate([mesh.boundary, on_boundary])
    c = mesh.cells
    m = nv + mesh.cell_edges
    cells = np.concatenate(
        [
            np.stack([c[:, 0], m[:, 2], m[:, 1]], axis=1),
            np.stack([c[:, 1], m[:, 0], m[:, 2]], axis=1),
            np.stack([c[:, 2], m[:, 1], m[:, 0]], axis=1),
            np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
        ]
    )
    return AffineMesh(vertices, cells, mesh.domain, boundary, surface=mesh.surface)


# --------------------------------------------------------------------------
# exact map


def boundary_correction(domain, eps, xhat, ymap, power, jacobian=True):
    """Correction ``(lambda*)^power (b(y) - y)`` and its reference Jacobian.

    Parameters
    ----------
    domain : ImplicitDomain
    eps : ndarray, shape (nc, 3)
        Boundary flags of the cell vertices (zero rows for internal cells).
    xhat : ndarray, shape (nq, 2)
        Reference points, shared by all cells.
    ymap : callable
        ``ymap(yhat)`` with ``yhat`` of shape ``(nc, nq, 2)`` returns the
        image points ``(nc, nq, gdim)`` and their Jacobians
        ``(nc, nq, gdim, 2)``.
    power : int
        Exponent of ``lambda*``, ``r + 2`` for a degree-``r`` mesh.

    Returns
    -------
    corr : ndarray, shape (nc, nq, gdim)
    dcorr : ndarray, shape (nc, nq, gdim, 2) or None
    """
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    lam = barycentric(xhat)
    verts = reference_vertices(2)
    lstar = eps @ lam.T
    safe = lstar > LAMBDA_GUARD
    num = np.einsum("ci,qi,ij->cqj", eps, lam, verts)
    denom = np.where(safe, lstar, 1.0)
    yhat = np.where(safe[..., None], num / denom[..., None], xhat[None, :, :])
    y, dy = ymap(yhat)
    bpts, db, _ = domain.projection_data(y[safe], check=True)
    gdim = y.shape[-1]
    gap = np.zeros_like(y)
    gap[safe] = bpts - y[safe]
    lpow = np.where(safe, lstar, 0.0) ** power
    corr = lpow[..., None] * gap
    if not jacobian:
        return corr, None
    lpow1 = np.where(safe, lstar, 0.0) ** (power - 1)
    glstar = eps @ GRAD_LAMBDA
    # lambda* d(yhat)/d(xhat) = sum_i eps_i vhat_i grad(lambda_i)^T - yhat grad(lambda*)^T
    s = np.einsum("ci,ij,ik->cjk", eps, verts, GRAD_LAMBDA)
    e = s[:, None, :, :] - yhat[..., :, None] * glstar[:, None, None, :]
    dbm = np.zeros(y.shape + (gdim,))
    dbm[safe] = db - np.eye(gdim)
    dcorr = power * lpow1[..., None, None] * gap[..., :, None] * glstar[:, None, None, :]
    dcorr += lpow1[..., None, None] * np.einsum("cqab,cqbj,cqjk->cqak", dbm, dy, e)
    return corr, dcorr


def _affine_ymap(origin, jac):
    def ymap(yhat):
        y = origin[:, None, :] + np.einsum("cgj,cqj->cqg", jac, yhat)
        dy = np.broadcast_to(jac[:, None], yhat.shape[:2] + jac.shape[1:])
        return y, dy

    return ymap


def exact_map(mesh, r, xhat, cells=None, jacobian=False):
    """Exact boundary-fitted map ``F_T^(e)`` evaluated at reference points.

    Internal cells return the affine image; boundary cells add
    ``(lambda*)^(r+2) (b(y) - y)`` with ``y = F_T(yhat)``.

    Returns points ``(nc, nq, gdim)`` and, when ``jacobian`` is set, the
    Jacobians ``(nc, nq, gdim, 2)``.
    """
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    cells = np.arange(mesh.n_cells) if cells is None else np.atleast_1d(cells)
    origin, jac = mesh.affine_map()
    origin, jac = origin[cells], jac[cells]
    x = origin[:, None, :] + np.einsum("cgj,qj->cqg", jac, xhat)
    dx = np.broadcast_to(jac[:, None], (len(cells), len(xhat)) + jac.shape[1:]).copy()
    eps = cell_eps(mesh)[cells]
    bnd = np.flatnonzero(eps.sum(axis=1) > 0)
    if len(bnd):
        corr, dcorr = boundary_correction(
            mesh.domain, eps[bnd], xhat, _affine_ymap(origin[bnd], jac[bnd]), r + 2, jacobian
        )
        x[bnd] += corr
        if jacobian:
            dx[bnd] += dcorr
    return (x, dx) if jacobian else x


# --------------------------------------------------------------------------
# curved mesh


class CurvedMesh:
    """Degree-``r`` curved mesh obtained by interpolating the exact map.

    Attributes
    ----------
    parent : AffineMesh
    r : int
    control : ndarray, shape (nc, n_r, gdim)
        Images of the ``P^r`` Lagrange nodes of every cell.
    eps : ndarray, shape (nc, 3)
        Boundary flags of each cell's vertices, zero on internal cells.
    """

    def __init__(self, parent, r, control):
        self.parent = parent
        self.r = r
        self.basis = lagrange_basis(2, r)
        self.control = control
        self.eps = cell_eps(parent)
        self.boundary_cells = classify(parent)

    @property
    def domain(self):
        return self.parent.domain

    @property
    def n_cells(self):
        return self.parent.n_cells

    @property
    def gdim(self):
        return self.parent.gdim

    @property
    def surface(self):
        return self.parent.surface

    @property
    def h(self):
        return self.parent.h

    @property
    def boundary_faces(self):
        return self.parent.boundary_faces

    def __repr__(self):
        return f"CurvedMesh(r={self.r}, n_cells={self.n_cells}, gdim={self.gdim})"

    def map(self, xhat, cells=None):
        """Points and Jacobians of ``F^(r)`` at shared reference points.

        Returns arrays of shape ``(nc, nq, gdim)`` and ``(nc, nq, gdim, 2)``.
        """
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        ctrl = self.control if cells is None else self.control[np.atleast_1d(cells)]
        phi = self.basis.eval(xhat)
        dphi = self.basis.grad(xhat)
        x = np.einsum("qi,cig->cqg", phi, ctrl)
        dx = np.einsum("qij,cig->cqgj", dphi, ctrl)
        return x, dx

    def map_points(self, xhat, cells=None):
        """``F^(r)`` at per-cell reference points ``xhat`` of shape ``(nc, nq, 2)``."""
        ctrl = self.control if cells is None else self.control[np.atleast_1d(cells)]
        nc, nq = xhat.shape[:2]
        flat = xhat.reshape(-1, 2)
        phi = self.basis.eval(flat).reshape(nc, nq, -1)
        dphi = self.basis.grad(flat).reshape(nc, nq, -1, 2)
        x = np.einsum("cqi,cig->cqg", phi, ctrl)
        dx = np.einsum("cqij,cig->cqgj", dphi, ctrl)
        return x, dx

    def ymap(self, cells):
        return lambda yhat: self.map_points(yhat, cells)

    def geometric_map(self, cell, xhat):
        """Point and Jacobian of ``F^(r)`` for a single cell.

        Raises :class:`DegenerateElement` if the Jacobian determinant is not
        positive (volume meshes only).
        """
        x, dx = self.map(xhat, [cell])
        x, dx = x[0], dx[0]
        if not self.surface:
            det = np.linalg.det(dx)
            if np.any(det <= 0):
                raise DegenerateElement(f"cell {cell}: det DF = {det.min():.3e}")
        if np.ndim(xhat) == 1:
            return x[0], dx[0]
        return x, dx

    def jacobian_determinants(self, xhat):
        _, dx = self.map(xhat)
        if self.surface:
            g = np.einsum("cqai,cqaj->cqij", dx, dx)
            return np.sqrt(np.linalg.det(g))
        return np.linalg.det(dx)

    def check_positive(self, xhat):
        det = self.jacobian_determinants(xhat)
        if np.any(det <= 0):
            bad = int(np.argmin(det.min(axis=1)))
            raise DegenerateElement(f"cell {bad}: det DF = {det.min():.3e}")
        return det

    def lattice(self, level):
        """Points of a sub-lattice of every cell, used for visualisation."""
        nodes = lagrange_basis(2, level).points
        return nodes, self.map(nodes)[0]


def elevate(mesh, r):
    """Curved mesh of degree ``r``: control points are ``F^(e)`` at the nodes."""
    if r < 1:
        raise ValueError("geometric degree must be >= 1")
    nodes = lagrange_basis(2, r).points
    if r == 1:
        control = mesh.vertices[mesh.cells].copy()
    else:
        control = exact_map(mesh, r, nodes)
    return CurvedMesh(mesh, r, control)
