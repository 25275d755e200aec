"""Lifted error norms, convergence orders and study orchestration."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CurvedFEMError, StudyAborted, ZeroError
from .fem import (
    FESpace,
    assemble_surface_laplace,
    assemble_ventcel,
    face_groups,
    face_tangent,
    sphere_laplace_problem,
    ventcel_disk_problem,
)
from .lift import LiftMap
from .mesh import FACE_VERTICES, elevate, face_points, generate_disk_mesh, generate_flower_mesh, generate_sphere_surface_mesh
from .reference import MAX_ORDER, quadrature, reference_vertices, surface_order, volume_order
from .solver import solve_cg

__all__ = [
    "ErrorRecord",
    "StudyReport",
    "GeometricReport",
    "eoc",
    "lifted_errors",
    "geometric_error_study",
    "run_study",
    "normalize_problem",
    "mesh_family",
    "write_csv",
    "eoc_table",
    "NORMS",
    "CSV_HEADER",
]

NORMS = ("eL2_bulk", "eH1_bulk", "eL2_surf", "eH1_surf")
CSV_HEADER = "h,ndofs," + ",".join(NORMS)
PROBLEMS = ("ventcel_disk", "sphere_laplace")
ZERO_TOL = 1e-14
VERTS = reference_vertices(2)


@dataclass
class ErrorRecord:
    """Errors of one refinement level.

    Bulk fields are NaN for the surface problem, which has no volume.
    """

    h: float
    n_dofs: int
    eL2_bulk: float
    eH1_bulk: float
    eL2_surf: float
    eH1_surf: float

    def values(self):
        return [getattr(self, name) for name in NORMS]


def eoc(h, errors):
    """Pairwise convergence orders and the least-squares slope.

    Parameters
    ----------
    h, errors : sequences of equal length >= 2, ``h`` strictly decreasing

    Returns
    -------
    orders : list of float, length ``len(h) - 1``
    slope : float
        Slope of the least-squares line through ``(log h, log e)``.

    Raises
    ------
    ZeroError
        If an error is below ``1e-14``.
    """
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(h) < 2 or len(h) != len(e):
        raise ValueError("need at least two (h, error) pairs")
    if np.any(np.diff(h) >= 0):
        raise ValueError("h must be strictly decreasing")
    if np.any(e < ZERO_TOL):
        raise ZeroError(f"error {e.min():.3e} too small for an order estimate")
    lh, le = np.log(h), np.log(e)
    orders = list((le[:-1] - le[1:]) / (lh[:-1] - lh[1:]))
    slope = float(np.polyfit(lh, le, 1)[0])
    return orders, slope


@dataclass
class StudyReport:
    problem: str
    r: int
    k: int
    lift: str
    records: list = field(default_factory=list)

    @property
    def h(self):
        return [rec.h for rec in self.records]

    def errors(self, norm):
        return [getattr(rec, norm) for rec in self.records]

    @property
    def eoc(self):
        """``{norm: (pairwise orders, slope)}``; NaN norms are skipped."""
        out = {}
        if len(self.records) < 2:
            return out
        for norm in NORMS:
            e = self.errors(norm)
            if np.all(np.isnan(e)):
                continue
            try:
                out[norm] = eoc(self.h, e)
            except ZeroError:
                out[norm] = ([math.nan] * (len(e) - 1), math.nan)
        return out

    def final_eoc(self, norm):
        """Pairwise order between the two finest levels."""
        return self.eoc[norm][0][-1]


# ---------------------------------------------------------------------------
# error norms


def _error_order(k, r):
    return min(MAX_ORDER, volume_order(k, r, 2) + 2)


def _bulk_errors(space, coeffs, spec, lift, order):
    mesh = space.mesh
    q = quadrature(2, order)
    phi = space.basis.eval(q.points)
    dphi = space.basis.grad(q.points)
    local = coeffs[space.dof_map]
    data = lift.evaluate(q.points)
    uh = local @ phi.T
    gref = np.einsum("qia,ci->cqa", dphi, local)
    # grad u_h^l at G(x) = (D(G o F))^-T grad_ref u_h
    dg = data.dg
    guh = np.linalg.solve(np.swapaxes(dg, -1, -2), gref[..., None])[..., 0]
    w = np.abs(np.linalg.det(dg)) * q.weights
    eu = spec.u(data.g) - uh
    eg = spec.grad_u(data.g) - guh
    l2 = np.sum(w * eu**2)
    h1 = np.sum(w * np.sum(eg**2, axis=-1))
    return math.sqrt(l2), math.sqrt(h1)


def _tangential(grad, normal):
    return grad - np.sum(grad * normal, axis=-1, keepdims=True) * normal


def _surface_errors_faces(space, coeffs, spec, order):
    mesh = space.mesh
    dom = mesh.domain
    q1 = quadrature(1, order)
    l2 = h1 = 0.0
    for _, f, cells in face_groups(mesh):
        pts = face_points(f, q1.points[:, 0])
        phi = space.basis.eval(pts)
        dphi = space.basis.grad(pts)
        local = coeffs[space.dof_map[cells]]
        x, dx = mesh.map(pts, cells)
        tang = face_tangent(dx, f)
        # derivative of u_h along the same face parameter
        va, vb = FACE_VERTICES[f]
        ds = dphi @ (VERTS[vb] - VERTS[va])
        uh = local @ phi.T
        duh = local @ ds.T
        proj, db, _ = dom.projection_data(x)
        ptang = np.einsum("cqab,cqb->cqa", db, tang)
        plen2 = np.sum(ptang**2, axis=-1)
        guh = (duh / plen2)[..., None] * ptang
        normal = dom.grad(proj)
        eu = spec.u(proj) - uh
        eg = _tangential(spec.grad_u(proj), normal) - guh
        w = np.sqrt(plen2) * q1.weights
        l2 += np.sum(w * eu**2)
        h1 += np.sum(w * np.sum(eg**2, axis=-1))
    return math.sqrt(l2), math.sqrt(h1)


def _surface_errors_cells(space, coeffs, spec, order):
    mesh = space.mesh
    dom = mesh.domain
    q = quadrature(2, order)
    phi = space.basis.eval(q.points)
    dphi = space.basis.grad(q.points)
    local = coeffs[space.dof_map]
    x, dx = mesh.map(q.points)
    proj, db, _ = dom.projection_data(x)
    dp = np.einsum("cqab,cqbj->cqaj", db, dx)
    metric = np.einsum("cqai,cqaj->cqij", dp, dp)
    gref = np.einsum("qia,ci->cqa", dphi, local)
    guh = np.einsum("cqaj,cqj->cqa", dp, np.linalg.solve(metric, gref[..., None])[..., 0])
    uh = local @ phi.T
    normal = dom.grad(proj)
    eu = spec.u(proj) - uh
    eg = _tangential(spec.grad_u(proj), normal) - guh
    w = np.sqrt(np.linalg.det(metric)) * q.weights
    return math.sqrt(np.sum(w * eu**2)), math.sqrt(np.sum(w * np.sum(eg**2, axis=-1)))


def lifted_errors(space, coeffs, spec, lift, order=None):
    """The four lifted error norms of a discrete solution.

    Volume errors are integrated on the exact domain through the volume lift
    ``G``; boundary errors through the projection ``b`` applied to the curved
    boundary.  Gradients of ``u`` on the boundary are projected onto the
    tangent plane of the exact boundary.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if len(coeffs) != space.n_dofs:
        raise ValueError("coefficient vector does not match the space")
    if spec.u is None or spec.grad_u is None:
        raise ValueError("the exact solution and its gradient are required")
    mesh = space.mesh
    vol = _error_order(space.k, mesh.r) if order is None else order
    surf = min(MAX_ORDER, surface_order(space.k, mesh.r) + 2) if order is None else order
    if mesh.surface:
        l2s, h1s = _surface_errors_cells(space, coeffs, spec, vol)
        return ErrorRecord(mesh.h, space.n_dofs, math.nan, math.nan, l2s, h1s)
    l2b, h1b = _bulk_errors(space, coeffs, spec, lift, vol)
    l2s, h1s = _surface_errors_faces(space, coeffs, spec, surf)
    return ErrorRecord(mesh.h, space.n_dofs, l2b, h1b, l2s, h1s)


# ---------------------------------------------------------------------------
# geometric error


@dataclass
class GeometricReport:
    domain: str
    r: int
    h: list
    lifted_error: list
    plain_error: list
    max_distance: list
    plain_eoc: list
    distance_eoc: list
    superconvergent: bool


def _max_boundary_distance(curved, samples=9):
    dom = curved.domain
    s = np.linspace(0.0, 1.0, samples)
    if curved.surface:
        pts = quadrature(2, 8).points
        x, _ = curved.map(pts)
        return float(np.max(np.abs(dom.signed_distance(x))))
    worst = 0.0
    for _, f, cells in face_groups(curved):
        x, _ = curved.map(face_points(f, s), cells)
        worst = max(worst, float(np.max(np.abs(dom.signed_distance(x)))))
    return worst


def mesh_family(domain, levels, start=1):
    """Successively refined meshes of ``domain`` ('disk', 'flower', 'sphere')."""
    name = domain if isinstance(domain, str) else domain.name
    gens = {
        "disk": generate_disk_mesh,
        "flower": generate_flower_mesh,
        "sphere": generate_sphere_surface_mesh,
    }
    if name not in gens:
        raise ValueError(f"unknown domain {name!r}")
    first = start if name != "sphere" else start - 1
    return [gens[name](first + i) for i in range(levels)]


def geometric_error_study(domain, r, levels=4, start=1):
    """Measure errors of curved meshes of degree ``r`` on refined meshes.

    For each level records ``|int J_G - |Omega||`` (exact change of
    variables, so it only reflects quadrature error), the plain measure error
    ``|int 1 - |Omega||`` of the curved mesh, and the largest distance of the
    curved boundary to the exact one.  The mesh family is flagged
    superconvergent when the final plain-measure order reaches 3.5 while
    the interpolation estimate only guarantees ``r + 1``.
    """
    if r not in (1, 2, 3, 4):
        raise ValueError("r must be in 1..4")
    meshes = mesh_family(domain, levels, start)
    dom = meshes[0].domain
    q = quadrature(2, min(MAX_ORDER, 2 * r + 6))
    # a surface mesh approximates the area of the sphere, not the ball volume
    target = dom.boundary_measure if meshes[0].surface else dom.exact_measure
    hs, lifted, plain, dist = [], [], [], []
    for m in meshes:
        curved = elevate(m, r)
        hs.append(m.h)
        plain.append(abs(float(np.sum(curved.jacobian_determinants(q.points) @ q.weights)) - target))
        if curved.surface:
            lifted.append(math.nan)
        else:
            lift = LiftMap(curved)
            lifted.append(abs(lift.lifted_measure() - dom.exact_measure))
        dist.append(_max_boundary_distance(curved))
    plain_eoc, _ = eoc(hs, plain)
    dist_eoc, _ = eoc(hs, dist)
    return GeometricReport(
        dom.name, r, hs, lifted, plain, dist, plain_eoc, dist_eoc,
        superconvergent=bool(plain_eoc[-1] >= 3.5 and r + 1 < 3.5),
    )


# ---------------------------------------------------------------------------
# studies


def normalize_problem(problem):
    name = problem.replace("-", "_")
    if name not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}; choose from {PROBLEMS}")
    return name


def _solve_level(problem, mesh, r, k, variant):
    stage = "elevate"
    try:
        curved = elevate(mesh, r)
        lift = LiftMap(curved, variant)
        space = FESpace(curved, k)
        stage = "assemble"
        if problem == "ventcel_disk":
            spec = ventcel_disk_problem()
            system = assemble_ventcel(space, spec, lift)
        else:
            spec = sphere_laplace_problem()
            system = assemble_surface_laplace(space, spec.g)
        stage = "solve"
        coeffs, _ = solve_cg(system)
        stage = "errors"
        return lifted_errors(space, coeffs, spec, lift)
    except CurvedFEMError as exc:
        exc.stage = stage
        raise


def run_study(problem, r, k, levels=4, lift_variant="modified", start=None, meshes=None):
    """Convergence study of one ``(r, k)`` pair on a refined mesh family.

    Parameters
    ----------
    problem : {'ventcel_disk', 'sphere_laplace'}
    r, k : int
        Geometric and finite element degrees.
    levels : int
        Number of refinement levels (>= 2).
    lift_variant : {'modified', 'elliott'}
    start : int, optional
        Coarsest level (disk: ``2**start`` rings; sphere: subdivision level).
    meshes : list of AffineMesh, optional
        Use this family instead of the built-in generator.

    Raises
    ------
    StudyAborted
        When a level fails; ``exc.report`` holds the completed levels.
    """
    problem = normalize_problem(problem)
    if r not in (1, 2, 3):
        raise ValueError("r must be 1, 2 or 3")
    if k not in (1, 2, 3, 4):
        raise ValueError("k must be 1, 2, 3 or 4")
    if levels < 2:
        raise ValueError("levels must be ≥ 2")
    report = StudyReport(problem, r, k, lift_variant)
    if meshes is None:
        domain = "disk" if problem == "ventcel_disk" else "sphere"
        if start is None:
            start = 1
        try:
            meshes = mesh_family(domain, levels, start)
        except CurvedFEMError as exc:
            raise StudyAborted(f"mesh generation failed: {exc}", "mesh", report) from exc
    for mesh in meshes[:levels]:
        try:
            report.records.append(_solve_level(problem, mesh, r, k, lift_variant))
        except CurvedFEMError as exc:
            stage = getattr(exc, "stage", "unknown")
            raise StudyAborted(f"{stage} failed at h={mesh.h:.4g}: {exc}", stage, report) from exc
    return report


# ---------------------------------------------------------------------------
# output


def write_csv(report, path):
    """One row per level, 16 significant digits."""
    lines = [CSV_HEADER]
    for rec in report.records:
        vals = [rec.h, rec.n_dofs] + rec.values()
        lines.append(",".join("%.16g" % v if i != 1 else str(int(v)) for i, v in enumerate(vals)))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


ROW_LABELS = {1: "Affine mesh (r=1)", 2: "Quadratic mesh (r=2)", 3: "Cubic mesh (r=3)"}
NORM_TITLES = {
    "eL2_bulk": "||u - u_h^l||_{L2(Omega)}",
    "eH1_bulk": "||grad(u - u_h^l)||_{L2(Omega)}",
    "eL2_surf": "||u - u_h^l||_{L2(Gamma)}",
    "eH1_surf": "||grad_Gamma(u - u_h^l)||_{L2(Gamma)}",
}


def eoc_table(reports, norm, k_values=(1, 2, 3, 4)):
    """Markdown table of final pairwise orders: rows r, columns P1..P4."""
    cell = {}
    for rep in reports:
        orders = rep.eoc.get(norm)
        if orders is not None:
            cell[(rep.r, rep.k)] = orders[0][-1]
    rows_r = sorted({rep.r for rep in reports})
    head = "| | " + " | ".join(f"P{k}" for k in k_values) + " |"
    sep = "|---|" + "---|" * len(k_values)
    lines = [f"Convergence order of {NORM_TITLES[norm]}", "", head, sep]
    for r in rows_r:
        vals = []
        for k in k_values:
            v = cell.get((r, k))
            vals.append("-" if v is None or math.isnan(v) else f"{v:.2f}")
        lines.append(f"| {ROW_LABELS.get(r, f'r={r}')} | " + " | ".join(vals) + " |")
    return "\n".join(lines) + "\n"
