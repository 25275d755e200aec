"""Acceptance criteria 1-12.

Each test prints one ``criterion N: PASS/FAIL`` line; the lines are also
collected into an "acceptance criteria" section of the terminal summary.
Run only this suite with ``pytest tests/test_acceptance.py -v``.

Convergence orders are pairwise orders between the two finest of five
refinement levels.  Studies are cached so each (problem, r, k, lift) runs
once per session.
"""

import functools
import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from conftest import add_corner_loads, fd_jacobian, patch_problem, record_criterion, square_mesh, tubular_points
from curvedfem.analysis import geometric_error_study, run_study
from curvedfem.fem import FESpace, assemble_ventcel, eval_fe_function
from curvedfem.geometry import flower, unit_disk, unit_sphere_surface
from curvedfem.lift import LiftMap, lift_jacobian, lift_point, trace_deviation
from curvedfem.mesh import (
    elevate,
    face_points,
    generate_disk_mesh,
    generate_flower_mesh,
    generate_sphere_surface_mesh,
)
from curvedfem.reference import lagrange_basis, quadrature

LEVELS = 5
TOL = 0.2

pytestmark = pytest.mark.slow


@functools.lru_cache(maxsize=None)
def study(problem, r, k, lift="modified"):
    return run_study(problem, r, k, levels=LEVELS, lift_variant=lift, start=1)


def final(problem, r, k, norm, lift="modified"):
    return study(problem, r, k, lift).final_eoc(norm)


def near(values, targets, tol=TOL):
    return all(abs(v - t) <= tol for v, t in zip(values, targets))


def fmt(values):
    return "(" + ", ".join(f"{v:.2f}" for v in values) + ")"


# -- quantitative reproductions ----------------------------------------------


def test_criterion_01_sphere_affine():
    l2 = [final("sphere_laplace", 1, k, "eL2_surf") for k in (1, 2, 3, 4)]
    h1 = [final("sphere_laplace", 1, k, "eH1_surf") for k in (1, 2, 3, 4)]
    ok = near(l2, [2, 2, 2, 2]) and near(h1, [1, 2, 2, 2])
    record_criterion(1, ok, f"sphere r=1 L2 {fmt(l2)} H1 {fmt(h1)}")
    assert ok


def test_criterion_02_sphere_cubic():
    l2 = [final("sphere_laplace", 3, k, "eL2_surf") for k in (1, 2, 3, 4)]
    h1 = [final("sphere_laplace", 3, k, "eH1_surf") for k in (1, 2, 3, 4)]
    ok = near(l2, [2, 3, 3.9, 3.9]) and near(h1, [1, 2, 3, 3.9])
    record_criterion(2, ok, f"sphere r=3 L2 {fmt(l2)} H1 {fmt(h1)}")
    assert ok


def test_criterion_03_sphere_quadratic_superconvergence():
    v = final("sphere_laplace", 2, 3, "eL2_surf")
    soft = "met" if v >= 3.7 else "not met"
    ok = v >= 2.8
    record_criterion(3, ok, f"sphere r=2 k=3 L2 {v:.2f} (hard >= 2.8; soft target >= 3.7 {soft})")
    assert ok


def test_criterion_04_ventcel_surface_norms():
    rows = {}
    for r, l2t, h1t in ((1, [2, 2, 2, 2], [1, 2, 2, 2]), (3, [2, 3, 4, 4], [1, 2, 3, 4])):
        l2 = [final("ventcel_disk", r, k, "eL2_surf") for k in (1, 2, 3, 4)]
        h1 = [final("ventcel_disk", r, k, "eH1_surf") for k in (1, 2, 3, 4)]
        rows[r] = (l2, h1, near(l2, l2t) and near(h1, h1t))
    ok = all(row[2] for row in rows.values())
    detail = "; ".join(f"r={r} L2 {fmt(l2)} H1 {fmt(h1)}" for r, (l2, h1, _) in rows.items())
    record_criterion(4, ok, detail)
    assert ok


def test_criterion_05_ventcel_bulk_norms():
    targets = {1: ([2, 2, 2, 2], [1.0, 1.5, 1.5, 1.5]), 2: ([2, 3, 3.9, 4.0], [1, 2, 3, 3.5])}
    parts, ok = [], True
    for r, (l2t, h1t) in targets.items():
        l2 = [final("ventcel_disk", r, k, "eL2_bulk") for k in (1, 2, 3, 4)]
        h1 = [final("ventcel_disk", r, k, "eH1_bulk") for k in (1, 2, 3, 4)]
        ok = ok and near(l2, l2t) and near(h1, h1t)
        parts.append(f"r={r} L2 {fmt(l2)} H1 {fmt(h1)}")
    record_criterion(5, ok, "; ".join(parts))
    assert ok


def test_criterion_06_cubic_anomaly():
    l2 = final("ventcel_disk", 3, 2, "eL2_bulk")
    h1 = final("ventcel_disk", 3, 2, "eH1_bulk")
    ok = 2.2 <= l2 <= 2.9 and 1.2 <= h1 <= 1.8
    record_criterion(6, ok, f"r=3 k=2 bulk L2 {l2:.2f} in [2.2, 2.9], H1 {h1:.2f} in [1.2, 1.8]")
    assert ok


def test_criterion_07_lift_comparison():
    elliott = final("ventcel_disk", 2, 3, "eL2_bulk", lift="elliott")
    modified = final("ventcel_disk", 2, 3, "eL2_bulk")
    ok = elliott <= 2.8 and modified >= 3.7
    record_criterion(7, ok, f"r=2 k=3 bulk L2: elliott {elliott:.2f} (<= 2.8), modified {modified:.2f} (>= 3.7)")
    assert ok


# -- properties without a solver ---------------------------------------------


def test_criterion_08_trace_compatibility():
    q1 = quadrature(1, 12)
    modified = 0.0
    for make in (generate_disk_mesh, generate_flower_mesh):
        for r in (1, 2, 3):
            for level in (1, 2, 3):
                curved = elevate(make(level), r)
                modified = max(modified, trace_deviation(LiftMap(curved, "modified"), q1))
    elliott = min(
        trace_deviation(LiftMap(elevate(make(2), 2), "elliott"), q1)
        for make in (generate_disk_mesh, generate_flower_mesh)
    )
    ok = modified <= 1e-12 and elliott > 0.0
    record_criterion(8, ok, f"modified max deviation {modified:.1e} (<= 1e-12), elliott r=2 {elliott:.1e} (> 0)")
    assert ok


def _rel(a, b):
    return np.linalg.norm(a - b, axis=(-2, -1)) / np.maximum(np.linalg.norm(b, axis=(-2, -1)), 1e-300)


def test_criterion_09_jacobians():
    rng = np.random.default_rng(9)
    worst = {}
    # projection b on the disk, the flower and the sphere
    for dom in (unit_disk(), flower(), unit_sphere_surface()):
        x = tubular_points(dom, rng, 100)
        err = _rel(dom.projection_jacobian(x), fd_jacobian(dom.project, x))
        worst[f"b/{dom.name}"] = err.max()
    # geometric map F^(r) and lift G on the flower, r = 3
    curved = elevate(generate_flower_mesh(2), 3)
    cells = rng.choice(curved.boundary_faces[:, 0], size=100)
    xhat = rng.dirichlet(np.ones(3), size=100)[:, 1:]
    geo, lifts = [], {"modified": [], "elliott": []}
    for cell, p in zip(cells, xhat):
        p = p[None]
        _, dx = curved.geometric_map(cell, p)
        fd = fd_jacobian(lambda y: curved.geometric_map(cell, y)[0], p)
        geo.append(_rel(dx, fd).max())
        for variant, out in lifts.items():
            lift = LiftMap(curved, variant)
            dg, _ = lift_jacobian(lift, cell, p)
            fd_g = fd_jacobian(lambda y: lift_point(lift, cell, y), p)
            out.append(_rel(dg @ dx, fd_g).max())
    worst["F^(r)"] = max(geo)
    worst.update({f"G/{k}": max(v) for k, v in lifts.items()})
    ok = max(worst.values()) <= 1e-5
    record_criterion(9, ok, "max rel FD error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def _monomial(dim, powers):
    return math.prod(math.factorial(a) for a in powers) / math.factorial(sum(powers) + dim)


def test_criterion_10_reference_and_continuity():
    quad_err = 0.0
    for dim, orders in ((1, range(0, 21)), (2, range(0, 21)), (3, range(0, 21, 4))):
        for order in orders:
            q = quadrature(dim, order)
            for powers in np.ndindex(*(order + 1,) * dim):
                if sum(powers) > order:
                    continue
                vals = np.prod(q.points ** np.array(powers), axis=1)
                exact = _monomial(dim, powers)
                quad_err = max(quad_err, abs(q.integrate(vals) - exact) / exact)
    rng = np.random.default_rng(10)
    kron = pou = 0.0
    for dim in (1, 2, 3):
        for k in (1, 2, 3, 4):
            basis = lagrange_basis(dim, k)
            kron = max(kron, np.abs(basis.eval(basis.points) - np.eye(len(basis))).max())
            pts = rng.dirichlet(np.ones(dim + 1), size=100)[:, 1:]
            pou = max(pou, np.abs(basis.eval(pts).sum(axis=1) - 1).max())
    jump = 0.0
    curved = elevate(generate_flower_mesh(2), 3)
    parent = curved.parent
    s = np.linspace(0.05, 0.95, 5)
    owners = {}
    for c in range(parent.n_cells):
        for f in range(3):
            owners.setdefault(parent.cell_edges[c, f], []).append((c, f))
    for k in (1, 2, 3, 4):
        space = FESpace(curved, k)
        coeffs = rng.standard_normal(space.n_dofs)
        for pairs in owners.values():
            if len(pairs) != 2:
                continue
            traces = []
            for c, f in pairs:
                x, _ = curved.map(face_points(f, s), [c])
                v, _, _ = eval_fe_function(space, coeffs, c, face_points(f, s))
                order = np.lexsort((x[0][:, 1], x[0][:, 0]))
                traces.append(v[order])
            jump = max(jump, np.abs(traces[0] - traces[1]).max())
    ok = quad_err <= 1e-12 and kron <= 1e-13 and pou <= 1e-13 and jump <= 1e-12
    record_criterion(
        10, ok,
        f"quadrature rel {quad_err:.1e} (<= 1e-12), Kronecker {kron:.1e} and partition {pou:.1e} (<= 1e-13), "
        f"face jump {jump:.1e} (<= 1e-12)",
    )
    assert ok


def test_criterion_11_patch_test():
    mesh = elevate(square_mesh(4), 1)
    worst = 0.0
    for k in (1, 2, 3, 4):
        spec, grad = patch_problem(k)
        space = FESpace(mesh, k)
        system = assemble_ventcel(space, spec, LiftMap(mesh))
        rhs = add_corner_loads(space, spec, grad, system.rhs.copy())
        uh = spla.spsolve(system.matrix.tocsc(), rhs)
        worst = max(worst, np.abs(uh - space.interpolate(spec.u)).max())
    ok = worst <= 1e-10
    record_criterion(11, ok, f"square, k=1..4, max nodal error {worst:.1e} (<= 1e-10)")
    assert ok


def test_criterion_12_measure_identity():
    worst = {}
    for make in (generate_disk_mesh, generate_flower_mesh):
        for r in (1, 2, 3):
            for level in (1, 2, 3, 4):
                curved = elevate(make(level), r)
                err = abs(LiftMap(curved).lifted_measure() - curved.domain.exact_measure)
                name = curved.domain.name
                worst[name] = max(worst.get(name, 0.0), err)
    ok = max(worst.values()) <= 1e-10
    record_criterion(12, ok, "r=1..3, levels 1..4, max |int J_G - |Omega|| " + ", ".join(
        f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


# -- further study invariants (reuse the cached studies) ---------------------


def test_ventcel_quadratic_p2_bulk_order():
    assert 2.9 <= final("ventcel_disk", 2, 2, "eL2_bulk") <= 3.3


def test_errors_decrease_in_every_study():
    for r in (1, 2, 3):
        for k in (1, 2, 3, 4):
            rep = study("ventcel_disk", r, k)
            for norm in ("eL2_bulk", "eH1_bulk", "eL2_surf", "eH1_surf"):
                e = rep.errors(norm)
                assert all(b < a for a, b in zip(e, e[1:])), (r, k, norm, e)


def test_bulk_order_within_conjectured_bound():
    # observed bulk L2 order <= min(k + 1, r_eff + 1) + 0.3, with r_eff + 1
    # the observed order of the boundary distance on the same meshes
    for r in (1, 2, 3):
        geo = geometric_error_study("disk", r, levels=LEVELS, start=1)
        r_eff_plus_one = geo.distance_eoc[-1]
        for k in (1, 2, 3, 4):
            v = final("ventcel_disk", r, k, "eL2_bulk")
            assert v <= min(k + 1, r_eff_plus_one) + 0.3, (r, k, v, r_eff_plus_one)
