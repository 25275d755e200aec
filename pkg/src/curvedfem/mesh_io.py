"""Gmsh MSH 2.2 import and legacy VTK export."""

import numpy as np

from .errors import InvalidMesh
from .mesh import AffineMesh

__all__ = ["read_msh", "write_msh", "write_vtk"]

# gmsh element type -> number of nodes
_GMSH_NODES = {1: 2, 2: 3, 15: 1}


def read_msh(path, domain, surface=False, snap_tol=1e-3):
    """Read a linear triangle mesh from a MSH 2.2 ASCII file.

    Boundary vertices are taken from line elements (or every vertex for a
    surface mesh) and snapped onto the exact boundary with the projection.

    Returns
    -------
    mesh : AffineMesh
    distances : ndarray
        ``|d|`` of the boundary vertices before snapping.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    try:
        i = lines.index("$MeshFormat")
        version = lines[i + 1].split()
        if not version[0].startswith("2") or version[1] != "0":
            raise InvalidMesh(f"only ASCII MSH 2.x is supported, got {version[:2]}")
        i = lines.index("$Nodes")
        nn = int(lines[i + 1])
        ids, coords = [], []
        for ln in lines[i + 2 : i + 2 + nn]:
            parts = ln.split()
            ids.append(int(parts[0]))
            coords.append([float(v) for v in parts[1:4]])
        i = lines.index("$Elements")
        ne = int(lines[i + 1])
        tris, edges = [], []
        for ln in lines[i + 2 : i + 2 + ne]:
            parts = [int(v) for v in ln.split()]
            etype, ntags = parts[1], parts[2]
            nodes = parts[3 + ntags :]
            if etype == 2:
                tris.append(nodes[:3])
            elif etype == 1:
                edges.append(nodes[:2])
            elif etype not in _GMSH_NODES:
                raise InvalidMesh(f"unsupported gmsh element type {etype}")
    except (ValueError, IndexError) as exc:
        raise InvalidMesh(f"malformed MSH file: {exc}") from exc

    index = {node: j for j, node in enumerate(ids)}
    coords = np.array(coords)[:, : domain.dim]
    cells = np.array([[index[n] for n in t] for t in tris], dtype=np.int64)
    # drop nodes not used by any triangle (e.g. geometry points)
    used = np.unique(cells)
    remap = -np.ones(len(coords), dtype=np.int64)
    remap[used] = np.arange(len(used))
    coords = coords[used]
    cells = remap[cells]
    boundary = np.zeros(len(coords), dtype=bool)
    if surface:
        boundary[:] = True
    else:
        for e in edges:
            for n in e:
                j = remap[index[n]]
                if j >= 0:
                    boundary[j] = True
    dist = np.abs(domain.signed_distance(coords[boundary]))
    if dist.size and dist.max() > snap_tol:
        raise InvalidMesh(f"boundary node {dist.max():.2e} away from the boundary")
    coords[boundary] = domain.project(coords[boundary])
    mesh = AffineMesh(coords, cells, domain, boundary, surface=surface)
    return mesh, dist


def write_msh(path, mesh):
    """Write a linear mesh as MSH 2.2 ASCII (triangles plus boundary lines)."""
    pts = mesh.vertices
    if pts.shape[1] == 2:
        pts = np.hstack([pts, np.zeros((len(pts), 1))])
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(len(pts))]
    out += [f"{j + 1} {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}" for j, p in enumerate(pts)]
    out.append("$EndNodes")
    elems = []
    for cell, f in mesh.boundary_faces:
        a, b = [v for i, v in enumerate(mesh.cells[cell]) if i != f]
        elems.append(f"1 2 1 1 {a + 1} {b + 1}")
    for c in mesh.cells:
        elems.append(f"2 2 2 2 {c[0] + 1} {c[1] + 1} {c[2] + 1}")
    out += ["$Elements", str(len(elems))]
    out += [f"{j + 1} {e}" for j, e in enumerate(elems)]
    out.append("$EndElements")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def write_vtk(path, curved, level=None, point_data=None):
    """Write a curved mesh as a legacy ASCII VTK unstructured grid.

    Every curved cell is split into ``level**2`` straight sub-triangles on
    the image of a uniform reference lattice (``level = r`` by default).

    Parameters
    ----------
    point_data : dict of name -> callable, optional
        Functions of the physical points written as scalar point data.
    """
    level = curved.r if level is None else level
    nodes, x = curved.lattice(level)
    # local sub-triangles of the reference lattice
    lookup = {tuple(np.rint(p * level).astype(int)): j for j, p in enumerate(nodes)}
    sub = []
    for i in range(level):
        for j in range(level - i):
            sub.append([lookup[(i, j)], lookup[(i + 1, j)], lookup[(i, j + 1)]])
            if i + j < level - 1:
                sub.append([lookup[(i + 1, j)], lookup[(i + 1, j + 1)], lookup[(i, j + 1)]])
    sub = np.array(sub)
    nc, nl, g = x.shape
    pts = x.reshape(-1, g)
    if g == 2:
        pts = np.hstack([pts, np.zeros((len(pts), 1))])
    tris = (sub[None, :, :] + nl * np.arange(nc)[:, None, None]).reshape(-1, 3)
    out = [
        "# vtk DataFile Version 3.0",
        f"curved mesh r={curved.r}",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(pts)} double",
    ]
    out += [f"{p[0]:.16g} {p[1]:.16g} {p[2]:.16g}" for p in pts]
    out.append(f"CELLS {len(tris)} {4 * len(tris)}")
    out += [f"3 {t[0]} {t[1]} {t[2]}" for t in tris]
    out.append(f"CELL_TYPES {len(tris)}")
    out += ["5"] * len(tris)
    if point_data:
        out.append(f"POINT_DATA {len(pts)}")
        for name, func in point_data.items():
            vals = np.asarray(func(x.reshape(-1, g)), dtype=float)
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [f"{v:.16g}" for v in vals]
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    return len(tris)
