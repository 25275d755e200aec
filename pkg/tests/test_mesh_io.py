import numpy as np
import pytest

from curvedfem.errors import InvalidMesh
from curvedfem.geometry import unit_disk
from curvedfem.mesh import elevate, generate_disk_mesh, generate_flower_mesh
from curvedfem.mesh_io import read_msh, write_msh, write_vtk


@pytest.mark.parametrize("make", [generate_disk_mesh, generate_flower_mesh])
def test_msh_round_trip(tmp_path, make):
    mesh = make(2)
    path = tmp_path / "m.msh"
    write_msh(path, mesh)
    back, dist = read_msh(path, mesh.domain)
    assert back.n_cells == mesh.n_cells and back.n_vertices == mesh.n_vertices
    assert np.allclose(np.sort(back.vertices, axis=0), np.sort(mesh.vertices, axis=0), atol=1e-14)
    assert np.isclose(back.areas().sum(), mesh.areas().sum(), rtol=1e-14)
    assert dist.max() <= 1e-12
    assert len(back.boundary_faces) == len(mesh.boundary_faces)


def test_msh_snapping(tmp_path):
    mesh = generate_disk_mesh(2)
    path = tmp_path / "m.msh"
    write_msh(path, mesh)
    text = path.read_text().splitlines()
    # perturb the coordinates of the first boundary node radially by 1e-5
    j = int(np.flatnonzero(mesh.boundary)[0])
    start = text.index("$Nodes") + 2
    x = mesh.vertices[j] * (1 + 1e-5)
    text[start + j] = f"{j + 1} {x[0]:.17g} {x[1]:.17g} 0"
    path.write_text("\n".join(text) + "\n")
    back, dist = read_msh(path, unit_disk())
    assert np.isclose(dist.max(), 1e-5, rtol=1e-6)
    r = np.linalg.norm(back.vertices[back.boundary], axis=1)
    assert np.abs(r - 1).max() <= 1e-14


def test_msh_far_node_rejected(tmp_path):
    mesh = generate_disk_mesh(1)
    path = tmp_path / "m.msh"
    write_msh(path, mesh)
    text = path.read_text().splitlines()
    j = int(np.flatnonzero(mesh.boundary)[0])
    start = text.index("$Nodes") + 2
    x = mesh.vertices[j] * 1.1
    text[start + j] = f"{j + 1} {x[0]:.17g} {x[1]:.17g} 0"
    path.write_text("\n".join(text) + "\n")
    with pytest.raises(InvalidMesh):
        read_msh(path, unit_disk())


def test_msh_bad_format(tmp_path):
    path = tmp_path / "bad.msh"
    path.write_text("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
    with pytest.raises(InvalidMesh):
        read_msh(path, unit_disk())


@pytest.mark.parametrize("r", [1, 2, 3])
def test_vtk_cell_count(tmp_path, r):
    curved = elevate(generate_flower_mesh(1), r)
    path = tmp_path / "m.vtk"
    n = write_vtk(path, curved, point_data={"radius": lambda x: np.linalg.norm(x, axis=-1)})
    assert n == curved.n_cells * r**2
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert f"CELL_TYPES {n}" in lines
    npts = int(lines[4].split()[1])
    assert npts == curved.n_cells * (r + 1) * (r + 2) // 2
    assert "SCALARS radius double 1" in lines
