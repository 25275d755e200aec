"""High-order curved finite elements on smooth domains.

Curved meshes of degree ``r`` are built by interpolating an exact
transformation of an affine mesh onto a domain given by its signed
distance.  Lagrange ``P^k`` spaces on those meshes discretise the Ventcel
problem on the disk and the Laplace-Beltrami problem on the sphere, and
errors are measured on the exact geometry through a volume lift.
"""

from ._kernels import available_backends, backend, use_backend
from .analysis import ErrorRecord, StudyReport, eoc, geometric_error_study, lifted_errors, run_study
from .errors import CurvedFEMError
from .fem import (
    FESpace,
    LinearSystem,
    ProblemSpec,
    assemble_surface_laplace,
    assemble_ventcel,
    build_space,
    eval_fe_function,
    sphere_laplace_problem,
    ventcel_disk_problem,
)
from .geometry import Ball, Flower, flower, unit_disk, unit_sphere_surface
from .lift import LiftMap
from .mesh import (
    AffineMesh,
    CurvedMesh,
    elevate,
    generate_disk_mesh,
    generate_flower_mesh,
    generate_sphere_surface_mesh,
    refine,
)
from .reference import lagrange_basis, quadrature
from .solver import SolveReport, solve_cg

__version__ = "0.1.0"
