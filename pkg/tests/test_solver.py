import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from curvedfem import _kernels
from curvedfem.errors import IndefiniteBreakdown, MaxIterations
from curvedfem.fem import FESpace, LinearSystem, assemble_ventcel, ventcel_disk_problem
from curvedfem.lift import LiftMap
from curvedfem.mesh import elevate, generate_disk_mesh
from curvedfem.solver import solve_cg


def random_spd(n, rng, cond=1e3):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.geomspace(1.0, cond, n)
    return (q * eig) @ q.T


@pytest.fixture(scope="module")
def ventcel_system():
    curved = elevate(generate_disk_mesh(3), 2)
    return assemble_ventcel(FESpace(curved, 2), ventcel_disk_problem(), LiftMap(curved))


def test_identity_one_iteration():
    b = np.arange(1.0, 11.0)
    x, rep = solve_cg((sp.identity(10), b))
    assert rep.iterations == 1
    assert np.allclose(x, b, rtol=0, atol=1e-15)


def test_diagonal_one_iteration():
    # Jacobi preconditioning makes any diagonal system trivial
    d = np.linspace(1.0, 1e4, 30)
    b = np.ones(30)
    x, rep = solve_cg((sp.diags(d), b))
    assert rep.iterations == 1
    assert np.allclose(x, 1.0 / d, rtol=1e-14)


def test_random_spd_matches_direct(rng):
    a = random_spd(50, rng)
    b = rng.standard_normal(50)
    x, rep = solve_cg((sp.csr_matrix(a), b))
    assert rep.converged
    ref = np.linalg.solve(a, b)
    assert np.linalg.norm(x - ref) <= 1e-9 * np.linalg.norm(ref)


def test_zero_rhs():
    x, rep = solve_cg((sp.identity(5), np.zeros(5)))
    assert np.all(x == 0) and rep.iterations == 0 and rep.converged


def test_ventcel_residual(ventcel_system):
    x, rep = solve_cg(ventcel_system)
    a, b = ventcel_system.matrix, ventcel_system.rhs
    res = np.linalg.norm(b - a @ x) / np.linalg.norm(b)
    assert rep.converged and res <= rep.tolerance
    # the tolerance is the requested one unless rounding forbids it
    assert rep.tolerance <= max(1e-12, 1e-13 * len(b))
    ref = sp.linalg.spsolve(a.tocsc(), b)
    assert np.abs(x - ref).max() <= 1e-9 * np.abs(ref).max()


def test_permutation_invariance(ventcel_system, rng):
    a, b = ventcel_system.matrix, ventcel_system.rhs
    perm = rng.permutation(len(b))
    x, _ = solve_cg(ventcel_system)
    xp, _ = solve_cg((a[perm][:, perm], b[perm]))
    assert np.abs(xp - x[perm]).max() <= 1e-9 * np.abs(x).max()


def test_energy_error_monotone(rng):
    # CG minimises the A-norm of the error over growing Krylov spaces, so
    # that error is monotone (the residual itself need not be)
    n = 40
    a = random_spd(n, rng, cond=1e4)
    b = rng.standard_normal(n)
    exact = np.linalg.solve(a, b)
    mat = sp.csr_matrix(a)
    errs = []
    for its in range(1, 25):
        x, _, _, _ = _kernels.pcg(mat.indptr, mat.indices, mat.data, b, np.zeros(n), 1e-30, its)
        e = x - exact
        errs.append(np.sqrt(e @ a @ e))
    assert all(e2 <= e1 * (1 + 1e-10) for e1, e2 in zip(errs, errs[1:]))


def test_max_iterations(rng):
    a = random_spd(60, rng, cond=1e6)
    b = rng.standard_normal(60)
    with pytest.raises(MaxIterations):
        solve_cg((sp.csr_matrix(a), b), max_iter=3)
    x, rep = solve_cg((sp.csr_matrix(a), b), max_iter=3, check=False)
    assert not rep.converged and rep.iterations == 3


def test_indefinite_breakdown():
    a = sp.diags([1.0, -1.0, 2.0]) + sp.csr_matrix(np.ones((3, 3)) * 0.1)
    with pytest.raises(IndefiniteBreakdown):
        solve_cg((a, np.array([1.0, 1.0, 1.0])))


def test_invalid_tolerance():
    with pytest.raises(ValueError):
        solve_cg((sp.identity(3), np.ones(3)), rel_tol=0.0)


def test_linear_system_object(ventcel_system):
    x, rep = solve_cg(LinearSystem(ventcel_system.matrix, ventcel_system.rhs), rel_tol=1e-8)
    assert rep.converged and rep.tolerance >= 1e-8


@pytest.mark.parametrize("name", _kernels.available_backends())
def test_backends_agree(ventcel_system, name):
    prev = _kernels.backend()
    try:
        _kernels.use_backend(name)
        x, rep = solve_cg(ventcel_system)
    finally:
        _kernels.use_backend(prev)
    ref = sp.linalg.spsolve(ventcel_system.matrix.tocsc(), ventcel_system.rhs)
    assert np.abs(x - ref).max() <= 1e-9 * np.abs(ref).max()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 30))
def test_solution_property(seed, n):
    rng = np.random.default_rng(seed)
    a = random_spd(n, rng, cond=100.0)
    b = rng.standard_normal(n)
    x, rep = solve_cg((sp.csr_matrix(a), b))
    assert np.linalg.norm(b - a @ x) <= rep.tolerance * np.linalg.norm(b) * (1 + 1e-12)
