import math

import numpy as np
import pytest

from curvedfem.geometry import ImplicitDomain
from curvedfem.fem import ProblemSpec
from curvedfem.mesh import AffineMesh


class Square(ImplicitDomain):
    """The square [-1, 1]^2, used for patch tests on straight-sided meshes."""

    name = "square"
    dim = 2
    tubular_radius = 0.5
    exact_measure = 4.0
    boundary_measure = 8.0

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.max(np.abs(x) - 1.0, axis=-1)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        side = np.argmax(np.abs(x) - 1.0, axis=-1)
        n = np.zeros(x.shape)
        np.put_along_axis(n, side[..., None], 1.0, axis=-1)
        return n * np.sign(x)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (2,))


def square_mesh(n):
    """Union-jack triangulation of the square with ``n`` (even) cells per side.

    Diagonals run through the square's corners so no triangle has three
    boundary vertices.
    """
    t = np.linspace(-1.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    idx = lambda i, j: i * (n + 1) + j
    cells = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            if (i < n // 2) == (j < n // 2):
                cells += [(a, b, c), (a, c, d)]
            else:
                cells += [(a, b, d), (b, c, d)]
    boundary = np.isclose(np.max(np.abs(verts), axis=1), 1.0)
    return AffineMesh(verts, np.array(cells), Square(), boundary)


@pytest.fixture
def square():
    return Square()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def fd_jacobian(func, x, step=1e-6):
    """Central-difference Jacobian of ``func`` at the points ``x`` (n, d)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[j] = step
        cols.append((func(x + e) - func(x - e)) / (2 * step))
    return np.stack(cols, axis=-1)


def tubular_points(dom, rng, n):
    """Random points within 0.9 tubular radii of the boundary."""
    if dom.dim == 3:
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1)[:, None]
        return v * (1.0 + rng.uniform(-0.8, 0.8, size=(n, 1)) * dom.tubular_radius)
    t = rng.uniform(0, 2 * math.pi, n)
    if dom.name == "disk":
        p = np.stack([np.cos(t), np.sin(t)], axis=1)
        return p * (1.0 + rng.uniform(-0.8, 0.8, size=(n, 1)) * dom.tubular_radius)
    p = dom.curve(t)[0]
    return p + dom.normal(t) * rng.uniform(-0.8, 0.8, size=(n, 1)) * dom.tubular_radius


def monomial_integral(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def patch_problem(k, kappa=1.0, alpha=1.5, beta=0.7):
    """Polynomial u of degree k with data for the Ventcel problem on the square."""
    c = np.array([0.3, -0.2, 0.5, 0.25, -0.4, 0.15, 0.1, -0.3, 0.2, 0.05, -0.1, 0.12, 0.07, -0.05, 0.03])
    terms = [(a, b) for n in range(k + 1) for a in range(n, -1, -1) for b in [n - a]]
    coef = c[: len(terms)]

    def mono(p, a, b, da=0, db=0):
        x, y = p[..., 0], p[..., 1]
        if da > a or db > b:
            return np.zeros(x.shape)
        fa = np.prod(np.arange(a - da + 1, a + 1)) if da else 1.0
        fb = np.prod(np.arange(b - db + 1, b + 1)) if db else 1.0
        return fa * fb * x ** (a - da) * y ** (b - db)

    def deriv(p, da, db):
        return sum(ci * mono(p, a, b, da, db) for ci, (a, b) in zip(coef, terms))

    u = lambda p: deriv(p, 0, 0)
    lap = lambda p: deriv(p, 2, 0) + deriv(p, 0, 2)

    def g(p):
        on_x = np.abs(p[..., 0]) >= np.abs(p[..., 1])
        sx, sy = np.sign(p[..., 0]), np.sign(p[..., 1])
        dn = np.where(on_x, sx * deriv(p, 1, 0), sy * deriv(p, 0, 1))
        dss = np.where(on_x, deriv(p, 0, 2), deriv(p, 2, 0))
        return -beta * dss + dn + alpha * u(p)

    spec = ProblemSpec(kappa=kappa, alpha=alpha, beta=beta, f=lambda p: -lap(p) + kappa * u(p), g=g, u=u)
    grad = lambda p: np.stack([deriv(p, 1, 0), deriv(p, 0, 1)], axis=-1)
    return spec, grad


def add_corner_loads(space, spec, grad, rhs):
    """Point loads left at the square's corners by the tangential term.

    Integrating ``beta u_s v_s`` by parts on each side leaves
    ``beta grad u(c) . t`` at each corner, summed over the unit vectors
    ``t`` of both sides pointing to the corner.
    """
    pts = space.dof_points()
    for corner in ([1, 1], [1, -1], [-1, 1], [-1, -1]):
        c = np.array(corner, dtype=float)
        j = np.flatnonzero(np.all(np.isclose(pts, c), axis=1))
        assert len(j) == 1
        rhs[j[0]] += spec.beta * grad(c) @ c
    return rhs


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    """Store and print the outcome line of one acceptance criterion."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
