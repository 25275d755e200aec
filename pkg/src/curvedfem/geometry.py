"""Smooth domains described by their signed distance function.

Every domain exposes the signed distance ``d`` (negative inside), its
gradient (the unit outward normal extended off the boundary), its Hessian
and the closest-point projection ``b(x) = x - d(x) grad d(x)``.  All
methods are vectorised: points are arrays of shape ``(..., dim)``.
"""

import math

import numpy as np

from .errors import NonConvergence, OutsideTubularNeighborhood

__all__ = [
    "ImplicitDomain",
    "Ball",
    "Flower",
    "unit_disk",
    "unit_sphere_surface",
    "flower",
    "signed_distance",
    "project",
    "projection_jacobian",
]


class ImplicitDomain:
    """Base class for a smooth domain given implicitly by its signed distance.

    Subclasses implement :meth:`signed_distance`, :meth:`grad` and
    :meth:`hessian`; the projection and its differential follow from those.

    Attributes
    ----------
    dim : int
        Ambient dimension.
    tubular_radius : float
        Radius of the band around the boundary where the projection is used.
    exact_measure : float
        Area (2D) or volume (3D) of the domain.
    boundary_measure : float
        Length (2D) or area (3D) of the boundary.
    """

    name = "domain"
    dim = 2
    tubular_radius = 0.5
    exact_measure = math.nan
    boundary_measure = math.nan

    def signed_distance(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def check_tubular(self, dist):
        dist = np.asarray(dist)
        if dist.size and np.max(np.abs(dist)) >= self.tubular_radius:
            raise OutsideTubularNeighborhood(
                f"{self.name}: |d| = {np.max(np.abs(dist)):.3g} exceeds the "
                f"tubular radius {self.tubular_radius}"
            )

    def project(self, x, check=True):
        """Closest point on the boundary, ``x - d(x) grad d(x)``."""
        x = np.asarray(x, dtype=float)
        dist = self.signed_distance(x)
        if check:
            self.check_tubular(dist)
        return x - dist[..., None] * self.grad(x)

    def projection_jacobian(self, x, check=True):
        """Differential ``I - n n^T - d Hess(d)`` of the projection."""
        x = np.asarray(x, dtype=float)
        dist = self.signed_distance(x)
        if check:
            self.check_tubular(dist)
        n = self.grad(x)
        eye = np.eye(self.dim)
        return eye - n[..., :, None] * n[..., None, :] - dist[..., None, None] * self.hessian(x)

    def projection_data(self, x, check=True):
        """Return ``(b(x), Db(x), d(x))`` in one pass."""
        x = np.asarray(x, dtype=float)
        dist = self.signed_distance(x)
        if check:
            self.check_tubular(dist)
        n = self.grad(x)
        nn = n[..., :, None] * n[..., None, :]
        jac = np.eye(self.dim) - nn - dist[..., None, None] * self.hessian(x)
        return x - dist[..., None] * n, jac, dist

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class Ball(ImplicitDomain):
    """Euclidean ball of radius ``radius`` centred at the origin.

    In 2D this is the disk used by the Ventcel experiments; in 3D its
    boundary is the sphere on which the surface problem is posed.
    """

    def __init__(self, dim=2, radius=1.0):
        if dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        self.dim = dim
        self.radius = float(radius)
        self.tubular_radius = 0.9 * self.radius
        if dim == 2:
            self.name = "disk"
            self.exact_measure = math.pi * self.radius**2
            self.boundary_measure = 2.0 * math.pi * self.radius
        else:
            self.name = "sphere"
            self.exact_measure = 4.0 / 3.0 * math.pi * self.radius**3
            self.boundary_measure = 4.0 * math.pi * self.radius**2

    def check_tubular(self, dist):
        # the radial projection is unique everywhere except at the centre,
        # so only the interior side is bounded
        dist = np.asarray(dist)
        if dist.size and np.min(dist) <= -self.tubular_radius:
            raise OutsideTubularNeighborhood(
                f"{self.name}: point within {self.radius + np.min(dist):.3g} of the "
                f"centre, inside the tubular radius {self.tubular_radius}"
            )

    def signed_distance(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1) - self.radius

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return x / np.linalg.norm(x, axis=-1)[..., None]

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.linalg.norm(x, axis=-1)[..., None, None]
        n = x / rho[..., 0]
        return (np.eye(self.dim) - n[..., :, None] * n[..., None, :]) / rho

    def project(self, x, check=True):
        x = np.asarray(x, dtype=float)
        rho = np.linalg.norm(x, axis=-1)
        if check:
            self.check_tubular(rho - self.radius)
        return self.radius * x / rho[..., None]


class Flower(ImplicitDomain):
    """Star-shaped domain with polar boundary ``r(t) = 1 + a sin(m t)``.

    The distance is not available in closed form.  The closest boundary
    point is found by Newton iteration on the angle parameter, seeded by a
    coarse sampling of the boundary so that the global minimiser is picked.

    Parameters
    ----------
    a : float
        Petal amplitude, ``0 <= a < 1``.
    m : int
        Number of petals.
    """

    newton_maxiter = 50
    newton_tol = 1e-12
    n_seed = 256

    def __init__(self, a=0.3, m=3):
        if not 0.0 <= a < 1.0:
            raise ValueError("amplitude must lie in [0, 1)")
        self.name = "flower"
        self.dim = 2
        self.a = float(a)
        self.m = int(m)
        # bounded by the smallest radius of curvature on the concave side
        self.tubular_radius = 0.6 * self._min_radius_of_curvature()
        self.exact_measure = math.pi * (1.0 + 0.5 * self.a**2)
        self.boundary_measure = self._perimeter()

    # boundary parametrisation -------------------------------------------------
    def radius(self, t):
        return 1.0 + self.a * np.sin(self.m * t)

    def curve(self, t, nder=0):
        """Boundary point ``gamma(t)`` and its first ``nder`` derivatives."""
        a, m = self.a, self.m
        s, c = np.sin(t), np.cos(t)
        sm, cm = np.sin(m * t), np.cos(m * t)
        r = 1.0 + a * sm
        r1 = a * m * cm
        r2 = -a * m * m * sm
        radial = np.stack([c, s], axis=-1)
        tang = np.stack([-s, c], axis=-1)
        out = [r[..., None] * radial]
        if nder >= 1:
            out.append(r1[..., None] * radial + r[..., None] * tang)
        if nder >= 2:
            out.append((r2 - r)[..., None] * radial + 2.0 * r1[..., None] * tang)
        return out

    def curvature(self, t):
        a, m = self.a, self.m
        r = 1.0 + a * np.sin(m * t)
        r1 = a * m * np.cos(m * t)
        r2 = -a * m * m * np.sin(m * t)
        return (r * r + 2.0 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5

    def normal(self, t):
        _, d1 = self.curve(t, 1)
        n = np.stack([d1[..., 1], -d1[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1)[..., None]

    def _min_radius_of_curvature(self):
        t = np.linspace(0.0, 2.0 * math.pi, 20001)
        kappa = self.curvature(t)
        return float(1.0 / np.max(np.abs(kappa)))

    def _perimeter(self):
        nodes, weights = np.polynomial.legendre.leggauss(200)
        t = math.pi * (nodes + 1.0)
        _, d1 = self.curve(t, 1)
        return float(math.pi * np.sum(weights * np.linalg.norm(d1, axis=-1)))

    def closest_parameter(self, x):
        """Angle of the closest boundary point for each point of ``x``."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        pts = x.reshape(-1, 2)
        grid = np.linspace(0.0, 2.0 * math.pi, self.n_seed, endpoint=False)
        gpts = self.curve(grid)[0]
        d2 = ((pts[:, None, :] - gpts[None, :, :]) ** 2).sum(axis=-1)
        t = grid[np.argmin(d2, axis=1)]
        step_cap = 2.0 * math.pi / self.n_seed
        active = np.ones(t.shape, dtype=bool)
        for _ in range(self.newton_maxiter):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            g0, g1, g2 = self.curve(t[idx], 2)
            diff = pts[idx] - g0
            dphi = -(diff * g1).sum(axis=-1)
            ddphi = (g1 * g1).sum(axis=-1) - (diff * g2).sum(axis=-1)
            scale = (g1 * g1).sum(axis=-1)
            step = np.where(ddphi > 0.0, dphi / np.where(ddphi > 0.0, ddphi, 1.0),
                            np.sign(dphi) * step_cap)
            step = np.clip(step, -step_cap, step_cap)
            t[idx] -= step
            done = (np.abs(dphi) <= self.newton_tol * scale) | (np.abs(step) < 1e-15)
            active[idx[done]] = False
        if np.any(active):
            # one last residual check before giving up
            g0, g1 = self.curve(t[active], 1)
            res = np.abs(((pts[active] - g0) * g1).sum(axis=-1))
            if np.max(res) > 1e-10:
                raise NonConvergence(
                    f"closest-point Newton did not converge (residual {np.max(res):.2e})"
                )
        return t.reshape(shape)

    def _closest(self, x):
        x = np.asarray(x, dtype=float)
        t = self.closest_parameter(x)
        p = self.curve(t)[0]
        n = self.normal(t)
        dist = ((x - p) * n).sum(axis=-1)
        return t, p, n, dist

    def signed_distance(self, x):
        return self._closest(x)[3]

    def grad(self, x):
        return self._closest(x)[2]

    def hessian(self, x):
        t, _, n, dist = self._closest(x)
        kappa = self.curvature(t)
        tau = np.stack([-n[..., 1], n[..., 0]], axis=-1)
        coef = kappa / (1.0 + kappa * dist)
        return coef[..., None, None] * tau[..., :, None] * tau[..., None, :]

    def project(self, x, check=True):
        t, p, _, dist = self._closest(x)
        if check:
            self.check_tubular(dist)
        return p

    def projection_data(self, x, check=True):
        t, p, n, dist = self._closest(x)
        if check:
            self.check_tubular(dist)
        kappa = self.curvature(t)
        tau = np.stack([-n[..., 1], n[..., 0]], axis=-1)
        coef = 1.0 / (1.0 + kappa * dist)
        return p, coef[..., None, None] * tau[..., :, None] * tau[..., None, :], dist

    def projection_jacobian(self, x, check=True):
        t, _, n, dist = self._closest(x)
        if check:
            self.check_tubular(dist)
        kappa = self.curvature(t)
        tau = np.stack([-n[..., 1], n[..., 0]], axis=-1)
        coef = 1.0 - dist * kappa / (1.0 + kappa * dist)
        return coef[..., None, None] * tau[..., :, None] * tau[..., None, :]


def unit_disk():
    return Ball(2)


def unit_sphere_surface():
    return Ball(3)


def flower(a=0.3, m=3):
    return Flower(a, m)


def signed_distance(domain, x):
    return domain.signed_distance(x)


def project(domain, x):
    return domain.project(x)


def projection_jacobian(domain, x):
    return domain.projection_jacobian(x)
