"""Forward equation of two-channel reduction on a finite-volume grid.

Solves ``dP/dt = d^2/dp^2 [A(p) P]`` with ``A(p) = nu p (1 - p)`` for the
free coordinate ``p = p1`` (``p2 = 1 - p1`` is eliminated). ``nu`` is the
summed source intensity, which makes the equation the exact forward equation
of the Monte Carlo process in :mod:`collapselab.reduction`.

Discretization: ``num_cells`` cells of width ``h`` with centers ``x_i``. With
``u_i = A(x_i) P_i`` the face fluxes are ``F_{i+1/2} = (u_{i+1} - u_i) / h``
inside and ``2 u / h`` across the end faces, where ``u`` vanishes at the
vertex. The second derivative acts on the product ``A P``, not ``A P''``.
With this ordering the first moment ``h sum x_i P_i + absorbed[1]`` is
conserved exactly by the discrete scheme. Mass leaving through the end faces
is accumulated in ``absorbed`` rather than forcing ``P = 0`` at the walls.

Explicit Euler is stable and keeps ``P >= 0`` for
``dt <= STABILITY_C * h**2 / max(A)`` with ``STABILITY_C = 0.5``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .model import InvariantViolation

STABILITY_C = 0.5
MIN_CELLS = 64
MASS_TOL = 1e-8


class StabilityError(ValueError):
    def __init__(self, dt, bound):
        self.dt = dt
        self.bound = bound
        super().__init__(f"time step {dt!r} exceeds the explicit stability bound {bound!r}")


@dataclass(frozen=True, eq=False)
class FpGrid:
    """Density of ``p1`` on cell centers plus point masses at the two vertices."""

    density: np.ndarray
    absorbed: tuple = (0.0, 0.0)
    time: float = 0.0

    def __post_init__(self):
        P = np.array(self.density, dtype=float)
        P.setflags(write=False)
        object.__setattr__(self, "density", P)
        object.__setattr__(self, "absorbed", (float(self.absorbed[0]), float(self.absorbed[1])))
        if P.ndim != 1 or P.size < MIN_CELLS:
            raise InvariantViolation("FpGrid.num_cells", f"need at least {MIN_CELLS} cells, got {P.size}")
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise InvariantViolation("FpGrid.density", "density must be finite and non-negative",
                                     magnitude=float(-P.min()))
        if min(self.absorbed) < 0:
            raise InvariantViolation("FpGrid.absorbed", "absorbed masses must be non-negative")
        dev = abs(self.interior_mass + sum(self.absorbed) - 1.0)
        if dev > MASS_TOL:
            raise InvariantViolation("FpGrid.mass", "interior plus absorbed mass must be 1", magnitude=dev)

    K = 2

    @property
    def num_cells(self):
        return self.density.size

    @property
    def h(self):
        return 1.0 / self.num_cells

    @property
    def centers(self):
        return cell_centers(self.num_cells)

    @property
    def interior_mass(self):
        return float(self.density.sum() * self.h)

    @property
    def first_moment(self):
        """Mean of ``p1`` counting the vertex masses (0 at ``p1 = 0``, 1 at ``p1 = 1``)."""
        return float(self.h * np.dot(self.centers, self.density) + self.absorbed[1])

    @classmethod
    def from_point(cls, p1, num_cells=256):
        """Unit mass concentrated at ``p1``.

        A point between two cell centers is split linearly between them so the
        first moment is exactly ``p1``. The vertices act as nodes holding the
        absorbed masses, so ``p1`` within half a cell of a vertex puts part of
        the mass there (and ``p1 = 0`` or ``1`` is absorbed outright).
        """
        if not 0.0 <= p1 <= 1.0:
            raise InvariantViolation("FpGrid.initial", f"p1 must lie in [0, 1], got {p1}")
        h = 1.0 / num_cells
        P = np.zeros(num_cells)
        # nodes: vertex 0, centers 0..M-1, vertex 1
        nodes = np.concatenate([[0.0], cell_centers(num_cells), [1.0]])
        k = int(np.searchsorted(nodes, p1, side="right")) - 1
        k = min(max(k, 0), num_cells)
        lo, hi = nodes[k], nodes[k + 1]
        w_hi = (p1 - lo) / (hi - lo)
        mass = np.zeros(num_cells + 2)
        mass[k] += 1.0 - w_hi
        mass[k + 1] += w_hi
        P[:] = mass[1:-1] / h
        return cls(P, (mass[0], mass[-1]))


def cell_centers(num_cells):
    return (np.arange(num_cells) + 0.5) / num_cells


def diffusion_coefficient(num_cells, nu):
    x = cell_centers(num_cells)
    return nu * x * (1.0 - x)


def stability_bound(num_cells, nu):
    return STABILITY_C * (1.0 / num_cells) ** 2 / float(diffusion_coefficient(num_cells, nu).max())


def default_dt(num_cells, nu, safety=0.9):
    return safety * stability_bound(num_cells, nu)


@numba.njit(cache=True)
def _advance(P, A, h, dt, nsteps, absorbed):
    M = P.size
    u = np.empty(M)
    F = np.empty(M + 1)
    r = dt / h
    for _ in range(nsteps):
        for i in range(M):
            u[i] = A[i] * P[i]
        F[0] = 2.0 * u[0] / h
        for i in range(1, M):
            F[i] = (u[i] - u[i - 1]) / h
        F[M] = -2.0 * u[M - 1] / h
        absorbed[0] += dt * F[0]
        absorbed[1] -= dt * F[M]
        for i in range(M):
            P[i] += r * (F[i + 1] - F[i])
            if P[i] < 0.0:
                P[i] = 0.0


def _nu(spec):
    return float(spec.total_intensity)


def fp_step(grid, spec, dt, nsteps=1):
    """Advance ``grid`` by ``nsteps`` explicit steps of size ``dt``."""
    A = diffusion_coefficient(grid.num_cells, _nu(spec))
    bound = STABILITY_C * grid.h ** 2 / float(A.max())
    if not 0 < dt <= bound:
        raise StabilityError(dt, bound)
    P = np.array(grid.density)
    absorbed = np.array(grid.absorbed)
    _advance(P, A, grid.h, dt, int(nsteps), absorbed)
    return FpGrid(P, tuple(absorbed), grid.time + nsteps * dt)


def absorbed_fractions(grid):
    """``(mass at p1 = 0, mass at p1 = 1, interior mass)``."""
    return grid.absorbed[0], grid.absorbed[1], grid.interior_mass


@dataclass
class FpHistory:
    times: np.ndarray
    absorbed_0: np.ndarray
    absorbed_1: np.ndarray
    interior: np.ndarray
    first_moment: np.ndarray

    def rows(self):
        for i in range(len(self.times)):
            yield (self.times[i], self.absorbed_0[i], self.absorbed_1[i], self.interior[i],
                   self.first_moment[i])


def fp_evolve(grid, spec, dt=None, t_final=None, interior_tol=None, chunk=1000,
              max_time=1e4):
    """Step until ``t_final`` or until the interior mass drops below ``interior_tol``.

    Stepping proceeds in chunks of ``chunk`` steps; the interior criterion is
    checked between chunks. Returns the final grid and a history sampled once
    per chunk.
    """
    if t_final is None and interior_tol is None:
        raise ValueError("give t_final or interior_tol")
    nu = _nu(spec)
    if dt is None:
        dt = default_dt(grid.num_cells, nu)
        if t_final is not None and t_final > grid.time:
            # land exactly on t_final
            dt = (t_final - grid.time) / np.ceil((t_final - grid.time) / dt)
    hist = [(grid.time, *grid.absorbed, grid.interior_mass, grid.first_moment)]
    g = grid
    while True:
        n = chunk
        if t_final is not None:
            remaining = int(round((t_final - g.time) / dt))
            if remaining <= 0:
                break
            n = min(chunk, remaining)
        elif g.interior_mass < interior_tol:
            break
        if g.time > max_time:
            raise InvariantViolation("fp_evolve.max_time", f"interior mass still {g.interior_mass} at t={g.time}")
        g = fp_step(g, spec, dt, n)
        hist.append((g.time, *g.absorbed, g.interior_mass, g.first_moment))
        if t_final is None and interior_tol is not None and g.interior_mass < interior_tol:
            break
    h = np.array(hist)
    return g, FpHistory(h[:, 0], h[:, 1], h[:, 2], h[:, 3], h[:, 4])
