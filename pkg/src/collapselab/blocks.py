"""Coupled evolution of the channel blocks of the density matrix.

Units have hbar = 1. The state is advanced with fixed-step RK4 on the stacked
blocks ``(rho1, rho2, rho12)``; ``rho21`` is always ``rho12^dagger``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import (BlockDensityMatrix, HamiltonianBlocks, InvariantViolation,
                    herm_defect)

# abort thresholds for a run
RUN_HERM_TOL = 1e-9
RUN_TRACE_TOL = 1e-9


def assemble_full(h):
    """Assemble ``[[h1, h12], [h21, h2]]``."""
    return np.block([[h.h1, h.h12], [h.h21, h.h2]])


def _check_dims(h, rho):
    if h.d != rho.d:
        raise InvariantViolation("block_dynamics.dimension",
                                 f"Hamiltonian blocks are {h.d}x{h.d} but density blocks are {rho.d}x{rho.d}")


def dp1_dt(h, rho):
    """Rate of change of the channel-1 probability, ``2 Im Tr(h12 rho21)``."""
    _check_dims(h, rho)
    return 2.0 * float(np.trace(h.h12 @ rho.rho21).imag)


def dp2_dt(h, rho):
    """Rate of change of the channel-2 probability, ``2 Im Tr(h21 rho12)``."""
    _check_dims(h, rho)
    return 2.0 * float(np.trace(h.h21 @ rho.rho12).imag)


def block_rhs(h1, h2, h12, r1, r2, r12):
    """Time derivatives of ``(rho1, rho2, rho12)``."""
    h21 = h12.conj().T
    r21 = r12.conj().T
    d1 = h1 @ r1 - r1 @ h1 + h12 @ r21 - r12 @ h21
    d2 = h2 @ r2 - r2 @ h2 + h21 @ r12 - r21 @ h12
    d12 = h1 @ r12 - r12 @ h2 + h12 @ r2 - r1 @ h12
    return -1j * d1, -1j * d2, -1j * d12


@dataclass
class BlockTrajectory:
    """Snapshots of a block evolution.

    ``herm_defect`` is the larger Hermiticity defect of ``rho1`` and ``rho2``;
    ``trace_defect`` is ``|tr rho1 + tr rho2 - 1|``.
    """

    t: np.ndarray
    states: list
    p1: np.ndarray
    p2: np.ndarray
    herm_defect: np.ndarray
    trace_defect: np.ndarray

    @property
    def final(self):
        return self.states[-1]

    def rows(self):
        for i in range(len(self.t)):
            yield (self.t[i], self.p1[i], self.p2[i], self.herm_defect[i], self.trace_defect[i])


def evolve_blocks(h, rho0, t_final, dt, record_every=1,
                  coupling_envelope: Optional[Callable[[float], float]] = None):
    """Integrate the block equations from ``rho0`` up to ``t_final``.

    Parameters
    ----------
    h : HamiltonianBlocks
    rho0 : BlockDensityMatrix
    t_final, dt : float
        The step count is ``round(t_final / dt)``; the last step is shortened
        or lengthened so the run ends exactly at ``t_final``.
    record_every : int
        Keep every n-th step (the initial and final states are always kept).
    coupling_envelope : callable, optional
        Time-dependent factor multiplying ``h12``, e.g. a spectator overlap
        as the pointer positions separate.

    Raises
    ------
    InvariantViolation
        If the Hermiticity or total-trace defect exceeds 1e-9 at any step.
    """
    _check_dims(h, rho0)
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if not t_final >= 0:
        raise ValueError(f"t_final must be >= 0, got {t_final}")
    record_every = max(int(record_every), 1)
    nsteps = int(round(t_final / dt))
    h1, h2, h12 = h.h1, h.h2, h.h12
    r1 = np.array(rho0.rho1)
    r2 = np.array(rho0.rho2)
    r12 = np.array(rho0.rho12)

    def coupling(t):
        return h12 if coupling_envelope is None else coupling_envelope(t) * h12

    ts, snaps = [0.0], [rho0]
    for n in range(nsteps):
        t = n * dt
        step = (t_final - t) if n == nsteps - 1 else dt
        ha, hm, hb = coupling(t), coupling(t + 0.5 * step), coupling(t + step)
        k1 = block_rhs(h1, h2, ha, r1, r2, r12)
        k2 = block_rhs(h1, h2, hm, *(x + 0.5 * step * k for x, k in zip((r1, r2, r12), k1)))
        k3 = block_rhs(h1, h2, hm, *(x + 0.5 * step * k for x, k in zip((r1, r2, r12), k2)))
        k4 = block_rhs(h1, h2, hb, *(x + step * k for x, k in zip((r1, r2, r12), k3)))
        r1, r2, r12 = (x + (step / 6.0) * (a + 2 * b + 2 * c + e)
                       for x, a, b, c, e in zip((r1, r2, r12), k1, k2, k3, k4))

        hd = max(herm_defect(r1), herm_defect(r2))
        if not hd <= RUN_HERM_TOL:
            raise InvariantViolation("evolve_blocks.hermitian", "rho1/rho2 lost Hermiticity",
                                     magnitude=hd, step=n + 1)
        td = abs(np.trace(r1) + np.trace(r2) - 1.0)
        if not td <= RUN_TRACE_TOL:
            raise InvariantViolation("evolve_blocks.trace", "total trace drifted from 1",
                                     magnitude=td, step=n + 1)
        if (n + 1) % record_every == 0 or n == nsteps - 1:
            ts.append(t + step if n == nsteps - 1 else (n + 1) * dt)
            snaps.append(BlockDensityMatrix(_herm_part(r1), _herm_part(r2), r12.copy()))

    p1 = np.array([s.p1 for s in snaps])
    p2 = np.array([s.p2 for s in snaps])
    hdef = np.array([max(herm_defect(s.rho1), herm_defect(s.rho2)) for s in snaps])
    tdef = np.array([abs(np.trace(s.rho1) + np.trace(s.rho2) - 1.0) for s in snaps])
    return BlockTrajectory(np.array(ts), snaps, p1, p2, hdef, tdef)


def _herm_part(m):
    # snapshots store the state as integrated; only sub-tolerance round-off is tolerated
    hd = herm_defect(m)
    if hd > 1e-12:
        return 0.5 * (m + m.conj().T)
    return m.copy()


def exact_evolution(h, rho0, t):
    """Reference solution ``exp(-iHt) rho exp(iHt)`` with the assembled Hamiltonian."""
    from scipy.linalg import expm

    u = expm(-1j * t * assemble_full(h))
    return BlockDensityMatrix.from_full(_hermitize(u @ rho0.full() @ u.conj().T))


def _hermitize(m):
    return 0.5 * (m + m.conj().T)


def min_eigenvalues(rho):
    """Smallest eigenvalues of ``rho1`` and ``rho2`` (positivity monitor)."""
    return (float(np.linalg.eigvalsh(rho.rho1)[0]), float(np.linalg.eigvalsh(rho.rho2)[0]))


def random_hermitian(d, rng, scale=1.0):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = 0.5 * (a + a.conj().T)
    return scale * m


def random_blocks(d, rng, coupling=1.0, norm=1.0):
    """Random Hermitian blocks with the assembled spectral norm scaled to ``norm``."""
    h1 = random_hermitian(d, rng)
    h2 = random_hermitian(d, rng)
    h12 = coupling * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    h = HamiltonianBlocks(h1, h2, h12)
    s = np.linalg.norm(assemble_full(h), 2)
    if s == 0:
        return h
    return HamiltonianBlocks(h1 * (norm / s), h2 * (norm / s), h12 * (norm / s))


def random_pure_blocks(d, rng, c1, c2):
    phi1 = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    phi2 = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return BlockDensityMatrix.from_pure(c1, c2, phi1, phi2)
