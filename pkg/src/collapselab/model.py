"""Domain types shared by the solvers.

All types are immutable after construction. Constructors validate their
invariants and raise :class:`InvariantViolation` (a ``ValueError``) with a
message naming the broken invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# tolerances fixed by the type contracts
SUM_TOL = 1e-12
INPUT_NEG_TOL = 1e-12
INPUT_SUM_TOL = 1e-9
HERM_TOL = 1e-12
TRACE_TOL = 1e-10


class InvariantViolation(ValueError):
    """A type or run invariant was broken.

    ``invariant`` names the violated rule (e.g. ``"ChannelState.normalization"``),
    ``magnitude`` is the size of the violation when it is numeric and ``step``
    the integration step at which it was detected, if any.
    """

    def __init__(self, invariant, message, magnitude=None, step=None):
        self.invariant = invariant
        self.magnitude = magnitude
        self.step = step
        where = f" at step {step}" if step is not None else ""
        size = f" (magnitude {magnitude:.3e})" if magnitude is not None else ""
        super().__init__(f"{invariant}{where}: {message}{size}")


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------- channels

@dataclass(frozen=True, eq=False)
class ChannelState:
    """Channel probabilities on the simplex plus absorption status.

    Build instances with :func:`make_channel_state` or :func:`born_init`;
    the bare constructor only checks invariants, it does not repair input.
    """

    probs: np.ndarray
    absorbed: Optional[int] = None
    time: float = 0.0

    def __post_init__(self):
        p = _frozen(np.asarray(self.probs, dtype=float))
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "time", float(self.time))
        if p.ndim != 1 or p.size == 0:
            raise InvariantViolation("ChannelState.shape", "probs must be a non-empty vector")
        if not np.all(np.isfinite(p)):
            raise InvariantViolation("ChannelState.finite", "probs contain non-finite values")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise InvariantViolation("ChannelState.range", "every probability must lie in [0, 1]")
        dev = abs(float(p.sum()) - 1.0)
        if dev > SUM_TOL:
            raise InvariantViolation("ChannelState.normalization",
                                     "probabilities must sum to 1", magnitude=dev)
        if self.time < 0.0:
            raise InvariantViolation("ChannelState.time", "time must be >= 0")
        if self.absorbed is not None:
            j = int(self.absorbed)
            object.__setattr__(self, "absorbed", j)
            if not 0 <= j < p.size or p[j] != 1.0 or np.count_nonzero(p) != 1:
                raise InvariantViolation("ChannelState.absorbed",
                                         f"absorbed channel {j} must hold probability exactly 1")

    @property
    def K(self):
        return self.probs.size

    @property
    def live(self):
        """Indices of channels with nonzero probability."""
        return np.flatnonzero(self.probs)

    def with_time(self, time):
        return ChannelState(self.probs, self.absorbed, time)

    def __eq__(self, other):
        if not isinstance(other, ChannelState):
            return NotImplemented
        return (self.absorbed == other.absorbed and self.time == other.time
                and np.array_equal(self.probs, other.probs))

    def __repr__(self):
        return f"ChannelState(probs={self.probs.tolist()}, absorbed={self.absorbed}, time={self.time})"


def normalize_probs(probs):
    """Clamp, preserve exact zeros and renormalize; returns (probs, absorbed).

    Values in ``[-1e-12, 0]`` become exact ``0.0``. The normalization deficit is
    spread proportionally over nonzero entries, so dead channels stay dead. A
    vector already normalized to within a few ulps is returned unchanged, which
    makes repeated normalization idempotent.
    """
    p = np.array(probs, dtype=float).ravel()
    if p.size == 0:
        raise InvariantViolation("ChannelState.shape", "probability vector is empty")
    if not np.all(np.isfinite(p)):
        raise InvariantViolation("ChannelState.finite", "probability vector has non-finite entries")
    worst = float(p.min())
    if worst < -INPUT_NEG_TOL:
        raise InvariantViolation("ChannelState.range", "negative probability beyond tolerance",
                                 magnitude=-worst)
    dev = abs(float(p.sum()) - 1.0)
    if dev > INPUT_SUM_TOL:
        raise InvariantViolation("ChannelState.normalization",
                                 f"probabilities sum to {p.sum()!r}, not 1", magnitude=dev)
    p[p <= 0.0] = 0.0
    top = int(np.argmax(p))
    if p[top] >= 1.0:
        out = np.zeros_like(p)
        out[top] = 1.0
        return out, top
    s = float(p.sum())
    if abs(s - 1.0) > 4 * np.finfo(float).eps * p.size:
        p = p / s
    if np.count_nonzero(p) == 1:
        p[top] = 1.0
        return p, top
    return p, None


def make_channel_state(probs, time=0.0):
    """Build a validated :class:`ChannelState` from a probability vector."""
    p, absorbed = normalize_probs(probs)
    return ChannelState(p, absorbed, time)


def born_init(amplitudes):
    """Initial channel probabilities ``|c_j|**2`` from measured-state amplitudes."""
    c = np.asarray(amplitudes, dtype=complex).ravel()
    if c.size == 0:
        raise InvariantViolation("ChannelState.shape", "amplitude vector is empty")
    probs = c.real ** 2 + c.imag ** 2
    dev = abs(float(probs.sum()) - 1.0)
    if dev > INPUT_SUM_TOL:
        raise InvariantViolation("born_init.normalization",
                                 "sum of squared amplitude moduli must be 1", magnitude=dev)
    return make_channel_state(probs)


# ---------------------------------------------------------------- blocks

def herm_defect(m):
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def _square(name, m, d=None):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvariantViolation(f"{name}.shape", f"{name} must be a square matrix, got {m.shape}")
    if d is not None and m.shape[0] != d:
        raise InvariantViolation(f"{name}.shape", f"{name} must be {d}x{d}, got {m.shape}")
    return _frozen(m)


@dataclass(frozen=True, eq=False)
class BlockDensityMatrix:
    """Blocks ``rho1``, ``rho2``, ``rho12`` of the apparatus + system density matrix.

    ``rho21`` is the conjugate transpose of ``rho12`` and is never stored.
    """

    rho1: np.ndarray
    rho2: np.ndarray
    rho12: np.ndarray

    def __post_init__(self):
        r1 = _square("rho1", self.rho1)
        d = r1.shape[0]
        object.__setattr__(self, "rho1", r1)
        object.__setattr__(self, "rho2", _square("rho2", self.rho2, d))
        object.__setattr__(self, "rho12", _square("rho12", self.rho12, d))
        for name in ("rho1", "rho2"):
            hd = herm_defect(getattr(self, name))
            if hd > HERM_TOL:
                raise InvariantViolation(f"BlockDensityMatrix.{name}.hermitian",
                                         f"{name} is not Hermitian", magnitude=hd)
        t1, t2 = np.trace(self.rho1), np.trace(self.rho2)
        for name, t in (("rho1", t1), ("rho2", t2)):
            if abs(t.imag) > TRACE_TOL or not -TRACE_TOL <= t.real <= 1 + TRACE_TOL:
                raise InvariantViolation(f"BlockDensityMatrix.{name}.trace",
                                         f"trace of {name} must be real and in [0, 1], got {t}")
        dev = abs((t1 + t2).real - 1.0)
        if dev > TRACE_TOL:
            raise InvariantViolation("BlockDensityMatrix.trace",
                                     "trace(rho1) + trace(rho2) must be 1", magnitude=dev)

    @property
    def d(self):
        return self.rho1.shape[0]

    @property
    def rho21(self):
        return self.rho12.conj().T

    @property
    def p1(self):
        return float(np.trace(self.rho1).real)

    @property
    def p2(self):
        return float(np.trace(self.rho2).real)

    def full(self):
        """The assembled ``2d x 2d`` density matrix."""
        return np.block([[self.rho1, self.rho12], [self.rho21, self.rho2]])

    @classmethod
    def from_full(cls, rho):
        rho = np.asarray(rho, dtype=complex)
        d = rho.shape[0] // 2
        return cls(rho[:d, :d], rho[d:, d:], rho[:d, d:])

    @classmethod
    def from_pure(cls, c1, c2, phi1, phi2):
        """Pure state ``c1|1>|phi1> + c2|2>|phi2>`` with unit apparatus vectors."""
        phi1 = np.asarray(phi1, dtype=complex)
        phi2 = np.asarray(phi2, dtype=complex)
        psi = np.concatenate([c1 * phi1 / np.linalg.norm(phi1), c2 * phi2 / np.linalg.norm(phi2)])
        psi = psi / np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
        rho = 0.5 * (rho + rho.conj().T)
        return cls.from_full(rho)


@dataclass(frozen=True, eq=False)
class HamiltonianBlocks:
    """Hamiltonian blocks ``h1``, ``h2`` (Hermitian) and the coupling ``h12``."""

    h1: np.ndarray
    h2: np.ndarray
    h12: np.ndarray

    def __post_init__(self):
        h1 = _square("h1", self.h1)
        d = h1.shape[0]
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2", _square("h2", self.h2, d))
        object.__setattr__(self, "h12", _square("h12", self.h12, d))
        for name in ("h1", "h2"):
            hd = herm_defect(getattr(self, name))
            if hd > HERM_TOL:
                raise InvariantViolation(f"HamiltonianBlocks.{name}.hermitian",
                                         f"{name} is not Hermitian", magnitude=hd)

    @property
    def d(self):
        return self.h1.shape[0]

    @property
    def h21(self):
        return self.h12.conj().T

    def scaled_coupling(self, factor):
        return HamiltonianBlocks(self.h1, self.h2, factor * self.h12)


# ---------------------------------------------------------------- proximity

@dataclass(frozen=True)
class ProximityParams:
    """Pointer-separation parameters for the spectator overlap and cluster jumps.

    ``xi`` and ``delta`` share a length unit; ``t_element`` is the bare
    cluster transition matrix element, taken as a free input.
    """

    n_prime: int
    xi: float
    delta: float
    cluster_n: int = 1
    pointer_total: int = 1
    t_element: complex = 1.0

    def __post_init__(self):
        if int(self.n_prime) != self.n_prime or self.n_prime < 1:
            raise InvariantViolation("ProximityParams.n_prime", f"must be a positive integer, got {self.n_prime}")
        if not self.xi >= 0:
            raise InvariantViolation("ProximityParams.xi", f"must be >= 0, got {self.xi}")
        if not self.delta > 0:
            raise InvariantViolation("ProximityParams.delta", f"must be > 0, got {self.delta}")
        if int(self.cluster_n) != self.cluster_n or self.cluster_n < 1:
            raise InvariantViolation("ProximityParams.cluster_n", f"must be a positive integer, got {self.cluster_n}")
        if int(self.pointer_total) != self.pointer_total or self.pointer_total < 1:
            raise InvariantViolation("ProximityParams.pointer_total",
                                     f"must be a positive integer, got {self.pointer_total}")
        if self.cluster_n > self.pointer_total:
            raise InvariantViolation("ProximityParams.cluster_n",
                                     "cluster size cannot exceed the pointer atom count")
        object.__setattr__(self, "t_element", complex(self.t_element))


# ---------------------------------------------------------------- diffusion

@dataclass(frozen=True)
class DiffusionSpec:
    """Fluctuation intensity, number of independent noise sources and time step.

    Each source contributes increments with covariance ``2 * A(p) * dt`` where
    ``A_jk(p) = intensity * (delta_jk p_j - p_j p_k)``; the factor 2 makes
    ``dP/dt = sum_jk d_j d_k (A_jk P)`` the exact forward equation of the
    process.
    """

    intensity: float = 1.0
    num_sources: int = 1
    dt: float = 1e-4
    intensities: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not self.intensity > 0:
            raise InvariantViolation("DiffusionSpec.intensity", f"must be > 0, got {self.intensity}")
        if self.num_sources not in (1, 2):
            raise InvariantViolation("DiffusionSpec.num_sources", f"must be 1 or 2, got {self.num_sources}")
        if not self.dt > 0:
            raise InvariantViolation("DiffusionSpec.dt", f"must be > 0, got {self.dt}")
        lams = tuple(float(x) for x in self.intensities) or (float(self.intensity),) * self.num_sources
        if len(lams) != self.num_sources or any(not x >= 0 for x in lams):
            raise InvariantViolation("DiffusionSpec.intensities",
                                     "need one non-negative intensity per source")
        object.__setattr__(self, "intensities", lams)

    @classmethod
    def per_source(cls, intensities, dt):
        """Spec whose sources carry individual intensities (e.g. two apparatuses)."""
        lams = tuple(float(x) for x in intensities)
        total = sum(lams)
        return cls(intensity=total if total > 0 else float("nan"), num_sources=len(lams),
                   dt=dt, intensities=lams)

    @property
    def total_intensity(self):
        return float(sum(self.intensities))
