"""Two apparatuses measuring an entangled pair.

The joint channels are ordered ``[H'V'', V'H'', H'H'', V'V'']``. The singlet-like
state only populates the first two; the others start at exactly zero and, the
process preserving zeros, can never be reached. Each apparatus is an
independent noise source with its own intensity and its own random stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import reduction
from .model import DiffusionSpec, InvariantViolation, born_init

CHANNELS = ("H'V''", "V'H''", "H'H''", "V'V''")
FORBIDDEN = (2, 3)


@dataclass(frozen=True)
class EprConfig:
    amplitudes: tuple = (1 / math.sqrt(2), -1 / math.sqrt(2))
    intensities: tuple = (1.0, 1.0)
    dt: float = 1e-4
    max_steps: int = 10_000_000
    num_runs: int = 10_000
    seed: int = 0

    def __post_init__(self):
        amps = tuple(complex(a) for a in self.amplitudes)
        object.__setattr__(self, "amplitudes", amps)
        if len(amps) != 2:
            raise InvariantViolation("EprConfig.amplitudes", "need exactly two amplitudes (c_HV, c_VH)")
        dev = abs(sum(abs(a) ** 2 for a in amps) - 1.0)
        if dev > 1e-9:
            raise InvariantViolation("EprConfig.amplitudes", "|c_HV|^2 + |c_VH|^2 must be 1", magnitude=dev)
        lams = tuple(float(x) for x in self.intensities)
        object.__setattr__(self, "intensities", lams)
        if len(lams) != 2 or min(lams) < 0 or sum(lams) <= 0:
            raise InvariantViolation("EprConfig.intensities",
                                     "need two non-negative intensities with a positive sum")
        if not self.dt > 0:
            raise InvariantViolation("EprConfig.dt", f"must be > 0, got {self.dt}")

    def initial_state(self):
        c_hv, c_vh = self.amplitudes
        return born_init([c_hv, c_vh, 0.0, 0.0])

    def diffusion(self):
        return DiffusionSpec.per_source(self.intensities, self.dt)


@dataclass
class EprResult:
    config: EprConfig
    counts: np.ndarray
    frequencies: np.ndarray
    stderr: np.ndarray
    expected: np.ndarray
    unabsorbed: int
    batch: reduction.Batch = field(repr=False)

    def contingency(self):
        """2x2 outcome table, rows H'/V' at the first apparatus, columns H''/V''."""
        c = self.counts
        return np.array([[c[2], c[0]], [c[1], c[3]]])

    def marginal_h_prime(self):
        return float((self.counts[0] + self.counts[2]) / self.batch.outcomes.size)

    def rows(self):
        b = self.batch
        for i in range(len(b)):
            yield (i, int(b.outcomes[i]), float(b.absorption_times[i]))


def epr_run(config, fast=None, workers=1):
    """Reduction of the joint four-channel state under two independent sources.

    Raises
    ------
    InvariantViolation
        If any run absorbs on a forbidden channel (H'H'' or V'V'').
    """
    p0 = config.initial_state()
    spec = config.diffusion()
    batch = reduction.run_batch(p0, spec, config.num_runs, config.seed,
                                max_steps=config.max_steps, fast=fast, workers=workers)
    for j in FORBIDDEN:
        bad = np.flatnonzero(batch.outcomes == j)
        if bad.size:
            raise InvariantViolation("epr.forbidden_channel",
                                     f"run {bad[0]} (seed {int(batch.seeds[bad[0]])}) absorbed on {CHANNELS[j]}")
    counts = batch.counts(4)
    n = config.num_runs
    freq = counts / n
    se = np.sqrt(freq * (1 - freq) / n)
    return EprResult(config, counts, freq, se, np.array(p0.probs), batch.unabsorbed, batch)


@dataclass
class IndependenceReport:
    correlation: np.ndarray
    var_first: np.ndarray
    var_second: np.ndarray
    var_sum: np.ndarray
    num_samples: int

    @property
    def bound(self):
        return 4.0 / math.sqrt(self.num_samples)


def independence_check(config, num_samples, state=None, seed=None):
    """Sample correlation of the two apparatus increments, channel by channel.

    Increments are drawn at ``state`` (default: the initial state) from two
    independent streams of one trajectory seed, exactly as the engine does.
    A channel where either source is identically zero gets correlation 0.
    """
    if num_samples < 10_000:
        raise ValueError("num_samples must be >= 1e4")
    p = config.initial_state() if state is None else state
    spec = config.diffusion()
    s = reduction.trajectory_seeds(config.seed if seed is None else seed, 1)[0]
    d1, d2 = reduction.sample_increments(p, spec, num_samples, reduction.trajectory_streams(s, 2))
    K = d1.shape[1]
    corr = np.zeros(K)
    for j in range(K):
        a, b = d1[:, j], d2[:, j]
        if a.std() > 0 and b.std() > 0:
            corr[j] = np.corrcoef(a, b)[0, 1]
    return IndependenceReport(corr, d1.var(axis=0), d2.var(axis=0), (d1 + d2).var(axis=0), num_samples)
