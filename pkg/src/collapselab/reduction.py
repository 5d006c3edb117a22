"""Monte Carlo engine for Brownian reduction of channel probabilities.

The probabilities ``p`` diffuse on the simplex with zero drift. Each noise
source ``s`` adds an increment with covariance ``2 * A_s(p) * dt`` where
``A_s(p) = lambda_s * (diag(p) - p p^T)`` (Wright-Fisher form). Vertices are
absorbing and a channel whose probability reaches zero is dead for good.

Random numbers: every trajectory owns a 64-bit seed. The seed is expanded
with ``numpy.random.SeedSequence`` into one PCG64 stream per noise source.
Batch seeds are spawned from a master seed (``SeedSequence(master).spawn``),
so trajectory ``i`` is the same whatever the batch size, worker count or
scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .model import ChannelState, DiffusionSpec, InvariantViolation, make_channel_state

RNG_ALGORITHM = "PCG64 streams from numpy SeedSequence spawn keys"

LIVE = -1
BROKEN = -2

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------- kernels
# The hot loop is a single function: numba calls through small helpers that
# take a Generator cost several times the draw itself.

@numba.njit(cache=True, nogil=True)
def _settle(p):
    """Clamp, renormalize and report status (channel index, LIVE or BROKEN)."""
    K = p.size
    top = 0
    for j in range(K):
        if not math.isfinite(p[j]):
            return BROKEN
        if p[j] <= 0.0:
            p[j] = 0.0
        if p[j] > p[top]:
            top = j
    if p[top] >= 1.0:
        for j in range(K):
            p[j] = 0.0
        p[top] = 1.0
        return top
    s = 0.0
    nlive = 0
    for j in range(K):
        s += p[j]
        if p[j] > 0.0:
            nlive += 1
    if nlive == 1:
        p[top] = 1.0
        return top
    if abs(s - 1.0) > 4.0 * _EPS * K:
        for j in range(K):
            p[j] = p[j] / s
    s = 0.0
    for j in range(K):
        s += p[j]
    if abs(s - 1.0) > 1e-12:
        return BROKEN
    return LIVE


@numba.njit(cache=True, nogil=True)
def _run(p, lams, dt, max_steps, g1, g2, fast):
    """Euler-Maruyama steps in place until absorption or ``max_steps``.

    Returns ``(status, steps)``; status is the absorbing channel, LIVE or
    BROKEN. Dead channels are never touched, so exact zeros stay zero.
    """
    K = p.size
    nsrc = lams.size
    live = np.empty(K, dtype=np.int64)
    work = np.empty(K)
    total = np.empty(K)
    status = _settle(p)
    n = 0
    while status == LIVE and n < max_steps:
        m = 0
        for j in range(K):
            if p[j] > 0.0:
                live[m] = j
                m += 1
        if fast and m == 2:
            a = live[0]
            b = live[1]
            prod = p[a] * p[b]
            d = math.sqrt(2.0 * lams[0] * prod * dt) * g1.standard_normal()
            if nsrc > 1:
                d += math.sqrt(2.0 * lams[1] * prod * dt) * g2.standard_normal()
            p[a] = p[a] + d
            p[b] = p[b] - d
        else:
            # B = diag(sqrt p) - p sqrt(p)^T gives B B^T = diag(p) - p p^T on the simplex
            for i in range(m):
                total[i] = 0.0
            for s in range(nsrc):
                c = math.sqrt(2.0 * lams[s] * dt)
                dot = 0.0
                for i in range(m):
                    if s == 0:
                        z = g1.standard_normal()
                    else:
                        z = g2.standard_normal()
                    work[i] = math.sqrt(p[live[i]]) * z
                    dot += work[i]
                mean = 0.0
                for i in range(m):
                    work[i] = c * (work[i] - p[live[i]] * dot)
                    mean += work[i]
                mean /= m
                for i in range(m):
                    total[i] += work[i] - mean
            for i in range(m):
                p[live[i]] = p[live[i]] + total[i]
        status = _settle(p)
        n += 1
    return status, n


@numba.njit(cache=True, nogil=True)
def _sample_increments(p, lams, dt, g1, g2, fast, n):
    """Per-source increments at a frozen state, drawn exactly as ``_run`` draws them."""
    K = p.size
    nsrc = lams.size
    out = np.zeros((2, n, K))
    live = np.empty(K, dtype=np.int64)
    work = np.empty(K)
    m = 0
    for j in range(K):
        if p[j] > 0.0:
            live[m] = j
            m += 1
    if m < 2:
        return out[0], out[1]
    for k in range(n):
        if fast and m == 2:
            a = live[0]
            b = live[1]
            prod = p[a] * p[b]
            for s in range(nsrc):
                if s == 0:
                    d = math.sqrt(2.0 * lams[0] * prod * dt) * g1.standard_normal()
                else:
                    d = math.sqrt(2.0 * lams[1] * prod * dt) * g2.standard_normal()
                out[s, k, a] = d
                out[s, k, b] = -d
        else:
            for s in range(nsrc):
                c = math.sqrt(2.0 * lams[s] * dt)
                dot = 0.0
                for i in range(m):
                    if s == 0:
                        z = g1.standard_normal()
                    else:
                        z = g2.standard_normal()
                    work[i] = math.sqrt(p[live[i]]) * z
                    dot += work[i]
                mean = 0.0
                for i in range(m):
                    work[i] = c * (work[i] - p[live[i]] * dot)
                    mean += work[i]
                mean /= m
                for i in range(m):
                    out[s, k, live[i]] = work[i] - mean
    return out[0], out[1]


# ---------------------------------------------------------------- seeding

def trajectory_seeds(master_seed, n, start=0):
    """64-bit seeds of trajectories ``start .. start+n-1`` spawned from ``master_seed``."""
    children = np.random.SeedSequence(int(master_seed)).spawn(start + n)[start:]
    return np.array([c.generate_state(1, np.uint64)[0] for c in children], dtype=np.uint64)


def trajectory_streams(seed, num_sources):
    """One independent PCG64 generator per noise source for a trajectory seed."""
    seq = np.random.SeedSequence(int(seed))
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in seq.spawn(num_sources))


def _generators(rng, num_sources):
    if isinstance(rng, np.random.Generator):
        gens = (rng,) * num_sources
    elif isinstance(rng, (int, np.integer)):
        gens = trajectory_streams(rng, num_sources)
    else:
        gens = tuple(rng)
        if len(gens) != num_sources:
            raise ValueError(f"need {num_sources} generators, got {len(gens)}")
    return gens[0], gens[-1]


def _fast_flag(fast):
    return True if fast is None else bool(fast)


# ---------------------------------------------------------------- public API

def correlation_matrix(p, spec):
    """``A_jk = lambda (delta_jk p_j - p_j p_k)``, summed over noise sources."""
    q = p.probs if isinstance(p, ChannelState) else np.asarray(p, dtype=float)
    lam = spec.total_intensity
    return lam * (np.diag(q) - np.outer(q, q))


def pearle_step(p, spec, rng, fast=None):
    """Advance a channel state by one time step.

    ``rng`` is a ``numpy.random.Generator`` (shared by all sources), a tuple
    of one generator per source, or an integer trajectory seed. With
    ``fast`` unset the closed-form two-channel update is used whenever
    exactly two channels are live.
    """
    if p.absorbed is not None:
        return p
    g1, g2 = _generators(rng, spec.num_sources)
    q = np.array(p.probs)
    status, _ = _run(q, np.array(spec.intensities), spec.dt, 1, g1, g2, _fast_flag(fast))
    if status == BROKEN:
        raise InvariantViolation("pearle_step.normalization",
                                 f"step from {p.probs.tolist()} produced an invalid state")
    return ChannelState(q, None if status == LIVE else int(status), p.time + spec.dt)


@dataclass
class TrajectoryRecord:
    """Outcome of a single trajectory.

    ``outcome`` is the absorbing channel, or -1 when ``max_steps`` ran out
    first (``absorption_time`` then holds the stopping time).
    """

    seed: int
    outcome: int
    absorption_time: float
    steps: int
    final: ChannelState
    path: Optional[list] = None

    @property
    def absorbed(self):
        return self.outcome >= 0


def run_trajectory(p0, spec, max_steps, rng_seed, fast=None, record_every=0):
    """Run one trajectory until absorption or ``max_steps`` steps.

    ``rng_seed`` is an integer trajectory seed or already-built generators
    (passing the same generators again resumes the random stream, so a
    stopped trajectory can be continued from its final state).
    ``record_every > 0`` keeps every n-th state in ``path``.
    """
    if max_steps <= 0:
        raise ValueError("max_steps must be > 0")
    seed = int(rng_seed) if isinstance(rng_seed, (int, np.integer)) else -1
    g1, g2 = _generators(rng_seed, spec.num_sources)
    lams = np.array(spec.intensities)
    q = np.array(p0.probs)
    fast = _fast_flag(fast)
    path = None
    if record_every and record_every > 0:
        path = [p0]
        steps = 0
        status = LIVE if p0.absorbed is None else p0.absorbed
        while status == LIVE and steps < max_steps:
            status, n = _run(q, lams, spec.dt, min(record_every, max_steps - steps), g1, g2, fast)
            steps += n
            path.append(_state(q, status, p0.time + steps * spec.dt))
    else:
        status, steps = _run(q, lams, spec.dt, max_steps, g1, g2, fast)
    if status == BROKEN:
        raise InvariantViolation("run_trajectory.normalization",
                                 f"trajectory with seed {seed} produced an invalid state", step=steps)
    t = p0.time + steps * spec.dt
    final = _state(q, status, t)
    rec = TrajectoryRecord(seed, int(status) if status >= 0 else -1, t, int(steps), final, path)
    if rec.absorbed and p0.probs[rec.outcome] == 0.0:
        raise InvariantViolation("TrajectoryRecord.outcome",
                                 f"seed {seed} absorbed on channel {rec.outcome} which started at zero")
    return rec


def _state(q, status, t):
    return ChannelState(q.copy(), int(status) if status >= 0 else None, t)


@dataclass
class Batch:
    """Per-run results of a batch of independently seeded trajectories."""

    seeds: np.ndarray
    outcomes: np.ndarray
    absorption_times: np.ndarray
    steps: np.ndarray
    final_probs: np.ndarray

    def __len__(self):
        return len(self.seeds)

    def counts(self, K):
        return np.bincount(self.outcomes[self.outcomes >= 0], minlength=K)[:K]

    @property
    def unabsorbed(self):
        return int(np.count_nonzero(self.outcomes < 0))

    def rows(self):
        for i in range(len(self.seeds)):
            yield (int(self.seeds[i]), int(self.outcomes[i]), float(self.absorption_times[i]),
                   int(self.steps[i]))


def run_batch(p0, spec, num_runs, seed, max_steps=10_000_000, fast=None, workers=1):
    """Run ``num_runs`` trajectories seeded from the master ``seed``.

    Results do not depend on ``workers``: run ``i`` always uses the i-th
    spawned seed and its own generators.
    """
    seeds = trajectory_seeds(seed, num_runs)
    K = p0.K
    outcomes = np.empty(num_runs, dtype=np.int64)
    times = np.empty(num_runs)
    steps = np.empty(num_runs, dtype=np.int64)
    finals = np.empty((num_runs, K))
    lams = np.array(spec.intensities)
    fast = _fast_flag(fast)
    start = np.array(p0.probs)

    def work(lo, hi):
        for i in range(lo, hi):
            g1, g2 = _generators(int(seeds[i]), spec.num_sources)
            q = start.copy()
            status, n = _run(q, lams, spec.dt, max_steps, g1, g2, fast)
            if status == BROKEN:
                raise InvariantViolation("run_batch.normalization",
                                         f"trajectory seed {int(seeds[i])} produced an invalid state",
                                         step=n)
            outcomes[i] = status if status >= 0 else -1
            steps[i] = n
            times[i] = p0.time + n * spec.dt
            finals[i] = q

    if workers <= 1:
        work(0, num_runs)
    else:
        bounds = np.linspace(0, num_runs, 4 * workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            for f in [ex.submit(work, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]:
                f.result()
    return Batch(seeds, outcomes, times, steps, finals)


@dataclass
class BornStatistics:
    expected: np.ndarray
    frequencies: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    unabsorbed: int
    num_runs: int
    batch: Batch = field(repr=False)

    def within(self, nsigma=3.0):
        """Per-channel check ``|f - p0| <= nsigma * stderr``.

        A channel whose expected value and frequency are both 0 or both 1
        passes with zero error bar.
        """
        return np.abs(self.frequencies - self.expected) <= nsigma * self.stderr

    def rows(self):
        for j in range(len(self.expected)):
            yield (j, float(self.frequencies[j]), float(self.stderr[j]), float(self.expected[j]))


def born_statistics(p0, spec, num_runs, seed, max_steps=10_000_000, fast=None, workers=1):
    """Absorption frequencies per channel with binomial standard errors."""
    if num_runs < 100:
        raise ValueError("num_runs must be >= 100")
    batch = run_batch(p0, spec, num_runs, seed, max_steps=max_steps, fast=fast, workers=workers)
    counts = batch.counts(p0.K)
    freq = counts / num_runs
    se = np.sqrt(freq * (1.0 - freq) / num_runs)
    return BornStatistics(np.array(p0.probs), freq, se, counts, batch.unabsorbed, num_runs, batch)


def ensemble_mean(p0, spec, num_steps, num_runs, seed, fast=None):
    """Sample mean and standard error of ``p`` after ``num_steps`` steps."""
    batch = run_batch(p0, spec, num_runs, seed, max_steps=num_steps, fast=fast)
    fp = batch.final_probs
    return fp.mean(axis=0), fp.std(axis=0, ddof=1) / math.sqrt(num_runs)


def two_proportion_z(k1, n1, k2, n2):
    """z statistic of the difference between two binomial proportions."""
    k1, k2 = np.asarray(k1, dtype=float), np.asarray(k2, dtype=float)
    pooled = (k1 + k2) / (n1 + n2)
    se = np.sqrt(pooled * (1 - pooled) * (1.0 / n1 + 1.0 / n2))
    diff = k1 / n1 - k2 / n2
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), 0.0)
    return z


def sample_increments(p, spec, num_samples, rng, fast=None):
    """Per-source increments drawn at a fixed state; arrays of shape (n, K)."""
    q = np.array(p.probs if isinstance(p, ChannelState) else p, dtype=float)
    g1, g2 = _generators(rng, spec.num_sources)
    return _sample_increments(q, np.array(spec.intensities), spec.dt, g1, g2,
                              _fast_flag(fast), int(num_samples))

