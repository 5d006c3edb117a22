"""Spectator overlap, cluster-jump amplitude and fluctuation spreading."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .model import ProximityParams


def overlap(params: ProximityParams) -> float:
    """Overlap of spectator states translated by ``xi``: ``exp(-N' xi^2 / (4 delta^2))``."""
    if params.xi == 0:
        return 1.0
    return math.exp(-params.n_prime * params.xi ** 2 / (4.0 * params.delta ** 2))


def jump_amplitude(params: ProximityParams) -> complex:
    return params.t_element * overlap(params)


def spread_fluctuation(delta_p_local: float, params: ProximityParams) -> float:
    """Pointer-wide probability change produced by a local cluster change."""
    return (params.cluster_n / params.pointer_total) * delta_p_local


def proximity_window(params: ProximityParams, threshold: float) -> float:
    """Largest separation whose overlap is still at least ``threshold``.

    ``params.xi`` is ignored; only ``n_prime`` and ``delta`` matter.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return 2.0 * params.delta * math.sqrt(math.log(1.0 / threshold) / params.n_prime)


def sweep(params: ProximityParams, xi_values):
    """Overlap and jump amplitude over a range of separations.

    Returns an array with columns ``xi, overlap, amp_re, amp_im``.
    """
    rows = []
    for xi in np.asarray(xi_values, dtype=float):
        p = dataclasses.replace(params, xi=float(xi))
        amp = jump_amplitude(p)
        rows.append((float(xi), overlap(p), amp.real, amp.imag))
    return np.array(rows, dtype=float).reshape(-1, 4)


def overlap_envelope(params: ProximityParams, speed: float):
    """Time-dependent overlap for pointer positions separating at ``speed``.

    Usable as ``coupling_envelope`` in :func:`collapselab.blocks.evolve_blocks`.
    """
    def envelope(t):
        return overlap(dataclasses.replace(params, xi=abs(speed) * t))
    return envelope
