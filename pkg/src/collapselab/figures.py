"""PNG figures rendered next to the scenario CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "axes.labelsize": 11,
    "axes.titlesize": 11,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "xtick.top": True,
    "ytick.right": True,
    "legend.fontsize": 9,
    "legend.frameon": False,
    "figure.dpi": 110,
    "savefig.bbox": "tight",
}


def _figure(ncols=1, width=5.0):
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, ncols, figsize=(width * ncols, 0.68 * width))
    return fig, np.atleast_1d(axes)


def _save(fig, path):
    with plt.rc_context(RC):
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_blocks(traj, path):
    fig, (ax, ax2) = _figure(2)
    ax.plot(traj.t, traj.p1, label="$p_1$")
    ax.plot(traj.t, traj.p2, label="$p_2$")
    ax.set_xlabel("t")
    ax.set_ylabel("channel probability")
    ax.legend()
    ax2.semilogy(traj.t, np.maximum(traj.herm_defect, 1e-18), label="Hermiticity defect")
    ax2.semilogy(traj.t, np.maximum(traj.trace_defect, 1e-18), label="trace defect")
    ax2.set_xlabel("t")
    ax2.legend()
    return _save(fig, path)


def plot_proximity(table, window, threshold, path):
    fig, (ax,) = _figure()
    ax.plot(table[:, 0], table[:, 1], label="overlap")
    ax.plot(table[:, 0], np.hypot(table[:, 2], table[:, 3]), "--", label="|jump amplitude|")
    ax.axhline(threshold, color="0.6", lw=0.8)
    ax.axvline(window, color="0.6", lw=0.8)
    ax.set_xlabel(r"pointer separation $\xi$")
    ax.legend()
    return _save(fig, path)


def plot_born(stats, path, paths=()):
    fig, (ax, ax2) = _figure(2)
    K = len(stats.expected)
    x = np.arange(K)
    ax.bar(x - 0.2, stats.expected, 0.4, label="initial $p_j$", color="0.7")
    ax.bar(x + 0.2, stats.frequencies, 0.4, yerr=3 * stats.stderr, label="absorption frequency")
    ax.set_xticks(x)
    ax.set_xlabel("channel")
    ax.legend()
    if paths:
        for rec in paths:
            t = [s.time for s in rec.path]
            ax2.plot(t, [s.probs[0] for s in rec.path], lw=0.8)
        ax2.set_xlabel("t")
        ax2.set_ylabel("$p_0$")
    else:
        times = stats.batch.absorption_times[stats.batch.outcomes >= 0]
        ax2.hist(times, bins=60)
        ax2.set_xlabel("absorption time")
    return _save(fig, path)


def plot_fokker_planck(grid, history, path):
    fig, (ax, ax2) = _figure(2)
    ax.plot(grid.centers, grid.density)
    ax.set_xlabel("$p_1$")
    ax.set_ylabel("density")
    ax2.plot(history.times, history.absorbed_0, label="absorbed at $p_1=0$")
    ax2.plot(history.times, history.absorbed_1, label="absorbed at $p_1=1$")
    ax2.plot(history.times, history.interior, label="interior")
    ax2.set_xlabel("t")
    ax2.legend()
    return _save(fig, path)


def plot_epr(result, path):
    fig, (ax,) = _figure(width=4.0)
    table = result.contingency()
    ax.imshow(table, cmap="Blues")
    for (i, j), c in np.ndenumerate(table):
        ax.text(j, i, str(int(c)), ha="center", va="center")
    ax.set_xticks([0, 1], ["H''", "V''"])
    ax.set_yticks([0, 1], ["H'", "V'"])
    return _save(fig, path)


def plot_crosscheck(sde, sde_err, pde, path):
    fig, (ax,) = _figure(width=4.0)
    labels = ["Monte Carlo"] + [f"grid {m}" for m, _ in pde]
    vals = [sde] + [a for _, a in pde]
    errs = [sde_err] + [0.0] * len(pde)
    ax.errorbar(range(len(vals)), vals, yerr=errs, fmt="o")
    ax.set_xticks(range(len(vals)), labels)
    ax.set_ylabel("absorbed at $p_1=1$")
    return _save(fig, path)
