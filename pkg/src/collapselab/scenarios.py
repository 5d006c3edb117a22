"""Scenario drivers: run one experiment and persist CSVs, manifest and summary."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import __version__, blocks, epr, fokker_planck, proximity, reduction
from .config import format_values
from .csvio import write_csv, write_report
from .model import DiffusionSpec, InvariantViolation, ProximityParams, make_channel_state


def _diffusion(v):
    return DiffusionSpec(v["intensity"], v["num_sources"], v["dt"])


def write_manifest(out, scenario, values, outputs):
    lines = [f"# run manifest: {scenario}",
             "artifact = collapselab",
             f"version = {__version__}",
             f"scenario = {scenario}",
             f"master_seed = {values['seed']}",
             f"rng = {reduction.RNG_ALGORITHM}",
             "", "[parameters]", *format_values(values),
             "", "[outputs]", *sorted(outputs)]
    path = Path(out) / f"{_stem(scenario)}_manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _stem(scenario):
    return scenario.replace("-", "_")


# ---------------------------------------------------------------- blocks

def run_blocks(v, out):
    out = Path(out)
    rng = np.random.default_rng(v["seed"])
    h = blocks.random_blocks(v["d"], rng, coupling=v["coupling"], norm=v["norm"])
    c1, c2 = v["amplitudes"]
    rho0 = blocks.random_pure_blocks(v["d"], rng, c1, c2)
    envelope = None
    if v["pointer_speed"] > 0:
        params = ProximityParams(v["n_prime"], 0.0, v["delta"])
        envelope = proximity.overlap_envelope(params, v["pointer_speed"])
    traj = blocks.evolve_blocks(h, rho0, v["t_final"], v["dt"], record_every=v["record_every"],
                                coupling_envelope=envelope)
    files = {"csv": write_csv(out / "blocks.csv", ["t", "p1", "p2", "herm_defect", "trace_defect"],
                              traj.rows())}
    rate0 = blocks.dp1_dt(h, rho0)
    files["summary"] = write_report(out / "blocks_summary.txt", "blocks summary", [
        ("p1_initial", traj.p1[0]),
        ("p1_final", traj.p1[-1]),
        ("dp1_dt_initial", rate0),
        ("dp2_dt_initial", blocks.dp2_dt(h, rho0)),
        ("max_herm_defect", traj.herm_defect.max()),
        ("max_trace_defect", traj.trace_defect.max()),
        ("min_eigenvalue_final", min(blocks.min_eigenvalues(traj.final))),
    ])
    if v["figures"]:
        from .figures import plot_blocks
        files["figure"] = plot_blocks(traj, out / "blocks.png")
    return traj, files


# ---------------------------------------------------------------- proximity

def run_proximity(v, out):
    out = Path(out)
    params = ProximityParams(v["n_prime"], 0.0, v["delta"], v["cluster_n"], v["pointer_total"],
                             v["t_element"])
    xs = np.linspace(0.0, v["xi_max"], v["points"])
    table = proximity.sweep(params, xs)
    window = proximity.proximity_window(params, v["threshold"])
    files = {"csv": write_csv(out / "proximity.csv", ["xi", "overlap", "amp_re", "amp_im"], table.tolist())}
    files["summary"] = write_report(out / "proximity_summary.txt", "proximity summary", [
        ("threshold", v["threshold"]),
        ("window_xi", window),
        ("overlap_at_window", proximity.overlap(ProximityParams(v["n_prime"], window, v["delta"]))),
        ("spread_delta_p", proximity.spread_fluctuation(v["delta_p"], params)),
    ])
    if v["figures"]:
        from .figures import plot_proximity
        files["figure"] = plot_proximity(table, window, v["threshold"], out / "proximity.png")
    return table, files


# ---------------------------------------------------------------- pearle

def run_pearle(v, out):
    out = Path(out)
    p0 = make_channel_state(v["p0"])
    spec = _diffusion(v)
    stats = reduction.born_statistics(p0, spec, v["runs"], v["seed"], max_steps=v["max_steps"],
                                      fast=v["fast"], workers=v["workers"])
    files = {"csv": write_csv(out / "pearle_runs.csv", ["seed", "outcome", "absorption_time", "steps"],
                              stats.batch.rows())}
    paths = []
    if v["paths"] > 0:
        seeds = stats.batch.seeds[: v["paths"]]
        every = max(1, int(round(0.01 / spec.dt)))
        paths = [reduction.run_trajectory(p0, spec, v["max_steps"], int(s), fast=v["fast"],
                                          record_every=every) for s in seeds]
        rows = [(i, s.time, *s.probs) for i, rec in enumerate(paths) for s in rec.path]
        files["paths"] = write_csv(out / "pearle_paths.csv",
                                   ["path", "t", *[f"p{j}" for j in range(p0.K)]], rows)
    sigma3 = 3 * stats.stderr
    dev = np.abs(stats.frequencies - stats.expected)
    files["summary"] = write_report(out / "pearle_summary.txt", "pearle summary", [
        ("runs", v["runs"]),
        ("unabsorbed", stats.unabsorbed),
        ("freq0", stats.frequencies[0]),
        ("abs_dev0", dev[0]),
        ("three_sigma0", sigma3[0]),
        ("within_three_sigma", bool(np.all(stats.within(3.0)))),
        ("mean_absorption_time", float(stats.batch.absorption_times[stats.batch.outcomes >= 0].mean())
         if stats.batch.unabsorbed < len(stats.batch) else float("nan")),
    ], tables=[("channels", ["channel", "frequency", "stderr", "expected"], stats.rows())])
    if v["figures"]:
        from .figures import plot_born
        files["figure"] = plot_born(stats, out / "pearle.png", paths)
    return stats, files


# ---------------------------------------------------------------- fokker-planck

def _fp_spec(v):
    return DiffusionSpec(v["intensity"], v["num_sources"], v["dt"] if v["dt"] > 0 else 1.0)


def run_fokker_planck(v, out):
    out = Path(out)
    p0 = make_channel_state(v["p0"])
    if p0.K != 2:
        raise InvariantViolation("FpGrid.K", "the grid solver supports exactly two channels")
    spec = _fp_spec(v)
    grid0 = fokker_planck.FpGrid.from_point(float(p0.probs[0]), v["num_cells"])
    kw = {"dt": v["dt"] if v["dt"] > 0 else None}
    if v["t_final"] > 0:
        kw["t_final"] = v["t_final"]
    else:
        kw["interior_tol"] = v["interior_tol"]
    grid, hist = fokker_planck.fp_evolve(grid0, spec, **kw)
    a0, a1, inner = fokker_planck.absorbed_fractions(grid)
    files = {"csv": write_csv(out / "fokker_planck.csv", ["p1_center", "density"],
                              zip(grid.centers, grid.density),
                              footer=[("absorbed_0", a0), ("absorbed_1", a1), ("time", grid.time)])}
    files["history"] = write_csv(out / "fokker_planck_history.csv",
                                 ["t", "absorbed_0", "absorbed_1", "interior", "first_moment"], hist.rows())
    files["summary"] = write_report(out / "fokker_planck_summary.txt", "fokker-planck summary", [
        ("absorbed_0", a0), ("absorbed_1", a1), ("interior", inner), ("time", grid.time),
        ("first_moment_drift", float(np.abs(hist.first_moment - hist.first_moment[0]).max())),
    ])
    if v["figures"]:
        from .figures import plot_fokker_planck
        files["figure"] = plot_fokker_planck(grid, hist, out / "fokker_planck.png")
    return grid, files


# ---------------------------------------------------------------- epr

def run_epr(v, out):
    out = Path(out)
    cfg = epr.EprConfig(v["amplitudes"], (v["intensity_a"], v["intensity_b"]), v["dt"],
                        v["max_steps"], v["runs"], v["seed"])
    res = epr.epr_run(cfg, workers=v["workers"])
    files = {"csv": write_csv(out / "epr_runs.csv", ["run", "outcome_channel", "absorption_time"], res.rows())}
    items = [("runs", v["runs"]), ("unabsorbed", res.unabsorbed),
             ("forbidden_hits", int(res.counts[2] + res.counts[3])),
             ("marginal_H_prime", res.marginal_h_prime())]
    if v["independence_samples"]:
        ind = epr.independence_check(cfg, v["independence_samples"])
        items += [(f"corr_{j}", ind.correlation[j]) for j in range(4)]
        items += [("corr_bound", ind.bound)]
    table = res.contingency()
    files["summary"] = write_report(out / "epr_summary.txt", "epr summary", items, tables=[
        ("channels", ["channel", "label", "frequency", "stderr", "expected"],
         [(j, epr.CHANNELS[j], res.frequencies[j], res.stderr[j], res.expected[j]) for j in range(4)]),
        ("contingency", ["first\\second", "H''", "V''"],
         [("H'", table[0, 0], table[0, 1]), ("V'", table[1, 0], table[1, 1])]),
    ])
    if v["figures"]:
        from .figures import plot_epr
        files["figure"] = plot_epr(res, out / "epr.png")
    return res, files


# ---------------------------------------------------------------- crosscheck

def crosscheck(p0, spec, runs, seed, num_cells, interior_tol=1e-4, max_steps=10_000_000,
               workers=1):
    """Monte Carlo frequency of channel 0 against grid absorbed mass at ``p1 = 1``.

    Returns a dict with the Monte Carlo estimate and its standard error and
    the grid estimates at ``num_cells`` and ``num_cells // 2``.
    """
    stats = reduction.born_statistics(p0, spec, runs, seed, max_steps=max_steps, workers=workers)
    grids = {}
    for m in (num_cells // 2, num_cells):
        g, _ = fokker_planck.fp_evolve(fokker_planck.FpGrid.from_point(float(p0.probs[0]), m), spec,
                                       interior_tol=interior_tol)
        grids[m] = g
    coarse, fine = grids[num_cells // 2], grids[num_cells]
    return {
        "sde": float(stats.frequencies[0]),
        "sde_stderr": float(stats.stderr[0]),
        "unabsorbed": stats.unabsorbed,
        "pde": {m: g.absorbed[1] for m, g in grids.items()},
        "interior": {m: g.interior_mass for m, g in grids.items()},
        "richardson": 2 * fine.absorbed[1] - coarse.absorbed[1],
        "grid_error": abs(fine.absorbed[1] - coarse.absorbed[1]),
        "stats": stats,
    }


def run_crosscheck(v, out):
    out = Path(out)
    p0 = make_channel_state(v["p0"])
    if p0.K != 2:
        raise InvariantViolation("FpGrid.K", "the crosscheck compares two-channel runs only")
    res = crosscheck(p0, _diffusion(v), v["runs"], v["seed"], v["num_cells"], v["interior_tol"],
                     v["max_steps"], v["workers"])
    combined = math.hypot(3 * res["sde_stderr"], res["grid_error"])
    diffs = {m: abs(res["sde"] - a) for m, a in res["pde"].items()}
    passed = all(d <= v["tolerance"] for d in diffs.values())
    rows = [("monte_carlo", 0, res["sde"], 3 * res["sde_stderr"])]
    rows += [("grid", m, a, res["grid_error"]) for m, a in sorted(res["pde"].items())]
    rows += [("richardson", v["num_cells"], res["richardson"], res["grid_error"])]
    files = {"csv": write_csv(out / "crosscheck.csv", ["method", "num_cells", "estimate", "error_bar"], rows)}
    files["summary"] = write_report(out / "crosscheck_summary.txt", "crosscheck summary", [
        ("sde_frequency", res["sde"]),
        ("sde_three_sigma", 3 * res["sde_stderr"]),
        *[(f"pde_absorbed_1_{m}", a) for m, a in sorted(res["pde"].items())],
        *[(f"abs_diff_{m}", d) for m, d in sorted(diffs.items())],
        ("combined_error_bar", combined),
        ("tolerance", v["tolerance"]),
        ("pass", passed),
    ])
    if v["figures"]:
        from .figures import plot_crosscheck
        files["figure"] = plot_crosscheck(res["sde"], 3 * res["sde_stderr"], sorted(res["pde"].items()),
                                          out / "crosscheck.png")
    res["pass"] = passed
    res["diffs"] = diffs
    return res, files


RUNNERS = {
    "blocks": run_blocks,
    "proximity": run_proximity,
    "pearle": run_pearle,
    "fokker-planck": run_fokker_planck,
    "epr": run_epr,
    "crosscheck": run_crosscheck,
}


def run(scenario, values, out):
    """Run a scenario with resolved ``values``; returns ``(result, files)``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    result, files = RUNNERS[scenario](values, out)
    files["manifest"] = write_manifest(out, scenario, values, [Path(f).name for f in files.values()])
    return result, files
