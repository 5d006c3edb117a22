"""Flat ``key = value`` scenario configuration.

Files are line oriented::

    # comment
    seed = 42            # keys before any section apply to every scenario
    [pearle]
    p0 = 0.36, 0.64
    runs = 100000

Each scenario has a fixed parameter schema; unknown keys and unparsable
values are reported with their line numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (DiffusionSpec, InvariantViolation, ProximityParams, born_init,
                    make_channel_state)

SCENARIOS = ("blocks", "proximity", "pearle", "fokker-planck", "epr", "crosscheck")


class ConfigError(ValueError):
    """Unparsable configuration; ``diagnostics`` lists every problem found."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


def _floats(text):
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _complexes(text):
    return tuple(complex(x.strip().replace(" ", "").replace("i", "j"))
                 for x in str(text).replace(";", ",").split(",") if x.strip())


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _tristate(text):
    t = str(text).strip().lower()
    return None if t == "auto" else _bool(t)


def _int(text):
    t = str(text).strip().replace("_", "")
    try:
        return int(t)
    except ValueError:
        f = float(t)
        if not f.is_integer():
            raise ValueError(f"not an integer: {text!r}") from None
        return int(f)


def _u64(text):
    v = int(str(text).strip(), 0)
    if not 0 <= v < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return v


def _complex(text):
    return complex(str(text).strip().replace(" ", "").replace("i", "j"))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "auto"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return repr(v).strip("()")
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


@dataclass(frozen=True)
class Param:
    parse: object
    default: object
    doc: str = ""
    inert: bool = False  # does not affect result CSVs


_COMMON = {
    "seed": Param(_u64, 0, "master seed (unsigned 64-bit)"),
    "figures": Param(_bool, True, "render PNG figures next to the CSVs", inert=True),
}

SCHEMAS = {
    "blocks": {
        "d": Param(_int, 2, "apparatus block dimension"),
        "amplitudes": Param(_complexes, (0.6, 0.8), "measured-state amplitudes c1, c2"),
        "t_final": Param(float, 10.0),
        "dt": Param(float, 1e-3),
        "coupling": Param(float, 0.2, "relative size of h12 before norm scaling"),
        "norm": Param(float, 1.0, "spectral norm of the assembled Hamiltonian"),
        "record_every": Param(_int, 10),
        "pointer_speed": Param(float, 0.0, "rate of pointer separation; 0 keeps h12 constant"),
        "n_prime": Param(_int, 100, "spectator atoms used by the overlap envelope"),
        "delta": Param(float, 1.0, "lattice spread used by the overlap envelope"),
    },
    "proximity": {
        "n_prime": Param(_int, 100),
        "delta": Param(float, 1.0),
        "cluster_n": Param(_int, 10),
        "pointer_total": Param(_int, 1000),
        "t_element": Param(_complex, 1.0 + 0j),
        "xi_max": Param(float, 1.0),
        "points": Param(_int, 101),
        "threshold": Param(float, 0.5, "overlap level defining the proximity window"),
        "delta_p": Param(float, 0.02, "local cluster probability change to spread"),
    },
    "pearle": {
        "p0": Param(_floats, (0.5, 0.5), "initial channel probabilities"),
        "runs": Param(_int, 10_000),
        "intensity": Param(float, 1.0),
        "num_sources": Param(_int, 1),
        "dt": Param(float, 1e-4),
        "max_steps": Param(_int, 10_000_000),
        "fast": Param(_tristate, None, "closed-form two-channel step: auto, true or false"),
        "workers": Param(_int, 1, "threads; results do not depend on it", inert=True),
        "paths": Param(_int, 5, "sample trajectories written to the path CSV"),
    },
    "fokker-planck": {
        "p0": Param(_floats, (0.3, 0.7), "initial probabilities; p0[0] is the grid coordinate"),
        "num_cells": Param(_int, 256),
        "intensity": Param(float, 1.0),
        "num_sources": Param(_int, 1),
        "dt": Param(float, 0.0, "time step; 0 picks 0.9 x the stability bound"),
        "t_final": Param(float, 0.0, "stop time; 0 runs until interior_tol"),
        "interior_tol": Param(float, 1e-4),
    },
    "epr": {
        "amplitudes": Param(_complexes, (1 / math.sqrt(2), -1 / math.sqrt(2)), "c_HV, c_VH"),
        "intensity_a": Param(float, 1.0, "first apparatus"),
        "intensity_b": Param(float, 1.0, "second apparatus"),
        "dt": Param(float, 1e-4),
        "runs": Param(_int, 10_000),
        "max_steps": Param(_int, 10_000_000),
        "independence_samples": Param(_int, 1_000_000, "0 skips the independence check"),
        "workers": Param(_int, 1, inert=True),
    },
    "crosscheck": {
        "p0": Param(_floats, (0.3, 0.7)),
        "runs": Param(_int, 200_000),
        "intensity": Param(float, 1.0),
        "num_sources": Param(_int, 1),
        "dt": Param(float, 1e-4),
        "max_steps": Param(_int, 10_000_000),
        "num_cells": Param(_int, 256, "fine grid; the coarse grid has half as many cells"),
        "interior_tol": Param(float, 1e-4),
        "tolerance": Param(float, 3e-3, "pass threshold on |SDE - PDE|"),
        "workers": Param(_int, 1, inert=True),
    },
}


# scenarios with no random draws: the seed is recorded but has no effect
DETERMINISTIC = ("proximity", "fokker-planck")


def schema(scenario):
    return {**_COMMON, **SCHEMAS[scenario]}


def inert_keys(scenario):
    """Keys that never change the result files of ``scenario``."""
    keys = {k for k, p in schema(scenario).items() if p.inert}
    if scenario in DETERMINISTIC:
        keys.add("seed")
    return keys


def parse_text(text, source="<config>"):
    """Parse config text into ``{section: {key: (value_text, line)}}``.

    Keys outside any section go to section ``""``.
    """
    sections = {"": {}}
    current = ""
    errors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append(f"{source}:{lineno}: malformed section header {raw.strip()!r}")
                continue
            current = line[1:-1].strip()
            if current not in SCENARIOS:
                errors.append(f"{source}:{lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            errors.append(f"{source}:{lineno}: empty key")
            continue
        sections[current][key] = (value, lineno)
    if errors:
        raise ConfigError(errors)
    return sections


def read_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), str(path))


def resolve(scenario, sections=None, overrides=None, source="<config>"):
    """Merge defaults, file values and command-line overrides for a scenario.

    Returns an ordered dict of typed values. Raises :class:`ConfigError`.
    """
    sch = schema(scenario)
    sections = sections or {"": {}}
    errors = []
    raw = {}
    for sec in ("", scenario):
        for key, (text, lineno) in sections.get(sec, {}).items():
            if key not in sch:
                if sec:  # global keys may belong to other scenarios
                    errors.append(f"{source}:{lineno}: unknown key {key!r} in [{sec}]")
                continue
            raw[key] = (text, f"{source}:{lineno}")
    for key, text in (overrides or {}).items():
        key = key.replace("-", "_")
        if key not in sch:
            errors.append(f"--{key}: unknown key for scenario {scenario!r}")
            continue
        raw[key] = (text, f"--{key}")
    values = {}
    for key, p in sch.items():
        if key not in raw:
            values[key] = p.default
            continue
        text, where = raw[key]
        try:
            values[key] = p.parse(text)
        except (ValueError, TypeError) as exc:
            errors.append(f"{where}: key {key!r}: cannot parse {text!r} ({exc})")
    if errors:
        raise ConfigError(errors)
    return values


def format_values(values):
    return [f"{k} = {_fmt(v)}" for k, v in values.items()]


def default_config_text():
    lines = ["# collapselab scenario configuration", "seed = 0", ""]
    for sc in SCENARIOS:
        lines.append(f"[{sc}]")
        for key, p in SCHEMAS[sc].items():
            note = f"  # {p.doc}" if p.doc else ""
            lines.append(f"{key} = {_fmt(p.default)}{note}")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------- validation

def check_values(scenario, v):
    """Type-invariant diagnostics for resolved values; empty means valid."""
    out = []

    def attempt(label, fn):
        try:
            fn()
        except InvariantViolation as exc:
            out.append(f"[{scenario}] {label}: {exc}")
        except (ValueError, TypeError) as exc:
            out.append(f"[{scenario}] {label}: {exc}")

    def positive_int(key, minimum=1):
        if v[key] < minimum:
            out.append(f"[{scenario}] {key}: must be >= {minimum}, got {v[key]}")

    if scenario in ("pearle", "fokker-planck", "crosscheck"):
        attempt("p0", lambda: make_channel_state(v["p0"]))
        # dt = 0 selects the automatic grid step
        dt = 1.0 if scenario == "fokker-planck" and v["dt"] == 0 else v["dt"]
        attempt("diffusion", lambda: DiffusionSpec(v["intensity"], v["num_sources"], dt))
        if scenario == "fokker-planck":
            if len(v["p0"]) != 2:
                out.append(f"[{scenario}] p0: FpGrid.K: the grid solver supports exactly 2 channels")
            if v["dt"] < 0:
                out.append(f"[{scenario}] dt: must be >= 0 (0 = automatic)")
        if scenario in ("pearle", "crosscheck"):
            positive_int("runs", 100)
            positive_int("max_steps")
        if scenario == "crosscheck" and len(v["p0"]) != 2:
            out.append(f"[{scenario}] p0: FpGrid.K: the crosscheck compares 2-channel runs only")
        if "num_cells" in v and v["num_cells"] // (2 if scenario == "crosscheck" else 1) < 64:
            out.append(f"[{scenario}] num_cells: FpGrid.num_cells: need >= 64 cells on every grid")
    elif scenario == "blocks":
        attempt("amplitudes", lambda: born_init(v["amplitudes"]))
        if len(v["amplitudes"]) != 2:
            out.append(f"[{scenario}] amplitudes: need exactly two amplitudes")
        positive_int("d")
        for key in ("dt", "norm", "delta"):
            if not v[key] > 0:
                out.append(f"[{scenario}] {key}: must be > 0, got {v[key]}")
        if v["t_final"] < 0:
            out.append(f"[{scenario}] t_final: must be >= 0")
        positive_int("n_prime")
    elif scenario == "proximity":
        attempt("params", lambda: ProximityParams(v["n_prime"], 0.0, v["delta"], v["cluster_n"],
                                                  v["pointer_total"], v["t_element"]))
        if not 0 < v["threshold"] < 1:
            out.append(f"[{scenario}] threshold: must lie in (0, 1), got {v['threshold']}")
        if v["xi_max"] < 0:
            out.append(f"[{scenario}] xi_max: ProximityParams.xi: must be >= 0")
        positive_int("points", 2)
    elif scenario == "epr":
        from .epr import EprConfig
        attempt("config", lambda: EprConfig(v["amplitudes"], (v["intensity_a"], v["intensity_b"]), v["dt"]))
        positive_int("runs", 100)
        positive_int("max_steps")
        if v["independence_samples"] and v["independence_samples"] < 10_000:
            out.append(f"[{scenario}] independence_samples: must be 0 or >= 10000")
    return out


def validate_config(path):
    """Diagnostics for every scenario section in a config file; empty list means valid."""
    try:
        sections = read_config(path)
    except ConfigError as exc:
        return exc.diagnostics
    diags = []
    present = [s for s in SCENARIOS if s in sections] or list(SCENARIOS)
    for sc in present:
        try:
            v = resolve(sc, sections, source=str(path))
        except ConfigError as exc:
            diags.extend(exc.diagnostics)
            continue
        diags.extend(check_values(sc, v))
    return diags

