"""Parameter sweeps, canned figure data and the ``optomech`` command line.

A sweep is described by a JSON document::

    {
      "system": "single",
      "fixed_params": {"kappa": 0.37, "Delta": 1.0},
      "axis1": {"name": "power", "min": 0.0, "max": 0.05, "count": 26},
      "axis2": {"name": "Delta", "values": [0.5, 1.0, 1.5]},
      "observable": "eta",
      "output_path": "eta.csv",
      "format": "csv"
    }

Rates are in units of omega_m, ``power`` in watts and ``T0`` in kelvin.
Points that are unstable (or fail numerically) are written as ``nan`` and
flagged in the ``stable`` column; they never abort the sweep.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cooling import FeedbackConfig, feedback_variances, lyapunov_cooling, perturbative_occupancy
from .errors import InstabilityError, OptomechError, ValidationError
from .gaussian import (en_upper_bound, log_negativity_modes, occupancy, swap_fidelity,
                       tripartite_class)
from .lyapunov import steady_state_cm
from .model import (HBAR, K_B, PhysicalParams, bose_occupation, coupling_from_power, hybrid_model,
                    single_mode_model, two_mode_model)
from .output_modes import FilterSpec, check_orthonormality, output_cm
from .stability import cold_damping_stability, stability_report

SYSTEMS = ("single", "two-mode", "hybrid", "feedback")

UNITS = {
    "G": "omega_m", "Delta": "omega_m", "kappa": "omega_m", "gamma_m": "omega_m",
    "G_A": "omega_m", "G_B": "omega_m", "Delta_A": "omega_m", "Delta_B": "omega_m",
    "G_a": "omega_m", "Delta_a": "omega_m", "gamma_a": "omega_m",
    "g_cd": "1", "omega_fb": "omega_m", "theta": "rad", "theta_over_pi": "pi rad",
    "Omega": "omega_m", "Omega1": "omega_m", "Omega2": "omega_m",
    "Omega_A": "omega_m", "Omega_B": "omega_m", "epsilon": "1 (omega_m tau)",
    "power": "W", "T0": "K", "n0": "1", "finesse": "1",
}
TEXT_PARAMS = {"filter_kind": ("step", "exponential"), "thermal_kind": ("markov", "exact")}
SCALAR_OBSERVABLES = ("n", "eta", "s1", "s2", "var_q", "var_p", "fidelity",
                      "tripartite_class", "bound", "n_perturbative")
PAIR = re.compile(r"^E_N\(\s*(\w+)\s*,\s*(\w+)\s*\)$")
P0_OMEGA_M = PhysicalParams.p0().omega_m


class ConfigError(ValidationError):
    """A sweep configuration that cannot be run."""


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple

    @classmethod
    def parse(cls, spec, key) -> "Axis":
        if isinstance(spec, (list, tuple)):
            spec = dict(zip(("name", "min", "max", "count", "scale"), spec))
        if not isinstance(spec, dict):
            raise ConfigError(key, "axis must be an object or a [name, min, max, count, scale] list")
        unknown = set(spec) - {"name", "min", "max", "count", "scale", "values"}
        if unknown:
            raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown axis key")
        name = spec.get("name")
        if name not in UNITS:
            raise ConfigError(f"{key}.name", f"unknown parameter {name!r}")
        if "values" in spec:
            vals = tuple(float(v) for v in spec["values"])
            if not vals:
                raise ConfigError(f"{key}.values", "must not be empty")
            return cls(name, vals)
        try:
            lo, hi, count = float(spec["min"]), float(spec["max"]), int(spec["count"])
        except KeyError as exc:
            raise ConfigError(f"{key}.{exc.args[0]}", "missing") from None
        scale = spec.get("scale", "linear")
        if scale not in ("linear", "log"):
            raise ConfigError(f"{key}.scale", "expected 'linear' or 'log'")
        if count == 1 and lo == hi:
            # degenerate axis: a single point
            return cls(name, (lo,))
        if count < 2:
            raise ConfigError(f"{key}.count", "must be at least 2 (or 1 with min == max)")
        if not lo < hi:
            raise ConfigError(f"{key}.min", "min must be below max")
        if scale == "log":
            if lo <= 0:
                raise ConfigError(f"{key}.min", "log axes need positive bounds")
            grid = np.geomspace(lo, hi, count)
        else:
            grid = np.linspace(lo, hi, count)
        return cls(name, tuple(float(v) for v in grid))

    def to_dict(self) -> dict:
        return {"name": self.name, "values": list(self.values)}


@dataclass(frozen=True)
class SweepConfig:
    system: str
    observable: tuple
    axis1: Axis
    axis2: Axis | None = None
    fixed_params: dict = field(default_factory=dict)
    output_path: str | None = None
    format: str = "csv"
    seed: int = 0

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config", "top level must be an object")
        allowed = {"system", "fixed_params", "axis1", "axis2", "observable", "output_path", "format",
                   "seed"}
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration key")
        system = doc.get("system")
        if system not in SYSTEMS:
            raise ConfigError("system", f"expected one of {SYSTEMS}, got {system!r}")
        fixed = dict(doc.get("fixed_params", {}))
        for k, v in fixed.items():
            if k in TEXT_PARAMS:
                if v not in TEXT_PARAMS[k]:
                    raise ConfigError(f"fixed_params.{k}", f"expected one of {TEXT_PARAMS[k]}")
            elif k not in UNITS:
                raise ConfigError(f"fixed_params.{k}", "unknown parameter")
            elif not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"fixed_params.{k}", "must be a number")
        if "axis1" not in doc:
            raise ConfigError("axis1", "missing")
        axis1 = Axis.parse(doc["axis1"], "axis1")
        axis2 = Axis.parse(doc["axis2"], "axis2") if doc.get("axis2") is not None else None
        obs = doc.get("observable")
        obs = (obs,) if isinstance(obs, str) else tuple(obs or ())
        if not obs:
            raise ConfigError("observable", "missing")
        for o in obs:
            if o not in SCALAR_OBSERVABLES and not PAIR.match(o):
                raise ConfigError("observable", f"unknown observable {o!r}")
        fmt = doc.get("format", "csv")
        if fmt not in ("csv", "json"):
            raise ConfigError("format", "expected 'csv' or 'json'")
        return cls(system, obs, axis1, axis2, fixed, doc.get("output_path"), fmt,
                   int(doc.get("seed", 0)))

    @classmethod
    def load(cls, path) -> "SweepConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"not valid JSON: {exc}") from None
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "observable": list(self.observable),
            "axis1": self.axis1.to_dict(),
            "axis2": self.axis2.to_dict() if self.axis2 else None,
            "fixed_params": dict(self.fixed_params),
            "format": self.format,
            "seed": self.seed,
        }


# --------------------------------------------------------------------------
# point evaluation

DEFAULTS = {
    "gamma_m": 1.0 / PhysicalParams.p0().quality_Q,
    "T0": PhysicalParams.p0().bath_temp_T0,
    "theta": 0.0,
}


def resolve(system, values) -> dict:
    """Fill defaults and convert physical inputs to normalized rates."""
    v = dict(DEFAULTS)
    v.update(values)
    if "theta_over_pi" in v:
        v["theta"] = math.pi * v.pop("theta_over_pi")
    if "finesse" in v:
        p = PhysicalParams.p0(finesse_F=v["finesse"])
    elif "kappa" in v:
        p = PhysicalParams.p0(kappa=v["kappa"] * P0_OMEGA_M)
    else:
        p = PhysicalParams.p0()
    v.setdefault("kappa", p.kappa_si / p.omega_m)
    if "n0" in values:
        v["thermal_ratio"] = math.log1p(1.0 / v["n0"]) if v["n0"] > 0 else math.inf
    else:
        T = v["T0"]
        ratio = math.inf if T == 0 else HBAR * p.omega_m / (K_B * T)
        v["thermal_ratio"] = ratio
        v["n0"] = bose_occupation(ratio)
    if system == "feedback":
        v.setdefault("Delta", 0.0)
    if "G" not in v and "power" in v and system in ("single", "feedback", "hybrid"):
        v["G"] = coupling_from_power(p, v.get("Delta", 0.0), v["power"])
    return v


def _need(v, *names):
    for k in names:
        if k not in v:
            raise ConfigError(k, "required parameter not set")
    return [v[k] for k in names]


def build_model(system, v):
    common = dict(thermal_ratio=v["thermal_ratio"])
    if system == "single":
        G, D = _need(v, "G", "Delta")
        return single_mode_model(G, D, v["kappa"], v["gamma_m"], v["n0"], **common)
    if system == "two-mode":
        GA, GB, DA, DB = _need(v, "G_A", "G_B", "Delta_A", "Delta_B")
        return two_mode_model(GA, GB, DA, DB, v["kappa"], v["gamma_m"], v["n0"], **common)
    if system == "hybrid":
        G, D, Ga, Da = _need(v, "G", "Delta", "G_a", "Delta_a")
        return hybrid_model(G, D, v["kappa"], Ga, Da, v.get("gamma_a", v["kappa"]), v["gamma_m"],
                            v["n0"], **common)
    raise ConfigError("system", f"no linear model for {system!r}")


def _filter(v, center_key, default_kind, source=0):
    kind = v.get("filter_kind", default_kind)
    (eps,) = _need(v, "epsilon")
    return FilterSpec.from_epsilon(kind, v.get(center_key, v.get("Omega", 0.0)), eps, source=source)


ALIASES = {"optical": "opticalA", "mirror": "mechanical", "atoms": "atomic", "output": "output1"}


def _modes_cm(system, v, model, names):
    """Covariance matrix containing ``names`` and the index of each name in it."""
    names = [ALIASES.get(n, n) for n in names]
    outputs = [n for n in names if n.startswith("output")]
    if not outputs:
        V = steady_state_cm(model)
        return V, [V.index(n) for n in names]
    if system == "single":
        if "output2" in outputs:
            filters = [_filter(v, "Omega1", "step"), _filter(v, "Omega2", "step")]
            if filters[0].kind == "step" and not check_orthonormality(filters, tol=1e-8).passed:
                raise ValidationError("Omega2", "step filters are not orthogonal")
        else:
            filters = [_filter(v, "Omega1" if "Omega1" in v else "Omega", "step")]
        V = output_cm(model, filters, v.get("thermal_kind", "markov"))
        labels = ["mechanical"] + [f"output{k + 1}" for k in range(len(filters))]
    elif system == "two-mode":
        fA = _filter(v, "Omega_A", "exponential", 0)
        fB = _filter(v, "Omega_B", "exponential", 1)
        V = output_cm(model, [fA, fB], v.get("thermal_kind", "markov"))
        labels = ["mechanical", "outputA", "outputB"]
    else:
        raise ConfigError("observable", f"output modes are not defined for {system!r}")
    idx = []
    for n in names:
        if n not in labels:
            raise ConfigError("observable", f"mode {n!r} not available for {system!r}")
        idx.append(labels.index(n))
    return V, idx


def _is_stable(system, v, model):
    if system == "feedback":
        G, g_cd, wfb = _need(v, "G", "g_cd", "omega_fb")
        return bool(cold_damping_stability(G, v["kappa"], v["gamma_m"], g_cd * math.cos(v["theta"]),
                                           wfb) > 0)
    rep = stability_report(model)
    return bool(rep.is_stable and rep.max_re_eigenvalue < 0)


def evaluate(system, observables, values) -> tuple:
    """Observable values and stability flag at one parameter point."""
    v = resolve(system, values)
    model = None if system == "feedback" else build_model(system, v)
    stable = _is_stable(system, v, model)
    out = []
    for obs in observables:
        if obs in ("eta", "s1", "s2"):
            if system != "single":
                raise ConfigError("observable", f"{obs} is defined for the single-mode system")
            out.append(float(getattr(stability_report(model), obs)))
            continue
        if obs == "bound":
            out.append(en_upper_bound(v["G"], v["kappa"], v["gamma_m"], v["n0"]))
            continue
        if not stable:
            out.append(math.nan)
            continue
        try:
            out.append(_stable_observable(system, obs, v, model))
        except ConfigError:
            raise
        except (OptomechError, ArithmeticError, np.linalg.LinAlgError):
            out.append(math.nan)
    return out, stable


def _stable_observable(system, obs, v, model):
    if system == "feedback":
        fb = FeedbackConfig(v["g_cd"], v["omega_fb"], v["theta"])
        rep = feedback_variances(v["G"], v["kappa"], v["gamma_m"], v["n0"], fb,
                                 thermal_ratio=v["thermal_ratio"],
                                 thermal_kind=v.get("thermal_kind", "exact"))
        if obs in ("n", "var_q", "var_p"):
            return float(getattr(rep, obs))
        raise ConfigError("observable", f"{obs} is not available for the feedback system")
    if obs == "n_perturbative":
        if system != "single":
            raise ConfigError("observable", "n_perturbative needs the single-mode system")
        return perturbative_occupancy(v["G"], v["Delta"], v["kappa"], v["gamma_m"], v["n0"])
    m = PAIR.match(obs)
    if m:
        V, (i, j) = _modes_cm(system, v, model, [m.group(1), m.group(2)])
        return log_negativity_modes(V, i, j)
    if obs == "tripartite_class":
        names = {"single": ["mechanical", "output1", "output2"],
                 "two-mode": ["mechanical", "outputA", "outputB"],
                 "hybrid": ["mechanical", "opticalA", "atomic"]}[system]
        V, idx = _modes_cm(system, v, model, names)
        return float(tripartite_class(V.reduced(idx)).n_npt)
    V = steady_state_cm(model)
    if obs == "n":
        return occupancy(V, 0)[0]
    if obs == "var_q":
        return float(V.entries[0, 0])
    if obs == "var_p":
        return float(V.entries[1, 1])
    if obs == "fidelity":
        return swap_fidelity(V.block(0, 0), V.block(1, 1))
    raise ConfigError("observable", f"unknown observable {obs!r}")


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    config: SweepConfig
    columns: list
    rows: list

    def values(self, k=0) -> np.ndarray:
        """Observable ``k`` as an array over the grid (axis1 outer, axis2 inner)."""
        col = np.array([r[len(self.axes) + k] for r in self.rows], dtype=float)
        shape = [len(a.values) for a in self.axes]
        return col.reshape(shape)

    @property
    def axes(self):
        return [a for a in (self.config.axis1, self.config.axis2) if a is not None]

    @property
    def stable(self) -> np.ndarray:
        return np.array([r[-1] for r in self.rows], dtype=bool)

    def summary(self) -> dict:
        out = {}
        na = len(self.axes)
        for k, name in enumerate(self.config.observable):
            col = np.array([r[na + k] for r in self.rows], dtype=float)
            finite = np.isfinite(col)
            if not finite.any():
                out[name] = {"min": math.nan, "max": math.nan, "argmin": None}
                continue
            i = int(np.nanargmin(np.where(finite, col, np.nan)))
            out[name] = {"min": float(col[i]), "max": float(np.nanmax(col)),
                         "argmin": {a.name: self.rows[i][q] for q, a in enumerate(self.axes)}}
        return out

    def render(self, fmt=None) -> str:
        fmt = fmt or self.config.format
        units = ", ".join(f"{c} [{UNITS.get(c, '1')}]" for c in self.columns[:len(self.axes)])
        fixed = " ".join(f"{k}={_fmt(v) if not isinstance(v, str) else v}"
                         for k, v in sorted(self.config.fixed_params.items()))
        if fmt == "json":
            doc = {
                "system": self.config.system,
                "observable": list(self.config.observable),
                "fixed_params": {k: self.config.fixed_params[k] for k in sorted(self.config.fixed_params)},
                "units": {c: UNITS.get(c, "1") for c in self.columns[:len(self.axes)]},
                "seed": self.config.seed,
                "columns": self.columns,
                "rows": [[_json_num(x) for x in r] for r in self.rows],
            }
            return json.dumps(doc, indent=1, sort_keys=False) + "\n"
        buf = io.StringIO()
        buf.write(f"# system={self.config.system} seed={self.config.seed} {fixed}".rstrip() + "\n")
        buf.write(f"# units: {units}; rates in omega_m\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue()

    def write(self, path=None, fmt=None):
        path = path or self.config.output_path
        text = self.render(fmt)
        if path is None or path == "-":
            sys.stdout.write(text)
        else:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return path


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _json_num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    x = float(x)
    return None if not math.isfinite(x) else float(f"{x:.12g}")


def thread_count(threads=None) -> int:
    cap = os.environ.get("OPTOMECH_THREADS")
    n = threads if threads else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError("OPTOMECH_THREADS", f"not an integer: {cap!r}") from None
    return max(1, int(n))


def run_sweep(cfg: SweepConfig, *, threads=None, write=True) -> SweepResult:
    """Evaluate the observable(s) on the grid, axis1 outer and axis2 inner."""
    axes = [a for a in (cfg.axis1, cfg.axis2) if a is not None]
    if len({a.name for a in axes}) != len(axes):
        raise ConfigError("axis2.name", "both axes sweep the same parameter")
    for a in axes:
        if a.name in cfg.fixed_params:
            raise ConfigError(f"fixed_params.{a.name}", "also used as a sweep axis")
    if len(axes) == 1:
        grid = [(x,) for x in axes[0].values]
    else:
        grid = [(x, y) for x in axes[0].values for y in axes[1].values]
    # fail fast on configuration problems using the first point
    _point(cfg, axes, grid[0])

    def job(pt):
        return _point(cfg, axes, pt)

    n = thread_count(threads)
    if n > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(job, grid))
    else:
        results = [job(pt) for pt in grid]
    rows = [list(pt) + vals + [stable] for pt, (vals, stable) in zip(grid, results)]
    columns = [a.name for a in axes] + list(cfg.observable) + ["stable"]
    res = SweepResult(cfg, columns, rows)
    if write and cfg.output_path:
        res.write()
    return res


def _point(cfg, axes, pt):
    values = dict(cfg.fixed_params)
    values.update({a.name: x for a, x in zip(axes, pt)})
    try:
        return evaluate(cfg.system, cfg.observable, values)
    except ConfigError:
        raise
    except (OptomechError, ArithmeticError, ValueError, np.linalg.LinAlgError):
        return [math.nan] * len(cfg.observable), False


# --------------------------------------------------------------------------
# canned figure data

FIGURES = {}


def _fig(tag, caption):
    def deco(fn):
        FIGURES[tag] = (caption, fn)
        return fn
    return deco


def _cfg(system, observable, axis1, axis2=None, **fixed):
    doc = {"system": system, "observable": observable, "axis1": axis1, "fixed_params": fixed}
    if axis2 is not None:
        doc["axis2"] = axis2
    return SweepConfig.from_dict(doc)


@_fig("fig1", "Stability parameter eta at p0 (finesse 8e4, kappa = 0.37 omega_m): "
      "(a) versus power and Delta; (b) versus power and kappa at Delta = omega_m.")
def _fig1():
    return {
        "eta_power_detuning": _cfg("single", "eta", ["power", 0.0, 0.05, 26],
                                   ["Delta", 0.05, 2.5, 50], finesse=8e4),
        "eta_power_kappa": _cfg("single", "eta", ["power", 0.0, 0.05, 26],
                                ["kappa", 0.05, 2.0, 40], Delta=1.0),
    }


@_fig("fig2", "Intracavity field-mirror log-negativity and mean phonon number versus G and "
      "Delta at p0 with kappa = omega_m.")
def _fig2():
    return {
        "intracavity_EN": _cfg("single", "E_N(mechanical,opticalA)", ["G", 0.02, 1.0, 50],
                               ["Delta", 0.05, 2.5, 50], kappa=1.0),
        "intracavity_n": _cfg("single", "n", ["G", 0.02, 1.0, 50], ["Delta", 0.05, 2.5, 50],
                              kappa=1.0),
    }


@_fig("fig3", "Cold-damping feedback at p0, kappa = 5 omega_m, omega_fb = 3.5 omega_m: "
      "(a) n versus power and g_cd; (b) position and momentum variances at g_cd = 1.2; "
      "(c) n versus theta for (g_cd, P) = (0.8, 20 mW) and (1.2, 50 mW); "
      "(d) n versus power at theta = 0 and 0.13 pi with g_cd = 1.2.")
def _fig3():
    fb = dict(kappa=5.0, omega_fb=3.5)
    return {
        "n_power_gain": _cfg("feedback", "n", ["power", 0.005, 0.1, 20], ["g_cd", 0.1, 2.0, 20],
                             **fb),
        "equipartition": _cfg("feedback", ["var_q", "var_p"], ["power", 0.005, 0.1, 20],
                              g_cd=1.2, **fb),
        "n_theta_g0.8_P20mW": _cfg("feedback", "n", ["theta_over_pi", -0.5, 0.5, 41],
                                   g_cd=0.8, power=0.02, **fb),
        "n_theta_g1.2_P50mW": _cfg("feedback", "n", ["theta_over_pi", -0.5, 0.5, 41],
                                   g_cd=1.2, power=0.05, **fb),
        "n_power_theta": _cfg("feedback", "n", ["power", 0.005, 0.1, 20],
                              {"name": "theta_over_pi", "values": [0.0, 0.13]}, g_cd=1.2, **fb),
    }


@_fig("fig4", "Back-action cooling at p0: (a) n versus Delta and power at kappa = 0.37 omega_m; "
      "(b) variances versus power at Delta = omega_m; (c) n versus kappa and power at "
      "Delta = omega_m; (d) mirror-field swap fidelity versus G for kappa in {0.2, 0.5, 1, 2}.")
def _fig4():
    return {
        "n_detuning_power": _cfg("single", "n", ["Delta", 0.1, 2.5, 49], ["power", 0.001, 0.05, 25],
                                 kappa=0.37),
        "equipartition": _cfg("single", ["var_q", "var_p"], ["power", 0.001, 0.1, 40],
                              kappa=0.37, Delta=1.0),
        "n_kappa_power": _cfg("single", "n", ["kappa", 0.05, 1.5, 30], ["power", 0.001, 0.05, 25],
                              Delta=1.0),
        "fidelity": _cfg("single", "fidelity", ["G", 0.01, 0.6, 60],
                         {"name": "kappa", "values": [0.2, 0.5, 1.0, 2.0]}, Delta=1.0),
    }


@_fig("fig5", "Mirror-output log-negativity at p0, Delta = omega_m, G = omega_m/2, "
      "kappa = omega_m, step filters: versus Omega for epsilon in {0.5, 2 pi, 10}; "
      "versus T0 at Omega = -omega_m.")
def _fig5():
    op = dict(kappa=1.0, Delta=1.0, G=0.5)
    eps = {"name": "epsilon", "values": [0.5, 2 * math.pi, 10.0]}
    return {
        "EN_omega": _cfg("single", "E_N(mechanical,output)", ["Omega", -2.0, 2.0, 81], eps, **op),
        "EN_temperature": _cfg("single", "E_N(mechanical,output)", ["T0", 0.01, 20.0, 30, "log"],
                               eps, Omega=-1.0, **op),
    }


@_fig("fig6", "Sideband-sideband log-negativity at p0, kappa = omega_m, G = omega_m/2, "
      "Delta = omega_m, Omega1 = -omega_m: (a) versus Omega2 on the orthogonal grid; "
      "(b) versus epsilon at Omega2 = +omega_m; (c) versus T0 at epsilon in {10 pi, 100 pi}.")
def _fig6():
    op = dict(kappa=1.0, Delta=1.0, G=0.5, Omega1=-1.0)
    pair = "E_N(output1,output2)"
    return {
        "EN_omega2": _cfg("single", pair,
                          {"name": "Omega2", "values": [round(-1 + 0.2 * k, 12) for k in range(3, 18)]},
                          {"name": "epsilon", "values": [10 * math.pi, 100 * math.pi]}, **op),
        "EN_epsilon": _cfg("single", pair,
                           {"name": "epsilon", "values": [math.pi * k for k in (1, 2, 5, 10, 20, 50, 100, 200)]},
                           Omega2=1.0, **op),
        "EN_temperature": _cfg("single", pair, ["T0", 0.01, 300.0, 30, "log"],
                               {"name": "epsilon", "values": [10 * math.pi, 100 * math.pi]},
                               Omega2=1.0, **op),
    }


@_fig("fig7", "Two driven modes at p0, kappa = omega_m, Delta_A = omega_m, Delta_B = -omega_m, "
      "G_A = 0.326 omega_m, G_B = 0.302 omega_m, exponential filters: mirror-output "
      "log-negativity for mode A and mode B versus the filter center and versus T0 at -omega_m.")
def _fig7():
    op = dict(kappa=1.0, Delta_A=1.0, Delta_B=-1.0, G_A=0.326, G_B=0.302)
    eps = {"name": "epsilon", "values": [0.5, 2 * math.pi, 10.0]}
    return {
        "mechA_omega": _cfg("two-mode", "E_N(mechanical,outputA)", ["Omega_A", -2.0, 2.0, 41], eps,
                            Omega_B=-1.0, **op),
        "mechB_omega": _cfg("two-mode", "E_N(mechanical,outputB)", ["Omega_B", -2.0, 2.0, 41], eps,
                            Omega_A=-1.0, **op),
        "mechA_temperature": _cfg("two-mode", "E_N(mechanical,outputA)", ["T0", 0.01, 20.0, 25, "log"],
                                  eps, Omega_A=-1.0, Omega_B=-1.0, **op),
        "mechB_temperature": _cfg("two-mode", "E_N(mechanical,outputB)", ["T0", 0.01, 20.0, 25, "log"],
                                  eps, Omega_A=-1.0, Omega_B=-1.0, **op),
    }


@_fig("fig8", "Output-output log-negativity of the two driven modes at p0, kappa = omega_m, "
      "Delta_A = omega_m, Delta_B = -omega_m, G_A = 1.74 omega_m, G_B = 1.70 omega_m: versus "
      "Omega_A with Omega_B = -omega_m; versus T0 at (Omega_A, Omega_B) = (omega_m, -omega_m).")
def _fig8():
    op = dict(kappa=1.0, Delta_A=1.0, Delta_B=-1.0, G_A=1.74, G_B=1.70, Omega_B=-1.0)
    return {
        "EN_omegaA": _cfg("two-mode", "E_N(outputA,outputB)", ["Omega_A", -2.0, 2.0, 41],
                          {"name": "epsilon", "values": [2 * math.pi, 10.0, 30.0]}, **op),
        "EN_temperature": _cfg("two-mode", "E_N(outputA,outputB)", ["T0", 0.01, 300.0, 30, "log"],
                               {"name": "epsilon", "values": [10.0, 100.0]}, Omega_A=1.0, **op),
    }


@_fig("fig9", "Hybrid mirror-atom-field system at p0, kappa = gamma_a = omega_m, "
      "G = 1.3 omega_m, Delta = omega_m: mirror-atom log-negativity versus G_a and Delta_a; "
      "the three bipartite log-negativities versus Delta_a at G_a = 0.6 omega_m; mirror-field "
      "value without atoms.")
def _fig9():
    op = dict(kappa=1.0, gamma_a=1.0, G=1.3, Delta=1.0)
    return {
        "Ema_map": _cfg("hybrid", "E_N(mechanical,atomic)", ["G_a", 0.05, 1.5, 30],
                        ["Delta_a", -2.5, 2.5, 51], **op),
        "bipartite_slice": _cfg("hybrid", ["E_N(mechanical,atomic)", "E_N(mechanical,opticalA)",
                                           "E_N(opticalA,atomic)"],
                                ["Delta_a", -2.5, 2.5, 101], G_a=0.6, **op),
        "no_atoms": _cfg("single", "E_N(mechanical,opticalA)", ["G", 1.3, 1.3, 1], kappa=1.0,
                         Delta=1.0),
    }


def reproduce_figure(tag, out_dir=".", *, fmt="csv", threads=None) -> list:
    """Write the data files for ``tag`` plus a ``<tag>_caption.txt`` sidecar."""
    if tag not in FIGURES:
        raise ConfigError("tag", f"unknown figure {tag!r}; expected one of {sorted(FIGURES)}")
    caption, build = FIGURES[tag]
    os.makedirs(out_dir, exist_ok=True)
    written = []
    lines = [f"{tag}: {caption}", ""]
    for name, cfg in build().items():
        path = os.path.join(out_dir, f"{tag}_{name}.{fmt}")
        cfg = replace(cfg, output_path=path, format=fmt)
        run_sweep(cfg, threads=threads)
        written.append(path)
        fixed = ", ".join(f"{k} = {v:g}" if not isinstance(v, str) else f"{k} = {v}"
                          for k, v in sorted(cfg.fixed_params.items()))
        axes = "; ".join(f"{a.name} over {len(a.values)} points [{min(a.values):g}, {max(a.values):g}]"
                         for a in (cfg.axis1, cfg.axis2) if a is not None)
        lines.append(f"{os.path.basename(path)}: {', '.join(cfg.observable)} ({cfg.system}); "
                     f"{axes}; fixed {fixed or 'none'}")
    side = os.path.join(out_dir, f"{tag}_caption.txt")
    with open(side, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    written.append(side)
    return written


# --------------------------------------------------------------------------
# command line


def _add_common(p):
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


def _add_point(p, *names):
    for n in names:
        p.add_argument(f"--{n}", type=float, default=None, help=f"[{UNITS.get(n, '1')}]")


def _given(args, names):
    return {n: getattr(args, n) for n in names if getattr(args, n) is not None}


def build_parser():
    ap = argparse.ArgumentParser(prog="optomech", description="Steady-state optomechanics toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sweep", help="run a sweep described by a JSON config")
    p.add_argument("config")
    _add_common(p)
    p = sub.add_parser("figure", help="write the data behind one of the canned figures")
    p.add_argument("tag")
    _add_common(p)
    point = ("G", "Delta", "kappa", "gamma_m", "power", "T0", "n0")
    p = sub.add_parser("stability", help="stability report for one single-mode point")
    _add_point(p, *point)
    _add_common(p)
    p = sub.add_parser("cool", help="mean phonon number for back-action or feedback cooling")
    p.add_argument("--scheme", choices=("backaction", "feedback"), default="backaction")
    _add_point(p, *point, "g_cd", "omega_fb", "theta")
    _add_common(p)
    p = sub.add_parser("entangle", help="intracavity and filtered-output log-negativity")
    _add_point(p, *point, "Omega", "epsilon")
    p.add_argument("--filter-kind", choices=("step", "exponential"), default="step")
    _add_common(p)
    p = sub.add_parser("oracle-check", help="Monte-Carlo check of the Lyapunov covariance matrix")
    _add_point(p, *point)
    p.add_argument("--n-traj", type=int, default=2000)
    _add_common(p)
    return ap


def _emit(doc, args):
    fmt = args.format or "json"
    if fmt == "json":
        text = json.dumps({k: _json_num(v) if isinstance(v, (float, bool, np.floating)) else v
                           for k, v in doc.items()}, indent=1) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(doc))
        w.writerow([_fmt(v) if isinstance(v, (float, int, bool, np.floating)) else v
                    for v in doc.values()])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _point_values(args, names, **defaults):
    v = dict(defaults)
    v.update(_given(args, names))
    return v


def _cmd_stability(args):
    v = resolve("single", _point_values(args, ("G", "Delta", "kappa", "gamma_m", "power", "T0", "n0"),
                                         Delta=1.0))
    if "G" not in v:
        raise ConfigError("G", "give --G or --power")
    rep = stability_report(build_model("single", v))
    _emit({"G": v["G"], "Delta": v["Delta"], "kappa": v["kappa"], "s1": rep.s1, "s2": rep.s2,
           "eta": rep.eta, "max_re_eigenvalue": rep.max_re_eigenvalue, "stable": rep.is_stable}, args)
    return 0


def _cmd_cool(args):
    names = ("G", "Delta", "kappa", "gamma_m", "power", "T0", "n0", "g_cd", "omega_fb", "theta")
    if args.scheme == "feedback":
        v = resolve("feedback", _point_values(args, names, kappa=5.0, omega_fb=3.5, g_cd=1.2))
        if "G" not in v:
            raise ConfigError("G", "give --G or --power")
        fb = FeedbackConfig(v["g_cd"], v["omega_fb"], v["theta"])
        rep = feedback_variances(v["G"], v["kappa"], v["gamma_m"], v["n0"], fb,
                                 thermal_ratio=v["thermal_ratio"])
    else:
        v = resolve("single", _point_values(args, names, Delta=1.0))
        if "G" not in v:
            raise ConfigError("G", "give --G or --power")
        rep = lyapunov_cooling(v["G"], v["Delta"], v["kappa"], v["gamma_m"], v["n0"])
    _emit({"scheme": args.scheme, "G": v["G"], "kappa": v["kappa"], "n": rep.n, "var_q": rep.var_q,
           "var_p": rep.var_p, "var_q_over_var_p": rep.equipartition_ratio}, args)
    return 0


def _cmd_entangle(args):
    names = ("G", "Delta", "kappa", "gamma_m", "power", "T0", "n0", "Omega", "epsilon")
    v = resolve("single", _point_values(args, names, Delta=1.0, kappa=1.0, G=0.5))
    model = build_model("single", v)
    V = steady_state_cm(model)
    doc = {"G": v["G"], "Delta": v["Delta"], "kappa": v["kappa"],
           "E_N_intracavity": log_negativity_modes(V, 0, 1)}
    if "epsilon" in v:
        f = FilterSpec.from_epsilon(args.filter_kind, v.get("Omega", -1.0), v["epsilon"])
        W = output_cm(model, [f])
        doc.update({"Omega": f.center_Omega, "epsilon": v["epsilon"],
                    "E_N_output": log_negativity_modes(W, 0, 1)})
    _emit(doc, args)
    return 0


def _cmd_oracle(args):
    from .oracle import SimConfig, simulate_cm

    v = resolve("single", _point_values(args, ("G", "Delta", "kappa", "gamma_m", "power", "T0", "n0"),
                                         Delta=1.0, kappa=1.0, G=0.5))
    model = build_model("single", v)
    V = steady_state_cm(model).entries
    cfg = SimConfig.for_model(model, n_traj=args.n_traj, seed=args.seed or 0)
    res = simulate_cm(model, cfg, workers=thread_count(args.threads))
    ok = res.agrees_with(V)
    n = V.shape[0]
    doc = {"n_traj": cfg.n_traj, "dt": cfg.dt, "burn_in": cfg.burn_in, "seed": cfg.seed,
           "agree": bool(ok.all())}
    for i in range(n):
        for j in range(i, n):
            doc[f"V{i}{j}"] = float(V[i, j])
            doc[f"mc{i}{j}"] = float(res.cm.entries[i, j])
            doc[f"se{i}{j}"] = float(res.stderr[i, j])
    _emit(doc, args)
    return 0 if ok.all() else 3


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "sweep":
            cfg = SweepConfig.load(args.config)
            over = {}
            if args.format:
                over["format"] = args.format
            if args.out:
                over["output_path"] = args.out
            if args.seed is not None:
                over["seed"] = args.seed
            cfg = replace(cfg, **over)
            res = run_sweep(cfg, threads=args.threads, write=False)
            res.write()
            if cfg.output_path and cfg.output_path != "-":
                print(json.dumps(res.summary(), default=_json_num))
            return 0
        if args.command == "figure":
            for path in reproduce_figure(args.tag, args.out or ".", fmt=args.format or "csv",
                                         threads=args.threads):
                print(path)
            return 0
        handler = {"stability": _cmd_stability, "cool": _cmd_cool, "entangle": _cmd_entangle,
                   "oracle-check": _cmd_oracle}[args.command]
        return handler(args)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InstabilityError as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return 3
    except OptomechError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
