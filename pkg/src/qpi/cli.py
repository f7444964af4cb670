"""Configuration-driven front end: single experiments, parameter sweeps, CSV/JSON output.

Configuration is flat ``key = value`` text grouped under ``[system]``,
``[controller]``, ``[ensemble]`` and ``[output]``.  Every key can also be
given on the command line as ``--key=value``; flags win over the file.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import oscillator as osc
from . import quantum as q
from .ensemble import (EnsembleConfig, EnsembleError, run_ensemble, steady_window_summary,
                       window_slope)
from .feedback import PIController, from_mixing
from .stochastic import grid_steps
from .twoqubit import TwoQubitBlock, TwoQubitModel, analytic_T0_steady, exact_T0_steady

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

SECTIONS = {
    "system": ("system", "h", "h1", "h2", "k", "eta", "m", "omega", "gamma", "n_bath",
               "actuation", "x0", "p0", "Xg", "Pg"),
    "controller": ("feedback", "alpha_p", "alpha_i", "theta", "f_pi", "tau_p", "tau_i",
                   "epsilon", "compensation", "alpha_p1", "alpha_p2", "alpha_i1", "alpha_i2"),
    "ensemble": ("n_traj", "base_seed", "dt", "t_final", "output_stride", "batch_size",
                 "workers", "window", "positivity_abort"),
    "output": ("csv", "summary", "sweep", "sweep_values"),
}
KNOWN_KEYS = {k for keys in SECTIONS.values() for k in keys}
SWEEP_AXES = ("theta", "tau_i", "tau_p", "eta", "epsilon")
# keys that accept a trailing "T" (multiples of the oscillator period)
PERIOD_KEYS = ("tau_p", "tau_i", "epsilon", "dt", "t_final")

TWOQUBIT_CSV = ("t", "mean_Tm1", "mean_T0", "mean_T1", "mean_concurrence", "std_concurrence")
OSCILLATOR_CSV = ("t", "mean_X", "mean_P", "std_X", "std_P", "single_traj_X", "single_traj_P")

HELP_UNITS = """\
Units: hbar = 1.  Two-qubit times (dt, t_final, tau_p, tau_i, window) are in
units of 1/k.  Oscillator times are absolute; the period T = 2 pi / omega is
echoed in the summary and time keys accept a "T" suffix, e.g. tau_i=0.15T.

Sections and keys:
  [system]     system, h (or h1, h2), k, eta, m, omega, gamma, n_bath,
               actuation (xp | x_only), x0, p0, Xg, Pg
  [controller] feedback (P | I | PI), alpha_p, alpha_i or theta, f_pi,
               tau_p, tau_i, epsilon, compensation (auto | off | value)
  [ensemble]   n_traj, base_seed, dt, t_final, output_stride, batch_size,
               workers, window (start,end), positivity_abort
  [output]     csv, summary, sweep (theta | tau_i | tau_p | eta | epsilon),
               sweep_values (comma separated)

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.
"""


class ConfigError(ValueError):
    """Unknown key, malformed value or violated constraint."""


# -- parsing ---------------------------------------------------------------------

def read_config_text(text):
    """Parse ``[section]`` / ``key = value`` text into a flat dict."""
    raw = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if section is not None and key not in SECTIONS[section]:
            raise ConfigError(f"line {lineno}: key {key!r} does not belong in [{section}]")
        raw[key] = value
    return raw


def parse_flags(argv):
    """Turn ``--key=value`` items into a dict; anything else is an error."""
    raw = {}
    for item in argv:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"expected --key=value, got {item!r}")
        key, value = item[2:].split("=", 1)
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        raw[key] = value
    return raw


def _number(raw, key, default=None, period=None):
    if key not in raw or raw[key] == "":
        return default
    text = str(raw[key]).strip()
    scale = 1.0
    if text.endswith("T"):
        if period is None or key not in PERIOD_KEYS:
            raise ConfigError(f"{key}: the T suffix is only valid for oscillator times")
        text = text[:-1] or "1"
        scale = period
    try:
        value = float(text) * scale
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw[key]!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return value


def _integer(raw, key, default):
    v = _number(raw, key, None)
    if v is None:
        return default
    if v != int(v):
        raise ConfigError(f"{key}: must be an integer")
    return int(v)


def _choice(raw, key, options, default=None):
    v = raw.get(key, default)
    if v is None:
        raise ConfigError(f"missing required key {key!r}")
    if v not in options:
        raise ConfigError(f"{key}: expected one of {options}, got {v!r}")
    return v


def _window(raw, t_final):
    if "window" not in raw or raw["window"] == "":
        return (0.75 * t_final, t_final)
    try:
        lo, hi = (float(s) for s in raw["window"].split(","))
    except ValueError:
        raise ConfigError("window: expected start,end") from None
    if not 0 <= lo < hi <= t_final:
        raise ConfigError(f"window ({lo}, {hi}) must lie inside [0, t_final={t_final}]")
    return (lo, hi)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment with every default resolved.

    ``raw`` keeps the key/value pairs the configuration was built from so a
    sweep can rebuild it with one value changed.
    """

    system: str
    feedback: str
    model: dict
    controller: dict
    ensemble: dict
    output: dict
    raw: dict = field(default_factory=dict, repr=False)

    def effective(self):
        """Plain dict echo of the resolved configuration."""
        d = asdict(self)
        d.pop("raw")
        return d


def _twoqubit_section(raw):
    if "h" in raw and ("h1" in raw or "h2" in raw):
        raise ConfigError("give either h or h1/h2, not both")
    h = _number(raw, "h", 0.1)
    model = dict(h1=_number(raw, "h1", h), h2=_number(raw, "h2", h),
                 k=_number(raw, "k", 1.0), eta=_number(raw, "eta", 0.4))
    for key in ("actuation", "m", "omega", "gamma", "n_bath", "x0", "p0", "Xg", "Pg",
                "epsilon", "compensation", "alpha_p1", "alpha_p2", "alpha_i1", "alpha_i2"):
        if key in raw:
            raise ConfigError(f"{key!r} does not apply to the two-qubit system")
    fb = raw["feedback"]
    gains = [raw.get(k) not in (None, "") for k in ("alpha_p", "alpha_i")]
    mixing = [raw.get(k) not in (None, "") for k in ("theta", "f_pi")]
    if any(gains) and any(mixing):
        raise ConfigError("give either alpha_p/alpha_i or theta/f_pi, not both")
    if any(mixing):
        if not all(mixing):
            raise ConfigError("theta and f_pi must be given together")
        theta, f_pi = _number(raw, "theta"), _number(raw, "f_pi")
        try:
            ap, ai = from_mixing(theta, f_pi)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if fb != "PI":
            raise ConfigError("theta/f_pi mixing requires feedback = PI")
    else:
        theta = f_pi = None
        ap, ai = _number(raw, "alpha_p", 0.0), _number(raw, "alpha_i", 0.0)
        need = {"P": (True, False), "I": (False, True), "PI": (True, True)}[fb]
        for name, needed, given in zip(("alpha_p", "alpha_i"), need, gains):
            if needed and not given:
                raise ConfigError(f"feedback {fb} needs {name} (or theta and f_pi)")
        if fb == "P" and ai:
            raise ConfigError("feedback P takes no alpha_i")
        if fb == "I" and ap:
            raise ConfigError("feedback I takes no alpha_p")
    if ap < 0 or ai < 0:
        raise ConfigError("gains must be non-negative")
    dt = _number(raw, "dt", 0.01)
    if dt <= 0:
        raise ConfigError("dt must be positive")
    tau_p = _number(raw, "tau_p", 0.0)
    tau_i = _number(raw, "tau_i", 3.0)
    if tau_p < 0 or tau_i <= 0:
        raise ConfigError("tau_p must be >= 0 and tau_i > 0")
    ctrl = dict(alpha_p=ap, alpha_i=ai, theta=theta, f_pi=f_pi, tau_p=tau_p, tau_i=tau_i,
                tau_p_effective=grid_steps(tau_p, dt, "tau_p") * dt,
                tau_i_effective=max(grid_steps(tau_i, dt, "tau_i"), 1) * dt)
    return model, ctrl, dt, 400.0, 2000, max(int(round(1.0 / dt)), 1), None


def _oscillator_section(raw):
    omega = _number(raw, "omega", 1.0)
    if omega <= 0:
        raise ConfigError("omega must be positive")
    T = 2 * math.pi / omega
    actuation = _choice(raw, "actuation", ("xp", "x_only"), "xp")
    model = dict(m=_number(raw, "m", 1.0), omega=omega, gamma=_number(raw, "gamma", 0.02),
                 n_bath=_number(raw, "n_bath", 1.0), k=_number(raw, "k", 0.02),
                 eta=_number(raw, "eta", 0.4), actuation=actuation, period=T,
                 x0=_number(raw, "x0", 10.0), p0=_number(raw, "p0", 10.0),
                 Xg=_number(raw, "Xg", 6.0), Pg=_number(raw, "Pg", 4.0))
    for key in ("h", "h1", "h2"):
        if key in raw:
            raise ConfigError(f"{key!r} does not apply to the oscillator")
    fb = raw["feedback"]
    if actuation == "x_only":
        for key in ("alpha_p2", "alpha_i2"):
            if key in raw:
                raise ConfigError(f"{key} acts on the position and is unavailable with "
                                  "x_only actuation")
    for key in ("alpha_p", "alpha_i", "f_pi", "alpha_p1", "alpha_p2", "alpha_i1", "alpha_i2"):
        if key in raw:
            raise ConfigError(f"{key}: oscillator gains follow the second-moment schedule; "
                              "choose the strategy with feedback and theta")
    theta = _number(raw, "theta", None)
    if fb == "PI":
        if theta is None:
            raise ConfigError("oscillator PI feedback needs theta")
        if not 0 <= theta <= 1:
            raise ConfigError("theta must lie in [0, 1]")
    elif theta is not None:
        raise ConfigError("theta applies to PI feedback only")
    dt = _number(raw, "dt", T / (250 if actuation == "xp" else 500), T)
    if dt <= 0:
        raise ConfigError("dt must be positive")
    epsilon = _number(raw, "epsilon", 0.0, T)
    if epsilon and not (actuation == "x_only" and fb in ("P", "PI")):
        raise ConfigError("epsilon offsets the quarter-period delay of x_only P/PI feedback")
    base_delay = T / 4 if actuation == "x_only" else 0.0
    tau_p = _number(raw, "tau_p", base_delay + epsilon, T)
    if "tau_p" in raw and epsilon:
        raise ConfigError("give either tau_p or epsilon, not both")
    if actuation == "x_only" and fb != "I" and grid_steps(tau_p, dt, "tau_p") == 0:
        raise ConfigError("x_only proportional feedback needs a positive delay")
    tau_i = _number(raw, "tau_i", 0.15 * T if actuation == "xp" else T / 2, T)
    if tau_p < 0 or tau_i <= 0:
        raise ConfigError("tau_p must be >= 0 and tau_i > 0")
    comp = raw.get("compensation", "auto")
    if comp not in ("auto", "off"):
        c = _number(raw, "compensation")
        if not 0 < c <= 1:
            raise ConfigError("compensation value must lie in (0, 1]")
    ctrl = dict(strategy=f"{actuation.split('_')[0]}_{fb}", theta=theta, tau_p=tau_p,
                tau_i=tau_i, epsilon=epsilon, compensation=comp,
                tau_p_effective=grid_steps(tau_p, dt, "tau_p") * dt,
                tau_i_effective=max(grid_steps(tau_i, dt, "tau_i"), 1) * dt)
    return model, ctrl, dt, 400.0, 1000, max(int(round(T / 50 / dt)), 1), T


def build_config(raw):
    """Validate a flat key/value dict and resolve all defaults."""
    raw = {k: str(v) for k, v in raw.items()}
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    system = _choice(raw, "system", ("twoqubit", "oscillator"))
    feedback = _choice(raw, "feedback", ("P", "I", "PI"))
    section = _twoqubit_section if system == "twoqubit" else _oscillator_section
    model, ctrl, dt, t_final, n_traj, stride, period = section(raw)
    t_final = _number(raw, "t_final", t_final, period)
    if t_final <= 0 or t_final < dt:
        raise ConfigError("t_final must be at least one step")
    ens = dict(n_traj=_integer(raw, "n_traj", n_traj), base_seed=_integer(raw, "base_seed", 0),
               dt=dt, t_final=t_final, output_stride=_integer(raw, "output_stride", stride),
               batch_size=_integer(raw, "batch_size", 250), workers=_integer(raw, "workers", 1),
               window=_window(raw, t_final),
               positivity_abort=_number(raw, "positivity_abort", -0.5))
    if ens["n_traj"] < 1 or ens["output_stride"] < 1 or ens["batch_size"] < 1:
        raise ConfigError("n_traj, output_stride and batch_size must be positive")
    if ens["workers"] < 1:
        raise ConfigError("workers must be positive")
    sweep = raw.get("sweep", "")
    values = raw.get("sweep_values", "")
    if sweep and sweep not in SWEEP_AXES:
        raise ConfigError(f"sweep: expected one of {SWEEP_AXES}")
    if sweep and not values:
        raise ConfigError("sweep needs sweep_values")
    output = dict(csv=raw.get("csv", "timeseries.csv"), summary=raw.get("summary", "summary.json"),
                  sweep=sweep, sweep_values=values)
    return ExperimentConfig(system, feedback, model, ctrl, ens, output, raw)


def parse_config(path=None, flags=None, overrides=None):
    """Read a configuration file and/or ``--key=value`` flags.

    Parameters
    ----------
    path : str, optional
        Configuration file.
    flags : sequence of str, optional
        Command-line ``--key=value`` items, applied after the file.
    overrides : dict, optional
        Extra key/value pairs applied last.
    """
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except FileNotFoundError:
            raise ConfigError(f"configuration file not found: {path}") from None
        raw.update(read_config_text(text))
    if flags:
        raw.update(parse_flags(flags))
    if overrides:
        raw.update({k: str(v) for k, v in overrides.items()})
    return build_config(raw)


# -- execution -------------------------------------------------------------------

def _ensemble(cfg):
    e = cfg.ensemble
    return EnsembleConfig(e["n_traj"], e["base_seed"], e["dt"], e["t_final"], e["output_stride"],
                          e["batch_size"], e["workers"], tuple(e["window"]))


def _twoqubit_objects(cfg):
    m, c = cfg.model, cfg.controller
    model = TwoQubitModel(m["h1"], m["h2"], m["k"], m["eta"])
    ctrl = PIController(alpha_p=c["alpha_p"], alpha_i=c["alpha_i"], tau_p=c["tau_p"],
                        tau_i=c["tau_i"], theta=c["theta"], f_pi=c["f_pi"])
    return model, ctrl


def _oscillator_objects(cfg):
    m, c, e = cfg.model, cfg.controller, cfg.ensemble
    model = osc.OscillatorModel(m["m"], m["omega"], m["gamma"], m["n_bath"], m["k"], m["eta"])
    table = osc.second_moments_evolve(model, dt=e["dt"], t_final=e["t_final"] + e["dt"])
    alpha = 1.0
    if c["compensation"] == "auto":
        if m["actuation"] == "x_only":
            alpha = osc.compensation_factor(model, table)
    elif c["compensation"] != "off":
        alpha = float(c["compensation"])
    goal = osc.ControlGoal(m["Xg"], m["Pg"], alpha)
    theta = c["theta"] if c["theta"] is not None else 0.5
    run = osc.OscillatorRun(model, goal, c["strategy"], e["dt"], e["t_final"], c["tau_p"],
                            c["tau_i"], theta, m["x0"], m["p0"])
    return model, run, table, alpha


def _summary_common(cfg, stats):
    s = steady_window_summary(stats)
    drift = {k: window_slope(stats, k) for k in s}
    for k, v in drift.items():
        if abs(v) >= 1e-3:
            logger.warning("mean of %s still drifts by %.2e per unit time in the steady window",
                           k, v)
    return {
        "steady_drift": drift,
        "effective_config": cfg.effective(),
        "steady_window": list(stats.window),
        "steady_means": {k: v[0] for k, v in s.items()},
        "steady_se": {k: stats.steady_mean_se(k) for k in s},
        "steady_max_std": {k: v[1] for k, v in s.items()},
    }


def simulate(cfg):
    """Run the ensemble described by ``cfg``; return ``(stats, summary)``."""
    ens = _ensemble(cfg)
    if cfg.system == "twoqubit":
        model, ctrl = _twoqubit_objects(cfg)
        block = TwoQubitBlock(model, ctrl, ens.dt, ens.t_final, ens.output_stride,
                              positivity_abort=cfg.ensemble["positivity_abort"])
        stats = run_ensemble(block, ens)
        summary = _summary_common(cfg, stats)
        summary["min_eigenvalue"] = float(np.min(stats.minimum["min_eig"]))
        if cfg.feedback == "P" and ctrl.delay_steps(ens.dt) == 0:
            summary["analytic_T0"] = analytic_T0_steady(model, ctrl.alpha_p)
            summary["exact_T0"] = exact_T0_steady(model, ctrl.alpha_p)
        return stats, summary
    model, run, table, alpha = _oscillator_objects(cfg)
    block = osc.OscillatorBlock(run, ens.output_stride, table=table)
    stats = run_ensemble(block, ens)
    for name in ("X", "P"):
        if not np.all(np.isfinite(stats.mean[name])):
            raise osc.DivergenceError("non-finite quadratures in the ensemble")
    summary = _summary_common(cfg, stats)
    summary["steady_max_std"]["max"] = max(summary["steady_max_std"]["X"],
                                           summary["steady_max_std"]["P"])
    summary["steady_bias"] = {"X": summary["steady_means"]["dX"],
                              "P": summary["steady_means"]["dP"]}
    err2 = summary["steady_means"]["err2"]
    summary["delta_metric"] = math.sqrt(err2)
    # delta method: se(sqrt(m)) = se(m) / (2 sqrt(m))
    summary["delta_metric_se"] = summary["steady_se"]["err2"] / (2 * math.sqrt(err2)) if err2 else 0.0
    summary["period"] = model.period
    summary["second_moments_steady"] = [float(v) for v in table.steady]
    if run.actuation == "x":
        summary["compensation_alpha"] = alpha
    return stats, summary


def _fmt(x):
    return f"{x:.9g}"


def write_timeseries(cfg, stats, path):
    if cfg.system == "twoqubit":
        cols = (stats.times, stats.mean["T_-1"], stats.mean["T_0"], stats.mean["T_1"],
                stats.mean["concurrence"], stats.std["concurrence"])
        header = TWOQUBIT_CSV
    else:
        cols = (stats.times, stats.mean["X"], stats.mean["P"], stats.std["X"], stats.std["P"],
                stats.first["X"], stats.first["P"])
        header = OSCILLATOR_CSV
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_json_ready(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def check_output_paths(cfg):
    """Fail before simulating when an output directory does not exist."""
    for key in ("csv", "summary"):
        path = cfg.output[key]
        if path:
            folder = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(folder):
                raise FileNotFoundError(f"output directory does not exist: {folder}")


def run_experiment(cfg):
    """Simulate, then write the time-series CSV and summary JSON; return the summary."""
    check_output_paths(cfg)
    stats, summary = simulate(cfg)
    if cfg.output["csv"]:
        write_timeseries(cfg, stats, cfg.output["csv"])
    if cfg.output["summary"]:
        write_json(summary, cfg.output["summary"])
    return summary


def _check_axis(cfg, axis):
    fb, c = cfg.feedback, cfg.controller
    if axis == "theta" and fb != "PI":
        raise ConfigError("a theta sweep needs feedback = PI")
    if axis == "theta" and cfg.system == "twoqubit" and c["f_pi"] is None:
        raise ConfigError("a two-qubit theta sweep needs f_pi")
    if axis == "tau_i" and fb == "P":
        raise ConfigError("a tau_i sweep needs an integral branch")
    if axis == "tau_p" and fb == "I":
        raise ConfigError("a tau_p sweep needs a proportional branch")
    if axis == "epsilon" and not (cfg.system == "oscillator"
                                  and cfg.model["actuation"] == "x_only" and fb != "I"):
        raise ConfigError("an epsilon sweep needs x_only oscillator P or PI feedback")


def run_sweep(cfg, axis, values):
    """Steady summaries along one parameter axis.

    Returns a dict with one row per value.  Two-qubit theta sweeps report the
    concurrence-maximising ``theta_opt``; oscillator theta sweeps report the
    ``theta_opt`` minimising the control error.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    _check_axis(cfg, axis)
    rows = []
    for v in values:
        raw = dict(cfg.raw)
        raw.pop("sweep", None)
        raw.pop("sweep_values", None)
        if axis == "epsilon":
            raw.pop("tau_p", None)
        raw[axis] = str(v)
        sub = build_config(raw)
        _, summary = simulate(sub)
        row = {"value": v, "steady_means": summary["steady_means"],
               "steady_se": summary["steady_se"], "steady_max_std": summary["steady_max_std"]}
        for key in ("delta_metric", "delta_metric_se", "compensation_alpha", "steady_bias"):
            if key in summary:
                row[key] = summary[key]
        rows.append(row)
        logger.info("%s=%s done", axis, v)
    result = {"effective_config": cfg.effective(), "steady_window": list(cfg.ensemble["window"]),
              "sweep": axis, "rows": rows}
    if axis == "theta":
        if cfg.system == "twoqubit":
            score = [r["steady_means"]["concurrence"] for r in rows]
            best = int(np.argmax(score))
        else:
            score = [r["delta_metric"] for r in rows]
            best = int(np.argmin(score))
        result["theta_opt"] = rows[best]["value"]
        result["theta_opt_interior"] = 0 < best < len(rows) - 1
    return result


def write_sweep_csv(result, path):
    rows = result["rows"]
    names = sorted(rows[0]["steady_means"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([result["sweep"]] + [f"mean_{n}" for n in names] + [f"se_{n}" for n in names]
                   + [f"max_std_{n}" for n in names])
        for r in rows:
            w.writerow([_fmt(r["value"])] + [_fmt(r["steady_means"][n]) for n in names]
                       + [_fmt(r["steady_se"][n]) for n in names]
                       + [_fmt(r["steady_max_std"][n]) for n in names])


def _sweep_values(text):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"sweep_values: expected comma-separated numbers, got {text!r}") from None


def _fail(code, exc):
    kind = {EXIT_CONFIG: "config_error", EXIT_NUMERICAL: "numerical_failure",
            EXIT_IO: "io_error"}[code]
    json.dump({"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code},
              sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qpi", description="Simulate measured quantum systems under P, I and PI feedback.",
        epilog=HELP_UNITS, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("config", nargs="?", help="key = value configuration file")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, rest)
        if cfg.output["sweep"]:
            check_output_paths(cfg)
            values = _sweep_values(cfg.output["sweep_values"])
            result = run_sweep(cfg, cfg.output["sweep"], values)
            if cfg.output["csv"]:
                write_sweep_csv(result, cfg.output["csv"])
            if cfg.output["summary"]:
                write_json(result, cfg.output["summary"])
        else:
            run_experiment(cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except (q.TraceCollapseError, q.PositivityError, osc.DivergenceError, EnsembleError,
            FloatingPointError) as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
