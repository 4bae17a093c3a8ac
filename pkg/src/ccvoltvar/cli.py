"""Command-line front end: build-x, design-gains, simulate, analyze and day-run.

Every command reads an optional JSON config (see :class:`RunConfig`),
applies the command-line overrides and writes its outputs to ``--out``.
Exit codes: 0 success, 2 input or validation error, 3 numerical failure,
4 infeasible design.
"""

import argparse
import dataclasses
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import datasets
from .chanceopt import ConvergenceWarning, DesignSpec
from .exceptions import CCVoltVarError, DomainError, InputError, SchemaError
from .netmodel import GridConfig, load_ders, load_network
from .pipeline import design_schedule
from .scenarios import UncertaintyModel, forecast_from_profiles, load_forecast
from .sensitivity import (
    SensitivityModel,
    build_x_lindistflow,
    check_positive_definite,
    load_x_matrix,
    reduce_to_der_nodes,
    save_x_matrix,
)
from .simkit import (
    STRATEGIES,
    GainsSchedule,
    Profiles,
    ProtectionSettings,
    bars_svg,
    cdf_svg,
    compute_metrics,
    empirical_cdf,
    load_profiles,
    load_trace_table,
    run_lengths,
    run_simulation,
    write_cdf_table,
    write_trace,
)

__all__ = ["RunConfig", "load_run_config", "main"]

logger = logging.getLogger("ccvoltvar")

_PATH_FIELDS = ("network", "ders", "forecast", "profiles", "x_file", "gains")


@dataclass
class RunConfig:
    """All settings of a run; every field has a default.

    With ``network`` unset the shipped ``feeder`` (``feeder8`` or
    ``feeder42``) is used together with its shipped forecast.
    """

    network: str = None
    ders: str = None
    feeder: str = "feeder8"
    base_power_kva: float = 100.0
    base_voltage_kv: float = 0.4
    slack_voltage_pu: float = 1.0
    forecast: str = None
    profiles: str = None
    x_file: str = None
    gains: str = None
    epsilon: float = 0.05
    epsilon_q: float = None
    xi: float = 1e-4
    d: float = 1.0
    tol: float = 1e-6
    max_iter: int = 200
    step_rule: str = "diminishing"
    gamma: float = 1.0
    decay: float = 0.6
    stability: str = "eigen"
    majorizer: str = "anchor"
    n_samples: int = 100
    seed: int = 0
    uncertainty: str = "gaussian"
    sigma_pv: float = 0.10
    sigma_load: float = 0.05
    truncation: float = 3.0
    common_mode: bool = False
    tau: float = 0.1
    delta_tau: float = 1800.0
    horizon_s: float = 3600.0
    duration_s: float = None
    v_min: float = 0.95
    v_max: float = 1.05
    strategies: list = field(default_factory=lambda: ["ogd", "voltvar", "onoff"])
    protection: bool = True
    day_epsilons: list = field(default_factory=lambda: [0.05, 0.2])
    day_seed: int = 7
    trace_every: int = 10
    out: str = "out"
    svg: bool = False

    def validate(self):
        for name in _PATH_FIELDS:
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise InputError(f"{name}: file not found: {value}")
        if (self.network is None) != (self.ders is None):
            raise InputError("network and ders must be given together")
        if self.network is None and self.feeder not in ("feeder8", "feeder42"):
            raise InputError(f"unknown shipped feeder {self.feeder!r}")
        if not 0 < self.v_min < self.v_max:
            raise InputError("need 0 < v_min < v_max")
        for e in [self.epsilon, self.epsilon_q, *self.day_epsilons]:
            if e is not None and not 0 < e <= 1:
                raise InputError(f"violation probabilities must lie in (0, 1], got {e}")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad:
            raise InputError(f"unknown strategies {bad}; expected a subset of {list(STRATEGIES)}")
        if self.tau <= 0 or self.n_samples < 1 or self.trace_every < 1:
            raise InputError("tau, n_samples and trace_every must be positive")
        return self

    def design_spec(self, epsilon=None, fleet=None):
        eps = self.epsilon if epsilon is None else epsilon
        q_min = q_max = None
        if self.epsilon_q is not None:
            q_min, q_max = fleet.q_min, fleet.q_max
        return DesignSpec(
            v_min=self.v_min, v_max=self.v_max, q_min=q_min, q_max=q_max,
            epsilons=(self.epsilon_q, self.epsilon_q, eps, eps), xi=self.xi, d=self.d,
            tol=self.tol, max_iter=self.max_iter, step_rule=self.step_rule, gamma=self.gamma,
            decay=self.decay, stability=self.stability, majorizer=self.majorizer,
        )

    def uncertainty_model(self):
        return UncertaintyModel(self.uncertainty, self.sigma_pv, self.sigma_load, self.truncation,
                                self.common_mode, self.seed)


def load_run_config(path=None, **overrides):
    """Config from a JSON file (or defaults) with non-``None`` overrides applied."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise SchemaError(f"{path}: config must be a JSON object")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SchemaError(f"{path}: unknown config keys {unknown}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise SchemaError(str(exc)) from None
    return cfg.validate()


# ---------------------------------------------------------------- loading

def _grid(cfg):
    return GridConfig(cfg.base_power_kva, cfg.base_voltage_kv, cfg.slack_voltage_pu)


def _network(cfg):
    if cfg.network is None:
        return datasets.load_shipped(cfg.feeder)
    net = load_network(cfg.network, _grid(cfg))
    return net, load_ders(cfg.ders, net)


def _forecast(cfg, net):
    if cfg.forecast is not None:
        fc = load_forecast(cfg.forecast, cfg.delta_tau, net.n_nodes)
    elif cfg.network is None:
        fc = datasets.load_shipped_forecast(cfg.feeder)
    elif cfg.profiles is not None:
        prof = load_profiles(cfg.profiles, net.n_nodes)
        fc = forecast_from_profiles(prof.p_av, prof.p_l, prof.q_l, prof.dt, cfg.delta_tau, prof.start_s)
    else:
        raise InputError("a forecast (or profiles) file is needed for a custom network")
    if fc.n_nodes != net.n_nodes:
        raise InputError(f"forecast has {fc.n_nodes} nodes, network has {net.n_nodes}")
    return fc


def _sensitivity(cfg, net, fleet):
    if cfg.x_file is None:
        return reduce_to_der_nodes(build_x_lindistflow(net), fleet)
    model = load_x_matrix(cfg.x_file)
    if model.size == net.n_nodes:
        model = SensitivityModel(model.X, nodes=np.arange(1, net.n_nodes + 1))
        return reduce_to_der_nodes(model, fleet)
    if model.size == len(fleet):
        return SensitivityModel(model.X, nodes=fleet.nodes)
    raise InputError(f"X file has size {model.size}; expected {net.n_nodes} nodes or {len(fleet)} DERs")


def _profiles(cfg, net, forecast=None):
    if cfg.profiles is not None:
        prof = load_profiles(cfg.profiles, net.n_nodes)
        if prof.n_nodes != net.n_nodes:
            raise InputError(f"profiles have {prof.n_nodes} nodes, network has {net.n_nodes}")
        return prof
    forecast = forecast or _forecast(cfg, net)
    p_av, p_l, q_l = datasets.sample_day(forecast, cfg.uncertainty_model(), seed=cfg.day_seed)
    return Profiles(p_av, p_l, q_l, 1.0)


def _out(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands

def cmd_build_x(cfg):
    """Write the sensitivity matrix, its eigenvalues and a positive-definiteness verdict."""
    out = _out(cfg)
    if cfg.x_file is not None:
        model = load_x_matrix(cfg.x_file)
        source = str(cfg.x_file)
    else:
        net, _ = _network(cfg)
        model = build_x_lindistflow(net)
        source = "lindistflow"
    check_positive_definite(model.X)
    save_x_matrix(model, out / "X.csv")
    lam = np.sort(np.real(model.eigvals))
    with open(out / "eigenvalues.csv", "w") as fh:
        fh.write("k,lambda\n")
        for k, v in enumerate(lam, start=1):
            fh.write(f"{k},{v!r}\n")
    report = {
        "source": source,
        "size": model.size,
        "symmetric": model.symmetric,
        "positive_definite": True,
        "lambda_min": float(lam[0]),
        "lambda_max": float(lam[-1]),
        "norm2": model.norm2,
    }
    _dump(out / "x_report.json", report)
    return report


def _design(cfg, epsilon=None, net=None, fleet=None, forecast=None):
    if net is None:
        net, fleet = _network(cfg)
    forecast = forecast or _forecast(cfg, net)
    model = _sensitivity(cfg, net, fleet)
    if not model.symmetric and cfg.stability == "eigen":
        raise DomainError('X is not symmetric; set "stability": "norm"')
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        schedule, reports = design_schedule(
            net, fleet, forecast, cfg.uncertainty_model(), cfg.design_spec(epsilon, fleet),
            cfg.horizon_s, cfg.n_samples, model=model, tau=cfg.tau,
        )
    for w in caught:
        logger.warning("%s", w.message)
    return schedule, reports


def cmd_design_gains(cfg, epsilon=None, tag=""):
    """One gains block per horizon; writes ``gains{tag}.json`` and the design report."""
    out = _out(cfg)
    schedule, reports = _design(cfg, epsilon)
    _dump(out / f"gains{tag}.json", schedule.to_list())
    _dump(out / f"design_report{tag}.json", reports)
    return schedule, reports


def _read_gains(path):
    try:
        rows = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read gains {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(rows, list):
        raise SchemaError(f"{path}: gains schedule must be a JSON list")
    return GainsSchedule.from_list(rows)


def _simulate_all(cfg, runs, net, fleet, profiles, out):
    """``runs`` maps labels to ``(strategy, schedule)``; failures are isolated per run."""
    summaries, failures, cdfs = {}, {}, {}
    settings = ProtectionSettings()
    for label, (strategy, schedule) in runs.items():
        try:
            trace = run_simulation(net, fleet, profiles, strategy, schedule, tau=cfg.tau,
                                   duration_s=cfg.duration_s, protection=cfg.protection,
                                   protection_settings=settings)
        except CCVoltVarError as exc:
            logger.error("%s failed: %s", label, exc)
            failures[label] = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
            continue
        rep = compute_metrics(trace, cfg.v_min, cfg.v_max)
        summaries[label] = rep.summary()
        cdfs[label] = rep.cdf_tables()
        write_trace(trace, out / f"trace_{label}.csv", every=cfg.trace_every)
    for name in ("v_max", "v_min", "gamma_v_s"):
        if cdfs:
            write_cdf_table(out / f"cdf_{name}.csv", {k: c[name] for k, c in cdfs.items()})
    _dump(out / "metrics.json", {"runs": summaries, "failures": failures})
    _write_comparison(out / "comparison.csv", summaries)
    if cfg.svg and cdfs:
        _write_svgs(out, cdfs, summaries)
    return summaries, failures


_COMPARISON = ["violation_fraction", "gamma_v_p95_s", "v_max", "v_min", "reactive_kvarh",
               "line_loss_kwh", "curtailment_kwh", "lost_energy_kwh"]


def _write_comparison(path, summaries):
    with open(path, "w") as fh:
        fh.write("run," + ",".join(_COMPARISON) + "\n")
        for label, s in summaries.items():
            fh.write(label + "," + ",".join(f"{s[k]:.10g}" if s[k] is not None else "" for k in _COMPARISON) + "\n")


def _write_svgs(out, cdfs, summaries):
    for name, title in (("v_max", "maximum voltage"), ("v_min", "minimum voltage"),
                        ("gamma_v_s", "violation duration")):
        (out / f"cdf_{name}.svg").write_text(cdf_svg({k: c[name] for k, c in cdfs.items()}, title, name))
    if summaries and "reactive_kvarh" in next(iter(summaries.values())):
        bars = {k: {"reactive kvarh": s["reactive_kvarh"], "lost kWh": s["lost_energy_kwh"]}
                for k, s in summaries.items()}
        (out / "energy.svg").write_text(bars_svg(bars))


def cmd_simulate(cfg, schedule=None):
    """Simulate every configured strategy; OGD needs ``gains`` in the config or ``schedule``."""
    net, fleet = _network(cfg)
    if "ogd" in cfg.strategies and schedule is None:
        if cfg.gains is None:
            raise InputError('the ogd strategy needs a gains schedule ("gains" in the config)')
        schedule = _read_gains(cfg.gains)
    profiles = _profiles(cfg, net)
    out = _out(cfg)
    runs = {s: (s, schedule if s == "ogd" else None) for s in cfg.strategies}
    return _simulate_all(cfg, runs, net, fleet, profiles, out)


def cmd_day_run(cfg):
    """Design one schedule per ``day_epsilons`` value, then simulate them with the baselines."""
    out = _out(cfg)
    net, fleet = _network(cfg)
    forecast = _forecast(cfg, net)
    runs = {}
    for eps in cfg.day_epsilons:
        tag = f"_eps{eps:g}"
        schedule, reports = _design(cfg, eps, net, fleet, forecast)
        _dump(out / f"gains{tag}.json", schedule.to_list())
        _dump(out / f"design_report{tag}.json", reports)
        if "ogd" in cfg.strategies:
            runs[f"ogd{tag}"] = ("ogd", schedule)
    runs.update({s: (s, None) for s in cfg.strategies if s != "ogd"})
    profiles = _profiles(cfg, net, forecast)
    return _simulate_all(cfg, runs, net, fleet, profiles, out)


def analyze_traces(paths, v_min=0.95, v_max=1.05):
    """CDFs of the per-step voltage extremes and violation durations of each trace.

    Durations are in seconds, using the row spacing of each (possibly
    decimated) trace.
    """
    if not paths:
        raise InputError("analyze needs at least one trace")
    cdfs = {}
    for path in paths:
        t, v = load_trace_table(path)
        dt = float(np.median(np.diff(t))) if t.size > 1 else 1.0
        bad = (v.max(axis=1) > v_max) | (v.min(axis=1) < v_min)
        gamma = run_lengths(bad) * dt
        label = Path(path).stem.removeprefix("trace_")
        cdfs[label] = {
            "v_max": empirical_cdf(v.max(axis=1)),
            "v_min": empirical_cdf(v.min(axis=1)),
            "gamma_v_s": empirical_cdf(gamma) if gamma.size else (np.zeros(1), np.ones(1)),
        }
    return cdfs


def cmd_analyze(cfg, paths):
    out = _out(cfg)
    cdfs = analyze_traces(paths, cfg.v_min, cfg.v_max)
    for name in ("v_max", "v_min", "gamma_v_s"):
        write_cdf_table(out / f"analysis_cdf_{name}.csv", {k: c[name] for k, c in cdfs.items()})
    summaries = {}
    metrics = Path(paths[0]).parent / "metrics.json"
    if metrics.exists():
        runs = json.loads(metrics.read_text()).get("runs", {})
        summaries = {k: runs[k] for k in cdfs if k in runs}
        with open(out / "analysis_energy.csv", "w") as fh:
            fh.write("run,reactive_kvarh,line_loss_kwh,curtailment_kwh,lost_energy_kwh\n")
            for k, s in summaries.items():
                fh.write(f"{k},{s['reactive_kvarh']:.10g},{s['line_loss_kwh']:.10g},"
                         f"{s['curtailment_kwh']:.10g},{s['lost_energy_kwh']:.10g}\n")
    if cfg.svg:
        _write_svgs(out, cdfs, summaries)
    return cdfs


def cmd_make_example(cfg):
    """Write the shipped feeder, its forecast and a sampled 1 s day as editable CSV files."""
    from .netmodel import write_ders, write_network
    from .scenarios import write_forecast
    from .simkit import write_profiles

    out = _out(cfg)
    net, fleet = _network(cfg)
    forecast = _forecast(cfg, net)
    write_network(net, out / "lines.csv")
    write_ders(fleet, out / "ders.csv", net.base_power_kva)
    write_forecast(forecast, out / "forecast.csv")
    write_profiles(_profiles(cfg, net, forecast), out / "profiles.csv")
    defaults = dataclasses.asdict(RunConfig())
    defaults.update(network=str(out / "lines.csv"), ders=str(out / "ders.csv"),
                    forecast=str(out / "forecast.csv"), profiles=str(out / "profiles.csv"))
    _dump(out / "config.json", defaults)


# ---------------------------------------------------------------- entry point

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--seed", type=int, help="scenario seed")
    common.add_argument("--strategies", help="comma-separated subset of ogd,voltvar,onoff")
    common.add_argument("--epsilon", type=float, help="voltage violation probability")
    common.add_argument("--out", help="output directory")
    common.add_argument("--x-file", dest="x_file", help="sensitivity matrix CSV overriding construction")
    common.add_argument("--svg", action="store_true", default=None, help="also write SVG plots")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ccvoltvar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("build-x", parents=[common], help="sensitivity matrix and eigenvalues")
    sub.add_parser("design-gains", parents=[common], help="chance-constrained gain schedule")
    sub.add_parser("simulate", parents=[common], help="closed-loop simulation of each strategy")
    a = sub.add_parser("analyze", parents=[common], help="CDFs and energy tables from traces")
    a.add_argument("traces", nargs="+")
    sub.add_parser("day-run", parents=[common], help="design for each epsilon, then simulate")
    sub.add_parser("make-example", parents=[common], help="write the shipped feeder as CSV files")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        strategies = args.strategies.split(",") if args.strategies else None
        cfg = load_run_config(args.config, seed=args.seed, strategies=strategies, epsilon=args.epsilon,
                              out=args.out, x_file=args.x_file, svg=args.svg)
        if args.command == "build-x":
            rep = cmd_build_x(cfg)
            print(f"X {rep['size']}x{rep['size']} positive definite, "
                  f"lambda in [{rep['lambda_min']:.6g}, {rep['lambda_max']:.6g}]")
        elif args.command == "design-gains":
            schedule, _ = cmd_design_gains(cfg)
            for row in schedule.to_list():
                print(f"{row['start_s']:>8g}  eta={row['eta']:.6f}  alpha={row['alpha']:.6f}")
        elif args.command in ("simulate", "day-run"):
            summaries, failures = cmd_simulate(cfg) if args.command == "simulate" else cmd_day_run(cfg)
            for label, s in summaries.items():
                print(f"{label:>14}  viol={s['violation_fraction']:.4f}  "
                      f"reactive={s['reactive_kvarh']:.2f} kvarh  lost={s['lost_energy_kwh']:.2f} kWh")
            for label, f in failures.items():
                print(f"{label:>14}  FAILED {f['error']}: {f['message']}", file=sys.stderr)
            if failures:
                return max(f["exit_code"] for f in failures.values())
        elif args.command == "analyze":
            cmd_analyze(cfg, args.traces)
        elif args.command == "make-example":
            cmd_make_example(cfg)
    except CCVoltVarError as exc:
        print(f"ccvoltvar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
