"""Experiment runner for the landing study.

Reproduces the full study design from a flat INI configuration: a
deterministic run, single robust runs, a sensitivity sweep over the
terminal-std constraint levels (seven sub-runs), and Monte Carlo validation
of exported controls.  Every run writes its artifacts under one output
directory: archive and history CSVs, representative-extreme control and
trajectory exports, ensemble JSON dumps, plot-ready CSVs, and a metadata
dump sufficient to reproduce the run byte-for-byte.

Config keys (INI sections; every key optional, defaults shown by
``robusttraj --dump-default-config``)::

    [run]  mode seed out force sigma1 sigma2 hv_ref_tf hv_ref_xf
           mc_samples mc_seed mc_control
    [ga]   pop_size generations crossover_prob eta_c mutation_prob eta_m
    [pce]  quad_points order
    [sst]  dt t_max dynamics_mode aero_cache

The thread count for compiled kernels can be capped with the
``ROBUSTTRAJ_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import io
import json
import logging
import os
import pathlib
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, aero, ensemble, mc, moea, pce, sst

logger = logging.getLogger(__name__)

MODES = ("deterministic", "robust", "mc", "sensitivity")

#: sensitivity sweep: one deterministic case plus the sigma table rows,
#: varying one sigma across its levels with the other at baseline
SENSITIVITY_CASES = (
    ("deterministic", None),
    ("s1_low", (1.0, 150.0)),
    ("s1_base", (3.0, 150.0)),
    ("s1_high", (5.0, 150.0)),
    ("s2_low", (3.0, 100.0)),
    ("s2_base", (3.0, 150.0)),
    ("s2_high", (3.0, 200.0)),
)


@dataclass
class RunConfig:
    mode: str = "robust"
    seed: int = 1
    out: str = "runs/out"
    force: bool = False
    sigma1: float = 3.0
    sigma2: float = 150.0
    hv_ref_tf: float = 0.0
    hv_ref_xf: float = 0.0
    mc_samples: int = 1000
    mc_seed: int = 20260810
    mc_control: str = ""
    pop_size: int = 30
    generations: int = 600
    crossover_prob: float = 0.9
    eta_c: float = 15.0
    mutation_prob: float = -1.0     # -1 selects 1/n_genes
    eta_m: float = 20.0
    quad_points: int = 6
    order: int = 4
    dt: float = 0.1
    t_max: float = 240.0
    dynamics_mode: str = "verbatim"
    aero_cache: str = ""

    _SECTIONS = {
        "run": ("mode", "seed", "out", "force", "sigma1", "sigma2",
                "hv_ref_tf", "hv_ref_xf", "mc_samples", "mc_seed", "mc_control"),
        "ga": ("pop_size", "generations", "crossover_prob", "eta_c",
               "mutation_prob", "eta_m"),
        "pce": ("quad_points", "order"),
        "sst": ("dt", "t_max", "dynamics_mode", "aero_cache"),
    }

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"run.mode must be one of {MODES}, got {self.mode!r}")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ConfigError("run.sigma1 and run.sigma2 must be positive")
        if self.pop_size < 4 or self.pop_size % 2:
            raise ConfigError("ga.pop_size must be even and >= 4")
        if self.quad_points < 1:
            raise ConfigError("pce.quad_points must be >= 1")
        if self.order < 0 or self.order > 2 * self.quad_points - 1:
            raise ConfigError("pce.order must satisfy 0 <= order <= 2*quad_points-1")
        if self.dt <= 0 or self.t_max < self.dt:
            raise ConfigError("sst.dt must be positive and sst.t_max >= sst.dt")
        if self.dynamics_mode not in ("verbatim", "textbook"):
            raise ConfigError("sst.dynamics_mode must be 'verbatim' or 'textbook'")
        if self.mode == "mc" and not self.mc_control:
            raise ConfigError("run.mc_control (a control CSV) is required in mc mode")

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for section, keys in self._SECTIONS.items():
            parser[section] = {k: str(getattr(self, k)) for k in keys}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        cfg = cls()
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        for section in parser.sections():
            if section not in cls._SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser[section].items():
                if key not in cls._SECTIONS[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                current = getattr(cfg, key)
                try:
                    if isinstance(current, bool):
                        value = raw.strip().lower() in ("1", "true", "yes", "on")
                    elif isinstance(current, int):
                        value = int(raw)
                    elif isinstance(current, float):
                        value = float(raw)
                    else:
                        value = raw
                except ValueError as exc:
                    raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
                setattr(cfg, key, value)
        return cfg


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


def _ensure_out_dir(path: pathlib.Path, force: bool) -> None:
    if path.exists() and any(path.iterdir()):
        if not force:
            raise ConfigError(
                f"output directory {path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)


def _load_dynamics(config: RunConfig, out_dir: pathlib.Path) -> sst.SstDynamics:
    """Build the simulation context, reusing the aero cache when present.

    Models are always constructed from their serialized form (see
    ``aero.canonical_modelset``), so cached and freshly fitted runs produce
    bit-identical trajectories.
    """
    cache_dir = pathlib.Path(config.aero_cache) if config.aero_cache \
        else out_dir / "aero_cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    model_file = cache_dir / "aero_models.json"
    table_file = cache_dir / "aero_table.npz"

    if model_file.exists():
        modelset, text = aero.canonical_modelset(cache_text=model_file.read_text())
    else:
        logger.info("fitting aerodynamic surrogates (cache miss)")
        modelset, text = aero.canonical_modelset()
        model_file.write_text(text)

    if table_file.exists():
        table = aero.table_from_npz(table_file)
        dyn = sst.SstDynamics(modelset, table, modelset.vehicle, dt=config.dt,
                              t_max=config.t_max, mode=config.dynamics_mode)
    else:
        logger.info("tabulating surrogates for the integration hot loop")
        dyn = sst.SstDynamics.build(modelset, dt=config.dt, t_max=config.t_max,
                                    mode=config.dynamics_mode)
        aero.table_to_npz(dyn.table, table_file)
    return dyn


def _write(path: pathlib.Path, text: str) -> None:
    path.write_text(text, newline="")


def _json_dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _archive_csv(result: moea.EvolveResult) -> str:
    """Archive rows: decoded elevator schedule, physical objectives, violation."""
    buf = io.StringIO()
    n = sst.N_GENES
    header = [f"de_{i}" for i in range(n)] + ["t_f", "x_f", "total_violation"]
    buf.write(",".join(header) + "\n")
    rows = []
    for e in result.archive:
        schedule = sst.decode_chromosome(e.genes)
        tf, xf = -e.objectives[0], -e.objectives[1]
        rows.append((schedule, tf, xf, e.payload.total_violation))
    rows.sort(key=lambda r: (r[1], r[2]))
    for schedule, tf, xf, viol in rows:
        fields = [f"{v:.9g}" for v in schedule] + \
            [f"{tf:.9g}", f"{xf:.9g}", f"{viol:.9g}"]
        buf.write(",".join(fields) + "\n")
    return buf.getvalue()


def _scatter_csv(result: moea.EvolveResult) -> str:
    buf = io.StringIO()
    buf.write("t_f,x_f\n")
    pts = sorted((-e.objectives[0], -e.objectives[1]) for e in result.archive)
    for tf, xf in pts:
        buf.write(f"{tf:.9g},{xf:.9g}\n")
    return buf.getvalue()


def _control_csv(schedule: np.ndarray, until: float | None = None) -> str:
    buf = io.StringIO()
    buf.write("t,delta_e_deg\n")
    times = sst.schedule_times()
    for t, de in zip(times, schedule):
        if until is not None and t > until:
            break
        buf.write(f"{t:.9g},{de:.9g}\n")
    return buf.getvalue()


def _trajectories_csv(dyn: sst.SstDynamics, schedule: np.ndarray,
                      scenarios: pce.ScenarioSet) -> str:
    """Long-format curves: nominal, each quadrature member, and the extreme
    tailwind/headwind scenarios."""
    winds = [("nominal", 0.0)]
    winds += [(f"member_{k}", float(v)) for k, v in enumerate(scenarios.values[:, 0])]
    winds += [("tailwind", sst.WIND_BOUNDS[1]), ("headwind", sst.WIND_BOUNDS[0])]
    buf = io.StringIO()
    buf.write("curve,wind,t,x,z,Ma,alpha_deg\n")
    for label, wind in winds:
        member = dyn.simulate_ensemble(schedule, np.array([wind]))[0]
        n = member.n_valid
        ts = np.arange(n) * dyn.dt
        for i in range(n):
            buf.write(f"{label},{wind:.9g},{ts[i]:.9g},"
                      f"{member.series['x'][i]:.9g},{member.series['z'][i]:.9g},"
                      f"{member.series['Ma'][i]:.9g},"
                      f"{member.series['alpha_deg'][i]:.9g}\n")
    return buf.getvalue()


def _representatives(result: moea.EvolveResult) -> dict:
    """Archive extremes: the max-t_f and max-x_f members."""
    reps = {}
    if not result.archive:
        return reps
    objs = np.array([e.objectives for e in result.archive])
    reps["max_tf"] = result.archive[int(np.argmin(objs[:, 0]))]
    reps["max_xf"] = result.archive[int(np.argmin(objs[:, 1]))]
    return reps


def _run_optimization(config: RunConfig, dyn: sst.SstDynamics,
                      problem: ensemble.RobustProblem,
                      out_dir: pathlib.Path) -> dict:
    """One GA run plus its full artifact set; returns the summary row."""
    scenarios = pce.tensor_grid(problem.uncertainty)
    ga = moea.GaConfig(
        pop_size=config.pop_size,
        generations=config.generations,
        crossover_prob=config.crossover_prob,
        eta_c=config.eta_c,
        mutation_prob=None if config.mutation_prob < 0 else config.mutation_prob,
        eta_m=config.eta_m,
        seed=config.seed,
        hv_reference=(config.hv_ref_tf, config.hv_ref_xf),
    )
    evaluator = ensemble.make_evaluator(problem, scenarios)
    result = moea.evolve(evaluator, problem.n_genes, ga)

    _write(out_dir / "archive.csv", _archive_csv(result))
    _write(out_dir / "history.csv", moea.history_to_csv(result.history))
    _write(out_dir / "scatter.csv", _scatter_csv(result))

    reps = _representatives(result)
    for tag, entry in reps.items():
        schedule = sst.decode_chromosome(entry.genes)
        evaluation = entry.payload
        member_tfs = [m.terminal.get("t_f", 0.0) for m in evaluation.members]
        until = max(member_tfs) if member_tfs else None
        _write(out_dir / f"rep_{tag}_control.csv", _control_csv(schedule, until))
        _write(out_dir / f"rep_{tag}_ensemble.json",
               ensemble.ensemble_to_json(evaluation, scenarios))
        _write(out_dir / f"rep_{tag}_trajectories.csv",
               _trajectories_csv(dyn, schedule, scenarios))

    hv = result.history[-1]["archive_hv"]
    summary = {
        "problem": problem.name,
        "archive_size": len(result.archive),
        "hypervolume": hv,
        "hv_reference": [config.hv_ref_tf, config.hv_ref_xf],
        "generations": config.generations,
        "seed": config.seed,
        "representatives": {
            tag: {
                "t_f": -float(e.objectives[0]),
                "x_f": -float(e.objectives[1]),
                "terminal_moments": {
                    k: {"mean": float(v[0]), "std": float(v[1])}
                    for k, v in e.payload.terminal_moments.items()},
            } for tag, e in reps.items()},
    }
    _write(out_dir / "summary.json", _json_dump(summary))
    export_plot_data(out_dir)
    return summary


def export_plot_data(run_dir) -> None:
    """Derive plot-ready CSVs from a completed run directory.

    Produces an altitude-history CSV per representative (time/altitude pairs
    for every exported curve).  The objective-space scatter already ships as
    ``scatter.csv``.  Missing inputs raise so callers exit nonzero.
    """
    run_dir = pathlib.Path(run_dir)
    if not (run_dir / "archive.csv").exists():
        raise FileNotFoundError(f"{run_dir} has no archive.csv; incomplete run")
    for traj_file in sorted(run_dir.glob("rep_*_trajectories.csv")):
        tag = traj_file.name.replace("_trajectories.csv", "")
        lines = traj_file.read_text().strip().split("\n")
        out = ["curve,t,z"]
        for line in lines[1:]:
            curve, _wind, t, _x, z, _ma, _al = line.split(",")
            out.append(f"{curve},{t},{z}")
        _write(run_dir / f"{tag}_alt_history.csv", "\n".join(out) + "\n")


def _dump_metadata(config: RunConfig, out_dir: pathlib.Path, extra: dict) -> None:
    meta = {
        "version": __version__,
        "config": {section: {k: getattr(config, k) for k in keys}
                   for section, keys in config._SECTIONS.items()},
    }
    meta.update(extra)
    _write(out_dir / "metadata.json", _json_dump(meta))
    _write(out_dir / "effective_config.ini", config.to_ini())


def run(config: RunConfig) -> int:
    """Execute one study per the configured mode; returns the exit status."""
    config.validate()
    out_dir = pathlib.Path(config.out)
    _ensure_out_dir(out_dir, config.force)

    threads = os.environ.get("ROBUSTTRAJ_THREADS")
    if threads:
        try:
            import numba
            numba.set_num_threads(max(1, int(threads)))
        except (ValueError, ImportError):
            logger.warning("ignoring invalid ROBUSTTRAJ_THREADS=%r", threads)

    dyn = _load_dynamics(config, out_dir)

    if config.mode == "mc":
        control = pathlib.Path(config.mc_control)
        if not control.exists():
            raise ConfigError(f"run.mc_control file not found: {control}")
        schedule = _read_control_csv(control)
        report = mc.run_mc(schedule, dyn, n=config.mc_samples, seed=config.mc_seed,
                           sigma1=config.sigma1, sigma2=config.sigma2)
        _write(out_dir / "mc_report.json", mc.report_to_json(report))
        _write(out_dir / "mc_samples.csv", mc.samples_to_csv(report))
        _dump_metadata(config, out_dir, {"mode_detail": "mc"})
        return 0

    if config.mode == "deterministic":
        summary = _run_optimization(config, dyn, sst.deterministic_problem(
            dyn, config.quad_points, config.order), out_dir)
        _dump_metadata(config, out_dir, {"summary": summary})
        return 0

    if config.mode == "robust":
        problem = sst.robust_problem(dyn, config.sigma1, config.sigma2,
                                     config.quad_points, config.order)
        summary = _run_optimization(config, dyn, problem, out_dir)
        _dump_metadata(config, out_dir, {"summary": summary})
        return 0

    # sensitivity: the deterministic case plus both one-at-a-time sigma sweeps
    summaries = {}
    for name, sigmas in SENSITIVITY_CASES:
        sub = out_dir / name
        sub.mkdir(exist_ok=True)
        sub_config = dataclasses.replace(config, out=str(sub))
        if sigmas is None:
            problem = sst.deterministic_problem(dyn, config.quad_points, config.order)
        else:
            sub_config.sigma1, sub_config.sigma2 = sigmas
            problem = sst.robust_problem(dyn, sigmas[0], sigmas[1],
                                         config.quad_points, config.order)
        logger.info("sensitivity case %s", name)
        summaries[name] = _run_optimization(sub_config, dyn, problem, sub)
    hv_summary = {name: s["hypervolume"] for name, s in summaries.items()}
    _write(out_dir / "summary.json", _json_dump(
        {"cases": summaries, "hypervolumes": hv_summary}))
    _dump_metadata(config, out_dir, {"hypervolumes": hv_summary})
    return 0


def _read_control_csv(path: pathlib.Path) -> np.ndarray:
    lines = path.read_text().strip().split("\n")
    values = [float(line.split(",")[1]) for line in lines[1:]]
    if not values:
        raise ConfigError(f"control file {path} has no rows")
    schedule = np.full(sst.N_GENES, values[-1])
    schedule[:min(len(values), sst.N_GENES)] = values[:sst.N_GENES]
    return schedule


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="robusttraj",
        description="Robust multi-objective landing-trajectory studies")
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--force", action="store_true",
                        help="allow writing into a non-empty output directory")
    parser.add_argument("--dump-default-config", action="store_true",
                        help="print the default configuration and exit")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    try:
        config = RunConfig.from_ini(pathlib.Path(args.config).read_text()) \
            if args.config else RunConfig()
        if args.dump_default_config:
            sys.stdout.write(config.to_ini())
            return 0
        if args.mode:
            config.mode = args.mode
        if args.seed is not None:
            config.seed = args.seed
        if args.out:
            config.out = args.out
        if args.force:
            config.force = True
        return run(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:   # any internal failure must exit nonzero
        logger.exception("run failed: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
