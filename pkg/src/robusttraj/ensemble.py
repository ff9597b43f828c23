"""Trajectory-ensemble evaluation with staged constraint handling.

One candidate control is flown through every quadrature scenario of the
uncertainty, giving an M-member trajectory ensemble.  Constraints are
processed in three stages:

* stage 1 lives in the problem's ``decode`` step: gene vectors are repaired
  into admissible controls by construction, so no violations can arise here;
* stage 2 lives inside the member simulation: path guards and terminal
  events terminate a member and report a graded violation;
* stage 3 is evaluated here, on spectral statistics across the ensemble:
  mean/std bounds on aligned time series and std bounds on terminal scalars.

Every violation is normalized by its bound magnitude so totals are
scale-free; infeasibility is always encoded in the violation vector, never
raised.  Evaluation is deterministic given (genes, problem, scenarios).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import pce
from .odesim import Status

__all__ = [
    "StatConstraint",
    "ObjectiveDef",
    "MemberResult",
    "RobustProblem",
    "EnsembleEvaluation",
    "evaluate",
    "stat_path_violation",
    "terminal_std_violation",
    "make_evaluator",
    "ensemble_to_json",
]

#: violation charged for statistics that cannot be computed at all
#: (non-landed members for terminal stds, empty common time range)
INFEASIBILITY_CONSTANT = 10.0


@dataclass(frozen=True)
class StatConstraint:
    """A stage-3 statistical bound on an ensemble quantity.

    ``kind`` is ``"path"`` (bound holds at every shared time index of the
    named series) or ``"terminal"`` (bound on a per-member terminal scalar).
    ``mean_bounds`` is an optional (lo, hi) interval on the ensemble mean;
    ``std_bound`` an optional upper bound on the ensemble std.
    """

    name: str
    kind: str
    key: str
    mean_bounds: tuple[float, float] | None = None
    std_bound: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("path", "terminal"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.mean_bounds is None and self.std_bound is None:
            raise ValueError("constraint needs a mean interval or a std bound")


@dataclass(frozen=True)
class ObjectiveDef:
    """A per-trajectory terminal scalar whose ensemble mean is optimized."""

    name: str
    key: str
    sense: str = "max"

    def __post_init__(self) -> None:
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")


@dataclass
class MemberResult:
    """Outcome of one scenario member: status, terminals, aligned series."""

    status: Status
    stage2_violation: float = 0.0
    guard_name: str | None = None
    terminal: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    n_valid: int = 0

    @property
    def landed(self) -> bool:
        return self.status is Status.LANDED


@dataclass(frozen=True)
class RobustProblem:
    """Everything the optimizer needs to evaluate one chromosome.

    ``decode`` performs the stage-1 repair (genes in [0,1] to an admissible
    control); ``simulate`` flies that control through all scenarios and
    applies the stage-2 guards internally, returning one
    :class:`MemberResult` per scenario in scenario order.
    """

    name: str
    uncertainty: pce.UncertaintySpec
    n_genes: int
    decode: Callable
    simulate: Callable
    objectives: tuple[ObjectiveDef, ...]
    stat_constraints: tuple[StatConstraint, ...] = ()
    infeasibility_constant: float = INFEASIBILITY_CONSTANT

    def __post_init__(self) -> None:
        if len(self.objectives) < 2:
            raise ValueError("a multi-objective problem needs >= 2 objectives")


@dataclass
class EnsembleEvaluation:
    """Objectives, staged violations, and diagnostics for one chromosome."""

    objectives: np.ndarray                 # internal minimization orientation
    violations: np.ndarray
    violation_labels: tuple[str, ...]
    members: list
    terminal_moments: dict                 # objective name -> (mean, std)
    objective_means: np.ndarray            # physical orientation

    @property
    def total_violation(self) -> float:
        return float(np.sum(self.violations))

    @property
    def feasible(self) -> bool:
        return self.total_violation == 0.0


def _normalize_excess(excess: float, bound: float) -> float:
    scale = abs(bound) if bound != 0.0 else 1.0
    return excess / scale


def stat_path_violation(series: np.ndarray,
                        scenarios: pce.ScenarioSet,
                        mean_bounds: tuple[float, float] | None = None,
                        std_bound: float | None = None,
                        infeasibility_constant: float = INFEASIBILITY_CONSTANT) -> float:
    """Worst normalized statistical excess of an aligned ensemble time series.

    ``series`` has shape (M, T): member rows, shared time columns (callers
    truncate to the earliest member termination).  At every time index the
    spectral mean/std across members is checked against the bounds; the
    violation is the maximum over time of the summed normalized excesses,
    0 when the bounds always hold.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 2 or series.shape[1] < 1:
        return infeasibility_constant
    coeffs = pce.project_all(series, scenarios)
    mean_t, std_t = pce.moments(coeffs)
    worst = 0.0
    excess_t = np.zeros(series.shape[1])
    if mean_bounds is not None:
        lo, hi = mean_bounds
        over = np.maximum(mean_t - hi, 0.0)
        under = np.maximum(lo - mean_t, 0.0)
        excess_t += over / (abs(hi) if hi != 0.0 else 1.0)
        excess_t += under / (abs(lo) if lo != 0.0 else 1.0)
    if std_bound is not None:
        excess_t += np.maximum(std_t - std_bound, 0.0) / \
            (abs(std_bound) if std_bound != 0.0 else 1.0)
    if excess_t.size:
        worst = float(np.max(excess_t))
    return worst


def terminal_std_violation(values: np.ndarray,
                           bound: float,
                           scenarios: pce.ScenarioSet,
                           infeasibility_constant: float = INFEASIBILITY_CONSTANT) -> float:
    """Normalized excess of the spectral std of a terminal scalar.

    ``values`` holds one terminal value per member; any NaN entry marks a
    member that never produced the scalar (did not land) and makes the
    statistic undefined, charged as the infeasibility constant.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != len(scenarios) or np.any(np.isnan(values)):
        return infeasibility_constant
    _, std = pce.moments(pce.project_all(values, scenarios))
    return max(0.0, _normalize_excess(std - bound, bound))


def evaluate(genes: np.ndarray, problem: RobustProblem,
             scenarios: pce.ScenarioSet) -> EnsembleEvaluation:
    """Fly the ensemble for one chromosome and assemble objectives/violations.

    Objective j is the quadrature-weighted ensemble mean (the zeroth spectral
    coefficient) of the member terminal scalar, negated for maximization.
    When members fail, objectives are still estimated from the surviving
    members (renormalized weights) for diagnostics, while the violation
    vector marks the individual infeasible.
    """
    control = problem.decode(genes)
    members = problem.simulate(control, scenarios)
    if len(members) != len(scenarios):
        raise RuntimeError("simulate returned wrong member count")

    labels: list[str] = []
    viols: list[float] = []
    for k, member in enumerate(members):
        labels.append(f"stage2/member{k}")
        viols.append(float(member.stage2_violation))

    all_landed = all(m.landed for m in members)
    weights = scenarios.weights

    objective_means = np.empty(len(problem.objectives))
    internal = np.empty(len(problem.objectives))
    terminal_moments = {}
    for j, obj in enumerate(problem.objectives):
        samples = np.array([m.terminal.get(obj.key, np.nan) for m in members])
        if all_landed:
            coeffs = pce.project_all(samples, scenarios)
            mean, std = pce.moments(coeffs)
        else:
            ok = ~np.isnan(samples)
            if np.any(ok):
                mean = float(np.sum(weights[ok] * samples[ok]) / np.sum(weights[ok]))
            else:
                mean = np.nan
            std = np.nan
        terminal_moments[obj.name] = (mean, std)
        objective_means[j] = mean
        internal[j] = -mean if obj.sense == "max" else mean

    min_valid = min((m.n_valid for m in members), default=0)
    for sc in problem.stat_constraints:
        labels.append(f"stage3/{sc.name}")
        if sc.kind == "path":
            if min_valid < 1:
                viols.append(problem.infeasibility_constant)
                continue
            series = np.stack([m.series[sc.key][:min_valid] for m in members])
            viols.append(stat_path_violation(
                series, scenarios, sc.mean_bounds, sc.std_bound,
                problem.infeasibility_constant))
        else:
            samples = np.array([m.terminal.get(sc.key, np.nan) for m in members])
            viols.append(terminal_std_violation(
                samples, sc.std_bound, scenarios, problem.infeasibility_constant))

    return EnsembleEvaluation(
        objectives=internal,
        violations=np.array(viols),
        violation_labels=tuple(labels),
        members=members,
        terminal_moments=terminal_moments,
        objective_means=objective_means,
    )


def make_evaluator(problem: RobustProblem, scenarios: pce.ScenarioSet) -> Callable:
    """Adapt a problem to the ``moea.evolve`` evaluator signature."""

    def evaluator(genes: np.ndarray):
        ev = evaluate(genes, problem, scenarios)
        return ev.objectives, ev.violations, ev
    return evaluator


def ensemble_to_json(evaluation: EnsembleEvaluation,
                     scenarios: pce.ScenarioSet) -> str:
    """Dump scenario values/weights, member terminals, and moment summaries."""
    body = {
        "scenario_values": scenarios.values.tolist(),
        "scenario_weights": scenarios.weights.tolist(),
        "members": [
            {
                "status": m.status.value,
                "guard": m.guard_name,
                "stage2_violation": m.stage2_violation,
                "terminal": {k: float(v) for k, v in m.terminal.items()},
                "n_valid": int(m.n_valid),
            }
            for m in evaluation.members
        ],
        "terminal_moments": {k: {"mean": float(v[0]), "std": float(v[1])}
                             for k, v in evaluation.terminal_moments.items()},
        "objective_means": evaluation.objective_means.tolist(),
        "violations": dict(zip(evaluation.violation_labels,
                               evaluation.violations.tolist())),
        "total_violation": evaluation.total_violation,
        "feasible": evaluation.feasible,
    }
    return json.dumps(body, sort_keys=True, indent=2)
