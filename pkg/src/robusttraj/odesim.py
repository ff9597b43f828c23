"""Fixed-step RK4 propagation with guard conditions and touchdown events.

The propagator integrates a controlled system at a constant time step,
holding the control constant over each step (zero-order hold), and stops
when one of three things happens:

* the altitude accessor crosses zero (``Landed``; the event time and
  downrange are linearly interpolated inside the final step),
* a guard predicate fires after a full step (``PathViolation``), or
* the horizon runs out (``TimeExpired``).

Guards are evaluated after full steps only, never at RK4 substeps.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Status",
    "GuardHit",
    "Trajectory",
    "rk4_step",
    "propagate",
    "touchdown_interpolate",
    "trajectory_to_csv",
]


class Status(enum.Enum):
    LANDED = "Landed"
    PATH_VIOLATION = "PathViolation"
    TIME_EXPIRED = "TimeExpired"


@dataclass(frozen=True)
class GuardHit:
    """Which constraint a trajectory violated, and by how much, at what time."""

    name: str
    magnitude: float
    time: float


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed record of one propagated flight.

    ``times``/``states``/``controls`` are aligned step records (the control
    column holds the value applied over the step that *produced* each state;
    the first entry repeats the initial control).  ``terminal`` is the
    interpolated ``(t_f, x_f)`` pair when the status is ``Landed``.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    status: Status
    guard: GuardHit | None = None
    terminal: tuple[float, float] | None = None

    @property
    def t_f(self) -> float:
        if self.terminal is None:
            raise ValueError("trajectory did not land")
        return self.terminal[0]

    @property
    def x_f(self) -> float:
        if self.terminal is None:
            raise ValueError("trajectory did not land")
        return self.terminal[1]


def rk4_step(deriv: Callable, state: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of ``dx/dt = deriv(x, t)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = deriv(state, t)
    k2 = deriv(state + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = deriv(state + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = deriv(state + dt * k3, t + dt)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def touchdown_interpolate(prev: tuple[float, float, float],
                          next_: tuple[float, float, float]) -> tuple[float, float]:
    """Linear interpolation of the z = 0 crossing between two step records.

    Each record is ``(t, z, x)``; ``prev`` must be strictly above ground and
    ``next_`` at or below it.
    """
    t0, z0, x0 = prev
    t1, z1, x1 = next_
    if not (z0 > 0.0 >= z1):
        raise ValueError(f"records do not bracket touchdown: z {z0} -> {z1}")
    if z1 == 0.0:
        return t1, x1
    frac = z0 / (z0 - z1)
    return t0 + frac * (t1 - t0), x0 + frac * (x1 - x0)


def propagate(deriv: Callable,
              x0: np.ndarray,
              control_at: Callable[[float], float],
              dt: float,
              t_max: float,
              guards: Sequence[Callable] = (),
              altitude_of: Callable[[np.ndarray], float] | None = None,
              downrange_of: Callable[[np.ndarray], float] | None = None) -> Trajectory:
    """Propagate until touchdown, a guard violation, or the horizon.

    Args:
        deriv: ``(state, control, t) -> dstate/dt``.
        x0: initial state vector.
        control_at: control value as a function of time; sampled once per
            step and held constant across the step's substages.
        dt: step size, seconds.
        t_max: horizon, seconds.
        guards: callables ``(state, t) -> GuardHit | None``; a non-None
            return terminates the trajectory as a path violation.  A
            non-finite state is treated the same way.
        altitude_of: state accessor used for the touchdown event; when None
            there is no touchdown detection.
        downrange_of: state accessor for the terminal downrange, defaulting
            to the first state component.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_max < dt:
        raise ValueError("t_max must cover at least one step")
    if downrange_of is None:
        downrange_of = lambda s: float(s[0])

    state = np.array(x0, dtype=float)
    n_steps = int(round(t_max / dt))
    times = [0.0]
    states = [state.copy()]
    controls = [float(control_at(0.0))]

    for i in range(n_steps):
        t = i * dt
        u = float(control_at(t))
        new = rk4_step(lambda s, tt: deriv(s, u, tt), state, t, dt)
        t_new = (i + 1) * dt
        times.append(t_new)
        states.append(new.copy())
        controls.append(u)

        if not np.all(np.isfinite(new)):
            hit = GuardHit("nonfinite_state", 1.0, t_new)
            return Trajectory(np.array(times), np.array(states), np.array(controls),
                              Status.PATH_VIOLATION, guard=hit)

        if altitude_of is not None:
            z_prev, z_new = altitude_of(state), altitude_of(new)
            if z_new <= 0.0:
                terminal = touchdown_interpolate(
                    (t, z_prev, downrange_of(state)),
                    (t_new, z_new, downrange_of(new)))
                return Trajectory(np.array(times), np.array(states), np.array(controls),
                                  Status.LANDED, terminal=terminal)

        for guard in guards:
            hit = guard(new, t_new)
            if hit is not None:
                return Trajectory(np.array(times), np.array(states), np.array(controls),
                                  Status.PATH_VIOLATION, guard=hit)
        state = new

    return Trajectory(np.array(times), np.array(states), np.array(controls),
                      Status.TIME_EXPIRED)


def trajectory_to_csv(traj: Trajectory, state_names: Sequence[str] | None = None) -> str:
    """Render a trajectory as CSV: t, state components, control, status footer.

    Decimal fields use 9 significant digits so identical trajectories always
    serialize byte-identically.
    """
    n_state = traj.states.shape[1]
    if state_names is None:
        state_names = [f"x{i}" for i in range(n_state)]
    if len(state_names) != n_state:
        raise ValueError("state_names length mismatch")
    buf = io.StringIO()
    buf.write("t," + ",".join(state_names) + ",control\n")
    for t, row, u in zip(traj.times, traj.states, traj.controls):
        fields = [f"{t:.9g}"] + [f"{v:.9g}" for v in row] + [f"{u:.9g}"]
        buf.write(",".join(fields) + "\n")
    footer = ["status", traj.status.value]
    if traj.status is Status.LANDED:
        footer += ["t_f", f"{traj.terminal[0]:.9g}", "x_f", f"{traj.terminal[1]:.9g}"]
    elif traj.status is Status.PATH_VIOLATION and traj.guard is not None:
        footer += ["guard", traj.guard.name, "magnitude", f"{traj.guard.magnitude:.9g}"]
    buf.write(",".join(footer) + "\n")
    return buf.getvalue()
