"""Supersonic-transport landing case study.

Planar 3-DoF landing dynamics of a delta-wing transport with a single
elevator control, flown open loop from 1000 m altitude at 120 m/s until
touchdown.  A constant horizontal wind is the one uncertain parameter,
uniform on [-5, 5] m/s; it enters the model only through the air-relative
velocity used for the aerodynamic quantities, while the kinematic states
stay inertial.

State vector: [x, z, u, w, theta, q] = downrange (m), altitude (m),
horizontal and vertical inertial velocity (m/s), pitch (rad), pitch
rate (rad/s).

The momentum equations follow the source formulation verbatim,

    du/dt = X/m - g sin(theta) - q w
    dw/dt = Z/m - g cos(theta) - q u
    dq/dt = M_theta / I_yy - q

with Z up-positive; the ``textbook`` mode replaces the nonstandard coupling
and pitch-damping terms with a conventional body-to-inertial force rotation
for comparison studies.

Control encoding: the elevator is commanded every 0.5 s (zero-order hold).
Gene 0 maps to the initial deflection in [-35.9, -15.9] deg; each further
gene maps to a per-interval increment in [-1, +1] deg, cumulatively clipped
to [-50, +10] deg, which guarantees the 2 deg/s rate bound by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import aero, ensemble, pce, _sstkernel
from .aero import VehicleParams, DEFAULT_VEHICLE
from .odesim import Status

__all__ = [
    "STATE_NAMES",
    "AirData",
    "SstDynamics",
    "initial_state",
    "airdata",
    "eom",
    "decode_chromosome",
    "schedule_times",
    "deterministic_problem",
    "robust_problem",
    "SIGMA_TABLE",
    "N_GENES",
]

STATE_NAMES = ("x", "z", "u", "w", "theta", "q")

# path-constraint band, enforced per trajectory at every step
MA_BOUNDS = (0.1, 0.5)
ALPHA_BOUNDS_DEG = (-5.0, 21.0)

# ensemble-statistics bounds
SIGMA_MA = 0.2
SIGMA_ALPHA_DEG = 4.0

# elevator encoding
DELTA_E_BOUNDS = (-50.0, 10.0)
DELTA_E0_BOUNDS = (-35.9, -15.9)
DELTA_E_STEP = 1.0              # max change per 0.5 s interval, deg
CONTROL_INTERVAL = 0.5          # s
T_MAX = 240.0                   # s
HORIZON = int(T_MAX / CONTROL_INTERVAL)   # 480 increments
N_GENES = HORIZON + 1

WIND_BOUNDS = (-5.0, 5.0)       # m/s

# sensitivity-study constraint levels: (sigma1 [s], sigma2 [m])
SIGMA_TABLE = {
    "low": (1.0, 100.0),
    "baseline": (3.0, 150.0),
    "high": (5.0, 200.0),
}


def initial_state() -> np.ndarray:
    """x=0, z=1000 m, u=120 m/s, w=0, theta=0, q=0."""
    return np.array([0.0, 1000.0, 120.0, 0.0, 0.0, 0.0])


class AirData(NamedTuple):
    Ma: float
    alpha: float      # rad
    Q: float          # Pa
    V_air: float      # m/s


def airdata(state: np.ndarray, wind: float,
            vehicle: VehicleParams = DEFAULT_VEHICLE) -> AirData:
    """Air-relative flow quantities for one state under a constant wind.

    The air-relative velocity (u - xi, w) is rotated into body axes; the
    angle of attack is the angle of the body x-axis above the relative
    velocity vector (standard sense: positive when the nose points above
    the flight path), zero when the air is at rest relative to the body.
    """
    u, w, theta = state[2], state[3], state[4]
    ur = u - wind
    ub = ur * np.cos(theta) + w * np.sin(theta)
    wb = ur * np.sin(theta) - w * np.cos(theta)
    v_air = float(np.hypot(ub, wb))
    alpha = float(np.arctan2(wb, ub)) if v_air > 0.0 else 0.0
    ma = v_air / vehicle.sound_speed
    q_dyn = 0.5 * vehicle.air_density * v_air * v_air
    return AirData(ma, alpha, q_dyn, v_air)


def eom(state: np.ndarray, delta_e_deg: float, wind: float,
        modelset: aero.AeroModelSet, mode: str = "verbatim") -> np.ndarray:
    """State derivative with forces from the Kriging surrogate."""
    vehicle = modelset.vehicle
    ad = airdata(state, wind, vehicle)
    fx, fz, mth = aero.aero_forces(modelset, ad.Ma, np.degrees(ad.alpha),
                                   delta_e_deg, ad.Q)
    return _assemble_deriv(state, fx, fz, mth, vehicle, mode)


def _assemble_deriv(state, fx, fz, mth, vehicle: VehicleParams, mode: str) -> np.ndarray:
    u, w, theta, q = state[2], state[3], state[4], state[5]
    st, ct = np.sin(theta), np.cos(theta)
    g = vehicle.gravity
    m = vehicle.mass
    if mode == "verbatim":
        du = fx / m - g * st - q * w
        dw = fz / m - g * ct - q * u
        dq = mth / vehicle.inertia_yy - q
    elif mode == "textbook":
        du = (fx * ct - fz * st) / m
        dw = (fx * st + fz * ct) / m - g
        dq = mth / vehicle.inertia_yy
    else:
        raise ValueError(f"unknown dynamics mode {mode!r}")
    return np.array([u, w, du, dw, q, dq])


def decode_chromosome(genes: np.ndarray) -> np.ndarray:
    """Stage-1 repair: genes in [0,1to an admissible elevator schedule.

    Returns the per-interval deflections in degrees, length ``HORIZON + 1``.
    Bounds and the rate limit hold by construction for any gene vector.
    """
    genes = np.asarray(genes, dtype=float)
    if genes.shape[0] != N_GENES:
        raise ValueError(f"expected {N_GENES} genes, got {genes.shape[0]}")
    lo0, hi0 = DELTA_E0_BOUNDS
    schedule = np.empty(N_GENES)
    schedule[0] = lo0 + (hi0 - lo0) * genes[0]
    increments = -DELTA_E_STEP + 2.0 * DELTA_E_STEP * genes[1:]
    value = schedule[0]
    lo, hi = DELTA_E_BOUNDS
    for k, inc in enumerate(increments, start=1):
        value = min(max(value + inc, lo), hi)
        schedule[k] = value
    return schedule


def schedule_times() -> np.ndarray:
    """Start time of each control interval."""
    return np.arange(N_GENES) * CONTROL_INTERVAL


def schedule_at(schedule: np.ndarray, t: float) -> float:
    idx = min(int(t / CONTROL_INTERVAL), len(schedule) - 1)
    return float(schedule[idx])


_GUARD_NAMES = {
    _sstkernel.GUARD_MA_LOW: "Ma_low",
    _sstkernel.GUARD_MA_HIGH: "Ma_high",
    _sstkernel.GUARD_ALPHA_LOW: "alpha_low",
    _sstkernel.GUARD_ALPHA_HIGH: "alpha_high",
    _sstkernel.GUARD_NONFINITE: "nonfinite_state",
}

_STATUS_MAP = {
    _sstkernel.STATUS_LANDED: Status.LANDED,
    _sstkernel.STATUS_PATH_VIOLATION: Status.PATH_VIOLATION,
    _sstkernel.STATUS_TIME_EXPIRED: Status.TIME_EXPIRED,
}


@dataclass
class SstDynamics:
    """Bundled simulation context: surrogate, lookup table, integrator setup.

    ``table_tolerance`` records the verified sup-norm deviation of the
    lookup table from the exact Kriging predictor (fraction of each output's
    training range), asserted at build time.
    """

    modelset: aero.AeroModelSet
    table: aero.AeroTable
    vehicle: VehicleParams
    dt: float = 0.1
    t_max: float = T_MAX
    mode: str = "verbatim"
    table_tolerance: float = 0.0

    @classmethod
    def build(cls, modelset: aero.AeroModelSet | None = None,
              dt: float = 0.1, t_max: float = T_MAX, mode: str = "verbatim",
              table_resolution: tuple[int, int, int] = (81, 105, 61),
              verify_table: bool = True) -> "SstDynamics":
        if modelset is None:
            modelset, _ = aero.canonical_modelset()
        table = aero.build_table(modelset, *table_resolution)
        tol = 0.0
        if verify_table:
            errs = aero.table_max_error(table, modelset, n_probe=1000)
            tol = max(errs.values())
            if tol >= 1.5e-3:
                raise RuntimeError(f"aero table too coarse: sup error {tol:.2e}")
        return cls(modelset, table, modelset.vehicle, dt=dt, t_max=t_max,
                   mode=mode, table_tolerance=tol)

    def _params(self) -> np.ndarray:
        v = self.vehicle
        return np.array([v.mass, v.wing_area, v.chord, v.inertia_yy,
                         v.gravity, v.air_density, v.sound_speed])

    def simulate_ensemble(self, schedule: np.ndarray,
                          winds: np.ndarray) -> list[ensemble.MemberResult]:
        """Fly one schedule through every wind scenario (compiled path).

        A degenerate scenario set (all winds equal) is flown once and
        replicated, which leaves every downstream statistic bit-identical.
        """
        winds = np.ascontiguousarray(winds, dtype=float)
        schedule = np.ascontiguousarray(schedule, dtype=float)
        if len(winds) > 1 and np.ptp(winds) == 0.0:
            member = self.simulate_ensemble(schedule, winds[:1])[0]
            return [member] + [
                ensemble.MemberResult(
                    status=member.status,
                    stage2_violation=member.stage2_violation,
                    guard_name=member.guard_name,
                    terminal=dict(member.terminal),
                    series=member.series,
                    n_valid=member.n_valid,
                ) for _ in range(len(winds) - 1)]
        n_steps = int(round(self.t_max / self.dt))
        control_every = int(round(CONTROL_INTERVAL / self.dt))
        guard_bounds = np.array([MA_BOUNDS[0], MA_BOUNDS[1],
                                 ALPHA_BOUNDS_DEG[0], ALPHA_BOUNDS_DEG[1]])
        mode_flag = _sstkernel.MODE_VERBATIM if self.mode == "verbatim" \
            else _sstkernel.MODE_TEXTBOOK
        out = _sstkernel.propagate_ensemble(
            initial_state(), winds, schedule, self.dt, n_steps, control_every,
            self._params(), guard_bounds, mode_flag,
            self.table.values, self.table.ma_axis, self.table.al_axis,
            self.table.de_axis)
        (statuses, guard_codes, t_f, x_f, stage2, n_valid,
         ma_series, al_series, z_series, x_series) = out

        members = []
        for k in range(len(winds)):
            status = _STATUS_MAP[int(statuses[k])]
            terminal = {}
            if status is Status.LANDED:
                terminal = {"t_f": float(t_f[k]), "x_f": float(x_f[k])}
            members.append(ensemble.MemberResult(
                status=status,
                stage2_violation=float(stage2[k]),
                guard_name=_GUARD_NAMES.get(int(guard_codes[k])),
                terminal=terminal,
                series={
                    "Ma": ma_series[k],
                    "alpha_deg": al_series[k],
                    "z": z_series[k],
                    "x": x_series[k],
                },
                n_valid=int(n_valid[k]),
            ))
        return members

    def simulate_member_reference(self, schedule: np.ndarray,
                                  wind: float) -> ensemble.MemberResult:
        """Pure-Python twin of the compiled member loop (same table).

        Kept for cross-checking the kernel; identical stepping, guards, and
        touchdown interpolation, just materially slower.
        """
        n_steps = int(round(self.t_max / self.dt))
        state = initial_state()
        ad = airdata(state, wind, self.vehicle)
        series = {key: np.full(n_steps + 1, np.nan)
                  for key in ("Ma", "alpha_deg", "z", "x")}
        series["Ma"][0] = ad.Ma
        series["alpha_deg"][0] = np.degrees(ad.alpha)
        series["z"][0] = state[1]
        series["x"][0] = state[0]
        n_valid = 1

        def deriv(s, de):
            a = airdata(s, wind, self.vehicle)
            coeffs = aero.table_predict(self.table, a.Ma, np.degrees(a.alpha), de)
            v = self.vehicle
            fx = coeffs[0] + a.Q * v.wing_area * de * coeffs[3]
            fz = coeffs[1] + a.Q * v.wing_area * de * coeffs[4]
            mth = coeffs[2] + a.Q * v.wing_area * v.chord * de * coeffs[5]
            return _assemble_deriv(s, fx, fz, mth, v, self.mode)

        status = Status.TIME_EXPIRED
        guard_name = None
        stage2 = 0.0
        terminal = {}
        for i in range(n_steps):
            de = schedule_at(schedule, i * self.dt)
            k1 = deriv(state, de)
            k2 = deriv(state + 0.5 * self.dt * k1, de)
            k3 = deriv(state + 0.5 * self.dt * k2, de)
            k4 = deriv(state + self.dt * k3, de)
            new = state + (self.dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

            if not np.all(np.isfinite(new)):
                status = Status.PATH_VIOLATION
                guard_name = "nonfinite_state"
                stage2 = 1.0 + max(0.0, state[1] / 1000.0)
                break
            ad = airdata(new, wind, self.vehicle)
            al_deg = np.degrees(ad.alpha)
            series["Ma"][i + 1] = ad.Ma
            series["alpha_deg"][i + 1] = al_deg
            series["z"][i + 1] = new[1]
            series["x"][i + 1] = new[0]
            n_valid = i + 2
            if new[1] <= 0.0:
                frac = state[1] / (state[1] - new[1])
                terminal = {"t_f": i * self.dt + frac * self.dt,
                            "x_f": state[0] + frac * (new[0] - state[0])}
                status = Status.LANDED
                break
            excess, guard_name = 0.0, None
            if ad.Ma < MA_BOUNDS[0]:
                excess, guard_name = (MA_BOUNDS[0] - ad.Ma) / MA_BOUNDS[0], "Ma_low"
            elif ad.Ma > MA_BOUNDS[1]:
                excess, guard_name = (ad.Ma - MA_BOUNDS[1]) / MA_BOUNDS[1], "Ma_high"
            elif al_deg < ALPHA_BOUNDS_DEG[0]:
                excess, guard_name = ((ALPHA_BOUNDS_DEG[0] - al_deg)
                                      / abs(ALPHA_BOUNDS_DEG[0])), "alpha_low"
            elif al_deg > ALPHA_BOUNDS_DEG[1]:
                excess, guard_name = ((al_deg - ALPHA_BOUNDS_DEG[1])
                                      / ALPHA_BOUNDS_DEG[1]), "alpha_high"
            if guard_name is not None:
                status = Status.PATH_VIOLATION
                stage2 = excess + new[1] / 1000.0
                break
            state = new
        else:
            stage2 = state[1] / 1000.0

        return ensemble.MemberResult(status=status, stage2_violation=stage2,
                                     guard_name=guard_name, terminal=terminal,
                                     series=series, n_valid=n_valid)


def wind_spec(width: float = 1.0, quad_points: int = 6,
              order: int = 4) -> pce.UncertaintySpec:
    """Wind uncertainty spec; ``width=0`` collapses it for deterministic runs."""
    lo, hi = WIND_BOUNDS
    return pce.UncertaintySpec(bounds=((lo * width, hi * width),),
                               quad_points=quad_points, order=order)


def _build_problem(name: str, dynamics: SstDynamics, spec: pce.UncertaintySpec,
                   sigma1: float, sigma2: float) -> ensemble.RobustProblem:
    def simulate(schedule, scenarios):
        return dynamics.simulate_ensemble(schedule, scenarios.values[:, 0])

    return ensemble.RobustProblem(
        name=name,
        uncertainty=spec,
        n_genes=N_GENES,
        decode=decode_chromosome,
        simulate=simulate,
        objectives=(
            ensemble.ObjectiveDef("t_f", "t_f", "max"),
            ensemble.ObjectiveDef("x_f", "x_f", "max"),
        ),
        stat_constraints=(
            ensemble.StatConstraint("sigma_Ma", "path", "Ma", std_bound=SIGMA_MA),
            ensemble.StatConstraint("sigma_alpha", "path", "alpha_deg",
                                    std_bound=SIGMA_ALPHA_DEG),
            ensemble.StatConstraint("sigma_tf", "terminal", "t_f", std_bound=sigma1),
            ensemble.StatConstraint("sigma_xf", "terminal", "x_f", std_bound=sigma2),
        ),
    )


def robust_problem(dynamics: SstDynamics, sigma1: float, sigma2: float,
                   quad_points: int = 6, order: int = 4) -> ensemble.RobustProblem:
    """Wind-robust landing problem at the given terminal-std levels."""
    if sigma1 <= 0 or sigma2 <= 0:
        raise ValueError("sigma bounds must be positive")
    spec = wind_spec(1.0, quad_points, order)
    return _build_problem(f"robust_s1={sigma1:g}_s2={sigma2:g}", dynamics,
                          spec, sigma1, sigma2)


def deterministic_problem(dynamics: SstDynamics, quad_points: int = 6,
                          order: int = 4) -> ensemble.RobustProblem:
    """Nominal problem: the robust formulation with zero-width uncertainty."""
    spec = wind_spec(0.0, quad_points, order)
    sigma1, sigma2 = SIGMA_TABLE["baseline"]
    return _build_problem("deterministic", dynamics, spec, sigma1, sigma2)
