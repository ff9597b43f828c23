"""Monte Carlo validation of optimized landing controls.

Samples the wind distribution directly (no quadrature), flies the candidate
schedule through every draw, and compares the sample statistics of the
terminal objectives against the terminal-std constraint levels.  This is the
independent check that the spectral std estimates used during optimization
were trustworthy.

Standard deviations use the population formula (divide by n), matching the
spectral definition the optimizer enforces.  Samples that never land are
excluded from the moments, counted, and reported loudly: moments over a
censored sample are only meaningful alongside the landing rate.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass

import numpy as np

from . import ensemble, pce, sst
from .odesim import Status

logger = logging.getLogger(__name__)

__all__ = ["McSample", "McReport", "run_mc", "report_to_json", "samples_to_csv"]


@dataclass(frozen=True)
class McSample:
    wind: float
    status: str
    t_f: float      # nan unless landed
    x_f: float


@dataclass(frozen=True)
class McReport:
    """Sample statistics of the terminal objectives under random wind."""

    n_samples: int
    n_landed: int
    mean_tf: float
    std_tf: float
    mean_xf: float
    std_xf: float
    sigma1_bound: float
    sigma2_bound: float
    samples: tuple

    @property
    def landing_rate(self) -> float:
        return self.n_landed / self.n_samples

    @property
    def sigma1_satisfied(self) -> bool:
        return bool(self.n_landed and self.std_tf <= self.sigma1_bound)

    @property
    def sigma2_satisfied(self) -> bool:
        return bool(self.n_landed and self.std_xf <= self.sigma2_bound)

    @property
    def total_failure(self) -> bool:
        return self.n_landed == 0


def _draw_winds(n: int, seed: int, bounds: tuple[float, float]) -> np.ndarray:
    """One wind per sample, each from its own (master seed, index)-derived
    stream, so the draw for sample i never depends on evaluation order."""
    children = np.random.SeedSequence(seed).spawn(n)
    lo, hi = bounds
    return np.array([np.random.default_rng(c).uniform(lo, hi) for c in children])


def run_mc(schedule: np.ndarray, dynamics: sst.SstDynamics, n: int, seed: int,
           sigma1: float = 3.0, sigma2: float = 150.0,
           wind_bounds: tuple[float, float] = sst.WIND_BOUNDS,
           batch: int = 200) -> McReport:
    """Fly ``n`` uniformly drawn winds through one elevator schedule.

    Returns per-sample terminal records plus population moments over the
    landed subset and the sigma-constraint verdicts.
    """
    if n < 2:
        raise ValueError("Monte Carlo needs n >= 2")
    winds = _draw_winds(n, seed, wind_bounds)
    samples: list[McSample] = []
    for start in range(0, n, batch):
        chunk = winds[start:start + batch]
        members = dynamics.simulate_ensemble(schedule, chunk)
        for wind, member in zip(chunk, members):
            samples.append(McSample(
                wind=float(wind),
                status=member.status.value,
                t_f=member.terminal.get("t_f", float("nan")),
                x_f=member.terminal.get("x_f", float("nan")),
            ))

    landed = [s for s in samples if s.status == Status.LANDED.value]
    n_landed = len(landed)
    if n_landed == 0:
        logger.warning("Monte Carlo: 0 of %d samples landed; moments undefined", n)
        mean_tf = std_tf = mean_xf = std_xf = float("nan")
    else:
        if n_landed < n:
            logger.warning(
                "Monte Carlo: %d of %d samples did not land; moments computed "
                "over the %d landed samples only", n - n_landed, n, n_landed)
        def pop_moments(values: np.ndarray) -> tuple[float, float]:
            # identical samples have exactly zero spread; np.std would report
            # the 1-ulp roundoff of the mean instead
            if np.ptp(values) == 0.0:
                return float(values[0]), 0.0
            return float(values.mean()), float(values.std())   # population std

        mean_tf, std_tf = pop_moments(np.array([s.t_f for s in landed]))
        mean_xf, std_xf = pop_moments(np.array([s.x_f for s in landed]))

    return McReport(n_samples=n, n_landed=n_landed,
                    mean_tf=mean_tf, std_tf=std_tf,
                    mean_xf=mean_xf, std_xf=std_xf,
                    sigma1_bound=sigma1, sigma2_bound=sigma2,
                    samples=tuple(samples))


def report_to_json(report: McReport) -> str:
    body = {
        "n_samples": report.n_samples,
        "n_landed": report.n_landed,
        "landing_rate": report.landing_rate,
        "total_failure": report.total_failure,
        "objectives": {
            "t_f": {"mean": report.mean_tf, "std": report.std_tf},
            "x_f": {"mean": report.mean_xf, "std": report.std_xf},
        },
        "constraints": {
            "sigma1": {"bound": report.sigma1_bound,
                       "satisfied": report.sigma1_satisfied},
            "sigma2": {"bound": report.sigma2_bound,
                       "satisfied": report.sigma2_satisfied},
        },
    }
    return json.dumps(body, sort_keys=True, indent=2)


def samples_to_csv(report: McReport) -> str:
    buf = io.StringIO()
    buf.write("wind,status,t_f,x_f\n")
    for s in report.samples:
        buf.write(f"{s.wind:.9g},{s.status},{s.t_f:.9g},{s.x_f:.9g}\n")
    return buf.getvalue()
