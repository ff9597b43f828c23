"""Constrained NSGA-II with an external archive and a 2-D hypervolume metric.

Selection follows Deb's constrained-domination rules: feasible solutions
beat infeasible ones, lower total violation wins among infeasible ones, and
Pareto domination (minimization) decides among feasible ones.  Variation is
simulated binary crossover plus polynomial mutation on genes normalized to
[0, 1].  An external unbounded archive collects every feasible non-dominated
individual ever evaluated, which makes the archive hypervolume monotone in
the generation count.

All randomness flows through one seeded generator consumed in a fixed order,
so a run is bit-reproducible from its seed.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "GaConfig",
    "Individual",
    "ArchiveEntry",
    "EvolveResult",
    "constrained_dominates",
    "non_dominated_sort",
    "crowding_distance",
    "sbx_crossover",
    "polynomial_mutation",
    "evolve",
    "hypervolume_2d",
    "history_to_csv",
    "archive_to_csv",
]


@dataclass(frozen=True)
class GaConfig:
    """Parameters of one evolutionary run.

    ``mutation_prob=None`` selects the canonical per-gene rate ``1/n_genes``.
    ``hv_reference`` is the fixed reference point used for the per-generation
    archive hypervolume column (minimization orientation); without one the
    column is NaN.
    """

    pop_size: int = 30
    generations: int = 600
    crossover_prob: float = 0.9
    eta_c: float = 15.0
    mutation_prob: float | None = None
    eta_m: float = 20.0
    seed: int = 0
    hv_reference: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.pop_size < 4 or self.pop_size % 2:
            raise ValueError("pop_size must be even and >= 4")
        if not (0.0 <= self.crossover_prob <= 1.0):
            raise ValueError("crossover_prob must be in [0, 1]")
        if self.mutation_prob is not None and not (0.0 <= self.mutation_prob <= 1.0):
            raise ValueError("mutation_prob must be in [0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")


@dataclass
class Individual:
    """One candidate: normalized genes plus its evaluation results."""

    genes: np.ndarray
    objectives: np.ndarray | None = None
    violations: np.ndarray | None = None
    payload: object = None
    rank: int = -1
    crowding: float = 0.0
    _total: float | None = None

    @property
    def total_violation(self) -> float:
        """Sum of normalized violations; +inf when objectives are non-finite."""
        if self._total is None:
            total = float(np.sum(self.violations)) if self.violations is not None else 0.0
            if self.objectives is not None and not np.all(np.isfinite(self.objectives)):
                total = float("inf")
            self._total = total
        return self._total

    @property
    def feasible(self) -> bool:
        return self.total_violation == 0.0


@dataclass(frozen=True)
class ArchiveEntry:
    genes: np.ndarray
    objectives: np.ndarray
    payload: object = None


@dataclass
class EvolveResult:
    archive: list[ArchiveEntry]
    history: list[dict]
    final_population: list[Individual]


def _pareto_dominates(fa: np.ndarray, fb: np.ndarray) -> bool:
    if fa.shape[0] == 2:   # fast path: the common bi-objective case
        return fa[0] <= fb[0] and fa[1] <= fb[1] and (fa[0] < fb[0] or fa[1] < fb[1])
    return bool(np.all(fa <= fb) and np.any(fa < fb))


def constrained_dominates(a: Individual, b: Individual) -> bool:
    """Deb's constrained-domination test (minimization)."""
    if a.objectives is None or b.objectives is None:
        raise ValueError("individuals must be evaluated before comparison")
    va, vb = a.total_violation, b.total_violation
    if va == 0.0 and vb > 0.0:
        return True
    if va > 0.0 and vb == 0.0:
        return False
    if va > 0.0 and vb > 0.0:
        return va < vb
    return _pareto_dominates(a.objectives, b.objectives)


def non_dominated_sort(pop: Sequence[Individual]) -> list[list[int]]:
    """Partition population indices into fronts by constrained domination.

    Also stamps ``rank`` on every individual.
    """
    n = len(pop)
    dominated_by = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts: list[list[int]] = [[]]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if constrained_dominates(pop[i], pop[j]):
                dominated_by[i].append(j)
            elif constrained_dominates(pop[j], pop[i]):
                domination_count[i] += 1
        if domination_count[i] == 0:
            pop[i].rank = 0
            fronts[0].append(i)
    k = 0
    while fronts[k]:
        nxt = []
        for i in fronts[k]:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    pop[j].rank = k + 1
                    nxt.append(j)
        k += 1
        fronts.append(nxt)
    fronts.pop()
    return fronts


def crowding_distance(objectives: np.ndarray) -> np.ndarray:
    """Crowding distances for one front's objective matrix (n, m).

    Boundary members per objective get +inf; interior members accumulate the
    neighbor gap normalized by the objective's range.
    """
    objectives = np.asarray(objectives, dtype=float)
    n, m = objectives.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for j in range(m):
        order = np.argsort(objectives[:, j], kind="stable")
        col = objectives[order, j]
        span = col[-1] - col[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span > 0.0:
            gaps = (col[2:] - col[:-2]) / span
            interior = order[1:-1]
            finite = np.isfinite(dist[interior])
            dist[interior] = np.where(finite, dist[interior] + gaps, dist[interior])
    return dist


def sbx_crossover(p1: np.ndarray, p2: np.ndarray, eta_c: float,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover on [0, 1] genes; children are clipped."""
    u = rng.random(p1.shape)
    beta = np.where(u <= 0.5,
                    (2.0 * u) ** (1.0 / (eta_c + 1.0)),
                    (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta_c + 1.0)))
    c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2)
    c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2)
    return np.clip(c1, 0.0, 1.0), np.clip(c2, 0.0, 1.0)


def polynomial_mutation(x: np.ndarray, eta_m: float, rate: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Bounded polynomial mutation on [0, 1] genes.

    Each gene mutates independently with probability ``rate``; the
    perturbation distribution respects the distance to both bounds, so a
    centered gene is perturbed symmetrically.
    """
    x = np.array(x, dtype=float)
    mutate = rng.random(x.shape) < rate
    if not np.any(mutate):
        return x
    u = rng.random(int(np.count_nonzero(mutate)))
    xm = x[mutate]
    d_lo = xm            # (x - lb) / (ub - lb) with bounds [0, 1]
    d_hi = 1.0 - xm
    exp = 1.0 / (eta_m + 1.0)
    delta = np.where(
        u < 0.5,
        (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d_lo) ** (eta_m + 1.0)) ** exp - 1.0,
        1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d_hi) ** (eta_m + 1.0)) ** exp,
    )
    x[mutate] = np.clip(xm + delta, 0.0, 1.0)
    return x


def hypervolume_2d(points: Sequence, reference: tuple[float, float]) -> float:
    """Area dominated by a 2-D minimization front, bounded by ``reference``.

    Points that do not dominate the reference are skipped (counted and
    logged); duplicates and dominated points contribute nothing.
    """
    ref1, ref2 = float(reference[0]), float(reference[1])
    pts = np.asarray(points, dtype=float).reshape(-1, 2) if len(points) else np.empty((0, 2))
    keep = (pts[:, 0] <= ref1) & (pts[:, 1] <= ref2) if len(pts) else np.empty(0, bool)
    skipped = int(len(pts) - np.count_nonzero(keep))
    if skipped:
        logger.warning("hypervolume_2d: skipped %d point(s) beyond reference %s",
                       skipped, (ref1, ref2))
    pts = pts[keep]
    if not len(pts):
        return 0.0
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    hv = 0.0
    prev2 = ref2
    for f1, f2 in pts[order]:
        if f2 < prev2:
            hv += (ref1 - f1) * (prev2 - f2)
            prev2 = f2
    return hv


class _Archive:
    """External archive of feasible, mutually non-dominated individuals."""

    def __init__(self) -> None:
        self.entries: list[ArchiveEntry] = []
        self._objs = np.empty((0, 0))

    def offer(self, ind: Individual) -> None:
        if not ind.feasible or not np.all(np.isfinite(ind.objectives)):
            return
        objs = ind.objectives
        if self.entries:
            le = self._objs <= objs
            lt = self._objs < objs
            if np.any(le.all(axis=1) & lt.any(axis=1)):       # dominated by a member
                return
            if np.any((self._objs == objs).all(axis=1)):      # exact duplicate
                return
            ge = self._objs >= objs
            gt = self._objs > objs
            beaten = ge.all(axis=1) & gt.any(axis=1)
            if np.any(beaten):
                keep = ~beaten
                self.entries = [e for e, k in zip(self.entries, keep) if k]
                self._objs = self._objs[keep]
        self.entries.append(ArchiveEntry(ind.genes.copy(), objs.copy(), ind.payload))
        self._objs = objs[None, :].copy() if not self._objs.size \
            else np.vstack([self._objs, objs])


def _evaluate_into(ind: Individual, evaluate: Callable) -> None:
    result = evaluate(ind.genes)
    if len(result) == 3:
        objectives, violations, payload = result
    else:
        objectives, violations = result
        payload = None
    ind.objectives = np.asarray(objectives, dtype=float)
    ind.violations = np.asarray(violations, dtype=float)
    ind.payload = payload
    ind._total = None


def _rank_population(pop: list[Individual]) -> list[list[int]]:
    fronts = non_dominated_sort(pop)
    for front in fronts:
        dists = crowding_distance(np.stack([_safe_objs(pop[i]) for i in front]))
        for i, d in zip(front, dists):
            pop[i].crowding = float(d)
    return fronts


def _safe_objs(ind: Individual) -> np.ndarray:
    # crowding sorts need finite values; park unevaluable objectives at the top
    big = np.finfo(float).max
    return np.nan_to_num(ind.objectives, nan=big, posinf=big, neginf=-big)


def _tournament(pop: list[Individual], rng: np.random.Generator) -> Individual:
    i, j = rng.integers(len(pop)), rng.integers(len(pop))
    a, b = pop[i], pop[j]
    if (a.rank, -a.crowding, i) <= (b.rank, -b.crowding, j):
        return a
    return b


def evolve(evaluate: Callable, n_genes: int, config: GaConfig,
           on_generation: Callable[[int], None] | None = None) -> EvolveResult:
    """Run the constrained NSGA-II generational loop.

    Args:
        evaluate: ``genes -> (objectives, violations[, payload])``; objectives
            are minimized, violations are nonnegative with 0 meaning satisfied.
            Gene vectors arrive already in [0, 1]; any stage-1 repair belongs
            inside the evaluator's decoding step.
        n_genes: decision-vector length.
        config: run parameters (see :class:`GaConfig`).
        on_generation: optional progress callback with the generation index.

    Returns:
        The external archive, a per-generation history (archive size and
        hypervolume, min/mean population violation), and the final population.
    """
    rng = np.random.default_rng(config.seed)
    mut_rate = config.mutation_prob if config.mutation_prob is not None else 1.0 / n_genes

    pop = [Individual(genes=rng.random(n_genes)) for _ in range(config.pop_size)]
    for ind in pop:
        _evaluate_into(ind, evaluate)
    _rank_population(pop)

    archive = _Archive()
    for ind in pop:
        archive.offer(ind)

    history: list[dict] = []

    def record(gen: int) -> None:
        totals = [ind.total_violation for ind in pop]
        hv = float("nan")
        if config.hv_reference is not None:
            hv = hypervolume_2d([e.objectives for e in archive.entries], config.hv_reference)
        history.append({
            "generation": gen,
            "archive_size": len(archive.entries),
            "archive_hv": hv,
            "min_violation": min(totals),
            "mean_violation": float(np.mean(totals)),
        })

    record(0)
    for gen in range(1, config.generations + 1):
        parents = [_tournament(pop, rng) for _ in range(config.pop_size)]
        offspring: list[Individual] = []
        for a, b in zip(parents[0::2], parents[1::2]):
            if rng.random() < config.crossover_prob:
                g1, g2 = sbx_crossover(a.genes, b.genes, config.eta_c, rng)
            else:
                g1, g2 = a.genes.copy(), b.genes.copy()
            for g in (g1, g2):
                child = Individual(genes=polynomial_mutation(g, config.eta_m, mut_rate, rng))
                offspring.append(child)
        for child in offspring:
            _evaluate_into(child, evaluate)
            archive.offer(child)

        combined = pop + offspring
        fronts = _rank_population(combined)
        survivors: list[Individual] = []
        for front in fronts:
            if len(survivors) + len(front) <= config.pop_size:
                survivors.extend(combined[i] for i in front)
            else:
                by_crowding = sorted(front, key=lambda i: (-combined[i].crowding, i))
                room = config.pop_size - len(survivors)
                survivors.extend(combined[i] for i in by_crowding[:room])
                break
        pop = survivors
        _rank_population(pop)
        record(gen)
        if on_generation is not None:
            on_generation(gen)

    return EvolveResult(archive=archive.entries, history=history, final_population=pop)


def history_to_csv(history: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write("generation,archive_size,archive_hv,min_violation,mean_violation\n")
    for row in history:
        buf.write("{generation},{archive_size},".format(**row))
        buf.write(f"{row['archive_hv']:.9g},{row['min_violation']:.9g},"
                  f"{row['mean_violation']:.9g}\n")
    return buf.getvalue()


def archive_to_csv(archive: Sequence[ArchiveEntry],
                   decode: Callable[[np.ndarray], np.ndarray] | None = None,
                   objective_transform: Callable[[np.ndarray], np.ndarray] | None = None,
                   gene_header: str = "g",
                   objective_names: Sequence[str] | None = None) -> str:
    """Serialize the archive: denormalized genes then objectives, one row each.

    Rows are sorted by the first (transformed) objective so the file layout
    does not depend on insertion order.
    """
    buf = io.StringIO()
    rows = []
    for e in archive:
        genes = decode(e.genes) if decode is not None else e.genes
        objs = objective_transform(e.objectives) if objective_transform is not None \
            else e.objectives
        rows.append((np.asarray(genes, dtype=float), np.asarray(objs, dtype=float)))
    if rows:
        n_g = len(rows[0][0])
        n_f = len(rows[0][1])
    else:
        n_g, n_f = 0, 2
    if objective_names is None:
        objective_names = [f"f{j}" for j in range(n_f)]
    header = [f"{gene_header}{i}" for i in range(n_g)] + list(objective_names)
    buf.write(",".join(header) + "\n")
    rows.sort(key=lambda r: tuple(r[1]))
    for genes, objs in rows:
        fields = [f"{v:.9g}" for v in genes] + [f"{v:.9g}" for v in objs]
        buf.write(",".join(fields) + "\n")
    return buf.getvalue()
