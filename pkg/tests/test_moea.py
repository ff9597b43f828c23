import numpy as np
import pytest

from robusttraj import moea
from robusttraj.moea import GaConfig, Individual


def make(objs, violation=0.0):
    v = np.array([violation]) if np.isscalar(violation) else np.asarray(violation)
    return Individual(genes=np.zeros(1), objectives=np.asarray(objs, float), violations=v)


def brute_force_fronts(pop):
    """O(n^3) reference partition by repeated non-dominated extraction."""
    remaining = list(range(len(pop)))
    fronts = []
    while remaining:
        front = [i for i in remaining
                 if not any(moea.constrained_dominates(pop[j], pop[i])
                            for j in remaining if j != i)]
        fronts.append(sorted(front))
        remaining = [i for i in remaining if i not in front]
    return fronts


class TestConstrainedDominates:
    def test_feasible_beats_infeasible(self):
        assert moea.constrained_dominates(make([5, 5]), make([1, 1], violation=0.3))

    def test_smaller_violation_wins(self):
        a, b = make([9, 9], 0.1), make([0, 0], 0.5)
        assert moea.constrained_dominates(a, b)
        assert not moea.constrained_dominates(b, a)

    def test_mutual_non_domination(self):
        a, b = make([1, 2]), make([2, 1])
        assert not moea.constrained_dominates(a, b)
        assert not moea.constrained_dominates(b, a)

    def test_pareto_between_feasible(self):
        assert moea.constrained_dominates(make([1, 1]), make([2, 2]))
        assert not moea.constrained_dominates(make([1, 1]), make([1, 1]))

    def test_nonfinite_objectives_are_infeasible(self):
        bad = make([np.nan, 1.0])
        assert bad.total_violation == np.inf
        assert moea.constrained_dominates(make([4, 4]), bad)


class TestNonDominatedSort:
    def test_two_point_chain(self):
        pop = [make([1, 1]), make([2, 2])]
        fronts = moea.non_dominated_sort(pop)
        assert fronts == [[0], [1]]
        assert pop[0].rank == 0 and pop[1].rank == 1

    def test_single_front(self):
        pop = [make([1, 2]), make([2, 1])]
        assert moea.non_dominated_sort(pop) == [[0, 1]]

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 51))
        pop = []
        for _ in range(n):
            violation = 0.0 if rng.random() < 0.6 else float(rng.uniform(0.01, 2.0))
            pop.append(make(rng.normal(size=2), violation))
        fronts = [sorted(f) for f in moea.non_dominated_sort(pop)]
        assert fronts == brute_force_fronts(pop)


class TestCrowdingDistance:
    def test_two_member_front_all_infinite(self):
        d = moea.crowding_distance(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert np.all(np.isinf(d))

    def test_three_equally_spaced_middle_is_two(self):
        d = moea.crowding_distance(np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]]))
        assert np.isinf(d[0]) and np.isinf(d[2])
        assert d[1] == pytest.approx(2.0)

    def test_interior_duplicates_get_zero(self):
        objs = np.array([[0.0, 3.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [3.0, 0.0]])
        d = moea.crowding_distance(objs)
        assert d[2] == 0.0


class TestOperators:
    def test_sbx_children_within_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            p1, p2 = rng.random(8), rng.random(8)
            c1, c2 = moea.sbx_crossover(p1, p2, 15.0, rng)
            assert np.all((c1 >= 0) & (c1 <= 1)) and np.all((c2 >= 0) & (c2 <= 1))

    def test_sbx_beta_one_fixed_point(self):
        # children midpoint-symmetric: c1 + c2 == p1 + p2 when unclipped
        rng = np.random.default_rng(4)
        p1, p2 = np.full(6, 0.4), np.full(6, 0.6)
        c1, c2 = moea.sbx_crossover(p1, p2, 15.0, rng)
        assert np.allclose(c1 + c2, p1 + p2, atol=1e-12)

    def test_identical_parents_reproduce_exactly(self):
        rng = np.random.default_rng(5)
        p = rng.random(10)
        c1, c2 = moea.sbx_crossover(p, p.copy(), 15.0, rng)
        assert np.allclose(c1, p, atol=1e-12) and np.allclose(c2, p, atol=1e-12)

    def test_mutation_rate_zero_is_identity(self):
        rng = np.random.default_rng(6)
        x = rng.random(12)
        assert np.array_equal(moea.polynomial_mutation(x, 20.0, 0.0, rng), x)

    def test_mutation_symmetric_at_center(self):
        rng = np.random.default_rng(7)
        out = moea.polynomial_mutation(np.full(100_000, 0.5), 20.0, 1.0, rng)
        assert abs(out.mean() - 0.5) < 0.01
        assert np.all((out >= 0) & (out <= 1))


class TestHypervolume:
    def test_single_point(self):
        assert moea.hypervolume_2d([(1.0, 1.0)], (2.0, 2.0)) == pytest.approx(1.0)

    def test_two_point_union(self):
        assert moea.hypervolume_2d([(1.0, 2.0), (2.0, 1.0)], (3.0, 3.0)) == pytest.approx(3.0)

    def test_empty_set(self):
        assert moea.hypervolume_2d([], (1.0, 1.0)) == 0.0

    def test_point_beyond_reference_skipped(self, caplog):
        with caplog.at_level("WARNING"):
            hv = moea.hypervolume_2d([(1.0, 1.0), (5.0, 0.0)], (2.0, 2.0))
        assert hv == pytest.approx(1.0)
        assert "skipped 1" in caplog.text

    def test_dominated_points_do_not_add_area(self):
        hv = moea.hypervolume_2d([(1.0, 1.0), (1.5, 1.5)], (2.0, 2.0))
        assert hv == pytest.approx(1.0)

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(11)
        pts = rng.uniform(0, 1, size=(6, 2))
        ref = (1.2, 1.2)
        hv = moea.hypervolume_2d(pts, ref)
        samples = rng.uniform(0, 1.2, size=(200_000, 2))
        covered = np.zeros(len(samples), bool)
        for p in pts:
            covered |= (samples[:, 0] >= p[0]) & (samples[:, 1] >= p[1])
        mc = covered.mean() * 1.2 * 1.2
        assert hv == pytest.approx(mc, abs=0.01)


def quad_problem(genes):
    x = genes[0]
    return np.array([x * x, (x - 1.0) ** 2]), np.zeros(0)


class TestEvolve:
    def test_biobjective_quadratic_covers_pareto_set(self):
        config = GaConfig(pop_size=30, generations=50, seed=1, hv_reference=(2.0, 2.0))
        result = moea.evolve(quad_problem, 1, config)
        xs = np.sort([e.genes[0] for e in result.archive])
        assert xs.min() < 0.02 and xs.max() > 0.98
        gaps = np.diff(np.concatenate([[0.0], xs, [1.0]]))
        assert gaps.max() < 0.1

    def test_infeasible_everywhere_archive_empty(self):
        def hopeless(genes):
            return np.array([0.0, 0.0]), np.array([1.0 + genes[0]])

        config = GaConfig(pop_size=10, generations=20, seed=2)
        result = moea.evolve(hopeless, 1, config)
        assert result.archive == []
        mins = [row["min_violation"] for row in result.history]
        assert all(b <= a + 1e-15 for a, b in zip(mins, mins[1:]))

    def test_seeded_determinism(self):
        config = GaConfig(pop_size=12, generations=15, seed=42, hv_reference=(2.0, 2.0))
        r1 = moea.evolve(quad_problem, 1, config)
        r2 = moea.evolve(quad_problem, 1, config)
        assert len(r1.archive) == len(r2.archive)
        for a, b in zip(r1.archive, r2.archive):
            assert np.array_equal(a.genes, b.genes)
            assert np.array_equal(a.objectives, b.objectives)
        assert r1.history == r2.history

    def test_archive_hypervolume_monotone(self):
        config = GaConfig(pop_size=16, generations=100, seed=3, hv_reference=(2.0, 2.0))
        result = moea.evolve(quad_problem, 1, config)
        hvs = [row["archive_hv"] for row in result.history]
        assert all(b >= a - 1e-12 for a, b in zip(hvs, hvs[1:]))

    def test_archive_members_feasible_and_mutually_nondominated(self):
        def half_feasible(genes):
            v = 0.0 if genes[0] < 0.5 else float(genes[0])
            return np.array([genes[0], 1.0 - genes[0]]), np.array([v])

        result = moea.evolve(half_feasible, 1, GaConfig(pop_size=16, generations=30, seed=4))
        assert result.archive
        for e in result.archive:
            assert e.genes[0] < 0.5
        for a in result.archive:
            for b in result.archive:
                if a is b:
                    continue
                assert not (np.all(a.objectives <= b.objectives)
                            and np.any(a.objectives < b.objectives))

    def test_feasible_front_member_never_dropped_for_infeasible(self):
        def mixed(genes):
            v = 0.0 if genes[0] < 0.3 else 1.0
            return np.array([genes[0], 1.0 - genes[0]]), np.array([v])

        result = moea.evolve(mixed, 1, GaConfig(pop_size=12, generations=25, seed=5))
        pop = result.final_population
        if any(ind.feasible for ind in pop):
            n_feasible_possible = sum(ind.feasible for ind in pop)
            # with feasible members present, no infeasible one may outrank them
            worst_feasible_rank = max(ind.rank for ind in pop if ind.feasible)
            for ind in pop:
                if not ind.feasible:
                    assert ind.rank >= worst_feasible_rank or n_feasible_possible == 0


class TestCsv:
    def test_history_csv_shape(self):
        config = GaConfig(pop_size=8, generations=5, seed=6, hv_reference=(2.0, 2.0))
        result = moea.evolve(quad_problem, 1, config)
        text = moea.history_to_csv(result.history)
        lines = text.strip().split("\n")
        assert lines[0].startswith("generation,")
        assert len(lines) == 7  # header + gen 0..5

    def test_archive_csv_decodes_genes(self):
        config = GaConfig(pop_size=8, generations=5, seed=7)
        result = moea.evolve(quad_problem, 1, config)
        text = moea.archive_to_csv(result.archive, decode=lambda g: 10.0 * g,
                                   objective_names=["f_a", "f_b"])
        lines = text.strip().split("\n")
        assert lines[0] == "g0,f_a,f_b"
        assert len(lines) == len(result.archive) + 1
