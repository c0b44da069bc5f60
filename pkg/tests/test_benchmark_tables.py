"""
Longer sweeps that reproduce the published benchmark tables. Run with:

    pytest tests/test_benchmark_tables.py --run-slow
"""

import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / 'tools'))

from run_benchmark import RunConfig, run_benchmark

pytestmark = pytest.mark.slow

SMOOTH_NC_ENERGIES = [5.17157, 5.99636, 6.2901, 6.36396]
SMOOTH_GF_ITERATIONS = {2: 13, 3: 16, 4: 27, 5: 50, 6: 94}
SMOOTH_GF_VIOLATION = {
    2: 0.0014631073253257572,
    3: 0.002351630087537769,
    4: 0.0014228085729537986,
    5: 0.0007734864655809823,
    6: 0.0004048625484692703,
}
RADIAL_SPHERE_ENERGIES = {
    'nc': [5.30787, 6.27978, 6.93303, 7.29099],
    'proj': [7.85756, 7.66993, 7.70757],
}
RADIAL_CIRCLE_ENERGY_R5 = {'nc': 13.1187, 'proj': 13.1143}


def finite(values):
    return [v for v in values if not math.isnan(v)]


class TestSmoothProblem:

    def test_nonconforming_energies(self):
        report = run_benchmark(RunConfig(problem='p1', discretization='nc', solver='tr',
                                         level_max=4))
        assert [row.E for row in report.rows] == [
            pytest.approx(e, abs=1e-3) for e in SMOOTH_NC_ENERGIES]

    @pytest.mark.parametrize("discretization", ['nc', 'proj'])
    @pytest.mark.parametrize("order,level_max", [(1, 5), (2, 4)])
    def test_trust_region_iterations(self, discretization, order, level_max):
        report = run_benchmark(RunConfig(problem='p1', discretization=discretization,
                                         solver='tr', order=order, level_max=level_max))
        assert report.success
        for row in report.rows[1:]:
            assert row.iters <= 5, f"r={row.r}: {row.iters} iterations"
            assert row.converged

    @pytest.mark.parametrize("discretization", ['nc', 'proj'])
    def test_trust_region_energies_converge(self, discretization):
        report = run_benchmark(RunConfig(problem='p1', discretization=discretization,
                                         solver='tr', level_max=5))
        differences = finite([row.errH1 for row in report.rows])
        assert all(b < a for a, b in zip(differences, differences[1:]))
        assert all(rate > 0.5 for rate in finite([row.eocH1 for row in report.rows]))

    def test_gradient_flow_iterations_and_violation(self):
        report = run_benchmark(RunConfig(problem='p1', solver='gf', level_max=6))
        rows = {row.r: row for row in report.rows}
        assert rows[1].iters == 1
        for level, expected in SMOOTH_GF_ITERATIONS.items():
            assert 0.75 * expected <= rows[level].iters <= 1.25 * expected
            assert rows[level].squared_violation == pytest.approx(
                SMOOTH_GF_VIOLATION[level], rel=1e-4)
        for level in (5, 6):
            assert 1.5 <= rows[level].iters / rows[level - 1].iters <= 2.5
        for level in (4, 5, 6):
            assert 1.5 <= rows[level - 1].squared_violation / rows[level].squared_violation <= 2.5
        for row in report.rows:
            assert row.max_squared_violation <= row.tau * row.E0

    def test_second_order_faster_than_first(self):
        p1 = run_benchmark(RunConfig(problem='p1', order=1, level_max=4))
        p2 = run_benchmark(RunConfig(problem='p1', order=2, level_max=4))
        assert p2.rows[-1].errL2 < p1.rows[-1].errL2


class TestRadialProblems:

    @pytest.mark.parametrize("discretization", ['nc', 'proj'])
    def test_radial_sphere_energies(self, discretization):
        expected = RADIAL_SPHERE_ENERGIES[discretization]
        report = run_benchmark(RunConfig(problem='p2a', discretization=discretization,
                                         solver='tr', level_max=len(expected)))
        assert report.success
        for row, energy in zip(report.rows, expected):
            assert row.E == pytest.approx(energy, rel=1e-2)
            assert [s['degree'] for s in row.singularities] == [1]
        if discretization == 'nc':
            energies = [row.E for row in report.rows]
            assert all(a < b < 7.674124 for a, b in zip(energies, energies[1:]))

    def test_radial_sphere_errors_decrease(self):
        report = run_benchmark(RunConfig(problem='p2a', solver='tr', level_max=3))
        errors = [row.errH1 for row in report.rows]
        assert all(b < a for a, b in zip(errors, errors[1:]))
        exact = report.metadata['exact_energy']
        assert abs(report.rows[-1].E - exact) < abs(report.rows[0].E - exact)

    @pytest.mark.parametrize("discretization", ['nc', 'proj'])
    def test_radial_circle(self, discretization):
        report = run_benchmark(RunConfig(problem='p2b', discretization=discretization,
                                         solver='tr', level_max=5))
        assert report.success
        energies = [row.E for row in report.rows]
        assert all(b > a for a, b in zip(energies, energies[1:]))
        assert energies[-1] == pytest.approx(RADIAL_CIRCLE_ENERGY_R5[discretization], abs=0.05)
        for row in report.rows:
            assert row.iters <= 12, f"r={row.r}: {row.iters} iterations"

    def test_random_start_reaches_radial_map(self):
        report = run_benchmark(RunConfig(problem='p2a-random', solver='tr', level_max=2))
        assert report.success
        assert report.rows[-1].E < report.rows[-1].E0


class TestDegreeProblems:

    @pytest.mark.parametrize("kappa", [2, 3, 4, 5])
    def test_singularities_split(self, kappa):
        report = run_benchmark(RunConfig(problem=f'p3k{kappa}', discretization='nc',
                                         solver='tr', tr_norm='lumped', level_min=3,
                                         level_max=3))
        assert report.success
        degrees = [s['degree'] for s in report.rows[0].singularities]
        assert degrees == [1] * kappa
