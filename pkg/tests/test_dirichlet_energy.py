"""
Tests for discrete Dirichlet energies, their derivatives, constraint
violation, error norms and convergence orders.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent.parent / 'tools'))

from benchmark_problems import get_problem, initial_coefficients, radial_exact
from dirichlet_energy import (
    DiscretizationKind, _positive_part, constraint_violation, delta1, dirichlet_energy,
    energy_derivatives, eoc, error_norms, nodal_frames, riemannian_gradient,
    riemannian_hessian_apply, riemannian_hessian_matrix, stationarity_residual,
    tangent_to_ambient,
)
from lagrange_space import CoefficientField, interpolate, lagrange_space
from simplicial_mesh import build_uniform_mesh
from sphere_geometry import SingularProjectionError, TangencyError, sphere_exp_rows

NC = DiscretizationKind.NONCONFORMING
PROJ = DiscretizationKind.PROJECTION


def perturbed_p1(level=2, order=1, scale=0.05, seed=3):
    """Problem 1 start plus a small random perturbation, no longer unit."""
    space = lagrange_space(build_uniform_mesh(2, level), order)
    coeffs = initial_coefficients(get_problem('p1'), space)
    rng = np.random.default_rng(seed)
    return coeffs.with_values(coeffs.values + scale * rng.normal(size=coeffs.values.shape))


class TestEnergy:

    def test_problem1_level1_nonconforming(self):
        space = lagrange_space(build_uniform_mesh(2, 1), 1)
        coeffs = initial_coefficients(get_problem('p1'), space)
        assert dirichlet_energy(coeffs, NC) == pytest.approx(8 - 2 * math.sqrt(2), rel=1e-12)

    def test_radial_circle_level1_nonconforming(self):
        space = lagrange_space(build_uniform_mesh(2, 1), 1)
        coeffs = initial_coefficients(get_problem('p2b'), space)
        assert dirichlet_energy(coeffs, 'nc') == pytest.approx(5.17157, abs=1e-5)

    def test_radial_sphere_level1_nonconforming(self, radial_start_3d):
        assert dirichlet_energy(radial_start_3d, NC) == pytest.approx(5.307868, abs=1e-6)

    @pytest.mark.parametrize("problem_id,level,expected,tol", [
        ('p1', 1, 7.500362, 2e-6),
        ('p1', 2, 6.872123, 2e-6),
        ('p2b', 1, 5.609062, 2e-6),
        ('p2a', 1, 7.876073, 2e-6),
        ('p2a', 2, 8.07329, 5e-4),
    ])
    def test_projection_initial_energies(self, problem_id, level, expected, tol):
        problem = get_problem(problem_id)
        space = lagrange_space(build_uniform_mesh(problem.dim, level), 1)
        coeffs = initial_coefficients(problem, space)
        assert dirichlet_energy(coeffs, PROJ) == pytest.approx(expected, abs=tol)

    def test_constant_map_has_zero_energy(self):
        space = lagrange_space(build_uniform_mesh(3, 1), 2)
        coeffs = interpolate(space, lambda x: np.array([0.0, 0.6, 0.8]))
        assert dirichlet_energy(coeffs, NC) == pytest.approx(0.0, abs=1e-14)
        assert dirichlet_energy(coeffs, PROJ) == pytest.approx(0.0, abs=1e-14)

    def test_projection_invariant_under_scaling(self, p1_start):
        scaled = p1_start.with_values(3.0 * p1_start.values)
        assert dirichlet_energy(scaled, PROJ) == pytest.approx(dirichlet_energy(p1_start, PROJ))
        assert dirichlet_energy(scaled, NC) == pytest.approx(9 * dirichlet_energy(p1_start, NC))

    def test_projection_singular_raises(self):
        space = lagrange_space(build_uniform_mesh(2, 1), 1)
        coeffs = CoefficientField(space, np.zeros((space.num_nodes, 3)))
        with pytest.raises(SingularProjectionError) as excinfo:
            dirichlet_energy(coeffs, PROJ)
        assert excinfo.value.element == 0


class TestEuclideanDerivatives:

    @pytest.mark.parametrize("order", [1, 2])
    def test_projected_gradient_finite_differences(self, order):
        coeffs = perturbed_p1(order=order)
        egh = energy_derivatives(coeffs, PROJ)
        assert egh.energy == pytest.approx(dirichlet_energy(coeffs, PROJ), rel=1e-12)
        direction = np.random.default_rng(11).normal(size=coeffs.values.shape)
        eps = 1e-6
        fd = (dirichlet_energy(coeffs.with_values(coeffs.values + eps * direction), PROJ)
              - dirichlet_energy(coeffs.with_values(coeffs.values - eps * direction), PROJ)) / (2 * eps)
        assert np.sum(egh.euclidean_gradient * direction) == pytest.approx(fd, rel=1e-6, abs=1e-8)

    @pytest.mark.parametrize("order", [1, 2])
    def test_projected_hessian_finite_differences(self, order):
        coeffs = perturbed_p1(order=order)
        egh = energy_derivatives(coeffs, PROJ)
        direction = np.random.default_rng(12).normal(size=coeffs.values.shape)
        eps = 1e-6
        plus = energy_derivatives(coeffs.with_values(coeffs.values + eps * direction), PROJ)
        minus = energy_derivatives(coeffs.with_values(coeffs.values - eps * direction), PROJ)
        fd = (plus.euclidean_gradient - minus.euclidean_gradient) / (2 * eps)
        exact = egh.hessian_apply(direction)
        assert np.linalg.norm(exact - fd) <= 1e-5 * max(np.linalg.norm(fd), 1.0)

    def test_projected_hessian_is_symmetric(self):
        egh = energy_derivatives(perturbed_p1(), PROJ)
        assert abs(egh.hessian - egh.hessian.T).max() < 1e-9

    def test_nonconforming_derivatives(self, p1_start):
        egh = energy_derivatives(p1_start, NC)
        stiffness = p1_start.space.stiffness_matrix
        assert np.allclose(egh.euclidean_gradient, stiffness @ p1_start.values)
        direction = np.random.default_rng(1).normal(size=p1_start.values.shape)
        assert np.allclose(egh.hessian_apply(direction), stiffness @ direction)


class TestRiemannianDerivatives:

    @pytest.mark.parametrize("kind", [NC, PROJ])
    def test_gradient_is_tangent_and_vanishes_on_boundary(self, p1_start, kind):
        egh = energy_derivatives(p1_start, kind)
        frames = nodal_frames(p1_start)
        grad = riemannian_gradient(p1_start, egh, frames)
        space = p1_start.space
        assert grad.shape == (space.num_nodes, 2)
        assert np.all(grad[space.boundary_node_flags] == 0.0)
        ambient = tangent_to_ambient(frames, grad, ~space.boundary_node_flags)
        assert np.allclose(np.einsum('im,im->i', ambient, p1_start.values), 0.0)

    @pytest.mark.parametrize("kind", [NC, PROJ])
    def test_gradient_matches_geodesic_derivative(self, p1_start, kind):
        frames = nodal_frames(p1_start)
        egh = energy_derivatives(p1_start, kind)
        grad = riemannian_gradient(p1_start, egh, frames)
        space = p1_start.space
        free = ~space.boundary_node_flags
        w = np.random.default_rng(5).normal(size=grad.shape)
        w[~free] = 0.0
        step = tangent_to_ambient(frames, w, free)

        def energy_along(t):
            values = sphere_exp_rows(p1_start.values, t * step)
            return dirichlet_energy(p1_start.with_values(values), kind)

        t = 1e-5
        fd = (energy_along(t) - energy_along(-t)) / (2 * t)
        assert np.sum(grad * w) == pytest.approx(fd, rel=1e-5, abs=1e-8)

    @pytest.mark.parametrize("kind", [NC, PROJ])
    def test_hessian_matches_geodesic_second_derivative(self, p1_start, kind):
        frames = nodal_frames(p1_start)
        egh = energy_derivatives(p1_start, kind)
        space = p1_start.space
        free = ~space.boundary_node_flags
        w = np.random.default_rng(6).normal(size=(space.num_nodes, 2))
        w[~free] = 0.0
        step = tangent_to_ambient(frames, w, free)

        def energy_along(t):
            values = sphere_exp_rows(p1_start.values, t * step)
            return dirichlet_energy(p1_start.with_values(values), kind)

        t = 1e-4
        fd = (energy_along(t) - 2 * energy_along(0.0) + energy_along(-t)) / t ** 2
        quadratic = np.sum(w * riemannian_hessian_apply(p1_start, egh, w, frames))
        assert quadratic == pytest.approx(fd, rel=1e-4, abs=1e-6)

    @pytest.mark.parametrize("kind", [NC, PROJ])
    def test_matrix_and_apply_agree(self, p1_start, kind):
        frames = nodal_frames(p1_start)
        egh = energy_derivatives(p1_start, kind)
        space = p1_start.space
        free = space.free_nodes
        w = np.zeros((space.num_nodes, 2))
        w[free] = np.random.default_rng(8).normal(size=(free.size, 2))
        matrix = riemannian_hessian_matrix(p1_start, egh, frames)
        applied = riemannian_hessian_apply(p1_start, egh, w, frames)
        assert np.allclose(matrix @ w[free].ravel(), applied[free].ravel())

    def test_frames_need_unit_values(self, p1_start):
        with pytest.raises(TangencyError, match="not unit"):
            nodal_frames(p1_start.with_values(2.0 * p1_start.values))

    def test_stationary_center_node(self):
        space = lagrange_space(build_uniform_mesh(2, 1), 1)
        coeffs = initial_coefficients(get_problem('p1'), space)
        assert stationarity_residual(coeffs, NC) == pytest.approx(0.0, abs=1e-12)


class TestConstraintViolation:

    def test_unit_field_has_no_violation(self, p1_start):
        assert constraint_violation(p1_start) == (pytest.approx(0.0, abs=1e-14),
                                                  pytest.approx(0.0, abs=1e-14))

    @pytest.mark.parametrize("order", [1, 2])
    def test_uniform_scaling(self, order):
        space = lagrange_space(build_uniform_mesh(2, 1), order)
        coeffs = interpolate(space, lambda x: np.array([0.0, 2.0, 0.0]))
        delta, squared = constraint_violation(coeffs)
        assert delta == pytest.approx(1.0)
        assert squared == pytest.approx(3.0)

    def test_single_short_node(self):
        space = lagrange_space(build_uniform_mesh(2, 1), 1)
        values = np.tile([1.0, 0.0, 0.0], (space.num_nodes, 1))
        values[4] = [0.5, 0.0, 0.0]
        # hat function of the center node integrates to 6 * (1/8) / 3
        assert delta1(CoefficientField(space, values)) == pytest.approx(0.5 * 0.25)

    def test_positive_part_corner_formula(self):
        assert _positive_part(np.array([1.0, -1.0, -1.0]), 1.0) == pytest.approx(1.0 / 12.0)

    @given(st.lists(st.floats(min_value=-3, max_value=3, allow_nan=False),
                    min_size=4, max_size=4))
    def test_positive_minus_negative_part_is_mean(self, values):
        values = np.array(values)
        plus = _positive_part(values, 0.7)
        minus = _positive_part(-values, 0.7)
        assert plus >= -1e-12 and minus >= -1e-12
        assert plus - minus == pytest.approx(0.7 * values.mean(), abs=1e-9)

    def test_two_two_split_symmetric(self):
        plus = _positive_part(np.array([1.0, 1.0, -1.0, -1.0]), 1.0)
        assert plus == pytest.approx(_positive_part(np.array([-1.0, -1.0, 1.0, 1.0]), 1.0))
        assert 0.0 < plus < 0.5


class TestErrorNorms:

    @pytest.mark.parametrize("kind", [NC, PROJ])
    def test_identical_fields(self, p1_start, kind):
        l2, h1 = error_norms((p1_start, kind), (p1_start, kind))
        assert l2 == pytest.approx(0.0, abs=1e-12)
        assert h1 == pytest.approx(0.0, abs=1e-10)

    def test_linear_map_exact(self):
        space = lagrange_space(build_uniform_mesh(2, 2), 1)

        def exact(points):
            values = np.stack([points[:, 0], 2 * points[:, 1]], axis=1)
            grads = np.broadcast_to(np.diag([1.0, 2.0]), (len(points), 2, 2))
            return values, grads

        coeffs = interpolate(space, lambda x: exact(x)[0], vectorized=True)
        l2, h1 = error_norms((coeffs, NC), exact)
        assert l2 == pytest.approx(0.0, abs=1e-13)
        assert h1 == pytest.approx(0.0, abs=1e-12)

    def test_nested_coarse_interpolant(self):
        f = lambda x: np.stack([x[:, 0] + x[:, 1], np.ones(len(x))], axis=1)
        coarse = interpolate(lagrange_space(build_uniform_mesh(2, 1), 1), f, vectorized=True)
        fine = interpolate(lagrange_space(build_uniform_mesh(2, 3), 2), f, vectorized=True)
        l2, h1 = error_norms((fine, NC), (coarse, NC))
        assert l2 == pytest.approx(0.0, abs=1e-13)
        assert h1 == pytest.approx(0.0, abs=1e-12)

    def test_radial_interpolation_error_decreases(self):
        errors = []
        for level in (1, 2):
            space = lagrange_space(build_uniform_mesh(3, level), 1)
            coeffs = initial_coefficients(get_problem('p2a'), space)
            errors.append(error_norms((coeffs, NC), radial_exact))
        assert errors[1][0] < errors[0][0]
        assert errors[1][1] < errors[0][1]


class TestEoc:

    def test_halving_errors(self):
        assert eoc([4.0, 2.0, 1.0]) == [pytest.approx(1.0), pytest.approx(1.0)]

    def test_quadratic(self):
        assert eoc([1.0, 0.25]) == [pytest.approx(2.0)]

    def test_too_few_errors(self):
        with pytest.raises(ValueError, match="at least two"):
            eoc([1.0])

    def test_nonpositive_errors(self):
        with pytest.raises(ValueError, match="positive"):
            eoc([1.0, 0.0])
