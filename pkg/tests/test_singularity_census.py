"""
Tests for point singularity detection and topological degrees.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / 'tools'))

from benchmark_problems import get_problem, initial_coefficients
from lagrange_space import interpolate, lagrange_space
from simplicial_mesh import build_uniform_mesh
from singularity_census import (OUTWARD_FACES, boundary_faces, flag_elements, hull_distance,
                                singularity_census, solid_angles)


@pytest.fixture
def radial_level2():
    space = lagrange_space(build_uniform_mesh(3, 2), 1)
    return initial_coefficients(get_problem('p2a'), space)


class TestGeometryHelpers:

    def test_hull_distance(self):
        assert hull_distance(np.array([[2.0, 0.0, 0.0]])) == pytest.approx(2.0)
        assert hull_distance(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])) == pytest.approx(0.0)
        assert hull_distance(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])) == pytest.approx(
            1 / math.sqrt(2))
        assert hull_distance(np.eye(3)) == pytest.approx(1 / math.sqrt(3))

    def test_octant_solid_angle(self):
        angle = solid_angles(np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]),
                             np.array([[0, 0, 1.0]]))
        assert angle[0] == pytest.approx(math.pi / 2)

    def test_orientation_flips_sign(self):
        a, b, c = np.eye(3)[:, None, :]
        assert solid_angles(a, c, b)[0] == pytest.approx(-math.pi / 2)

    def test_outward_faces_of_reference_tetrahedron(self):
        vertices = np.vstack([np.zeros(3), np.eye(3)])
        centroid = vertices.mean(axis=0)
        for face in OUTWARD_FACES:
            p, q, r = vertices[face]
            normal = np.cross(q - p, r - p)
            assert normal @ (p - centroid) > 0

    def test_boundary_faces_of_whole_cube(self):
        mesh = build_uniform_mesh(3, 1)
        faces = boundary_faces(mesh, np.arange(mesh.num_elements))
        assert len(faces) == 6 * 2 * 4
        assert np.all(mesh.boundary_vertex_flags[faces])


class TestSingularityCensus:

    def test_radial_map_has_one_degree_one_singularity(self, radial_level2):
        found = singularity_census(radial_level2)
        assert len(found) == 1
        assert found[0].degree == 1
        assert np.linalg.norm(found[0].location) < radial_level2.space.mesh.spacing
        assert found[0].to_dict()['degree'] == 1

    def test_reflected_radial_map_has_degree_minus_one(self, radial_level2):
        reflected = radial_level2.with_values(-radial_level2.values)
        found = singularity_census(reflected)
        assert [s.degree for s in found] == [-1]

    def test_flagged_elements_touch_the_origin(self, radial_level2):
        mesh = radial_level2.space.mesh
        origin = int(mesh.lattice_index(np.zeros((1, 3)))[0])
        flagged = flag_elements(radial_level2)
        assert flagged.size > 0
        assert np.all(np.any(mesh.elements[flagged] == origin, axis=1))

    def test_constant_map_has_none(self):
        space = lagrange_space(build_uniform_mesh(3, 1), 1)
        coeffs = interpolate(space, lambda x: np.array([0.0, 0.0, 1.0]))
        assert singularity_census(coeffs) == []

    @pytest.mark.parametrize("dim,order", [(2, 1), (3, 2)])
    def test_unsupported_fields(self, dim, order):
        space = lagrange_space(build_uniform_mesh(dim, 1), order)
        coeffs = interpolate(space, lambda x: np.array([0.0, 0.0, 1.0]))
        with pytest.raises(ValueError, match="census"):
            singularity_census(coeffs)
