import numpy as np
import pytest

from softvox.drag import apply_drag, extract_surface_mesh, facet_drag_force
from softvox.lattice import (
    EnvironmentSpec,
    MaterialParams,
    build_lattice,
    control_schedule,
    simulate,
    stable_timestep,
    step,
)
from softvox.phenotype import Material, VoxelBody

L = 0.01
MAT = MaterialParams(elastic_modulus=0.1e6)
WATER = EnvironmentSpec.water()


def body_from_cells(dims, cells):
    material = np.zeros(dims, dtype=np.int8)
    for c in cells:
        material[c] = Material.PASSIVE
    return VoxelBody(material=material, phase=np.zeros(dims))


def full_body(dims):
    return VoxelBody(
        material=np.full(dims, Material.PASSIVE, dtype=np.int8), phase=np.zeros(dims)
    )


class TestSurfaceExtraction:
    def test_isolated_voxel_has_twelve_facets(self):
        body = body_from_cells((1, 1, 1), [(0, 0, 0)])
        mesh = extract_surface_mesh(body, build_lattice(body, MAT))
        assert len(mesh) == 12

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_cube_scaling(self, n):
        body = full_body((n, n, n))
        mesh = extract_surface_mesh(body, build_lattice(body, MAT))
        assert len(mesh) == 12 * n * n

    def test_domino_has_twenty_facets(self):
        body = body_from_cells((2, 1, 1), [(0, 0, 0), (1, 0, 0)])
        mesh = extract_surface_mesh(body, build_lattice(body, MAT))
        assert len(mesh) == 20

    def test_facet_geometry_at_rest(self):
        body = body_from_cells((1, 1, 1), [(0, 0, 0)])
        state = build_lattice(body, MAT)
        mesh = extract_surface_mesh(body, state)
        for facet in mesh.facets:
            assert facet.area == pytest.approx(L * L / 2, rel=1e-12)
            assert np.linalg.norm(facet.outward_normal) == pytest.approx(1.0, abs=1e-12)
            # outward means away from the voxel center
            to_center = facet.vertices.mean(axis=0) - state.position[0]
            assert to_center @ facet.outward_normal > 0
        total = sum(f.area for f in mesh.facets)
        assert total == pytest.approx(6 * L * L, rel=1e-12)

    def test_area_sums_match_exposed_faces(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            grid = (rng.random((3, 3, 3)) < 0.6).astype(np.int8)
            if grid.sum() == 0:
                continue
            body = VoxelBody(material=grid, phase=np.zeros((3, 3, 3)))
            mesh = extract_surface_mesh(body, build_lattice(body, MAT))
            assert len(mesh) % 2 == 0
            total = sum(f.area for f in mesh.facets)
            assert total == pytest.approx(len(mesh) / 2 * L * L, rel=1e-12)

    def test_deformed_corner_follows_neighbor_midpoint(self):
        body = body_from_cells((2, 1, 1), [(0, 0, 0), (1, 0, 0)])
        state = build_lattice(body, MAT)
        state.position[1, 0] += 0.002  # stretch along x
        mesh = extract_surface_mesh(body, state)
        xs = np.concatenate([f.vertices[:, 0] for f in mesh.facets if f.owner_voxel == 0])
        # voxel 0 corners on the +x side sit at the bond midpoint
        assert xs.max() == pytest.approx(
            0.5 * (state.position[0, 0] + state.position[1, 0]), rel=1e-12
        )


class TestFacetDrag:
    def _single_voxel(self):
        body = body_from_cells((1, 1, 1), [(0, 0, 0)])
        state = build_lattice(body, MAT)
        return body, state, extract_surface_mesh(body, state)

    def test_reference_magnitude(self):
        _, _, mesh = self._single_voxel()
        facet = next(f for f in mesh.facets if f.outward_normal[0] > 0.9)
        force = facet_drag_force(facet, np.array([1.0, 0.0, 0.0]), 1000.0, 1.5)
        assert np.linalg.norm(force) == pytest.approx(0.0375, rel=1e-9)
        assert force @ facet.outward_normal < 0

    def test_quadratic_scaling_exact(self):
        _, _, mesh = self._single_voxel()
        facet = mesh.facets[0]
        v = np.array([0.4, -0.2, 0.3])
        f1 = facet_drag_force(facet, v, 1000.0, 1.5)
        f2 = facet_drag_force(facet, 2.0 * v, 1000.0, 1.5)
        assert np.array_equal(f2, 4.0 * f1)

    def test_tangential_and_receding_motion_free(self):
        _, _, mesh = self._single_voxel()
        facet = next(f for f in mesh.facets if f.outward_normal[2] > 0.9)
        assert np.all(facet_drag_force(facet, np.array([1.0, 0, 0]), 1000.0, 1.5) == 0)
        assert np.all(facet_drag_force(facet, np.array([0, 0, -1.0]), 1000.0, 1.5) == 0)
        assert np.all(facet_drag_force(facet, np.zeros(3), 1000.0, 1.5) == 0)


class TestApplyDrag:
    def test_rest_body_feels_nothing(self):
        body = full_body((2, 2, 2))
        state = build_lattice(body, MAT)
        mesh = extract_surface_mesh(body, state)
        assert np.all(apply_drag(mesh, state, WATER) == 0.0)

    def test_translating_voxel_net_force(self):
        body = body_from_cells((1, 1, 1), [(0, 0, 0)])
        state = build_lattice(body, MAT)
        state.velocity[0] = (1.0, 0.0, 0.0)
        mesh = extract_surface_mesh(body, state)
        force = apply_drag(mesh, state, WATER)
        assert force[0, 0] == pytest.approx(-0.075, rel=1e-9)
        assert force[0, 1] == pytest.approx(0.0, abs=1e-15)
        assert force[0, 2] == pytest.approx(0.0, abs=1e-15)

    def test_matches_per_facet_summation(self):
        rng = np.random.default_rng(3)
        grid = (rng.random((3, 3, 2)) < 0.7).astype(np.int8)
        grid[0, 0, 0] = 1
        body = VoxelBody(material=grid, phase=np.zeros((3, 3, 2)))
        state = build_lattice(body, MAT)
        state.velocity[:] = rng.normal(0, 0.5, state.velocity.shape)
        mesh = extract_surface_mesh(body, state)
        got = apply_drag(mesh, state, WATER)
        expected = np.zeros_like(got)
        for facet in mesh.facets:
            expected[facet.owner_voxel] += facet_drag_force(
                facet, state.velocity[facet.owner_voxel], 1000.0, 1.5
            )
        assert np.array_equal(got, expected)

    def test_land_mode_rejected(self):
        body = full_body((2, 1, 1))
        state = build_lattice(body, MAT)
        mesh = extract_surface_mesh(body, state)
        with pytest.raises(ValueError):
            apply_drag(mesh, state, EnvironmentSpec.land())


class TestKernelConsistency:
    def test_fused_loop_matches_public_composition(self):
        rng = np.random.default_rng(5)
        grid = (rng.random((3, 3, 2)) < 0.7).astype(np.int8)
        grid[1, 1, 0] = 1
        from softvox.phenotype import prune_to_largest_component

        body = prune_to_largest_component(
            VoxelBody(material=grid, phase=np.zeros((3, 3, 2)))
        )
        ctrl = control_schedule(body, 3.0)
        dt = stable_timestep(build_lattice(body, MAT))

        fused = build_lattice(body, MAT)
        fused.velocity[:] = rng.normal(0, 0.3, fused.velocity.shape)
        v0 = fused.velocity.copy()
        simulate(fused, dt, 40, WATER, ctrl, MAT, drag_every=1)

        manual = build_lattice(body, MAT)
        manual.velocity[:] = v0
        for _ in range(40):
            mesh = extract_surface_mesh(body, manual)
            force = apply_drag(mesh, manual, WATER)
            manual = step(manual, dt, WATER, ctrl, external=force, mat=MAT)

        assert np.allclose(fused.position, manual.position, rtol=0, atol=1e-12)
        assert np.allclose(fused.velocity, manual.velocity, rtol=1e-9, atol=1e-12)
