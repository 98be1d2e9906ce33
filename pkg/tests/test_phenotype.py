import math

import numpy as np
import pytest

from softvox import seeds
from softvox.cppn import (
    ActivationKind,
    ConnectionGene,
    Cppn,
    Genome,
    NodeGene,
    NodeRole,
    random_genome,
)
from softvox.phenotype import (
    InfeasiblePhenotype,
    Material,
    VoxelBody,
    express,
    map_control,
    normalized_coordinates,
    prune_to_largest_component,
)


def constant_net(out0: float, out1: float) -> Cppn:
    """A net whose outputs are constant on every query.

    0 comes from an Identity output with no incoming edge, +1 from a
    Gaussian one, anything else from a weighted edge off the bias input.
    """
    nodes = [NodeGene(i, NodeRole.INPUT, ActivationKind.IDENTITY) for i in range(5)]
    conns = []
    for out_idx, value in ((5, out0), (6, out1)):
        if value == 0.0:
            nodes.append(NodeGene(out_idx, NodeRole.OUTPUT, ActivationKind.IDENTITY))
        elif value == 1.0:
            nodes.append(NodeGene(out_idx, NodeRole.OUTPUT, ActivationKind.GAUSSIAN))
        else:
            nodes.append(NodeGene(out_idx, NodeRole.OUTPUT, ActivationKind.IDENTITY))
            conns.append(ConnectionGene(4, out_idx, value, True))  # bias is input 4
    return Cppn(tuple(nodes), tuple(conns))


def constant_genome(m0: float, m1: float, c0: float = 0.0, c1: float = 0.0) -> Genome:
    return Genome(constant_net(m0, m1), constant_net(c0, c1), id=0)


def body_from_cells(dims, cells, active=()):
    material = np.zeros(dims, dtype=np.int8)
    for c in cells:
        material[c] = Material.ACTIVE if c in active else Material.PASSIVE
    return VoxelBody(material=material, phase=np.zeros(dims))


class TestCoordinates:
    def test_center_cell_distance_zero(self):
        coords = normalized_coordinates((3, 3, 3))
        center = coords[13]  # cell (1,1,1) in C order
        assert tuple(center[:3]) == (0.0, 0.0, 0.0)
        assert center[3] == 0.0
        assert center[4] == 1.0

    def test_corner_distance_sqrt3(self):
        coords = normalized_coordinates((2, 2, 2))
        corner = coords[-1]
        assert tuple(corner[:3]) == (1.0, 1.0, 1.0)
        assert corner[3] == pytest.approx(math.sqrt(3.0), rel=1e-12)

    def test_single_cell_axis_sits_at_zero(self):
        coords = normalized_coordinates((1, 4, 1))
        assert np.all(coords[:, 0] == 0.0)
        assert np.all(coords[:, 2] == 0.0)


class TestExpress:
    def test_full_active_grid(self):
        ph = express(constant_genome(1.0, 1.0), (4, 3, 2))
        assert ph.body.full_count == 24
        assert ph.body.active_count == 24

    def test_all_empty_is_infeasible(self):
        with pytest.raises(InfeasiblePhenotype):
            express(constant_genome(-1.0, 1.0), (4, 3, 2))

    def test_presence_boundary_inclusive(self):
        # Identity output with no incoming evaluates to exactly 0
        ph = express(constant_genome(0.0, -1.0), (3, 3, 3))
        assert ph.body.full_count == 27
        assert ph.body.active_count == 0

    def test_frequency_within_bounds(self):
        for s in range(30):
            g = random_genome(seeds.rng_for(100, s), 0)
            try:
                ph = express(g, (4, 4, 3), 0.5, 10.0)
            except InfeasiblePhenotype:
                continue
            assert 0.5 <= ph.frequency <= 10.0

    def test_active_cells_are_full_and_empty_carry_no_phase(self):
        for s in range(20):
            g = random_genome(seeds.rng_for(200, s), 0)
            try:
                ph = express(g, (5, 4, 3))
            except InfeasiblePhenotype:
                continue
            active = ph.body.material == Material.ACTIVE
            empty = ph.body.material == Material.EMPTY
            assert np.all(ph.body.material[active] != Material.EMPTY)
            assert np.all(ph.body.phase[empty] == 0.0)
            assert np.all(np.abs(ph.body.phase) <= math.pi)

    def test_expression_deterministic(self):
        g = random_genome(seeds.rng_for(300), 0)
        a = express(g, (4, 4, 4))
        b = express(g, (4, 4, 4))
        assert np.array_equal(a.body.material, b.body.material)
        assert np.array_equal(a.body.phase, b.body.phase)
        assert a.frequency == b.frequency

    def test_pruned_body_connected(self):
        for s in range(20):
            g = random_genome(seeds.rng_for(400, s), 0)
            try:
                ph = express(g, (5, 5, 4))
            except InfeasiblePhenotype:
                continue
            pruned = prune_to_largest_component(ph.body)
            assert pruned.full_count == ph.body.full_count


class TestPrune:
    def test_single_component_unchanged(self):
        body = body_from_cells((4, 1, 1), [(0, 0, 0), (1, 0, 0), (2, 0, 0)])
        assert prune_to_largest_component(body).full_count == 3

    def test_larger_component_wins(self):
        cells = [(0, 0, 0), (0, 1, 0), (0, 2, 0)]  # size 3
        cells += [(3, 0, 0), (3, 1, 0), (3, 2, 0), (3, 3, 0), (3, 4, 0)]  # size 5
        body = body_from_cells((5, 5, 1), cells)
        pruned = prune_to_largest_component(body)
        assert pruned.full_count == 5
        assert pruned.material[3, 0, 0] != Material.EMPTY
        assert pruned.material[0, 0, 0] == Material.EMPTY

    def test_tie_breaks_to_lowest_linear_index(self):
        cells = [(0, 0, 0), (0, 1, 0), (3, 3, 0), (3, 4, 0)]
        body = body_from_cells((5, 5, 1), cells)
        pruned = prune_to_largest_component(body)
        assert pruned.material[0, 0, 0] != Material.EMPTY
        assert pruned.material[3, 3, 0] == Material.EMPTY

    def test_diagonal_contact_is_not_connected(self):
        body = body_from_cells((2, 2, 1), [(0, 0, 0), (1, 1, 0)])
        assert prune_to_largest_component(body).full_count == 1


class TestMapControl:
    def test_zero_maps_to_midpoint(self):
        f, _ = map_control(0.0, 0.0, 0.5, 10.0)
        assert f == pytest.approx((0.5 + 10.0) / 2.0, rel=1e-12)

    def test_phase_clamped(self):
        _, phi = map_control(0.0, 5.0, 0.5, 10.0)
        assert phi == math.pi
        _, phi = map_control(0.0, -5.0, 0.5, 10.0)
        assert phi == -math.pi

    def test_zero_phase(self):
        _, phi = map_control(0.0, 0.0, 0.5, 10.0)
        assert phi == 0.0

    def test_extreme_inputs_stay_bounded(self):
        f, _ = map_control(1e6, 0.0, 0.5, 10.0)
        assert f <= 10.0
        f, _ = map_control(-1e6, 0.0, 0.5, 10.0)
        assert f >= 0.5
