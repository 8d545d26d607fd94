import numpy as np
import pytest

import kincell as kc

from conftest import random_box


def test_domain_spec_rejects_bad_values():
    with pytest.raises(ValueError):
        kc.DomainSpec(energy_cap=0.0, n_per_axis=2)
    with pytest.raises(ValueError):
        kc.DomainSpec(energy_cap=-1.0, n_per_axis=2)
    with pytest.raises(ValueError):
        kc.DomainSpec(energy_cap=3.0, n_per_axis=0)


def test_single_cell_partition_covers_cube():
    p = kc.build_uniform_partition(kc.DomainSpec(energy_cap=3.0, n_per_axis=1))
    assert p.n_cells == 1
    root3 = np.sqrt(3.0)
    assert np.allclose(p.cells[0].lower, -root3)
    assert np.allclose(p.cells[0].upper, root3)


def test_octant_partition_tiles_cube():
    p = kc.build_uniform_partition(kc.DomainSpec(energy_cap=3.0, n_per_axis=2))
    assert p.n_cells == 8
    root3 = np.sqrt(3.0)
    vols = p.volumes
    assert np.allclose(vols, vols[0])
    assert abs(vols.sum() - (2 * root3) ** 3) <= 1e-14 * (2 * root3) ** 3
    # congruent octants: every corner of the cube is some cell's corner
    assert np.allclose(p.bbox_lower, -root3) and np.allclose(p.bbox_upper, root3)


def test_locate_center_cell_by_brute_force():
    p = kc.build_uniform_partition(kc.DomainSpec(energy_cap=1.0, n_per_axis=3))
    assert p.n_cells == 27
    origin = np.zeros(3)
    hits = [c.index for c in p.cells if c.contains(origin)]
    assert len(hits) == 1
    assert p.locate(origin) == hits[0]


def test_locate_outside_domain():
    p = kc.build_uniform_partition(kc.DomainSpec(energy_cap=3.0, n_per_axis=2))
    h = p.domain.half_width
    assert p.locate((2 * h, 0.0, 0.0)) is None
    assert p.locate((h * 1.1, h * 1.1, h * 1.1)) is None


def test_locate_cell_centers():
    p = kc.build_uniform_partition(kc.DomainSpec(energy_cap=9.0, n_per_axis=3))
    for cell in p.cells:
        assert p.locate(cell.center) == cell.index


def test_boundary_point_assigned_to_exactly_one_cell():
    p = kc.build_uniform_partition(kc.DomainSpec(energy_cap=3.0, n_per_axis=2))
    shared = np.array([0.0, 0.5, -0.5])  # on the face between two octants
    hits = [c.index for c in p.cells if c.contains(shared)]
    assert len(hits) == 1
    assert p.locate(shared) == hits[0]


def test_top_face_closed():
    p = kc.build_uniform_partition(kc.DomainSpec(energy_cap=4.0, n_per_axis=2))
    h = p.domain.half_width
    idx = p.locate((h, h, h))
    assert idx == p.n_cells - 1


def test_exact_tiling_random_points():
    p = kc.build_uniform_partition(kc.DomainSpec(energy_cap=5.0, n_per_axis=3))
    rng = np.random.default_rng(2)
    h = p.domain.half_width
    pts = rng.uniform(-h, h, size=(100000, 3))
    idx = p.locate_many(pts)
    assert np.all(idx >= 0)
    # agreement with the half-open membership rule
    scan_hits = np.zeros(len(pts), dtype=int)
    for cell in p.cells:
        inside = np.all(pts >= cell.lower, axis=1) & np.all(pts < cell.upper, axis=1)
        scan_hits += inside
        assert np.all(idx[inside] == cell.index)
    assert np.all(scan_hits == 1)
    vol = p.volumes.sum()
    assert abs(vol - (2 * h) ** 3) <= 1e-14 * (2 * h) ** 3


def test_box_moment_volume(unit_cube_cell):
    assert kc.box_monomial_moment(unit_cube_cell, (0, 0, 0)) == pytest.approx(8.0, rel=1e-15)


def test_box_moment_quadratic(unit_cube_cell):
    assert kc.box_monomial_moment(unit_cube_cell, (2, 0, 0)) == pytest.approx(8.0 / 3.0, rel=1e-15)


def test_box_moment_odd_vanishes(unit_cube_cell):
    assert kc.box_monomial_moment(unit_cube_cell, (1, 0, 0)) == 0.0


def test_box_moment_against_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(20):
        cell = random_box(rng)
        for _ in range(5):
            expo = tuple(rng.integers(0, 6, size=3))
            exact = kc.box_monomial_moment(cell, expo)
            quad = kc.oracle_cell_integral(cell, {expo: 1.0}, order=8)
            assert exact == pytest.approx(quad, rel=1e-12, abs=1e-14)


def test_box_moment_rejects_unsupported_exponent(unit_cube_cell):
    with pytest.raises(ValueError):
        kc.box_monomial_moment(unit_cube_cell, (9, 0, 0))
    with pytest.raises(ValueError):
        kc.box_monomial_moment(unit_cube_cell, (-1, 0, 0))


def test_custom_partition_checks_tiling():
    with pytest.raises(ValueError):
        kc.Partition.from_cells(
            [((-1, -1, -1), (0.2, 1, 1)), ((0, -1, -1), (1, 1, 1))], energy_cap=1.0)
    with pytest.raises(ValueError):
        kc.Partition.from_cells(
            [((-1, -1, -1), (-0.5, 1, 1)), ((0, -1, -1), (1, 1, 1))], energy_cap=1.0)


def test_custom_partition_ball_cover():
    bounds = [((-1, -1, -1), (0, 1, 1)), ((0, -1, -1), (1, 1, 1))]
    with pytest.raises(ValueError):
        kc.Partition.from_cells(bounds, energy_cap=2.0)
    p = kc.Partition.from_cells(bounds, energy_cap=2.0, require_ball_cover=False)
    assert p.n_cells == 2


def test_partition_text_round_trip(partition_2cube, partition_split):
    for p in (partition_2cube, partition_split):
        q = kc.Partition.from_text(p.to_text())
        assert q.content_hash == p.content_hash
        assert np.array_equal(q.lowers, p.lowers)


def test_content_hash_deterministic():
    a = kc.build_uniform_partition(kc.DomainSpec(energy_cap=3.0, n_per_axis=2))
    b = kc.build_uniform_partition(kc.DomainSpec(energy_cap=3.0, n_per_axis=2))
    c = kc.build_uniform_partition(kc.DomainSpec(energy_cap=3.0, n_per_axis=3))
    assert a.content_hash == b.content_hash
    assert a.content_hash != c.content_hash


def test_slab_axis_detection(partition_split, partition_2cube):
    axis, edges, order = partition_split.slab_axis()
    assert axis == 0
    assert np.allclose(edges, [-1.0, 0.0, 1.0])
    assert list(order) == [0, 1]
    assert partition_2cube.slab_axis() is None
