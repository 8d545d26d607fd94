"""Shared fixtures: small partitions and precomputed tensors reused across tests."""

import numpy as np
import pytest

import kincell as kc

ACCEPTANCE_LINES = []


def record_acceptance(number, name, detail, passed):
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append((number, f"ACCEPTANCE {number} {name}: {detail} [{status}]"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def hard_sphere():
    return kc.ScatteringModel()


@pytest.fixture(scope="session")
def unit_cube_cell():
    return kc.Cell(0, (-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def partition_2cube():
    """2x2x2 uniform partition of the E=9 domain."""
    return kc.build_uniform_partition(kc.DomainSpec(energy_cap=9.0, n_per_axis=2))


@pytest.fixture(scope="session")
def duals_2cube(partition_2cube):
    return kc.build_dual_bases(partition_2cube)


@pytest.fixture(scope="session")
def tensor_2cube(partition_2cube, duals_2cube, hard_sphere):
    """Criterion-3 configuration: hard sphere C=1, S=1e4, fixed seed."""
    return kc.collision_tensor_mc(
        partition_2cube, duals_2cube, hard_sphere,
        kc.McConfig(seed=42, samples_per_pair=10000))


@pytest.fixture(scope="session")
def drift_2cube(partition_2cube, duals_2cube):
    return kc.drift_tensor(partition_2cube, duals_2cube)


@pytest.fixture(scope="session")
def partition_split():
    """[-1, 1]^3 split at xi1 = 0, E = 1: the two-cell oracle testbed."""
    return kc.Partition.from_cells(
        [((-1, -1, -1), (0, 1, 1)), ((0, -1, -1), (1, 1, 1))], energy_cap=1.0)


@pytest.fixture(scope="session")
def duals_split(partition_split):
    return kc.build_dual_bases(partition_split)


@pytest.fixture(scope="session")
def mc_split_1e5(partition_split, duals_split, hard_sphere):
    return kc.collision_tensor_mc(
        partition_split, duals_split, hard_sphere,
        kc.McConfig(seed=11, samples_per_pair=100000))


@pytest.fixture(scope="session")
def quad_split(partition_split, duals_split, hard_sphere):
    """Converged oracle tensor for the split partition."""
    return kc.collision_tensor_quadrature(
        partition_split, duals_split, hard_sphere,
        kc.QuadratureSpec(cell_order=14, panel_order=10))


def dense_tensor(tensor, n_cells):
    """Expand a sparse collision tensor to a dense (N,N,N,5,5,5) array."""
    out = np.zeros((n_cells, n_cells, n_cells, 5, 5, 5))
    for pos, (a, b, g) in enumerate(tensor.block_index):
        out[a, b, g] = tensor.values[pos]
    return out


def dense_errors(tensor, n_cells):
    out = np.zeros((n_cells, n_cells, n_cells, 5, 5, 5))
    for pos, (a, b, g) in enumerate(tensor.block_index):
        out[a, b, g] = tensor.std_errors[pos]
    return out


def random_box(rng, center_scale=3.0, min_width=0.4, max_width=2.5):
    center = rng.uniform(-center_scale, center_scale, size=3)
    half = 0.5 * rng.uniform(min_width, max_width, size=3)
    return kc.Cell(0, center - half, center + half)
