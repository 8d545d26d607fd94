"""Constant coefficient tensors of the closed moment system.

Drift arrays are exact box integrals. Collision blocks are estimated by
Monte Carlo with one shared sample stream per ordered cell pair: every
sample scatters its four bracket terms (+ at the two post-collision
cells, - at the two source cells) with a common weight, so summing the
stored blocks over the target-cell index cancels per sample and the
discrete conservation identity holds to accumulation rounding, no matter
how few samples are used. Blocks accumulate in extended precision and
are stored as float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import (
    DualBasisSet,
    _PSI_MONOS,
    collision_invariants,
    evaluate_dual,
    invariant_pair_integral,
)
from .errors import HashMismatch
from .geometry import Partition
from .kinematics import ScatteringModel, energy_cutoff, post_collision, scattering_rate

__all__ = [
    "DriftTensor",
    "drift_tensor",
    "McConfig",
    "CollisionTensor",
    "collision_tensor_mc",
]

_UNIT = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


@dataclass(frozen=True)
class DriftTensor:
    """Per-cell drift arrays a[k, j] (3-vectors).

    values[i, k, j, l] is the l-th component of the array coupling the
    k-th moment's gradient into the j-th moment equation of cell i:
    the expansion coefficient of xi_l * psi_j on psi_k in cell i.
    """

    values: np.ndarray  # (N, 5, 5, 3)
    partition_hash: str

    def axis_matrix(self, cell_index: int, axis: int) -> np.ndarray:
        """Transport matrix M with M[j, k] = a[k, j] . e_axis."""
        return self.values[cell_index, :, :, axis].T

    def check_partition(self, partition: Partition):
        if self.partition_hash != partition.content_hash:
            raise HashMismatch("drift tensor was built for a different partition")


def drift_tensor(partition: Partition, duals: DualBasisSet) -> DriftTensor:
    """Exact drift arrays a[k, j] = int eta_k * xi * psi_j over each cell."""
    duals.check_partition(partition)
    n = partition.n_cells
    values = np.empty((n, 5, 5, 3))
    for cell in partition.cells:
        d = duals.matrices[cell.index]
        for axis in range(3):
            extra = {_UNIT[axis]: 1.0}
            s = np.empty((5, 5))
            for p in range(5):
                for j in range(5):
                    s[p, j] = invariant_pair_integral(cell, p, j, extra=extra)
            values[cell.index, :, :, axis] = d @ s
    return DriftTensor(values=values, partition_hash=partition.content_hash)


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings for the collision tensor.

    target_rel_error is reporting-only: precompute stats compare the
    realized per-block error estimates against it, nothing is truncated.
    """

    seed: int
    samples_per_pair: int
    target_rel_error: float = 0.0

    def __post_init__(self):
        if self.samples_per_pair < 1:
            raise ValueError(f"samples_per_pair must be >= 1, got {self.samples_per_pair}")


@dataclass
class CollisionTensor:
    """Sparse collision blocks b[(alpha, beta, gamma)][j, k, n].

    j indexes the invariant tested on the target cell alpha; k and n
    index the moment expansion on the source cells beta and gamma.
    Blocks exist only where at least one admissible sample scattered.
    """

    block_index: np.ndarray  # (B, 3) int32, lexicographically sorted
    values: np.ndarray  # (B, 5, 5, 5)
    std_errors: np.ndarray  # (B, 5, 5, 5)
    partition_hash: str
    energy_cap: float
    model: ScatteringModel
    method: str = "mc"
    seed: int = 0
    samples_per_pair: int = 0
    _lookup: dict = field(default_factory=dict, repr=False)
    _plan: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if not self._lookup:
            self._lookup = {
                tuple(idx): pos for pos, idx in enumerate(map(tuple, self.block_index))
            }

    @property
    def n_blocks(self) -> int:
        return int(self.block_index.shape[0])

    def contraction_plan(self):
        """Cached layout for fast rhs evaluation.

        Returns (values_flat (B,5,25), beta_ids, gamma_ids, alpha_ids,
        alpha_starts); blocks are stored target-major so grouping by
        alpha is a reduceat over contiguous runs.
        """
        if self._plan is None:
            alphas = self.block_index[:, 0]
            starts = np.concatenate([[0], np.nonzero(np.diff(alphas))[0] + 1])
            self._plan = (
                np.ascontiguousarray(self.values.reshape(-1, 5, 25)),
                self.block_index[:, 1].astype(np.int64),
                self.block_index[:, 2].astype(np.int64),
                alphas[starts].astype(np.int64),
                starts,
            )
        return self._plan

    def block(self, alpha: int, beta: int, gamma: int) -> np.ndarray:
        """Dense (5,5,5) block; zeros when the triple was never touched."""
        pos = self._lookup.get((alpha, beta, gamma))
        if pos is None:
            return np.zeros((5, 5, 5))
        return self.values[pos]

    def block_error(self, alpha: int, beta: int, gamma: int) -> np.ndarray:
        pos = self._lookup.get((alpha, beta, gamma))
        if pos is None:
            return np.zeros((5, 5, 5))
        return self.std_errors[pos]

    def pair_groups(self):
        """Iterate (beta, gamma) -> (alphas, value blocks) in sorted order."""
        if self.n_blocks == 0:
            return
        order = np.lexsort((self.block_index[:, 0], self.block_index[:, 2], self.block_index[:, 1]))
        bg = self.block_index[order][:, 1:]
        boundaries = np.nonzero(np.any(np.diff(bg, axis=0) != 0, axis=1))[0] + 1
        start = 0
        for stop in list(boundaries) + [len(order)]:
            sel = order[start:stop]
            beta = int(self.block_index[sel[0], 1])
            gamma = int(self.block_index[sel[0], 2])
            yield (beta, gamma), self.block_index[sel, 0], self.values[sel]
            start = stop

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.n_blocks else 0.0

    def check_partition(self, partition: Partition):
        if self.partition_hash != partition.content_hash:
            raise HashMismatch("collision tensor was built for a different partition")


def _pair_samples(rng, partition: Partition, beta: int, gamma: int, count: int):
    lo_b, up_b = partition.lowers[beta], partition.uppers[beta]
    lo_g, up_g = partition.lowers[gamma], partition.uppers[gamma]
    xi = lo_b + rng.random((count, 3)) * (up_b - lo_b)
    xi_star = lo_g + rng.random((count, 3)) * (up_g - lo_g)
    normals = rng.standard_normal((count, 3))
    norms = np.sqrt(np.sum(normals * normals, axis=1))
    norms[norms == 0.0] = 1.0
    omega = normals / norms[:, None]
    return xi, xi_star, omega


def _accumulate_pair(partition, duals, model, cfg, beta, gamma):
    """Blocks contributed by one ordered cell pair; {} when nothing admissible."""
    energy_cap = partition.domain.energy_cap
    samples = cfg.samples_per_pair
    seed = int(cfg.seed) % 2**64
    rng = np.random.default_rng(np.random.SeedSequence([seed, beta, gamma]))
    xi, xi_star, omega = _pair_samples(rng, partition, beta, gamma, samples)

    keep = energy_cutoff(xi, xi_star, energy_cap)
    if not keep.any():
        return {}
    xi, xi_star, omega = xi[keep], xi_star[keep], omega[keep]
    kept = xi.shape[0]

    rate = scattering_rate(model, xi, xi_star)
    weight = (partition.volumes[beta] * partition.volumes[gamma] * 4.0 * np.pi / samples) * rate

    xi_p, xi_star_p = post_collision(xi, xi_star, omega)
    # rounding can push a post-collision point past the domain face by
    # ~eps even though the cutoff bounds it; clamp so no scatter is lost
    h = partition.domain.half_width
    np.clip(xi_p, -h, h, out=xi_p)
    np.clip(xi_star_p, -h, h, out=xi_star_p)
    alpha_p = partition.locate_many(xi_p)
    alpha_sp = partition.locate_many(xi_star_p)
    if np.any(alpha_p < 0) or np.any(alpha_sp < 0):
        raise RuntimeError("post-collision point escaped the domain")

    # four bracket terms per sample, aggregated per (sample, target cell)
    # before squaring so the variance sees each sample's net contribution
    sample_ids = np.arange(kept, dtype=np.int64)
    keys = np.concatenate([
        alpha_p * kept + sample_ids,
        alpha_sp * kept + sample_ids,
        np.int64(beta) * kept + sample_ids,
        np.int64(gamma) * kept + sample_ids,
    ])
    vals = np.concatenate([
        collision_invariants(xi_p),
        collision_invariants(xi_star_p),
        -collision_invariants(xi),
        -collision_invariants(xi_star),
    ])
    unique_keys, inverse = np.unique(keys, return_inverse=True)
    bracket = np.zeros((unique_keys.shape[0], 5))
    np.add.at(bracket, inverse, vals)
    alpha_u = unique_keys // kept
    sample_u = unique_keys % kept

    eta_b = evaluate_dual(duals.matrices[beta], xi)
    eta_g = evaluate_dual(duals.matrices[gamma], xi_star)

    blocks = {}
    boundaries = np.searchsorted(alpha_u, np.arange(partition.n_cells + 1))
    for alpha in range(partition.n_cells):
        start, stop = boundaries[alpha], boundaries[alpha + 1]
        if start == stop:
            continue
        su = sample_u[start:stop]
        z = (bracket[start:stop] * weight[su, None]).astype(np.longdouble)
        x = eta_b[su].astype(np.longdouble)
        y = eta_g[su].astype(np.longdouble)
        # value and sum-of-squares accumulate via longdouble matmul
        # (BLAS-free, deterministic regardless of thread count)
        zx = (z[:, :, None] * x[:, None, :]).reshape(-1, 25)
        val = (zx.T @ y).reshape(5, 5, 5)
        zx2 = zx * zx
        sq = (zx2.T @ (y * y)).reshape(5, 5, 5)
        value = val.astype(float)
        variance = sq.astype(float) - value * value / samples
        blocks[(alpha, beta, gamma)] = (value, np.sqrt(np.clip(variance, 0.0, None)))
    return blocks


def active_pairs(partition: Partition):
    """Ordered cell pairs that can contain admissible collisions.

    A pair is skipped only when even the closest points of the two cells
    violate the energy cutoff, so skipping is exact.
    """
    min_sq = np.array([cell.min_speed_sq() for cell in partition.cells])
    energy_cap = partition.domain.energy_cap
    pairs = []
    for beta in range(partition.n_cells):
        for gamma in range(partition.n_cells):
            if min_sq[beta] + min_sq[gamma] <= energy_cap:
                pairs.append((beta, gamma))
    return pairs


def collision_tensor_mc(partition: Partition, duals: DualBasisSet,
                        model: ScatteringModel, cfg: McConfig) -> CollisionTensor:
    """Monte Carlo collision tensor.

    Deterministic: each ordered pair (beta, gamma) draws from its own
    stream keyed by (seed, beta, gamma), and pairs never write to the
    same block, so the result is independent of evaluation order.
    """
    duals.check_partition(partition)
    blocks = {}
    for beta, gamma in active_pairs(partition):
        blocks.update(_accumulate_pair(partition, duals, model, cfg, beta, gamma))
    return _assemble(blocks, partition, model, method="mc",
                     seed=cfg.seed, samples_per_pair=cfg.samples_per_pair)


def _assemble(blocks: dict, partition: Partition, model: ScatteringModel,
              method: str, seed: int = 0, samples_per_pair: int = 0) -> CollisionTensor:
    index = np.array(sorted(blocks), dtype=np.int32).reshape(-1, 3)
    values = np.array([blocks[tuple(i)][0] for i in index]).reshape(-1, 5, 5, 5)
    errors = np.array([blocks[tuple(i)][1] for i in index]).reshape(-1, 5, 5, 5)
    return CollisionTensor(
        block_index=index,
        values=values,
        std_errors=errors,
        partition_hash=partition.content_hash,
        energy_cap=partition.domain.energy_cap,
        model=model,
        method=method,
        seed=seed,
        samples_per_pair=samples_per_pair,
    )


def telescoping_residuals(tensor: CollisionTensor):
    """Worst conservation residual of the stored blocks.

    For every (beta, gamma, j, k, n) the blocks summed over the target
    cell must vanish; returns (max_ratio, worst_tuple) where the ratio is
    |sum_alpha b| / (max_alpha |b| + 1e-300).
    """
    worst = 0.0
    worst_at = None
    for (beta, gamma), _, vals in tensor.pair_groups():
        total = np.abs(vals.sum(axis=0))
        scale = np.abs(vals).max(axis=0) + 1e-300
        ratio = total / scale
        pos = np.unravel_index(np.argmax(ratio), ratio.shape)
        if ratio[pos] > worst:
            worst = float(ratio[pos])
            worst_at = (beta, gamma) + tuple(int(p) for p in pos)
    return worst, worst_at
