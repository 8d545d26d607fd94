"""Collision invariants and per-cell dual bases.

The five collision invariants are the ordered polynomials
{1, xi1, xi2, xi3, |xi|^2}. For each cell the dual basis is the unique
set of linear combinations of these five that is biorthonormal to them
under the cell's L2 inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HashMismatch, IllConditionedCell
from .geometry import Cell, Partition, _box_moment

__all__ = [
    "INVARIANT_COUNT",
    "collision_invariant",
    "collision_invariants",
    "GramMatrix",
    "gram_matrix",
    "DualBasis",
    "build_dual_basis",
    "DualBasisSet",
    "build_dual_bases",
    "evaluate_dual",
]

INVARIANT_COUNT = 5

# monomial expansion of each invariant: {(p, q, r): coefficient}
_PSI_MONOS = (
    {(0, 0, 0): 1.0},
    {(1, 0, 0): 1.0},
    {(0, 1, 0): 1.0},
    {(0, 0, 1): 1.0},
    {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0},
)


def collision_invariant(j: int, xi) -> float:
    """Value of the j-th collision invariant at velocity ``xi``."""
    if j not in range(INVARIANT_COUNT):
        raise ValueError(f"invariant index must be 0..4, got {j}")
    xi = np.asarray(xi, dtype=float)
    if j == 0:
        return 1.0
    if j == 4:
        return float(np.dot(xi, xi))
    return float(xi[j - 1])


def collision_invariants(points: np.ndarray) -> np.ndarray:
    """Evaluate all five invariants at ``points`` of shape (P, 3) -> (P, 5)."""
    points = np.asarray(points, dtype=float)
    out = np.empty(points.shape[:-1] + (INVARIANT_COUNT,))
    out[..., 0] = 1.0
    out[..., 1:4] = points
    out[..., 4] = np.sum(points * points, axis=-1)
    return out


def poly_product(a: dict, b: dict) -> dict:
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            key = (ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2])
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def poly_cell_integral(poly: dict, lower, upper) -> float:
    return sum(c * _box_moment(lower, upper, e) for e, c in poly.items())


def invariant_pair_integral(cell: Cell, i: int, j: int, extra: dict | None = None) -> float:
    """Exact integral of psi_i * psi_j (optionally times ``extra``) over a cell."""
    poly = poly_product(_PSI_MONOS[i], _PSI_MONOS[j])
    if extra is not None:
        poly = poly_product(poly, extra)
    return poly_cell_integral(poly, cell.lower, cell.upper)


@dataclass(frozen=True)
class GramMatrix:
    """Gram matrix G_ij = int psi_i psi_j over one cell."""

    cell_index: int
    values: np.ndarray
    cond: float


def gram_matrix(cell: Cell) -> GramMatrix:
    """Exact Gram matrix of the invariants over a box cell."""
    g = np.empty((5, 5))
    for i in range(5):
        for j in range(i, 5):
            g[i, j] = g[j, i] = invariant_pair_integral(cell, i, j)
    return GramMatrix(cell_index=cell.index, values=g, cond=float(np.linalg.cond(g)))


def _centered_transform(cell: Cell):
    """Change of basis to cell-centered, cell-scaled invariants.

    Returns (T, G_tilde): T maps the raw invariants to the local set
    {1, u1, u2, u3, |xi - c|^2 / s^2} with u_l = (xi_l - c_l)/s_l, and
    G_tilde is that set's exact Gram matrix. Inverting G_tilde instead of
    the raw Gram keeps the conditioning bounded for cells far from the
    origin, where |xi|^2 is nearly affine.
    """
    c = cell.center
    s = cell.half_widths
    sq = float(np.max(s))

    T = np.zeros((5, 5))
    T[0, 0] = 1.0
    for l in range(3):
        T[1 + l, 0] = -c[l] / s[l]
        T[1 + l, 1 + l] = 1.0 / s[l]
    T[4, 0] = float(np.dot(c, c)) / sq**2
    T[4, 1:4] = -2.0 * c / sq**2
    T[4, 4] = 1.0 / sq**2

    unit = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    local = [{(0, 0, 0): 1.0}]
    for l in range(3):
        local.append({unit[l]: 1.0 / s[l]})
    quad = {}
    for l in range(3):
        e = tuple(2 * u for u in unit[l])
        quad[e] = 1.0 / sq**2
    local.append(quad)

    lo = cell.lower - c
    up = cell.upper - c
    gt = np.empty((5, 5))
    for i in range(5):
        for j in range(i, 5):
            gt[i, j] = gt[j, i] = poly_cell_integral(poly_product(local[i], local[j]), lo, up)
    return T, gt


@dataclass(frozen=True)
class DualBasis:
    """Coefficients D of one cell's dual basis in the invariant basis.

    eta_i(xi) = sum_p D[i, p] * psi_p(xi), with
    int_cell eta_i psi_j = delta_ij.
    """

    cell_index: int
    matrix: np.ndarray
    cond: float


def build_dual_basis(cell: Cell, cond_limit: float = 1e12) -> DualBasis:
    """Construct the dual basis of one cell.

    Raises IllConditionedCell when even the centered-and-scaled Gram
    matrix has condition number above ``cond_limit`` (extremely flat
    boxes); regularizing instead would silently break biorthonormality.
    """
    T, gt = _centered_transform(cell)
    cond = float(np.linalg.cond(gt))
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditionedCell(
            f"cell {cell.index}: preconditioned Gram condition {cond:.3e} exceeds {cond_limit:.1e}")
    D = T.T @ np.linalg.solve(gt, T)
    return DualBasis(cell_index=cell.index, matrix=D, cond=cond)


@dataclass(frozen=True)
class DualBasisSet:
    """Stacked dual-basis matrices for every cell of a partition."""

    matrices: np.ndarray  # (N, 5, 5)
    conds: np.ndarray  # (N,)
    partition_hash: str

    def check_partition(self, partition: Partition):
        if self.partition_hash != partition.content_hash:
            raise HashMismatch("dual bases were built for a different partition")


def build_dual_bases(partition: Partition, cond_limit: float = 1e12) -> DualBasisSet:
    duals = [build_dual_basis(cell, cond_limit) for cell in partition.cells]
    return DualBasisSet(
        matrices=np.array([d.matrix for d in duals]),
        conds=np.array([d.cond for d in duals]),
        partition_hash=partition.content_hash,
    )


def evaluate_dual(matrix: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate one cell's dual functions at points (P, 3) -> (P, 5)."""
    return collision_invariants(points) @ matrix.T
