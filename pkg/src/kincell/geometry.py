"""Truncated velocity domain, box-cell partitions, and exact box moments.

The velocity domain is the cube [-h, h]^3 with h = sqrt(energy_cap): the
smallest axis-aligned box covering the energy ball {|xi|^2 <= energy_cap}.
Cells are axis-aligned boxes; membership uses the half-open convention
[lower, upper) per axis, with the domain's top faces closed so that the
cube is covered pointwise.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainSpec",
    "Cell",
    "Partition",
    "build_uniform_partition",
    "box_monomial_moment",
]

MAX_MOMENT_EXPONENT = 8


@dataclass(frozen=True)
class DomainSpec:
    """Parameters of the truncated cubic velocity domain.

    Parameters
    ----------
    energy_cap : float
        Upper bound E on |xi|^2 + |xi*|^2 in admissible collisions. The
        cube half-width is sqrt(E), so admissible velocities never leave
        the domain.
    n_per_axis : int
        Number of congruent cells per axis for the uniform partition.
    """

    energy_cap: float
    n_per_axis: int
    half_width: float = field(init=False)

    def __post_init__(self):
        if not self.energy_cap > 0.0:
            raise ValueError(f"energy_cap must be > 0, got {self.energy_cap}")
        if int(self.n_per_axis) < 1:
            raise ValueError(f"n_per_axis must be >= 1, got {self.n_per_axis}")
        object.__setattr__(self, "n_per_axis", int(self.n_per_axis))
        object.__setattr__(self, "half_width", float(np.sqrt(self.energy_cap)))


@dataclass(frozen=True, eq=False)
class Cell:
    """Axis-aligned box cell with a 0-based partition index."""

    index: int
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(3)
        up = np.array(self.upper, dtype=float).reshape(3)
        if not np.all(lo < up):
            raise ValueError(f"cell {self.index}: needs lower < upper, got {lo} | {up}")
        lo.flags.writeable = False
        up.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, xi) -> bool:
        """Half-open membership test [lower, upper) per axis."""
        xi = np.asarray(xi, dtype=float)
        return bool(np.all(xi >= self.lower) and np.all(xi < self.upper))

    def min_speed_sq(self) -> float:
        """Minimum of |xi|^2 over the closed cell."""
        nearest = np.clip(0.0, self.lower, self.upper)
        return float(np.dot(nearest, nearest))

    def speed_range(self, axis: int) -> tuple[float, float]:
        """Range of the velocity component along ``axis`` over the cell."""
        return float(self.lower[axis]), float(self.upper[axis])


def box_monomial_moment(cell: Cell, exponents) -> float:
    """Exact integral of xi1^p * xi2^q * xi3^r over a box cell.

    Product of closed-form 1D power integrals; exact up to rounding for
    any exponents in [0, MAX_MOMENT_EXPONENT].
    """
    return _box_moment(cell.lower, cell.upper, exponents)


def _box_moment(lower, upper, exponents) -> float:
    out = 1.0
    for lo, up, e in zip(lower, upper, exponents):
        e = int(e)
        if e < 0 or e > MAX_MOMENT_EXPONENT:
            raise ValueError(f"exponent {e} outside supported range 0..{MAX_MOMENT_EXPONENT}")
        out *= (up ** (e + 1) - lo ** (e + 1)) / (e + 1)
    return out


class Partition:
    """Disjoint box cells tiling the domain cube.

    ``locate`` is the authoritative membership rule: half-open per axis
    with the top face of the bounding box closed, so every point of the
    cube maps to exactly one cell.
    """

    def __init__(self, domain: DomainSpec, cells, axis_edges=None,
                 require_ball_cover: bool = True):
        self.domain = domain
        self.cells = list(cells)
        if not self.cells:
            raise ValueError("partition needs at least one cell")
        for pos, cell in enumerate(self.cells):
            if cell.index != pos:
                raise ValueError(f"cell indices must be contiguous 0..N-1, got {cell.index} at {pos}")
        self.lowers = np.array([c.lower for c in self.cells])
        self.uppers = np.array([c.upper for c in self.cells])
        self.volumes = np.array([c.volume for c in self.cells])
        self.bbox_lower = self.lowers.min(axis=0)
        self.bbox_upper = self.uppers.max(axis=0)
        self._axis_edges = axis_edges
        if axis_edges is None:
            self._validate_tiling()
        if require_ball_cover:
            r = domain.half_width
            if np.any(self.bbox_lower > -r) or np.any(self.bbox_upper < r):
                raise ValueError(
                    "cells do not cover the energy ball: bounding box "
                    f"[{self.bbox_lower}, {self.bbox_upper}] misses radius {r}")
        self.content_hash = hashlib.sha256(self.to_text().encode()).hexdigest()

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @classmethod
    def from_cells(cls, bounds, energy_cap: float, require_ball_cover: bool = True) -> "Partition":
        """Build a partition from an explicit list of (lower, upper) boxes."""
        spec = DomainSpec(energy_cap=energy_cap, n_per_axis=1)
        cells = [Cell(i, lo, up) for i, (lo, up) in enumerate(bounds)]
        return cls(spec, cells, require_ball_cover=require_ball_cover)

    def _validate_tiling(self):
        # pairwise disjoint (open-interval overlap on every axis)
        n = len(self.cells)
        for i in range(n):
            for j in range(i + 1, n):
                lo = np.maximum(self.lowers[i], self.lowers[j])
                up = np.minimum(self.uppers[i], self.uppers[j])
                if np.all(lo < up):
                    raise ValueError(f"cells {i} and {j} overlap")
        bbox_vol = float(np.prod(self.bbox_upper - self.bbox_lower))
        total = float(self.volumes.sum())
        if abs(total - bbox_vol) > 1e-12 * bbox_vol:
            raise ValueError(
                f"cells do not tile the bounding box: sum of volumes {total} vs {bbox_vol}")

    def locate(self, xi):
        """Return the index of the unique cell containing ``xi``, or None."""
        idx = int(self.locate_many(np.asarray(xi, dtype=float).reshape(1, 3))[0])
        return None if idx < 0 else idx

    def locate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized locate; returns -1 for points outside the domain."""
        points = np.asarray(points, dtype=float)
        if self._axis_edges is not None:
            return self._locate_grid(points)
        return self._locate_scan(points)

    def _locate_grid(self, points):
        n = self.domain.n_per_axis
        flat = np.zeros(points.shape[0], dtype=np.int64)
        valid = np.ones(points.shape[0], dtype=bool)
        for axis in range(3):
            edges = self._axis_edges[axis]
            x = points[:, axis]
            idx = np.searchsorted(edges, x, side="right") - 1
            idx[x == edges[-1]] = n - 1  # closed top face
            valid &= (idx >= 0) & (idx < n) & (x <= edges[-1])
            flat = flat * n + np.clip(idx, 0, n - 1)
        flat[~valid] = -1
        return flat

    def _locate_scan(self, points):
        out = np.full(points.shape[0], -1, dtype=np.int64)
        top = self.bbox_upper
        for cell in self.cells:
            below = points < cell.upper
            # closed top face of the bounding box
            on_top = (points == cell.upper) & (cell.upper == top)
            mask = np.all(points >= cell.lower, axis=1) & np.all(below | on_top, axis=1)
            out[mask & (out < 0)] = cell.index
        return out

    def slab_axis(self):
        """Detect a single-axis slab structure.

        Returns (axis, edges, order) if every interior face is
        perpendicular to one axis: ``edges`` are the sorted cut positions
        and ``order[i]`` is the cell index of the i-th slab. A one-cell
        partition reports axis 0. Returns None otherwise.
        """
        if self.n_cells == 1:
            lo, up = self.bbox_lower, self.bbox_upper
            return 0, np.array([lo[0], up[0]]), np.array([0])
        for axis in range(3):
            others = [a for a in range(3) if a != axis]
            full = all(
                np.all(self.lowers[:, o] == self.bbox_lower[o])
                and np.all(self.uppers[:, o] == self.bbox_upper[o])
                for o in others
            )
            if not full:
                continue
            order = np.argsort(self.lowers[:, axis], kind="stable")
            los = self.lowers[order, axis]
            ups = self.uppers[order, axis]
            if np.all(los[1:] == ups[:-1]):
                edges = np.concatenate([los, ups[-1:]])
                return axis, edges, order
        return None

    def to_text(self) -> str:
        """Canonical text serialization of the geometry (hex floats)."""
        lines = [
            f"domain.energy_cap={float(self.domain.energy_cap).hex()}",
            f"domain.n_per_axis={self.domain.n_per_axis}",
            f"domain.uniform={int(self._axis_edges is not None)}",
            f"cells.count={self.n_cells}",
        ]
        for cell in self.cells:
            vals = " ".join(float(v).hex() for v in np.concatenate([cell.lower, cell.upper]))
            lines.append(f"cell.{cell.index}={vals}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Partition":
        fields = {}
        cells = []
        for line in text.strip().splitlines():
            key, _, value = line.partition("=")
            if key.startswith("cell."):
                vals = [float.fromhex(v) for v in value.split()]
                cells.append((vals[:3], vals[3:]))
            else:
                fields[key] = value
        energy_cap = float.fromhex(fields["domain.energy_cap"])
        if fields.get("domain.uniform") == "1":
            return build_uniform_partition(
                DomainSpec(energy_cap=energy_cap, n_per_axis=int(fields["domain.n_per_axis"])))
        return cls.from_cells(cells, energy_cap)


def build_uniform_partition(spec: DomainSpec) -> Partition:
    """Tile [-h, h]^3 with n_per_axis^3 congruent boxes.

    Cells are ordered x-major: index = (ix * n + iy) * n + iz.
    """
    n = spec.n_per_axis
    h = spec.half_width
    edges = np.linspace(-h, h, n + 1)
    cells = []
    for ix in range(n):
        for iy in range(n):
            for iz in range(n):
                lo = (edges[ix], edges[iy], edges[iz])
                up = (edges[ix + 1], edges[iy + 1], edges[iz + 1])
                cells.append(Cell(len(cells), lo, up))
    return Partition(spec, cells, axis_edges=(edges, edges, edges))
