"""Independent brute-force references used by tests and cache validation.

The collision oracle integrates the same pair integrals as the Monte
Carlo path but deterministically. Two discontinuities make naive tensor
quadrature useless here, so both are resolved structurally:

* the pair-energy cutoff is an exact radial clamp on the innermost
  velocity axis of the second particle, and
* for partitions whose interior faces are perpendicular to a single axis
  the scattering-sphere integral is done in closed form per panel, with
  the sphere split exactly at the latitudes where a post-collision point
  crosses a cell face.

For partitions split along several axes the sphere integral falls back
to a deterministic near-uniform point design, which is far less
accurate; none of the shipped checks need that path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import DualBasisSet, collision_invariants, evaluate_dual
from .coefficients import CollisionTensor, _assemble, active_pairs
from .errors import CostGuard
from .geometry import Cell, Partition
from .kinematics import ScatteringModel, scattering_rate

__all__ = [
    "QuadratureSpec",
    "oracle_cell_integral",
    "oracle_gaussian_moment",
    "oracle_collision_entry",
    "collision_tensor_quadrature",
]

_MAX_CELLS = 8


@dataclass(frozen=True)
class QuadratureSpec:
    """Order settings of the collision oracle.

    cell_order is the per-axis Gauss order on the five outer velocity
    dimensions; panel_order the Gauss order on each exactly-clamped
    segment of the innermost dimension. sphere_mode "auto" picks the
    closed-form sphere integration where the partition allows it.
    """

    cell_order: int = 10
    panel_order: int = 8
    sphere_mode: str = "auto"  # auto | exact | grid
    sphere_points: int = 512
    node_budget: float = 5e7

    def __post_init__(self):
        if self.cell_order < 2 or self.panel_order < 2:
            raise ValueError("quadrature orders must be >= 2")
        if self.sphere_mode not in ("auto", "exact", "grid"):
            raise ValueError(f"unknown sphere_mode {self.sphere_mode!r}")


@lru_cache(maxsize=64)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _gauss_1d(lo: float, up: float, order: int):
    x, w = _leggauss(order)
    mid, half = 0.5 * (lo + up), 0.5 * (up - lo)
    return mid + half * x, half * w


def _gauss_cell(lower, upper, order: int):
    """Tensor-product Gauss nodes and weights over a box."""
    axes = [_gauss_1d(lower[a], upper[a], order) for a in range(len(lower))]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.ones(points.shape[0])
    stride = points.shape[0]
    for (_, w) in axes:
        stride //= len(w)
        weights *= np.tile(np.repeat(w, stride), points.shape[0] // (len(w) * stride))
    return points, weights


def oracle_cell_integral(cell: Cell, integrand, order: int = 8) -> float:
    """Tensor-grid Gauss integral over one cell.

    ``integrand`` is either a callable mapping (P, 3) points to (P,)
    values or a monomial dict {(p, q, r): coeff}. Exact for polynomials
    of per-axis degree < 2 * order.
    """
    if order**3 > 2**21:
        raise CostGuard(f"cell quadrature order {order} exceeds the node budget")
    points, weights = _gauss_cell(cell.lower, cell.upper, order)
    if callable(integrand):
        values = np.asarray(integrand(points), dtype=float)
    else:
        values = np.zeros(points.shape[0])
        for expo, coeff in integrand.items():
            values += coeff * np.prod(points ** np.asarray(expo, dtype=float), axis=1)
    return float(np.dot(weights, values))


def oracle_gaussian_moment(cell: Cell, density: float, velocity, temperature: float,
                           j: int, order: int = 48) -> float:
    """Dense quadrature of the Maxwellian's j-th invariant moment over a cell."""
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    velocity = np.asarray(velocity, dtype=float).reshape(3)

    def integrand(points):
        diff = points - velocity
        dens = density * (2.0 * np.pi * temperature) ** -1.5 * np.exp(
            -0.5 * np.sum(diff * diff, axis=1) / temperature)
        return dens * collision_invariants(points)[:, j]

    return oracle_cell_integral(cell, integrand, order=order)


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)


def _scatter_accumulate(blocks: dict, targets: np.ndarray, zw: np.ndarray,
                        x: np.ndarray, y: np.ndarray):
    """blocks[a][j,k,n] += sum_p zw[p,j] x[p,k] y[p,n] grouped by target."""
    order = np.argsort(targets, kind="stable")
    st = targets[order]
    cuts = np.nonzero(np.diff(st))[0] + 1
    starts = np.concatenate([[0], cuts])
    stops = np.concatenate([cuts, [len(st)]])
    for s, e in zip(starts, stops):
        a = int(st[s])
        idx = order[s:e]
        zx = (zw[idx][:, :, None] * x[idx][:, None, :]).reshape(-1, 25)
        update = (zx.T @ y[idx]).reshape(5, 5, 5)
        blocks[a] = blocks.get(a, 0.0) + update


def _resolve_sphere_mode(partition: Partition, spec: QuadratureSpec):
    slab = partition.slab_axis()
    mode = spec.sphere_mode
    if mode == "auto":
        mode = "exact" if slab is not None else "grid"
    if mode == "exact" and slab is None:
        raise ValueError(
            "exact sphere integration needs a partition split along a single axis")
    return mode, slab


def _pair_quadrature(partition: Partition, duals: DualBasisSet, model: ScatteringModel,
                     spec: QuadratureSpec, beta: int, gamma: int) -> dict:
    """Quadrature blocks of one ordered cell pair, keyed by target cell."""
    mode, slab = _resolve_sphere_mode(partition, spec)
    energy_cap = partition.domain.energy_cap
    q = spec.cell_order
    qt = spec.panel_order

    if mode == "exact":
        d_axis, edges_d, slab_cells = slab
        planes = edges_d[1:-1]
        clamp_axis = (d_axis + 1) % 3
    else:
        d_axis, edges_d, slab_cells, planes = None, None, None, np.array([])
        clamp_axis = 2
    outer_star = [a for a in range(3) if a != clamp_axis]

    n_events = 2 * len(planes)
    est = q**5 * (n_events + 1) * qt
    if est > spec.node_budget:
        raise CostGuard(f"pair quadrature would need ~{est:.2e} nodes "
                        f"(budget {spec.node_budget:.2e})")

    xi_pts, xi_w = _gauss_cell(partition.lowers[beta], partition.uppers[beta], q)
    star_lo = partition.lowers[gamma]
    star_up = partition.uppers[gamma]
    s_pts, s_w = _gauss_cell(star_lo[outer_star], star_up[outer_star], q)

    # flat outer rows: every (xi node) x (two-axis xi* node)
    nb, ng = xi_pts.shape[0], s_pts.shape[0]
    xi_o = np.repeat(xi_pts, ng, axis=0)
    w_o = np.repeat(xi_w, ng) * np.tile(s_w, nb)
    star_partial = np.tile(s_pts, (nb, 1))

    # energy clamp on the remaining xi* axis
    rho_sq = energy_cap - np.sum(xi_o * xi_o, axis=1) - np.sum(star_partial**2, axis=1)
    valid = rho_sq > 0.0
    if not valid.any():
        return {}
    xi_o, w_o, star_partial, rho_sq = (arr[valid] for arr in (xi_o, w_o, star_partial, rho_sq))
    rho = np.sqrt(rho_sq)
    t_lo = np.maximum(star_lo[clamp_axis], -rho)
    t_hi = np.minimum(star_up[clamp_axis], rho)
    open_rows = t_lo < t_hi
    if not open_rows.any():
        return {}
    xi_o, w_o, star_partial, t_lo, t_hi = (
        arr[open_rows] for arr in (xi_o, w_o, star_partial, t_lo, t_hi))
    rows = xi_o.shape[0]

    # breakpoints where a post-collision face crossing becomes tangent;
    # between them the inner integrand is analytic
    cand = np.empty((rows, n_events))
    if n_events:
        md_fixed = 0.5 * (xi_o[:, d_axis] + star_partial[:, outer_star.index(d_axis)])
        dperp_sq = np.zeros(rows)
        for pos, a in enumerate(outer_star):
            dperp_sq += (xi_o[:, a] - star_partial[:, pos]) ** 2
        for pi, g in enumerate(planes):
            disc = 4.0 * (g - md_fixed) ** 2 - dperp_sq
            root = np.sqrt(np.clip(disc, 0.0, None))
            cand[:, 2 * pi] = xi_o[:, clamp_axis] - root
            cand[:, 2 * pi + 1] = xi_o[:, clamp_axis] + root
    cand = np.clip(cand, t_lo[:, None], t_hi[:, None])
    bounds = np.sort(np.concatenate([t_lo[:, None], cand, t_hi[:, None]], axis=1), axis=1)

    ref_x, ref_w = _leggauss(qt)
    n_panels = bounds.shape[1] - 1
    mid = 0.5 * (bounds[:, 1:] + bounds[:, :-1])  # (rows, panels)
    half = 0.5 * (bounds[:, 1:] - bounds[:, :-1])
    t_nodes = mid[:, :, None] + half[:, :, None] * ref_x  # (rows, panels, qt)
    t_weights = half[:, :, None] * ref_w

    flat_t = t_nodes.reshape(-1)
    flat_wt = (w_o[:, None, None] * t_weights).reshape(-1)
    keep = flat_wt != 0.0
    reps = n_panels * qt
    xi_f = np.repeat(xi_o, reps, axis=0)[keep]
    star_f = np.empty((keep.sum(), 3))
    star_rep = np.repeat(star_partial, reps, axis=0)[keep]
    for pos, a in enumerate(outer_star):
        star_f[:, a] = star_rep[:, pos]
    star_f[:, clamp_axis] = flat_t[keep]
    w_f = flat_wt[keep]

    blocks: dict = {}
    chunk = 1 << 16
    for start in range(0, xi_f.shape[0], chunk):
        sl = slice(start, start + chunk)
        _accumulate_inner(blocks, partition, duals, model, spec, mode,
                          beta, gamma, d_axis, edges_d, slab_cells, planes,
                          xi_f[sl], star_f[sl], w_f[sl])
    return blocks


def _accumulate_inner(blocks, partition, duals, model, spec, mode, beta, gamma,
                      d_axis, edges_d, slab_cells, planes, xi, star, w_q):
    pts = xi.shape[0]
    mid = 0.5 * (xi + star)
    r = 0.5 * np.sqrt(np.sum((xi - star) ** 2, axis=1))
    rate = scattering_rate(model, xi, star)
    w_b = w_q * rate
    eta_b = evaluate_dual(duals.matrices[beta], xi)
    eta_g = evaluate_dual(duals.matrices[gamma], star)

    # source terms of the bracket, constant over the sphere
    four_pi = 4.0 * np.pi
    _scatter_accumulate(blocks, np.full(pts, beta, dtype=np.int64),
                        -four_pi * w_b[:, None] * collision_invariants(xi), eta_b, eta_g)
    _scatter_accumulate(blocks, np.full(pts, gamma, dtype=np.int64),
                        -four_pi * w_b[:, None] * collision_invariants(star), eta_b, eta_g)

    if mode == "grid":
        _sphere_grid_terms(blocks, partition, spec, mid, r, w_b, eta_b, eta_g)
        return

    md = mid[:, d_axis]
    safe_r = np.where(r > 0.0, r, 1.0)
    cuts = []
    for g in planes:
        cuts.append(np.where(r > 0.0, (g - md) / safe_r, 2.0))
        cuts.append(np.where(r > 0.0, (md - g) / safe_r, 2.0))
    if cuts:
        cand = np.clip(np.stack(cuts, axis=1), -1.0, 1.0)
    else:
        cand = np.empty((pts, 0))
    ones = np.ones((pts, 1))
    bounds = np.sort(np.concatenate([-ones, cand, ones], axis=1), axis=1)

    m_sq_plus_r_sq = np.sum(mid * mid, axis=1) + r * r
    n_slabs = len(edges_d) - 1
    two_pi = 2.0 * np.pi
    for panel in range(bounds.shape[1] - 1):
        c0, c1 = bounds[:, panel], bounds[:, panel + 1]
        length = c1 - c0
        dc2 = 0.5 * (c1 * c1 - c0 * c0)
        cmid = 0.5 * (c0 + c1)
        for sign in (1.0, -1.0):
            value_d = md + sign * r * cmid
            interval = np.clip(
                np.searchsorted(edges_d, value_d, side="right") - 1, 0, n_slabs - 1)
            targets = slab_cells[interval]
            w_mat = np.empty((pts, 5))
            w_mat[:, 0] = length
            for a in range(3):
                if a == d_axis:
                    w_mat[:, 1 + a] = md * length + sign * r * dc2
                else:
                    w_mat[:, 1 + a] = mid[:, a] * length
            w_mat[:, 4] = m_sq_plus_r_sq * length + 2.0 * sign * r * md * dc2
            _scatter_accumulate(blocks, targets, two_pi * w_b[:, None] * w_mat,
                                eta_b, eta_g)


def _sphere_grid_terms(blocks, partition, spec, mid, r, w_b, eta_b, eta_g):
    nodes = _fibonacci_sphere(spec.sphere_points)
    node_w = 4.0 * np.pi / spec.sphere_points
    h = partition.domain.half_width
    pts = mid.shape[0]
    chunk = max(1, (1 << 20) // max(pts, 1))
    for start in range(0, nodes.shape[0], chunk):
        sub = nodes[start:start + chunk]
        for sign in (1.0, -1.0):
            post = mid[:, None, :] + sign * r[:, None, None] * sub[None, :, :]
            np.clip(post, -h, h, out=post)
            flat = post.reshape(-1, 3)
            targets = partition.locate_many(flat)
            zw = node_w * np.repeat(w_b, sub.shape[0])[:, None] * collision_invariants(flat)
            _scatter_accumulate(
                blocks, targets, zw,
                np.repeat(eta_b, sub.shape[0], axis=0),
                np.repeat(eta_g, sub.shape[0], axis=0))


def collision_tensor_quadrature(partition: Partition, duals: DualBasisSet,
                                model: ScatteringModel,
                                spec: QuadratureSpec | None = None) -> CollisionTensor:
    """Deterministic collision tensor; test oracle for the Monte Carlo path."""
    if partition.n_cells > _MAX_CELLS:
        raise CostGuard(f"quadrature oracle limited to {_MAX_CELLS} cells, "
                        f"got {partition.n_cells}")
    duals.check_partition(partition)
    spec = spec or QuadratureSpec()
    blocks = {}
    for beta, gamma in active_pairs(partition):
        pair_blocks = _pair_quadrature(partition, duals, model, spec, beta, gamma)
        for alpha, value in pair_blocks.items():
            blocks[(alpha, beta, gamma)] = (value, np.zeros((5, 5, 5)))
    return _assemble(blocks, partition, model, method="quadrature")


def oracle_collision_entry(partition: Partition, duals: DualBasisSet,
                           model: ScatteringModel, alpha: int, beta: int, gamma: int,
                           j: int, k: int, n: int,
                           spec: QuadratureSpec | None = None) -> float:
    """Dense quadrature of a single collision-tensor entry."""
    if partition.n_cells > _MAX_CELLS:
        raise CostGuard(f"quadrature oracle limited to {_MAX_CELLS} cells")
    duals.check_partition(partition)
    spec = spec or QuadratureSpec()
    pair_blocks = _pair_quadrature(partition, duals, model, spec, beta, gamma)
    block = pair_blocks.get(alpha)
    return 0.0 if block is None else float(block[j, k, n])
