"""Time integration of the closed moment system.

Spatially homogeneous runs integrate the quadratic collision ODE; 1D
slab runs add first-order upwind transport built from the per-cell drift
matrices. Both use classical RK4, and both conserve the five global
invariant sums to accumulation rounding because the collision blocks
telescope and the upwind flux is in conservation form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .basis import DualBasisSet, _PSI_MONOS, poly_cell_integral, poly_product
from .coefficients import CollisionTensor, DriftTensor
from .errors import CflViolation, EigenFailure, HashMismatch, NonFiniteState, ZeroDensity
from .geometry import Partition

__all__ = [
    "MacroFields",
    "HomogeneousState",
    "SlabState",
    "project_maxwellian",
    "two_beam_state",
    "macroscopic_fields",
    "rhs_homogeneous",
    "rk4_step",
    "run_homogeneous",
    "UpwindOperator",
    "build_upwind",
    "rhs_transport_1d",
    "run_1d",
    "ConservationReport",
    "directional_second_moments",
]

DENSITY_FLOOR = 1e-300


@dataclass(frozen=True)
class MacroFields:
    """Macroscopic fields in nondimensional units (mass = k_B = 1)."""

    density: float
    velocity: np.ndarray
    energy: float
    temperature: float


@dataclass
class HomogeneousState:
    """Moment vector N[alpha, j] of a spatially homogeneous gas."""

    values: np.ndarray  # (N, 5)
    partition_hash: str

    def copy(self) -> "HomogeneousState":
        return HomogeneousState(self.values.copy(), self.partition_hash)


@dataclass
class SlabState:
    """Moment field N[m, alpha, j] on a uniform 1D spatial grid."""

    values: np.ndarray  # (M, N, 5)
    dx: float
    boundary: str  # "periodic" | "copy"
    partition_hash: str

    def __post_init__(self):
        if self.boundary not in ("periodic", "copy"):
            raise ValueError(f"boundary must be 'periodic' or 'copy', got {self.boundary!r}")
        if self.values.shape[0] < 2:
            raise ValueError("slab grid needs at least 2 spatial cells")
        if not self.dx > 0:
            raise ValueError(f"dx must be > 0, got {self.dx}")

    def copy(self) -> "SlabState":
        return SlabState(self.values.copy(), self.dx, self.boundary, self.partition_hash)


def _gaussian_axis_moments(lo, up, mean, temperature):
    """Partial moments of orders 0..2 of a 1D Gaussian over [lo, up]."""
    sigma = np.sqrt(temperature)
    za = (lo - mean) / sigma
    zb = (up - mean) / sigma
    mass = 0.5 * (erf(zb / np.sqrt(2.0)) - erf(za / np.sqrt(2.0)))
    pdf_a = np.exp(-0.5 * za * za) / np.sqrt(2.0 * np.pi)
    pdf_b = np.exp(-0.5 * zb * zb) / np.sqrt(2.0 * np.pi)
    m1 = mean * mass - sigma * (pdf_b - pdf_a)
    m2 = (mean * mean) * mass + 2.0 * mean * sigma * (pdf_a - pdf_b) \
        + temperature * (mass - (zb * pdf_b - za * pdf_a))
    return mass, m1, m2


def project_maxwellian(partition: Partition, density: float, velocity,
                       temperature: float) -> HomogeneousState:
    """Cell moments of a Maxwellian with the given bulk fields.

    The Maxwellian has per-axis variance T; moments over each box factor
    into closed-form 1D Gaussian partial moments, so no quadrature is
    involved. Mass outside the domain cube is simply lost (truncation).
    """
    if not density > 0:
        raise ValueError(f"density must be > 0, got {density}")
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    velocity = np.asarray(velocity, dtype=float).reshape(3)
    m0 = np.empty((partition.n_cells, 3))
    m1 = np.empty((partition.n_cells, 3))
    m2 = np.empty((partition.n_cells, 3))
    for axis in range(3):
        m0[:, axis], m1[:, axis], m2[:, axis] = _gaussian_axis_moments(
            partition.lowers[:, axis], partition.uppers[:, axis],
            velocity[axis], temperature)
    values = np.empty((partition.n_cells, 5))
    prod_all = np.prod(m0, axis=1)
    values[:, 0] = density * prod_all
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        partial = m0[:, others[0]] * m0[:, others[1]]
        values[:, 1 + axis] = density * m1[:, axis] * partial
    values[:, 4] = density * sum(
        m2[:, axis] * m0[:, (axis + 1) % 3] * m0[:, (axis + 2) % 3] for axis in range(3))
    return HomogeneousState(values=values, partition_hash=partition.content_hash)


def two_beam_state(partition: Partition, cell_a: int, cell_b: int,
                   weight_a: float = 1.0, weight_b: float = 1.0) -> HomogeneousState:
    """Two monokinetic beams at the centers of two cells."""
    from .basis import collision_invariants

    values = np.zeros((partition.n_cells, 5))
    for cell_index, weight in ((cell_a, weight_a), (cell_b, weight_b)):
        center = partition.cells[cell_index].center
        values[cell_index] += weight * collision_invariants(center[None, :])[0]
    return HomogeneousState(values=values, partition_hash=partition.content_hash)


def macroscopic_fields(values: np.ndarray) -> MacroFields:
    """Density, bulk velocity, energy density, and temperature of a state.

    Temperature follows 3 rho T = 2 * kinetic energy density - rho |u|^2
    with the energy moment equal to twice the kinetic energy density.
    """
    values = np.asarray(values, dtype=float).reshape(-1, 5)
    sums = values.sum(axis=0)
    density = float(sums[0])
    if density <= DENSITY_FLOOR:
        raise ZeroDensity(f"total density {density} at or below floor {DENSITY_FLOOR}")
    u = sums[1:4] / density
    energy = float(sums[4])
    temperature = (energy - density * float(np.dot(u, u))) / (3.0 * density)
    return MacroFields(density=density, velocity=u, energy=energy, temperature=temperature)


def _macro_row(values: np.ndarray) -> np.ndarray:
    """(rho, u1, u2, u3, T, energy) with NaNs for empty states."""
    sums = values.sum(axis=0)
    rho = sums[0]
    if rho <= DENSITY_FLOOR:
        return np.array([rho, np.nan, np.nan, np.nan, np.nan, sums[4]])
    u = sums[1:4] / rho
    temp = (sums[4] - rho * np.dot(u, u)) / (3.0 * rho)
    return np.array([rho, u[0], u[1], u[2], temp, sums[4]])


def rhs_homogeneous(values: np.ndarray, tensor: CollisionTensor) -> np.ndarray:
    """Collision right-hand side: dN[a, j]/dt = 1/2 sum b[a b g, j k n] N[b, k] N[g, n]."""
    out = np.zeros_like(values)
    if tensor.n_blocks == 0:
        return out
    flat, beta_ids, gamma_ids, alpha_ids, starts = tensor.contraction_plan()
    pair = (values[beta_ids, :, None] * values[gamma_ids, None, :]).reshape(-1, 25, 1)
    contrib = np.matmul(flat, pair)[:, :, 0]  # (B, 5)
    out[alpha_ids] = np.add.reduceat(contrib, starts, axis=0)
    out *= 0.5
    return out


def rk4_step(y: np.ndarray, rhs, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step; raises NonFiniteState on blow-up."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("state became non-finite (time step too large?)")
    return out


@dataclass
class ConservationReport:
    """Maximum normalized drift of the five invariant sums over a run."""

    initial_sums: np.ndarray  # (5,)
    max_drift: np.ndarray  # (5,), |sum(t) - sum(0)| / (1 + |sum(0)|)

    def worst(self) -> float:
        return float(self.max_drift.max())


@dataclass
class TimeSeries:
    """Sampled trajectory of a homogeneous run."""

    times: np.ndarray  # (K,)
    states: np.ndarray  # (K, N, 5)
    macros: np.ndarray  # (K, 6): rho, u1, u2, u3, T, energy
    conservation: ConservationReport


def _invariant_sums(values: np.ndarray) -> np.ndarray:
    return values.reshape(-1, 5).sum(axis=0)


def run_homogeneous(state: HomogeneousState, tensor: CollisionTensor, dt: float,
                    steps: int, output_every: int = 1) -> TimeSeries:
    """Integrate the homogeneous system and track conservation drift."""
    if state.partition_hash != tensor.partition_hash:
        raise HashMismatch("state and collision tensor use different partitions")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    output_every = max(1, int(output_every))
    y = state.values.copy()
    sums0 = _invariant_sums(y)
    norm = 1.0 + np.abs(sums0)
    max_drift = np.zeros(5)
    times, states, macros = [0.0], [y.copy()], [_macro_row(y)]
    rhs = lambda v: rhs_homogeneous(v, tensor)
    for step in range(1, steps + 1):
        try:
            y = rk4_step(y, rhs, dt)
        except NonFiniteState as exc:
            raise NonFiniteState(f"non-finite state at step {step}", step=step) from exc
        max_drift = np.maximum(max_drift, np.abs(_invariant_sums(y) - sums0) / norm)
        if step % output_every == 0 or step == steps:
            times.append(step * dt)
            states.append(y.copy())
            macros.append(_macro_row(y))
    return TimeSeries(
        times=np.array(times),
        states=np.array(states),
        macros=np.array(macros),
        conservation=ConservationReport(initial_sums=sums0, max_drift=max_drift),
    )


@dataclass(frozen=True)
class UpwindOperator:
    """Per-cell flux splitting A = A+ + A- along one axis."""

    axis: int
    a_plus: np.ndarray  # (N, 5, 5)
    a_minus: np.ndarray  # (N, 5, 5)
    max_speed: float
    partition_hash: str


def build_upwind(partition: Partition, drift: DriftTensor, axis: int,
                 imag_tol: float = 1e-10) -> UpwindOperator:
    """Eigendecompose each cell's drift matrix and split by wave sign.

    The drift matrix is similar to a symmetric matrix, so its spectrum is
    real; EigenFailure signals residual imaginary parts beyond tolerance
    (a corrupted tensor rather than an expected failure mode).
    """
    drift.check_partition(partition)
    n = partition.n_cells
    a_plus = np.empty((n, 5, 5))
    a_minus = np.empty((n, 5, 5))
    max_speed = 0.0
    for i in range(n):
        mat = drift.axis_matrix(i, axis)
        eigvals, eigvecs = np.linalg.eig(mat)
        radius = float(np.abs(eigvals).max())
        if np.abs(eigvals.imag).max() > imag_tol * max(radius, 1e-30):
            raise EigenFailure(
                f"cell {i}, axis {axis}: eigenvalues not real within tolerance")
        lam = eigvals.real
        vecs = eigvecs.real
        try:
            inv = np.linalg.inv(vecs)
        except np.linalg.LinAlgError as exc:
            raise EigenFailure(f"cell {i}, axis {axis}: defective eigenbasis") from exc
        a_plus[i] = (vecs * np.clip(lam, 0.0, None)) @ inv
        a_minus[i] = (vecs * np.clip(lam, None, 0.0)) @ inv
        max_speed = max(max_speed, radius)
    return UpwindOperator(axis=axis, a_plus=a_plus, a_minus=a_minus,
                          max_speed=max_speed, partition_hash=drift.partition_hash)


def rhs_transport_1d(values: np.ndarray, op: UpwindOperator, dx: float,
                     boundary: str) -> np.ndarray:
    """First-order upwind transport derivative on a uniform grid.

    Interface flux F[m + 1/2] = A+ u[m] + A- u[m + 1]; the returned
    derivative is the conservative difference -(F[m+1/2] - F[m-1/2])/dx.
    """
    if boundary == "periodic":
        right = np.roll(values, -1, axis=0)
        left_of = lambda flux: np.roll(flux, 1, axis=0)
    elif boundary == "copy":
        right = np.concatenate([values[1:], values[-1:]], axis=0)
        left_of = lambda flux: np.concatenate([flux[:1], flux[:-1]], axis=0)
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    flux = np.einsum("ajk,mak->maj", op.a_plus, values, optimize=True) \
        + np.einsum("ajk,mak->maj", op.a_minus, right, optimize=True)
    return -(flux - left_of(flux)) / dx


@dataclass
class SlabSeries:
    """Sampled trajectory of a 1D slab run."""

    times: np.ndarray  # (K,)
    states: np.ndarray  # (K, M, N, 5)
    macros: np.ndarray  # (K, M, 6)
    conservation: ConservationReport


def run_1d(state: SlabState, partition: Partition, drift: DriftTensor,
           tensor: CollisionTensor | None, dt: float, steps: int,
           output_every: int = 1, axis: int = 0, cfl: float = 0.9,
           cfl_strict: bool = True) -> SlabSeries:
    """Integrate transport (+ optional collisions) on a periodic/copy slab."""
    if state.partition_hash != partition.content_hash:
        raise HashMismatch("slab state uses a different partition")
    if tensor is not None and tensor.partition_hash != partition.content_hash:
        raise HashMismatch("collision tensor uses a different partition")
    op = build_upwind(partition, drift, axis)
    dt_max = cfl * state.dx / max(op.max_speed, 1e-300)
    if dt > dt_max:
        message = (f"dt = {dt:g} exceeds CFL bound {dt_max:g} "
                   f"(cfl = {cfl}, dx = {state.dx:g}, max speed = {op.max_speed:g})")
        if cfl_strict:
            raise CflViolation(message)
        import warnings

        warnings.warn(message, stacklevel=2)

    def rhs(values):
        out = rhs_transport_1d(values, op, state.dx, state.boundary)
        if tensor is not None and tensor.n_blocks:
            flat, beta_ids, gamma_ids, alpha_ids, starts = tensor.contraction_plan()
            pair = values[:, beta_ids, :, None] * values[:, gamma_ids, None, :]
            # (B, 25, M) so the block contraction is one batched matmul
            pair = pair.reshape(values.shape[0], -1, 25).transpose(1, 2, 0)
            contrib = np.matmul(flat, pair)  # (B, 5, M)
            out[:, alpha_ids, :] += 0.5 * np.add.reduceat(
                contrib, starts, axis=0).transpose(2, 0, 1)
        return out

    output_every = max(1, int(output_every))
    y = state.values.copy()
    sums0 = _invariant_sums(y)
    norm = 1.0 + np.abs(sums0)
    max_drift = np.zeros(5)
    times, states, macros = [0.0], [y.copy()], [_macro_cells(y)]
    for step in range(1, steps + 1):
        try:
            y = rk4_step(y, rhs, dt)
        except NonFiniteState as exc:
            raise NonFiniteState(f"non-finite state at step {step}", step=step) from exc
        max_drift = np.maximum(max_drift, np.abs(_invariant_sums(y) - sums0) / norm)
        if step % output_every == 0 or step == steps:
            times.append(step * dt)
            states.append(y.copy())
            macros.append(_macro_cells(y))
    return SlabSeries(
        times=np.array(times),
        states=np.array(states),
        macros=np.array(macros),
        conservation=ConservationReport(initial_sums=sums0, max_drift=max_drift),
    )


def _macro_cells(values: np.ndarray) -> np.ndarray:
    return np.array([_macro_row(values[m]) for m in range(values.shape[0])])


def directional_second_moments(partition: Partition, duals: DualBasisSet,
                               values: np.ndarray) -> np.ndarray:
    """Directional second moments int xi_l^2 f dxi of the reconstruction.

    Uses the dual-basis reconstruction f = sum_j N[alpha, j] eta[alpha, j]
    inside each cell, whose moments are exact box integrals.
    """
    duals.check_partition(partition)
    unit2 = ((2, 0, 0), (0, 2, 0), (0, 0, 2))
    out = np.zeros(3)
    for cell in partition.cells:
        d = duals.matrices[cell.index]
        for axis in range(3):
            mono = {unit2[axis]: 1.0}
            psi_moms = np.array([
                poly_cell_integral(poly_product(_PSI_MONOS[p], mono), cell.lower, cell.upper)
                for p in range(5)
            ])
            eta_moms = d @ psi_moms
            out[axis] += float(eta_moms @ values[cell.index])
    return out
