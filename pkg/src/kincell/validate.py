"""Invariant checks for a loaded coefficient cache.

Each check compares a measured residual against its contract threshold;
the report prints one table row per check and the CLI maps any failure
to a nonzero exit status.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import collision_invariants, evaluate_dual
from .cache import CacheBundle
from .coefficients import telescoping_residuals
from .kinematics import energy_cutoff, post_collision
from .oracle import oracle_cell_integral

__all__ = ["CheckResult", "ValidationReport", "run_validation"]


@dataclass
class CheckResult:
    name: str
    measured: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_text(self) -> str:
        width = max(len(c.name) for c in self.checks)
        lines = [f"{'check':<{width}}  {'measured':>12}  {'threshold':>12}  status"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(f"{c.name:<{width}}  {c.measured:>12.3e}  {c.threshold:>12.3e}  {status}")
            if c.detail and not c.passed:
                lines.append(f"  -> {c.detail}")
        return "\n".join(lines)


def _check_orthonormality(bundle: CacheBundle, order: int = 6) -> CheckResult:
    worst = 0.0
    worst_cell = -1
    for cell in bundle.partition.cells:
        d = bundle.duals.matrices[cell.index]

        def integrand(points, i, j):
            return evaluate_dual(d, points)[:, i] * collision_invariants(points)[:, j]

        for i in range(5):
            for j in range(5):
                val = oracle_cell_integral(
                    cell, lambda p, i=i, j=j: integrand(p, i, j), order=order)
                residual = abs(val - (1.0 if i == j else 0.0))
                if residual > worst:
                    worst, worst_cell = residual, cell.index
    return CheckResult(
        name="dual-basis orthonormality",
        measured=worst,
        threshold=1e-10,
        passed=worst <= 1e-10,
        detail=f"worst cell {worst_cell}",
    )


def _check_telescoping(bundle: CacheBundle) -> CheckResult:
    worst, worst_at = telescoping_residuals(bundle.collision)
    detail = ""
    if worst_at is not None:
        beta, gamma, j, k, n = worst_at
        detail = f"worst at (beta={beta}, gamma={gamma}, j={j}, k={k}, n={n})"
    return CheckResult(
        name="collision-block telescoping",
        measured=worst,
        threshold=1e-13,
        passed=worst <= 1e-13,
        detail=detail,
    )


def _check_drift_spectra(bundle: CacheBundle) -> CheckResult:
    worst = 0.0
    detail = ""
    for cell in bundle.partition.cells:
        for axis in range(3):
            mat = bundle.drift.axis_matrix(cell.index, axis)
            eigvals = np.linalg.eigvals(mat)
            radius = max(float(np.abs(eigvals).max()), 1e-30)
            imag = float(np.abs(eigvals.imag).max()) / radius
            lo, up = cell.speed_range(axis)
            outside = max(0.0, float(lo - eigvals.real.min()), float(eigvals.real.max() - up))
            measure = max(imag, outside)
            if measure > worst:
                worst = measure
                detail = f"worst at cell {cell.index}, axis {axis}"
    return CheckResult(
        name="drift-matrix spectrum",
        measured=worst,
        threshold=1e-10,
        passed=worst <= 1e-10,
        detail=detail,
    )


def _check_cutoff_invariance(bundle: CacheBundle, draws: int = 100000,
                             seed: int = 20260810) -> CheckResult:
    part = bundle.partition
    h = part.domain.half_width
    energy_cap = part.domain.energy_cap
    rng = np.random.default_rng(seed)
    xi = rng.uniform(-h, h, size=(draws, 3))
    xi_star = rng.uniform(-h, h, size=(draws, 3))
    normals = rng.standard_normal((draws, 3))
    omega = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    keep = energy_cutoff(xi, xi_star, energy_cap)
    xp, xsp = post_collision(xi[keep], xi_star[keep], omega[keep])
    post_energy = np.sum(xp * xp, axis=1) + np.sum(xsp * xsp, axis=1)
    worst = float((post_energy / energy_cap - 1.0).max(initial=0.0))
    return CheckResult(
        name="energy-cutoff invariance",
        measured=max(worst, 0.0),
        threshold=1e-12,
        passed=worst <= 1e-12,
        detail=f"{int(keep.sum())} admissible pairs sampled",
    )


def run_validation(bundle: CacheBundle) -> ValidationReport:
    """Run the full invariant suite against one cache bundle."""
    report = ValidationReport()
    report.checks.append(_check_orthonormality(bundle))
    report.checks.append(_check_telescoping(bundle))
    report.checks.append(_check_drift_spectra(bundle))
    report.checks.append(_check_cutoff_invariance(bundle))
    return report
