"""Binary collision mechanics: post-collision velocities, scattering rate,
and the pair-energy cutoff that keeps collisions inside the truncated domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ScatteringModel", "post_collision", "energy_cutoff", "scattering_rate"]


@dataclass(frozen=True)
class ScatteringModel:
    """Isotropic scattering rate B(V) = C * |V|**nu.

    kind "hard-sphere" pins nu = 1; "vhs" (variable hard sphere) accepts
    nu in [0, 1], with nu = 0 the Maxwell-like constant-rate limit.
    """

    kind: str = "hard-sphere"
    rate_constant: float = 1.0
    vhs_exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("hard-sphere", "vhs"):
            raise ValueError(f"unknown scattering kind {self.kind!r}")
        if not self.rate_constant > 0.0:
            raise ValueError(f"rate_constant must be > 0, got {self.rate_constant}")
        if self.kind == "hard-sphere" and self.vhs_exponent != 1.0:
            raise ValueError("hard-sphere model has vhs_exponent fixed to 1")
        if not 0.0 <= self.vhs_exponent <= 1.0:
            raise ValueError(f"vhs_exponent must be in [0, 1], got {self.vhs_exponent}")


def post_collision(xi, xi_star, omega):
    """Post-collision pair for scattering direction omega (unit vector).

    xi' = m + |V|/2 * omega, xi*' = m - |V|/2 * omega with m the pair
    midpoint and V the relative velocity; momentum is conserved exactly
    and energy up to rounding. Broadcasts over leading axes.
    """
    xi = np.asarray(xi, dtype=float)
    xi_star = np.asarray(xi_star, dtype=float)
    omega = np.asarray(omega, dtype=float)
    norm = np.sqrt(np.sum(omega * omega, axis=-1))
    if np.any(np.abs(norm - 1.0) > 1e-12):
        raise ValueError("omega must be a unit vector (|omega| = 1 within 1e-12)")
    mid = 0.5 * (xi + xi_star)
    half_v = 0.5 * np.sqrt(np.sum((xi - xi_star) ** 2, axis=-1))
    step = half_v[..., None] * omega
    return mid + step, mid - step


def energy_cutoff(xi, xi_star, energy_cap: float):
    """Indicator of |xi|^2 + |xi*|^2 <= energy_cap (closed inequality)."""
    xi = np.asarray(xi, dtype=float)
    xi_star = np.asarray(xi_star, dtype=float)
    total = np.sum(xi * xi, axis=-1) + np.sum(xi_star * xi_star, axis=-1)
    return total <= energy_cap


def scattering_rate(model: ScatteringModel, xi, xi_star):
    """Rate B = C * |xi - xi*|**nu; depends on the pair only through |V|."""
    xi = np.asarray(xi, dtype=float)
    xi_star = np.asarray(xi_star, dtype=float)
    v = np.sqrt(np.sum((xi - xi_star) ** 2, axis=-1))
    nu = model.vhs_exponent
    if nu == 0.0:
        return model.rate_constant * np.ones_like(v)
    if nu == 1.0:
        return model.rate_constant * v
    return model.rate_constant * v**nu
