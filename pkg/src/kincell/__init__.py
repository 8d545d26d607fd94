"""kincell: velocity-cell moment model of a monatomic gas.

Precomputes the constant drift and collision coefficient tensors of the
closed 5N-moment system on a partitioned, energy-truncated velocity
domain, then integrates spatially homogeneous and 1D slab problems with
machine-precision conservation of mass, momentum, and energy.
"""

from .basis import (
    DualBasis,
    DualBasisSet,
    GramMatrix,
    build_dual_bases,
    build_dual_basis,
    collision_invariant,
    collision_invariants,
    evaluate_dual,
    gram_matrix,
)
from .cache import CacheBundle, load_cache, save_cache
from .coefficients import (
    CollisionTensor,
    DriftTensor,
    McConfig,
    collision_tensor_mc,
    drift_tensor,
    telescoping_residuals,
)
from .config import RunConfig, load_config_file, parse_config, serialize_config
from .errors import (
    CflViolation,
    ConfigError,
    CorruptFile,
    CostGuard,
    EigenFailure,
    HashMismatch,
    IllConditionedCell,
    KincellError,
    NonFiniteState,
    VersionMismatch,
    ZeroDensity,
)
from .geometry import Cell, DomainSpec, Partition, box_monomial_moment, build_uniform_partition
from .kinematics import ScatteringModel, energy_cutoff, post_collision, scattering_rate
from .oracle import (
    QuadratureSpec,
    collision_tensor_quadrature,
    oracle_cell_integral,
    oracle_collision_entry,
    oracle_gaussian_moment,
)
from .solver import (
    ConservationReport,
    HomogeneousState,
    MacroFields,
    SlabState,
    build_upwind,
    directional_second_moments,
    macroscopic_fields,
    project_maxwellian,
    rhs_homogeneous,
    rhs_transport_1d,
    rk4_step,
    run_1d,
    run_homogeneous,
    two_beam_state,
)
from .validate import ValidationReport, run_validation

__version__ = "0.1.0"
