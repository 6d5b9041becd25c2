"""Stationary processes and random fields with prescribed marginals.

The dependence driver is a stationary correlated binary sequence with
success probability p and covariance C(|i-j|); observations are drawn
from a target marginal restricted to support cells selected by the
latent bits.  The package provides the exact finite-dimensional law of
the binary sequence, admissibility checking for (p, C) pairs, restricted
sampling for a range of marginals, exact covariance calculators for the
resulting processes and lattice fields, verification statistics, and a
reproducible CLI.
"""

from .covariance import (
    AdmissibleRegion,
    CovarianceFunction,
    ValidityReport,
    admissible_region,
    check_assumption,
    eval_cov,
)
from .errors import (
    CovarianceError,
    CovarianceNotAdmissible,
    GbpfError,
    NegativeGapProbability,
    NotRepresentable,
    RejectionCapExceeded,
    SizeGuardExceeded,
)
from .field import (
    CovarianceDecomposition,
    FieldSample,
    FieldSpec,
    check_zero_conditions,
    covariance_decomposition,
    field_cov_oracle,
    field_joint_cf,
    simulate_field,
    theoretical_field_cov,
)
from .gbp import (
    BinaryPath,
    GapTables,
    GbpModel,
    build_gap_tables,
    config_probability,
    d_operator,
    l_operator,
    sample_path,
    verify_well_defined,
)
from .marginal import (
    BoxUnion,
    ComplementSet,
    Continuous1D,
    CoupledPair,
    Discrete1D,
    IntegerSet,
    IntervalUnion,
    Marginal,
    MultivariateNormal,
    Predicate,
    ProductContinuous,
    SupportSet,
    WeightedAtoms,
    cf_integral,
    complement_set,
    coupled_pair_sample,
    estimate_mass_mc,
    restricted_sample,
    set_mass,
    set_mean,
    set_moment,
)
from .partition import (
    BalancedNested,
    Partition,
    SymmetricNested,
    UserCells,
    build_partition,
    find_balanced_subset,
    two_set_partition,
)
from .presets import PresetBundle, preset, preset_names, uniform_process
from .process import (
    ProcessPath,
    ProcessSpec,
    indicator_cov,
    joint_cf,
    joint_cf_closed_form,
    joint_density_weight,
    moment_cov,
    simulate_process,
    theoretical_cov,
)
from .stats import (
    CfEstimate,
    KsResult,
    LagStatistics,
    autocovariance,
    cross_covariance,
    empirical_cf,
    field_correlogram,
    ks_distance,
    replicate_lag_stats,
)

__version__ = "0.1.0"
