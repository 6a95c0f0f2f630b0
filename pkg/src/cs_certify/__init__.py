"""Compressed-sensing imaging recoverability toolkit.

Construct the sensing matrices of sub-sampled imaging pipelines,
certify their unique sparse-recovery capacity (exact Spark and minimum
nullspace l1/l2 ratio at small scale, a semidefinite relaxation at
working scale), and validate the certificates with Basis Pursuit
phase-transition experiments.
"""

from .bases import (
    Basis,
    BasisKind,
    MuraGrid,
    MuraOperator,
    generate_basis,
    mura_operator,
    mura_pattern,
    wavelet_matrix,
)
from .certify import (
    Certificate,
    SdpOptions,
    SolverReport,
    certificate_coherence,
    certificate_exact_small,
    coherence_spark_bound,
    kron_recovery_bound,
    nullspace_basis,
    recovery_kmax,
    spark_bruteforce,
    ssp_exact_small,
    ssp_sdp_lower_bound,
)
from .errors import (
    CardinalityError,
    ConfigError,
    CsCertifyError,
    DimensionMismatchError,
    InfeasibleError,
    ParameterError,
    SizeCapError,
)
from .experiment import PRESETS, ModalityPreset, run_experiment, validate_config
from .masks import (
    Mask,
    MaskKind,
    explicit_mask,
    full_mask,
    generate_mask,
    is_separable,
    load_mask,
    mask_ratio,
    save_mask,
)
from .recovery import (
    BpOptions,
    BpResult,
    PhaseTransitionConfig,
    PhaseTransitionResult,
    bp_lp_reference,
    bp_solve,
    bp_solve_report,
    phase_transition,
    recovery_success,
)
from .sensing import (
    SensingSystem,
    SparseImage,
    acquire_full,
    analyze_image,
    build_sensing,
    build_sensing_operator,
    random_sparse,
    realify,
    rebuild_sensing,
    synthesize_image,
    unvec,
    vec,
)

__version__ = "0.1.0"
