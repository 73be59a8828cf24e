"""Numerical machinery for planar inverse problems with polyharmonic operators:
Cauchy transforms, oscillatory (complex-geometric-optics) solutions, and
stationary-phase recovery of lower-order coefficient differences."""

from .cauchy import (
    CauchyKernel,
    DecayProbe,
    d_inv,
    d_inv_pow,
    dbar_inv,
    dbar_inv_pow,
    kernel_for,
    lp_bound_constant,
    oscillatory_decay_probe,
    set_fft_workers,
)
from .cgo import (
    AmplitudeSpec,
    CGODiagnostics,
    CGOSolution,
    NormProbe,
    OscillatoryTransport,
    apply_transport,
    build_adjoint_cgo,
    build_cgo,
    residual_norm,
    smooth_random_field,
    solve_density,
    transport_norm_probe,
    transport_source,
)
from .errors import (
    ConfigError,
    CouplingError,
    DegenerateProbeError,
    MaxTermsExceededError,
    NonContractionError,
)
from .expressions import (
    ExpressionError,
    constant_from_expression,
    field_from_expression,
    parse_expression,
)
from .grid import (
    ComplexGrid,
    ScalarField,
    integrate,
    masked_l2,
    mixed_wirtinger,
    norm_hm,
    norm_lp,
    norm_w1p,
    wirtinger_d,
    wirtinger_dbar,
)
from .operators import (
    DIVERGENCE,
    STANDARD,
    PerturbedOperator,
    adjoint,
    apply,
    to_divergence_form,
    to_standard_form,
)
from .phase import PhaseSpec
from .recovery import (
    AMPLITUDE_ONLY,
    FULL_CGO,
    STATIONARY_PHASE_CONSTANT,
    RecoveryProblem,
    RecoveryReport,
    extraction_noise_floor,
    identity_lhs,
    plateau_cutoff,
    recover_all,
    sample_bilinear,
    stationary_phase_calibration,
    stationary_phase_extract,
)
from .sweeps import DEFAULT_H_SWEEP, SweepTable, fit_loglog_slope

__version__ = "0.1.0"
