"""Guaranteed amplitude bounds for discrete-time Lur'e feedback loops.

The package computes certified gains ``gamma*`` for the interconnection of a
linear plant with the subgradient of a convex function, by searching over
FIR multiplier parameters subject to a doubly-hyperdominant cone constraint
and solving the resulting semidefinite programs with an embedded
interior-point solver (or an external one).
"""

from .statespace import (
    DimensionError,
    Realization,
    PlantRealization,
    LiftedRealization,
    FilterRealization,
    AugmentedRealization,
    lift,
    interconnect,
    is_schur,
    freq_response,
    simulate,
)
from .multiplier import (
    MultiplierParam,
    HyperdominanceReport,
    jordan_filter,
    fir_filter,
    combined_filter,
    supply_matrix,
    terminal_cost,
    m_matrix,
    check_hyperdominance,
    hyperdominance_constraints,
    random_feasible_param,
)
from .convexfn import (
    ConvexFunctionOracle,
    ConjugateOracle,
    Quadratic,
    MaxAffine,
    ScaledAbs,
    SlopeRestricted,
    BUILTIN_KINDS,
    make_builtin,
    check_cyclic_monotonicity,
    verify_subgradient_dissipation,
    verify_conjugate_dissipation,
    verify_storage_decrease,
    prox,
)
from .solver import (
    ConicProblem,
    ConeDims,
    SolveResult,
    SolverOptions,
    solve,
    svec,
    smat,
    BACKENDS,
)
from .lmi import (
    MatrixVariable,
    VariableTable,
    AffineMatrixExpr,
    MatrixConstraint,
    LmiSystem,
    flatten,
    verify_certificates,
    kyp_lmi,
    fdi_check,
    kyp_feasible,
    assemble_analysis_lmis,
    CertificateSet,
    extract_state_bound,
)
from .analysis import (
    AnalysisRequest,
    AnalysisResult,
    compute_gamma_star,
    verify_iqc_empirically,
    stability_energy_check,
    builtin_plant,
    MODES,
)
from .sim import (
    Trajectory,
    simulate_lure,
    loop_residuals,
    check_amplitude_bound,
    LoopResolutionError,
)

__version__ = "0.1.0"
