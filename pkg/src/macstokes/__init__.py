"""MAC staggered-grid Stokes discretization, projection-based block
preconditioners, GMRES, and spectral verification tools."""

from .grid import (
    BlockVector,
    BoundaryKind,
    DofLayout,
    Field,
    GridSpec,
    dof_counts,
    linear_index,
    square_spec,
)
from .linalg import (
    DenseSpdFactorization,
    EigenSolveError,
    FactorizationError,
    GmresConfig,
    IncompatibleRhsError,
    IterationReport,
    SpdFactorization,
    dense_eigenvalues,
    gmres,
    poisson_solve,
    spd_factorize,
)
from .operators import (
    OneDBlocks,
    ProblemParams,
    SaddleOperator,
    StokesOperators,
    assemble_divergence,
    assemble_gradient,
    assemble_momentum,
    assemble_pressure_laplacian,
    assemble_saddle,
    assemble_velocity_laplacian,
    build_1d_blocks,
    build_stokes_operators,
    commutator_closed_form,
    commutator_matrix,
    export_matrix_market,
    scaled_unsteady_params,
    steady_params,
)
from .preconditioners import (
    PrecondKind,
    Preconditioner,
    PreconditionerContext,
    build_context,
    build_preconditioner,
)
from .spectral import (
    SpectralReport,
    analyze_steady,
    make_report,
    schur_complement_dense,
    sigma_route_lambdas,
    sinv_s_dense,
    verify_commutator_rank,
    verify_preconditioned_structure,
    verify_unsteady_bounds,
)
from .experiments import (
    TableCell,
    TaylorVortexParams,
    advection_term,
    build_forcing,
    convergence_study,
    run_table,
    run_table_cell,
    sample_taylor,
    solve_one_step,
    taylor_exact,
    taylor_spec,
)

__version__ = "0.1.0"
