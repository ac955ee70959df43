"""Koopman-operator flow approximation and density propagation.

The package approximates the solution flow of Hamiltonian systems on a
truncated orthonormal polynomial basis (analytically by Galerkin projection
or numerically from snapshot data), inverts the resulting polynomial map by
switching the time boundaries, and propagates full probability densities by
evaluating the prior through the inverted map.  A least-squares polynomial
reduction keeps the log-density representation tractable across repeated
propagation legs.
"""

from .basis import (
    BasisSet,
    BoxDomain,
    Quadrature,
    default_quadrature,
    enumerate_indices,
    gram_matrix,
    inner_product,
)
from .dynamics import (
    DuffingParams,
    SnapshotSet,
    SystemModel,
    duffing_energy,
    duffing_rhs,
    duffing_system,
    generate_snapshots,
    harmonic_oscillator,
    integrate,
    integrate_batch,
    jacobian_trace,
    trajectory,
)
from .errors import (
    ConfigError,
    EigendecompositionError,
    ExtrapolationWarning,
    GridValueError,
    ImaginaryPartWarning,
    IntegrationError,
    KopropError,
    MatrixLogBranchError,
    NumericsError,
    RankDeficiencyError,
)
from .koopman import (
    FlowMap,
    KoopmanModel,
    discrete_to_continuous,
    edmd_koopman,
    eigendecompose,
    forward_flow,
    galerkin_koopman,
    identity_observable,
    inverse_flow,
    observable_matrix_edmd,
    observable_matrix_galerkin,
)
from .reduce import (
    ReductionConfig,
    build_design_matrix,
    credible_region,
    fit_coefficients,
    reduce_logpdf,
)
from .updf import (
    GaussianPdf,
    GridEvaluation,
    PolyLogPdf,
    evaluate_on_grid,
    log_gaussian,
    pdf_observable_row,
    propagate_logpdf_inverse,
    propagate_pdf_inverse,
    propagate_pdf_observable,
)
from .validate import (
    ComparisonReport,
    McEnsemble,
    density_estimate,
    eigenvalue_report,
    grid_l2,
    max_pointwise,
    mc_propagate,
    silverman_bandwidth,
    state_error_series,
)

__version__ = "0.1.0"
