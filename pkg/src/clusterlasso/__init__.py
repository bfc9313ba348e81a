"""Simulation and verification toolkit for l1-penalized regression under
clustered Gaussian-mixture designs: sample the design model, solve the
penalized program, build the cluster-representative proxy, and measure every
constant, assumption and probabilistic event of the prediction bound under
seeded Monte Carlo."""

from .harness import ExperimentConfig, load_config, run_experiment, run_trial
from .lasso import (
    LassoSolution,
    SolverConvergenceError,
    default_lambda,
    prediction_error,
    solve,
    solver_backend,
)
from .linalg import (
    SpectralReport,
    coherence,
    gram_deviation,
    normalize_columns,
    solve_gram_system,
    spectral_norm,
)
from .mixture import (
    CenterMatrix,
    DesignInstance,
    MixtureSpec,
    draw_active_set,
    gaussian_centers,
    orthonormal_centers,
    rng_from_key,
    sample_design,
)
from .proxy import (
    GroundTruth,
    ProxyVector,
    TruthRule,
    best_representatives,
    build_beta_star,
    proxy_discrepancy,
    sample_ground_truth,
)
from .tails import concentration_suite
from .theory import (
    BoundConstants,
    BoundParams,
    check_assumptions,
    check_events,
    compute_constants,
    decomposition_norms,
    delta_lower_bound,
    theorem_rhs,
)

__version__ = "0.1.0"
