"""
Normalized ground states, their y-dependence threshold and the
scattering/blow-up dichotomy for focusing NLS on the waveguide R^d x T.
"""
from .bifurcation import (
    BifurcationResult,
    RhoCertificate,
    c_star_from_lambda,
    find_lambda_star,
    linear_threshold,
    mc_curve,
    rescaling_check,
    rho_certificate,
    solve_at_mass,
    sweep_m1_lambda,
)
from .config import ConfigError, RunConfig, load_config
from .dynamics import (
    EvolutionConfig,
    EvolutionTrace,
    energy_trapping_check,
    evolve,
    strang_step,
    virial_series,
)
from .functionals import (
    ExponentTable,
    MeiCurve,
    ModelParams,
    evaluate,
    exponent_table,
    gn_ratio,
    mei,
    mei_grid,
    scale_Tlambda,
    scale_ut,
    tstar,
)
from .ground_state import (
    EuclideanReference,
    GroundStateSolution,
    SolverConfig,
    compare_with_euclidean,
    euclidean_reference,
    extract_beta,
    minimize_mc,
    pde_residual,
)
from .runner import ResultEnvelope, run, sweep
from .spectral import Field, Grid, make_grid, read_field, write_field

__version__ = "0.1.0"
