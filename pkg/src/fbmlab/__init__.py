"""Numerical laboratory for path-dependent calculus driven by fractional
Brownian motion with long-range dependence (Hurst parameter above one half).

The package samples the driver exactly, realises stopped-path functionals
with horizontal/vertical derivatives, evaluates left-point, midpoint and
Wick-corrected Riemann integrals, verifies the change-of-variables formulas
relating them by Monte Carlo, and connects backward equations with
path-dependent PDEs.  ``fbmlab.cli`` exposes the experiment harness.
"""

from ._version import __version__
from .grids import BROWNIAN_H, HurstParameter, TimeGrid, as_hurst, path_rng
from .fbm import (
    CholeskySampler,
    CirculantSampler,
    FbmPath,
    covariance,
    generate_cholesky,
    generate_circulant,
    increment_autocovariance,
    quadratic_variation,
    refine,
    refine_values,
)
from .functionals import (
    DerivativeEstimate,
    Functional,
    StoppedPath,
    affine,
    constant_functional,
    coordinate,
    cylindrical,
    d_infty,
    horizontal_derivative,
    horizontal_extend,
    product_integral,
    resolve_functional,
    running_integral,
    running_max,
    squared_coordinate,
    stopped,
    time_weighted_square,
    vertical_bump,
    vertical_derivative,
    vertical_second,
    weighted_increment_integral,
)
from .kernel import (
    DerivativeField,
    PhiKernel,
    StepFunction,
    WeightedPolynomial,
    constant_step,
    covariance_phi_integral,
    d_phi_derivative,
    gram_quadratic_batch,
    indicator_inner_product,
    indicator_step,
    malliavin_derivative_path,
    malliavin_derivative_polynomial,
    step_inner_product,
    time_weight_cell_masses,
    wick_cell_corrections,
    wick_correction,
    wis_variance,
)
from .integrals import (
    IntegralSample,
    ItoProcessSpec,
    build_ito_process,
    ito_sum_batch,
    ito_type_sum,
    stratonovich_sum,
    stratonovich_sum_batch,
    wis_sum,
    wis_sum_batch,
)
from .formulas import (
    FormulaCase,
    ResidualReport,
    verify_bm_stratonovich_theorem,
    verify_prop43,
    verify_prop45,
    verify_prop54,
    verify_theorem20,
    verify_theorem32,
    verify_theorem50,
)
from .bsde import (
    BsdeResidualReport,
    BsdeSolution,
    BsdeSpec,
    PicardConfig,
    ZRelationReport,
    beta_norm,
    bsde_from_pde,
    bsde_residual,
    diffusion_coefficient,
    pde_residual,
    pde_residual_along,
    picard_solve,
    z_relation_check,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    StatRow,
    default_config,
    list_experiments,
    run,
    summarize,
)
