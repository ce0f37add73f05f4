"""Numerical witness toolkit for generalized Hartogs triangles.

The package estimates, at desk scale, every quantity entering the standard
noncompactness argument on a domain ``{ ||'z|| < |z'|^alpha < 1 }``:
boundary moments of norm balls, the radial moment identity, weighted
moments on the triangle itself, and the L2 / graph norms and Gram matrix
of the cutoff form sequence.  Everything is driven by a reproducible,
counter-based Monte Carlo engine.
"""

from .norms import NormSpec, NotDifferentiable, ball_volume, norm_eval, norm_gradient
from .sampling import (
    BallSampler,
    ComplexEstimate,
    ConeBoundarySampler,
    Estimate,
    LowAcceptanceError,
    ProductBallSampler,
    ResampleBudgetError,
    RngStream,
    ball_volume_mc,
    combined_z,
    mc_estimate,
    mc_estimate_vector,
    pool,
    sample_ball,
    sample_cone_boundary,
)
from .domain import (
    DomainParams,
    contains,
    integrate_domain,
    integrate_domain_vector,
    integrate_pullback,
    integrate_pullback_vector,
    make_domain,
    phi,
    phi_jacobian,
)
from .forms import (
    CutoffSpec,
    FormParams,
    chi,
    chi_prime,
    energy_dbar,
    energy_theta,
    rho,
    shell_factors,
    u_nu,
    wirtinger_norm,
)
from .verify import (
    ConfigurationError,
    ConstantsEstimate,
    GammaEntry,
    GammaTable,
    GramResult,
    MomentIdentityResult,
    NormRecord,
    WeightedMomentResult,
    WitnessReport,
    chi_mass,
    estimate_constants,
    gamma_table,
    gram_check,
    moment_identity_check,
    norm_suite,
    run_witness,
    u_norm_closed_form,
    weighted_moment_check,
)

__version__ = "0.1.0"
