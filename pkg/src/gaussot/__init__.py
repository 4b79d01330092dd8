"""Gaussian-relative entropy/transport functionals, their stability bounds,
and a one-dimensional moment-measure solver."""

from .densities import (
    DensityMetadata,
    RelativeDensity,
    from_grid,
    gaussian,
    gaussian_mixture,
    quartic_perturbation,
    recenter,
    scaled_gaussian,
    standard,
    translate,
)
from .functionals import (
    FunctionalValues,
    HypothesisNotMet,
    NotAvailable,
    brascamp_lieb_check,
    cheeger_check,
    cross_term,
    entropy,
    fisher_information,
    functional_values,
    poincare_constant,
)
from .identities import (
    IdentityReport,
    IdentityUnavailable,
    bochner_identity,
    cross_identity,
    ent_iden,
    product_sum,
)
from .kesolver import (
    MomentSolution,
    ShootingError,
    apriori_checks,
    f_gamma,
    j_functional,
    j_max_check,
    local_min_check,
    moment_and_exp_checks,
    solve_1d,
)
from .numerics import (
    Grid1D,
    IntegrationError,
    QuadratureRule,
    convex_envelope,
    gauss_hermite,
    integrate_gamma,
    legendre_transform,
    simpson_rule,
    spectral_gap,
)
from .stability import (
    BoundCheck,
    DeficitReport,
    bound_bgrs,
    bound_fil,
    bound_igncp,
    bound_lsi_cost,
    bound_mainstab,
    bound_tal_w11,
    caffarelli_ratio,
    deficit_report,
    delta,
    delta_lemma_checks,
    delta_star,
    hwi_gap,
    lsi_deficit,
    tal_deficit,
)
from .transport import (
    DiscretePlan,
    TransportPlan1D,
    TransportError,
    duality_residual,
    k_a_cost,
    lp_transport,
    monotone_map,
    quantile_atoms,
    w1,
    w11_product,
    w2,
)

__version__ = "0.1.0"
