"""Concentration bounds for functions of dependent finite-state random vectors."""

__version__ = "0.1.0"

from .bounds import (
    TailBound,
    azuma_bound,
    azuma_tail,
    chatterjee_tail,
    decomposition_widths,
    entropy_tensorization_check,
    herbst_residual,
    martingale_differences,
    martingale_tail,
    mcdiarmid_tail,
    samson_tail,
    subgaussian_check,
    tc_check,
    tensorized_tc_constant,
    tensorized_tc_tail,
)
from .errors import *  # noqa: F401,F403
from .gamma import (
    GammaMatrix,
    MarkovChainView,
    gamma_blocks,
    gamma_chazottes,
    gamma_goldstein,
    gamma_kulske,
    gamma_markov_theta,
    gamma_markov_theta_for,
)
from .mixing import (
    comparison_bound,
    comparison_matrix,
    cond_exp_operator,
    dobrushin_theta,
    interdependence_matrix,
    spectral_radius,
    verify_wasserstein_matrix,
)
from .model import CoordinateSpace, JointLaw, ProductModel, lipschitz_seminorm, marginal_conditional, oscillation_vector
from .transport import herbst_integral, kl, log_mgf, tilt, tv, w1, wbar
from .validate import exact_tail, exact_tails, gibbs_sampler_kernel, mc_sample, soundness_suite
