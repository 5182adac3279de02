//! Overlap divergence under the Gaussian design, Monte Carlo oracles and
//! the efficiency bound.

mod divergence;
mod efficiency;
mod link;
mod oracle;
mod owens_t;

pub use divergence::{
    overlap_divergence_closed_form, overlap_divergence_empirical, overlap_divergence_exp_tilt,
    overlap_divergence_indicator, overlap_divergence_quadrature, overlap_divergence_quadrature_counted,
    overlap_divergence_relu, DivergenceEval, QuadratureConfig,
};
pub use efficiency::{efficiency_bound_gaussian, efficiency_bound_with_coefficients, lemma2_lower_bound, EfficiencyBound};
pub use link::{Assumption, LinkKind, LinkSpec};
pub use oracle::{confounding_bias_oracle, deviation_z, lemma3_check, Lemma3Check, McConfig, McEstimate, ROUNDOFF};
pub use owens_t::owens_t;
