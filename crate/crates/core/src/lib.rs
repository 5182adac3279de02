//! Deconfounding scores for ATT estimation under weak overlap.
//!
//! The crate is organised around six pieces:
//!
//! * [`glm`]: penalized linear/logistic regression (LASSO, Ridge) with
//!   cross-validated regularization, used to estimate the prognostic
//!   direction `alpha` and the propensity direction `beta`.
//! * [`scores`]: the closed-form hyperbola family of linear deconfounding
//!   scores spanned by `alpha` and `beta`, parameterized by `w in [-1, 1]`
//!   (`w = -1` is the prognostic score, `w = 1` the balancing score).
//! * [`estimators`]: Hajek IPW / AIPW and outcome-regression ATT estimators on
//!   raw covariates or on a scalar score, with propensity trimming and the
//!   covariate fallback rules.
//! * [`overlap`]: overlap divergence under the Gaussian design (nested
//!   Gauss-Hermite quadrature and closed forms), Monte Carlo oracles for the
//!   confounding bias and the overlap-improvement identity, and the
//!   semiparametric efficiency bound.
//! * [`dgp`]: the sparse linear-Gaussian simulation design.
//! * [`harness`]: dataset/config/report I/O, the simulation grid, overlap
//!   curves and the bundled verification suite.

pub mod dgp;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod harness;
pub mod overlap;
pub mod quadrature;
pub mod rng;
pub mod scores;
pub mod special;

pub use error::{Error, Result};
