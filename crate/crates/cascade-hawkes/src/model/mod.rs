//! Domain types, intensity functions, compensator, and exact log-likelihood
//! for the stance- and tweet-type-marked multivariate Hawkes model.
//!
//! The conditional intensity of stance `k` is
//!
//! ```text
//! lambda_k(t) = mu_k * T * f(t; x)
//!             + sum_{j: t_j < t} delta_{r_j} * gamma_{k_j,k} * n_j * omega_k * e^{-omega_k (t - t_j)}
//! ```
//!
//! where `f` is the truncated-exponential density on `[0, T]` with scale `x`,
//! `delta_r` scales the influence of the triggering tweet's type, `gamma` is
//! the row-stochastic stance influence matrix, and `n_j` is the audience mass
//! (reach) of event `j` over the follower graph. The `mu_k * T` normalization
//! makes the expected immigrant count `mu_k * T`, which is the convention the
//! EM updates and the reported parameter tables are consistent with.
//!
//! All operations are pure functions of immutable inputs and are safe for
//! concurrent read-only use.

mod graph;
mod intensity;
mod likelihood;
mod types;

pub use graph::FollowerGraph;
pub use intensity::{
    compensator, immigrant_intensity, stance_intensity, total_intensity, trunc_exp_cdf,
    trunc_exp_mean, trunc_exp_pdf,
};
pub use likelihood::{event_intensity, log_likelihood, rescaled_interarrivals};
pub use types::{
    AncestorSet, Cascade, CountsTable, Event, IntensityBreakdown, ModelParams, Stance, TweetType,
    BETA_FOLLOW, BETA_REPLY_VIEW, SIMPLEX_TOL,
};

pub(crate) use intensity::EXP_UNDERFLOW;
