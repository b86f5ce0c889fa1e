//! Stance- and tweet-type-marked multivariate Hawkes processes for modeling
//! fake-news cascades on a follower network.
//!
//! The crate provides:
//!
//! - [`model`]: domain types, exact conditional intensities, the closed-form
//!   compensator, and the exact log-likelihood;
//! - [`sim`]: branching-structure simulation of cascades over a follower
//!   graph, plus heavy-tailed network generation;
//! - [`em`]: EM parameter estimation with closed-form M-step updates;
//! - [`io`]: JSONL event logs, CSV follower edge lists, flat parameter files,
//!   and influence (audience reach) resolution;
//! - [`stats`]: the Kolmogorov-Smirnov test used for time-rescaling
//!   goodness-of-fit.
//!
//! Events carry two marks: a tweet type (original, retweet, quote, reply) that
//! scales how strongly the event excites followups, and a stance (supporting
//! or not supporting the news item) coupled across events by a row-stochastic
//! influence matrix. All randomized operations take explicit seeds and are
//! reproducible bit-for-bit.

pub mod cli;
pub mod em;
pub mod error;
pub mod io;
pub mod model;
pub mod sim;
pub mod stats;

pub use error::{HawkesError, Result};
pub use model::{Cascade, Event, FollowerGraph, ModelParams, Stance, TweetType};
