//! Feature-heterogeneity measurement with energy distance.
//!
//! The crate computes the energy distance `D²(X, Y) = 2E‖X−Y‖ − E‖X−X′‖ − E‖Y−Y′‖`
//! and its normalized form, the energy coefficient `H = D² / (2E‖X−Y‖) ∈ [0, 1]`,
//! along two routes:
//!
//! * [`empirical`]: the exact pairwise V-statistic, quadratic in sample size.
//!   This is the reference every other path is checked against.
//! * [`approx`]: linear-time estimates built from per-dimension moment
//!   summaries ([`moments::MomentSummary`]), using a second-order Taylor
//!   expansion of `√z`, the closed-form Gaussian expectations, and a
//!   skewness/kurtosis adjusted variant of the latter.
//!
//! Summaries are small (`O(d)`) and mergeable, so nodes can publish them
//! instead of raw data; [`proto`] implements a coordinator that assembles the
//! pairwise H matrix from such messages. [`testing`] provides a permutation
//! two-sample test, and [`synth`] seeded samplers with closed-form moments.

pub mod approx;
pub mod dataset;
pub mod empirical;
pub mod error;
pub mod estimate;
pub mod moments;
pub mod proto;
pub mod special;
pub mod synth;
pub mod testing;

pub use dataset::DatasetMatrix;
pub use error::{Error, Result};
pub use estimate::{DistanceEstimate, Flag, Flags, Method, Terms};
pub use moments::{MomentSummary, Order};
