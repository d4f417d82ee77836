//! Equal-opportunity ranking under disparate uncertainty.
//!
//! Candidates carry calibrated relevance probabilities and a group label.
//! A top-k prefix is fair in this sense when it contains the same fraction
//! of every group's expected relevant candidates; the per-prefix slack is
//! `δ(σ_k)`. The crate provides the criterion and cost model, the greedy
//! EOR merge and the baseline policies, an LP/ILP layer that certifies how
//! far EOR is from the cost optimum, evaluation metrics, and synthetic
//! scenario generators.

pub mod cost;
pub mod delta;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod optim;
pub mod policies;
pub mod pool;
pub mod ranking;
pub mod rng;
pub mod synth;

pub use cost::{candidate_cost, posterior_predictive_mean, InclusionEstimate, TopK};
pub use delta::{delta_multi, delta_signed, delta_trace, DeltaTrace};
pub use error::{Error, Result};
pub use policies::{PolicyKind, PolicySpec};
pub use pool::{Candidate, CandidatePool, GroupStats, Mode, Relevance};
pub use ranking::Ranking;
