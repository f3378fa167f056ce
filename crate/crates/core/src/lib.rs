//! Streaming output analysis for Markov chain Monte Carlo.
//!
//! The centrepiece is the relative standard deviation fixed-width stopping
//! rule ([`stopping`]): a simulation stops once every coordinate's
//! confidence interval is narrow relative to that coordinate's posterior
//! standard deviation. Asymptotic variances come from a doubling batch
//! means estimator ([`batch_means::AbmState`]) that keeps O(sqrt(n))
//! batch means instead of the whole chain.

// `!(x > 0.0)` style checks are there to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accumulators;
pub mod analysis;
pub mod batch_means;
pub mod chainfile;
pub mod diagnostics;
mod error;
pub mod experiment;
pub mod normal;
pub mod report;
pub mod samplers;
pub mod source;
pub mod stopping;

pub use accumulators::MomentAccumulator;
pub use analysis::{analyze_chain, AnalysisConfig, AnalysisReport};
pub use batch_means::{target_batch_size, ubm_sigma2, AbmState};
pub use error::{Error, Result};
pub use report::{RunStatus, TerminationReport};
pub use source::SampleSource;
pub use stopping::{
    check, interval_width, min_ess_bound, padding, run_until_stop, CheckResult, DegeneratePolicy,
    FwsrConfig, FwsrRun, ProgressSink, VarianceEstimator,
};
