//! Relative standard deviation fixed-width stopping rule.
//!
//! A run terminates at the first scheduled check where, for every
//! coordinate `i`,
//!
//! ```text
//! w_i(n, delta) + p(n) <= epsilon * lambda_hat_i(n)
//! ```
//!
//! with `w_i = 2 z_{delta/2} sigma_hat_i / sqrt(n)` the confidence interval
//! width and `p(n) = epsilon * 1{n <= n*} + 1/n` the padding term. Checks are
//! aligned to batch boundaries: the first at the first boundary with
//! `n >= n*`, then every `m` completed batches, extended by one batch when
//! the completed-batch count would otherwise be odd.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::accumulators::MomentAccumulator;
use crate::batch_means::{ubm_sigma2, validate_tau, AbmState, DEFAULT_TAU};
use crate::diagnostics::{column, ess_acf, ReportedEss};
use crate::error::{Error, Result};
use crate::normal::two_sided_critical;
use crate::report::{CoordinateReport, RunStatus, TerminationReport, Timing};
use crate::source::SampleSource;

/// How coordinates with zero posterior standard deviation enter the
/// termination decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegeneratePolicy {
    /// Left out of the all-satisfied conjunction, reported.
    #[default]
    Exclude,
    /// Never satisfied, so a frozen coordinate blocks termination.
    Block,
}

/// Source of the asymptotic variance estimate used at each check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceEstimator {
    /// Streaming power-of-two batch means.
    #[default]
    Abm,
    /// Usual batch means recomputed over the stored chain.
    Ubm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwsrConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub n_star: u64,
    pub check_gap_batches: u32,
    pub tau: f64,
    pub max_iterations: u64,
    pub degenerate_policy: DegeneratePolicy,
    pub estimator: VarianceEstimator,
    /// Keep the full chain so autocorrelation ESS can be reported. Implied
    /// by [`VarianceEstimator::Ubm`].
    pub retain_chain: bool,
}

pub const DEFAULT_N_STAR: u64 = 1 << 14;
pub const DEFAULT_CHECK_GAP: u32 = 20;
pub const DEFAULT_MAX_ITERATIONS: u64 = 100_000_000;

impl Default for FwsrConfig {
    fn default() -> Self {
        FwsrConfig {
            epsilon: 0.05,
            delta: 0.05,
            n_star: DEFAULT_N_STAR,
            check_gap_batches: DEFAULT_CHECK_GAP,
            tau: DEFAULT_TAU,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            degenerate_policy: DegeneratePolicy::Exclude,
            estimator: VarianceEstimator::Abm,
            retain_chain: false,
        }
    }
}

impl FwsrConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        FwsrConfig {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.n_star < 4 {
            return bad(format!("n_star must be at least 4, got {}", self.n_star));
        }
        if self.check_gap_batches < 1 {
            return bad("check gap must be at least one batch".into());
        }
        if self.max_iterations <= self.n_star {
            return bad(format!(
                "max_iterations ({}) must exceed n_star ({})",
                self.max_iterations, self.n_star
            ));
        }
        validate_tau(self.tau)
    }

    fn keeps_chain(&self) -> bool {
        self.retain_chain || self.estimator == VarianceEstimator::Ubm
    }
}

/// `2 z_{delta/2} sqrt(sigma2 / n)`.
pub fn interval_width(sigma2: f64, n: u64, delta: f64) -> Result<f64> {
    let z = two_sided_critical(delta)?;
    width_with_z(sigma2, n, z)
}

fn width_with_z(sigma2: f64, n: u64, z: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InsufficientData(
            "interval width needs n >= 1".into(),
        ));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variance must be non-negative, got {sigma2}"
        )));
    }
    Ok(2.0 * z * (sigma2 / n as f64).sqrt())
}

/// `epsilon * 1{n <= n*} + 1/n`.
pub fn padding(n: u64, cfg: &FwsrConfig) -> f64 {
    let minimum_effort = if n <= cfg.n_star { cfg.epsilon } else { 0.0 };
    minimum_effort + 1.0 / n.max(1) as f64
}

/// Smallest ESS implied by termination: `4 z_{delta/2}^2 / epsilon^2`.
pub fn min_ess_bound(epsilon: f64, delta: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let z = two_sided_critical(delta)?;
    Ok(4.0 * z * z / (epsilon * epsilon))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateCheck {
    pub sigma2: f64,
    pub lambda_hat: f64,
    pub width: f64,
    /// `epsilon * lambda_hat`.
    pub threshold: f64,
    pub satisfied: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub n: u64,
    pub batch_size: u64,
    pub completed_batches: usize,
    pub padding: f64,
    pub coordinates: Vec<CoordinateCheck>,
    pub all_satisfied: bool,
}

impl CheckResult {
    pub fn degenerate_count(&self) -> usize {
        self.coordinates.iter().filter(|c| c.degenerate).count()
    }
}

/// Evaluates the criterion from explicit variance estimates.
pub fn evaluate(
    n: u64,
    sigma2: &[f64],
    lambda_hat: &[f64],
    cfg: &FwsrConfig,
) -> Result<CheckResult> {
    if sigma2.len() != lambda_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda_hat.len(),
            actual: sigma2.len(),
        });
    }
    let z = two_sided_critical(cfg.delta)?;
    let pad = padding(n, cfg);
    let coordinates = sigma2
        .iter()
        .zip(lambda_hat)
        .map(|(&s2, &lam)| {
            let width = width_with_z(s2, n, z)?;
            let threshold = cfg.epsilon * lam;
            // Zero sample variance forces zero batch-mean variance, so
            // lambda_hat = 0 alone marks a frozen coordinate.
            let degenerate = lam == 0.0;
            Ok(CoordinateCheck {
                sigma2: s2,
                lambda_hat: lam,
                width,
                threshold,
                satisfied: !degenerate && width + pad <= threshold,
                degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_satisfied = coordinates.iter().all(|c| match cfg.degenerate_policy {
        DegeneratePolicy::Exclude => c.degenerate || c.satisfied,
        DegeneratePolicy::Block => c.satisfied,
    });
    Ok(CheckResult {
        n,
        batch_size: 0,
        completed_batches: 0,
        padding: pad,
        coordinates,
        all_satisfied,
    })
}

/// Evaluates the criterion from the streaming state.
pub fn check(abm: &AbmState, moments: &MomentAccumulator, cfg: &FwsrConfig) -> Result<CheckResult> {
    let sigma2 = abm.sigma2()?;
    let lambda_hat = moments.posterior_sd()?;
    let mut res = evaluate(moments.count(), &sigma2, &lambda_hat, cfg)?;
    res.batch_size = abm.batch_size();
    res.completed_batches = abm.completed_batches();
    Ok(res)
}

/// Receives progress from a running stopping rule.
pub trait ProgressSink {
    fn on_check(&mut self, _check: &CheckResult) {}

    fn on_sample(&mut self, _x: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// Collects every check; handy for tests and progress displays.
#[derive(Debug, Default)]
pub struct CheckLog {
    pub checks: Vec<CheckResult>,
}

impl ProgressSink for CheckLog {
    fn on_check(&mut self, check: &CheckResult) {
        self.checks.push(check.clone());
    }
}

/// State of one sequential run. Use [`run_until_stop`] unless the stored
/// chain is needed afterwards.
pub struct FwsrRun {
    cfg: FwsrConfig,
    z: f64,
    moments: MomentAccumulator,
    abm: AbmState,
    chain: Option<Vec<f64>>,
    checks: u64,
    estimation_seconds: f64,
}

impl FwsrRun {
    pub fn new(cfg: FwsrConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(FwsrRun {
            z: two_sided_critical(cfg.delta)?,
            moments: MomentAccumulator::new(dim)?,
            abm: AbmState::new(dim, cfg.tau)?,
            chain: cfg.keeps_chain().then(Vec::new),
            cfg,
            checks: 0,
            estimation_seconds: 0.0,
        })
    }

    pub fn config(&self) -> &FwsrConfig {
        &self.cfg
    }

    pub fn moments(&self) -> &MomentAccumulator {
        &self.moments
    }

    pub fn abm(&self) -> &AbmState {
        &self.abm
    }

    /// The stored chain, row-major, when retention is enabled.
    pub fn chain(&self) -> Option<&[f64]> {
        self.chain.as_deref()
    }

    fn sigma2(&self) -> Result<Vec<f64>> {
        match (self.cfg.estimator, &self.chain) {
            (VarianceEstimator::Ubm, Some(chain)) => {
                ubm_sigma2(chain, self.abm.dim(), self.cfg.tau)
            }
            _ => self.abm.sigma2(),
        }
    }

    fn run_check(&mut self) -> Result<CheckResult> {
        let start = Instant::now();
        let sigma2 = self.sigma2()?;
        let lambda_hat = self.moments.posterior_sd()?;
        let mut res = evaluate(self.moments.count(), &sigma2, &lambda_hat, &self.cfg)?;
        self.estimation_seconds += start.elapsed().as_secs_f64();
        res.batch_size = self.abm.batch_size();
        res.completed_batches = self.abm.completed_batches();
        self.checks += 1;
        Ok(res)
    }

    /// Pulls samples until the rule fires, the source ends, or the
    /// iteration cap is reached.
    pub fn run<S: SampleSource + ?Sized>(
        &mut self,
        source: &mut S,
        sinks: &mut [&mut dyn ProgressSink],
    ) -> Result<TerminationReport> {
        let dim = self.abm.dim();
        if source.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: source.dim(),
            });
        }
        let started = Instant::now();
        let mut buf = vec![0.0; dim];
        let gap = self.cfg.check_gap_batches;
        // Batches remaining until the next check; None before the first.
        let mut countdown: Option<u32> = None;
        let status = loop {
            if self.moments.count() >= self.cfg.max_iterations {
                break RunStatus::MaxIter;
            }
            if !source.next_into(&mut buf)? {
                break RunStatus::Truncated;
            }
            self.moments.push(&buf)?;
            let boundary = self.abm.push(&buf)?;
            if let Some(chain) = &mut self.chain {
                chain.extend_from_slice(&buf);
            }
            for sink in sinks.iter_mut() {
                sink.on_sample(&buf)?;
            }
            if !boundary {
                continue;
            }
            let due = match countdown.as_mut() {
                None => self.moments.count() >= self.cfg.n_star,
                Some(k) => {
                    *k -= 1;
                    *k == 0
                }
            };
            if !due {
                continue;
            }
            if countdown.is_some() && self.abm.completed_batches() % 2 == 1 {
                countdown = Some(1);
                continue;
            }
            countdown = Some(gap);
            let res = self.run_check()?;
            for sink in sinks.iter_mut() {
                sink.on_check(&res);
            }
            if res.all_satisfied {
                break RunStatus::Terminated;
            }
        };
        Ok(self.report(status, started.elapsed().as_secs_f64()))
    }

    /// Summarises the current state.
    pub fn report(&self, status: RunStatus, wall_seconds: f64) -> TerminationReport {
        let n = self.moments.count();
        let dim = self.abm.dim();
        let mean = self.moments.mean().ok();
        let lambda_hat = self.moments.posterior_sd().ok();
        let sigma2 = self.sigma2().ok();
        let coordinates = (0..dim)
            .map(|i| {
                let lam = lambda_hat.as_ref().map(|l| l[i]);
                let s2 = sigma2.as_ref().map(|s| s[i]);
                let degenerate = lam == Some(0.0);
                let mcse = s2.map(|s2| (s2 / n as f64).sqrt());
                let width = mcse.map(|se| 2.0 * self.z * se);
                let m = mean.map(|m| m[i]);
                let ess_acf = self
                    .chain
                    .as_deref()
                    .and_then(|c| ess_acf(&column(c, dim, i)).ok())
                    .map(|v| ReportedEss::new(v, n));
                CoordinateReport {
                    index: i,
                    mean: m,
                    mcse,
                    ci_low: m.zip(mcse).map(|(m, se)| m - self.z * se),
                    ci_high: m.zip(mcse).map(|(m, se)| m + self.z * se),
                    lambda_hat: lam,
                    sigma2: s2,
                    width_ratio: match (width, lam) {
                        (Some(w), Some(l)) if l > 0.0 => Some(w / l),
                        _ => None,
                    },
                    ess_ratio: match (lam, s2) {
                        (Some(l), Some(s2)) if l > 0.0 && s2 > 0.0 => {
                            Some(ReportedEss::new(n as f64 * l * l / s2, n))
                        }
                        (Some(l), Some(_)) if l > 0.0 => Some(ReportedEss::new(f64::INFINITY, n)),
                        _ => None,
                    },
                    ess_acf,
                    degenerate,
                }
            })
            .collect::<Vec<_>>();
        TerminationReport {
            status,
            n_stop: n,
            epsilon: self.cfg.epsilon,
            delta: self.cfg.delta,
            n_star: self.cfg.n_star,
            check_gap_batches: self.cfg.check_gap_batches,
            tau: self.cfg.tau,
            estimator: self.cfg.estimator,
            degenerate_policy: self.cfg.degenerate_policy,
            z_critical: self.z,
            min_ess_bound: 4.0 * self.z * self.z / (self.cfg.epsilon * self.cfg.epsilon),
            batch_size: self.abm.batch_size(),
            completed_batches: self.abm.completed_batches(),
            degenerate_count: coordinates.iter().filter(|c| c.degenerate).count(),
            coordinates,
            timing: Timing {
                wall_seconds,
                estimation_seconds: self.estimation_seconds,
                checks_performed: self.checks,
            },
        }
    }
}

/// Runs the stopping rule on `source` and reports at termination.
pub fn run_until_stop<S: SampleSource + ?Sized>(
    source: &mut S,
    cfg: &FwsrConfig,
    sinks: &mut [&mut dyn ProgressSink],
) -> Result<TerminationReport> {
    FwsrRun::new(*cfg, source.dim())?.run(source, sinks)
}
