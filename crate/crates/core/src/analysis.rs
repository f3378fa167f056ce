//! Fixed-length analysis of a stored chain: the same estimators the
//! stopping rule uses, evaluated once at the chain's length, plus Geweke.

use serde::{Deserialize, Serialize};

use crate::accumulators::MomentAccumulator;
use crate::batch_means::{validate_tau, AbmState, DEFAULT_TAU};
use crate::diagnostics::{column, ess_acf, geweke, GewekeConfig, ReportedEss};
use crate::error::{Error, Result};
use crate::normal::two_sided_critical;
use crate::stopping::{evaluate, FwsrConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub n_star: u64,
    pub tau: f64,
    pub geweke: GewekeConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let f = FwsrConfig::default();
        AnalysisConfig {
            epsilon: f.epsilon,
            delta: f.delta,
            n_star: f.n_star,
            tau: DEFAULT_TAU,
            geweke: GewekeConfig::default(),
        }
    }
}

impl AnalysisConfig {
    fn criterion(&self) -> FwsrConfig {
        FwsrConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            n_star: self.n_star,
            tau: self.tau,
            ..FwsrConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateAnalysis {
    pub index: usize,
    pub mean: f64,
    pub mcse: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub lambda_hat: f64,
    pub sigma2: f64,
    pub width_ratio: Option<f64>,
    pub satisfied: bool,
    pub ess_ratio: Option<ReportedEss>,
    pub ess_acf: Option<ReportedEss>,
    pub geweke_z: Option<f64>,
    /// `None` when the Geweke statistic is undetermined.
    pub geweke_pass: Option<bool>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub batch_size: u64,
    pub completed_batches: usize,
    /// Whether the relative fixed-width criterion holds at this `n`.
    pub criterion_holds: bool,
    pub degenerate_count: usize,
    /// `None` when the chain is too short for the Geweke segments.
    pub geweke_overall: Option<bool>,
    pub geweke_undetermined: usize,
    pub coordinates: Vec<CoordinateAnalysis>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn analyze_chain(rows: &[f64], dim: usize, cfg: &AnalysisConfig) -> Result<AnalysisReport> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if !rows.len().is_multiple_of(dim) {
        return Err(Error::Format(format!(
            "{} values do not form whole {dim}-vectors",
            rows.len()
        )));
    }
    validate_tau(cfg.tau)?;
    let mut moments = MomentAccumulator::new(dim)?;
    let mut abm = AbmState::new(dim, cfg.tau)?;
    for row in rows.chunks_exact(dim) {
        moments.push(row)?;
        abm.push(row)?;
    }
    let n = moments.count();
    let sigma2 = abm.sigma2()?;
    let lambda_hat = moments.posterior_sd()?;
    let check = evaluate(n, &sigma2, &lambda_hat, &cfg.criterion())?;
    let mean = moments.mean()?;
    let gw = match geweke(rows, dim, &cfg.geweke) {
        Ok(g) => Some(g),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    let zc = two_sided_critical(cfg.delta)?;
    let coordinates = check
        .coordinates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mcse = (c.sigma2 / n as f64).sqrt();
            CoordinateAnalysis {
                index: i,
                mean: mean[i],
                mcse,
                ci_low: mean[i] - zc * mcse,
                ci_high: mean[i] + zc * mcse,
                lambda_hat: c.lambda_hat,
                sigma2: c.sigma2,
                width_ratio: (c.lambda_hat > 0.0).then(|| c.width / c.lambda_hat),
                satisfied: c.satisfied,
                ess_ratio: (c.lambda_hat > 0.0).then(|| {
                    let e = if c.sigma2 > 0.0 {
                        n as f64 * c.lambda_hat * c.lambda_hat / c.sigma2
                    } else {
                        f64::INFINITY
                    };
                    ReportedEss::new(e, n)
                }),
                ess_acf: ess_acf(&column(rows, dim, i))
                    .ok()
                    .map(|e| ReportedEss::new(e, n)),
                geweke_z: gw.as_ref().and_then(|g| g.z[i]),
                geweke_pass: gw.as_ref().and_then(|g| g.converged[i]),
                degenerate: c.degenerate,
            }
        })
        .collect();
    Ok(AnalysisReport {
        n,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        batch_size: abm.batch_size(),
        completed_batches: abm.completed_batches(),
        criterion_holds: check.all_satisfied,
        degenerate_count: check.degenerate_count(),
        geweke_overall: gw.as_ref().map(|g| g.overall),
        geweke_undetermined: gw.as_ref().map_or(0, |g| g.undetermined),
        coordinates,
    })
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    #[test]
    fn constant_chain_is_degenerate_and_undetermined() {
        let rows = vec![3.14; 1000];
        let rep = analyze_chain(&rows, 1, &AnalysisConfig::default()).unwrap();
        let c = &rep.coordinates[0];
        assert!(c.degenerate);
        assert_eq!(c.geweke_z, None);
        assert_eq!(c.geweke_pass, None);
        assert_eq!(c.width_ratio, None);
        assert_eq!(c.ess_ratio, None);
        assert_eq!(c.ess_acf, None);
        assert_eq!(c.mcse, 0.0);
        assert_eq!(rep.geweke_undetermined, 1);
        assert_eq!(rep.geweke_overall, Some(true));
    }

    #[test]
    fn short_chain_skips_geweke() {
        let rows: Vec<f64> = (0..50).map(|i| (i % 5) as f64).collect();
        let rep = analyze_chain(&rows, 1, &AnalysisConfig::default()).unwrap();
        assert_eq!(rep.geweke_overall, None);
        assert_eq!(rep.n, 50);
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(analyze_chain(&[1.0, 2.0, 3.0], 1, &AnalysisConfig::default()).is_err());
        assert!(analyze_chain(&[1.0, 2.0, 3.0], 2, &AnalysisConfig::default()).is_err());
    }
}
