//! Replicated comparisons of stopping criteria on a built-in sampler.
//!
//! Each replication draws a fresh seed; every criterion sees the same seed
//! for a given replication, so criteria are compared on identical sample
//! paths.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accumulators::MomentAccumulator;
use crate::batch_means::{ubm_sigma2, AbmState};
use crate::diagnostics::{geweke_converged, quality_ratios};
use crate::error::{Error, Result};
use crate::report::RunStatus;
use crate::samplers::SamplerSpec;
use crate::source::collect_rows;
use crate::stopping::{FwsrConfig, FwsrRun, VarianceEstimator};

/// One stopping criterion under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Criterion {
    /// Relative fixed-width rule at `epsilon`.
    Fwsr {
        epsilon: f64,
        estimator: VarianceEstimator,
    },
    /// One-shot Geweke test at level `alpha` after `at` iterations.
    Geweke { alpha: f64, at: u64 },
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Fwsr {
                epsilon,
                estimator: VarianceEstimator::Abm,
            } => write!(f, "fwsr:{epsilon}"),
            Criterion::Fwsr {
                epsilon,
                estimator: VarianceEstimator::Ubm,
            } => write!(f, "fwsr-ubm:{epsilon}"),
            Criterion::Geweke { alpha, at } => write!(f, "gd:{alpha}@{at}"),
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    /// Parses `fwsr:EPS`, `fwsr-ubm:EPS` or `gd:ALPHA@N`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown criterion token {s:?}"));
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let crit = match kind {
            "fwsr" | "fwsr-ubm" => {
                let epsilon = num(arg)?;
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(bad());
                }
                Criterion::Fwsr {
                    epsilon,
                    estimator: if kind == "fwsr" {
                        VarianceEstimator::Abm
                    } else {
                        VarianceEstimator::Ubm
                    },
                }
            }
            "gd" => {
                let (alpha, at) = arg.split_once('@').ok_or_else(bad)?;
                let alpha = num(alpha)?;
                let at = at.trim().parse::<u64>().map_err(|_| bad())?;
                if !(alpha > 0.0 && alpha < 1.0) || at < 160 {
                    return Err(bad());
                }
                Criterion::Geweke { alpha, at }
            }
            _ => return Err(bad()),
        };
        Ok(crit)
    }
}

/// Parses a comma-separated criterion list.
pub fn parse_criteria(list: &str) -> Result<Vec<Criterion>> {
    list.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// SplitMix64 step, used to derive replication seeds.
pub fn replication_seed(base: u64, replication: u64) -> u64 {
    let mut z = base.wrapping_add(
        replication
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Five-number summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Spread {
            min: v[0],
            q25: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q75: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Outcome of one criterion on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub criterion: String,
    pub replication: u64,
    pub seed: u64,
    pub n_stop: u64,
    /// `terminated`, `max_iter`, `truncated`, `gd_pass` or `gd_fail`.
    pub outcome: String,
    pub median_ess: f64,
    pub min_ess: f64,
    pub wall_seconds: f64,
    pub estimation_seconds: f64,
    pub degenerate: usize,
    pub ratio: Option<Spread>,
    /// Per-coordinate `sigma_hat` ratios aBM / uBM at the stopping time.
    pub abm_over_ubm: Option<Spread>,
    /// Fraction of coordinates whose aBM / uBM ratio lies in [0.8, 1.2].
    pub abm_over_ubm_within: Option<f64>,
    /// Per-coordinate quality ratios `w_i / lambda_hat_i`.
    #[serde(skip)]
    pub ratios: Vec<f64>,
    /// Per-coordinate `n * lambda_hat^2 / sigma_hat^2`.
    #[serde(skip)]
    pub ess: Vec<f64>,
}

struct Estimates {
    n: u64,
    sigma2: Vec<f64>,
    lambda_hat: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn summarise(
    criterion: &Criterion,
    replication: u64,
    seed: u64,
    outcome: String,
    est: &Estimates,
    z: f64,
    timing: (f64, f64),
    ubm: Option<Vec<f64>>,
) -> ComparisonRow {
    let live: Vec<usize> = (0..est.lambda_hat.len())
        .filter(|&i| est.lambda_hat[i] > 0.0)
        .collect();
    let widths: Vec<f64> = live
        .iter()
        .map(|&i| 2.0 * z * (est.sigma2[i] / est.n as f64).sqrt())
        .collect();
    let lambdas: Vec<f64> = live.iter().map(|&i| est.lambda_hat[i]).collect();
    let ratios = quality_ratios(&widths, &lambdas).unwrap_or_default();
    let ess: Vec<f64> = live
        .iter()
        .map(|&i| {
            let s2 = est.sigma2[i];
            if s2 > 0.0 {
                est.n as f64 * est.lambda_hat[i].powi(2) / s2
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let (abm_over_ubm, within) = match ubm {
        Some(u) => {
            let r: Vec<f64> = live
                .iter()
                .filter(|&&i| u[i] > 0.0)
                .map(|&i| (est.sigma2[i] / u[i]).sqrt())
                .collect();
            let inside = r.iter().filter(|&&x| (0.8..=1.2).contains(&x)).count();
            let frac = (!r.is_empty()).then(|| inside as f64 / r.len() as f64);
            (Spread::of(&r), frac)
        }
        None => (None, None),
    };
    ComparisonRow {
        criterion: criterion.to_string(),
        replication,
        seed,
        n_stop: est.n,
        outcome,
        median_ess: median(&ess),
        min_ess: ess.iter().copied().fold(f64::INFINITY, f64::min),
        wall_seconds: timing.0,
        estimation_seconds: timing.1,
        degenerate: est.lambda_hat.len() - live.len(),
        ratio: Spread::of(&ratios),
        abm_over_ubm,
        abm_over_ubm_within: within,
        ratios,
        ess,
    }
}

/// Runs one criterion on one replication of `spec`.
pub fn run_criterion(
    spec: &SamplerSpec,
    criterion: &Criterion,
    base: &FwsrConfig,
    replication: u64,
    seed: u64,
    with_ubm: bool,
) -> Result<ComparisonRow> {
    let spec = spec.with_seed(seed);
    let mut source = spec.build()?;
    let dim = spec.dim();
    let z = crate::normal::two_sided_critical(base.delta)?;
    match *criterion {
        Criterion::Fwsr { epsilon, estimator } => {
            let cfg = FwsrConfig {
                epsilon,
                estimator,
                retain_chain: with_ubm,
                ..*base
            };
            let mut run = FwsrRun::new(cfg, dim)?;
            let report = run.run(&mut source, &mut [])?;
            let est = Estimates {
                n: report.n_stop,
                sigma2: report
                    .coordinates
                    .iter()
                    .map(|c| c.sigma2.unwrap_or(0.0))
                    .collect(),
                lambda_hat: report
                    .coordinates
                    .iter()
                    .map(|c| c.lambda_hat.unwrap_or(0.0))
                    .collect(),
            };
            let ubm = match (with_ubm, run.chain()) {
                (true, Some(chain)) => Some(ubm_sigma2(chain, dim, cfg.tau)?),
                _ => None,
            };
            let outcome = match report.status {
                RunStatus::Terminated => "terminated",
                RunStatus::MaxIter => "max_iter",
                RunStatus::Truncated => "truncated",
            };
            Ok(summarise(
                criterion,
                replication,
                seed,
                outcome.to_string(),
                &est,
                z,
                (report.timing.wall_seconds, report.timing.estimation_seconds),
                ubm,
            ))
        }
        Criterion::Geweke { alpha, at } => {
            let started = Instant::now();
            let rows = collect_rows(&mut source, at as usize)?;
            let est_start = Instant::now();
            let mut moments = MomentAccumulator::new(dim)?;
            let mut abm = AbmState::new(dim, base.tau)?;
            for row in rows.chunks_exact(dim) {
                moments.push(row)?;
                abm.push(row)?;
            }
            let gw = geweke_converged(&rows, dim, alpha)?;
            let est = Estimates {
                n: moments.count(),
                sigma2: abm.sigma2()?,
                lambda_hat: moments.posterior_sd()?,
            };
            let ubm = if with_ubm {
                Some(ubm_sigma2(&rows, dim, base.tau)?)
            } else {
                None
            };
            let outcome = if gw.overall { "gd_pass" } else { "gd_fail" };
            let est_seconds = est_start.elapsed().as_secs_f64();
            Ok(summarise(
                criterion,
                replication,
                seed,
                outcome.to_string(),
                &est,
                z,
                (started.elapsed().as_secs_f64(), est_seconds),
                ubm,
            ))
        }
    }
}

/// Runs every criterion on `reps` replications, in parallel over
/// replications. Rows come back ordered by criterion, then replication.
pub fn run_comparison(
    spec: &SamplerSpec,
    criteria: &[Criterion],
    base: &FwsrConfig,
    reps: u64,
    base_seed: u64,
    with_ubm: bool,
) -> Result<Vec<ComparisonRow>> {
    spec.build()?;
    base.validate()?;
    let jobs: Vec<(usize, u64)> = (0..criteria.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    jobs.par_iter()
        .map(|&(c, r)| {
            run_criterion(
                spec,
                &criteria[c],
                base,
                r,
                replication_seed(base_seed, r),
                with_ubm,
            )
        })
        .collect()
}

/// Per-criterion medians over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSummary {
    pub criterion: String,
    pub replications: usize,
    pub median_n_stop: f64,
    pub median_ess: f64,
    pub median_ratio: f64,
    pub median_wall_seconds: f64,
    pub median_estimation_seconds: f64,
}

pub fn summarise_rows(rows: &[ComparisonRow]) -> Vec<CriterionSummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.criterion.as_str()) {
            names.push(&r.criterion);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let sel: Vec<&ComparisonRow> = rows.iter().filter(|r| r.criterion == name).collect();
            let pick = |f: &dyn Fn(&ComparisonRow) -> f64| {
                median(&sel.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let all_ratios: Vec<f64> = sel.iter().flat_map(|r| r.ratios.iter().copied()).collect();
            CriterionSummary {
                criterion: name.to_string(),
                replications: sel.len(),
                median_n_stop: pick(&|r| r.n_stop as f64),
                median_ess: pick(&|r| r.median_ess),
                median_ratio: median(&all_ratios),
                median_wall_seconds: pick(&|r| r.wall_seconds),
                median_estimation_seconds: pick(&|r| r.estimation_seconds),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::Ar1Spec;

    #[test]
    fn parses_tokens() {
        let list = parse_criteria("fwsr:0.1, fwsr:0.05,gd:0.05@15000,fwsr-ubm:0.05").unwrap();
        assert_eq!(
            list,
            vec![
                Criterion::Fwsr {
                    epsilon: 0.1,
                    estimator: VarianceEstimator::Abm
                },
                Criterion::Fwsr {
                    epsilon: 0.05,
                    estimator: VarianceEstimator::Abm
                },
                Criterion::Geweke {
                    alpha: 0.05,
                    at: 15000
                },
                Criterion::Fwsr {
                    epsilon: 0.05,
                    estimator: VarianceEstimator::Ubm
                },
            ]
        );
        let round: Vec<String> = list.iter().map(|c| c.to_string()).collect();
        assert_eq!(
            round,
            ["fwsr:0.1", "fwsr:0.05", "gd:0.05@15000", "fwsr-ubm:0.05"]
        );
    }

    #[test]
    fn rejects_unknown_tokens() {
        for bad in [
            "bm:0.1",
            "fwsr",
            "fwsr:x",
            "fwsr:1.5",
            "gd:0.05",
            "gd:0.05@x",
            "gd:2@1000",
            "gd:0.05@10",
        ] {
            assert!(bad.parse::<Criterion>().is_err(), "{bad}");
        }
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
        assert!(Spread::of(&[]).is_none());
    }

    #[test]
    fn seeds_differ_per_replication() {
        let s: Vec<u64> = (0..100).map(|r| replication_seed(7, r)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 100);
    }

    #[test]
    fn small_comparison_runs() {
        let spec = SamplerSpec::Ar1(Ar1Spec::new(0.5, 3, 0));
        let crits = parse_criteria("fwsr:0.1,gd:0.05@2000").unwrap();
        let rows = run_comparison(&spec, &crits, &FwsrConfig::default(), 3, 11, true).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows[..3]
            .iter()
            .all(|r| r.criterion == "fwsr:0.1" && r.outcome == "terminated"));
        assert!(rows[3..]
            .iter()
            .all(|r| r.n_stop == 2000 && r.outcome.starts_with("gd_")));
        // Same replication, same seed across criteria.
        assert_eq!(rows[0].seed, rows[3].seed);
        for r in &rows[..3] {
            assert!(r.ratios.iter().all(|&x| x <= 0.1));
            assert!(r.abm_over_ubm.is_some());
        }
        let summary = summarise_rows(&rows);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[1].median_n_stop, 2000.0);
    }
}
