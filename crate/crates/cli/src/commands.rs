use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use mcsentinel::chainfile::{read_chain, ChainReader, ChainWriter};
use mcsentinel::diagnostics::GewekeConfig;
use mcsentinel::experiment::{parse_criteria, run_comparison, summarise_rows};
use mcsentinel::samplers::{Ar1Spec, GibbsBvnSpec, SamplerSpec, TwoStateSpec};
use mcsentinel::{
    analyze_chain, AnalysisConfig, CheckResult, DegeneratePolicy, Error, FwsrConfig, FwsrRun,
    ProgressSink, SampleSource, VarianceEstimator,
};

use crate::output;
use crate::{
    AnalyzeArgs, CompareArgs, Estimator, Format, RuleArgs, RunArgs, SamplerArgs, SamplerKind,
};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 4;

/// An error together with the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::ZeroDimension => EXIT_USAGE,
            _ => EXIT_IO,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_IO,
            error,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            error: e.into(),
        }
    }
}

fn usage(msg: String) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: anyhow::anyhow!(msg),
    }
}

type CmdResult = Result<u8, Failure>;

fn sampler_spec(a: &SamplerArgs) -> Result<SamplerSpec, Failure> {
    let dim = a.dim.unwrap_or(1);
    let spec = match a.sampler {
        SamplerKind::Ar1 => SamplerSpec::Ar1(Ar1Spec::new(a.rho, dim, a.seed)),
        SamplerKind::TwoState => SamplerSpec::TwoState(TwoStateSpec {
            p01: a.p01,
            p10: a.p10,
            dim,
            seed: a.seed,
        }),
        SamplerKind::GibbsBvn => {
            if a.dim.is_some_and(|d| d != 2) {
                return Err(usage(
                    "the gibbs-bvn sampler has exactly 2 coordinates".into(),
                ));
            }
            SamplerSpec::GibbsBvn(GibbsBvnSpec {
                r: a.r,
                seed: a.seed,
            })
        }
    };
    Ok(spec)
}

fn fwsr_config(
    r: &RuleArgs,
    estimator: Estimator,
    retain_chain: bool,
) -> Result<FwsrConfig, Failure> {
    let cfg = FwsrConfig {
        epsilon: r.epsilon,
        delta: r.delta,
        n_star: r.n_star,
        check_gap_batches: r.gap_batches,
        tau: r.tau,
        max_iterations: r.max_iter,
        degenerate_policy: if r.strict {
            DegeneratePolicy::Block
        } else {
            DegeneratePolicy::Exclude
        },
        estimator: match estimator {
            Estimator::Abm => VarianceEstimator::Abm,
            Estimator::Ubm => VarianceEstimator::Ubm,
        },
        retain_chain,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `body` to `path`, or stdout when absent.
fn emit(path: Option<&Path>, body: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            );
            f.write_all(body)?;
            f.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(body)?;
            out.flush()?;
        }
    }
    Ok(())
}

struct StderrProgress;

impl ProgressSink for StderrProgress {
    fn on_check(&mut self, c: &CheckResult) {
        let ok = c.coordinates.iter().filter(|x| x.satisfied).count();
        eprintln!(
            "check n={} batch_size={} batches={} satisfied={}/{} degenerate={}",
            c.n,
            c.batch_size,
            c.completed_batches,
            ok,
            c.coordinates.len(),
            c.degenerate_count()
        );
    }
}

pub fn run(a: &RunArgs) -> CmdResult {
    let cfg = fwsr_config(&a.rule, a.estimator, a.with_acf)?;
    let mut source: Box<dyn SampleSource> = match &a.input {
        Some(p) => {
            Box::new(ChainReader::open(p).with_context(|| format!("cannot read {}", p.display()))?)
        }
        None => sampler_spec(&a.sampler)?.build()?,
    };
    let dim = source.dim();
    let mut run = FwsrRun::new(cfg, dim)?;
    let mut dump = match &a.dump_chain {
        Some(p) => Some(
            ChainWriter::create(p, dim)
                .with_context(|| format!("cannot create chain dump {}", p.display()))?,
        ),
        None => None,
    };
    let mut progress = StderrProgress;
    let report = {
        let mut sinks: Vec<&mut dyn ProgressSink> = Vec::new();
        if let Some(w) = dump.as_mut() {
            sinks.push(w);
        }
        if a.progress {
            sinks.push(&mut progress);
        }
        run.run(&mut source, &mut sinks)?
    };
    if let Some(w) = dump {
        w.finish()?;
    }
    let body = match a.format {
        Format::Json => {
            let mut s = report.to_json()?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => output::run_csv(&report)?,
    };
    emit(a.out.as_deref(), &body)?;
    Ok(report.status.exit_code() as u8)
}

pub fn analyze(a: &AnalyzeArgs) -> CmdResult {
    let cfg = AnalysisConfig {
        epsilon: a.epsilon,
        delta: a.delta,
        n_star: a.n_star,
        tau: a.tau,
        geweke: GewekeConfig {
            frac1: a.frac1,
            frac2: a.frac2,
            alpha: a.alpha,
        },
    };
    cfg.geweke.validate()?;
    let (dim, rows) =
        read_chain(&a.file).with_context(|| format!("cannot read {}", a.file.display()))?;
    let report = analyze_chain(&rows, dim, &cfg)?;
    let body = match a.format {
        Format::Json => {
            let mut s = report.to_json()?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => output::analysis_csv(&report)?,
    };
    emit(a.out.as_deref(), &body)?;
    Ok(0)
}

pub fn compare(a: &CompareArgs) -> CmdResult {
    let spec = sampler_spec(&a.sampler)?;
    let base = fwsr_config(&a.rule, Estimator::Abm, false)?;
    let criteria = parse_criteria(&a.criteria)?;
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1".into()));
    }
    let rows = run_comparison(&spec, &criteria, &base, a.reps, a.sampler.seed, a.with_ubm)?;
    let summary = summarise_rows(&rows);
    for s in &summary {
        eprintln!(
            "{:<16} reps={:<3} median n_stop={:<10} median ESS={:<10.1} median w/lambda={:.4} median wall={:.3}s est={:.4}s",
            s.criterion,
            s.replications,
            s.median_n_stop,
            s.median_ess,
            s.median_ratio,
            s.median_wall_seconds,
            s.median_estimation_seconds
        );
    }
    let body = match a.format {
        Format::Csv => output::comparison_csv(&rows, a.with_ubm)?,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&serde_json::json!({
                "rows": rows,
                "summary": summary,
            }))
            .map_err(Error::from)?;
            s.push('\n');
            s.into_bytes()
        }
    };
    emit(a.out.as_deref(), &body)?;
    Ok(0)
}
