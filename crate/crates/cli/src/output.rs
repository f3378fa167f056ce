//! CSV renderings of reports. Missing values are empty cells.

use mcsentinel::experiment::{ComparisonRow, Spread};
use mcsentinel::{AnalysisReport, TerminationReport};

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> anyhow::Result<Vec<u8>> {
    w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))
}

pub fn run_csv(r: &TerminationReport) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "index",
        "mean",
        "mcse",
        "ci_low",
        "ci_high",
        "lambda_hat",
        "sigma2",
        "width_ratio",
        "ess_ratio",
        "ess_acf",
        "degenerate",
    ])?;
    for c in &r.coordinates {
        w.write_record([
            c.index.to_string(),
            cell(c.mean),
            cell(c.mcse),
            cell(c.ci_low),
            cell(c.ci_high),
            cell(c.lambda_hat),
            cell(c.sigma2),
            cell(c.width_ratio),
            cell(c.ess_ratio.map(|e| e.value)),
            cell(c.ess_acf.map(|e| e.value)),
            c.degenerate.to_string(),
        ])?;
    }
    finish(w)
}

pub fn analysis_csv(r: &AnalysisReport) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "index",
        "mean",
        "mcse",
        "ci_low",
        "ci_high",
        "lambda_hat",
        "width_ratio",
        "satisfied",
        "ess_ratio",
        "ess_acf",
        "geweke_z",
        "geweke_pass",
        "degenerate",
    ])?;
    for c in &r.coordinates {
        w.write_record([
            c.index.to_string(),
            c.mean.to_string(),
            c.mcse.to_string(),
            c.ci_low.to_string(),
            c.ci_high.to_string(),
            c.lambda_hat.to_string(),
            cell(c.width_ratio),
            c.satisfied.to_string(),
            cell(c.ess_ratio.map(|e| e.value)),
            cell(c.ess_acf.map(|e| e.value)),
            cell(c.geweke_z),
            c.geweke_pass.map(|b| b.to_string()).unwrap_or_default(),
            c.degenerate.to_string(),
        ])?;
    }
    finish(w)
}

fn spread_cells(s: Option<&Spread>) -> [String; 5] {
    match s {
        Some(s) => [s.min, s.q25, s.median, s.q75, s.max].map(|v| v.to_string()),
        None => Default::default(),
    }
}

pub fn comparison_csv(rows: &[ComparisonRow], with_ubm: bool) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = vec![
        "criterion",
        "replication",
        "seed",
        "n_stop",
        "outcome",
        "median_ess",
        "min_ess",
        "wall_seconds",
        "estimation_seconds",
        "degenerate",
        "ratio_min",
        "ratio_q25",
        "ratio_median",
        "ratio_q75",
        "ratio_max",
    ];
    if with_ubm {
        header.extend([
            "abm_over_ubm_min",
            "abm_over_ubm_q25",
            "abm_over_ubm_median",
            "abm_over_ubm_q75",
            "abm_over_ubm_max",
            "abm_over_ubm_within",
        ]);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.criterion.clone(),
            r.replication.to_string(),
            r.seed.to_string(),
            r.n_stop.to_string(),
            r.outcome.clone(),
            r.median_ess.to_string(),
            r.min_ess.to_string(),
            r.wall_seconds.to_string(),
            r.estimation_seconds.to_string(),
            r.degenerate.to_string(),
        ];
        rec.extend(spread_cells(r.ratio.as_ref()));
        if with_ubm {
            rec.extend(spread_cells(r.abm_over_ubm.as_ref()));
            rec.push(cell(r.abm_over_ubm_within));
        }
        w.write_record(&rec)?;
    }
    finish(w)
}
