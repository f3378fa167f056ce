use std::path::Path;
use std::process::{Command, Output};

use mcsentinel::chainfile::{ChainWriter, Encoding};
use mcsentinel::experiment::median;
use mcsentinel::samplers::{Ar1Sampler, Ar1Spec};
use mcsentinel::source::collect_rows;
use mcsentinel::{AnalysisReport, RunStatus, TerminationReport};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcsentinel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn analyze_json(path: &Path) -> AnalysisReport {
    let o = bin(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    serde_json::from_str(&stdout(&o)).unwrap()
}

fn write_chain(path: &Path, enc: Encoding, dim: usize, rows: &[f64]) {
    let file = std::fs::File::create(path).unwrap();
    let mut w = ChainWriter::new(std::io::BufWriter::new(file), enc, dim).unwrap();
    for r in rows.chunks(dim) {
        w.write_row(r).unwrap();
    }
    w.finish().unwrap();
}

fn csv_records(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn run_terminates_and_report_round_trips() {
    let o = bin(&[
        "run",
        "--sampler",
        "ar1",
        "--rho",
        "0.5",
        "--dim",
        "10",
        "--epsilon",
        "0.05",
        "--seed",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let report = TerminationReport::from_json(&text).unwrap();
    assert_eq!(report.status, RunStatus::Terminated);
    assert_eq!(report.coordinates.len(), 10);
    for c in &report.coordinates {
        assert!(c.width_ratio.unwrap() <= 0.05);
        assert!(c.ci_low.unwrap() < c.ci_high.unwrap());
    }
    let again = TerminationReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(again, report);
    assert_eq!(report.to_json().unwrap().trim_end(), text.trim_end());
    let v: Value = serde_json::from_str(&text).unwrap();
    for key in [
        "n_stop",
        "epsilon",
        "delta",
        "n_star",
        "check_gap_batches",
        "tau",
        "timing",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["timing"]["checks_performed"].as_u64().unwrap() >= 1);
}

#[test]
fn same_seed_same_report() {
    let args = [
        "run",
        "--sampler",
        "gibbs-bvn",
        "--r",
        "0.5",
        "--seed",
        "3",
        "--format",
        "csv",
    ];
    let (a, b) = (bin(&args), bin(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    let rows = csv_records(&stdout(&a));
    assert_eq!(rows.len(), 2);
}

#[test]
fn frozen_two_state_chain_is_flagged() {
    let o = bin(&[
        "run",
        "--sampler",
        "two-state",
        "--p01",
        "1e-9",
        "--p10",
        "1e-9",
        "--dim",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = TerminationReport::from_json(&stdout(&o)).unwrap();
    assert_eq!(report.degenerate_count, 3);
    assert!(report
        .coordinates
        .iter()
        .all(|c| c.degenerate && c.width_ratio.is_none()));
}

#[test]
fn strict_policy_hits_iteration_cap() {
    let o = bin(&[
        "run",
        "--sampler",
        "two-state",
        "--p01",
        "1e-9",
        "--p10",
        "1e-9",
        "--strict",
        "--max-iter",
        "40000",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let report = TerminationReport::from_json(&stdout(&o)).unwrap();
    assert_eq!(report.status, RunStatus::MaxIter);
    assert_eq!(report.n_stop, 40_000);
}

#[test]
fn help_and_usage_exit_codes() {
    let help = bin(&["run", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("0.02 is recommended"));
    assert_eq!(bin(&["--version"]).status.code(), Some(0));
    assert_eq!(bin(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(bin(&["run", "--epsilon", "1.5"]).status.code(), Some(1));
    assert_eq!(
        bin(&["run", "--sampler", "gibbs-bvn", "--dim", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(bin(&[]).status.code(), Some(1));
    let bad = bin(&["compare", "--criteria", "fwsr:0.05,median:3"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("median:3"));
}

#[test]
fn thread_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_mcsentinel"))
        .args(["compare", "--reps", "2", "--criteria", "fwsr:0.1"])
        .env("MCSENTINEL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_mcsentinel"))
        .args(["compare", "--reps", "2", "--criteria", "fwsr:0.1"])
        .env("MCSENTINEL_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(csv_records(&stdout(&o)).len(), 2);
}

#[test]
fn dump_then_analyze_reproduces_terminal_estimates() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["chain.csv", "chain.bin"] {
        let dump = dir.path().join(name);
        let o = bin(&[
            "run",
            "--dim",
            "3",
            "--rho",
            "0.7",
            "--seed",
            "11",
            "--dump-chain",
            dump.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let run = TerminationReport::from_json(&stdout(&o)).unwrap();
        let post = analyze_json(&dump);
        assert_eq!(post.n, run.n_stop);
        assert!(post.criterion_holds);
        for (a, b) in post.coordinates.iter().zip(&run.coordinates) {
            let (mcse, lam) = (b.mcse.unwrap(), b.lambda_hat.unwrap());
            assert!(
                (a.mcse - mcse).abs() <= 1e-9 * mcse,
                "{name}: {} vs {mcse}",
                a.mcse
            );
            assert!((a.lambda_hat - lam).abs() <= 1e-9 * lam);
        }
    }
}

#[test]
fn csv_and_binary_ingestion_agree() {
    let dir = tempfile::tempdir().unwrap();
    let rows = collect_rows(
        &mut Ar1Sampler::new(Ar1Spec::new(0.3, 2, 5)).unwrap(),
        20_000,
    )
    .unwrap();
    let (c, b) = (dir.path().join("x.csv"), dir.path().join("x.f64"));
    write_chain(&c, Encoding::Csv, 2, &rows);
    write_chain(&b, Encoding::F64Le, 2, &rows);
    let (rc, rb) = (analyze_json(&c), analyze_json(&b));
    assert_eq!(rc.n, rb.n);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300);
    for (x, y) in rc.coordinates.iter().zip(&rb.coordinates) {
        assert!(close(x.mean, y.mean));
        assert!(close(x.mcse, y.mcse));
        assert!(close(x.lambda_hat, y.lambda_hat));
        assert!(close(
            x.ess_ratio.unwrap().value,
            y.ess_ratio.unwrap().value
        ));
        assert!(close(x.ess_acf.unwrap().value, y.ess_acf.unwrap().value));
        assert!(close(x.geweke_z.unwrap(), y.geweke_z.unwrap()));
    }
}

#[test]
fn analyze_iid_csv_ess_near_n() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("iid.csv");
    let rows = collect_rows(
        &mut Ar1Sampler::new(Ar1Spec::new(0.0, 1, 6)).unwrap(),
        100_000,
    )
    .unwrap();
    write_chain(&path, Encoding::Csv, 1, &rows);
    let r = analyze_json(&path);
    let ess = r.coordinates[0].ess_ratio.unwrap().value;
    assert!((ess / 1e5 - 1.0).abs() < 0.15, "{ess}");
}

#[test]
#[allow(clippy::approx_constant)]
fn analyze_constant_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("const.csv");
    std::fs::write(&path, "theta\n".to_string() + &"3.14\n".repeat(5_000)).unwrap();
    let r = analyze_json(&path);
    let c = &r.coordinates[0];
    assert!(c.degenerate);
    assert_eq!(c.geweke_z, None);
    assert_eq!(c.geweke_pass, None);
    assert_eq!(r.geweke_undetermined, 1);
    assert_eq!(c.mean, 3.14);
}

#[test]
fn malformed_inputs_exit_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let bin_path = dir.path().join("t.bin");
    write_chain(&bin_path, Encoding::F64Le, 2, &[1.0, 2.0, 3.0, 4.0]);
    let mut bytes = std::fs::read(&bin_path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&bin_path, bytes).unwrap();
    let o = bin(&["analyze", bin_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("byte offset 40"), "{}", stderr(&o));

    let csv_path = dir.path().join("ragged.csv");
    std::fs::write(&csv_path, "a,b\n1,2\n3,4\n5\n").unwrap();
    let o = bin(&["analyze", csv_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let o = bin(&["analyze", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn short_input_file_is_a_truncated_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    let o = bin(&[
        "run",
        "--max-iter",
        "17000",
        "--dump-chain",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["run", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let report = TerminationReport::from_json(&stdout(&o)).unwrap();
    assert_eq!(report.status, RunStatus::Truncated);
    assert_eq!(report.n_stop, 17_000);
}

struct Row {
    criterion: String,
    n_stop: f64,
    ratio_median: f64,
    ratio_max: f64,
    est_seconds: f64,
    ubm_min: Option<f64>,
    ubm_max: Option<f64>,
}

fn compare_rows(args: &[&str]) -> Vec<Row> {
    let o = bin(args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let h = rdr.headers().unwrap().clone();
    let idx = |name: &str| h.iter().position(|c| c == name);
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            let num = |name: &str| idx(name).and_then(|i| r[i].parse::<f64>().ok());
            Row {
                criterion: r[idx("criterion").unwrap()].to_string(),
                n_stop: num("n_stop").unwrap(),
                ratio_median: num("ratio_median").unwrap(),
                ratio_max: num("ratio_max").unwrap(),
                est_seconds: num("estimation_seconds").unwrap(),
                ubm_min: num("abm_over_ubm_min"),
                ubm_max: num("abm_over_ubm_max"),
            }
        })
        .collect()
}

fn pick(rows: &[Row], crit: &str, f: impl Fn(&Row) -> f64) -> Vec<f64> {
    rows.iter().filter(|r| r.criterion == crit).map(f).collect()
}

#[test]
fn compare_gd_versus_fwsr() {
    let rows = compare_rows(&[
        "compare",
        "--rho",
        "0.9",
        "--dim",
        "50",
        "--reps",
        "20",
        "--criteria",
        "fwsr:0.05,gd:0.05@15000",
        "--seed",
        "21",
    ]);
    assert_eq!(rows.len(), 40);
    let f = pick(&rows, "fwsr:0.05", |r| r.ratio_median);
    let g = pick(&rows, "gd:0.05@15000", |r| r.ratio_median);
    assert!(median(&g) > median(&f), "{} vs {}", median(&g), median(&f));
    assert!(pick(&rows, "fwsr:0.05", |r| r.ratio_max)
        .iter()
        .all(|&m| m <= 0.05));
}

#[test]
fn compare_threshold_scaling() {
    let rows = compare_rows(&[
        "compare",
        "--rho",
        "0.9",
        "--dim",
        "50",
        "--reps",
        "20",
        "--criteria",
        "fwsr:0.1,fwsr:0.05",
        "--seed",
        "22",
    ]);
    let ratio = median(&pick(&rows, "fwsr:0.05", |r| r.n_stop))
        / median(&pick(&rows, "fwsr:0.1", |r| r.n_stop));
    assert!((3.0..=8.0).contains(&ratio), "{ratio}");
}

#[test]
fn compare_with_ubm_ratios_and_cost() {
    let rows = compare_rows(&[
        "compare",
        "--rho",
        "0.5",
        "--dim",
        "20",
        "--reps",
        "10",
        "--criteria",
        "fwsr:0.05,fwsr-ubm:0.05",
        "--with-ubm",
        "--seed",
        "23",
    ]);
    for r in &rows {
        let (lo, hi) = (r.ubm_min.unwrap(), r.ubm_max.unwrap());
        assert!(lo >= 0.8 && hi <= 1.2, "{}: [{lo}, {hi}]", r.criterion);
    }
    let abm = median(&pick(&rows, "fwsr:0.05", |r| r.est_seconds));
    let ubm = median(&pick(&rows, "fwsr-ubm:0.05", |r| r.est_seconds));
    assert!(abm <= ubm, "aBM {abm}s vs uBM {ubm}s");
}

#[test]
fn compare_json_output() {
    let o = bin(&[
        "compare",
        "--reps",
        "2",
        "--criteria",
        "fwsr:0.1,gd:0.05@2000",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["summary"].as_array().unwrap().len(), 2);
    let outcome = v["rows"][2]["outcome"].as_str().unwrap();
    assert!(outcome == "gd_pass" || outcome == "gd_fail");
}
