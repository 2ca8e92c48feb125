//! End-to-end chart pipeline: CSV ingestion, statistics, signals, rendering,
//! and the CLI binary's exit-code contract.

use std::path::{Path, PathBuf};
use std::process::Command;

use mwchart::chart::run_chart;
use mwchart::chart_design::{ChartLimits, Sidedness};
use mwchart::data::ingest_csv;
use mwchart::mw_stat::TiePolicy;
use mwchart::render::{render_svg, text_table};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

const PISTON_STATS: [f64; 15] = [
    429.0, 333.0, 142.5, 370.5, 241.5, 410.5, 393.0, 240.5, 471.0, 486.0, 340.5, 561.0, 575.5,
    601.5, 484.5,
];

#[test]
fn piston_rings_ingest_and_run() {
    let (reference, tests) = ingest_csv(&fixture("piston_rings.csv")).unwrap();
    assert_eq!(reference.m(), 125);
    assert_eq!(tests.len(), 15);
    assert!(tests.iter().all(|t| t.n() == 5));

    let limits = ChartLimits::new(125, 5, 540, Sidedness::TwoSided, 400.0).unwrap();
    assert_eq!(limits.lcl, Some(85));
    let records = run_chart(&reference, &tests, &limits, TiePolicy::Midrank).unwrap();

    for (rec, &want) in records.iter().zip(&PISTON_STATS) {
        assert_eq!(rec.statistic.value(), want, "group {}", rec.sample_index);
    }
    let signals: Vec<usize> = records
        .iter()
        .filter(|r| r.signal)
        .map(|r| r.sample_index)
        .collect();
    assert_eq!(signals, vec![12, 13, 14]);
}

#[test]
fn strict_ties_differ_from_midrank_on_real_data() {
    let (reference, tests) = ingest_csv(&fixture("piston_rings.csv")).unwrap();
    let limits = ChartLimits::new(125, 5, 540, Sidedness::TwoSided, 400.0).unwrap();
    let strict = run_chart(&reference, &tests, &limits, TiePolicy::Strict).unwrap();
    // rounded measurement data has ties, so strict counting must land lower
    // somewhere
    let any_lower = strict
        .iter()
        .zip(&PISTON_STATS)
        .any(|(rec, &mid)| rec.statistic.value() < mid);
    assert!(any_lower);
}

#[test]
fn golden_svg_snapshot() {
    let (reference, tests) = ingest_csv(&fixture("piston_rings.csv")).unwrap();
    let limits = ChartLimits::new(125, 5, 540, Sidedness::TwoSided, 400.0).unwrap();
    let records = run_chart(&reference, &tests, &limits, TiePolicy::Midrank).unwrap();
    let svg = render_svg(&records, &limits);
    let golden = std::fs::read_to_string(fixture("golden_piston_chart.svg")).unwrap();
    assert_eq!(svg, golden, "SVG output drifted from the golden snapshot");
}

#[test]
fn text_table_lists_all_groups() {
    let (reference, tests) = ingest_csv(&fixture("piston_rings.csv")).unwrap();
    let limits = ChartLimits::new(125, 5, 540, Sidedness::TwoSided, 400.0).unwrap();
    let records = run_chart(&reference, &tests, &limits, TiePolicy::Midrank).unwrap();
    let table = text_table(&records, &limits);
    assert_eq!(table.matches("OUT").count(), 3);
    assert!(table.contains("142.5"));
    assert!(table.contains("601.5"));
}

// ---------------------------------------------------------------------------
// CLI binary
// ---------------------------------------------------------------------------

fn mwchart_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mwchart"))
}

#[test]
fn cli_chart_runs_the_piston_example() {
    let dir = std::env::temp_dir().join("mwchart_cli_chart_test");
    std::fs::create_dir_all(&dir).unwrap();
    let svg_path = dir.join("piston.svg");
    let tsv_path = dir.join("piston.tsv");
    let output = mwchart_bin()
        .args([
            "chart",
            "--data",
            fixture("piston_rings.csv").to_str().unwrap(),
            "--ucl",
            "540",
            "--table",
            "--out",
            svg_path.to_str().unwrap(),
            "--report",
            tsv_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("3 signal(s) at 12, 13, 14"), "{stdout}");

    let svg = std::fs::read_to_string(&svg_path).unwrap();
    let golden = std::fs::read_to_string(fixture("golden_piston_chart.svg")).unwrap();
    assert_eq!(svg, golden);

    let tsv = std::fs::read_to_string(&tsv_path).unwrap();
    assert!(tsv.starts_with("sample\tstatistic\tsignal\n"));
    assert!(tsv.contains("12\t561.0\t1"));
    assert!(tsv.contains("15\t484.5\t0"));
}

#[test]
fn cli_exit_code_invalid_input() {
    let dir = std::env::temp_dir().join("mwchart_cli_bad_csv");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.csv");
    std::fs::write(&bad, "role,sample_id,value\nref,1,abc\n").unwrap();
    let output = mwchart_bin()
        .args(["chart", "--data", bad.to_str().unwrap(), "--ucl", "540"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("bad.csv:2"), "{stderr}");
}

#[test]
fn cli_exit_code_capacity() {
    let output = mwchart_bin()
        .args([
            "evaluate", "--m", "2000", "--n", "25", "--ucl", "40000", "--method", "ex",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("LR"), "{stderr}");
}

#[test]
fn cli_evaluate_emits_tsv_report() {
    let dir = std::env::temp_dir().join("mwchart_cli_eval");
    std::fs::create_dir_all(&dir).unwrap();
    let tsv = dir.join("eval.tsv");
    let output = mwchart_bin()
        .args([
            "evaluate",
            "--m",
            "50",
            "--n",
            "5",
            "--ucl",
            "217",
            "--method",
            "fr",
            "--out",
            tsv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let body = std::fs::read_to_string(&tsv).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        "m\tn\tucl\tlcl\tmethod\tarl0\tsmc\tp5\tp95\tsd\tk"
    );
    let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(row[0], "50");
    assert_eq!(row[4], "fr");
    let fr: f64 = row[5].parse().unwrap();
    assert!((fr - 403.0).abs() < 0.02 * 403.0);
}

#[test]
fn cli_rlprob_in_control() {
    let output = mwchart_bin()
        .args([
            "rlprob", "--m", "30", "--n", "5", "--ucl", "130", "--t", "1", "--k", "400", "--seed",
            "3", "--method", "ex",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("P(N <= 1)"), "{stdout}");
}

#[test]
fn cli_design_prints_trace_blocks() {
    let output = mwchart_bin()
        .args([
            "design", "--m", "50", "--n", "5", "--arl0", "120", "--seed", "4", "--k", "500",
            "--tol", "0.05",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("FA: 1/(false alarm rate) approximation"),
        "{stdout}"
    );
    assert!(
        stdout.contains("FR: Fixed reference sample approximation"),
        "{stdout}"
    );
    assert!(stdout.contains("LR approximation"), "{stdout}");
    assert!(stdout.contains("final: ucl="), "{stdout}");
    assert!(stdout.contains("Second"), "{stdout}");
}

#[test]
fn cli_rejects_unknown_method_with_code_2() {
    let output = mwchart_bin()
        .args([
            "evaluate", "--m", "50", "--n", "5", "--ucl", "217", "--method", "zz",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}
