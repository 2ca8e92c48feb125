use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use mwchart::chart::run_chart;
use mwchart::chart_design::{
    evaluate_limits, find_limits, ChartLimits, CriterionKind, DesignCriterion, DesignOutcome,
    Sidedness,
};
use mwchart::data::ingest_csv;
use mwchart::distributions::Family;
use mwchart::error::{Error, Result};
use mwchart::mw_stat::TiePolicy;
use mwchart::render::{text_table, write_svg};
use mwchart::run_length::{
    arl_monte_carlo, run_length_cdf_at, ArlMethod, ErrorTarget, MonteCarloConfig, RunLengthSummary,
};
use mwchart::shewhart::compare_charts;
use mwchart::tail_prob::TailMethod;

/// Distribution-free Mann-Whitney control charts: design limits, evaluate
/// run-length properties, compare against the Shewhart X-bar chart, and plot
/// phase-II data.
#[derive(Parser)]
#[command(name = "mwchart", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for all Monte Carlo streams.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// ARL engine: ex, lr, no, fr, fa.
    #[arg(long, global = true, default_value = "lr")]
    method: String,

    /// Target in-control ARL.
    #[arg(long, global = true)]
    arl0: Option<f64>,

    /// Relative tolerance for the limit search.
    #[arg(long, global = true, default_value_t = 0.02)]
    tol: f64,

    /// Monte Carlo standard error target, as a fraction of the estimate.
    #[arg(long, global = true, default_value_t = 0.015)]
    d: f64,

    /// Chart sidedness: two or upper.
    #[arg(long, global = true, default_value = "two")]
    sided: String,

    /// Tie handling for real data: midrank or strict.
    #[arg(long, global = true, default_value = "midrank")]
    tie: String,

    /// Fixed Monte Carlo sample count (disables adaptive growth).
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Output path: SVG for `chart`, tab-separated report otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Find control limits for a target in-control criterion.
    Design {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// mean (default), percentile, or rlprob.
        #[arg(long, default_value = "mean")]
        criterion: String,
        /// Percentile level for the percentile criterion.
        #[arg(long, default_value_t = 0.05)]
        percentile_q: f64,
        /// Target value for the percentile criterion.
        #[arg(long)]
        target: Option<f64>,
        /// Run-length horizon for the rlprob criterion.
        #[arg(long)]
        horizon: Option<u64>,
        /// Probability bound for the rlprob criterion.
        #[arg(long)]
        prob: Option<f64>,
    },
    /// In-control ARL of given limits by any engine (ex/lr/no/fr/fa).
    Evaluate {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        ucl: i64,
    },
    /// Out-of-control ARL and conditional percentiles under a location shift.
    Arl {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        ucl: i64,
        #[arg(long, default_value = "normal")]
        dist: String,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
    },
    /// Head-to-head study against the Shewhart X-bar chart over a shift grid.
    Compare {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "normal")]
        dist: String,
        /// Comma-separated shift values in SD units.
        #[arg(long, default_value = "0.25,0.5,0.75,1.0,1.5,2.0")]
        deltas: String,
    },
    /// Ingest a CSV, run the chart, render an SVG.
    Chart {
        /// CSV file with header role,sample_id,value.
        #[arg(long)]
        data: PathBuf,
        /// Upper control limit; omit to design from --arl0.
        #[arg(long)]
        ucl: Option<i64>,
        /// Also print the aligned text table.
        #[arg(long)]
        table: bool,
        /// Write the per-sample records to this TSV file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// P(run length <= t) for given limits.
    Rlprob {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        ucl: i64,
        #[arg(long)]
        t: u64,
        #[arg(long, default_value = "uniform01")]
        dist: String,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn mc_config(cli: &Cli) -> MonteCarloConfig {
    match cli.k {
        Some(k) => MonteCarloConfig::fixed_k(cli.seed, k),
        None => {
            let mut mc = MonteCarloConfig::new(cli.seed);
            mc.error_target = ErrorTarget::FractionOfEstimate(cli.d);
            mc
        }
    }
}

fn write_tsv(path: &PathBuf, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = header.join("\t");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join("\t"));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn summary_row(m: usize, n: usize, limits: &ChartLimits, s: &RunLengthSummary) -> Vec<String> {
    vec![
        m.to_string(),
        n.to_string(),
        limits.ucl.to_string(),
        limits
            .lcl
            .map(|l| l.to_string())
            .unwrap_or_else(|| "-".into()),
        s.method.name().to_string(),
        format!("{:.4}", s.arl_estimate),
        format!("{:.4}", s.smc),
        s.percentile(0.05)
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "-".into()),
        s.percentile(0.95)
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "-".into()),
        format!("{:.4}", s.std_dev),
        s.k_used.to_string(),
    ]
}

const SUMMARY_HEADER: [&str; 11] = [
    "m", "n", "ucl", "lcl", "method", "arl0", "smc", "p5", "p95", "sd", "k",
];

fn run(cli: Cli) -> Result<()> {
    let sided = Sidedness::parse(&cli.sided)?;
    let tie = TiePolicy::parse(&cli.tie)?;
    let mc = mc_config(&cli);

    match &cli.command {
        Command::Design {
            m,
            n,
            criterion,
            percentile_q,
            target,
            horizon,
            prob,
        } => {
            let kind = match criterion.as_str() {
                "mean" => CriterionKind::MeanArl0 {
                    target: cli.arl0.ok_or_else(|| Error::invalid("--arl0 required"))?,
                },
                "percentile" => CriterionKind::ConditionalPercentile {
                    q: *percentile_q,
                    target: target
                        .or(cli.arl0)
                        .ok_or_else(|| Error::invalid("--target required for percentile"))?,
                },
                "rlprob" => CriterionKind::RunLengthProbability {
                    horizon: horizon.ok_or_else(|| Error::invalid("--horizon required"))?,
                    prob: prob.ok_or_else(|| Error::invalid("--prob required"))?,
                },
                other => return Err(Error::invalid(format!("unknown criterion '{other}'"))),
            };
            let criterion = DesignCriterion {
                kind,
                tolerance: cli.tol,
            };
            let started = Instant::now();
            let outcome = find_limits(*m, *n, criterion, sided, &mc)?;
            print!("{}", outcome.render_trace());
            println!("{:.3} Second", started.elapsed().as_secs_f64());
            print_design(&outcome);
            if let Some(path) = &cli.out {
                let rows: Vec<Vec<String>> = outcome
                    .trace
                    .iter()
                    .map(|e| {
                        vec![
                            format!("{:?}", e.stage),
                            e.step.to_string(),
                            e.ucl.to_string(),
                            e.lcl.map(|l| l.to_string()).unwrap_or_else(|| "-".into()),
                            format!("{:.4}", e.value),
                            e.smc
                                .map(|v| format!("{v:.4}"))
                                .unwrap_or_else(|| "-".into()),
                            e.perc5
                                .map(|v| format!("{v:.4}"))
                                .unwrap_or_else(|| "-".into()),
                            e.k.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
                        ]
                    })
                    .collect();
                write_tsv(
                    path,
                    &["stage", "step", "ucl", "lcl", "value", "smc", "p5", "k"],
                    &rows,
                )?;
            }
            Ok(())
        }

        Command::Evaluate { m, n, ucl } => {
            let method = ArlMethod::parse(&cli.method)?;
            let target = cli.arl0.unwrap_or(f64::NAN);
            let limits = ChartLimits::new(*m, *n, *ucl, sided, target)?;
            // methods-comparison protocol: fixed K unless overridden
            let mc = match cli.k {
                Some(k) => MonteCarloConfig::fixed_k(cli.seed, k),
                None => MonteCarloConfig::fixed_k(cli.seed, 1000),
            };
            let started = Instant::now();
            let summary = evaluate_limits(&limits, &mc, method)?;
            let elapsed = started.elapsed().as_secs_f64();
            let lcl = limits
                .lcl
                .map(|l| l.to_string())
                .unwrap_or_else(|| "-".into());
            println!(
                "m={m} n={n} ucl={ucl} lcl={lcl} method={} ARL0={:.3} smc={:.3} K={} time={elapsed:.2}s",
                summary.method.name(),
                summary.arl_estimate,
                summary.smc,
                summary.k_used,
            );
            if let (Some(p5), Some(p95)) = (summary.percentile(0.05), summary.percentile(0.95)) {
                println!(
                    "5% perc={p5:.3} 95% perc={p95:.3} sd={:.3}",
                    summary.std_dev
                );
            }
            if let Some(path) = &cli.out {
                write_tsv(
                    path,
                    &SUMMARY_HEADER,
                    &[summary_row(*m, *n, &limits, &summary)],
                )?;
            }
            Ok(())
        }

        Command::Arl {
            m,
            n,
            ucl,
            dist,
            delta,
        } => {
            let method = TailMethod::parse(&cli.method)?;
            let family = Family::parse(dist)?;
            let f = mwchart::shewhart::comparison_distribution(family);
            let g = f.with_shift(*delta);
            let target = cli.arl0.unwrap_or(f64::NAN);
            let limits = ChartLimits::new(*m, *n, *ucl, sided, target)?;
            let summary = arl_monte_carlo(&f, &g, &limits, method, &mc)?;
            println!(
                "m={m} n={n} ucl={ucl} dist={} delta={delta} ARL={:.3} smc={:.3} K={}",
                family.name(),
                summary.arl_estimate,
                summary.smc,
                summary.k_used
            );
            if let (Some(p5), Some(p95)) = (summary.percentile(0.05), summary.percentile(0.95)) {
                println!(
                    "5% perc={p5:.3} 95% perc={p95:.3} sd={:.3}",
                    summary.std_dev
                );
            }
            if !summary.converged {
                eprintln!(
                    "warning: Monte Carlo error target not reached (K={})",
                    summary.k_used
                );
            }
            if let Some(path) = &cli.out {
                write_tsv(
                    path,
                    &SUMMARY_HEADER,
                    &[summary_row(*m, *n, &limits, &summary)],
                )?;
            }
            Ok(())
        }

        Command::Compare { m, n, dist, deltas } => {
            let family = Family::parse(dist)?;
            let target = cli.arl0.ok_or_else(|| Error::invalid("--arl0 required"))?;
            let deltas: Vec<f64> = deltas
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad delta '{s}'")))
                })
                .collect::<Result<_>>()?;
            let report = compare_charts(*m, *n, target, family, &deltas, sided, &mc)?;
            let lcl = report
                .mw_limits
                .lcl
                .map(|l| l.to_string())
                .unwrap_or_else(|| "-".into());
            println!(
                "MW limits: ucl={} lcl={lcl}; Shewhart constant k={:.5}; dist={} target ARL0={} K={}",
                report.mw_limits.ucl,
                report.shewhart_k,
                family.name(),
                target,
                report.k_used
            );
            println!(
                "{:>6}  {:>10} {:>10}  {:>12} {:>12}",
                "delta", "MW ARL", "MW q95", "Shewhart ARL", "Shewhart q95"
            );
            let mut rows = Vec::new();
            for r in &report.rows {
                println!(
                    "{:>6.2}  {:>10.2} {:>10.2}  {:>12.2} {:>12.2}",
                    r.delta, r.mw_arl, r.mw_q95, r.shewhart_arl, r.shewhart_q95
                );
                rows.push(vec![
                    format!("{:.4}", r.delta),
                    format!("{:.4}", r.mw_arl),
                    format!("{:.4}", r.mw_q95),
                    format!("{:.4}", r.shewhart_arl),
                    format!("{:.4}", r.shewhart_q95),
                ]);
            }
            if let Some(path) = &cli.out {
                write_tsv(
                    path,
                    &["delta", "mw_arl", "mw_q95", "shewhart_arl", "shewhart_q95"],
                    &rows,
                )?;
            }
            Ok(())
        }

        Command::Chart {
            data,
            ucl,
            table,
            report,
        } => {
            let (reference, tests) = ingest_csv(data)?;
            if tests.is_empty() {
                return Err(Error::invalid(format!(
                    "{}: no test samples; nothing to chart",
                    data.display()
                )));
            }
            let m = reference.m();
            let n = tests[0].n();
            let limits = match ucl {
                Some(u) => ChartLimits::new(m, n, *u, sided, cli.arl0.unwrap_or(f64::NAN))?,
                None => {
                    let target = cli.arl0.ok_or_else(|| {
                        Error::invalid("provide --ucl or --arl0 to design limits")
                    })?;
                    let criterion = DesignCriterion::mean_arl0(target).with_tolerance(cli.tol);
                    let outcome = find_limits(m, n, criterion, sided, &mc)?;
                    print!("{}", outcome.render_trace());
                    print_design(&outcome);
                    outcome.limits
                }
            };
            let records = run_chart(&reference, &tests, &limits, tie)?;
            if *table {
                print!("{}", text_table(&records, &limits));
            }
            let signals: Vec<usize> = records
                .iter()
                .filter(|r| r.signal)
                .map(|r| r.sample_index)
                .collect();
            println!(
                "{} test samples, {} signal(s){}{}",
                records.len(),
                signals.len(),
                if signals.is_empty() { "" } else { " at " },
                signals
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("chart.svg"));
            write_svg(&records, &limits, &out)?;
            println!("chart written to {}", out.display());
            if let Some(path) = report {
                let rows: Vec<Vec<String>> = records
                    .iter()
                    .map(|r| {
                        vec![
                            r.sample_index.to_string(),
                            r.statistic.to_string(),
                            (r.signal as u8).to_string(),
                        ]
                    })
                    .collect();
                write_tsv(path, &["sample", "statistic", "signal"], &rows)?;
            }
            Ok(())
        }

        Command::Rlprob {
            m,
            n,
            ucl,
            t,
            dist,
            delta,
        } => {
            let method = TailMethod::parse(&cli.method)?;
            let family = Family::parse(dist)?;
            let f = mwchart::shewhart::comparison_distribution(family);
            let g = f.with_shift(*delta);
            let target = cli.arl0.unwrap_or(f64::NAN);
            let limits = ChartLimits::new(*m, *n, *ucl, sided, target)?;
            let est = run_length_cdf_at(*t, &f, &g, &limits, method, &mc)?;
            println!(
                "P(N <= {t}) = {:.6} (smc={:.2e}, K={})",
                est.probability, est.smc, est.k_used
            );
            if !est.converged {
                eprintln!("warning: Monte Carlo error target not reached");
            }
            if let Some(path) = &cli.out {
                write_tsv(
                    path,
                    &["t", "probability", "smc", "k"],
                    &[vec![
                        t.to_string(),
                        format!("{:.8}", est.probability),
                        format!("{:.3e}", est.smc),
                        est.k_used.to_string(),
                    ]],
                )?;
            }
            Ok(())
        }
    }
}

fn print_design(outcome: &DesignOutcome) {
    let limits = &outcome.limits;
    let lcl = limits
        .lcl
        .map(|l| l.to_string())
        .unwrap_or_else(|| "-".into());
    let p5 = limits
        .attained_percentile_5
        .map(|v| format!(" 5% perc={v:.3}"))
        .unwrap_or_default();
    println!(
        "final: ucl={} lcl={lcl} attained={:.3}{p5} ({} Monte Carlo iterations)",
        limits.ucl, outcome.attained, outcome.mc_iterations
    );
}
