//! `edist` command-line front end.

mod bench;
mod output;

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use edist::approx::energy_from_summaries;
use edist::empirical::energy_coefficient;
use edist::moments::{summarize, MomentSummary, Order};
use edist::proto::{
    file_digest, h_matrix, penalty_weights, publish, run_coordinator, HMatrix, NodeSummaryMessage, Registry,
    SessionDump, TcpTransport,
};
use edist::synth::{sample, DistributionSpec};
use edist::testing::permutation_test;
use edist::{DatasetMatrix, Method};
use serde_json::json;

use crate::output::{fail, CliError, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "edist", version, about = "Energy distance and energy coefficient H")]
struct Cli {
    /// Seed for sampling, permutations and benchmarks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Moment summary of a CSV dataset.
    Summarize {
        data: PathBuf,
        #[arg(long, default_value_t = 4)]
        order: u8,
        /// Also write the summary JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy distance and H between two datasets or two summaries.
    Distance {
        #[arg(required_unless_present = "summary_x", conflicts_with_all = ["summary_x", "summary_y"])]
        x: Option<PathBuf>,
        #[arg(requires = "x")]
        y: Option<PathBuf>,
        /// Summary JSON files instead of CSV data.
        #[arg(long, requires = "summary_y")]
        summary_x: Option<PathBuf>,
        #[arg(long, requires = "summary_x")]
        summary_y: Option<PathBuf>,
        #[arg(long, default_value = "empirical")]
        method: Method,
    },
    /// Pairwise H between nodes given as summary JSON files or CSV datasets.
    Hmatrix {
        /// Summary JSON files (raw summaries or node messages).
        #[arg(long, num_args = 1.., required_unless_present = "data")]
        summaries: Vec<PathBuf>,
        /// CSV datasets, summarized locally.
        #[arg(long, num_args = 1.., conflicts_with = "summaries")]
        data: Vec<PathBuf>,
        #[arg(long, default_value = "taylor")]
        method: Method,
        /// Also report penalty weights λ₀(1 − H).
        #[arg(long)]
        lambda0: Option<f64>,
    },
    /// Permutation test of equal distributions.
    Permtest {
        x: PathBuf,
        y: PathBuf,
        #[arg(long, default_value_t = 999)]
        permutations: usize,
    },
    /// Draw a synthetic dataset and write it as CSV.
    Synth {
        /// e.g. `normal(0,1)`, `exponential(rate=1)`, `student_t(5)`, `beta(0.5,0.5)`,
        /// `gamma(1,2)`, `bernoulli(0.1)`
        #[arg(long)]
        dist: DistributionSpec,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark grid of H values and timings.
    Bench {
        /// JSON config; defaults to the reference families over n = 10², 10³, 10⁴.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect node summaries over TCP and compute the H matrix.
    Coordinator {
        #[arg(long)]
        listen: String,
        #[arg(long)]
        min_nodes: usize,
        #[arg(long, default_value = "taylor")]
        method: Method,
        /// Session dump (registry and H matrix) as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lambda0: Option<f64>,
    },
    /// Summarize a CSV dataset and publish it to a coordinator.
    Node {
        #[arg(long)]
        connect: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long, default_value_t = 4)]
        order: u8,
    },
}

fn load_summary(path: &Path) -> Result<(String, MomentSummary), CliError> {
    let text = fs::read_to_string(path)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let value: serde_json::Value = serde_json::from_str(text.trim()).map_err(edist::Error::from)?;
    if value.get("node_id").is_some() {
        let msg = NodeSummaryMessage::from_line(text.trim())?;
        return Ok((msg.node_id, msg.summary));
    }
    Ok((stem, MomentSummary::from_json(text.trim())?))
}

fn hmatrix_output(h: &HMatrix, lambda0: Option<f64>, registry: Option<&Registry>) -> Result<Output, CliError> {
    let mut value = serde_json::to_value(h).map_err(edist::Error::from)?;
    if let Some(l) = lambda0 {
        if !(l > 0.0) {
            return Err(CliError::Usage(format!("lambda0 must be positive, got {l}")));
        }
        value["weights"] = json!(penalty_weights(h, l));
    }
    if let Some(reg) = registry {
        value["rejections"] = json!(reg.rejections);
    }
    let mut rows = vec![std::iter::once("id".to_string()).chain(h.ids.iter().cloned()).collect::<Vec<_>>()];
    for (id, row) in h.ids.iter().zip(&h.values) {
        rows.push(std::iter::once(id.clone()).chain(row.iter().map(|v| v.to_string())).collect());
    }
    Ok(Output::new(value, rows))
}

fn connect_with_retry(addr: &str) -> Result<TcpTransport, CliError> {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        match TcpTransport::connect(addr) {
            Ok(conn) => return Ok(conn),
            Err(e) if Instant::now() >= deadline => return Err(e.into()),
            Err(_) => thread::sleep(Duration::from_millis(50)),
        }
    }
}

fn run(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Summarize { data, order, out } => {
            let data = DatasetMatrix::load_csv(&data)?;
            let summary = summarize(&data, Order::from_u8(order)?);
            if let Some(path) = out {
                fs::write(path, summary.to_json())?;
            }
            Ok(output::summary(&summary))
        }
        Command::Distance { x, y, summary_x, summary_y, method } => {
            let est = match (x, y, summary_x, summary_y) {
                (Some(x), Some(y), _, _) => {
                    energy_coefficient(&DatasetMatrix::load_csv(&x)?, &DatasetMatrix::load_csv(&y)?, method)?
                }
                (_, _, Some(sx), Some(sy)) => energy_from_summaries(&load_summary(&sx)?.1, &load_summary(&sy)?.1, method)?,
                _ => return Err(CliError::Usage("give two CSV files or --summary-x and --summary-y".into())),
            };
            Ok(output::estimate(&est))
        }
        Command::Hmatrix { summaries, data, method, lambda0 } => {
            let mut registry = Registry::new();
            if data.is_empty() {
                for path in &summaries {
                    let (id, s) = load_summary(path)?;
                    registry.submit(NodeSummaryMessage::new(id, s))?;
                }
            } else {
                for path in &data {
                    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    let s = summarize(&DatasetMatrix::load_csv(path)?, Order::Four);
                    registry.submit(NodeSummaryMessage::new(id, s))?;
                }
            }
            hmatrix_output(&h_matrix(&registry, method)?, lambda0, None)
        }
        Command::Permtest { x, y, permutations } => {
            let r = permutation_test(&DatasetMatrix::load_csv(&x)?, &DatasetMatrix::load_csv(&y)?, permutations, cli.seed)?;
            Ok(output::test_result(&r))
        }
        Command::Synth { dist, n, d, out } => {
            let data = sample(&dist, n, d, cli.seed)?;
            match out {
                Some(path) => {
                    data.save_csv(&path)?;
                    Ok(Output::quiet())
                }
                None => {
                    let mut buf = Vec::new();
                    data.write_csv(&mut buf)?;
                    Ok(Output::raw(String::from_utf8(buf).expect("csv is utf-8")))
                }
            }
        }
        Command::Bench { config, out } => {
            let config = match config {
                Some(path) => bench::BenchConfig::load(&path)?,
                None => bench::BenchConfig::default(),
            };
            let report = bench::run(&config, cli.seed)?;
            let rendered = output::bench(&report);
            if let Some(path) = out {
                fs::write(path, rendered.render(cli.format))?;
            }
            Ok(rendered)
        }
        Command::Coordinator { listen, min_nodes, method, out, lambda0 } => {
            let listener = TcpListener::bind(&listen)?;
            eprintln!("{}", json!({ "listening": listener.local_addr()?.to_string() }));
            let registry = run_coordinator(listener, min_nodes)?;
            let h = h_matrix(&registry, method)?;
            if let Some(path) = out {
                let dump = SessionDump { registry: registry.clone(), hmatrix: h.clone() };
                fs::write(path, serde_json::to_string_pretty(&dump).map_err(edist::Error::from)?)?;
            }
            hmatrix_output(&h, lambda0, Some(&registry))
        }
        Command::Node { connect, data, id, order } => {
            let summary = summarize(&DatasetMatrix::load_csv(&data)?, Order::from_u8(order)?);
            let msg = NodeSummaryMessage::new(id, summary).with_digest(file_digest(&data)?);
            let mut conn = connect_with_retry(&connect)?;
            let response = publish(&mut conn, &msg)?;
            if !response.ok {
                return Err(CliError::Rejected(response.error.unwrap_or_default()));
            }
            Ok(Output::new(json!({ "ok": true, "bytes": msg.to_line().len() }), vec![vec!["ok".into()], vec!["true".into()]]))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::Usage(e.to_string()));
        }
    }
    let format = cli.format;
    match run(cli) {
        Ok(out) => {
            print!("{}", out.render(format));
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
