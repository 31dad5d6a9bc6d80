use std::process::ExitCode;

use edist::estimate::DistanceEstimate;
use edist::moments::MomentSummary;
use edist::testing::{TestResult, ALPHAS};
use serde_json::{json, Value};

use crate::bench::BenchReport;
use crate::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] edist::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("rejected by coordinator: {0}")]
    Rejected(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        use edist::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Parse { .. } | E::Csv(_) => "parse",
                E::NonFinite { .. } => "non_finite",
                E::EmptyInput => "empty_input",
                E::DimensionMismatch { .. } => "dimension_mismatch",
                E::MethodRequiresUnivariate { .. } | E::MethodUnavailable(_) => "unsupported_method",
                E::DegenerateInputs => "degenerate",
                E::InsufficientPermutations(_) => "insufficient_permutations",
                E::InvalidParameters(_) => "invalid_parameters",
                E::Json(_) | E::InvalidSummary(_) => "invalid_summary",
                E::Io(_) => "io",
                E::Protocol(_) => "protocol",
                _ => "error",
            },
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Rejected(_) => "rejected",
        }
    }
}

/// Prints the JSON error object on stdout and returns exit code 1.
pub fn fail(e: &CliError) -> ExitCode {
    let mut obj = json!({ "kind": e.kind(), "message": e.to_string() });
    if let CliError::Core(edist::Error::Parse { row, col, .. } | edist::Error::NonFinite { row, col }) = e {
        obj["row"] = json!(row);
        obj["col"] = json!(col);
    }
    println!("{}", json!({ "error": obj }));
    ExitCode::FAILURE
}

/// A command result with a JSON form and a tabular (CSV) form.
pub struct Output {
    json: Option<Value>,
    rows: Vec<Vec<String>>,
    raw: Option<String>,
}

impl Output {
    pub fn new(json: Value, rows: Vec<Vec<String>>) -> Self {
        Self { json: Some(json), rows, raw: None }
    }

    pub fn raw(text: String) -> Self {
        Self { json: None, rows: Vec::new(), raw: Some(text) }
    }

    pub fn quiet() -> Self {
        Self { json: None, rows: Vec::new(), raw: None }
    }

    pub fn render(&self, format: Format) -> String {
        if let Some(raw) = &self.raw {
            return raw.clone();
        }
        let Some(json) = &self.json else {
            return String::new();
        };
        match format {
            Format::Json => format!("{json}\n"),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for row in &self.rows {
                    w.write_record(row).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
            }
        }
    }
}

fn flags_text(flags: &edist::Flags) -> String {
    flags.iter().map(|f| serde_json::to_value(f).unwrap().as_str().unwrap().to_string()).collect::<Vec<_>>().join(";")
}

pub fn summary(s: &MomentSummary) -> Output {
    let top = s.order().as_u8() as usize;
    let mut header = vec!["dim".to_string(), "n".into(), "mean".into()];
    header.extend((2..=top).map(|k| format!("s{k}")));
    let mut rows = vec![header];
    for i in 0..s.d() {
        let mut row = vec![i.to_string(), s.n().to_string(), s.mean(i).to_string()];
        row.extend((2..=top).map(|k| s.central_sum(i, k).to_string()));
        rows.push(row);
    }
    Output::new(serde_json::to_value(s).expect("summary serializes"), rows)
}

pub fn estimate(e: &DistanceEstimate) -> Output {
    let rows = vec![
        ["method", "exy", "exx", "eyy", "value", "h", "flags", "elapsed_ns"].map(String::from).to_vec(),
        vec![
            e.method.to_string(),
            e.terms.exy.to_string(),
            e.terms.exx.to_string(),
            e.terms.eyy.to_string(),
            e.value.to_string(),
            e.h.to_string(),
            flags_text(&e.flags),
            e.elapsed_ns.to_string(),
        ],
    ];
    Output::new(serde_json::to_value(e).expect("estimate serializes"), rows)
}

pub fn test_result(r: &TestResult) -> Output {
    let mut header = ["statistic", "p_value", "permutations", "seed"].map(String::from).to_vec();
    let mut row = vec![r.statistic.to_string(), r.p_value.to_string(), r.permutations.to_string(), r.seed.to_string()];
    for a in ALPHAS {
        let key = format!("{a}");
        header.push(format!("reject_{key}"));
        row.push(r.reject_at[&key].to_string());
    }
    Output::new(serde_json::to_value(r).expect("result serializes"), vec![header, row])
}

pub fn bench(report: &BenchReport) -> Output {
    let mut rows = vec![["dist_a", "dist_b", "n", "method", "H", "elapsed_ns", "flags", "seed"].map(String::from).to_vec()];
    for r in &report.rows {
        rows.push(vec![
            r.dist_a.clone(),
            r.dist_b.clone(),
            r.n.to_string(),
            r.method.to_string(),
            r.h.to_string(),
            r.elapsed_ns.to_string(),
            flags_text(&r.flags),
            r.seed.to_string(),
        ]);
    }
    Output::new(serde_json::to_value(report).expect("report serializes"), rows)
}
