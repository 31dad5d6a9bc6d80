//! Benchmark harness: H and timing over a grid of distribution pairs, sample
//! sizes and methods.
//!
//! Two setups are available. `same` compares two independent samples of each
//! distribution; `reference` compares each distribution with the reference
//! distribution (N(0,1) by default). Each (pair, n, rep) draws its data once;
//! every method is then timed on that data with one warm-up run and the median
//! of `timing_repeats` runs, all on a single worker thread.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use edist::empirical::energy_coefficient;
use edist::synth::{reference_families, sample, DistributionSpec};
use edist::{Flags, Method};
use serde::{Deserialize, Deserializer, Serialize};

use crate::output::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    Same,
    Reference,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Text(String),
    Object(DistributionSpec),
}

impl TryFrom<SpecRepr> for DistributionSpec {
    type Error = edist::Error;

    fn try_from(r: SpecRepr) -> Result<Self, Self::Error> {
        let spec = match r {
            SpecRepr::Text(s) => s.parse()?,
            SpecRepr::Object(spec) => spec,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn specs<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DistributionSpec>, D::Error> {
    Vec::<SpecRepr>::deserialize(d)?
        .into_iter()
        .map(|r| DistributionSpec::try_from(r).map_err(serde::de::Error::custom))
        .collect()
}

fn spec<'de, D: Deserializer<'de>>(d: D) -> Result<DistributionSpec, D::Error> {
    DistributionSpec::try_from(SpecRepr::deserialize(d)?).map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(deserialize_with = "specs")]
    pub distributions: Vec<DistributionSpec>,
    #[serde(deserialize_with = "spec")]
    pub reference: DistributionSpec,
    pub setups: Vec<Setup>,
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    /// Independent data draws per cell.
    pub repetitions: usize,
    /// Timed runs per method after the warm-up; the median is reported.
    pub timing_repeats: usize,
    pub d: usize,
    /// Overrides `--seed` when present.
    pub seed: Option<u64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            distributions: reference_families(),
            reference: DistributionSpec::normal(0.0, 1.0),
            setups: vec![Setup::Same, Setup::Reference],
            sizes: vec![100, 1000, 10_000],
            methods: vec![Method::Empirical, Method::Taylor],
            repetitions: 1,
            timing_repeats: 5,
            d: 1,
            seed: None,
        }
    }
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.distributions.is_empty() || self.sizes.is_empty() || self.methods.is_empty() || self.setups.is_empty() {
            return bad("distributions, setups, sizes and methods must be non-empty");
        }
        if self.sizes.iter().any(|&n| n < 2) {
            return bad("sizes must be at least 2");
        }
        if self.repetitions == 0 || self.timing_repeats == 0 || self.d == 0 {
            return bad("repetitions, timing_repeats and d must be positive");
        }
        if self.d > 1 && self.methods.iter().any(|m| matches!(m, Method::GaussianExact | Method::Adjusted)) {
            return bad("gaussian_exact and adjusted require d=1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dist_a: String,
    pub dist_b: String,
    pub n: usize,
    pub method: Method,
    #[serde(rename = "H")]
    pub h: f64,
    pub elapsed_ns: u64,
    pub flags: Flags,
    /// Seed of the first sample; the second uses `seed + 1`.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub dist_a: String,
    pub dist_b: String,
    pub n: usize,
    pub method: Method,
    pub mean_h: f64,
    pub mean_elapsed_ns: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    pub cells: Vec<BenchCell>,
}

fn pairs(config: &BenchConfig) -> Vec<(DistributionSpec, DistributionSpec)> {
    let mut out = Vec::new();
    for setup in &config.setups {
        for spec in &config.distributions {
            out.push(match setup {
                Setup::Same => (*spec, *spec),
                Setup::Reference => (*spec, config.reference),
            });
        }
    }
    out
}

fn timed(x: &edist::DatasetMatrix, y: &edist::DatasetMatrix, method: Method, repeats: usize) -> Result<(f64, Flags, u64), CliError> {
    let first = energy_coefficient(x, y, method)?;
    let mut times: Vec<u64> = (0..repeats)
        .map(|_| {
            let start = Instant::now();
            let est = energy_coefficient(x, y, method).map(|e| e.h);
            std::hint::black_box(est).ok();
            (start.elapsed().as_nanos() as u64).max(1)
        })
        .collect();
    times.sort_unstable();
    Ok((first.h, first.flags, times[repeats / 2]))
}

pub fn run(config: &BenchConfig, seed: u64) -> Result<BenchReport, CliError> {
    config.validate()?;
    let seed = config.seed.unwrap_or(seed);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rows = Vec::new();
    pool.install(|| -> Result<(), CliError> {
        for (p, (a, b)) in pairs(config).into_iter().enumerate() {
            for (s, &n) in config.sizes.iter().enumerate() {
                for rep in 0..config.repetitions {
                    let cell = ((p * config.sizes.len() + s) * config.repetitions + rep) as u64;
                    let data_seed = seed.wrapping_add(2 * cell);
                    let x = sample(&a, n, config.d, data_seed)?;
                    let y = sample(&b, n, config.d, data_seed.wrapping_add(1))?;
                    for &method in &config.methods {
                        let (h, flags, elapsed_ns) = timed(&x, &y, method, config.timing_repeats)?;
                        rows.push(BenchRow {
                            dist_a: a.to_string(),
                            dist_b: b.to_string(),
                            n,
                            method,
                            h,
                            elapsed_ns,
                            flags,
                            seed: data_seed,
                        });
                    }
                }
            }
        }
        Ok(())
    })?;

    let mut groups: BTreeMap<(String, String, usize, Method), Vec<&BenchRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.dist_a.clone(), r.dist_b.clone(), r.n, r.method)).or_default().push(r);
    }
    let cells = groups
        .into_iter()
        .map(|((dist_a, dist_b, n, method), rs)| {
            let k = rs.len() as f64;
            BenchCell {
                dist_a,
                dist_b,
                n,
                method,
                mean_h: rs.iter().map(|r| r.h).sum::<f64>() / k,
                mean_elapsed_ns: rs.iter().map(|r| r.elapsed_ns as f64).sum::<f64>() / k,
                reps: rs.len(),
            }
        })
        .collect();
    Ok(BenchReport { seed, config: config.clone(), rows, cells })
}
