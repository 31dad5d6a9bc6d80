//! Seeded samplers with closed-form moments.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`). Rows are generated in
//! blocks of [`BLOCK_ROWS`]; block `b` draws from the generator seeded with
//! `seed` on stream `b`, so output is identical for any thread count and on
//! any platform. Within a block, values are drawn row by row, left to right.
//!
//! Per-family algorithms (all from `rand_distr`): normal and exponential use
//! the ziggurat method, gamma uses Marsaglia–Tsang, beta uses Cheng's
//! algorithms, Student's t is a normal over a scaled chi-square, Bernoulli
//! compares a 64-bit uniform integer against `p·2⁶⁴`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Beta, Distribution, Exp, Gamma, Normal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};

pub const BLOCK_ROWS: usize = 4096;

/// How the exponential parameter `beta` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpParam {
    /// density `β e^{−βx}`, mean `1/β`
    #[default]
    Rate,
    /// density `e^{−x/β}/β`, mean `β`
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Normal { mean: f64, sd: f64 },
    Exponential {
        beta: f64,
        #[serde(default)]
        param: ExpParam,
    },
    StudentT { df: f64 },
    Beta { alpha: f64, beta: f64 },
    Gamma { shape: f64, scale: f64 },
    Bernoulli { p: f64 },
}

/// Mean, variance, skewness and excess kurtosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalMoments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistributionSpec::Normal { mean, sd } => write!(f, "normal({mean},{sd})"),
            DistributionSpec::Exponential { beta, param: ExpParam::Rate } => write!(f, "exponential(rate={beta})"),
            DistributionSpec::Exponential { beta, param: ExpParam::Scale } => write!(f, "exponential(scale={beta})"),
            DistributionSpec::StudentT { df } => write!(f, "student_t({df})"),
            DistributionSpec::Beta { alpha, beta } => write!(f, "beta({alpha},{beta})"),
            DistributionSpec::Gamma { shape, scale } => write!(f, "gamma({shape},{scale})"),
            DistributionSpec::Bernoulli { p } => write!(f, "bernoulli({p})"),
        }
    }
}

/// Parses the display form, e.g. `normal(0,1)`, `exponential(rate=1)`,
/// `exponential(scale=10)`, `exponential(2)` (rate), `student_t(5)`, or a JSON
/// object with a `family` tag.
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Ok(serde_json::from_str(s)?);
        }
        let bad = || Error::InvalidParameters(format!("cannot parse distribution '{s}'"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let mut param = ExpParam::Rate;
        let mut args = Vec::new();
        for a in inner.split(',') {
            let a = a.trim();
            let v = match a.split_once('=') {
                Some(("rate", v)) => v,
                Some(("scale", v)) => {
                    param = ExpParam::Scale;
                    v
                }
                Some(_) => return Err(bad()),
                None => a,
            };
            args.push(v.trim().parse::<f64>().map_err(|_| bad())?);
        }
        let spec = match (name.trim(), args.as_slice()) {
            ("normal", &[mean, sd]) => Self::normal(mean, sd),
            ("exponential", &[beta]) => Self::Exponential { beta, param },
            ("student_t", &[df]) => Self::student_t(df),
            ("beta", &[a, b]) => Self::beta(a, b),
            ("gamma", &[shape, scale]) => Self::gamma(shape, scale),
            ("bernoulli", &[p]) => Self::bernoulli(p),
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DistributionSpec {
    pub fn normal(mean: f64, sd: f64) -> Self {
        Self::Normal { mean, sd }
    }

    pub fn exponential(rate: f64) -> Self {
        Self::Exponential { beta: rate, param: ExpParam::Rate }
    }

    pub fn student_t(df: f64) -> Self {
        Self::StudentT { df }
    }

    pub fn beta(alpha: f64, beta: f64) -> Self {
        Self::Beta { alpha, beta }
    }

    pub fn gamma(shape: f64, scale: f64) -> Self {
        Self::Gamma { shape, scale }
    }

    pub fn bernoulli(p: f64) -> Self {
        Self::Bernoulli { p }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistributionSpec::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidParameters("mean must be finite".into()));
                }
                positive("sd", sd)
            }
            DistributionSpec::Exponential { beta, .. } => positive("beta", beta),
            DistributionSpec::StudentT { df } => positive("df", df),
            DistributionSpec::Beta { alpha, beta } => positive("alpha", alpha).and(positive("beta", beta)),
            DistributionSpec::Gamma { shape, scale } => positive("shape", shape).and(positive("scale", scale)),
            DistributionSpec::Bernoulli { p } => {
                if p > 0.0 && p < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameters(format!("p must lie in (0, 1), got {p}")))
                }
            }
        }
    }

    /// Exponential rate regardless of parameterization.
    fn exp_rate(beta: f64, param: ExpParam) -> f64 {
        match param {
            ExpParam::Rate => beta,
            ExpParam::Scale => 1.0 / beta,
        }
    }

    pub fn theoretical_moments(&self) -> Result<TheoreticalMoments> {
        self.validate()?;
        let m = |mean, variance, skewness, excess_kurtosis| TheoreticalMoments { mean, variance, skewness, excess_kurtosis };
        Ok(match *self {
            DistributionSpec::Normal { mean, sd } => m(mean, sd * sd, 0.0, 0.0),
            DistributionSpec::Exponential { beta, param } => {
                let rate = Self::exp_rate(beta, param);
                m(1.0 / rate, 1.0 / (rate * rate), 2.0, 6.0)
            }
            DistributionSpec::StudentT { df } => {
                if df <= 4.0 {
                    return Err(Error::KurtosisUndefined);
                }
                m(0.0, df / (df - 2.0), 0.0, 6.0 / (df - 4.0))
            }
            DistributionSpec::Beta { alpha: a, beta: b } => {
                let s = a + b;
                m(
                    a / s,
                    a * b / (s * s * (s + 1.0)),
                    2.0 * (b - a) * (s + 1.0).sqrt() / ((s + 2.0) * (a * b).sqrt()),
                    6.0 * ((a - b) * (a - b) * (s + 1.0) - a * b * (s + 2.0)) / (a * b * (s + 2.0) * (s + 3.0)),
                )
            }
            DistributionSpec::Gamma { shape, scale } => {
                m(shape * scale, shape * scale * scale, 2.0 / shape.sqrt(), 6.0 / shape)
            }
            DistributionSpec::Bernoulli { p } => {
                let pq = p * (1.0 - p);
                m(p, pq, (1.0 - 2.0 * p) / pq.sqrt(), (1.0 - 6.0 * pq) / pq)
            }
        })
    }

    fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let bad = |e: &dyn fmt::Display| Error::InvalidParameters(e.to_string());
        Ok(match *self {
            DistributionSpec::Normal { mean, sd } => Sampler::Normal(Normal::new(mean, sd).map_err(|e| bad(&e))?),
            DistributionSpec::Exponential { beta, param } => {
                Sampler::Exp(Exp::new(Self::exp_rate(beta, param)).map_err(|e| bad(&e))?)
            }
            DistributionSpec::StudentT { df } => Sampler::StudentT(StudentT::new(df).map_err(|e| bad(&e))?),
            DistributionSpec::Beta { alpha, beta } => Sampler::Beta(Beta::new(alpha, beta).map_err(|e| bad(&e))?),
            DistributionSpec::Gamma { shape, scale } => {
                Sampler::Gamma(Gamma::new(shape, scale).map_err(|e| bad(&e))?)
            }
            DistributionSpec::Bernoulli { p } => Sampler::Bernoulli(Bernoulli::new(p).map_err(|e| bad(&e))?),
        })
    }
}

enum Sampler {
    Normal(Normal<f64>),
    Exp(Exp<f64>),
    StudentT(StudentT<f64>),
    Beta(Beta<f64>),
    Gamma(Gamma<f64>),
    Bernoulli(Bernoulli),
}

impl Sampler {
    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Exp(d) => d.sample(rng),
            Sampler::StudentT(d) => d.sample(rng),
            Sampler::Beta(d) => d.sample(rng),
            Sampler::Gamma(d) => d.sample(rng),
            Sampler::Bernoulli(d) => {
                if d.sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `n × d` i.i.d. draws from `spec`.
pub fn sample(spec: &DistributionSpec, n: usize, d: usize, seed: u64) -> Result<DatasetMatrix> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameters(format!("n and d must be positive, got n={n}, d={d}")));
    }
    let sampler = spec.sampler()?;
    let blocks = n.div_ceil(BLOCK_ROWS);
    let values: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let rows = BLOCK_ROWS.min(n - b * BLOCK_ROWS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let sampler = &sampler;
            (0..rows * d).map(move |_| sampler.draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    DatasetMatrix::new(n, d, values)
}

/// The families compared in the benchmark harness.
pub fn reference_families() -> Vec<DistributionSpec> {
    vec![
        DistributionSpec::normal(0.0, 1.0),
        DistributionSpec::normal(1.0, 1.0),
        DistributionSpec::normal(10.0, 1.0),
        DistributionSpec::exponential(0.1),
        DistributionSpec::exponential(1.0),
        DistributionSpec::exponential(10.0),
        DistributionSpec::student_t(5.0),
        DistributionSpec::beta(0.5, 0.5),
        DistributionSpec::gamma(1.0, 2.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_form_parses_back() {
        let specs = reference_families()
            .into_iter()
            .chain([DistributionSpec::bernoulli(0.05), DistributionSpec::Exponential { beta: 10.0, param: ExpParam::Scale }]);
        for spec in specs {
            assert_eq!(spec.to_string().parse::<DistributionSpec>().unwrap(), spec);
        }
        assert_eq!("exponential(2)".parse::<DistributionSpec>().unwrap(), DistributionSpec::exponential(2.0));
        assert_eq!(
            r#"{"family":"gamma","shape":1,"scale":2}"#.parse::<DistributionSpec>().unwrap(),
            DistributionSpec::gamma(1.0, 2.0)
        );
        for bad in ["normal(0)", "cauchy(0,1)", "normal(0,-1)", "gamma 1 2", "exponential(width=2)"] {
            assert!(bad.parse::<DistributionSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn bernoulli_closed_forms() {
        let m = DistributionSpec::bernoulli(0.05).theoretical_moments().unwrap();
        assert!((m.skewness - 4.1295).abs() < 1e-4);
        assert!((m.excess_kurtosis - 15.0526).abs() < 1e-4);
        let m = DistributionSpec::bernoulli(0.1).theoretical_moments().unwrap();
        assert!((m.skewness - 8.0 / 3.0).abs() < 1e-12);
        assert!((m.excess_kurtosis - 46.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_closed_forms_and_switch() {
        let r = DistributionSpec::exponential(4.0).theoretical_moments().unwrap();
        assert_eq!((r.mean, r.variance, r.skewness, r.excess_kurtosis), (0.25, 0.0625, 2.0, 6.0));
        let s = DistributionSpec::Exponential { beta: 4.0, param: ExpParam::Scale }.theoretical_moments().unwrap();
        assert_eq!((s.mean, s.variance), (4.0, 16.0));
    }

    #[test]
    fn student_t_moments() {
        let m = DistributionSpec::student_t(5.0).theoretical_moments().unwrap();
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!((m.skewness, m.excess_kurtosis), (0.0, 6.0));
        assert!(matches!(DistributionSpec::student_t(4.0).theoretical_moments(), Err(Error::KurtosisUndefined)));
        assert_eq!(DistributionSpec::student_t(3.0).theoretical_moments().unwrap_err().to_string(), "kurtosis undefined");
    }

    #[test]
    fn beta_arcsine_moments() {
        let m = DistributionSpec::beta(0.5, 0.5).theoretical_moments().unwrap();
        assert!((m.mean - 0.5).abs() < 1e-15);
        assert!((m.variance - 0.125).abs() < 1e-15);
        assert!(m.skewness.abs() < 1e-15);
        assert!((m.excess_kurtosis + 1.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_moments() {
        let m = DistributionSpec::gamma(1.0, 2.0).theoretical_moments().unwrap();
        assert_eq!((m.mean, m.variance, m.skewness, m.excess_kurtosis), (2.0, 4.0, 2.0, 6.0));
    }

    #[test]
    fn invalid_parameters() {
        for spec in [
            DistributionSpec::normal(0.0, 0.0),
            DistributionSpec::exponential(-1.0),
            DistributionSpec::bernoulli(1.0),
            DistributionSpec::beta(0.0, 1.0),
            DistributionSpec::gamma(1.0, f64::NAN),
        ] {
            assert!(matches!(sample(&spec, 10, 1, 0), Err(Error::InvalidParameters(_))), "{spec}");
        }
        assert!(sample(&DistributionSpec::normal(0.0, 1.0), 0, 1, 0).is_err());
    }

    #[test]
    fn seed_determinism_across_blocks() {
        let spec = DistributionSpec::gamma(2.0, 1.5);
        let a = sample(&spec, BLOCK_ROWS * 2 + 17, 3, 99).unwrap();
        let b = sample(&spec, BLOCK_ROWS * 2 + 17, 3, 99).unwrap();
        assert_eq!(a, b);
        let c = sample(&spec, BLOCK_ROWS * 2 + 17, 3, 100).unwrap();
        assert_ne!(a, c);
        // a shorter draw is a prefix of a longer one
        let short = sample(&spec, 10, 3, 99).unwrap();
        assert_eq!(short.values(), &a.values()[..30]);
    }

    #[test]
    fn spec_json_shape() {
        let s: DistributionSpec = serde_json::from_str(r#"{"family":"exponential","beta":0.1}"#).unwrap();
        assert_eq!(s, DistributionSpec::exponential(0.1));
        let back = serde_json::to_string(&DistributionSpec::normal(1.0, 2.0)).unwrap();
        assert_eq!(back, r#"{"family":"normal","mean":1.0,"sd":2.0}"#);
    }
}
