//! Result types shared by the exact and approximate paths.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominators below this are treated as zero.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// How far a raw H may leave `[0, 1]` before the clamp is flagged.
pub const CLAMP_FLAG_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Empirical,
    Taylor,
    GaussianExact,
    Adjusted,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Empirical, Method::Taylor, Method::GaussianExact, Method::Adjusted];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Empirical => "empirical",
            Method::Taylor => "taylor",
            Method::GaussianExact => "gaussian_exact",
            Method::Adjusted => "adjusted",
        }
    }

    /// Whether the method only needs moment summaries.
    pub fn from_summaries(self) -> bool {
        self != Method::Empirical
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected empirical, taylor, gaussian_exact or adjusted)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// A quantity below zero was raised to zero.
    ClampedNonneg,
    /// H above one was lowered to one.
    ClampedUnit,
    /// Zero variance or zero denominator.
    Degenerate,
    /// The variance approximation came out negative (platykurtic input).
    VarianceCaveat,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Flags(BTreeSet<Flag>);

impl Flags {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, flag: Flag) {
        self.0.insert(flag);
    }

    pub fn contains(&self, flag: Flag) -> bool {
        self.0.contains(&flag)
    }

    pub fn extend(&mut self, other: &Flags) {
        self.0.extend(other.0.iter().copied());
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Flag> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<Flag> for Flags {
    fn from_iter<I: IntoIterator<Item = Flag>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// The three expectations that make up the energy distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    /// E‖X − Y‖
    pub exy: f64,
    /// E‖X − X′‖
    pub exx: f64,
    /// E‖Y − Y′‖
    pub eyy: f64,
}

impl Terms {
    /// `2·E_xy − (E_xx + E_yy)`; the grouping keeps the value symmetric in X and Y.
    pub fn energy(&self) -> f64 {
        2.0 * self.exy - (self.exx + self.eyy)
    }
}

/// An energy distance value with its terms, the derived coefficient H and
/// diagnostic flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// D² = 2E‖X−Y‖ − E‖X−X′‖ − E‖Y−Y′‖
    pub value: f64,
    /// H = D² / (2E‖X−Y‖), clamped to [0, 1].
    pub h: f64,
    pub method: Method,
    pub terms: Terms,
    pub flags: Flags,
    pub elapsed_ns: u64,
    /// Third-order residual per dimension for X and Y, when order-6 moments exist.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<Residuals>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl DistanceEstimate {
    /// Combines terms into D² and H using the shared clamping policy.
    pub fn assemble(method: Method, terms: Terms, mut flags: Flags, elapsed: Duration) -> Result<Self> {
        let value = terms.energy();
        let h = coefficient(value, terms.exy, &mut flags)?;
        Ok(Self {
            value,
            h,
            method,
            terms,
            flags,
            elapsed_ns: (elapsed.as_nanos() as u64).max(1),
            residual: None,
        })
    }

    pub fn elapsed(&self) -> Duration {
        Duration::from_nanos(self.elapsed_ns)
    }
}

/// `H = D² / (2·E_xy)` clamped to `[0, 1]`.
///
/// A vanishing denominator is only acceptable when D² vanishes too; then H is
/// 0 and `degenerate` is flagged. If `flags` already records a clamped term,
/// the vanishing denominator came from the approximation, and H is clamped
/// by the sign of D² instead.
pub fn coefficient(energy: f64, exy: f64, flags: &mut Flags) -> Result<f64> {
    let denom = 2.0 * exy;
    if denom < DEGENERATE_EPS {
        if energy.abs() <= DEGENERATE_EPS {
            flags.insert(Flag::Degenerate);
            return Ok(0.0);
        }
        if flags.contains(Flag::ClampedNonneg) {
            flags.insert(Flag::ClampedUnit);
            return Ok(if energy > 0.0 { 1.0 } else { 0.0 });
        }
        return Err(Error::DegenerateInputs);
    }
    let raw = energy / denom;
    if raw < 0.0 {
        if raw < -CLAMP_FLAG_TOL {
            flags.insert(Flag::ClampedNonneg);
        }
        Ok(0.0)
    } else if raw > 1.0 {
        if raw > 1.0 + CLAMP_FLAG_TOL {
            flags.insert(Flag::ClampedUnit);
        }
        Ok(1.0)
    } else {
        Ok(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("exact".parse::<Method>().is_err());
    }

    #[test]
    fn coefficient_clamps_and_flags() {
        let mut f = Flags::new();
        assert_eq!(coefficient(-1e-9, 1.0, &mut f).unwrap(), 0.0);
        assert!(f.is_empty());
        assert_eq!(coefficient(-0.1, 1.0, &mut f).unwrap(), 0.0);
        assert!(f.contains(Flag::ClampedNonneg));
        let mut f = Flags::new();
        assert_eq!(coefficient(3.0, 1.0, &mut f).unwrap(), 1.0);
        assert!(f.contains(Flag::ClampedUnit));
        let mut f = Flags::new();
        assert_eq!(coefficient(0.5, 1.0, &mut f).unwrap(), 0.25);
        assert!(f.is_empty());
    }

    #[test]
    fn zero_denominator() {
        let mut f = Flags::new();
        assert_eq!(coefficient(0.0, 0.0, &mut f).unwrap(), 0.0);
        assert!(f.contains(Flag::Degenerate));
        let err = coefficient(-0.5, 0.0, &mut Flags::new()).unwrap_err();
        assert_eq!(err.to_string(), "identical degenerate inputs");
    }

    #[test]
    fn flags_serialize_as_names() {
        let f: Flags = [Flag::Degenerate, Flag::ClampedUnit].into_iter().collect();
        assert_eq!(serde_json::to_string(&f).unwrap(), r#"["clamped_unit","degenerate"]"#);
    }
}
