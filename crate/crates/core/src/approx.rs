//! Linear-time estimates of expected distances from moment summaries.
//!
//! Three families of estimates are provided:
//!
//! * **taylor** expands `g(z) = √z` to second order around the mean squared
//!   distance `ν = E‖X − Y‖²`, giving `E‖X−Y‖ ≈ √ν (1 − Var‖X−Y‖² / (8ν²))`
//!   with the variance written through skewness and excess kurtosis. The
//!   within-sample version is `√2σ (1 − (γ₄ + 4)/16)`, and the `d`-dimensional
//!   forms aggregate per-dimension moments.
//! * **gaussian_exact** uses the closed forms for normal variables:
//!   `E|X − X′| = 2σ/√π` and the folded-normal mean for `E|X − Y|`.
//! * **adjusted** subtracts the Taylor kurtosis/skewness correction from the
//!   Gaussian closed forms.
//!
//! The Gaussian and adjusted forms are univariate only. Approximated
//! expectations that come out negative (possible for extreme kurtosis) are
//! clamped to zero and flagged.

use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimate::{DistanceEstimate, Flag, Flags, Method, Residuals, Terms};
use crate::moments::{DerivedMoments, MomentSummary, Order};
use crate::special::erf;

/// An approximated expectation and the flags raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub flags: Flags,
}

impl Expectation {
    fn exact(value: f64) -> Self {
        Self { value, flags: Flags::new() }
    }

    fn degenerate() -> Self {
        Self { value: 0.0, flags: [Flag::Degenerate].into_iter().collect() }
    }

    /// Raises a negative raw value to zero, flagging the clamp.
    fn clamped(raw: f64) -> Self {
        if raw < 0.0 {
            Self { value: 0.0, flags: [Flag::ClampedNonneg].into_iter().collect() }
        } else {
            Self::exact(raw)
        }
    }
}

/// Moments of one coordinate as used by the formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marginal {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Marginal {
    pub fn new(mean: f64, variance: f64, skewness: f64, excess_kurtosis: f64) -> Self {
        Self { mean, variance, skewness, excess_kurtosis }
    }

    pub fn gaussian(mean: f64, variance: f64) -> Self {
        Self::new(mean, variance, 0.0, 0.0)
    }

    fn sd(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }

    /// `σ⁴γ₄`, the fourth cumulant.
    fn c4(&self) -> f64 {
        self.variance * self.variance * self.excess_kurtosis
    }

    /// `σ³γ₃`, the third central moment.
    fn c3(&self) -> f64 {
        self.sd().powi(3) * self.skewness
    }
}

impl From<DerivedMoments> for Marginal {
    fn from(m: DerivedMoments) -> Self {
        Self::new(m.mean, m.variance, m.skewness, m.excess_kurtosis)
    }
}

/// Per-dimension moments of both sides plus the aggregates the formulas use.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxInputs {
    pub x: Vec<Marginal>,
    pub y: Vec<Marginal>,
    /// `Σ (σ²_Xi + σ²_Yi + (μ_Xi − μ_Yi)²)`
    pub nu_xy: f64,
    /// `Σ (σ⁴_Xi γ₄_Xi + σ⁴_Yi γ₄_Yi)`
    pub c4_xy: f64,
    /// `Σ (σ³_Xi γ₃_Xi − σ³_Yi γ₃_Yi)`
    pub c3_xy: f64,
    /// `Σ (μ_Xi − μ_Yi)`; the signed mean shift in one dimension.
    pub delta1: f64,
    /// `Σ (μ_Xi − μ_Yi)²`
    pub delta2: f64,
}

impl ApproxInputs {
    pub fn new(x: Vec<Marginal>, y: Vec<Marginal>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { left: x.len(), right: y.len() });
        }
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        let (mut nu_xy, mut c4_xy, mut c3_xy, mut delta1, mut delta2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(&y) {
            let d = a.mean - b.mean;
            nu_xy += a.variance + b.variance + d * d;
            c4_xy += a.c4() + b.c4();
            c3_xy += a.c3() - b.c3();
            delta1 += d;
            delta2 += d * d;
        }
        Ok(Self { x, y, nu_xy, c4_xy, c3_xy, delta1, delta2 })
    }

    pub fn univariate(x: Marginal, y: Marginal) -> Self {
        Self::new(vec![x], vec![y]).expect("one dimension on each side")
    }

    pub fn from_summaries(sx: &MomentSummary, sy: &MomentSummary) -> Result<Self> {
        if sx.d() != sy.d() {
            return Err(Error::DimensionMismatch { left: sx.d(), right: sy.d() });
        }
        Self::new(marginals(sx)?, marginals(sy)?)
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    fn require_univariate(&self, method: &'static str) -> Result<()> {
        if self.d() != 1 {
            return Err(Error::MethodRequiresUnivariate { method });
        }
        Ok(())
    }
}

fn marginals(s: &MomentSummary) -> Result<Vec<Marginal>> {
    (0..s.d()).map(|i| s.derived_moments(i).map(Marginal::from)).collect()
}

/// `E|X − X′| ≈ √2σ (1 − (γ₄ + 4)/16)`.
pub fn taylor_exx_1d(variance: f64, excess_kurtosis: f64) -> Expectation {
    if variance <= 0.0 {
        return Expectation::degenerate();
    }
    Expectation::clamped(SQRT_2 * variance.sqrt() * (1.0 - (excess_kurtosis + 4.0) / 16.0))
}

/// `E|X − Y| ≈ √ν (1 − (C4 + 4·C3·δ + 2ν² − 2δ⁴) / (8ν²))`.
pub fn taylor_exy_1d(inputs: &ApproxInputs) -> Result<Expectation> {
    inputs.require_univariate("taylor_exy_1d")?;
    let nu = inputs.nu_xy;
    if nu <= 0.0 {
        return Ok(Expectation::degenerate());
    }
    let d = inputs.delta1;
    let d4 = d * d * d * d;
    let correction = (inputs.c4_xy + 4.0 * inputs.c3_xy * d + 2.0 * nu * nu - 2.0 * d4) / (8.0 * nu * nu);
    Ok(Expectation::clamped(nu.sqrt() * (1.0 - correction)))
}

/// `d`-dimensional cross term from aggregated inputs:
/// `√ν (3/4 − (C4 + 4·C3·δ₁ − 2·δ₂²) / (8ν²))`.
pub fn taylor_exy(inputs: &ApproxInputs) -> Expectation {
    let nu = inputs.nu_xy;
    if nu <= 0.0 {
        return Expectation::degenerate();
    }
    let correction =
        (inputs.c4_xy + 4.0 * inputs.c3_xy * inputs.delta1 - 2.0 * inputs.delta2 * inputs.delta2) / (8.0 * nu * nu);
    Expectation::clamped(nu.sqrt() * (0.75 - correction))
}

/// `d`-dimensional within term `√ν (3/4 − C4/(8ν²))` with `ν = 2Σσ²` and
/// `C4 = 2Σσ⁴γ₄`.
pub fn taylor_exx(x: &[Marginal]) -> Expectation {
    let nu: f64 = 2.0 * x.iter().map(|m| m.variance).sum::<f64>();
    if nu <= 0.0 {
        return Expectation::degenerate();
    }
    let c4: f64 = 2.0 * x.iter().map(Marginal::c4).sum::<f64>();
    Expectation::clamped(nu.sqrt() * (0.75 - c4 / (8.0 * nu * nu)))
}

pub fn taylor_exx_dd(s: &MomentSummary) -> Result<Expectation> {
    Ok(taylor_exx(&marginals(s)?))
}

pub fn taylor_exy_dd(sx: &MomentSummary, sy: &MomentSummary) -> Result<Expectation> {
    Ok(taylor_exy(&ApproxInputs::from_summaries(sx, sy)?))
}

/// `E|X − X′| = 2σ/√π` for normal `X`.
pub fn gaussian_exact_exx(variance: f64) -> f64 {
    2.0 * variance.max(0.0).sqrt() / PI.sqrt()
}

/// `E|X − Y|` for independent normals: the mean of a folded normal with
/// location `δ = μx − μy` and scale `s = √(σx² + σy²)`,
///
/// `s·√(2/π)·exp(−Δ²) + δ·erf(Δ)`, `Δ = δ / (√2·s)`.
///
/// `erf(Δ) = 2Φ(√2·Δ) − 1`, so the second term is `δ(2Φ(δ/s) − 1)`.
/// With both variances zero the result is `|δ|`.
pub fn gaussian_exact_exy(mean_x: f64, var_x: f64, mean_y: f64, var_y: f64) -> Expectation {
    let delta = mean_x - mean_y;
    let var = var_x.max(0.0) + var_y.max(0.0);
    if var <= 0.0 {
        if delta == 0.0 {
            return Expectation::degenerate();
        }
        return Expectation::exact(delta.abs());
    }
    let s = var.sqrt();
    let big_delta = delta / (SQRT_2 * s);
    Expectation::exact(s * (2.0 / PI).sqrt() * (-big_delta * big_delta).exp() + delta * erf(big_delta))
}

/// `E|X − X′| ≈ (2/√π − √2·γ₄/16)·σ`.
pub fn adjusted_exx(variance: f64, excess_kurtosis: f64) -> Expectation {
    if variance <= 0.0 {
        return Expectation::degenerate();
    }
    Expectation::clamped((2.0 / PI.sqrt() - SQRT_2 * excess_kurtosis / 16.0) * variance.sqrt())
}

/// Gaussian closed form minus `(C4 + 4·C3·δ) / (8ν^{3/2})`.
pub fn adjusted_exy(inputs: &ApproxInputs) -> Result<Expectation> {
    inputs.require_univariate("adjusted")?;
    let (x, y) = (inputs.x[0], inputs.y[0]);
    let base = gaussian_exact_exy(x.mean, x.variance, y.mean, y.variance);
    let nu = inputs.nu_xy;
    if nu <= 0.0 {
        return Ok(base);
    }
    let correction = (inputs.c4_xy + 4.0 * inputs.c3_xy * inputs.delta1) / (8.0 * nu.powf(1.5));
    let mut out = Expectation::clamped(base.value - correction);
    out.flags.extend(&base.flags);
    Ok(out)
}

/// Third-order residual of the within-sample Taylor approximation,
/// `3(2κ₆ + 18σ⁶γ₄ + 34σ⁶ − 20σ⁶γ₃²) / (48(2σ²)^{5/2})`.
pub fn residual_r3(variance: f64, skewness: f64, excess_kurtosis: f64, kappa6: f64) -> Result<f64> {
    if variance <= 0.0 {
        return Err(Error::ResidualUndefined);
    }
    let s6 = variance * variance * variance;
    let numer = 2.0 * kappa6 + 18.0 * s6 * excess_kurtosis + 34.0 * s6 - 20.0 * s6 * skewness * skewness;
    Ok(3.0 * numer / (48.0 * (2.0 * variance).powf(2.5)))
}

/// `Var(|X − X′|) ≈ σ²γ₄/8`. Negative for platykurtic inputs; the raw value is
/// kept and `variance_caveat` is flagged.
pub fn variance_diagnostic(variance: f64, excess_kurtosis: f64) -> Expectation {
    let value = variance * excess_kurtosis / 8.0;
    let mut out = Expectation::exact(value);
    if value < 0.0 {
        out.flags.insert(Flag::VarianceCaveat);
    }
    out
}

/// Cross-term kernel of each summary-based method. Within terms are the same
/// kernel applied to one side twice, so identical summaries cancel exactly.
fn cross_term(inputs: &ApproxInputs, method: Method) -> Result<Expectation> {
    match method {
        Method::Taylor => Ok(taylor_exy(inputs)),
        Method::GaussianExact => {
            inputs.require_univariate("gaussian_exact")?;
            let (x, y) = (inputs.x[0], inputs.y[0]);
            Ok(gaussian_exact_exy(x.mean, x.variance, y.mean, y.variance))
        }
        Method::Adjusted => adjusted_exy(inputs),
        Method::Empirical => Err(Error::MethodUnavailable("empirical")),
    }
}

/// Energy distance and H from two summaries.
///
/// `gaussian_exact` and `adjusted` require `d = 1`. When both summaries carry
/// sixth-order moments and every dimension has positive variance, the
/// per-dimension third-order residuals are attached.
pub fn energy_from_summaries(sx: &MomentSummary, sy: &MomentSummary, method: Method) -> Result<DistanceEstimate> {
    let start = Instant::now();
    if sx.d() != sy.d() {
        return Err(Error::DimensionMismatch { left: sx.d(), right: sy.d() });
    }
    match method {
        Method::Empirical => return Err(Error::MethodUnavailable("empirical")),
        Method::GaussianExact | Method::Adjusted if sx.d() != 1 => {
            return Err(Error::MethodRequiresUnivariate { method: method.as_str() })
        }
        _ => {}
    }
    let mx = marginals(sx)?;
    let my = marginals(sy)?;
    let exy = cross_term(&ApproxInputs::new(mx.clone(), my.clone())?, method)?;
    let exx = cross_term(&ApproxInputs::new(mx.clone(), mx)?, method)?;
    let eyy = cross_term(&ApproxInputs::new(my.clone(), my)?, method)?;
    let mut flags = Flags::new();
    for e in [&exy, &exx, &eyy] {
        flags.extend(&e.flags);
    }
    let terms = Terms { exy: exy.value, exx: exx.value, eyy: eyy.value };
    let mut est = DistanceEstimate::assemble(method, terms, flags, start.elapsed())?;
    est.residual = residuals(sx).zip(residuals(sy)).map(|(x, y)| Residuals { x, y });
    Ok(est)
}

fn residuals(s: &MomentSummary) -> Option<Vec<f64>> {
    if s.order() != Order::Six {
        return None;
    }
    (0..s.d())
        .map(|i| {
            let m = s.derived_moments(i).ok()?;
            residual_r3(m.variance, m.skewness, m.excess_kurtosis, m.kappa6?).ok()
        })
        .collect()
}
