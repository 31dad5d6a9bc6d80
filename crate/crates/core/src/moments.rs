//! Per-dimension central-moment summaries.
//!
//! A [`MomentSummary`] holds, for each feature, the mean and the central
//! moment sums `S_k = Σ (x − μ)^k` for `k = 2..=4` (or `..=6`). Summaries are
//! built in one pass and combine with the pairwise update
//!
//! ```text
//! M_p = A_p + B_p
//!     + Σ_{k=1}^{p-2} C(p,k) δ^k [ (−n_b/n)^k A_{p−k} + (n_a/n)^k B_{p−k} ]
//!     + (n_a n_b δ / n)^p [ 1/n_b^{p−1} − (−1/n_a)^{p−1} ]
//! ```
//!
//! with `δ = μ_b − μ_a`. Adding one sample is the special case `n_b = 1`, so
//! merging two summaries gives the same sums as summarizing the concatenated
//! data.
//!
//! All derived quantities use population (`1/n`) normalization; no bias
//! correction is applied to variance, skewness or kurtosis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};

/// Highest central moment tracked by a summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Order {
    #[default]
    Four,
    Six,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::Four => 4,
            Order::Six => 6,
        }
    }

    pub fn from_u8(order: u8) -> Result<Self> {
        match order {
            4 => Ok(Order::Four),
            6 => Ok(Order::Six),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    /// Number of central sums stored (`S2..=S_order`).
    fn sums(self) -> usize {
        self.as_u8() as usize - 1
    }
}

/// Mean and central sums `S2..=S6` of one feature. Unused orders stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct DimSums {
    mean: f64,
    s: [f64; 5],
}

const BINOM: [[f64; 7]; 7] = [
    [1., 0., 0., 0., 0., 0., 0.],
    [1., 1., 0., 0., 0., 0., 0.],
    [1., 2., 1., 0., 0., 0., 0.],
    [1., 3., 3., 1., 0., 0., 0.],
    [1., 4., 6., 4., 1., 0., 0.],
    [1., 5., 10., 10., 5., 1., 0.],
    [1., 6., 15., 20., 15., 6., 1.],
];

impl DimSums {
    /// Central sum of order `p`; order 0 and 1 are `n` and `0` respectively
    /// but never needed by the update.
    #[inline]
    fn get(&self, p: usize) -> f64 {
        if p < 2 {
            0.0
        } else {
            self.s[p - 2]
        }
    }

    fn combine(na: f64, a: &DimSums, nb: f64, b: &DimSums, max_order: usize) -> DimSums {
        let n = na + nb;
        let delta = b.mean - a.mean;
        let mut out = DimSums { mean: a.mean + delta * (nb / n), s: [0.0; 5] };
        let wa = -nb / n;
        let wb = na / n;
        let cross = na * nb * delta / n;
        for p in 2..=max_order {
            let mut m = a.get(p) + b.get(p);
            let (mut da, mut db, mut dk) = (1.0, 1.0, 1.0);
            for k in 1..=p.saturating_sub(2) {
                da *= wa;
                db *= wb;
                dk *= delta;
                m += BINOM[p][k] * dk * (da * a.get(p - k) + db * b.get(p - k));
            }
            let tail = (1.0 / nb).powi(p as i32 - 1) - (-1.0 / na).powi(p as i32 - 1);
            m += cross.powi(p as i32) * tail;
            out.s[p - 2] = m;
        }
        // even central sums cannot be negative; rounding may push them below zero
        for p in [2usize, 4, 6] {
            if p <= max_order && out.s[p - 2] < 0.0 {
                out.s[p - 2] = 0.0;
            }
        }
        out
    }

    /// Adds one observation. Same recurrence as `combine` with `n_b = 1`.
    #[inline]
    fn push(&mut self, n_before: f64, x: f64, max_order: usize) {
        if n_before == 0.0 {
            *self = DimSums { mean: x, s: [0.0; 5] };
            return;
        }
        let single = DimSums { mean: x, s: [0.0; 5] };
        *self = DimSums::combine(n_before, self, 1.0, &single, max_order);
    }
}

/// Streaming accumulator behind [`summarize`]; reads each row once.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    n: u64,
    order: Order,
    dims: Vec<DimSums>,
}

impl MomentAccumulator {
    pub fn new(d: usize, order: Order) -> Self {
        Self { n: 0, order, dims: vec![DimSums::default(); d] }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dims.len() {
            return Err(Error::DimensionMismatch { left: self.dims.len(), right: row.len() });
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: self.n as usize, col });
        }
        let n_before = self.n as f64;
        let max_order = self.order.as_u8() as usize;
        for (acc, &x) in self.dims.iter_mut().zip(row) {
            acc.push(n_before, x, max_order);
        }
        self.n += 1;
        Ok(())
    }

    pub fn finish(self) -> MomentSummary {
        MomentSummary { n: self.n, order: self.order, dims: self.dims }
    }
}

/// Per-dimension sample count, mean and central moment sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SummaryWire", into = "SummaryWire")]
pub struct MomentSummary {
    n: u64,
    order: Order,
    dims: Vec<DimSums>,
}

/// Moments of one feature, derived from a summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedMoments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Sixth cumulant, present for order-6 summaries.
    pub kappa6: Option<f64>,
    /// Zero variance: skewness and kurtosis are reported as 0.
    pub degenerate: bool,
}

/// Summarizes `data` in a single pass over its rows.
pub fn summarize(data: &DatasetMatrix, order: Order) -> MomentSummary {
    let mut acc = MomentAccumulator::new(data.cols(), order);
    for row in data.iter_rows() {
        // DatasetMatrix guarantees matching width and finite values
        acc.push_row(row).expect("validated dataset");
    }
    acc.finish()
}

/// Summarizes any row stream; each row is pulled exactly once.
pub fn summarize_rows<'a, I>(d: usize, order: Order, rows: I) -> Result<MomentSummary>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = MomentAccumulator::new(d, order);
    for row in rows {
        acc.push_row(row)?;
    }
    if acc.n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(acc.finish())
}

/// Parallel variant: fixed-size row chunks are summarized independently and
/// merged left to right, so the result does not depend on the thread count.
pub fn summarize_par(data: &DatasetMatrix, order: Order, chunk_rows: usize) -> MomentSummary {
    let chunk = chunk_rows.max(1) * data.cols();
    let parts: Vec<MomentSummary> = data
        .values()
        .par_chunks(chunk)
        .map(|block| {
            let mut acc = MomentAccumulator::new(data.cols(), order);
            for row in block.chunks_exact(data.cols()) {
                acc.push_row(row).expect("validated dataset");
            }
            acc.finish()
        })
        .collect();
    parts
        .into_iter()
        .reduce(|a, b| merge(&a, &b).expect("compatible chunks"))
        .expect("non-empty dataset")
}

/// Combines two summaries of disjoint samples.
pub fn merge(a: &MomentSummary, b: &MomentSummary) -> Result<MomentSummary> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch { left: a.d(), right: b.d() });
    }
    if a.order != b.order {
        return Err(Error::OrderMismatch { left: a.order.as_u8(), right: b.order.as_u8() });
    }
    if b.n == 0 {
        return Ok(a.clone());
    }
    if a.n == 0 {
        return Ok(b.clone());
    }
    let (na, nb) = (a.n as f64, b.n as f64);
    let max_order = a.order.as_u8() as usize;
    let dims = a
        .dims
        .iter()
        .zip(&b.dims)
        .map(|(da, db)| DimSums::combine(na, da, nb, db, max_order))
        .collect();
    Ok(MomentSummary { n: a.n + b.n, order: a.order, dims })
}

impl MomentSummary {
    /// A summary of zero samples; the identity for [`merge`].
    pub fn empty(d: usize, order: Order) -> Self {
        MomentAccumulator::new(d, order).finish()
    }

    /// Builds a summary from per-dimension means and central moments
    /// `m_k = S_k / n`, given as `[m2, m3, m4]` or `[m2, .., m6]`.
    pub fn from_central_moments(n: u64, means: &[f64], central: &[Vec<f64>]) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::EmptyInput);
        }
        if central.len() != means.len() {
            return Err(Error::DimensionMismatch { left: means.len(), right: central.len() });
        }
        let order = Order::from_u8(central[0].len() as u8 + 1)?;
        let nf = n as f64;
        let mut wire = SummaryWire {
            n,
            d: means.len(),
            order: order.as_u8(),
            mean: means.to_vec(),
            s2: vec![],
            s3: vec![],
            s4: vec![],
            s5: None,
            s6: None,
        };
        let col = |k: usize| -> Result<Vec<f64>> {
            central
                .iter()
                .map(|m| {
                    if m.len() != order.sums() {
                        return Err(Error::InvalidSummary("ragged central moments".into()));
                    }
                    Ok(if n <= 1 { 0.0 } else { nf * m[k] })
                })
                .collect()
        };
        wire.s2 = col(0)?;
        wire.s3 = col(1)?;
        wire.s4 = col(2)?;
        if order == Order::Six {
            wire.s5 = Some(col(3)?);
            wire.s6 = Some(col(4)?);
        }
        Self::try_from(wire)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.dims[i].mean
    }

    /// Central sum `S_k = Σ (x − μ)^k` for `k ∈ 2..=order`.
    pub fn central_sum(&self, i: usize, k: usize) -> f64 {
        assert!((2..=self.order.as_u8() as usize).contains(&k), "order {k} not tracked");
        self.dims[i].s[k - 2]
    }

    /// Population central moment `m_k = S_k / n`; zero for an empty summary.
    pub fn central_moment(&self, i: usize, k: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.central_sum(i, k) / self.n as f64
    }

    pub fn derived_moments(&self, i: usize) -> Result<DerivedMoments> {
        if self.n < 2 {
            return Err(Error::InsufficientSamples);
        }
        let m2 = self.central_moment(i, 2);
        let m3 = self.central_moment(i, 3);
        let m4 = self.central_moment(i, 4);
        let kappa6 = match self.order {
            Order::Six => {
                let m6 = self.central_moment(i, 6);
                Some(m6 - 15.0 * m4 * m2 - 10.0 * m3 * m3 + 30.0 * m2 * m2 * m2)
            }
            Order::Four => None,
        };
        if m2 <= 0.0 {
            return Ok(DerivedMoments {
                mean: self.mean(i),
                variance: 0.0,
                skewness: 0.0,
                excess_kurtosis: 0.0,
                kappa6: kappa6.map(|_| 0.0),
                degenerate: true,
            });
        }
        Ok(DerivedMoments {
            mean: self.mean(i),
            variance: m2,
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
            kappa6,
            degenerate: false,
        })
    }

    /// Shifts every mean by `offset[i]`; central sums are unchanged.
    pub fn translated(&self, offset: &[f64]) -> Self {
        let mut out = self.clone();
        for (dim, c) in out.dims.iter_mut().zip(offset) {
            dim.mean += c;
        }
        out
    }

    /// The summary of the data multiplied by `c`: means scale by `c`, `S_k` by `c^k`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for dim in &mut out.dims {
            dim.mean *= c;
            for (j, s) in dim.s.iter_mut().enumerate() {
                *s *= c.powi(j as i32 + 2);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// JSON form: `{"n","d","order","mean","s2","s3","s4","s5"?,"s6"?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryWire {
    n: u64,
    d: usize,
    order: u8,
    mean: Vec<f64>,
    s2: Vec<f64>,
    s3: Vec<f64>,
    s4: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s5: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s6: Option<Vec<f64>>,
}

impl From<MomentSummary> for SummaryWire {
    fn from(s: MomentSummary) -> Self {
        let col = |k: usize| s.dims.iter().map(|d| d.s[k - 2]).collect::<Vec<_>>();
        let six = s.order == Order::Six;
        SummaryWire {
            n: s.n,
            d: s.dims.len(),
            order: s.order.as_u8(),
            mean: s.dims.iter().map(|d| d.mean).collect(),
            s2: col(2),
            s3: col(3),
            s4: col(4),
            s5: six.then(|| col(5)),
            s6: six.then(|| col(6)),
        }
    }
}

impl TryFrom<SummaryWire> for MomentSummary {
    type Error = Error;

    fn try_from(w: SummaryWire) -> Result<Self> {
        let bad = |msg: String| Error::InvalidSummary(msg);
        if w.d == 0 {
            return Err(bad("d must be at least 1".into()));
        }
        let order = Order::from_u8(w.order)?;
        let mut columns = vec![&w.mean, &w.s2, &w.s3, &w.s4];
        match (order, &w.s5, &w.s6) {
            (Order::Four, None, None) => {}
            (Order::Six, Some(s5), Some(s6)) => {
                columns.push(s5);
                columns.push(s6);
            }
            _ => return Err(bad("s5/s6 must be present exactly when order is 6".into())),
        }
        for (k, c) in columns.iter().enumerate() {
            if c.len() != w.d {
                return Err(bad(format!("array {} has length {}, expected {}", k, c.len(), w.d)));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite value".into()));
            }
        }
        let dims: Vec<DimSums> = (0..w.d)
            .map(|i| {
                let mut s = [0.0; 5];
                for k in 0..columns.len() - 1 {
                    s[k] = columns[k + 1][i];
                }
                DimSums { mean: w.mean[i], s }
            })
            .collect();
        for dim in &dims {
            if dim.s[0] < 0.0 || dim.s[2] < 0.0 || dim.s[4] < 0.0 {
                return Err(bad("even central sums must be nonnegative".into()));
            }
            if w.n <= 1 && dim.s.iter().any(|&v| v != 0.0) {
                return Err(bad("central sums must be zero for n <= 1".into()));
            }
        }
        Ok(MomentSummary { n: w.n, order, dims })
    }
}
