//! Exact pairwise statistics.
//!
//! Everything here is quadratic in the sample size and serves as the
//! reference for the moment-based estimates in [`crate::approx`]. Within-sample
//! averages use the V-statistic normalization `1/n²` over all ordered pairs,
//! zero diagonal included.
//!
//! Summation is deterministic: each row's distances are summed in fixed-size
//! blocks, and the per-row totals are reduced with pairwise summation. The
//! result is bit-identical for any thread count.

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;

use crate::approx;
use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use crate::estimate::{DistanceEstimate, Flags, Method, Terms};
use crate::moments::{self, Order};

const BLOCK: usize = 256;

#[inline]
fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Pairwise (cascade) summation; the tree depends only on the slice length.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Σ_j ‖a − y_j‖, blocked over `y`.
fn row_total(a: &[f64], y: &DatasetMatrix) -> f64 {
    let d = y.cols();
    let blocks: Vec<f64> = y
        .values()
        .chunks(BLOCK * d)
        .map(|chunk| {
            if d == 1 {
                let a0 = a[0];
                chunk.iter().map(|&v| (a0 - v).abs()).sum()
            } else {
                chunk.chunks_exact(d).map(|row| euclidean(a, row)).sum()
            }
        })
        .collect();
    pairwise_sum(&blocks)
}

/// Σ_i Σ_j ‖x_i − y_j‖ over all ordered pairs.
fn total_distance(x: &DatasetMatrix, y: &DatasetMatrix) -> f64 {
    let rows: Vec<f64> = (0..x.rows()).into_par_iter().map(|i| row_total(x.row(i), y)).collect();
    pairwise_sum(&rows)
}

fn check_dims(x: &DatasetMatrix, y: &DatasetMatrix) -> Result<()> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch { left: x.cols(), right: y.cols() });
    }
    Ok(())
}

/// Lexicographic order on (rows, values); used to fix the orientation of
/// cross sums so swapping the arguments yields identical bits.
fn canonical_cmp(x: &DatasetMatrix, y: &DatasetMatrix) -> Ordering {
    x.rows().cmp(&y.rows()).then_with(|| {
        x.values()
            .iter()
            .zip(y.values())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// `(1/nm) Σ_i Σ_j ‖x_i − y_j‖`.
pub fn mean_pairwise_distance(x: &DatasetMatrix, y: &DatasetMatrix) -> Result<f64> {
    check_dims(x, y)?;
    let (a, b) = match canonical_cmp(x, y) {
        Ordering::Greater => (y, x),
        _ => (x, y),
    };
    Ok(total_distance(a, b) / (x.rows() as f64 * y.rows() as f64))
}

/// The energy statistic `2·E_xy − E_xx − E_yy` with V-statistic within terms.
pub fn energy_statistic(x: &DatasetMatrix, y: &DatasetMatrix) -> Result<DistanceEstimate> {
    check_dims(x, y)?;
    let start = Instant::now();
    let exy = mean_pairwise_distance(x, y)?;
    let exx = mean_pairwise_distance(x, x)?;
    let eyy = mean_pairwise_distance(y, y)?;
    let terms = Terms { exy, exx, eyy };
    DistanceEstimate::assemble(Method::Empirical, terms, Flags::new(), start.elapsed())
}

/// Energy coefficient H of two datasets using `method`.
///
/// Summary-based methods summarize both inputs at order 4 first; the reported
/// elapsed time covers summarizing as well.
pub fn energy_coefficient(x: &DatasetMatrix, y: &DatasetMatrix, method: Method) -> Result<DistanceEstimate> {
    check_dims(x, y)?;
    match method {
        Method::Empirical => energy_statistic(x, y),
        _ => {
            let start = Instant::now();
            let sx = moments::summarize(x, Order::Four);
            let sy = moments::summarize(y, Order::Four);
            let mut est = approx::energy_from_summaries(&sx, &sy, method)?;
            est.elapsed_ns = (start.elapsed().as_nanos() as u64).max(1);
            Ok(est)
        }
    }
}

/// Plug-in `2E‖X−Y‖² − E‖X−X′‖² − E‖Y−Y′‖²`.
///
/// The double sums of squared distances reduce exactly to per-dimension means
/// and population variances, so this runs in `O((n + m)·d)`.
pub fn quadratic_distance(x: &DatasetMatrix, y: &DatasetMatrix) -> Result<f64> {
    check_dims(x, y)?;
    let mean_var = |m: &DatasetMatrix, j: usize| {
        let n = m.rows() as f64;
        let mu = m.column(j).sum::<f64>() / n;
        let var = m.column(j).map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        (mu, var)
    };
    let (mut exy2, mut exx2, mut eyy2) = (0.0, 0.0, 0.0);
    for j in 0..x.cols() {
        let (mx, vx) = mean_var(x, j);
        let (my, vy) = mean_var(y, j);
        exy2 += vx + vy + (mx - my) * (mx - my);
        exx2 += 2.0 * vx;
        eyy2 += 2.0 * vy;
    }
    Ok(2.0 * exy2 - (exx2 + eyy2))
}

/// Distances among a pooled sample, for recomputing the energy statistic
/// under many relabelings.
///
/// With `T` the total over all ordered pairs, `R_X` the sum of row totals of
/// group X and `S_XX` the within-X total, the other sums follow as
/// `S_XY = R_X − S_XX` and `S_YY = T − 2R_X + S_XX`.
pub struct PooledDistances {
    n: usize,
    matrix: Vec<f64>,
    row_totals: Vec<f64>,
    total: f64,
}

impl PooledDistances {
    pub fn new(pooled: &DatasetMatrix) -> Self {
        let n = pooled.rows();
        let matrix: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let a = pooled.row(i);
                pooled.iter_rows().map(move |b| euclidean(a, b))
            })
            .collect();
        let row_totals: Vec<f64> = matrix.chunks_exact(n).map(pairwise_sum).collect();
        let total = pairwise_sum(&row_totals);
        Self { n, matrix, row_totals, total }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    /// Energy statistic with rows `group_x` as X and the rest as Y.
    /// `group_x` must be non-empty, strictly smaller than the pool, and free of
    /// duplicates.
    pub fn energy_for_split(&self, group_x: &[usize]) -> f64 {
        let nx = group_x.len();
        let ny = self.n - nx;
        debug_assert!(nx >= 1 && ny >= 1);
        let mut sxx = 0.0;
        let mut rx = 0.0;
        for &i in group_x {
            let row = &self.matrix[i * self.n..(i + 1) * self.n];
            sxx += group_x.iter().map(|&j| row[j]).sum::<f64>();
            rx += self.row_totals[i];
        }
        let sxy = rx - sxx;
        let syy = self.total - 2.0 * rx + sxx;
        let (nx, ny) = (nx as f64, ny as f64);
        2.0 * sxy / (nx * ny) - sxx / (nx * nx) - syy / (ny * ny)
    }
}
