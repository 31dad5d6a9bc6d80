//! Permutation two-sample test of `H₀: P_X = P_Y` based on the energy statistic.
//!
//! The reported statistic is `nm/(n+m) · E_{n,m}`. The pooled rows are sorted
//! lexicographically before relabeling, so the result depends only on the two
//! samples as multisets and on the seed. Replicate `b` draws its relabeling
//! from ChaCha8 seeded with `seed` on stream `b + 1`; replicates can therefore
//! run in any order or in parallel.
//!
//! For one-dimensional data the pooled rows are sorted, so each replicate is
//! evaluated in linear time from prefix sums instead of a distance matrix.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetMatrix;
use crate::empirical::{energy_statistic, PooledDistances};
use crate::error::{Error, Result};

pub const MIN_PERMUTATIONS: usize = 99;

/// Pools up to this many rows use a precomputed distance matrix; larger pools
/// recompute distances for every replicate.
const MATRIX_LIMIT: usize = 4096;

/// Conventional levels reported in [`TestResult::reject_at`].
pub const ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `nm/(n+m) · E_{n,m}` of the observed split.
    pub statistic: f64,
    /// `(1 + #{replicates ≥ observed}) / (B + 1)`
    pub p_value: f64,
    pub permutations: usize,
    pub seed: u64,
    /// Keyed by the α level formatted as a string, e.g. `"0.05"`.
    pub reject_at: BTreeMap<String, bool>,
}

fn scale(n: usize, m: usize) -> f64 {
    (n * m) as f64 / (n + m) as f64
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Pooled rows in canonical (sorted) order.
fn canonical_pool(x: &DatasetMatrix, y: &DatasetMatrix) -> Result<DatasetMatrix> {
    let pooled = x.vstack(y)?;
    let mut rows: Vec<&[f64]> = pooled.iter_rows().collect();
    rows.sort_by(|a, b| lexicographic(a, b));
    DatasetMatrix::from_rows(&rows)
}

/// Sum over ordered pairs of `|a_i − a_j|` for ascending `a`.
fn sorted_pair_sum(a: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    let mut prefix = 0.0;
    for (k, v) in a.enumerate() {
        acc += v * k as f64 - prefix;
        prefix += v;
    }
    2.0 * acc
}

/// One-dimensional pool in ascending order with per-row distance totals.
struct SortedPool {
    values: Vec<f64>,
    row_totals: Vec<f64>,
    total: f64,
}

impl SortedPool {
    fn new(values: Vec<f64>) -> Self {
        let n = values.len();
        let sum: f64 = values.iter().sum();
        let mut below = 0.0;
        let row_totals: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let above = sum - below - v;
                let t = v * i as f64 - below + above - v * (n - i - 1) as f64;
                below += v;
                t
            })
            .collect();
        let total = sorted_pair_sum(values.iter().copied());
        Self { values, row_totals, total }
    }

    fn energy_for_split(&self, group_x: &[usize]) -> f64 {
        let nx = group_x.len();
        let ny = self.values.len() - nx;
        let sxx = sorted_pair_sum(group_x.iter().map(|&i| self.values[i]));
        let mut in_x = vec![false; self.values.len()];
        group_x.iter().for_each(|&i| in_x[i] = true);
        let syy = sorted_pair_sum(self.values.iter().zip(&in_x).filter(|(_, &x)| !x).map(|(&v, _)| v));
        let rx: f64 = group_x.iter().map(|&i| self.row_totals[i]).sum();
        let sxy = rx - sxx;
        debug_assert!((sxx + 2.0 * sxy + syy - self.total).abs() <= 1e-9 * self.total.max(1.0));
        let (nx, ny) = (nx as f64, ny as f64);
        2.0 * sxy / (nx * ny) - sxx / (nx * nx) - syy / (ny * ny)
    }
}

/// Relabeling of replicate `b`: indices of the `n` pooled rows forming group X.
fn relabel(seed: u64, b: usize, pool: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64 + 1);
    let mut idx = index::sample(&mut rng, pool, n).into_vec();
    idx.sort_unstable();
    idx
}

/// Permutation test with `permutations` replicates (at least 99).
pub fn permutation_test(x: &DatasetMatrix, y: &DatasetMatrix, permutations: usize, seed: u64) -> Result<TestResult> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch { left: x.cols(), right: y.cols() });
    }
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::InsufficientPermutations(permutations));
    }
    let (n, m) = (x.rows(), y.rows());
    let observed = energy_statistic(x, y)?.value;
    let pool = canonical_pool(x, y)?;
    let total = n + m;

    let replicates: Vec<f64> = if pool.cols() == 1 {
        let sorted = SortedPool::new(pool.values().to_vec());
        (0..permutations)
            .into_par_iter()
            .map(|b| sorted.energy_for_split(&relabel(seed, b, total, n)))
            .collect()
    } else if total <= MATRIX_LIMIT {
        let dist = PooledDistances::new(&pool);
        (0..permutations)
            .into_par_iter()
            .map(|b| dist.energy_for_split(&relabel(seed, b, total, n)))
            .collect()
    } else {
        (0..permutations)
            .into_par_iter()
            .map(|b| {
                let group = relabel(seed, b, total, n);
                let mut in_x = vec![false; total];
                group.iter().for_each(|&i| in_x[i] = true);
                let (gx, gy): (Vec<_>, Vec<_>) = (0..total).partition(|&i| in_x[i]);
                let pick = |idx: &[usize]| {
                    DatasetMatrix::from_rows(&idx.iter().map(|&i| pool.row(i)).collect::<Vec<_>>())
                        .expect("non-empty group")
                };
                energy_statistic(&pick(&gx), &pick(&gy)).expect("same dimension").value
            })
            .collect()
    };

    // the observed value and the replicates go through different summation
    // orders; treat values within rounding of the observed one as ties
    let tie = 1e-12 * observed.abs().max(f64::MIN_POSITIVE);
    let exceed = replicates.iter().filter(|&&r| r >= observed - tie).count();
    let p_value = (1 + exceed) as f64 / (permutations + 1) as f64;
    let reject_at = ALPHAS.iter().map(|&a| (format!("{a}"), p_value <= a)).collect();
    Ok(TestResult { statistic: scale(n, m) * observed, p_value, permutations, seed, reject_at })
}
