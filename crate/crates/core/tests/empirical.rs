use edist::empirical::{energy_coefficient, energy_statistic, mean_pairwise_distance, quadratic_distance, PooledDistances};
use edist::synth::{sample, DistributionSpec};
use edist::{DatasetMatrix, Method};
use proptest::prelude::*;

fn matrix(n: usize, d: usize) -> impl Strategy<Value = DatasetMatrix> {
    prop::collection::vec(-100.0f64..100.0, n * d).prop_map(move |v| DatasetMatrix::new(n, d, v).unwrap())
}

fn pair() -> impl Strategy<Value = (DatasetMatrix, DatasetMatrix)> {
    (1usize..40, 1usize..40, 1usize..5).prop_flat_map(|(n, m, d)| (matrix(n, d), matrix(m, d)))
}

/// Rotation by `theta` in the (0, 1) plane followed by one in the (1, 2) plane.
fn rotate(x: &DatasetMatrix, theta: f64, phi: f64) -> DatasetMatrix {
    let rows: Vec<Vec<f64>> = x
        .iter_rows()
        .map(|r| {
            let mut r = r.to_vec();
            if r.len() >= 2 {
                let (c, s) = (theta.cos(), theta.sin());
                (r[0], r[1]) = (c * r[0] - s * r[1], s * r[0] + c * r[1]);
            }
            if r.len() >= 3 {
                let (c, s) = (phi.cos(), phi.sin());
                (r[1], r[2]) = (c * r[1] - s * r[2], s * r[1] + c * r[2]);
            }
            r
        })
        .collect();
    DatasetMatrix::from_rows(&rows).unwrap()
}

fn brute_quadratic(x: &DatasetMatrix, y: &DatasetMatrix) -> f64 {
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let avg = |a: &DatasetMatrix, b: &DatasetMatrix| {
        let mut s = 0.0;
        for r in a.iter_rows() {
            for t in b.iter_rows() {
                s += sq(r, t);
            }
        }
        s / (a.rows() * b.rows()) as f64
    };
    2.0 * avg(x, y) - avg(x, x) - avg(y, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn symmetric_bit_for_bit((x, y) in pair()) {
        let a = energy_statistic(&x, &y).unwrap();
        let b = energy_statistic(&y, &x).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.h.to_bits(), b.h.to_bits());
    }

    #[test]
    fn nonnegative((x, y) in pair()) {
        prop_assert!(energy_statistic(&x, &y).unwrap().value >= -1e-9);
    }

    #[test]
    fn translation_and_rotation_invariant((x, y) in pair(), shift in -1e3f64..1e3, theta in 0.0f64..6.3, phi in 0.0f64..6.3) {
        let base = energy_statistic(&x, &y).unwrap();
        let move_ = |m: &DatasetMatrix| rotate(&m.map(|v| v + shift), theta, phi);
        let moved = energy_statistic(&move_(&x), &move_(&y)).unwrap();
        let scale = base.terms.exy.max(base.terms.exx).max(base.terms.eyy).max(1e-300);
        prop_assert!((base.value - moved.value).abs() <= 1e-9 * scale, "{} vs {}", base.value, moved.value);
    }

    #[test]
    fn scaling_scales_energy_and_keeps_h((x, y) in pair(), c in 0.001f64..1e3) {
        let base = energy_statistic(&x, &y).unwrap();
        let scaled = energy_statistic(&x.map(|v| v * c), &y.map(|v| v * c)).unwrap();
        let scale = base.terms.exy.max(1e-300);
        prop_assert!((c * base.value - scaled.value).abs() <= 1e-9 * c * scale);
        prop_assert!((c * base.terms.exy - scaled.terms.exy).abs() <= 1e-9 * c * scale);
        prop_assert!((base.h - scaled.h).abs() <= 1e-9);
    }

    #[test]
    fn quadratic_matches_brute_force((x, y) in pair()) {
        let fast = quadratic_distance(&x, &y).unwrap();
        let slow = brute_quadratic(&x, &y);
        let scale = 2.0 * 100.0 * 100.0 * x.cols() as f64;
        prop_assert!((fast - slow).abs() <= 1e-9 * scale, "{} vs {}", fast, slow);
    }

    #[test]
    fn pooled_split_matches_direct((x, y) in pair()) {
        let pooled = x.vstack(&y).unwrap();
        let dist = PooledDistances::new(&pooled);
        let group: Vec<usize> = (0..x.rows()).collect();
        let direct = energy_statistic(&x, &y).unwrap().value;
        let fast = dist.energy_for_split(&group);
        let scale = mean_pairwise_distance(&x, &y).unwrap().max(1e-300);
        prop_assert!((fast - direct).abs() <= 1e-9 * scale, "{} vs {}", fast, direct);
    }
}

#[test]
fn far_shifted_normals() {
    let x = sample(&DistributionSpec::normal(0.0, 1.0), 2000, 1, 10).unwrap();
    let y = sample(&DistributionSpec::normal(10.0, 1.0), 2000, 1, 11).unwrap();
    let e = energy_statistic(&x, &y).unwrap();
    assert!((e.h - 0.887).abs() < 0.01, "{}", e.h);
    let g = energy_coefficient(&x, &y, Method::GaussianExact).unwrap();
    assert!((g.h - e.h).abs() < 0.01, "{} vs {}", g.h, e.h);
}

#[test]
fn quadratic_form_cannot_see_shape() {
    // ±1 coin against N(0,1): same mean and variance, very different shape
    let coin = sample(&DistributionSpec::bernoulli(0.5), 10_000, 1, 3).unwrap().map(|v| 2.0 * v - 1.0);
    let normal = sample(&DistributionSpec::normal(0.0, 1.0), 10_000, 1, 4).unwrap();
    let q = quadratic_distance(&coin, &normal).unwrap();
    let h = energy_statistic(&coin, &normal).unwrap().h;
    assert!(q.abs() < 0.05, "{q}");
    assert!(h > 0.005, "{h}");
}

#[test]
fn population_quadratic_distance_of_unit_shift() {
    let x = sample(&DistributionSpec::normal(0.0, 1.0), 20_000, 1, 1).unwrap();
    let y = sample(&DistributionSpec::normal(1.0, 1.0), 20_000, 1, 2).unwrap();
    assert!((quadratic_distance(&x, &y).unwrap() - 2.0).abs() < 0.1);
}

#[test]
fn csv_round_trip_feeds_the_same_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let x = sample(&DistributionSpec::gamma(2.0, 1.0), 300, 2, 1).unwrap();
    let y = sample(&DistributionSpec::normal(2.0, 1.5), 200, 2, 2).unwrap();
    x.save_csv(dir.path().join("x.csv")).unwrap();
    y.save_csv(dir.path().join("y.csv")).unwrap();
    let xr = DatasetMatrix::load_csv(dir.path().join("x.csv")).unwrap();
    let yr = DatasetMatrix::load_csv(dir.path().join("y.csv")).unwrap();
    assert_eq!(energy_statistic(&x, &y).unwrap().value, energy_statistic(&xr, &yr).unwrap().value);
}
