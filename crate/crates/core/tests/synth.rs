use edist::moments::{summarize, Order};
use edist::synth::{reference_families, sample, DistributionSpec, ExpParam, BLOCK_ROWS};
use edist::Error;

/// Allowed |sample − theory| at n = 10⁶ for (mean, variance, skewness, excess
/// kurtosis), relative to the standard deviation for the first two.
fn tolerance(spec: &DistributionSpec) -> [f64; 4] {
    match spec {
        DistributionSpec::Normal { .. } => [0.005, 0.005, 0.01, 0.03],
        DistributionSpec::Exponential { .. } | DistributionSpec::Gamma { .. } => [0.005, 0.02, 0.05, 1.0],
        // finite moments only below order 5: sample kurtosis converges slowly
        DistributionSpec::StudentT { .. } => [0.005, 0.05, 0.3, 4.0],
        DistributionSpec::Beta { .. } => [0.005, 0.005, 0.01, 0.02],
        DistributionSpec::Bernoulli { .. } => [0.005, 0.005, 0.05, 0.5],
    }
}

#[test]
fn families_match_closed_forms_at_one_million() {
    for (i, spec) in reference_families().into_iter().enumerate() {
        let data = sample(&spec, 1_000_000, 1, 1000 + i as u64).unwrap();
        let got = summarize(&data, Order::Four).derived_moments(0).unwrap();
        let want = spec.theoretical_moments().unwrap();
        let tol = tolerance(&spec);
        let sd = want.variance.sqrt();
        assert!((got.mean - want.mean).abs() <= tol[0] * sd, "{spec}: mean {} vs {}", got.mean, want.mean);
        assert!(
            (got.variance.sqrt() / sd - 1.0).abs() <= tol[1],
            "{spec}: variance {} vs {}",
            got.variance,
            want.variance
        );
        assert!((got.skewness - want.skewness).abs() <= tol[2], "{spec}: skewness {} vs {}", got.skewness, want.skewness);
        assert!(
            (got.excess_kurtosis - want.excess_kurtosis).abs() <= tol[3],
            "{spec}: kurtosis {} vs {}",
            got.excess_kurtosis,
            want.excess_kurtosis
        );
    }
}

#[test]
fn same_seed_same_bits() {
    for spec in reference_families() {
        let a = sample(&spec, 5000, 3, 9).unwrap();
        let b = sample(&spec, 5000, 3, 9).unwrap();
        assert_eq!(a.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_ne!(a, sample(&spec, 5000, 3, 10).unwrap());
    }
}

#[test]
fn blocks_do_not_depend_on_total_length() {
    let spec = DistributionSpec::normal(0.0, 1.0);
    let long = sample(&spec, 3 * BLOCK_ROWS + 17, 2, 4).unwrap();
    let short = sample(&spec, BLOCK_ROWS + 1, 2, 4).unwrap();
    assert_eq!(long.slice_rows(0..BLOCK_ROWS + 1).unwrap(), short);
}

#[test]
fn scale_parameterization_switch() {
    let rate = DistributionSpec::exponential(10.0);
    let scale = DistributionSpec::Exponential { beta: 0.1, param: ExpParam::Scale };
    assert_eq!(rate.theoretical_moments().unwrap(), scale.theoretical_moments().unwrap());
    let a = sample(&rate, 100, 1, 1).unwrap();
    let b = sample(&scale, 100, 1, 1).unwrap();
    for (p, q) in a.values().iter().zip(b.values()) {
        assert!((p - q).abs() <= 1e-15 * p.abs().max(1.0));
    }
}

#[test]
fn low_df_t_has_no_kurtosis() {
    assert!(matches!(DistributionSpec::student_t(4.0).theoretical_moments(), Err(Error::KurtosisUndefined)));
    assert!(sample(&DistributionSpec::student_t(3.0), 10, 1, 0).is_ok());
}

#[test]
fn invalid_specs_fail_before_sampling() {
    for spec in [
        DistributionSpec::normal(0.0, -1.0),
        DistributionSpec::exponential(0.0),
        DistributionSpec::beta(0.0, 1.0),
        DistributionSpec::gamma(1.0, f64::NAN),
        DistributionSpec::bernoulli(1.5),
    ] {
        assert!(matches!(sample(&spec, 10, 1, 0), Err(Error::InvalidParameters(_))), "{spec}");
    }
    assert!(sample(&DistributionSpec::normal(0.0, 1.0), 0, 1, 0).is_err());
}
