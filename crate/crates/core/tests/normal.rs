use mcsentinel::normal::{quantile, two_sided_critical, two_sided_p_value};
use mcsentinel::{interval_width, min_ess_bound};
use statrs::distribution::{ContinuousCDF, Normal};

/// Inverts the statrs CDF by bisection.
fn bisect_quantile(p: f64) -> f64 {
    let d = Normal::new(0.0, 1.0).unwrap();
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn quantile_matches_bisection_oracle() {
    for &p in &[
        1e-8, 1e-4, 0.01, 0.025, 0.16, 0.3, 0.5, 0.7, 0.84, 0.975, 0.999,
    ] {
        let q = quantile(p).unwrap();
        let o = bisect_quantile(p);
        assert!((q - o).abs() < 1e-8 * o.abs().max(1.0), "p={p}: {q} vs {o}");
    }
}

#[test]
fn pinned_critical_value() {
    let z = two_sided_critical(0.05).unwrap();
    assert_eq!(format!("{z:.6}"), "1.959964");
}

#[test]
fn width_at_delta_032_matches_oracle() {
    let z = bisect_quantile(1.0 - 0.16);
    assert!((z - 0.9945).abs() < 1e-4);
    let w = interval_width(1.0, 100, 0.32).unwrap();
    assert!((w - 2.0 * z / 10.0).abs() < 1e-8, "{w}");
    assert!((w - 0.1989).abs() < 1e-4);
}

#[test]
fn p_value_round_trips_quantile() {
    for &p in &[0.01, 0.05, 0.2, 0.5, 0.9] {
        let z = two_sided_critical(p).unwrap();
        assert!((two_sided_p_value(z) - p).abs() < 1e-9);
    }
}

#[test]
fn bound_scales_with_inverse_square_of_epsilon() {
    let a = min_ess_bound(0.1, 0.05).unwrap();
    let b = min_ess_bound(0.05, 0.05).unwrap();
    assert!((b / a - 4.0).abs() < 1e-12);
    let z = bisect_quantile(0.975);
    assert!((b - 4.0 * z * z / 0.0025).abs() < 1e-6);
}
