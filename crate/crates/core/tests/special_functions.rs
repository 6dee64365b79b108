mod common;

use common::{j0_oracle, marcum_oracle};
use num_complex::Complex64;
use proptest::prelude::*;

use ris_hst::channel::ScenarioParams;
use ris_hst::metrics::{outage_analytic, CompositeMoments, OutageConvention};
use ris_hst::numerics::{bessel_j0, gaussian_q, jakes_sequence, marcum_q1, sample_cn, JakesProcess, RngStream};

#[test]
fn oracles_agree_with_pinned_values() {
    assert!((j0_oracle(2.404_825_557_695_773).abs()) < 1e-14);
    assert!((marcum_oracle(1.0, 2.0) - 0.269_012_060_035_909_996_68).abs() < 1e-12);
    assert!((marcum_oracle(5.0, 7.0) - 0.027_714_786_295_963_427_797).abs() < 1e-12);
}

#[test]
fn marcum_matches_quadrature_on_grid() {
    let mut worst = 0.0f64;
    for i in 0..20 {
        for j in 0..20 {
            let a = 0.5 * i as f64;
            let b = 0.25 + 0.5 * j as f64;
            let got = marcum_q1(a, b).unwrap();
            let want = marcum_oracle(a, b);
            let err = (got - want).abs();
            assert!(err < 1e-8, "Q1({a}, {b}) = {got}, oracle {want}");
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-8);
}

#[test]
fn marcum_boundary_identities() {
    for &a in &[0.0, 0.3, 2.0, 9.0, 25.0] {
        assert_eq!(marcum_q1(a, 0.0).unwrap(), 1.0);
    }
    for &b in &[0.1, 1.0, 3.0, 6.0] {
        assert!((marcum_q1(0.0, b).unwrap() - (-0.5 * b * b).exp()).abs() < 1e-14);
    }
    assert!(marcum_q1(-1.0, 1.0).is_err());
    assert!(marcum_q1(1.0, f64::NAN).is_err());
}

#[test]
fn gaussian_q_identities() {
    assert_eq!(gaussian_q(0.0).unwrap(), 0.5);
    for i in 0..=80 {
        let x = -8.0 + 0.2 * i as f64;
        let q = gaussian_q(x).unwrap();
        let qm = gaussian_q(-x).unwrap();
        assert!((q + qm - 1.0).abs() < 1e-12, "Q({x}) + Q({}) = {}", -x, q + qm);
        assert!((0.0..=1.0).contains(&q));
    }
    assert!((gaussian_q(1.281_551_565_544_600_5).unwrap() - 0.1).abs() < 1e-12);
    assert!((gaussian_q(3.090_232_306_167_813_5).unwrap() - 1e-3).abs() < 1e-14);
}

#[test]
fn bessel_j0_matches_integral_form() {
    for i in 0..=120 {
        let x = 0.25 * i as f64;
        let got = bessel_j0(x).unwrap();
        assert!((got - j0_oracle(x)).abs() < 1e-11, "J0({x})");
    }
}

#[test]
fn jakes_autocorrelation_matches_j0() {
    let p = ScenarioParams::default();
    let fd = 1667.820_475_990_760_3;
    let tc = p.slot_duration_s();
    let lags = 6;
    let process = JakesProcess::new(fd, tc, lags, 64).unwrap();
    let runs = 10_000;
    let mut acc = vec![Complex64::new(0.0, 0.0); lags];
    for r in 0..runs {
        let g = jakes_sequence(&process, &mut RngStream::new(99, r)).unwrap();
        for (tau, a) in acc.iter_mut().enumerate() {
            *a += g[0].conj() * g[tau];
        }
    }
    for (tau, a) in acc.iter().enumerate() {
        let r = a.re / runs as f64;
        let want = j0_oracle(2.0 * std::f64::consts::PI * fd * tau as f64 * tc);
        assert!((r - want).abs() < 0.02, "lag {tau}: {r} vs {want}");
    }
    let power = acc[0].re / runs as f64;
    assert!((power - 1.0).abs() < 0.02, "power {power}");
}

/// Monte Carlo check of the outage conventions: only the standard one is the
/// exact CDF of `|h|²` for `h ~ CN(μ, σ²)`.
#[test]
fn standard_convention_is_exact_cdf() {
    let params = ScenarioParams::default();
    let threshold = params.noise_power_w * params.snr_threshold;
    let mut rng = RngStream::new(5, 0);
    for &(mu_scale, var_scale) in &[(1.0, 1.0), (2.0, 0.5), (0.5, 2.0), (3.0, 1.0)] {
        let mean = Complex64::from_polar(mu_scale * threshold.sqrt(), 0.7);
        let variance = var_scale * threshold;
        let m = CompositeMoments {
            mean,
            variance,
            rician_weight_los: 1.0,
            rician_weight_nlos: 0.0,
        };
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_cn(mean, variance, &mut rng).unwrap().norm_sqr() < threshold)
            .count();
        let p_hat = hits as f64 / n as f64;
        let p = outage_analytic(&m, &params, OutageConvention::Standard).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() <= 3.0 * se, "mu {mu_scale} var {var_scale}: {p_hat} vs {p}");
    }
}

proptest! {
    #[test]
    fn marcum_monotone(a in 0.0f64..12.0, b in 0.0f64..12.0, da in 0.0f64..2.0, db in 0.0f64..2.0) {
        let q = marcum_q1(a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert!(marcum_q1(a + da, b).unwrap() >= q - 1e-12);
        prop_assert!(marcum_q1(a, b + db).unwrap() <= q + 1e-12);
    }

    #[test]
    fn gaussian_q_decreasing(x in -10.0f64..10.0, dx in 0.0f64..3.0) {
        prop_assert!(gaussian_q(x + dx).unwrap() <= gaussian_q(x).unwrap());
    }
}
