//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64;

use ris_hst::channel::{AngleMode, ChannelDrop, ChannelRealization, RicianLink, ScenarioParams};
use ris_hst::numerics::RngStream;

/// Trapezoid rule on `(1/π)∫₀^π f(θ) dθ` with `n` panels. Exponentially
/// accurate for the smooth periodic integrands below.
fn periodic_mean(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = PI / n as f64;
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..n {
        s += f(i as f64 * h);
    }
    s / n as f64
}

/// `J0(x) = (1/π)∫₀^π cos(x sin θ) dθ`.
pub fn j0_oracle(x: f64) -> f64 {
    let n = 64 + 2 * x.abs().ceil() as usize;
    periodic_mean(n, |t| (x * t.sin()).cos())
}

/// `e^{-z} I0(z) = (1/π)∫₀^π e^{z(cos θ − 1)} dθ`.
pub fn i0e_oracle(z: f64) -> f64 {
    let n = 64 + z.ceil() as usize;
    periodic_mean(n, |t| (z * (t.cos() - 1.0)).exp())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `Q1(a, b) = ∫_b^∞ x·exp(−(x² + a²)/2)·I0(a x) dx`, integrated in unit
/// panels with adaptive Simpson.
pub fn marcum_oracle(a: f64, b: f64) -> f64 {
    let f = |x: f64| x * (-0.5 * (x - a) * (x - a)).exp() * i0e_oracle(a * x);
    let top = a.max(b) + 40.0;
    let mut lo = b;
    let mut sum = 0.0;
    while lo < top {
        let hi = (lo + 1.0).min(top);
        sum += adaptive_simpson(&f, lo, hi, 1e-15);
        lo = hi;
    }
    sum
}

/// Received scalar as a direct triple loop over antennas and elements.
pub fn naive_effective(ch: &ChannelRealization, phases: &[f64], w: &[Complex64]) -> Complex64 {
    let mut y = Complex64::new(0.0, 0.0);
    for m in 0..ch.num_tx() {
        let mut coeff = ch.direct.combined[m].conj();
        for n in 0..ch.num_elements() {
            let v = Complex64::from_polar(1.0, phases[n]);
            coeff += ch.ris_ap.combined[n].conj() * v * ch.bs_ris[[n, m]];
        }
        y += coeff * w[m];
    }
    y
}

/// Best `P·‖row‖²` over all phase vectors on a `levels`-point grid.
pub fn grid_search(ch: &ChannelRealization, levels: usize, power: f64) -> f64 {
    let n = ch.num_elements();
    let m = ch.num_tx();
    // per-element contribution to the composite row
    let contrib: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..m).map(|j| ch.ris_ap.combined[i].conj() * ch.bs_ris[[i, j]]).collect())
        .collect();
    let roots: Vec<Complex64> = (0..levels)
        .map(|l| Complex64::from_polar(1.0, 2.0 * PI * l as f64 / levels as f64))
        .collect();
    let base: Vec<Complex64> = ch.direct.combined.iter().map(|h| h.conj()).collect();
    let mut idx = vec![0usize; n];
    let mut best = 0.0f64;
    loop {
        let mut row = base.clone();
        for i in 0..n {
            for j in 0..m {
                row[j] += roots[idx[i]] * contrib[i][j];
            }
        }
        best = best.max(power * row.iter().map(|z| z.norm_sqr()).sum::<f64>());
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            idx[k] += 1;
            if idx[k] < levels {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Small scenario with stochastic angles and, optionally, a pure-LOS
/// RIS–AP link.
pub fn tiny_params(side: usize, tx: usize, rician_k: f64) -> ScenarioParams {
    ScenarioParams {
        ris_side: side,
        num_tx: tx,
        num_slots: 8,
        rician_k,
        angle_mode: AngleMode::Stochastic,
        ..ScenarioParams::default()
    }
}

pub fn drop_for(params: &ScenarioParams, seed: u64, trial: u64) -> ChannelDrop {
    ChannelDrop::generate(params, &mut RngStream::new(seed, trial)).unwrap()
}

/// Same slot with the direct link removed.
pub fn without_direct(mut ch: ChannelRealization) -> ChannelRealization {
    ch.direct = RicianLink::zeros(ch.num_tx());
    ch
}

pub fn norm_sqr(w: &Array1<Complex64>) -> f64 {
    w.iter().map(|z| z.norm_sqr()).sum()
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
