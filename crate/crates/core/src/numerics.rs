//! Special functions and random processes used by the channel model and the
//! analytic outage formula.
//!
//! Everything here is pure given an [`RngStream`]. The stream is a ChaCha8
//! generator keyed by a 64-bit seed with the trial index selecting the
//! ChaCha stream, so trials can be scheduled on any number of threads
//! without changing a single sample.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Reproducible random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn require_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be finite, got {x}")))
    }
}

/// Gaussian tail probability `P(Z > x)` for a standard normal `Z`.
pub fn gaussian_q(x: f64) -> Result<f64> {
    require_finite(x, "gaussian_q argument")?;
    Ok((0.5 * libm::erfc(x / SQRT_2)).clamp(0.0, 1.0))
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> Result<f64> {
    require_finite(x, "bessel_j0 argument")?;
    let x = x.abs();
    if x <= 14.0 {
        // Power series; the largest term at x = 14 is ~3e4, so the
        // cancellation error stays near 1e-12.
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) && kf > q.sqrt() {
                break;
            }
        }
        Ok(sum)
    } else {
        // Hankel asymptotic expansion, truncated at its smallest term.
        let mut p = 0.0;
        let mut q = 0.0;
        let mut a = 1.0;
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            if k > 0 {
                let kf = k as f64;
                a *= (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
            }
            if a > prev {
                break;
            }
            prev = a;
            // P = a0 - a2 + a4 - ..., Q = -a1 + a3 - ...
            let signed = if (k / 2) % 2 == 0 { a } else { -a };
            if k % 2 == 0 {
                p += signed;
            } else {
                q -= signed;
            }
            if a < 1e-17 {
                break;
            }
        }
        let chi = x - FRAC_PI_4;
        Ok((2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin()))
    }
}

/// Exponentially scaled modified Bessel function `exp(-x)·I0(x)`, `x ≥ 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 30.0 {
        // All terms positive: no cancellation at any x.
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..400 {
            let kf = k as f64;
            term *= q / (kf * kf);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
            if next > term || next < 1e-17 * sum {
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Ratios `I_k(x) / I_0(x)` for `k = 0..=n`, via the backward continued
/// fraction for `I_k / I_{k-1}`.
fn bessel_i_ratios(x: f64, n: usize) -> Vec<f64> {
    let mut step = vec![0.0; n + 1];
    let mut next = 0.0;
    for k in (1..=n).rev() {
        next = 1.0 / (2.0 * k as f64 / x + next);
        step[k] = next;
    }
    let mut ratios = vec![1.0; n + 1];
    for k in 1..=n {
        ratios[k] = ratios[k - 1] * step[k];
    }
    ratios
}

/// Products `a·b` above this go to quadrature instead of the Bessel series.
pub const MARCUM_SERIES_LIMIT: f64 = 30.0;

/// First-order Marcum Q-function `Q1(a, b)`.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    require_finite(a, "marcum_q1 `a`")?;
    require_finite(b, "marcum_q1 `b`")?;
    if a < 0.0 || b < 0.0 {
        return Err(Error::domain(format!(
            "marcum_q1 needs non-negative arguments, got ({a}, {b})"
        )));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    if a == 0.0 {
        return Ok((-0.5 * b * b).exp());
    }
    let q = if a * b > MARCUM_SERIES_LIMIT {
        marcum_quadrature(a, b)
    } else {
        marcum_series(a, b)
    };
    Ok(q.clamp(0.0, 1.0))
}

fn marcum_series(a: f64, b: f64) -> f64 {
    let x = a * b;
    let n = (2.0 * x) as usize + 80;
    let ratios = bessel_i_ratios(x, n);
    // exp(-(a²+b²)/2)·I_k(ab) = exp(-(a-b)²/2)·[exp(-ab)·I_0(ab)]·r_k
    let base = (-0.5 * (a - b) * (a - b)).exp() * bessel_i0_scaled(x);
    if b >= a {
        let ratio = a / b;
        let mut pow = 1.0;
        let mut sum = 0.0;
        for r in &ratios {
            sum += pow * r;
            pow *= ratio;
        }
        base * sum
    } else {
        let ratio = b / a;
        let mut pow = ratio;
        let mut sum = 0.0;
        for r in &ratios[1..] {
            sum += pow * r;
            pow *= ratio;
        }
        1.0 - base * sum
    }
}

const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Composite 10-point Gauss–Legendre over panels no wider than `panel`.
fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panel: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let panels = ((hi - lo) / panel).ceil().max(1.0) as usize;
    let h = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let mid = lo + (i as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += s * half;
    }
    total
}

/// Integrates the Rician density in whichever direction keeps the result
/// away from catastrophic cancellation. The density is negligible beyond
/// 15 units from its peak near `a`.
fn marcum_quadrature(a: f64, b: f64) -> f64 {
    let density = |t: f64| t * (-0.5 * (t - a) * (t - a)).exp() * bessel_i0_scaled(a * t);
    const REACH: f64 = 15.0;
    if b >= a {
        integrate(density, b, b + REACH, 0.5)
    } else {
        let lo = (a - REACH).max(0.0);
        if b <= lo {
            return 1.0;
        }
        1.0 - integrate(density, lo, b, 0.5)
    }
}

/// One draw from the circularly-symmetric complex Gaussian `CN(mean, variance)`.
pub fn sample_cn(mean: Complex64, variance: f64, rng: &mut RngStream) -> Result<Complex64> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::domain(format!(
            "complex Gaussian variance must be finite and non-negative, got {variance}"
        )));
    }
    let re = rng.standard_normal();
    let im = rng.standard_normal();
    if variance == 0.0 {
        return Ok(mean);
    }
    let s = (0.5 * variance).sqrt();
    Ok(mean + Complex64::new(s * re, s * im))
}

pub const DEFAULT_SINUSOIDS: usize = 64;

/// Sum-of-sinusoids Rayleigh process with a Jakes Doppler spectrum, sampled
/// once per slot at `t = k·T_c`, `k = 1..=K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JakesProcess {
    pub doppler_hz: f64,
    pub slot_duration_s: f64,
    pub num_slots: usize,
    pub num_sinusoids: usize,
}

impl JakesProcess {
    pub fn new(
        doppler_hz: f64,
        slot_duration_s: f64,
        num_slots: usize,
        num_sinusoids: usize,
    ) -> Result<Self> {
        let p = Self {
            doppler_hz,
            slot_duration_s,
            num_slots,
            num_sinusoids,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.doppler_hz >= 0.0) || !self.doppler_hz.is_finite() {
            return Err(Error::domain(format!(
                "doppler frequency must be finite and non-negative, got {}",
                self.doppler_hz
            )));
        }
        if !(self.slot_duration_s > 0.0) {
            return Err(Error::domain("slot duration must be positive"));
        }
        if self.num_slots == 0 {
            return Err(Error::domain("Jakes process needs at least one slot"));
        }
        if self.num_sinusoids < 8 {
            return Err(Error::domain(format!(
                "Jakes process needs at least 8 sinusoids, got {}",
                self.num_sinusoids
            )));
        }
        Ok(())
    }

    /// Writes one realization into `out` (length `num_slots`).
    pub(crate) fn fill(&self, rng: &mut RngStream, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), self.num_slots);
        out.fill(Complex64::new(0.0, 0.0));
        let omega_max = 2.0 * PI * self.doppler_hz * self.slot_duration_s;
        for _ in 0..self.num_sinusoids {
            let arrival = rng.uniform_in(0.0, 2.0 * PI);
            let phase = rng.uniform_in(0.0, 2.0 * PI);
            let omega = omega_max * arrival.cos();
            let rot = Complex64::from_polar(1.0, omega);
            let mut state = Complex64::from_polar(1.0, omega + phase);
            for z in out.iter_mut() {
                *z += state;
                state *= rot;
            }
        }
        let norm = 1.0 / (self.num_sinusoids as f64).sqrt();
        for z in out.iter_mut() {
            *z *= norm;
        }
    }
}

/// A unit-power fading sequence of `num_slots` samples.
pub fn jakes_sequence(process: &JakesProcess, rng: &mut RngStream) -> Result<Vec<Complex64>> {
    process.validate()?;
    let mut out = vec![Complex64::new(0.0, 0.0); process.num_slots];
    process.fill(rng, &mut out);
    Ok(out)
}
