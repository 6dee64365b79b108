//! Rate, capacity, outage and BER of optimized effective channels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{rician_weights, ScenarioParams};
use crate::error::{Error, Result};
use crate::numerics::{gaussian_q, marcum_q1};
use crate::optimizer::{AlignmentScalars, Scheme};

/// Which argument scaling to feed the Marcum Q-function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageConvention {
    /// `1 − Q1(√(|μ|²/σ_h²), √(σ²γ_th/σ_h²))`.
    Paper,
    /// `1 − Q1(√(2|μ|²/σ_h²), √(2σ²γ_th/σ_h²))`, the exact CDF of `|h|²`
    /// for `h ~ CN(μ, σ_h²)`.
    #[default]
    Standard,
}

/// How the modulation efficiency enters the achievable rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `log₂(1 + SNR/Γ)`.
    #[default]
    Gap,
    /// `η·log₂(1 + SNR)` with `η = 1/Γ`.
    Multiplier,
}

/// Mean and variance of the effective channel under the Rician split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositeMoments {
    pub mean: Complex64,
    pub variance: f64,
    pub rician_weight_los: f64,
    pub rician_weight_nlos: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutageParams {
    pub noncentrality: f64,
    pub threshold_norm: f64,
    pub dof: u32,
    pub convention: OutageConvention,
}

/// Per-slot metrics of one scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub slot: usize,
    pub gain_linear: f64,
    pub rate_bps_hz: f64,
    pub capacity_bps: f64,
    pub outage_prob: f64,
    pub ber: f64,
    pub scheme: Scheme,
}

fn require_nonempty<T>(xs: &[T], what: &str) -> Result<()> {
    if xs.is_empty() {
        Err(Error::domain(format!("{what} needs at least one slot")))
    } else {
        Ok(())
    }
}

/// Per-slot rate term, bits/s/Hz.
pub fn rate_term(snr: f64, cap_gap: f64, model: RateModel) -> f64 {
    match model {
        RateModel::Gap => (1.0 + snr / cap_gap).log2(),
        RateModel::Multiplier => (1.0 + snr).log2() / cap_gap,
    }
}

/// `R = (1/K)·Σ log₂(1 + |ĥ_k|²/(Γσ²))`.
pub fn achievable_rate(effective: &[Complex64], params: &ScenarioParams) -> Result<f64> {
    achievable_rate_with(effective, params, RateModel::Gap)
}

pub fn achievable_rate_with(effective: &[Complex64], params: &ScenarioParams, model: RateModel) -> Result<f64> {
    require_nonempty(effective, "achievable rate")?;
    if !(params.cap_gap >= 1.0) {
        return Err(Error::domain("capacity gap must be >= 1"));
    }
    let sum: f64 = effective
        .iter()
        .map(|h| rate_term(h.norm_sqr() / params.noise_power_w, params.cap_gap, model))
        .sum();
    Ok(sum / effective.len() as f64)
}

/// `C = (1/K)·Σ B·log₂(1 + |ĥ_k|²/σ²)`, bits/s.
pub fn channel_capacity(effective: &[Complex64], params: &ScenarioParams) -> Result<f64> {
    require_nonempty(effective, "channel capacity")?;
    if !(params.bandwidth_hz > 0.0) {
        return Err(Error::domain("bandwidth must be positive"));
    }
    let sum: f64 = effective
        .iter()
        .map(|h| params.bandwidth_hz * (1.0 + h.norm_sqr() / params.noise_power_w).log2())
        .sum();
    Ok(sum / effective.len() as f64)
}

/// Mean `ρ·h_dᴴw + ρ²·h_{k,(1)}e^{jε*}` and variance
/// `ϱ²|h_dᴴw|² + ϱ⁴|h_{k,(1)}e^{jε*}|²`. The cascaded terms carry squared
/// Rician weights even though only the RIS–AP hop has an NLOS part here;
/// compare against the empirical outage column.
pub fn composite_moments(scalars: &AlignmentScalars, rician_k: f64) -> CompositeMoments {
    let (rho, varrho) = rician_weights(rician_k);
    let direct = scalars.direct_scalar;
    let cascaded = scalars.aligned_cascaded();
    CompositeMoments {
        mean: rho * direct + rho * rho * cascaded,
        variance: varrho.powi(2) * direct.norm_sqr() + varrho.powi(4) * cascaded.norm_sqr(),
        rician_weight_los: rho,
        rician_weight_nlos: varrho,
    }
}

pub fn outage_params(m: &CompositeMoments, params: &ScenarioParams, convention: OutageConvention) -> OutageParams {
    let scale = match convention {
        OutageConvention::Paper => 1.0,
        OutageConvention::Standard => 2.0,
    };
    OutageParams {
        noncentrality: scale * m.mean.norm_sqr() / m.variance,
        threshold_norm: scale * params.noise_power_w * params.snr_threshold / m.variance,
        dof: 2,
        convention,
    }
}

/// `P(|ĥ|² < σ²γ_th)` through the Marcum Q-function.
///
/// A zero-variance channel is deterministic: the result is exactly 0 or 1.
pub fn outage_analytic(m: &CompositeMoments, params: &ScenarioParams, convention: OutageConvention) -> Result<f64> {
    let threshold = params.noise_power_w * params.snr_threshold;
    if !(m.variance >= 0.0) {
        return Err(Error::domain("composite variance must be non-negative"));
    }
    if m.variance == 0.0 {
        return Ok(if m.mean.norm_sqr() < threshold { 1.0 } else { 0.0 });
    }
    let op = outage_params(m, params, convention);
    let q = marcum_q1(op.noncentrality.sqrt(), op.threshold_norm.sqrt())?;
    Ok((1.0 - q).clamp(0.0, 1.0))
}

/// Fraction of gain samples below the outage threshold `σ²γ_th`.
pub fn outage_empirical(gain_samples: &[f64], params: &ScenarioParams) -> Result<f64> {
    require_nonempty(gain_samples, "empirical outage")?;
    let threshold = params.noise_power_w * params.snr_threshold;
    let below = gain_samples.iter().filter(|g| **g < threshold).count();
    Ok(below as f64 / gain_samples.len() as f64)
}

/// Uncoded BPSK bit error rate `Q(√(2·E_b/σ²))`.
pub fn ber_bpsk(snr_per_bit: f64) -> Result<f64> {
    if !(snr_per_bit >= 0.0) {
        return Err(Error::domain(format!("SNR per bit must be non-negative, got {snr_per_bit}")));
    }
    if snr_per_bit.is_infinite() {
        return Ok(0.0);
    }
    gaussian_q((2.0 * snr_per_bit).sqrt())
}
