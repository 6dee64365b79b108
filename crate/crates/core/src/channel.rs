//! Channel construction for the RIS-assisted train downlink.
//!
//! Geometry conventions: the BS carries an `M`-element ULA along the global
//! x axis; the RIS is an `N × N` UPA lying in the y–z plane with its
//! broadside along x. Angles are measured from the respective broadside.
//!
//! A *drop* fixes the angles, the two path gains `α`, `β`, and the Jakes
//! fading processes for one frame of `K` slots. [`FadingDraws`] holds the
//! geometry-independent randomness of a drop so the same draws can be
//! replayed at several AP positions.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sample_cn, JakesProcess, RngStream, DEFAULT_SINUSOIDS};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reference distance of the path-loss law, metres.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

pub type Position = [f64; 3];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    /// Angles follow from the BS, RIS and AP coordinates.
    #[default]
    Geometric,
    /// Angles drawn uniformly on `[-π/2, π/2]` per drop.
    Stochastic,
}

/// Physical constants and geometry of a scenario, all in linear SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    pub train_speed_mps: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    pub tx_power_w: f64,
    pub num_tx: usize,
    /// RIS side length `N`; the surface has `N²` elements.
    pub ris_side: usize,
    pub frame_s: f64,
    pub num_slots: usize,
    /// Rician factor; `f64::INFINITY` gives pure line of sight.
    pub rician_k: f64,
    /// Path loss at the 1 m reference distance, as a linear power gain.
    pub ref_loss: f64,
    pub pl_exp_direct: f64,
    pub pl_exp_bs_ris: f64,
    pub pl_exp_ris_ap: f64,
    pub bs_pos: Position,
    pub ris_pos: Position,
    pub ap_pos: Position,
    /// Gap to capacity `Γ ≥ 1`.
    pub cap_gap: f64,
    /// Outage SNR threshold, linear.
    pub snr_threshold: f64,
    pub angle_mode: AngleMode,
    pub num_sinusoids: usize,
    /// Use the growing law `C₀·(d/d₀)^{+ℓ}` for the RIS–AP link.
    pub paper_literal_pathloss: bool,
    /// Rotate the direct-link LOS term by the Doppler phase as well.
    pub direct_los_doppler: bool,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            train_speed_mps: 360.0 / 3.6,
            carrier_hz: 5e9,
            bandwidth_hz: 100e3,
            noise_power_w: 1e-12,
            tx_power_w: 10.0,
            num_tx: 2,
            ris_side: 40,
            frame_s: 3e-3,
            num_slots: 100,
            rician_k: 3.0,
            ref_loss: 1e-3,
            pl_exp_direct: 3.8,
            pl_exp_bs_ris: 2.2,
            pl_exp_ris_ap: 2.8,
            bs_pos: [0.0, 0.0, 30.0],
            ris_pos: [0.0, 300.0, 30.0],
            ap_pos: [20.0, 300.0, 0.0],
            cap_gap: 1.25,
            snr_threshold: 10.0,
            angle_mode: AngleMode::Geometric,
            num_sinusoids: DEFAULT_SINUSOIDS,
            paper_literal_pathloss: false,
            direct_los_doppler: true,
        }
    }
}

impl ScenarioParams {
    pub fn ris_elements(&self) -> usize {
        self.ris_side * self.ris_side
    }

    /// Slot length `T_c = T_d / K`.
    pub fn slot_duration_s(&self) -> f64 {
        self.frame_s / self.num_slots as f64
    }

    pub fn rician_weights(&self) -> (f64, f64) {
        rician_weights(self.rician_k)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power", self.noise_power_w),
            ("transmit_power", self.tx_power_w),
            ("frame_s", self.frame_s),
            ("ref_loss", self.ref_loss),
            ("snr_threshold", self.snr_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.train_speed_mps >= 0.0) || !self.train_speed_mps.is_finite() {
            return Err(Error::config("train_speed", "must be non-negative"));
        }
        if self.num_tx == 0 {
            return Err(Error::config("num_tx", "need at least one transmit antenna"));
        }
        if self.ris_side == 0 {
            return Err(Error::config("ris_elements", "need at least one RIS element"));
        }
        if self.num_slots == 0 {
            return Err(Error::config("num_slots", "need at least one slot"));
        }
        if !(self.rician_k >= 0.0) {
            return Err(Error::config("rician_k", "must be non-negative"));
        }
        if !(self.cap_gap >= 1.0) || !self.cap_gap.is_finite() {
            return Err(Error::config("cap_gap", format!("must be >= 1, got {}", self.cap_gap)));
        }
        if self.num_sinusoids < 8 {
            return Err(Error::config("num_sinusoids", "need at least 8 sinusoids"));
        }
        for (name, e) in [
            ("pl_exp_direct", self.pl_exp_direct),
            ("pl_exp_bs_ris", self.pl_exp_bs_ris),
            ("pl_exp_ris_ap", self.pl_exp_ris_ap),
        ] {
            if !e.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        for (name, p) in [("bs_pos", self.bs_pos), ("ris_pos", self.ris_pos), ("ap_pos", self.ap_pos)] {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::config(name, "coordinates must be finite"));
            }
        }
        Ok(())
    }
}

/// LOS and NLOS amplitude weights `(√(κ/(1+κ)), √(1/(1+κ)))`.
pub fn rician_weights(k: f64) -> (f64, f64) {
    if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (1.0 + k)).sqrt(), (1.0 / (1.0 + k)).sqrt())
    }
}

/// Angles of one drop, radians, each in `[-π/2, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleSet {
    /// Arrival azimuth at the RIS from the BS (θ₁).
    pub bs_ris_azimuth: f64,
    /// Arrival elevation at the RIS from the BS (φ₁).
    pub bs_ris_elevation: f64,
    /// Departure azimuth from the RIS toward the AP (θ₂).
    pub ris_ap_azimuth: f64,
    /// Departure elevation from the RIS toward the AP (φ₂).
    pub ris_ap_elevation: f64,
    /// BS transmit angle toward the RIS.
    pub bs_transmit: f64,
    /// BS transmit angle toward the AP, used by the direct-link LOS term.
    pub direct_transmit: f64,
}

impl AngleSet {
    pub fn from_geometry(params: &ScenarioParams) -> Result<Self> {
        let (bs_ris_azimuth, bs_ris_elevation) = angles_from_geometry(params.ris_pos, params.bs_pos)?;
        let (ris_ap_azimuth, ris_ap_elevation) = angles_from_geometry(params.ris_pos, params.ap_pos)?;
        Ok(Self {
            bs_ris_azimuth,
            bs_ris_elevation,
            ris_ap_azimuth,
            ris_ap_elevation,
            bs_transmit: ula_angle(params.bs_pos, params.ris_pos)?,
            direct_transmit: ula_angle(params.bs_pos, params.ap_pos)?,
        })
    }

    fn from_uniform(u: [f64; 6]) -> Self {
        let map = |x: f64| -FRAC_PI_2 + PI * x;
        Self {
            bs_ris_azimuth: map(u[0]),
            bs_ris_elevation: map(u[1]),
            ris_ap_azimuth: map(u[2]),
            ris_ap_elevation: map(u[3]),
            bs_transmit: map(u[4]),
            direct_transmit: map(u[5]),
        }
    }

    pub fn sample(rng: &mut RngStream) -> Self {
        let mut u = [0.0; 6];
        for x in &mut u {
            *x = rng.uniform();
        }
        Self::from_uniform(u)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("bs_ris_azimuth", self.bs_ris_azimuth),
            ("bs_ris_elevation", self.bs_ris_elevation),
            ("ris_ap_azimuth", self.ris_ap_azimuth),
            ("ris_ap_elevation", self.ris_ap_elevation),
            ("bs_transmit", self.bs_transmit),
            ("direct_transmit", self.direct_transmit),
        ];
        for (name, a) in all {
            if !(a.abs() <= FRAC_PI_2 + 1e-12) {
                return Err(Error::config(name, format!("angle {a} outside [-pi/2, pi/2]")));
            }
        }
        Ok(())
    }
}

/// Doppler shift `f_d = v·f_c / c`.
pub fn doppler_frequency(params: &ScenarioParams) -> Result<f64> {
    if !(params.train_speed_mps >= 0.0) {
        return Err(Error::domain("train speed must be non-negative"));
    }
    if !(params.carrier_hz > 0.0) {
        return Err(Error::domain("carrier frequency must be positive"));
    }
    Ok(params.train_speed_mps * params.carrier_hz / SPEED_OF_LIGHT)
}

/// ULA response `[1, e^{jπ sin φ}, …, e^{jπ(m-1) sin φ}]`.
pub fn steering_ula(angle: f64, m: usize) -> Result<Array1<Complex64>> {
    if m == 0 {
        return Err(Error::domain("steering vector needs at least one element"));
    }
    let step = PI * angle.sin();
    Ok(Array1::from_shape_fn(m, |i| Complex64::from_polar(1.0, step * i as f64)))
}

/// UPA response `a_y(θ, φ) ⊗ a_z(φ)`, length `n²`.
pub fn steering_upa(azimuth: f64, elevation: f64, n: usize) -> Result<Array1<Complex64>> {
    if n == 0 {
        return Err(Error::domain("steering vector needs at least one element"));
    }
    let a_y = steering_ula_raw(azimuth.sin() * elevation.cos(), n);
    let a_z = steering_ula_raw(elevation.sin(), n);
    let mut out = Array1::from_elem(n * n, ZERO);
    for (i, y) in a_y.iter().enumerate() {
        for (l, z) in a_z.iter().enumerate() {
            out[i * n + l] = y * z;
        }
    }
    Ok(out)
}

fn steering_ula_raw(direction_cosine: f64, n: usize) -> Vec<Complex64> {
    let step = PI * direction_cosine;
    (0..n).map(|i| Complex64::from_polar(1.0, step * i as f64)).collect()
}

/// `C₀·(d/d₀)^{-ℓ}` as a linear power gain.
pub fn path_loss(distance_m: f64, exponent: f64, params: &ScenarioParams) -> Result<f64> {
    if !(distance_m >= REFERENCE_DISTANCE_M) {
        return Err(Error::domain(format!(
            "path-loss model needs distance >= {REFERENCE_DISTANCE_M} m, got {distance_m}"
        )));
    }
    Ok(params.ref_loss * (distance_m / REFERENCE_DISTANCE_M).powf(-exponent))
}

fn sub(a: Position, b: Position) -> Position {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn distance(a: Position, b: Position) -> f64 {
    let d = sub(b, a);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Azimuth and elevation of `b` seen from a y–z-plane array at `a`.
///
/// Azimuth is measured in the horizontal plane from the +x broadside,
/// elevation above the horizontal plane. Points behind the array
/// (azimuth beyond ±π/2) are rejected as back-lobe geometry.
pub fn angles_from_geometry(a: Position, b: Position) -> Result<(f64, f64)> {
    let d = sub(b, a);
    let horizontal = d[0].hypot(d[1]);
    if horizontal == 0.0 && d[2] == 0.0 {
        return Err(Error::config("geometry", "coincident points have no direction"));
    }
    let azimuth = d[1].atan2(d[0]);
    let elevation = d[2].atan2(horizontal);
    if azimuth.abs() > FRAC_PI_2 {
        return Err(Error::config(
            "geometry",
            format!("target {b:?} lies behind the array at {a:?} (azimuth {azimuth})"),
        ));
    }
    Ok((azimuth, elevation))
}

/// Angle of `b` from the broadside of an x-axis ULA at `a`.
pub fn ula_angle(a: Position, b: Position) -> Result<f64> {
    let r = distance(a, b);
    if r == 0.0 {
        return Err(Error::config("geometry", "coincident points have no direction"));
    }
    Ok((sub(b, a)[0] / r).clamp(-1.0, 1.0).asin())
}

/// Rank-one BS–RIS matrix `α·(a_y ⊗ a_z)·a_BSᴴ`.
pub fn bs_ris_matrix(
    angles: &AngleSet,
    ris_side: usize,
    num_tx: usize,
    alpha: Complex64,
) -> Result<Array2<Complex64>> {
    let ris = steering_upa(angles.bs_ris_azimuth, angles.bs_ris_elevation, ris_side)?;
    let bs = steering_ula(angles.bs_transmit, num_tx)?;
    Ok(Array2::from_shape_fn((ris.len(), num_tx), |(n, m)| alpha * ris[n] * bs[m].conj()))
}

/// Draws `α ~ CN(0, ρ_R²)` and builds the BS–RIS matrix.
pub fn bs_ris_channel(
    params: &ScenarioParams,
    angles: &AngleSet,
    rng: &mut RngStream,
) -> Result<(Array2<Complex64>, Complex64)> {
    let variance = path_loss(distance(params.bs_pos, params.ris_pos), params.pl_exp_bs_ris, params)?;
    let alpha = sample_cn(ZERO, variance, rng)?;
    Ok((bs_ris_matrix(angles, params.ris_side, params.num_tx, alpha)?, alpha))
}

/// A Rician vector channel with its two components retained.
#[derive(Clone, Debug, PartialEq)]
pub struct RicianLink {
    pub los: Array1<Complex64>,
    pub nlos: Array1<Complex64>,
    pub combined: Array1<Complex64>,
}

impl RicianLink {
    pub fn mix(los: Array1<Complex64>, nlos: Array1<Complex64>, rician_k: f64) -> Self {
        let (w_los, w_nlos) = rician_weights(rician_k);
        let combined = Array1::from_shape_fn(los.len(), |i| w_los * los[i] + w_nlos * nlos[i]);
        Self { los, nlos, combined }
    }

    pub fn zeros(len: usize) -> Self {
        let z = Array1::from_elem(len, ZERO);
        Self {
            los: z.clone(),
            nlos: z.clone(),
            combined: z,
        }
    }
}

/// All channels seen in one time slot.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    /// 1-based slot index `k`.
    pub slot: usize,
    pub direct: RicianLink,
    /// `G`, `N_I × M`.
    pub bs_ris: Arc<Array2<Complex64>>,
    pub ris_ap: RicianLink,
    /// Unit-modulus RIS departure steering `a_y(θ₂,φ₂) ⊗ a_z(φ₂)`.
    pub ris_ap_steering: Arc<Array1<Complex64>>,
    pub path_gain_bs_ris: Complex64,
    pub path_gain_ris_ap: Complex64,
    pub doppler_hz: f64,
    pub slot_duration_s: f64,
}

impl ChannelRealization {
    pub fn num_elements(&self) -> usize {
        self.ris_ap.combined.len()
    }

    pub fn num_tx(&self) -> usize {
        self.direct.combined.len()
    }

    /// Doppler phase `2π·k·f_d·T_c` of this slot.
    pub fn doppler_phase(&self) -> f64 {
        2.0 * PI * self.slot as f64 * self.doppler_hz * self.slot_duration_s
    }
}

/// Geometry-independent randomness of one drop, in unit-variance form.
#[derive(Clone, Debug)]
pub struct FadingDraws {
    uniform_angles: [f64; 6],
    pub bs_ris_gain: Complex64,
    pub ris_ap_gain: Complex64,
    /// `K × M` unit-power Jakes samples.
    pub direct_nlos: Array2<Complex64>,
    /// `K × N_I` unit-power Jakes samples.
    pub ris_nlos: Array2<Complex64>,
    /// Fixed phases of the random-phase baseline.
    pub random_phases: Array1<f64>,
}

impl FadingDraws {
    /// Draws in a fixed order: angles, `α`, `β`, direct NLOS, RIS NLOS,
    /// baseline phases. Everything that does not depend on the RIS size
    /// comes first so sweeps over `N_I` share it.
    pub fn sample(params: &ScenarioParams, rng: &mut RngStream) -> Result<Self> {
        let mut uniform_angles = [0.0; 6];
        for x in &mut uniform_angles {
            *x = rng.uniform();
        }
        let bs_ris_gain = sample_cn(ZERO, 1.0, rng)?;
        let ris_ap_gain = sample_cn(ZERO, 1.0, rng)?;
        let process = JakesProcess::new(
            doppler_frequency(params)?,
            params.slot_duration_s(),
            params.num_slots,
            params.num_sinusoids,
        )?;
        let direct_nlos = jakes_bank(&process, params.num_tx, rng);
        let ris_nlos = jakes_bank(&process, params.ris_elements(), rng);
        let random_phases =
            Array1::from_shape_fn(params.ris_elements(), |_| rng.uniform_in(0.0, 2.0 * PI));
        Ok(Self {
            uniform_angles,
            bs_ris_gain,
            ris_ap_gain,
            direct_nlos,
            ris_nlos,
            random_phases,
        })
    }

    pub fn stochastic_angles(&self) -> AngleSet {
        AngleSet::from_uniform(self.uniform_angles)
    }

    pub fn matches(&self, params: &ScenarioParams) -> bool {
        self.ris_nlos.dim() == (params.num_slots, params.ris_elements())
            && self.direct_nlos.dim() == (params.num_slots, params.num_tx)
    }
}

/// `count` independent Jakes sequences as the columns of a `K × count` array.
fn jakes_bank(process: &JakesProcess, count: usize, rng: &mut RngStream) -> Array2<Complex64> {
    let k = process.num_slots;
    let mut buf = vec![ZERO; k];
    let mut out = Array2::from_elem((k, count), ZERO);
    for c in 0..count {
        process.fill(rng, &mut buf);
        for (s, z) in buf.iter().enumerate() {
            out[[s, c]] = *z;
        }
    }
    out
}

/// One drop: angles, path gains and fading processes for a frame.
#[derive(Clone, Debug)]
pub struct ChannelDrop {
    pub params: ScenarioParams,
    pub angles: AngleSet,
    pub doppler_hz: f64,
    pub bs_ris: Arc<Array2<Complex64>>,
    pub alpha: Complex64,
    pub beta: Complex64,
    ris_steering: Arc<Array1<Complex64>>,
    direct_steering: Array1<Complex64>,
    direct_scale: f64,
    ris_nlos_scale: f64,
    draws: Arc<FadingDraws>,
}

impl ChannelDrop {
    pub fn generate(params: &ScenarioParams, rng: &mut RngStream) -> Result<Self> {
        params.validate()?;
        let draws = FadingDraws::sample(params, rng)?;
        Self::from_draws(params, Arc::new(draws))
    }

    pub fn from_draws(params: &ScenarioParams, draws: Arc<FadingDraws>) -> Result<Self> {
        if !draws.matches(params) {
            return Err(Error::domain("fading draws do not match the scenario dimensions"));
        }
        let angles = match params.angle_mode {
            AngleMode::Geometric => AngleSet::from_geometry(params)?,
            AngleMode::Stochastic => draws.stochastic_angles(),
        };
        angles.validate()?;
        Self::with_angles(params, angles, draws)
    }

    pub fn with_angles(params: &ScenarioParams, angles: AngleSet, draws: Arc<FadingDraws>) -> Result<Self> {
        let rho_r = path_loss(distance(params.bs_pos, params.ris_pos), params.pl_exp_bs_ris, params)?;
        let ris_ap_exp = if params.paper_literal_pathloss {
            -params.pl_exp_ris_ap
        } else {
            params.pl_exp_ris_ap
        };
        let rho_k = path_loss(distance(params.ris_pos, params.ap_pos), ris_ap_exp, params)?;
        let direct_loss = path_loss(distance(params.bs_pos, params.ap_pos), params.pl_exp_direct, params)?;

        let alpha = draws.bs_ris_gain * rho_r.sqrt();
        let beta = draws.ris_ap_gain * rho_k.sqrt();
        let bs_ris = bs_ris_matrix(&angles, params.ris_side, params.num_tx, alpha)?;
        let ris_steering = steering_upa(angles.ris_ap_azimuth, angles.ris_ap_elevation, params.ris_side)?;
        let direct_steering = steering_ula(angles.direct_transmit, params.num_tx)?;
        Ok(Self {
            params: params.clone(),
            angles,
            doppler_hz: doppler_frequency(params)?,
            bs_ris: Arc::new(bs_ris),
            alpha,
            beta,
            ris_steering: Arc::new(ris_steering),
            direct_steering,
            direct_scale: direct_loss.sqrt(),
            ris_nlos_scale: rho_k.sqrt(),
            draws,
        })
    }

    pub fn draws(&self) -> &FadingDraws {
        &self.draws
    }

    fn check_slot(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.params.num_slots {
            return Err(Error::domain(format!(
                "slot index {k} outside 1..={}",
                self.params.num_slots
            )));
        }
        Ok(())
    }

    fn doppler_rotation(&self, k: usize) -> Complex64 {
        let phase = 2.0 * PI * k as f64 * self.doppler_hz * self.params.slot_duration_s();
        Complex64::from_polar(1.0, phase)
    }

    /// RIS–AP link in slot `k`: `β·(a_y ⊗ a_z)·e^{j2πk f_d T_c}` mixed with
    /// path-loss-scaled Jakes NLOS.
    pub fn ris_ap_channel(&self, k: usize) -> Result<RicianLink> {
        self.check_slot(k)?;
        let rot = self.beta * self.doppler_rotation(k);
        let los = self.ris_steering.mapv(|a| rot * a);
        let row = self.draws.ris_nlos.row(k - 1);
        let nlos = row.mapv(|z| z * self.ris_nlos_scale);
        Ok(RicianLink::mix(los, nlos, self.params.rician_k))
    }

    /// Direct BS–AP link in slot `k`.
    pub fn direct_channel(&self, k: usize) -> Result<RicianLink> {
        self.check_slot(k)?;
        let rot = if self.params.direct_los_doppler {
            self.doppler_rotation(k)
        } else {
            Complex64::new(1.0, 0.0)
        } * self.direct_scale;
        let los = self.direct_steering.mapv(|a| rot * a);
        let nlos = self.draws.direct_nlos.row(k - 1).mapv(|z| z * self.direct_scale);
        Ok(RicianLink::mix(los, nlos, self.params.rician_k))
    }

    pub fn realization(&self, k: usize) -> Result<ChannelRealization> {
        Ok(ChannelRealization {
            slot: k,
            direct: self.direct_channel(k)?,
            bs_ris: Arc::clone(&self.bs_ris),
            ris_ap: self.ris_ap_channel(k)?,
            ris_ap_steering: Arc::clone(&self.ris_steering),
            path_gain_bs_ris: self.alpha,
            path_gain_ris_ap: self.beta,
            doppler_hz: self.doppler_hz,
            slot_duration_s: self.params.slot_duration_s(),
        })
    }
}
