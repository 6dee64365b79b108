//! Joint RIS phase / transmit beam optimization by block coordinate ascent,
//! plus the two reference schemes it is compared against.
//!
//! The RIS block is solved in two moves. The first conjugates the slot's
//! Doppler rotation and the RIS departure steering against `G·w`, which
//! makes every LOS term of the cascaded sum add in phase. The second rotates
//! the whole surface by one common angle so the cascaded scalar lines up
//! with the direct-link scalar. The beam block is MRT.
//!
//! For a rank-one `G` every entry of `diag(a)·G·w` has modulus
//! `|α|·|a_BSᴴ w|`, so taking the per-entry phase (the only thing a passive
//! surface can apply) loses nothing.

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// RIS phases `φ_{n,k}` and the transmit beam `w_k` of one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformingState {
    pub phases: Array1<f64>,
    pub tx_beam: Array1<Complex64>,
}

impl BeamformingState {
    /// Unit-modulus reflection coefficients `e^{jφ_n}`.
    pub fn reflection(&self) -> Array1<Complex64> {
        self.phases.mapv(|p| Complex64::from_polar(1.0, p))
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_beam.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Power budget `‖w‖² ≤ P` (with relative slack `tol`) and phases in `[0, 2π)`.
    pub fn is_feasible(&self, power: f64, tol: f64) -> bool {
        self.tx_power() <= power * (1.0 + tol)
            && self.phases.iter().all(|p| (0.0..2.0 * PI).contains(p))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BcdTrace {
    pub objective_per_iteration: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Scalars of the final slot solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentScalars {
    /// `h_{k,(1)}`: cascaded scalar before the common rotation.
    pub cascaded_scalar: Complex64,
    /// Common rotation `ε*` applied to the whole surface.
    pub alignment_phase: f64,
    /// `h_{d,k}ᴴ w_k`.
    pub direct_scalar: Complex64,
    /// `ĥ_k = h_{k,(1)}·e^{jε*} + h_{d,k}ᴴ w_k`.
    pub effective_channel: Complex64,
}

impl AlignmentScalars {
    pub fn aligned_cascaded(&self) -> Complex64 {
        self.cascaded_scalar * Complex64::from_polar(1.0, self.alignment_phase)
    }
}

/// Result of running one scheme on one slot.
#[derive(Clone, Debug)]
pub struct SchemeOutcome {
    pub state: BeamformingState,
    pub scalars: AlignmentScalars,
    /// `|ĥ_k|²`, linear.
    pub gain: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Bcd,
    RandomPhase,
    NoRis,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Bcd, Scheme::RandomPhase, Scheme::NoRis];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bcd => "bcd",
            Scheme::RandomPhase => "random_phase",
            Scheme::NoRis => "no_ris",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the no-RIS reference treats the surface.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoRisMode {
    /// Cascaded path removed entirely.
    #[default]
    Remove,
    /// Surface present with all phases zero.
    IdentityPhase,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BcdOptions {
    /// Relative objective change that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

/// `arg` with `arg(0) = 0`.
fn arg0(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.arg()
    }
}

/// Wraps into `[0, 2π)`.
pub fn wrap_phase(p: f64) -> f64 {
    let r = p.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

fn wrap_symmetric(p: f64) -> f64 {
    let r = wrap_phase(p + PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// `Σ conj(h_i)·w_i`.
fn inner(h: &Array1<Complex64>, w: &Array1<Complex64>) -> Complex64 {
    h.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum()
}

fn check_dims(ch: &ChannelRealization, elements: usize, tx: usize) -> Result<()> {
    let (n, m) = ch.bs_ris.dim();
    if n != ch.num_elements() || m != ch.num_tx() {
        return Err(Error::domain(format!(
            "BS-RIS matrix is {n}x{m} but links have {} elements and {} antennas",
            ch.num_elements(),
            ch.num_tx()
        )));
    }
    if elements != n || tx != m {
        return Err(Error::domain(format!(
            "state has {elements} phases and {tx} beam entries, channel needs {n} and {m}"
        )));
    }
    Ok(())
}

fn check_power(power: f64) -> Result<()> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::domain(format!("transmit power must be positive, got {power}")));
    }
    Ok(())
}

/// `G·w`.
fn bs_ris_times(ch: &ChannelRealization, w: &Array1<Complex64>) -> Vec<Complex64> {
    match (ch.bs_ris.as_slice(), w.as_slice()) {
        (Some(g), Some(w)) => g
            .chunks_exact(w.len())
            .map(|row| row.iter().zip(w).map(|(g, x)| g * x).sum())
            .collect(),
        _ => ch
            .bs_ris
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(w.iter()).map(|(g, x)| g * x).sum())
            .collect(),
    }
}

/// Composite row channel `h_rᴴ Φ G + h_dᴴ`, returned conjugated-free as the
/// row entries (so the received scalar is `Σ row_m·w_m`).
fn composite_row(ch: &ChannelRealization, reflection: Option<&[Complex64]>) -> Array1<Complex64> {
    let mut row: Array1<Complex64> = ch.direct.combined.mapv(|h| h.conj());
    let Some(v) = reflection else { return row };
    match (ch.bs_ris.as_slice(), row.as_slice_mut()) {
        (Some(g), Some(out)) => {
            for ((h, v), g) in ch.ris_ap.combined.iter().zip(v).zip(g.chunks_exact(out.len())) {
                let t = h.conj() * v;
                for (r, gm) in out.iter_mut().zip(g) {
                    *r += t * gm;
                }
            }
        }
        _ => {
            for ((h, v), g) in ch.ris_ap.combined.iter().zip(v).zip(ch.bs_ris.rows()) {
                let t = h.conj() * v;
                for (r, gm) in row.iter_mut().zip(g.iter()) {
                    *r += t * gm;
                }
            }
        }
    }
    row
}

/// `F = |(h_rᴴ Φ G + h_dᴴ) w|²`.
pub fn channel_gain(state: &BeamformingState, ch: &ChannelRealization) -> Result<f64> {
    check_dims(ch, state.phases.len(), state.tx_beam.len())?;
    let v = state.reflection();
    let row = composite_row(ch, v.as_slice());
    let y: Complex64 = row.iter().zip(state.tx_beam.iter()).map(|(r, w)| r * w).sum();
    Ok(y.norm_sqr())
}

fn doppler_reflection_with(ch: &ChannelRealization, gw: &[Complex64]) -> Vec<Complex64> {
    let rot = Complex64::from_polar(1.0, ch.doppler_phase());
    ch.ris_ap_steering
        .iter()
        .zip(gw)
        .map(|(a, g)| {
            let z = rot * a * g.conj();
            let r = z.norm_sqr().sqrt();
            if r > 0.0 {
                z / r
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect()
}

fn check_beam(ch: &ChannelRealization, w: &Array1<Complex64>) -> Result<()> {
    check_dims(ch, ch.num_elements(), w.len())?;
    if w.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::domain("transmit beam is zero"));
    }
    Ok(())
}

/// Doppler-cancelling phases: `arg(e^{j2πk f_d T_c}·a_n·conj((G w)_n))`,
/// which makes every term of `h_LOS,kᴴ Φ G w` share the phase `-arg β`.
pub fn doppler_phase_step(ch: &ChannelRealization, w: &Array1<Complex64>) -> Result<Array1<f64>> {
    check_beam(ch, w)?;
    let gw = bs_ris_times(ch, w);
    Ok(doppler_reflection_with(ch, &gw)
        .into_iter()
        .map(|v| wrap_phase(arg0(v)))
        .collect())
}

/// Common rotation that puts `cascaded` in phase with `direct`.
pub fn alignment_phase_step(cascaded: Complex64, direct: Complex64) -> f64 {
    wrap_symmetric(-(arg0(cascaded) - arg0(direct)))
}

struct PhaseSolution {
    reflection: Vec<Complex64>,
    scalars: AlignmentScalars,
}

fn solve_phases(ch: &ChannelRealization, w: &Array1<Complex64>) -> PhaseSolution {
    let gw = bs_ris_times(ch, w);
    let mut reflection = doppler_reflection_with(ch, &gw);
    let cascaded: Complex64 = ch
        .ris_ap
        .combined
        .iter()
        .zip(&reflection)
        .zip(&gw)
        .map(|((h, v), g)| h.conj() * v * g)
        .sum();
    let direct = inner(&ch.direct.combined, w);
    let eps = alignment_phase_step(cascaded, direct);
    let rot = Complex64::from_polar(1.0, eps);
    for v in &mut reflection {
        *v *= rot;
    }
    let scalars = AlignmentScalars {
        cascaded_scalar: cascaded,
        alignment_phase: eps,
        direct_scalar: direct,
        effective_channel: cascaded * rot + direct,
    };
    PhaseSolution { reflection, scalars }
}

/// Doppler step followed by the common alignment rotation; phases in `[0, 2π)`.
pub fn optimize_phases(
    ch: &ChannelRealization,
    w: &Array1<Complex64>,
) -> Result<(Array1<f64>, AlignmentScalars)> {
    check_beam(ch, w)?;
    let sol = solve_phases(ch, w);
    let phases = sol.reflection.iter().map(|v| wrap_phase(arg0(*v))).collect();
    Ok((phases, sol.scalars))
}

fn mrt_from_row(row: &Array1<Complex64>, power: f64) -> Result<Array1<Complex64>> {
    let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateChannel(
            "composite channel is zero; MRT direction undefined".into(),
        ));
    }
    let scale = power.sqrt() / norm;
    Ok(row.mapv(|z| z.conj() * scale))
}

/// `w = √P·hᴴ/‖h‖` for the composite row channel under `phases`.
pub fn mrt_beamformer(ch: &ChannelRealization, phases: &Array1<f64>, power: f64) -> Result<Array1<Complex64>> {
    check_power(power)?;
    check_dims(ch, phases.len(), ch.num_tx())?;
    let v: Vec<Complex64> = phases.iter().map(|p| Complex64::from_polar(1.0, *p)).collect();
    mrt_from_row(&composite_row(ch, Some(&v)), power)
}

fn outcome_for(
    ch: &ChannelRealization,
    reflection: Option<&[Complex64]>,
    phases: Array1<f64>,
    power: f64,
) -> Result<SchemeOutcome> {
    let row = composite_row(ch, reflection);
    let w = mrt_from_row(&row, power)?;
    let direct = inner(&ch.direct.combined, &w);
    let total: Complex64 = row.iter().zip(w.iter()).map(|(r, x)| r * x).sum();
    let cascaded = total - direct;
    Ok(SchemeOutcome {
        state: BeamformingState { phases, tx_beam: w },
        scalars: AlignmentScalars {
            cascaded_scalar: cascaded,
            alignment_phase: 0.0,
            direct_scalar: direct,
            effective_channel: total,
        },
        gain: total.norm_sqr(),
    })
}

/// Block coordinate ascent: alternate [`optimize_phases`] and MRT until the
/// relative objective change drops below `opts.tol`.
///
/// Starts from MRT on the direct link alone (or `√P·e₁` if that link is zero).
pub fn bcd_optimize(
    ch: &ChannelRealization,
    power: f64,
    opts: BcdOptions,
) -> Result<(SchemeOutcome, BcdTrace)> {
    check_power(power)?;
    if !(opts.tol > 0.0) {
        return Err(Error::domain("BCD tolerance must be positive"));
    }
    if opts.max_iter == 0 {
        return Err(Error::domain("BCD needs at least one iteration"));
    }
    check_dims(ch, ch.num_elements(), ch.num_tx())?;

    let direct_row = ch.direct.combined.mapv(|h| h.conj());
    let mut w = match mrt_from_row(&direct_row, power) {
        Ok(w) => w,
        Err(_) => {
            let mut e = Array1::from_elem(ch.num_tx(), ZERO);
            e[0] = Complex64::new(power.sqrt(), 0.0);
            e
        }
    };

    let mut trace = BcdTrace::default();
    let mut reflection = Vec::new();
    let mut eps = 0.0;
    let mut row = direct_row;
    for _ in 0..opts.max_iter {
        let sol = solve_phases(ch, &w);
        reflection = sol.reflection;
        eps = sol.scalars.alignment_phase;
        row = composite_row(ch, Some(&reflection));
        w = mrt_from_row(&row, power)?;
        let objective = power * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
        trace.iterations_used += 1;
        let prev = trace.objective_per_iteration.last().copied();
        trace.objective_per_iteration.push(objective);
        if let Some(prev) = prev {
            if (objective - prev).abs() <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
                trace.converged = true;
                break;
            }
        }
    }

    let direct = inner(&ch.direct.combined, &w);
    let total: Complex64 = row.iter().zip(w.iter()).map(|(r, x)| r * x).sum();
    let aligned = total - direct;
    let phases = reflection.iter().map(|v| wrap_phase(arg0(*v))).collect();
    let outcome = SchemeOutcome {
        state: BeamformingState { phases, tx_beam: w },
        scalars: AlignmentScalars {
            cascaded_scalar: aligned * Complex64::from_polar(1.0, -eps),
            alignment_phase: eps,
            direct_scalar: direct,
            effective_channel: total,
        },
        gain: total.norm_sqr(),
    };
    Ok((outcome, trace))
}

/// MRT against a surface held at the given phases.
pub fn fixed_phase_mrt(ch: &ChannelRealization, phases: &Array1<f64>, power: f64) -> Result<SchemeOutcome> {
    check_power(power)?;
    check_dims(ch, phases.len(), ch.num_tx())?;
    let v: Vec<Complex64> = phases.iter().map(|p| Complex64::from_polar(1.0, *p)).collect();
    outcome_for(ch, Some(&v), phases.mapv(wrap_phase), power)
}

/// Same as [`fixed_phase_mrt`] with the reflection coefficients precomputed.
pub(crate) fn fixed_reflection_mrt(
    ch: &ChannelRealization,
    phases: &Array1<f64>,
    reflection: &[Complex64],
    power: f64,
) -> Result<SchemeOutcome> {
    check_power(power)?;
    check_dims(ch, reflection.len(), ch.num_tx())?;
    outcome_for(ch, Some(reflection), phases.clone(), power)
}

/// Phases drawn uniformly on `[0, 2π)`, then MRT.
pub fn baseline_random_phase(ch: &ChannelRealization, power: f64, rng: &mut RngStream) -> Result<SchemeOutcome> {
    let phases = Array1::from_shape_fn(ch.num_elements(), |_| rng.uniform_in(0.0, 2.0 * PI));
    fixed_phase_mrt(ch, &phases, power)
}

/// MRT without help from the surface.
pub fn baseline_no_ris(ch: &ChannelRealization, power: f64, mode: NoRisMode) -> Result<SchemeOutcome> {
    check_power(power)?;
    check_dims(ch, ch.num_elements(), ch.num_tx())?;
    let zeros = Array1::zeros(ch.num_elements());
    match mode {
        NoRisMode::Remove => outcome_for(ch, None, zeros, power),
        NoRisMode::IdentityPhase => fixed_phase_mrt(ch, &zeros, power),
    }
}
