use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig};
use super::table::{Cell, ResultTable};
use crate::channel::{ChannelDrop, ChannelRealization, FadingDraws};
use crate::error::{Error, Result};
use crate::metrics::{ber_bpsk, composite_moments, outage_analytic, rate_term};
use crate::numerics::RngStream;
use crate::optimizer::{
    baseline_no_ris, bcd_optimize, fixed_reflection_mrt, Scheme, SchemeOutcome,
};

/// Stream ids at or above this value carry receiver noise, below it the channel.
const NOISE_STREAM_BASE: u64 = 1 << 63;

/// Per-slot results of one scheme in one trial at one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeTrace {
    /// `|ĥ_k|²` for k = 1..K.
    pub gain: Vec<f64>,
    /// Analytic outage per slot; empty unless the experiment needs it.
    pub outage: Vec<f64>,
    pub bit_errors: u64,
    pub bits: u64,
}

/// `points[p][s]` is `None` when scheme `s` failed numerically.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialTrace {
    pub points: Vec<Vec<Option<SchemeTrace>>>,
}

/// Raw Monte Carlo output, in trial order.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub config: ExperimentConfig,
    pub points: Vec<f64>,
    pub trials: Vec<TrialTrace>,
}

/// Runs every trial of the experiment. Trials are independent and run in
/// parallel; each draws from its own stream so the output does not depend
/// on the thread count.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let points = cfg.points();
    let trials = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, &points, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Simulation {
        config: cfg.clone(),
        points,
        trials,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    Ok(simulate(cfg)?.table())
}

fn run_trial(cfg: &ExperimentConfig, points: &[f64], trial: u64) -> Result<TrialTrace> {
    let mut cached: Option<Arc<FadingDraws>> = None;
    let mut out = Vec::with_capacity(points.len());
    for &point in points {
        let params = cfg.params_at(point);
        let draws = match &cached {
            Some(d) if d.matches(&params) => d.clone(),
            _ => {
                let mut rng = RngStream::new(cfg.seed, trial);
                let d = Arc::new(FadingDraws::sample(&params, &mut rng)?);
                cached = Some(d.clone());
                d
            }
        };
        // Geometry was checked when the config was resolved, so an error
        // here is a bug rather than a bad trial.
        let drop = ChannelDrop::from_draws(&params, draws)?;
        out.push(run_point(cfg, &drop, trial));
    }
    Ok(TrialTrace { points: out })
}

struct SchemeState {
    scheme: Scheme,
    trace: Option<SchemeTrace>,
    noise: RngStream,
}

fn run_point(cfg: &ExperimentConfig, drop: &ChannelDrop, trial: u64) -> Vec<Option<SchemeTrace>> {
    let params = &drop.params;
    let power = params.tx_power_w;
    let slots = params.num_slots;
    let random_phases = &drop.draws().random_phases;
    let random_reflection: Vec<Complex64> = random_phases
        .iter()
        .map(|p| Complex64::from_polar(1.0, *p))
        .collect();
    let want_outage = cfg.experiment == Experiment::OutageVsTime;
    let want_bits = cfg.experiment == Experiment::BerVsPosition;

    let mut states: Vec<SchemeState> = cfg
        .schemes
        .iter()
        .map(|&scheme| SchemeState {
            scheme,
            trace: Some(SchemeTrace {
                gain: Vec::with_capacity(slots),
                outage: Vec::new(),
                bit_errors: 0,
                bits: 0,
            }),
            // same noise sequence for every scheme
            noise: RngStream::new(cfg.seed, NOISE_STREAM_BASE | trial),
        })
        .collect();

    for k in 1..=slots {
        let ch = match drop.realization(k) {
            Ok(ch) => ch,
            Err(_) => {
                states.iter_mut().for_each(|s| s.trace = None);
                break;
            }
        };
        for st in states.iter_mut() {
            let Some(trace) = st.trace.as_mut() else { continue };
            let outcome = solve(cfg, st.scheme, &ch, power, random_phases, &random_reflection);
            let ok = outcome.and_then(|o| {
                record(cfg, trace, &o, params, want_outage)?;
                if want_bits {
                    count_bit_errors(trace, o.gain, params.noise_power_w, cfg.ber_bits_per_slot, &mut st.noise);
                }
                Ok(())
            });
            if ok.is_err() {
                st.trace = None;
            }
        }
    }
    states.into_iter().map(|s| s.trace).collect()
}

fn solve(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    ch: &ChannelRealization,
    power: f64,
    random_phases: &Array1<f64>,
    random_reflection: &[Complex64],
) -> Result<SchemeOutcome> {
    match scheme {
        Scheme::Bcd => bcd_optimize(ch, power, cfg.bcd).map(|(o, _)| o),
        Scheme::RandomPhase => fixed_reflection_mrt(ch, random_phases, random_reflection, power),
        Scheme::NoRis => baseline_no_ris(ch, power, cfg.no_ris_mode),
    }
}

fn record(
    cfg: &ExperimentConfig,
    trace: &mut SchemeTrace,
    o: &SchemeOutcome,
    params: &crate::channel::ScenarioParams,
    want_outage: bool,
) -> Result<()> {
    if !o.gain.is_finite() {
        return Err(Error::DegenerateChannel(format!("non-finite gain {}", o.gain)));
    }
    trace.gain.push(o.gain);
    if want_outage {
        let m = composite_moments(&o.scalars, params.rician_k);
        trace.outage.push(outage_analytic(&m, params, cfg.outage_convention)?);
    }
    Ok(())
}

/// BPSK over the slot's effective channel. With `s = +1` sent and coherent
/// detection, a bit is wrong when `|ĥ|² + Re(ĥ*n) < 0`, i.e. when a
/// standard normal falls below `−√(2|ĥ|²/σ²)`.
fn count_bit_errors(trace: &mut SchemeTrace, gain: f64, noise_power: f64, bits: usize, rng: &mut RngStream) {
    let threshold = -(2.0 * gain / noise_power).sqrt();
    for _ in 0..bits {
        if rng.standard_normal() < threshold {
            trace.bit_errors += 1;
        }
    }
    trace.bits += bits as u64;
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl Simulation {
    /// Per-trial traces of one scheme at one sweep point; failed trials are skipped.
    pub fn traces(&self, scheme: Scheme, point: usize) -> impl Iterator<Item = &SchemeTrace> {
        let s = self.scheme_index(scheme);
        self.trials
            .iter()
            .filter_map(move |t| s.and_then(|s| t.points[point][s].as_ref()))
    }

    pub fn failures(&self, scheme: Scheme, point: usize) -> usize {
        match self.scheme_index(scheme) {
            Some(s) => self.trials.iter().filter(|t| t.points[point][s].is_none()).count(),
            None => 0,
        }
    }

    fn scheme_index(&self, scheme: Scheme) -> Option<usize> {
        self.config.schemes.iter().position(|s| *s == scheme)
    }

    /// Errors when more than 1% of trials failed for any scheme and point.
    pub fn check_failure_budget(&self) -> Result<()> {
        let trials = self.trials.len();
        let worst = self
            .config
            .schemes
            .iter()
            .flat_map(|&s| (0..self.points.len()).map(move |p| (s, p)))
            .map(|(s, p)| self.failures(s, p))
            .max()
            .unwrap_or(0);
        if worst as f64 > 0.01 * trials as f64 {
            Err(Error::FailureBudget { failed: worst, trials })
        } else {
            Ok(())
        }
    }

    /// Aggregates the trials into the experiment's output table.
    pub fn table(&self) -> ResultTable {
        let cfg = &self.config;
        let sigma2 = cfg.scenario.noise_power_w;
        let gap = cfg.scenario.cap_gap;
        let threshold = sigma2 * cfg.scenario.snr_threshold;
        let bw = cfg.scenario.bandwidth_hz;
        let slots = cfg.scenario.num_slots;

        let columns: &[&str] = match cfg.experiment {
            Experiment::GainVsTime => &["slot", "scheme", "gain_db_mean", "gain_db_stderr", "failures"],
            Experiment::CapacityVsTime => &["slot", "scheme", "capacity_bps_mean", "capacity_bps_stderr", "failures"],
            Experiment::OutageVsTime => &[
                "slot",
                "scheme",
                "outage_analytic_mean",
                "outage_analytic_stderr",
                "outage_empirical",
                "outage_empirical_stderr",
                "failures",
            ],
            Experiment::RateVsElements => &["n_elements", "scheme", "rate_bps_hz_mean", "rate_bps_hz_stderr", "failures"],
            Experiment::BerVsPosition => &[
                "ap_y_m",
                "scheme",
                "ber_analytic_mean",
                "ber_analytic_stderr",
                "ber_empirical",
                "ber_empirical_stderr",
                "failures",
            ],
        };
        let mut table = ResultTable::new(columns.iter().map(|c| c.to_string()).collect());

        for &scheme in &cfg.schemes {
            let name = Cell::Text(scheme.name().to_string());
            match cfg.experiment {
                Experiment::GainVsTime | Experiment::CapacityVsTime | Experiment::OutageVsTime => {
                    let traces: Vec<&SchemeTrace> = self.traces(scheme, 0).collect();
                    let failures = Cell::Int(self.failures(scheme, 0) as i64);
                    for k in 0..slots {
                        let mut row = vec![Cell::Int(k as i64 + 1), name.clone()];
                        match cfg.experiment {
                            Experiment::GainVsTime => {
                                let xs: Vec<f64> = traces.iter().map(|t| 10.0 * t.gain[k].log10()).collect();
                                push_stats(&mut row, &xs);
                            }
                            Experiment::CapacityVsTime => {
                                let xs: Vec<f64> = traces.iter().map(|t| bw * (1.0 + t.gain[k] / sigma2).log2()).collect();
                                push_stats(&mut row, &xs);
                            }
                            _ => {
                                let xs: Vec<f64> = traces.iter().map(|t| t.outage[k]).collect();
                                push_stats(&mut row, &xs);
                                let hits: Vec<f64> = traces
                                    .iter()
                                    .map(|t| if t.gain[k] < threshold { 1.0 } else { 0.0 })
                                    .collect();
                                push_stats(&mut row, &hits);
                            }
                        }
                        row.push(failures.clone());
                        table.push(row);
                    }
                }
                Experiment::RateVsElements | Experiment::BerVsPosition => {
                    for (p, &point) in self.points.iter().enumerate() {
                        let traces: Vec<&SchemeTrace> = self.traces(scheme, p).collect();
                        let key = if cfg.experiment == Experiment::RateVsElements {
                            Cell::Int(point as i64)
                        } else {
                            Cell::Float(point)
                        };
                        let mut row = vec![key, name.clone()];
                        if cfg.experiment == Experiment::RateVsElements {
                            let xs: Vec<f64> = traces
                                .iter()
                                .map(|t| slot_mean(&t.gain, |g| rate_term(g / sigma2, gap, cfg.rate_model)))
                                .collect();
                            push_stats(&mut row, &xs);
                        } else {
                            let xs: Vec<f64> = traces
                                .iter()
                                .map(|t| slot_mean(&t.gain, |g| ber_bpsk(g / sigma2).unwrap_or(f64::NAN)))
                                .collect();
                            push_stats(&mut row, &xs);
                            let emp: Vec<f64> = traces
                                .iter()
                                .map(|t| t.bit_errors as f64 / t.bits.max(1) as f64)
                                .collect();
                            push_stats(&mut row, &emp);
                        }
                        row.push(Cell::Int(self.failures(scheme, p) as i64));
                        table.push(row);
                    }
                }
            }
        }
        table
    }
}

fn slot_mean(gain: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    gain.iter().map(|g| f(*g)).sum::<f64>() / gain.len() as f64
}

fn push_stats(row: &mut Vec<Cell>, xs: &[f64]) {
    let (m, se) = mean_stderr(xs);
    row.push(Cell::Float(m));
    row.push(Cell::Float(se));
}
