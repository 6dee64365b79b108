use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{AngleMode, AngleSet, ScenarioParams};
use crate::error::{Error, Result};
use crate::metrics::{OutageConvention, RateModel};
use crate::numerics::DEFAULT_SINUSOIDS;
use crate::optimizer::{BcdOptions, NoRisMode, Scheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    GainVsTime,
    RateVsElements,
    CapacityVsTime,
    BerVsPosition,
    OutageVsTime,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::GainVsTime => "gain_vs_time",
            Experiment::RateVsElements => "rate_vs_elements",
            Experiment::CapacityVsTime => "capacity_vs_time",
            Experiment::BerVsPosition => "ber_vs_position",
            Experiment::OutageVsTime => "outage_vs_time",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }

    fn has_sweep(self) -> bool {
        matches!(self, Experiment::RateVsElements | Experiment::BerVsPosition)
    }

    fn default_sweep(self) -> Vec<f64> {
        match self {
            Experiment::RateVsElements => vec![100.0, 400.0, 900.0, 1600.0],
            Experiment::BerVsPosition => (0..=15).map(|i| 20.0 * i as f64).collect(),
            _ => Vec::new(),
        }
    }

    fn default_trials(self) -> usize {
        match self {
            Experiment::BerVsPosition => 2000,
            _ => 500,
        }
    }
}

/// Scenario section of the configuration file. Powers and losses are in
/// dB/dBm here and converted to linear values on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub train_speed_kmh: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_power_dbm: f64,
    pub transmit_power_dbm: f64,
    pub num_tx: usize,
    pub ris_elements: u64,
    pub frame_ms: f64,
    pub num_slots: usize,
    pub rician_k: f64,
    pub ref_loss_db: f64,
    pub pl_exp_direct: f64,
    pub pl_exp_bs_ris: f64,
    pub pl_exp_ris_ap: f64,
    pub bs_pos: [f64; 3],
    pub ris_pos: [f64; 3],
    pub ap_pos: [f64; 3],
    /// Linear gap to capacity `Γ`; 1.25 corresponds to an efficiency of 0.8.
    pub cap_gap: f64,
    pub snr_threshold_db: f64,
    pub num_sinusoids: usize,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            train_speed_kmh: 360.0,
            carrier_hz: 5e9,
            bandwidth_hz: 100e3,
            noise_power_dbm: -90.0,
            transmit_power_dbm: 40.0,
            num_tx: 2,
            ris_elements: 1600,
            frame_ms: 3.0,
            num_slots: 100,
            rician_k: 3.0,
            ref_loss_db: 30.0,
            pl_exp_direct: 3.8,
            pl_exp_bs_ris: 2.2,
            pl_exp_ris_ap: 2.8,
            bs_pos: [0.0, 0.0, 30.0],
            ris_pos: [0.0, 300.0, 30.0],
            ap_pos: [20.0, 300.0, 0.0],
            cap_gap: 1.25,
            snr_threshold_db: 10.0,
            num_sinusoids: DEFAULT_SINUSOIDS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub outage_convention: OutageConvention,
    pub no_ris_mode: NoRisMode,
    pub rate_model: RateModel,
    pub paper_literal_pathloss: bool,
    pub angle_mode: AngleMode,
    pub direct_los_doppler: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            outage_convention: OutageConvention::default(),
            no_ris_mode: NoRisMode::default(),
            rate_model: RateModel::default(),
            paper_literal_pathloss: false,
            angle_mode: AngleMode::default(),
            direct_los_doppler: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcdFile {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BcdFile {
    fn default() -> Self {
        let d = BcdOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

/// The configuration file as written, before validation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub scenario: ScenarioFile,
    #[serde(default)]
    pub schemes: Option<Vec<Scheme>>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub bcd: BcdFile,
    /// BPSK symbols simulated per slot for the empirical BER column.
    #[serde(default)]
    pub ber_bits_per_slot: Option<usize>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_BER_BITS_PER_SLOT: usize = 100;

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Validates, fills in defaults and converts to linear units.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let experiment = self
            .experiment
            .ok_or_else(|| Error::config("experiment", "missing required field `experiment`"))?;
        let s = &self.scenario;

        let ris_side = perfect_square_root(s.ris_elements)
            .ok_or_else(|| Error::config("scenario.ris_elements", format!("{} is not a perfect square", s.ris_elements)))?;

        let scenario = ScenarioParams {
            train_speed_mps: s.train_speed_kmh / 3.6,
            carrier_hz: s.carrier_hz,
            bandwidth_hz: s.bandwidth_hz,
            noise_power_w: dbm_to_watts(s.noise_power_dbm),
            tx_power_w: dbm_to_watts(s.transmit_power_dbm),
            num_tx: s.num_tx,
            ris_side,
            frame_s: s.frame_ms * 1e-3,
            num_slots: s.num_slots,
            rician_k: s.rician_k,
            ref_loss: db_to_linear(-s.ref_loss_db),
            pl_exp_direct: s.pl_exp_direct,
            pl_exp_bs_ris: s.pl_exp_bs_ris,
            pl_exp_ris_ap: s.pl_exp_ris_ap,
            bs_pos: s.bs_pos,
            ris_pos: s.ris_pos,
            ap_pos: s.ap_pos,
            cap_gap: s.cap_gap,
            snr_threshold: db_to_linear(s.snr_threshold_db),
            angle_mode: self.flags.angle_mode,
            num_sinusoids: s.num_sinusoids,
            paper_literal_pathloss: self.flags.paper_literal_pathloss,
            direct_los_doppler: self.flags.direct_los_doppler,
        };
        scenario.validate().map_err(|e| match e {
            Error::Config { path, message } => Error::config(format!("scenario.{path}"), message),
            other => other,
        })?;

        let mut schemes = self.schemes.clone().unwrap_or_else(|| Scheme::ALL.to_vec());
        if schemes.is_empty() {
            return Err(Error::config("schemes", "at least one scheme is required"));
        }
        schemes.sort();
        schemes.dedup();

        let trials = self.trials.unwrap_or_else(|| experiment.default_trials());
        if trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }

        let sweep = match (&self.sweep, experiment.has_sweep()) {
            (None, _) => experiment.default_sweep(),
            (Some(v), true) if v.is_empty() => {
                return Err(Error::config("sweep", format!("{} needs a non-empty sweep", experiment.name())))
            }
            (Some(v), true) => v.clone(),
            (Some(_), false) => {
                return Err(Error::config("sweep", format!("{} does not take a sweep", experiment.name())))
            }
        };
        for (i, &x) in sweep.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::config(format!("sweep[{i}]"), "must be finite"));
            }
            if experiment == Experiment::RateVsElements
                && (x < 1.0 || x.fract() != 0.0 || perfect_square_root(x as u64).is_none())
            {
                return Err(Error::config(
                    format!("sweep[{i}]"),
                    format!("RIS element count {x} is not a positive perfect square"),
                ));
            }
        }

        let bcd = BcdOptions {
            tol: self.bcd.tol,
            max_iter: self.bcd.max_iter,
        };
        if !(bcd.tol > 0.0) {
            return Err(Error::config("bcd.tol", "must be positive"));
        }
        if bcd.max_iter == 0 {
            return Err(Error::config("bcd.max_iter", "must be at least 1"));
        }

        let cfg = ExperimentConfig {
            scenario,
            experiment,
            schemes,
            trials,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            sweep,
            output_path: self.output_path.clone(),
            outage_convention: self.flags.outage_convention,
            no_ris_mode: self.flags.no_ris_mode,
            rate_model: self.flags.rate_model,
            bcd,
            ber_bits_per_slot: self.ber_bits_per_slot.unwrap_or(DEFAULT_BER_BITS_PER_SLOT),
            config_hash: self.hash(),
        };
        cfg.check_geometry()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form of this configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// A validated experiment with all quantities in linear SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioParams,
    pub experiment: Experiment,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub seed: u64,
    /// RIS element counts (rate_vs_elements) or AP y-coordinates in metres
    /// (ber_vs_position); empty for time-axis experiments.
    pub sweep: Vec<f64>,
    pub output_path: Option<PathBuf>,
    pub outage_convention: OutageConvention,
    pub no_ris_mode: NoRisMode,
    pub rate_model: RateModel,
    pub bcd: BcdOptions,
    pub ber_bits_per_slot: usize,
    pub config_hash: String,
}

impl ExperimentConfig {
    /// Sweep values, or a single placeholder point for time-axis runs.
    pub fn points(&self) -> Vec<f64> {
        if self.sweep.is_empty() {
            vec![f64::NAN]
        } else {
            self.sweep.clone()
        }
    }

    /// Scenario at one sweep point.
    pub fn params_at(&self, point: f64) -> ScenarioParams {
        let mut p = self.scenario.clone();
        match self.experiment {
            Experiment::RateVsElements => {
                p.ris_side = perfect_square_root(point as u64).expect("validated sweep");
            }
            Experiment::BerVsPosition => p.ap_pos[1] = point,
            _ => {}
        }
        p
    }

    fn check_geometry(&self) -> Result<()> {
        for (i, point) in self.points().into_iter().enumerate() {
            let p = self.params_at(point);
            let at = |path: &str| {
                if self.sweep.is_empty() {
                    format!("scenario.{path}")
                } else {
                    format!("sweep[{i}]")
                }
            };
            for (a, b, name) in [
                (p.bs_pos, p.ap_pos, "ap_pos"),
                (p.bs_pos, p.ris_pos, "ris_pos"),
                (p.ris_pos, p.ap_pos, "ap_pos"),
            ] {
                let d = crate::channel::distance(a, b);
                if d < crate::channel::REFERENCE_DISTANCE_M {
                    return Err(Error::config(at(name), format!("link distance {d} m is inside the 1 m reference distance")));
                }
            }
            if p.angle_mode == AngleMode::Geometric {
                AngleSet::from_geometry(&p)
                    .and_then(|a| a.validate())
                    .map_err(|e| Error::config(at("ap_pos"), e.to_string()))?;
            }
        }
        Ok(())
    }
}

/// Reads, validates and converts a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ConfigFile::load(path)?.resolve()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn perfect_square_root(n: u64) -> Option<usize> {
    let r = (n as f64).sqrt().round() as u64;
    (r * r == n).then_some(r as usize)
}
