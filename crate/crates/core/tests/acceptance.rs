//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use ndarray::Array1;
use num_complex::Complex64;

use common::{drop_for, grid_search, j0_oracle, marcum_oracle, norm_sqr, slope, tiny_params, without_direct};
use ris_hst::channel::{AngleMode, ScenarioParams};
use ris_hst::harness::{simulate, ConfigFile, Experiment, ExperimentConfig, ResultTable, Simulation};
use ris_hst::numerics::{gaussian_q, jakes_sequence, marcum_q1, JakesProcess, RngStream};
use ris_hst::optimizer::{alignment_phase_step, bcd_optimize, mrt_beamformer, BcdOptions};

const SEED: u64 = 20_240_601;

// criterion 1
const GAIN_GAP_DB: (f64, f64) = (12.0, 18.0);
// criterion 2
const RANDOM_PHASE_MAX_DB: f64 = 1.0;
// criterion 3
const OUTAGE_MAX: f64 = 1e-3;
// criterion 4
const CAPACITY_GAP_BPS: (f64, f64) = (500.0, 3000.0);
// criterion 6
const BER_PEAK_SIGMAS: f64 = 2.0;
// criterion 7
const MARCUM_TOL: f64 = 1e-8;
const Q_IDENTITY_TOL: f64 = 1e-12;
const JAKES_TOL: f64 = 0.02;
// criterion 8
const GRID_LEVELS: usize = 32;
const EXACT_TOL: f64 = 1e-12;
// criterion 9
const SCALING_EXPONENT: (f64, f64) = (1.9, 2.1);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn config(json: &str) -> ExperimentConfig {
    ConfigFile::parse(json).unwrap().resolve().unwrap()
}

fn column(table: &ResultTable, scheme: &str, name: &str) -> Vec<f64> {
    table
        .scheme_rows(scheme)
        .map(|r| table.get_float(r, name).unwrap())
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn table_as(sim: &Simulation, experiment: Experiment) -> ResultTable {
    let mut s = sim.clone();
    s.config.experiment = experiment;
    s.table()
}

/// Default scenario, 500 drops: shared by criteria 1 to 4.
fn default_scenario_run() -> Simulation {
    simulate(&config(&format!(
        r#"{{"experiment": "outage_vs_time", "trials": 500, "seed": {SEED}}}"#
    )))
    .unwrap()
}

fn criterion_1(sim: &Simulation) -> Verdict {
    let t = table_as(sim, Experiment::GainVsTime);
    let bcd = mean(&column(&t, "bcd", "gain_db_mean"));
    let none = mean(&column(&t, "no_ris", "gain_db_mean"));
    let gap = bcd - none;
    // ratio of average linear gains, for reference
    let linear = |s| {
        let xs: Vec<f64> = sim.traces(s, 0).flat_map(|t| t.gain.iter().copied()).collect();
        mean(&xs)
    };
    let gap_of_means = 10.0 * (linear(ris_hst::optimizer::Scheme::Bcd) / linear(ris_hst::optimizer::Scheme::NoRis)).log10();
    verdict(
        (GAIN_GAP_DB.0..=GAIN_GAP_DB.1).contains(&gap),
        format!(
            "bcd - no_ris = {gap:.2} dB (mean of dB; {gap_of_means:.2} dB of mean gain), want [{}, {}]",
            GAIN_GAP_DB.0, GAIN_GAP_DB.1
        ),
    )
}

fn criterion_2(sim: &Simulation) -> Verdict {
    let t = table_as(sim, Experiment::GainVsTime);
    let gap = mean(&column(&t, "random_phase", "gain_db_mean")) - mean(&column(&t, "no_ris", "gain_db_mean"));
    verdict(
        gap < RANDOM_PHASE_MAX_DB,
        format!("random_phase - no_ris = {gap:.3} dB, want < {RANDOM_PHASE_MAX_DB}"),
    )
}

fn criterion_3(sim: &Simulation) -> Verdict {
    let t = table_as(sim, Experiment::OutageVsTime);
    let analytic = column(&t, "bcd", "outage_analytic_mean");
    let empirical = column(&t, "bcd", "outage_empirical");
    let none = column(&t, "no_ris", "outage_empirical");
    let worst_a = analytic.iter().copied().fold(0.0, f64::max);
    let worst_e = empirical.iter().copied().fold(0.0, f64::max);
    let slots_hit = empirical.iter().filter(|p| **p >= OUTAGE_MAX).count();
    let none_max = none.iter().copied().fold(0.0, f64::max);
    verdict(
        worst_a < OUTAGE_MAX && worst_e < OUTAGE_MAX && none_max > 0.0,
        format!(
            "bcd worst slot analytic {worst_a:.2e}, empirical {worst_e:.2e} ({slots_hit}/{} slots >= {OUTAGE_MAX:e}); no_ris max empirical {none_max:.3}",
            empirical.len()
        ),
    )
}

fn criterion_4(sim: &Simulation) -> Verdict {
    let t = table_as(sim, Experiment::CapacityVsTime);
    let bcd = column(&t, "bcd", "capacity_bps_mean");
    let none = column(&t, "no_ris", "capacity_bps_mean");
    let gap = bcd.iter().zip(&none).map(|(a, b)| a - b).fold(f64::MIN, f64::max);
    verdict(
        (CAPACITY_GAP_BPS.0..=CAPACITY_GAP_BPS.1).contains(&gap),
        format!(
            "max per-slot capacity gap {:.1} kbps, want [{}, {}] kbps",
            gap / 1e3,
            CAPACITY_GAP_BPS.0 / 1e3,
            CAPACITY_GAP_BPS.1 / 1e3
        ),
    )
}

fn criterion_5() -> Verdict {
    let cfg = config(&format!(
        r#"{{"experiment": "rate_vs_elements", "trials": 200, "seed": {SEED}, "sweep": [100, 400, 900, 1600],
            "schemes": ["bcd", "no_ris"]}}"#
    ));
    let t = simulate(&cfg).unwrap().table();
    let bcd = column(&t, "bcd", "rate_bps_hz_mean");
    let none = column(&t, "no_ris", "rate_bps_hz_mean");
    let se = column(&t, "no_ris", "rate_bps_hz_stderr");
    let increasing = bcd.windows(2).all(|w| w[1] > w[0]);
    let spread = none.iter().copied().fold(f64::MIN, f64::max) - none.iter().copied().fold(f64::MAX, f64::min);
    let max_se = se.iter().copied().fold(0.0, f64::max);
    verdict(
        increasing && spread <= max_se,
        format!(
            "bcd rates {:?} bits/s/Hz; no_ris spread {spread:.2e} vs stderr {max_se:.2e}",
            bcd.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn criterion_6() -> Verdict {
    let cfg = config(&format!(
        r#"{{"experiment": "ber_vs_position", "trials": 500, "seed": {SEED}, "schemes": ["bcd"]}}"#
    ));
    let t = simulate(&cfg).unwrap().table();
    let ys = column(&t, "bcd", "ap_y_m");
    let ber = column(&t, "bcd", "ber_analytic_mean");
    let se = column(&t, "bcd", "ber_analytic_stderr");
    let peak = (0..ber.len()).max_by(|a, b| ber[*a].total_cmp(&ber[*b])).unwrap();
    let last = ber.len() - 1;
    let margin = |end: usize| (ber[peak] - ber[end]) / (se[peak].powi(2) + se[end].powi(2)).sqrt();
    let interior = peak > 0 && peak < last;
    let pass = interior && margin(0) >= BER_PEAK_SIGMAS && margin(last) >= BER_PEAK_SIGMAS;
    verdict(
        pass,
        format!(
            "peak at y = {} m (BER {:.3e}); endpoints y=0 {:.3e}, y=300 {:.3e}; peak margin {:.1}/{:.1} sigma, want interior and >= {BER_PEAK_SIGMAS}",
            ys[peak],
            ber[peak],
            ber[0],
            ber[last],
            if interior { margin(0) } else { 0.0 },
            if interior { margin(last) } else { 0.0 },
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut marcum_err = 0.0f64;
    for i in 0..20 {
        for j in 0..20 {
            let (a, b) = (0.5 * i as f64, 0.25 + 0.5 * j as f64);
            marcum_err = marcum_err.max((marcum_q1(a, b).unwrap() - marcum_oracle(a, b)).abs());
        }
    }
    let mut q_err = 0.0f64;
    for i in 0..=80 {
        let x = -8.0 + 0.2 * i as f64;
        q_err = q_err.max((gaussian_q(x).unwrap() + gaussian_q(-x).unwrap() - 1.0).abs());
    }
    q_err = q_err.max((gaussian_q(0.0).unwrap() - 0.5).abs());

    let p = ScenarioParams::default();
    let fd = p.train_speed_mps * p.carrier_hz / ris_hst::channel::SPEED_OF_LIGHT;
    let tc = p.slot_duration_s();
    let process = JakesProcess::new(fd, tc, 6, p.num_sinusoids).unwrap();
    let runs = 10_000;
    let mut acc = [Complex64::new(0.0, 0.0); 6];
    for r in 0..runs {
        let g = jakes_sequence(&process, &mut RngStream::new(SEED, r)).unwrap();
        for (tau, a) in acc.iter_mut().enumerate() {
            *a += g[0].conj() * g[tau];
        }
    }
    let jakes_err = acc
        .iter()
        .enumerate()
        .map(|(tau, a)| (a.re / runs as f64 - j0_oracle(2.0 * PI * fd * tau as f64 * tc)).abs())
        .fold(0.0, f64::max);
    verdict(
        marcum_err < MARCUM_TOL && q_err < Q_IDENTITY_TOL && jakes_err < JAKES_TOL,
        format!("marcum max err {marcum_err:.1e}, Q identity err {q_err:.1e}, Jakes autocorrelation err {jakes_err:.4}"),
    )
}

fn criterion_8() -> Verdict {
    let opts = BcdOptions::default();
    let slack = 1.0 - (PI / GRID_LEVELS as f64).cos().powi(2);
    let mut rng = RngStream::new(SEED, 0);

    // RIS-AP link pure LOS, direct link Rician
    let mut grid_ok = 0;
    let mut worst_ratio = f64::MAX;
    for t in 0..100u64 {
        let side = 1 + (rng.uniform() < 0.5) as usize;
        let tx = 1 + (rng.uniform() < 0.5) as usize;
        let p = tiny_params(side, tx, f64::INFINITY);
        let ch = drop_for(&p, SEED, t).realization(1 + t as usize % 8).unwrap();
        let bcd = bcd_optimize(&ch, p.tx_power_w, opts).unwrap().0.gain;
        let grid = grid_search(&ch, GRID_LEVELS, p.tx_power_w);
        worst_ratio = worst_ratio.min(bcd / grid);
        if bcd >= grid * (1.0 - slack) {
            grid_ok += 1;
        }
    }

    let mut monotone = 0;
    let mut mrt_err = 0.0f64;
    for t in 0..1000usize {
        let side = 1 + (rng.uniform() * 6.0) as usize;
        let tx = 1 + (rng.uniform() * 4.0) as usize;
        let k = [0.0, 1.0, 3.0, 10.0, f64::INFINITY][t % 5];
        let p = tiny_params(side, tx, k);
        let ch = drop_for(&p, SEED + 1, t as u64).realization(1 + t % 8).unwrap();
        let (out, trace) = bcd_optimize(&ch, p.tx_power_w, opts).unwrap();
        if trace.objective_per_iteration.windows(2).all(|w| w[1] >= w[0] * (1.0 - EXACT_TOL)) {
            monotone += 1;
        }
        mrt_err = mrt_err.max((norm_sqr(&out.state.tx_beam) / p.tx_power_w - 1.0).abs());
        let phases = Array1::from_shape_fn(side * side, |_| rng.uniform_in(0.0, 2.0 * PI));
        let w = mrt_beamformer(&ch, &phases, p.tx_power_w).unwrap();
        mrt_err = mrt_err.max((norm_sqr(&w) / p.tx_power_w - 1.0).abs());
    }

    let mut align_err = 0.0f64;
    for _ in 0..10_000 {
        let c = Complex64::new(rng.standard_normal(), rng.standard_normal());
        let d = Complex64::new(rng.standard_normal(), rng.standard_normal());
        let eps = alignment_phase_step(c, d);
        let tight = (c * Complex64::from_polar(1.0, eps) + d).norm();
        align_err = align_err.max((tight - c.norm() - d.norm()).abs() / (c.norm() + d.norm()));
    }

    verdict(
        grid_ok == 100 && monotone == 1000 && mrt_err <= EXACT_TOL && align_err <= EXACT_TOL,
        format!(
            "grid {grid_ok}/100 (worst bcd/grid {worst_ratio:.6}), monotone {monotone}/1000, MRT power err {mrt_err:.1e}, alignment err {align_err:.1e}"
        ),
    )
}

fn criterion_9() -> Verdict {
    let sizes = [16usize, 64, 256, 1024];
    let drops = 100;
    let mut log_gain = Vec::new();
    for &n in &sizes {
        let p = ScenarioParams {
            ris_side: (n as f64).sqrt() as usize,
            num_slots: 4,
            rician_k: f64::INFINITY,
            angle_mode: AngleMode::Geometric,
            ..ScenarioParams::default()
        };
        let g: f64 = (0..drops)
            .map(|t| {
                let ch = without_direct(drop_for(&p, SEED, t).realization(1).unwrap());
                bcd_optimize(&ch, p.tx_power_w, BcdOptions::default()).unwrap().0.gain
            })
            .sum::<f64>()
            / drops as f64;
        log_gain.push(g.ln());
    }
    let x: Vec<f64> = sizes.iter().map(|n| (*n as f64).ln()).collect();
    let s = slope(&x, &log_gain);
    verdict(
        (SCALING_EXPONENT.0..=SCALING_EXPONENT.1).contains(&s),
        format!("gain ~ N_I^{s:.4}, want [{}, {}]", SCALING_EXPONENT.0, SCALING_EXPONENT.1),
    )
}

fn criterion_10() -> Verdict {
    let runs = [
        r#"{"experiment": "gain_vs_time", "trials": 24, "scenario": {"ris_elements": 100, "num_slots": 20}}"#,
        r#"{"experiment": "capacity_vs_time", "trials": 24, "scenario": {"ris_elements": 100, "num_slots": 20}}"#,
        r#"{"experiment": "outage_vs_time", "trials": 24, "scenario": {"ris_elements": 100, "num_slots": 20}}"#,
        r#"{"experiment": "rate_vs_elements", "trials": 24, "sweep": [16, 64, 100], "scenario": {"num_slots": 20}}"#,
        r#"{"experiment": "ber_vs_position", "trials": 24, "sweep": [0, 140, 300], "scenario": {"ris_elements": 64, "num_slots": 20}}"#,
    ];
    let bytes = |cfg: &ExperimentConfig, threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let mut buf = Vec::new();
                simulate(cfg).unwrap().table().to_writer(&mut buf).unwrap();
                buf
            })
    };
    let mut identical = 0;
    for json in runs {
        let cfg = config(json);
        let a = bytes(&cfg, 1);
        let b = bytes(&cfg, 1);
        let c = bytes(&cfg, 4);
        if a == b && a == c {
            identical += 1;
        }
    }
    verdict(
        identical == runs.len(),
        format!("{identical}/{} experiments byte-identical across reruns and 1 vs 4 threads", runs.len()),
    )
}

fn main() {
    let names = [
        "gain improvement",
        "random-phase negligibility",
        "outage elimination",
        "capacity gap",
        "rate monotonicity",
        "BER shape",
        "special-function oracles",
        "optimizer oracles",
        "scaling law",
        "determinism",
    ];
    let mut results: Vec<(usize, Verdict, f64)> = Vec::new();
    let mut timed = |id: usize, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {id:>2} {:<28} {} {} [{secs:.1}s]",
            names[id - 1],
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((id, v, secs));
    };

    let start = Instant::now();
    let sim = default_scenario_run();
    println!("(shared default-scenario run for criteria 1-4: {:.1}s)", start.elapsed().as_secs_f64());
    timed(1, &mut || criterion_1(&sim));
    timed(2, &mut || criterion_2(&sim));
    timed(3, &mut || criterion_3(&sim));
    timed(4, &mut || criterion_4(&sim));
    timed(5, &mut criterion_5);
    timed(6, &mut criterion_6);
    timed(7, &mut criterion_7);
    timed(8, &mut criterion_8);
    timed(9, &mut criterion_9);
    timed(10, &mut criterion_10);

    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failed: {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
