//! The characterization runs: ramp response, cyclic repeatability, loading
//! speed, grasping and the pigment sweep. Each takes an effective [`Config`].

use serde::Serialize;

use crate::calibrate::{pigment_select, PigmentSelection};
use crate::config::Config;
use crate::error::Result;
use crate::optics::{scale_by_pigment, PigmentMix};
use crate::scenarios::{
    cycle_peaks, detect_grasp, make_profile, simulate, GraspEvent, ProfileSpec, SimRecord,
};
use crate::signal::{
    dynamic_range, hysteresis_metric, moving_average, phase_lag, repeatability, sensitivity,
    TimeSeries,
};

/// Noise-free ramp response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RampReport {
    pub peak_force_n: f64,
    /// Output change between rest and the deepest indentation (V).
    pub full_scale_v: f64,
    /// Least-squares slope of output vs force over the ramp (V/N).
    pub sensitivity_ls_v_per_n: f64,
    /// `full_scale_v / peak_force_n` (V/N).
    pub sensitivity_fs_v_per_n: f64,
    /// Against the configured noise level; absent when the config is noiseless.
    pub dynamic_range_db: Option<f64>,
    /// Load/unload branch separation over full scale, from one quasi-static cycle.
    pub hysteresis: f64,
}

pub fn ramp_response(cfg: &Config) -> Result<RampReport> {
    let model = cfg.sensor_model()?;
    let ramp = simulate(&make_profile(&cfg.ramp_spec())?, &model, 0.0, cfg.seed)?;
    let peak_force_n = ramp.force.max();
    let full_scale_v = ramp.output.max() - ramp.output.min();

    let r = cfg.scenarios.ramp;
    let cycle = simulate(
        &make_profile(&ProfileSpec::Cyclic {
            speed_mm_s: r.speed_mm_s,
            max_indent_mm: r.max_indent_mm,
            cycles: 1,
            dwell_s: 0.0,
        })?,
        &model,
        0.0,
        cfg.seed,
    )?;
    let split = cycle.index_at(r.max_indent_mm / r.speed_mm_s);

    Ok(RampReport {
        peak_force_n,
        full_scale_v,
        sensitivity_ls_v_per_n: sensitivity(&ramp.force, &ramp.output)?,
        sensitivity_fs_v_per_n: full_scale_v / peak_force_n,
        dynamic_range_db: if cfg.noise_rms > 0.0 {
            Some(dynamic_range(full_scale_v, cfg.noise_rms)?)
        } else {
            None
        },
        hysteresis: hysteresis_metric(&cycle.force, &cycle.output, split)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatabilityReport {
    pub cycles: usize,
    /// Per-cycle maxima of the filtered output (V).
    pub peaks_v: Vec<f64>,
    pub cv: f64,
    pub first10_mean_v: f64,
    pub last10_mean_v: f64,
    /// `|last10 - first10| / first10`.
    pub drift: f64,
}

/// Cyclic protocol with the configured noise; returns the record as well.
pub fn cyclic_repeatability(cfg: &Config) -> Result<(SimRecord, RepeatabilityReport)> {
    let rec = simulate(
        &make_profile(&cfg.cyclic_spec())?,
        &cfg.sensor_model()?,
        cfg.noise_rms,
        cfg.seed,
    )?;
    let c = cfg.scenarios.cyclic;
    let period = 2.0 * (c.max_indent_mm / c.speed_mm_s + c.dwell_s);
    let filtered = moving_average(&rec.output, cfg.filter_window)?;
    let peaks_v = cycle_peaks(&filtered, period)?;
    let cv = repeatability(&peaks_v)?;
    let k = peaks_v.len().min(10);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let first10_mean_v = mean(&peaks_v[..k]);
    let last10_mean_v = mean(&peaks_v[peaks_v.len() - k..]);
    let report = RepeatabilityReport {
        cycles: peaks_v.len(),
        cv,
        first10_mean_v,
        last10_mean_v,
        drift: (last10_mean_v - first10_mean_v).abs() / first10_mean_v,
        peaks_v,
    };
    Ok((rec, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedResult {
    pub speed_mm_s: f64,
    /// Delay of the filtered output behind the force (s).
    pub lag_s: f64,
    pub peak_force_n: f64,
    pub peak_output_v: f64,
}

/// One load/unload cycle per speed, with the optical path lag set to
/// `scenarios.speeds.lag_mm`.
pub fn loading_speeds(cfg: &Config) -> Result<Vec<SpeedResult>> {
    let s = &cfg.scenarios.speeds;
    let mut model = cfg.sensor_model()?;
    model.material.deadzone_delta0 = s.lag_mm;
    s.speeds_mm_s
        .iter()
        .map(|&speed| {
            let rec = simulate(
                &make_profile(&ProfileSpec::Cyclic {
                    speed_mm_s: speed,
                    max_indent_mm: s.max_indent_mm,
                    cycles: 1,
                    dwell_s: s.dwell_s,
                })?,
                &model,
                cfg.noise_rms,
                cfg.seed,
            )?;
            let out = moving_average(&rec.output, cfg.filter_window)?;
            Ok(SpeedResult {
                speed_mm_s: speed,
                lag_s: phase_lag(&rec.force, &out)?,
                peak_force_n: rec.force.max(),
                peak_output_v: out.max(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspTrial {
    pub record: SimRecord,
    pub filtered: TimeSeries,
    pub events: Vec<GraspEvent>,
}

/// Hold profile with noise drawn from `seed`, filtered, then passed to the detector.
pub fn grasp_trial(cfg: &Config, seed: u64) -> Result<GraspTrial> {
    let record = simulate(
        &make_profile(&cfg.hold_spec())?,
        &cfg.sensor_model()?,
        cfg.noise_rms,
        seed,
    )?;
    let filtered = moving_average(&record.output, cfg.filter_window)?;
    let d = cfg.detector;
    let events = detect_grasp(&filtered, d.on_threshold, d.off_threshold, d.min_hold_s)?;
    Ok(GraspTrial {
        record,
        filtered,
        events,
    })
}

/// Distance step of the pigment sweep (mm).
pub const SWEEP_STEP_MM: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PigmentSweep {
    pub white_fractions: Vec<f64>,
    /// Per mix, `(distance mm, voltage V)` over the optical band.
    pub sweeps: Vec<Vec<(f64, f64)>>,
    pub selection: PigmentSelection,
}

pub fn pigment_sweep(cfg: &Config) -> Result<PigmentSweep> {
    let base = cfg.base_optical_model()?;
    let (x0, x1) = base.domain();
    let steps = ((x1 - x0) / SWEEP_STEP_MM).round().max(1.0) as usize;
    let o = &cfg.optics;
    let sweeps = o
        .sweep_mixes
        .iter()
        .map(|&w| {
            let mix = PigmentMix {
                white_fraction: w,
                rho_black: o.pigment.rho_black,
            };
            let m = scale_by_pigment(&base, &mix, o.ref_white_fraction)?;
            (0..=steps)
                .map(|i| {
                    let x = x0 + (x1 - x0) * i as f64 / steps as f64;
                    Ok((x, m.voltage_at_gap(x)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let selection = pigment_select(&sweeps, (x0, x1), o.min_r2)?;
    Ok(PigmentSweep {
        white_fractions: o.sweep_mixes.clone(),
        sweeps,
        selection,
    })
}
