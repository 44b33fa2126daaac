//! Scores the model against its acceptance criteria.
//!
//! Each criterion runs on the supplied config with the settings the criterion
//! itself fixes (lag, damping, protocol, noise level) applied on top.

use serde::Serialize;

use crate::calibrate::fit_force_voltage;
use crate::config::Config;
use crate::csvio::{write_sim_record, write_sweep};
use crate::error::Result;
use crate::experiments::{
    cyclic_repeatability, grasp_trial, loading_speeds, pigment_sweep, ramp_response,
};
use crate::mechanics::{axial_force, lateral_gap, nominal_stress, strain_energy, MaterialParams};
use crate::optics::{fit_linear, OpticalModel};
use crate::scenarios::{make_profile, simulate, GraspKind, ProfileSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub requirement: &'static str,
    pub measured: Vec<Measurement>,
    /// Set when the run itself failed; the criterion then counts as failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CriterionResult {
    /// One-line summary, e.g. `[PASS] 1 peak force: peak_force_n=7.39096`.
    pub fn summary(&self) -> String {
        let vals: Vec<String> = self
            .measured
            .iter()
            .map(|m| format!("{}={}", m.label, crate::format_sig9(m.value)))
            .collect();
        let mut s = format!(
            "[{}] {:>2} {}: {} (need {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            vals.join(", "),
            self.requirement
        );
        if let Some(e) = &self.error {
            s.push_str(&format!(" error: {e}"));
        }
        s
    }
}

/// Reference model values, computed independently of this crate.
pub mod reference {
    pub const PEAK_FORCE_N: f64 = 7.39;
    pub const SENSITIVITY_FS: f64 = 0.0732;
    pub const SENSITIVITY_LS: f64 = 0.0734271;
    pub const DYNAMIC_RANGE_DB: f64 = 31.50;
    pub const NOISE_RMS: f64 = 0.0144;
    pub const OPTICS_SLOPE: f64 = 1.9374;
    pub const OPTICS_INTERCEPT: f64 = -1.8875;
}

type Outcome = Result<(bool, Vec<Measurement>)>;

fn m(label: &str, value: f64) -> Measurement {
    Measurement {
        label: label.into(),
        value,
    }
}

fn within_rel(x: f64, target: f64, rel: f64) -> bool {
    ((x - target) / target).abs() <= rel
}

struct Criterion {
    id: u8,
    name: &'static str,
    requirement: &'static str,
    run: fn(&Config) -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "peak force",
        requirement: "ramp to 3 mm, no lag: force in [5.2, 9.2] N and within 0.1% of 7.39 N",
        run: peak_force,
    },
    Criterion {
        id: 2,
        name: "sensitivity",
        requirement: "LS slope in [0.060, 0.085] V/N and within 0.1% of 0.0734271; full-scale ratio within 0.1% of 0.0732",
        run: sensitivity_check,
    },
    Criterion {
        id: 3,
        name: "dynamic range",
        requirement: "noise 0.0144 V: 31.50 +/- 0.05 dB",
        run: dynamic_range_check,
    },
    Criterion {
        id: 4,
        name: "linear band",
        requirement: "gap within [1.0, 2.0] mm over indent [0, 3] mm for kappa 0.3 and 1.0",
        run: linear_band,
    },
    Criterion {
        id: 5,
        name: "phase lags",
        requirement: "lag 0.06 mm: [0.49, 0.92] s / [0.043, 0.081] s / [0.0035, 0.0065] s at 0.1/1/10 mm/s",
        run: phase_lags,
    },
    Criterion {
        id: 6,
        name: "hysteresis",
        requirement: "damping 0: load/unload separation < 1e-6 of full scale",
        run: hysteresis_check,
    },
    Criterion {
        id: 7,
        name: "repeatability",
        requirement: "100 cycles, 1 mm/s, 3 mm, 1 s dwell: CV < 0.02 and first/last-10 drift < 1%",
        run: repeatability_check,
    },
    Criterion {
        id: 8,
        name: "energy-stress consistency",
        requirement: "601 stretches in [0.7, 1.3]: max relative error of dW/dλ vs stress < 1e-5",
        run: energy_stress,
    },
    Criterion {
        id: 9,
        name: "estimator roundtrip",
        requirement: "15 indents in (0, 3] mm: |error| < 1% of full-scale force",
        run: estimator_roundtrip,
    },
    Criterion {
        id: 10,
        name: "calibration recovery",
        requirement: "coefficients of exact linear data recovered within 1e-9",
        run: calibration_recovery,
    },
    Criterion {
        id: 11,
        name: "grasp detection",
        requirement: "exactly one grasp then one release for each of 100 seeds",
        run: grasp_detection,
    },
    Criterion {
        id: 12,
        name: "determinism",
        requirement: "repeated runs give byte-identical CSV",
        run: determinism,
    },
];

/// Runs every criterion. Failures to run are reported, not propagated.
pub fn evaluate(cfg: &Config) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|c| evaluate_one(c, cfg)).collect()
}

/// Runs the criterion with the given id, if there is one.
pub fn evaluate_id(cfg: &Config, id: u8) -> Option<CriterionResult> {
    CRITERIA
        .iter()
        .find(|c| c.id == id)
        .map(|c| evaluate_one(c, cfg))
}

fn evaluate_one(c: &Criterion, cfg: &Config) -> CriterionResult {
    let (passed, measured, error) = match (c.run)(cfg) {
        Ok((p, ms)) => (p, ms, None),
        Err(e) => (false, Vec::new(), Some(e.report())),
    };
    CriterionResult {
        id: c.id,
        name: c.name,
        passed,
        requirement: c.requirement,
        measured,
        error,
    }
}

fn no_lag(cfg: &Config) -> Config {
    let mut c = cfg.clone();
    c.material.deadzone_delta0 = 0.0;
    c
}

fn peak_force(cfg: &Config) -> Outcome {
    let mut c = no_lag(cfg);
    c.scenarios.ramp.max_indent_mm = 3.0;
    let f = ramp_response(&c)?.peak_force_n;
    let ok = (5.2..=9.2).contains(&f) && within_rel(f, reference::PEAK_FORCE_N, 1e-3);
    Ok((ok, vec![m("peak_force_n", f)]))
}

fn sensitivity_check(cfg: &Config) -> Outcome {
    let r = ramp_response(&no_lag(cfg))?;
    let ls = r.sensitivity_ls_v_per_n;
    let fs = r.sensitivity_fs_v_per_n;
    let ok = (0.060..=0.085).contains(&ls)
        && within_rel(ls, reference::SENSITIVITY_LS, 1e-3)
        && within_rel(fs, reference::SENSITIVITY_FS, 1e-3);
    Ok((
        ok,
        vec![m("ls_slope_v_per_n", ls), m("full_scale_ratio_v_per_n", fs)],
    ))
}

fn dynamic_range_check(cfg: &Config) -> Outcome {
    let mut c = no_lag(cfg);
    c.noise_rms = reference::NOISE_RMS;
    let r = ramp_response(&c)?;
    let db = r.dynamic_range_db.unwrap_or(f64::NAN);
    let ok = (db - reference::DYNAMIC_RANGE_DB).abs() <= 0.05;
    Ok((
        ok,
        vec![m("full_scale_v", r.full_scale_v), m("dynamic_range_db", db)],
    ))
}

fn linear_band(cfg: &Config) -> Outcome {
    let mut ok = true;
    let mut out = Vec::new();
    for kappa in [0.3, 1.0] {
        let mut g = cfg.geometry;
        g.kappa = kappa;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=3000 {
            let gap = lateral_gap(i as f64 * 1e-3, &g)?.gap_mm;
            lo = lo.min(gap);
            hi = hi.max(gap);
        }
        ok &= lo >= 1.0 && hi <= 2.0;
        out.push(m(&format!("min_gap_mm@kappa={kappa}"), lo));
        out.push(m(&format!("max_gap_mm@kappa={kappa}"), hi));
    }
    Ok((ok, out))
}

fn phase_lags(cfg: &Config) -> Outcome {
    let mut c = cfg.clone();
    let s = &mut c.scenarios.speeds;
    s.lag_mm = 0.06;
    s.speeds_mm_s = vec![0.1, 1.0, 10.0];
    let bands = [(0.49, 0.92), (0.043, 0.081), (0.0035, 0.0065)];
    let res = loading_speeds(&c)?;
    let ok = res
        .iter()
        .zip(bands)
        .all(|(r, (lo, hi))| (lo..=hi).contains(&r.lag_s));
    let out = res
        .iter()
        .map(|r| m(&format!("lag_s@{}mm/s", r.speed_mm_s), r.lag_s))
        .collect();
    Ok((ok, out))
}

fn hysteresis_check(cfg: &Config) -> Outcome {
    let mut c = cfg.clone();
    c.material.damping_c = 0.0;
    let h = ramp_response(&c)?.hysteresis;
    Ok((h < 1e-6, vec![m("hysteresis_fraction", h)]))
}

fn repeatability_check(cfg: &Config) -> Outcome {
    let mut c = cfg.clone();
    let p = &mut c.scenarios.cyclic;
    p.speed_mm_s = 1.0;
    p.max_indent_mm = 3.0;
    p.dwell_s = 1.0;
    p.cycles = 100;
    let (_, r) = cyclic_repeatability(&c)?;
    Ok((
        r.cv < 0.02 && r.drift < 0.01,
        vec![
            m("cycles", r.cycles as f64),
            m("cv", r.cv),
            m("first10_mean_v", r.first10_mean_v),
            m("last10_mean_v", r.last10_mean_v),
            m("drift", r.drift),
        ],
    ))
}

/// Largest relative gap between the stress and a central difference of the
/// energy with step `h`, relative error floored at `1e-9`.
pub fn energy_stress_error(mat: &MaterialParams, h: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..=600 {
        let l = 0.7 + 0.6 * i as f64 / 600.0;
        let fd = (strain_energy(l + h, mat)? - strain_energy(l - h, mat)?) / (2.0 * h);
        let p = nominal_stress(l, mat)?;
        worst = worst.max((fd - p).abs() / p.abs().max(1e-9));
    }
    Ok(worst)
}

fn energy_stress(cfg: &Config) -> Outcome {
    let e = energy_stress_error(&cfg.material, 1e-7)?;
    let coarse = energy_stress_error(&cfg.material, 1e-6)?;
    Ok((
        e < 1e-5,
        vec![
            m("max_rel_error@h=1e-7", e),
            m("max_rel_error@h=1e-6", coarse),
        ],
    ))
}

fn estimator_roundtrip(cfg: &Config) -> Outcome {
    let model = no_lag(cfg).sensor_model()?;
    let (g, mat) = (&model.geometry, &model.material);
    let full_scale = axial_force(3.0, 0.0, g, mat)?;
    let mut worst: f64 = 0.0;
    for i in 1..=15 {
        let d = 3.0 * i as f64 / 15.0;
        let v = model.voltage_at_indent(d)?;
        let est = model.force_from_voltage(v)?.force_n;
        worst = worst.max((est - axial_force(d, 0.0, g, mat)?).abs());
    }
    let frac = worst / full_scale;
    Ok((frac < 0.01, vec![m("max_error_fraction", frac)]))
}

fn calibration_recovery(_cfg: &Config) -> Outcome {
    let (a, b) = (reference::OPTICS_SLOPE, reference::OPTICS_INTERCEPT);
    let optics = OpticalModel::default();
    let samples = (0..=20)
        .map(|i| {
            let x = 1.0 + i as f64 * 0.05;
            Ok((x, optics.voltage_at_gap(x)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_linear(&samples, (1.0, 2.0))?;
    let e_lin = (fit.slope - a).abs().max((fit.intercept - b).abs());

    let (c0, c1) = (0.0125, 0.0732);
    let pairs: Vec<(f64, f64)> = (0..50)
        .map(|i| {
            let f = 7.39 * i as f64 / 49.0;
            (f, c0 + c1 * f)
        })
        .collect();
    let curve = fit_force_voltage(&pairs, 1)?;
    let e_poly = (curve.coefficients[0] - c0)
        .abs()
        .max((curve.coefficients[1] - c1).abs());
    Ok((
        e_lin < 1e-9 && e_poly < 1e-9,
        vec![
            m("fit_linear_slope", fit.slope),
            m("fit_linear_intercept", fit.intercept),
            m("fit_linear_max_error", e_lin),
            m("fit_force_voltage_max_error", e_poly),
        ],
    ))
}

fn grasp_detection(cfg: &Config) -> Outcome {
    let mut clean = 0;
    for seed in 0..100u64 {
        let t = grasp_trial(cfg, seed)?;
        let kinds: Vec<GraspKind> = t.events.iter().map(|e| e.kind).collect();
        clean += (kinds == [GraspKind::Grasp, GraspKind::Release]) as usize;
    }
    Ok((
        clean == 100,
        vec![m("seeds_with_one_grasp_one_release", clean as f64)],
    ))
}

fn csv_outputs(cfg: &Config) -> Result<Vec<Vec<u8>>> {
    let model = cfg.sensor_model()?;
    let mut short_cycle = cfg.cyclic_spec();
    if let ProfileSpec::Cyclic { cycles, .. } = &mut short_cycle {
        *cycles = (*cycles).min(5);
    }
    let mut files = Vec::new();
    for spec in [cfg.ramp_spec(), short_cycle, cfg.hold_spec()] {
        let rec = simulate(&make_profile(&spec)?, &model, cfg.noise_rms, cfg.seed)?;
        let mut buf = Vec::new();
        write_sim_record(&rec, &mut buf)?;
        files.push(buf);
    }
    for sweep in pigment_sweep(cfg)?.sweeps {
        let mut buf = Vec::new();
        write_sweep(&sweep, &mut buf)?;
        files.push(buf);
    }
    Ok(files)
}

fn determinism(cfg: &Config) -> Outcome {
    let first = csv_outputs(cfg)?;
    let second = csv_outputs(cfg)?;
    let bytes: usize = first.iter().map(Vec::len).sum();
    Ok((
        first == second,
        vec![m("files", first.len() as f64), m("bytes", bytes as f64)],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_one_to_twelve() {
        let ids: Vec<u8> = CRITERIA.iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..=12).collect::<Vec<_>>());
    }

    #[test]
    fn cheap_criteria_pass_on_defaults() {
        let cfg = Config::default();
        for id in [1, 2, 3, 4, 6, 8, 9, 10] {
            let r = evaluate_id(&cfg, id).unwrap();
            assert!(r.passed, "{}", r.summary());
        }
    }

    #[test]
    fn failure_is_reported_not_raised() {
        let mut cfg = Config::default();
        cfg.geometry.kappa = 0.0;
        cfg.scenarios.ramp.max_indent_mm = 30.0;
        let r = evaluate_id(&cfg, 1).unwrap();
        assert!(!r.passed);
        assert!(r.error.is_some());
        assert!(r.summary().starts_with("[FAIL]"));
    }

    #[test]
    fn coarse_step_exceeds_bound_only_at_rest() {
        let mat = MaterialParams::default();
        let coarse = energy_stress_error(&mat, 1e-6).unwrap();
        assert!(coarse > 1e-5 && coarse < 6e-5, "{coarse}");
        assert!(energy_stress_error(&mat, 1e-7).unwrap() < 1e-6);
    }
}
