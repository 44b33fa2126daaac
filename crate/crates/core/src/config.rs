//! JSON configuration: every model parameter and scenario setting in one
//! document. Omitted fields take their defaults; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::csvio::read_sweep;
use crate::error::{Error, Result};
use crate::mechanics::{MaterialParams, SensorGeometry};
use crate::optics::{scale_by_pigment, OpticalModel, PigmentMix, RangePolicy};
use crate::scenarios::{HoldLevel, ProfileSpec};
use crate::signal::FILTER_WINDOW;
use crate::SensorModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub material: MaterialParams,
    pub geometry: SensorGeometry,
    pub optics: OpticsConfig,
    /// RMS of additive voltage noise (V).
    pub noise_rms: f64,
    pub seed: u64,
    /// Moving-average width applied to outputs before peak picking and detection.
    pub filter_window: usize,
    pub detector: DetectorConfig,
    pub scenarios: ScenarioConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            material: MaterialParams::default(),
            geometry: SensorGeometry::default(),
            optics: OpticsConfig::default(),
            noise_rms: 0.0144,
            seed: 0,
            filter_window: FILTER_WINDOW,
            detector: DetectorConfig::default(),
            scenarios: ScenarioConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsConfig {
    pub model: OpticsModelConfig,
    pub range_policy: RangePolicy,
    /// Mix of the sensing surface.
    pub pigment: PigmentMix,
    /// White fraction of the silicone the model was measured on.
    pub ref_white_fraction: f64,
    /// White fractions tabulated by the `sweep` command.
    pub sweep_mixes: Vec<f64>,
    /// Minimum r² for a mix to count as linear over the band.
    pub min_r2: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            model: OpticsModelConfig::default(),
            range_policy: RangePolicy::Error,
            pigment: PigmentMix::default(),
            ref_white_fraction: 0.75,
            sweep_mixes: vec![1.0, 0.75, 0.5, 0.25, 0.0],
            min_r2: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum OpticsModelConfig {
    Linear {
        a: f64,
        b: f64,
        x_min: f64,
        x_max: f64,
    },
    /// Either inline `(distance, voltage)` points or a sweep CSV, resolved
    /// relative to the config file.
    Lookup {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<[f64; 2]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<PathBuf>,
    },
}

impl Default for OpticsModelConfig {
    fn default() -> Self {
        Self::Linear {
            a: 1.9374,
            b: -1.8875,
            x_min: 1.0,
            x_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub on_threshold: f64,
    pub off_threshold: f64,
    pub min_hold_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            on_threshold: 0.1,
            off_threshold: 0.05,
            min_hold_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub ramp: RampConfig,
    pub cyclic: CyclicConfig,
    pub speeds: SpeedsConfig,
    pub grasp: GraspConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampConfig {
    pub speed_mm_s: f64,
    pub max_indent_mm: f64,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self {
            speed_mm_s: 1.0,
            max_indent_mm: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CyclicConfig {
    pub speed_mm_s: f64,
    pub max_indent_mm: f64,
    pub cycles: usize,
    pub dwell_s: f64,
}

impl Default for CyclicConfig {
    fn default() -> Self {
        Self {
            speed_mm_s: 1.0,
            max_indent_mm: 3.0,
            cycles: 100,
            dwell_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedsConfig {
    pub speeds_mm_s: Vec<f64>,
    pub max_indent_mm: f64,
    pub dwell_s: f64,
    /// Displacement lag of the optical path used for this experiment (mm);
    /// replaces `material.deadzone_delta0` while it runs.
    pub lag_mm: f64,
}

impl Default for SpeedsConfig {
    fn default() -> Self {
        Self {
            speeds_mm_s: vec![0.1, 1.0, 10.0],
            max_indent_mm: 3.0,
            dwell_s: 1.0,
            lag_mm: 0.06,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspConfig {
    pub speed_mm_s: f64,
    pub levels: Vec<HoldLevel>,
}

impl Default for GraspConfig {
    fn default() -> Self {
        let lvl = |indent_mm, duration_s| HoldLevel {
            indent_mm,
            duration_s,
        };
        Self {
            speed_mm_s: 10.0,
            levels: vec![lvl(0.0, 1.0), lvl(2.0, 3.0), lvl(0.0, 2.0)],
        }
    }
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { field, message } => Error::config(format!("{prefix}.{field}"), message),
        other => Error::config(prefix, other.report()),
    }
}

fn check(ok: bool, field: &str, message: String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

impl Config {
    /// Parses a JSON document; an empty document yields the defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = if text.trim().is_empty() {
            Config::default()
        } else {
            serde_json::from_str(text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.material
            .validate()
            .map_err(|e| prefixed("material", e))?;
        self.geometry
            .validate()
            .map_err(|e| prefixed("geometry", e))?;
        self.optics
            .pigment
            .validate()
            .map_err(|e| prefixed("optics.pigment", e))?;
        let o = &self.optics;
        check(
            (0.0..=1.0).contains(&o.ref_white_fraction),
            "optics.ref_white_fraction",
            format!("must be in [0, 1], got {}", o.ref_white_fraction),
        )?;
        check(
            o.sweep_mixes.iter().all(|w| (0.0..=1.0).contains(w)) && !o.sweep_mixes.is_empty(),
            "optics.sweep_mixes",
            "must be a non-empty list of fractions in [0, 1]".into(),
        )?;
        check(
            (0.0..=1.0).contains(&o.min_r2),
            "optics.min_r2",
            format!("must be in [0, 1], got {}", o.min_r2),
        )?;
        self.optical_model()?;
        check(
            self.noise_rms.is_finite() && self.noise_rms >= 0.0,
            "noise_rms",
            format!("must be >= 0, got {}", self.noise_rms),
        )?;
        check(
            !self.filter_window.is_multiple_of(2),
            "filter_window",
            format!("must be odd and >= 1, got {}", self.filter_window),
        )?;
        let d = &self.detector;
        check(
            d.on_threshold > d.off_threshold && d.off_threshold >= 0.0,
            "detector.on_threshold",
            format!(
                "need on_threshold > off_threshold >= 0, got {} and {}",
                d.on_threshold, d.off_threshold
            ),
        )?;
        check(
            d.min_hold_s.is_finite() && d.min_hold_s >= 0.0,
            "detector.min_hold_s",
            format!("must be >= 0, got {}", d.min_hold_s),
        )?;
        let s = &self.scenarios;
        let pos = |field: &str, v: f64| {
            check(
                v.is_finite() && v > 0.0,
                field,
                format!("must be > 0, got {v}"),
            )
        };
        let nonneg = |field: &str, v: f64| {
            check(
                v.is_finite() && v >= 0.0,
                field,
                format!("must be >= 0, got {v}"),
            )
        };
        pos("scenarios.ramp.speed_mm_s", s.ramp.speed_mm_s)?;
        pos("scenarios.ramp.max_indent_mm", s.ramp.max_indent_mm)?;
        pos("scenarios.cyclic.speed_mm_s", s.cyclic.speed_mm_s)?;
        pos("scenarios.cyclic.max_indent_mm", s.cyclic.max_indent_mm)?;
        nonneg("scenarios.cyclic.dwell_s", s.cyclic.dwell_s)?;
        check(
            s.cyclic.cycles >= 1,
            "scenarios.cyclic.cycles",
            "must be >= 1".into(),
        )?;
        check(
            !s.speeds.speeds_mm_s.is_empty(),
            "scenarios.speeds.speeds_mm_s",
            "must not be empty".into(),
        )?;
        for v in &s.speeds.speeds_mm_s {
            pos("scenarios.speeds.speeds_mm_s", *v)?;
        }
        pos("scenarios.speeds.max_indent_mm", s.speeds.max_indent_mm)?;
        nonneg("scenarios.speeds.dwell_s", s.speeds.dwell_s)?;
        nonneg("scenarios.speeds.lag_mm", s.speeds.lag_mm)?;
        pos("scenarios.grasp.speed_mm_s", s.grasp.speed_mm_s)?;
        for l in &s.grasp.levels {
            nonneg("scenarios.grasp.levels.indent_mm", l.indent_mm)?;
            nonneg("scenarios.grasp.levels.duration_s", l.duration_s)?;
        }
        Ok(())
    }

    /// Optical model as configured, before pigment scaling.
    pub fn base_optical_model(&self) -> Result<OpticalModel> {
        match &self.optics.model {
            OpticsModelConfig::Linear { a, b, x_min, x_max } => {
                OpticalModel::linear(*a, *b, *x_min, *x_max)
                    .map_err(|e| prefixed("optics.model.linear", e))
            }
            OpticsModelConfig::Lookup {
                points: Some(p), ..
            } => {
                let pts: Vec<(f64, f64)> = p.iter().map(|q| (q[0], q[1])).collect();
                OpticalModel::lookup(&pts).map_err(|e| prefixed("optics.model.lookup.points", e))
            }
            OpticsModelConfig::Lookup { csv: Some(_), .. } => Err(Error::config(
                "optics.model.lookup.csv",
                "sweep file not loaded; use load_config",
            )),
            OpticsModelConfig::Lookup { .. } => Err(Error::config(
                "optics.model.lookup",
                "needs either `points` or `csv`",
            )),
        }
    }

    /// Effective optical model for the configured pigment mix.
    pub fn optical_model(&self) -> Result<OpticalModel> {
        let base = self.base_optical_model()?;
        let o = &self.optics;
        match base {
            OpticalModel::Linear { .. } => scale_by_pigment(&base, &o.pigment, o.ref_white_fraction)
                .map_err(|e| prefixed("optics", e)),
            OpticalModel::Lookup { .. } if o.pigment.white_fraction == o.ref_white_fraction => {
                Ok(base)
            }
            OpticalModel::Lookup { .. } => Err(Error::config(
                "optics.pigment.white_fraction",
                "pigment scaling needs a linear optical model; a lookup sweep is measured for one mix",
            )),
        }
    }

    pub fn sensor_model(&self) -> Result<SensorModel> {
        Ok(SensorModel {
            geometry: self.geometry,
            material: self.material,
            optics: self.optical_model()?,
            range_policy: self.optics.range_policy,
        })
    }

    pub fn ramp_spec(&self) -> ProfileSpec {
        ProfileSpec::Ramp {
            speed_mm_s: self.scenarios.ramp.speed_mm_s,
            max_indent_mm: self.scenarios.ramp.max_indent_mm,
        }
    }

    pub fn cyclic_spec(&self) -> ProfileSpec {
        let c = &self.scenarios.cyclic;
        ProfileSpec::Cyclic {
            speed_mm_s: c.speed_mm_s,
            max_indent_mm: c.max_indent_mm,
            cycles: c.cycles,
            dwell_s: c.dwell_s,
        }
    }

    pub fn hold_spec(&self) -> ProfileSpec {
        ProfileSpec::Hold {
            speed_mm_s: self.scenarios.grasp.speed_mm_s,
            levels: self.scenarios.grasp.levels.clone(),
        }
    }
}

/// Loads and validates a config file. `default` (the literal word) selects
/// the built-in defaults. Lookup sweeps given as CSV paths are read and
/// inlined, so echoing the result reproduces the same behaviour.
pub fn load_config(path: &Path) -> Result<Config> {
    if path.as_os_str() == "default" {
        return Ok(Config::default());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: Config = if text.trim().is_empty() {
        Config::default()
    } else {
        serde_json::from_str(&text)?
    };
    if let OpticsModelConfig::Lookup {
        points,
        csv: Some(csv),
    } = &mut cfg.optics.model
    {
        let file = path.parent().unwrap_or(Path::new(".")).join(&*csv);
        let pts = read_sweep(&file)?;
        *points = Some(pts.iter().map(|&(d, v)| [d, v]).collect());
        cfg.optics.model = OpticsModelConfig::Lookup {
            points: points.take(),
            csv: None,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        let cfg = Config::from_json("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(Config::from_json("{}").unwrap(), Config::default());
        assert_eq!(cfg.material.c10, -3.335e-5);
        assert_eq!(cfg.material.c01, 1.218e-2);
        assert_eq!(cfg.geometry.width_mm, 22.0);
        assert_eq!(cfg.geometry.gap0_mm, 2.0);
        assert_eq!(cfg.optical_model().unwrap(), OpticalModel::default());
    }

    #[test]
    fn kappa_violation_names_field() {
        let e = Config::from_json(r#"{"geometry": {"kappa": 1.5}}"#).unwrap_err();
        match e {
            Error::Config { field, .. } => assert_eq!(field, "geometry.kappa"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_noise_is_valid() {
        let cfg = Config::from_json(r#"{"noise_rms": 0}"#).unwrap();
        assert_eq!(cfg.noise_rms, 0.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            Config::from_json(r#"{"geometry": {"kapa": 0.3}}"#),
            Err(Error::ConfigParse(_))
        ));
        assert!(Config::from_json(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn thresholds_checked() {
        let e = Config::from_json(r#"{"detector": {"on_threshold": 0.01}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
    }

    #[test]
    fn echo_roundtrip() {
        let cfg = Config::from_json(
            r#"{"geometry": {"kappa": 0.5}, "optics": {"pigment": {"white_fraction": 1.0}}, "seed": 9}"#,
        )
        .unwrap();
        let again = Config::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.sensor_model().unwrap(), again.sensor_model().unwrap());
    }

    #[test]
    fn inline_lookup() {
        let cfg = Config::from_json(
            r#"{"optics": {"model": {"lookup": {"points": [[1.0, 0.1], [1.5, 0.9], [2.0, 2.0]]}}}}"#,
        )
        .unwrap();
        assert!(matches!(
            cfg.optical_model().unwrap(),
            OpticalModel::Lookup { .. }
        ));
        let scaled = Config::from_json(
            r#"{"optics": {"model": {"lookup": {"points": [[1.0, 0.1], [2.0, 2.0]]}},
                           "pigment": {"white_fraction": 0.5}}}"#,
        );
        assert!(scaled.is_err());
    }
}
