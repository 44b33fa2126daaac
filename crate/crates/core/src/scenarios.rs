//! Motion profiles, the seeded forward simulation and grasp-event detection.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::{axial_force, lateral_gap, DisplacementLag};
use crate::signal::{TimeSeries, Unit, DEFAULT_DT};
use crate::SensorModel;

/// One level of a hold profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldLevel {
    pub indent_mm: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    /// Single loading ramp from rest.
    Ramp { speed_mm_s: f64, max_indent_mm: f64 },
    /// Repeated load, dwell, unload, dwell.
    Cyclic {
        speed_mm_s: f64,
        max_indent_mm: f64,
        cycles: usize,
        dwell_s: f64,
    },
    /// Moves between levels at `speed_mm_s`, holding each for its duration.
    Hold {
        speed_mm_s: f64,
        levels: Vec<HoldLevel>,
    },
}

/// Piecewise-linear indentation over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    breakpoints: Vec<(f64, f64)>,
}

impl MotionProfile {
    /// `(time s, indent mm)` pairs with strictly increasing times, starting at rest.
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::Parameter(
                "a profile needs at least two breakpoints".into(),
            ));
        }
        if breakpoints[0].1 != 0.0 {
            return Err(Error::Parameter(
                "a profile must start at zero indentation".into(),
            ));
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Parameter(format!(
                    "breakpoint times must increase ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(p) = breakpoints
            .iter()
            .find(|p| !(p.1 >= 0.0) || !p.0.is_finite())
        {
            return Err(Error::Parameter(format!("invalid breakpoint {p:?}")));
        }
        Ok(Self { breakpoints })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0].0
    }

    pub fn duration(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1].0 - self.start()
    }

    fn segment(&self, t: f64) -> Option<usize> {
        let i = self.breakpoints.partition_point(|p| p.0 <= t);
        (i >= 1 && i < self.breakpoints.len()).then(|| i - 1)
    }

    pub fn indent_at(&self, t: f64) -> f64 {
        match self.segment(t) {
            Some(j) => {
                let ((t0, d0), (t1, d1)) = (self.breakpoints[j], self.breakpoints[j + 1]);
                d0 + (d1 - d0) * (t - t0) / (t1 - t0)
            }
            None if t < self.start() => self.breakpoints[0].1,
            None => self.breakpoints[self.breakpoints.len() - 1].1,
        }
    }

    /// Right-hand derivative of the indentation (mm/s); zero outside the profile.
    pub fn rate_at(&self, t: f64) -> f64 {
        match self.segment(t) {
            Some(j) => {
                let ((t0, d0), (t1, d1)) = (self.breakpoints[j], self.breakpoints[j + 1]);
                (d1 - d0) / (t1 - t0)
            }
            None => 0.0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be >= 0, got {v}")))
    }
}

pub fn make_profile(spec: &ProfileSpec) -> Result<MotionProfile> {
    let mut bp = vec![(0.0, 0.0)];
    match spec {
        ProfileSpec::Ramp {
            speed_mm_s,
            max_indent_mm,
        } => {
            positive("speed", *speed_mm_s)?;
            positive("max indent", *max_indent_mm)?;
            bp.push((max_indent_mm / speed_mm_s, *max_indent_mm));
        }
        ProfileSpec::Cyclic {
            speed_mm_s,
            max_indent_mm,
            cycles,
            dwell_s,
        } => {
            positive("speed", *speed_mm_s)?;
            positive("max indent", *max_indent_mm)?;
            non_negative("dwell", *dwell_s)?;
            if *cycles == 0 {
                return Err(Error::Parameter("cycles must be >= 1".into()));
            }
            let ramp = max_indent_mm / speed_mm_s;
            let period = 2.0 * (ramp + dwell_s);
            for c in 0..*cycles {
                let t = c as f64 * period;
                bp.push((t + ramp, *max_indent_mm));
                if *dwell_s > 0.0 {
                    bp.push((t + ramp + dwell_s, *max_indent_mm));
                }
                bp.push((t + 2.0 * ramp + dwell_s, 0.0));
                if *dwell_s > 0.0 {
                    bp.push((t + period, 0.0));
                }
            }
        }
        ProfileSpec::Hold { speed_mm_s, levels } => {
            positive("speed", *speed_mm_s)?;
            let (mut t, mut d) = (0.0, 0.0);
            for lvl in levels {
                non_negative("hold indent", lvl.indent_mm)?;
                non_negative("hold duration", lvl.duration_s)?;
                if lvl.indent_mm != d {
                    t += (lvl.indent_mm - d).abs() / speed_mm_s;
                    d = lvl.indent_mm;
                    bp.push((t, d));
                }
                if lvl.duration_s > 0.0 {
                    t += lvl.duration_s;
                    bp.push((t, d));
                }
            }
        }
    }
    MotionProfile::new(bp)
}

/// Synchronized traces of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub time: TimeSeries,
    pub indent: TimeSeries,
    pub force: TimeSeries,
    pub voltage: TimeSeries,
    /// `baseline - voltage`, with the noiseless rest voltage as baseline.
    pub output: TimeSeries,
    pub model: SensorModel,
    pub noise_rms: f64,
    pub seed: u64,
    /// Samples whose gap fell outside the optical band and were clamped.
    pub clamped_samples: usize,
}

impl SimRecord {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Sample index nearest to time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        (((t - self.time.t0) / self.time.dt).round().max(0.0) as usize).min(self.len() - 1)
    }
}

/// Runs the forward chain over `profile` at 1 kHz.
///
/// Per sample: indentation and right-hand rate from the profile, force from
/// the body model, gap from the (optionally lagged) indentation, voltage from
/// the optical model plus Gaussian noise. Noise is drawn from ChaCha20 seeded
/// with `seed` (`rand_chacha::ChaCha20Rng::seed_from_u64`) through
/// `rand_distr::Normal`, so records are reproducible bit-for-bit.
pub fn simulate(
    profile: &MotionProfile,
    model: &SensorModel,
    noise_rms: f64,
    seed: u64,
) -> Result<SimRecord> {
    if !(noise_rms.is_finite() && noise_rms >= 0.0) {
        return Err(Error::Parameter(format!(
            "noise_rms must be >= 0, got {noise_rms}"
        )));
    }
    let dt = DEFAULT_DT;
    let n = (profile.duration() / dt).round() as usize + 1;
    let t0 = profile.start();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_rms).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut lag = DisplacementLag::new(model.material.deadzone_delta0);

    let (mut time, mut indent, mut force, mut voltage, mut clean) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let mut clamped_samples = 0;
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        let d = profile.indent_at(t);
        let wrap = |e: Error| Error::Simulation {
            time_s: t,
            source: Box::new(e),
        };
        let f =
            axial_force(d, profile.rate_at(t), &model.geometry, &model.material).map_err(wrap)?;
        let seen = lag.step(d);
        let gap = lateral_gap(seen, &model.geometry).map_err(wrap)?.gap_mm;
        let reading = model
            .optics
            .voltage_at_gap_with(gap, model.range_policy)
            .map_err(wrap)?;
        clamped_samples += reading.clamped as usize;
        let v = if noise_rms > 0.0 {
            reading.volts + noise.sample(&mut rng)
        } else {
            reading.volts
        };
        time.push(t);
        indent.push(d);
        force.push(f);
        voltage.push(v);
        clean.push(reading.volts);
    }
    let baseline = clean[0];
    let output: Vec<f64> = voltage.iter().map(|v| baseline - v).collect();
    let series = |s: Vec<f64>, unit| TimeSeries::new(t0, dt, s, unit);
    Ok(SimRecord {
        time: series(time, Unit::Seconds)?,
        indent: series(indent, Unit::Millimetres)?,
        force: series(force, Unit::Newtons)?,
        voltage: series(voltage, Unit::Volts)?,
        output: series(output, Unit::Volts)?,
        model: model.clone(),
        noise_rms,
        seed,
        clamped_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspKind {
    Grasp,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraspEvent {
    pub kind: GraspKind,
    pub time_s: f64,
    pub output_level: f64,
}

/// Two-threshold (Schmitt) detector with a minimum hold time.
///
/// A grasp is reported once the output has stayed above `on_threshold` for
/// `min_hold_s`; a release once it has stayed below `off_threshold` for
/// `min_hold_s`. Events alternate and start with a grasp. The event time is
/// the sample at which the hold requirement is met. Callers smooth the output
/// beforehand.
pub fn detect_grasp(
    output: &TimeSeries,
    on_threshold: f64,
    off_threshold: f64,
    min_hold_s: f64,
) -> Result<Vec<GraspEvent>> {
    if !(on_threshold > off_threshold && off_threshold >= 0.0) {
        return Err(Error::Parameter(format!(
            "thresholds must satisfy on > off >= 0, got on = {on_threshold}, off = {off_threshold}"
        )));
    }
    non_negative("min_hold", min_hold_s)?;
    let mut events = Vec::new();
    let mut holding = false;
    let mut since: Option<usize> = None;
    let eps = 1e-9 * output.dt;
    for (i, &v) in output.samples.iter().enumerate() {
        let beyond = if holding {
            v < off_threshold
        } else {
            v > on_threshold
        };
        if !beyond {
            since = None;
            continue;
        }
        let start = *since.get_or_insert(i);
        if (i - start) as f64 * output.dt + eps >= min_hold_s {
            events.push(GraspEvent {
                kind: if holding {
                    GraspKind::Release
                } else {
                    GraspKind::Grasp
                },
                time_s: output.time_at(i),
                output_level: v,
            });
            holding = !holding;
            since = None;
        }
    }
    Ok(events)
}

/// Maximum of each complete cycle of `period_s` seconds.
pub fn cycle_peaks(series: &TimeSeries, period_s: f64) -> Result<Vec<f64>> {
    positive("cycle period", period_s)?;
    let per = (period_s / series.dt).round() as usize;
    if per == 0 {
        return Err(Error::Parameter("cycle shorter than one sample".into()));
    }
    Ok(series
        .samples
        .chunks_exact(per)
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect())
}
