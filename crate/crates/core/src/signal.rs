//! Uniformly sampled series and the characterization metrics computed on them.

use std::ops::Range;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acquisition rate of the logger (1 kHz).
pub const DEFAULT_DT: f64 = 1e-3;

/// Width of the smoothing filter applied to logged traces.
pub const FILTER_WINDOW: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "s")]
    Seconds,
    #[serde(rename = "V")]
    Volts,
    #[serde(rename = "N")]
    Newtons,
    #[serde(rename = "mm")]
    Millimetres,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
    pub unit: Unit,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>, unit: Unit) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Parameter(format!(
                "sample period must be > 0, got {dt}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::Data("time series must not be empty".into()));
        }
        Ok(Self {
            t0,
            dt,
            samples,
            unit,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_at(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn max(&self) -> f64 {
        self.samples
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sub-series over a sample index range, keeping the time axis.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::Parameter(format!(
                "slice {range:?} invalid for a series of {} samples",
                self.len()
            )));
        }
        Ok(Self {
            t0: self.time_at(range.start),
            dt: self.dt,
            samples: self.samples[range].to_vec(),
            unit: self.unit,
        })
    }
}

/// Centered moving average of odd width `k`.
///
/// Near the ends the window shrinks symmetrically, so sample `i` averages
/// `2·min(k/2, i, n-1-i) + 1` points and the output keeps the input length.
pub fn moving_average(ts: &TimeSeries, k: usize) -> Result<TimeSeries> {
    let n = ts.len();
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "window must be odd and >= 1, got {k}"
        )));
    }
    if k > n {
        return Err(Error::Parameter(format!(
            "window {k} longer than the series ({n} samples)"
        )));
    }
    let half = k / 2;
    let x = &ts.samples;
    let out = (0..n)
        .map(|i| {
            let r = half.min(i).min(n - 1 - i);
            let w = &x[i - r..=i + r];
            let (lo, hi) = w
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            // rounding in the sum must not leave the window's range
            (w.iter().sum::<f64>() / w.len() as f64).clamp(lo, hi)
        })
        .collect();
    Ok(TimeSeries {
        samples: out,
        ..ts.clone()
    })
}

/// Module output convention: `baseline - v`, so the signal rises with force.
/// The baseline defaults to the first sample.
pub fn invert_output(ts: &TimeSeries, baseline: Option<f64>) -> Result<TimeSeries> {
    if ts.unit != Unit::Volts {
        return Err(Error::Data(format!(
            "expected a voltage series, got {:?}",
            ts.unit
        )));
    }
    let Some(&first) = ts.samples.first() else {
        return Err(Error::Data("cannot invert an empty series".into()));
    };
    let base = baseline.unwrap_or(first);
    Ok(TimeSeries {
        samples: ts.samples.iter().map(|v| base - v).collect(),
        ..ts.clone()
    })
}

/// Delay (s) of `signal` relative to `reference`, positive when `signal` trails.
///
/// Both series are mean-removed, then every lag in `[-n/2, n/2]` is scored by
/// the Pearson correlation of the overlapping samples. The highest score wins;
/// ties go to the smaller `|lag|`.
pub fn phase_lag(reference: &TimeSeries, signal: &TimeSeries) -> Result<f64> {
    if ((reference.dt - signal.dt) / reference.dt).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "sample periods differ ({} vs {})",
            reference.dt, signal.dt
        )));
    }
    if reference.len() != signal.len() || (reference.t0 - signal.t0).abs() > 0.5 * reference.dt {
        return Err(Error::Data("series must cover the same samples".into()));
    }
    let n = reference.len();
    if n < 3 {
        return Err(Error::InsufficientData("need at least 3 samples".into()));
    }
    let x = centered(&reference.samples, "reference")?;
    let y = centered(&signal.samples, "signal")?;
    let cross = cross_sums(&x, &y);

    let prefix = |v: &[f64], f: fn(f64) -> f64| {
        let mut p = Vec::with_capacity(v.len() + 1);
        p.push(0.0);
        let mut acc = 0.0;
        for &a in v {
            acc += f(a);
            p.push(acc);
        }
        p
    };
    let (px, px2) = (prefix(&x, |a| a), prefix(&x, |a| a * a));
    let (py, py2) = (prefix(&y, |a| a), prefix(&y, |a| a * a));
    let energy = px2[n].min(py2[n]);

    let max_lag = n / 2;
    let score = |k: isize| -> Option<f64> {
        let m = n - k.unsigned_abs();
        let (xs, ys) = if k >= 0 {
            (0..m, k as usize..n)
        } else {
            ((-k) as usize..n, 0..m)
        };
        let mf = m as f64;
        let sx = px[xs.end] - px[xs.start];
        let sy = py[ys.end] - py[ys.start];
        let vx = px2[xs.end] - px2[xs.start] - sx * sx / mf;
        let vy = py2[ys.end] - py2[ys.start] - sy * sy / mf;
        if vx <= 1e-12 * energy || vy <= 1e-12 * energy {
            return None;
        }
        let sxy = cross(k);
        Some((sxy - sx * sy / mf) / (vx * vy).sqrt())
    };

    let mut best_lag = 0isize;
    let mut best = score(0).unwrap_or(f64::NEG_INFINITY);
    for step in 1..=max_lag as isize {
        for k in [step, -step] {
            if let Some(r) = score(k) {
                if r > best + 1e-12 {
                    best = r;
                    best_lag = k;
                }
            }
        }
    }
    Ok(best_lag as f64 * reference.dt)
}

fn centered(v: &[f64], what: &str) -> Result<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let out: Vec<f64> = v.iter().map(|a| a - mean).collect();
    if out.iter().all(|a| a.abs() <= 1e-15 * mean.abs().max(1.0)) {
        return Err(Error::UndefinedCorrelation(format!(
            "{what} has zero variance"
        )));
    }
    Ok(out)
}

/// Returns `k ↦ Σ_i x[i]·y[i+k]` for `|k| < n`, computed with one FFT round trip.
fn cross_sums(x: &[f64], y: &[f64]) -> impl Fn(isize) -> f64 {
    let n = x.len();
    let size = (2 * n - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| {
        let mut b: Vec<Complex<f64>> = v.iter().map(|&a| Complex::new(a, 0.0)).collect();
        b.resize(size, Complex::new(0.0, 0.0));
        b
    };
    let (mut fx, mut fy) = (pad(x), pad(y));
    fwd.process(&mut fx);
    fwd.process(&mut fy);
    let mut c: Vec<Complex<f64>> = fx.iter().zip(&fy).map(|(a, b)| a.conj() * b).collect();
    inv.process(&mut c);
    let scale = size as f64;
    let c: Vec<f64> = c.into_iter().map(|z| z.re / scale).collect();
    move |k: isize| c[k.rem_euclid(size as isize) as usize]
}

/// Largest loading/unloading output separation at equal force, as a fraction
/// of the record's full-scale output.
///
/// Samples `0..=split` form the loading branch and `split..` the unloading
/// branch. Each branch is interpolated linearly in force and compared on a
/// 1001-point grid spanning the forces both branches reach.
pub fn hysteresis_metric(force: &TimeSeries, output: &TimeSeries, split: usize) -> Result<f64> {
    let n = force.len();
    if output.len() != n {
        return Err(Error::Data("force and output lengths differ".into()));
    }
    if split == 0 || split >= n - 1 {
        return Err(Error::Parameter(format!(
            "split index {split} must leave two samples in each branch"
        )));
    }
    let branch = |r: Range<usize>| {
        let mut b: Vec<(f64, f64)> = r.map(|i| (force.samples[i], output.samples[i])).collect();
        b.sort_by(|p, q| p.0.total_cmp(&q.0));
        b
    };
    let load = branch(0..split + 1);
    let unload = branch(split..n);
    let lo = load[0].0.max(unload[0].0);
    let hi = load[load.len() - 1].0.min(unload[unload.len() - 1].0);
    if !(hi > lo) {
        return Err(Error::Data(
            "loading and unloading force ranges do not overlap".into(),
        ));
    }
    let full_scale = output.max() - output.min();
    if !(full_scale > 0.0) {
        return Err(Error::Data("output has zero full scale".into()));
    }
    const GRID: usize = 1001;
    let worst = (0..GRID)
        .map(|i| {
            let f = lo + (hi - lo) * i as f64 / (GRID - 1) as f64;
            (interp_sorted(&load, f) - interp_sorted(&unload, f)).abs()
        })
        .fold(0.0, f64::max);
    Ok(worst / full_scale)
}

fn interp_sorted(pts: &[(f64, f64)], x: f64) -> f64 {
    let i = pts.partition_point(|p| p.0 <= x).clamp(1, pts.len() - 1);
    let ((x0, y0), (x1, y1)) = (pts[i - 1], pts[i]);
    if x1 > x0 {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    } else {
        0.5 * (y0 + y1)
    }
}

/// Least-squares slope of output against force (V/N). Pass the loading phase.
pub fn sensitivity(force: &TimeSeries, output: &TimeSeries) -> Result<f64> {
    if force.len() != output.len() {
        return Err(Error::Data("force and output lengths differ".into()));
    }
    let n = force.len() as f64;
    let mf = force.samples.iter().sum::<f64>() / n;
    let mo = output.samples.iter().sum::<f64>() / n;
    let (sff, sfo) = force
        .samples
        .iter()
        .zip(&output.samples)
        .fold((0.0, 0.0), |(a, b), (f, o)| {
            (a + (f - mf).powi(2), b + (f - mf) * (o - mo))
        });
    if sff <= 0.0 {
        return Err(Error::Data("force has zero variance".into()));
    }
    Ok(sfo / sff)
}

/// `20·log10(full_scale / noise_rms)` in dB.
pub fn dynamic_range(full_scale: f64, noise_rms: f64) -> Result<f64> {
    if !(full_scale > 0.0 && noise_rms > 0.0) {
        return Err(Error::Domain(format!(
            "full scale and noise must be > 0, got {full_scale} and {noise_rms}"
        )));
    }
    Ok(20.0 * (full_scale / noise_rms).log10())
}

/// Coefficient of variation of per-cycle peaks (population standard deviation).
pub fn repeatability(peaks: &[f64]) -> Result<f64> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 cycles, got {}",
            peaks.len()
        )));
    }
    let n = peaks.len() as f64;
    let mean = peaks.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::Data(format!("mean peak must be > 0, got {mean}")));
    }
    let var = peaks.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ts(samples: Vec<f64>, unit: Unit) -> TimeSeries {
        TimeSeries::new(0.0, DEFAULT_DT, samples, unit).unwrap()
    }

    #[test]
    fn moving_average_constant_and_impulse() {
        let c = ts(vec![0.37; 50], Unit::Volts);
        assert_eq!(moving_average(&c, 9).unwrap().samples, c.samples);

        let mut imp = vec![0.0; 41];
        imp[20] = 1.0;
        let out = moving_average(&ts(imp, Unit::Volts), 9).unwrap().samples;
        for (i, v) in out.iter().enumerate() {
            if (16..=24).contains(&i) {
                assert_relative_eq!(*v, 1.0 / 9.0, epsilon = 1e-15);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn moving_average_preserves_ramp_interior() {
        let x: Vec<f64> = (0..100).map(|i| 0.5 + 0.03 * i as f64).collect();
        let out = moving_average(&ts(x.clone(), Unit::Millimetres), 9).unwrap();
        // symmetric shrunken windows also preserve the edges of an affine signal
        for (a, b) in out.samples.iter().zip(&x) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn moving_average_edges_shrink() {
        let x = vec![9.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let out = moving_average(&ts(x, Unit::Volts), 5).unwrap().samples;
        assert_eq!(out[0], 9.0);
        assert_relative_eq!(out[1], 3.0);
        assert_relative_eq!(out[2], 9.0 / 5.0);
    }

    #[test]
    fn moving_average_rejects_bad_windows() {
        let s = ts(vec![1.0; 5], Unit::Volts);
        assert!(matches!(moving_average(&s, 4), Err(Error::Parameter(_))));
        assert!(matches!(moving_average(&s, 7), Err(Error::Parameter(_))));
        assert!(matches!(moving_average(&s, 0), Err(Error::Parameter(_))));
        assert!(moving_average(&s, 5).is_ok());
    }

    #[test]
    fn invert_examples() {
        let v = ts(vec![1.9873, 1.4461], Unit::Volts);
        let out = invert_output(&v, None).unwrap();
        assert_eq!(out.samples[0], 0.0);
        assert_relative_eq!(out.samples[1], 0.5412, epsilon = 1e-12);
        let back = invert_output(&out, Some(1.9873)).unwrap();
        for (a, b) in back.samples.iter().zip(&v.samples) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        assert!(invert_output(&ts(vec![1.0], Unit::Newtons), None).is_err());
    }

    fn wiggle(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 * 1e-3;
                (7.0 * t).sin() + 0.4 * (23.0 * t).cos() + 0.3 * t
            })
            .collect()
    }

    fn shift(x: &[f64], k: usize) -> Vec<f64> {
        let mut y = vec![x[0]; k];
        y.extend_from_slice(&x[..x.len() - k]);
        y
    }

    #[test]
    fn phase_lag_self_and_delay() {
        let x = wiggle(2000);
        let r = ts(x.clone(), Unit::Newtons);
        assert_eq!(phase_lag(&r, &r).unwrap(), 0.0);
        let s = ts(shift(&x, 62), Unit::Volts);
        assert_relative_eq!(phase_lag(&r, &s).unwrap(), 0.062, epsilon = 1e-12);
        // and the reverse direction is a lead
        assert_relative_eq!(phase_lag(&s, &r).unwrap(), -0.062, epsilon = 1e-12);
    }

    #[test]
    fn phase_lag_triangle_delay() {
        // one load/unload cycle with dwell, delayed by 60 samples
        let mut x = Vec::new();
        for i in 0..3000 {
            x.push(i as f64 * 1e-3);
        }
        x.extend(std::iter::repeat_n(3.0, 1000));
        for i in 0..3000 {
            x.push(3.0 - i as f64 * 1e-3);
        }
        x.extend(std::iter::repeat_n(0.0, 1000));
        let r = ts(x.clone(), Unit::Millimetres);
        let s = ts(shift(&x, 60), Unit::Millimetres);
        assert_relative_eq!(phase_lag(&r, &s).unwrap(), 0.060, epsilon = 1e-12);
    }

    #[test]
    fn phase_lag_errors() {
        let c = ts(vec![1.0; 100], Unit::Volts);
        let x = ts(wiggle(100), Unit::Volts);
        assert!(matches!(
            phase_lag(&c, &x),
            Err(Error::UndefinedCorrelation(_))
        ));
        let other_dt = TimeSeries::new(0.0, 2e-3, wiggle(100), Unit::Volts).unwrap();
        assert!(matches!(phase_lag(&x, &other_dt), Err(Error::Parameter(_))));
    }

    #[test]
    fn hysteresis_identical_branches_is_zero() {
        let up: Vec<f64> = (0..=100).map(|i| i as f64 * 0.07).collect();
        let mut f = up.clone();
        f.extend(up.iter().rev().skip(1));
        let o: Vec<f64> = f.iter().map(|x| 0.07 * x + 0.001 * x * x).collect();
        let h = hysteresis_metric(&ts(f, Unit::Newtons), &ts(o, Unit::Volts), 100).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn hysteresis_offset_branches() {
        let up: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let mut f = up.clone();
        f.extend(up.iter().rev().skip(1));
        let o: Vec<f64> = f
            .iter()
            .enumerate()
            .map(|(i, x)| 0.1 * x + if i > 100 { 0.05 } else { 0.0 })
            .collect();
        let h = hysteresis_metric(&ts(f, Unit::Newtons), &ts(o, Unit::Volts), 100).unwrap();
        assert!(h > 0.0);
        assert!((h - 0.05 / 1.04).abs() < 1e-9);
    }

    #[test]
    fn hysteresis_needs_overlap() {
        let f = ts(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], Unit::Newtons);
        let o = ts(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], Unit::Volts);
        assert!(matches!(hysteresis_metric(&f, &o, 2), Err(Error::Data(_))));
    }

    #[test]
    fn sensitivity_examples() {
        let f: Vec<f64> = (0..50).map(|i| i as f64 * 0.15).collect();
        let o: Vec<f64> = f.iter().map(|x| 0.07 * x).collect();
        let s = sensitivity(&ts(f.clone(), Unit::Newtons), &ts(o, Unit::Volts)).unwrap();
        assert!((s - 0.07).abs() < 1e-12);
        let flat = sensitivity(&ts(f, Unit::Newtons), &ts(vec![0.3; 50], Unit::Volts)).unwrap();
        assert!(flat.abs() < 1e-15);
        assert!(sensitivity(
            &ts(vec![1.0; 3], Unit::Newtons),
            &ts(vec![1.0, 2.0, 3.0], Unit::Volts)
        )
        .is_err());
    }

    #[test]
    fn dynamic_range_examples() {
        assert_eq!(dynamic_range(1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(dynamic_range(10.0, 1.0).unwrap(), 20.0);
        assert_relative_eq!(
            dynamic_range(0.5412, 0.0144).unwrap(),
            31.50,
            epsilon = 0.005
        );
        assert!(dynamic_range(0.0, 1.0).is_err());
        assert!(dynamic_range(1.0, -1.0).is_err());
    }

    #[test]
    fn repeatability_examples() {
        assert_eq!(repeatability(&[0.5, 0.5, 0.5]).unwrap(), 0.0);
        assert_relative_eq!(
            repeatability(&[1.0, 1.01]).unwrap(),
            0.004975,
            epsilon = 1e-6
        );
        assert!(repeatability(&[1.0]).is_err());
        assert!(repeatability(&[-1.0, 0.5]).is_err());
    }

    proptest! {
        #[test]
        fn moving_average_bounded(xs in prop::collection::vec(-10.0f64..10.0, 9..200)) {
            let s = ts(xs.clone(), Unit::Volts);
            let out = moving_average(&s, 9).unwrap();
            prop_assert_eq!(out.len(), xs.len());
            let (lo, hi) = (s.min(), s.max());
            prop_assert!(out.samples.iter().all(|v| *v >= lo && *v <= hi));
        }

        #[test]
        fn invert_involution(xs in prop::collection::vec(-5.0f64..5.0, 1..50), base in -3.0f64..3.0) {
            let s = ts(xs.clone(), Unit::Volts);
            let twice = invert_output(&invert_output(&s, Some(base)).unwrap(), Some(base)).unwrap();
            for (a, b) in twice.samples.iter().zip(&xs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn phase_lag_recovers_shift(k in 0usize..400) {
            let x = wiggle(1200);
            let r = ts(x.clone(), Unit::Volts);
            let s = ts(if k == 0 { x.clone() } else { shift(&x, k) }, Unit::Volts);
            prop_assert!((phase_lag(&r, &s).unwrap() - k as f64 * 1e-3).abs() < 1e-12);
        }

        #[test]
        fn sensitivity_affine(a in -2.0f64..2.0, b in -1.0f64..1.0) {
            let f: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin() * 4.0 + 4.0).collect();
            let o: Vec<f64> = f.iter().map(|x| a * x + b).collect();
            let s = sensitivity(&ts(f, Unit::Newtons), &ts(o, Unit::Volts)).unwrap();
            prop_assert!((s - a).abs() < 1e-9);
        }
    }
}
