//! Photoreflector model: a strictly increasing distance → voltage map and its
//! inverse, plus reflectance scaling for the silicone pigment mix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// What to do with a gap outside the model's validity band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangePolicy {
    #[default]
    Error,
    Clamp,
}

/// A voltage evaluated under a [`RangePolicy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub volts: f64,
    /// The gap lay outside the band and was clamped to its edge.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpticalModel {
    /// `V = a·x + b`, valid on `[x_min, x_max]`.
    Linear {
        a: f64,
        b: f64,
        x_min: f64,
        x_max: f64,
    },
    /// Measured sweep, interpolated piecewise-linearly.
    Lookup {
        distance_mm: Vec<f64>,
        voltage_v: Vec<f64>,
    },
}

impl Default for OpticalModel {
    /// Linear fit for the 75 % white / 25 % black silicone over 1–2 mm.
    fn default() -> Self {
        OpticalModel::Linear {
            a: 1.9374,
            b: -1.8875,
            x_min: 1.0,
            x_max: 2.0,
        }
    }
}

impl OpticalModel {
    pub fn linear(a: f64, b: f64, x_min: f64, x_max: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::config("a", format!("slope must be > 0, got {a}")));
        }
        if !b.is_finite() {
            return Err(Error::config(
                "b",
                format!("offset must be finite, got {b}"),
            ));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::config(
                "x_min",
                format!("valid range must satisfy x_min < x_max, got [{x_min}, {x_max}]"),
            ));
        }
        Ok(OpticalModel::Linear { a, b, x_min, x_max })
    }

    /// Builds a lookup model from `(distance mm, voltage V)` pairs.
    pub fn lookup(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "lookup needs at least 2 points, got {}",
                points.len()
            )));
        }
        for w in points.windows(2) {
            let ((d0, v0), (d1, v1)) = (w[0], w[1]);
            if !(d1 > d0) {
                return Err(Error::Data(format!(
                    "lookup distances must be strictly increasing ({d0} then {d1})"
                )));
            }
            if !(v1 > v0) {
                return Err(Error::Data(format!(
                    "lookup voltages must be strictly increasing ({v0} then {v1})"
                )));
            }
        }
        if points.iter().any(|(d, v)| !d.is_finite() || !v.is_finite()) {
            return Err(Error::Data("lookup points must be finite".into()));
        }
        Ok(OpticalModel::Lookup {
            distance_mm: points.iter().map(|p| p.0).collect(),
            voltage_v: points.iter().map(|p| p.1).collect(),
        })
    }

    /// Distance span over which the model is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            OpticalModel::Linear { x_min, x_max, .. } => (*x_min, *x_max),
            OpticalModel::Lookup { distance_mm, .. } => {
                (distance_mm[0], distance_mm[distance_mm.len() - 1])
            }
        }
    }

    /// Voltage span produced over [`domain`](Self::domain).
    pub fn image(&self) -> (f64, f64) {
        let (lo, hi) = self.domain();
        (self.eval(lo), self.eval(hi))
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            OpticalModel::Linear { a, b, .. } => a * x + b,
            OpticalModel::Lookup {
                distance_mm,
                voltage_v,
            } => {
                let n = distance_mm.len();
                let i = distance_mm.partition_point(|&d| d <= x).clamp(1, n - 1);
                let (x0, x1) = (distance_mm[i - 1], distance_mm[i]);
                let (v0, v1) = (voltage_v[i - 1], voltage_v[i]);
                v0 + (v1 - v0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Voltage at optical gap `x`; out-of-band gaps are a range error.
    pub fn voltage_at_gap(&self, x: f64) -> Result<f64> {
        self.voltage_at_gap_with(x, RangePolicy::Error)
            .map(|r| r.volts)
    }

    pub fn voltage_at_gap_with(&self, x: f64, policy: RangePolicy) -> Result<Reading> {
        let (lo, hi) = self.domain();
        if x.is_nan() {
            return Err(Error::Range("gap is NaN".into()));
        }
        if (lo..=hi).contains(&x) {
            return Ok(Reading {
                volts: self.eval(x),
                clamped: false,
            });
        }
        match policy {
            RangePolicy::Error => Err(Error::Range(format!(
                "gap {x} mm outside the optical model range [{lo}, {hi}] mm"
            ))),
            RangePolicy::Clamp => Ok(Reading {
                volts: self.eval(x.clamp(lo, hi)),
                clamped: true,
            }),
        }
    }

    /// Gap that produces voltage `v`. Voltages within rounding of the image
    /// ends map to the domain ends.
    pub fn gap_at_voltage(&self, v: f64) -> Result<f64> {
        let (vlo, vhi) = self.image();
        let tol = 1e-12 * vlo.abs().max(vhi.abs()).max(1.0);
        if !(vlo - tol..=vhi + tol).contains(&v) {
            return Err(Error::Range(format!(
                "voltage {v} V outside the optical model image [{vlo}, {vhi}] V"
            )));
        }
        let v = v.clamp(vlo, vhi);
        match self {
            OpticalModel::Linear { a, b, .. } => {
                let (lo, hi) = self.domain();
                Ok(((v - b) / a).clamp(lo, hi))
            }
            OpticalModel::Lookup { .. } => {
                let (lo, hi) = self.domain();
                Ok(bisect(|x| self.eval(x) - v, lo, hi, 1e-12))
            }
        }
    }

    /// Slope of a linear model.
    pub fn slope(&self) -> Option<f64> {
        match self {
            OpticalModel::Linear { a, .. } => Some(*a),
            OpticalModel::Lookup { .. } => None,
        }
    }
}

/// White/black pigment proportions of the silicone facing the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PigmentMix {
    pub white_fraction: f64,
    /// Relative reflectance of fully black silicone.
    pub rho_black: f64,
}

impl Default for PigmentMix {
    fn default() -> Self {
        Self {
            white_fraction: 0.75,
            rho_black: 0.25,
        }
    }
}

impl PigmentMix {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.white_fraction) {
            return Err(Error::config(
                "white_fraction",
                format!("must be in [0, 1], got {}", self.white_fraction),
            ));
        }
        if !(self.rho_black > 0.0 && self.rho_black < 1.0) {
            return Err(Error::config(
                "rho_black",
                format!("must be in (0, 1), got {}", self.rho_black),
            ));
        }
        Ok(())
    }

    /// Relative reflectance, linear between black and white.
    pub fn reflectance(&self) -> f64 {
        reflectance(self.white_fraction, self.rho_black)
    }
}

fn reflectance(white_fraction: f64, rho_black: f64) -> f64 {
    rho_black + white_fraction * (1.0 - rho_black)
}

/// Rescales a linear model calibrated at `ref_white_fraction` to another mix.
///
/// The slope scales with relative reflectance; the voltage at the far end of
/// the band (`x_max`) is held fixed.
pub fn scale_by_pigment(
    base: &OpticalModel,
    mix: &PigmentMix,
    ref_white_fraction: f64,
) -> Result<OpticalModel> {
    mix.validate()?;
    let OpticalModel::Linear { a, b, x_min, x_max } = *base else {
        return Err(Error::Parameter(
            "pigment scaling applies to linear optical models only".into(),
        ));
    };
    if !(0.0..=1.0).contains(&ref_white_fraction) {
        return Err(Error::config(
            "ref_white_fraction",
            format!("must be in [0, 1], got {ref_white_fraction}"),
        ));
    }
    let ratio = mix.reflectance() / reflectance(ref_white_fraction, mix.rho_black);
    let a2 = a * ratio;
    let anchor = a * x_max + b;
    Ok(OpticalModel::Linear {
        a: a2,
        b: anchor - a2 * x_max,
        x_min,
        x_max,
    })
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, in [0, 1].
    pub r2: f64,
}

/// Fits `voltage = slope·distance + intercept` to the samples whose distance
/// lies in `range` (inclusive).
pub fn fit_linear(samples: &[(f64, f64)], range: (f64, f64)) -> Result<LinearFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(x, _)| *x >= range.0 && *x <= range.1)
        .collect();
    let n = pts.len() as f64;
    if pts.is_empty() {
        return Err(Error::InsufficientData(
            "no samples inside the fit range".into(),
        ));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) * n {
        return Err(Error::InsufficientData(
            "fewer than 2 distinct distances inside the fit range".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_line() -> OpticalModel {
        OpticalModel::default()
    }

    #[test]
    fn linear_reference_voltages() {
        let m = reference_line();
        assert_relative_eq!(m.voltage_at_gap(2.0).unwrap(), 1.9873, epsilon = 1e-12);
        assert_relative_eq!(m.voltage_at_gap(1.0).unwrap(), 0.0499, epsilon = 1e-12);
        let m_wide = OpticalModel::linear(1.9374, -1.8875, 0.5, 2.0).unwrap();
        assert!(m_wide.voltage_at_gap(1.8875 / 1.9374).unwrap().abs() < 1e-15);
    }

    #[test]
    fn inverse_reference_gaps() {
        let m = reference_line();
        assert_relative_eq!(m.gap_at_voltage(1.9873).unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(m.gap_at_voltage(0.0499).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            m.gap_at_voltage(1.4461).unwrap(),
            (1.4461 + 1.8875) / 1.9374,
            epsilon = 1e-12
        );
        assert_relative_eq!(m.gap_at_voltage(1.4461).unwrap(), 1.7206, epsilon = 1e-4);
    }

    #[test]
    fn out_of_range_policy() {
        let m = reference_line();
        assert!(matches!(m.voltage_at_gap(2.1), Err(Error::Range(_))));
        assert!(matches!(m.voltage_at_gap(0.9), Err(Error::Range(_))));
        let r = m.voltage_at_gap_with(2.1, RangePolicy::Clamp).unwrap();
        assert!(r.clamped);
        assert_relative_eq!(r.volts, 1.9873, epsilon = 1e-12);
        assert!(
            !m.voltage_at_gap_with(1.5, RangePolicy::Clamp)
                .unwrap()
                .clamped
        );
        assert!(matches!(m.gap_at_voltage(2.5), Err(Error::Range(_))));
    }

    #[test]
    fn lookup_rejects_non_monotone() {
        assert!(OpticalModel::lookup(&[(1.0, 0.1), (1.0, 0.2)]).is_err());
        assert!(OpticalModel::lookup(&[(1.0, 0.3), (2.0, 0.2)]).is_err());
        assert!(OpticalModel::lookup(&[(1.0, 0.3)]).is_err());
    }

    #[test]
    fn lookup_roundtrip_and_interpolation() {
        let pts: Vec<(f64, f64)> = (0..=10)
            .map(|i| {
                let x = 0.5 + 0.25 * i as f64;
                (x, 3.0 * (1.0 - (-x).exp()))
            })
            .collect();
        let m = OpticalModel::lookup(&pts).unwrap();
        assert_relative_eq!(m.voltage_at_gap(0.5).unwrap(), pts[0].1);
        let mid = m.voltage_at_gap(0.625).unwrap();
        assert_relative_eq!(mid, 0.5 * (pts[0].1 + pts[1].1), epsilon = 1e-12);
        let (lo, hi) = m.domain();
        for i in 0..100 {
            let x = lo + (hi - lo) * i as f64 / 99.0;
            let v = m.voltage_at_gap(x).unwrap();
            let back = m.gap_at_voltage(v).unwrap();
            assert!((m.voltage_at_gap(back).unwrap() - v).abs() < 1e-9);
            assert!((back - x).abs() < 1e-9);
        }
    }

    #[test]
    fn pigment_scaling_examples() {
        let base = reference_line();
        let same = scale_by_pigment(&base, &PigmentMix::default(), 0.75).unwrap();
        assert_relative_eq!(same.slope().unwrap(), 1.9374, epsilon = 1e-12);
        assert_relative_eq!(
            same.voltage_at_gap(1.3).unwrap(),
            base.voltage_at_gap(1.3).unwrap(),
            epsilon = 1e-12
        );
        let white = PigmentMix {
            white_fraction: 1.0,
            rho_black: 0.25,
        };
        let black = PigmentMix {
            white_fraction: 0.0,
            ..white
        };
        let a_white = scale_by_pigment(&base, &white, 0.75)
            .unwrap()
            .slope()
            .unwrap();
        let a_black = scale_by_pigment(&base, &black, 0.75)
            .unwrap()
            .slope()
            .unwrap();
        assert_relative_eq!(a_white, 1.9374 / 0.8125, epsilon = 1e-12);
        assert_relative_eq!(a_white, 2.3845, epsilon = 1e-4);
        assert_relative_eq!(a_black, 0.5961, epsilon = 1e-4);
        // far-end anchor
        let scaled = scale_by_pigment(&base, &white, 0.75).unwrap();
        assert_relative_eq!(scaled.voltage_at_gap(2.0).unwrap(), 1.9873, epsilon = 1e-12);
    }

    #[test]
    fn pigment_scaling_needs_linear() {
        let lk = OpticalModel::lookup(&[(1.0, 0.1), (2.0, 0.2)]).unwrap();
        assert!(scale_by_pigment(&lk, &PigmentMix::default(), 0.75).is_err());
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 1.25, 1.5, 1.75, 2.0];
        let s: Vec<_> = xs.iter().map(|&x| (x, 1.9374 * x - 1.8875)).collect();
        let f = fit_linear(&s, (1.0, 2.0)).unwrap();
        assert!((f.slope - 1.9374).abs() < 1e-9);
        assert!((f.intercept + 1.8875).abs() < 1e-9);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn fit_ignores_out_of_range_and_detects_degenerate() {
        let s = vec![(1.5, 1.0), (1.5, 1.2), (1.5, 0.9), (3.0, 9.0)];
        assert!(matches!(
            fit_linear(&s, (1.0, 2.0)),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_linear(&[(5.0, 1.0)], (1.0, 2.0)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fit_symmetric_noise_keeps_slope() {
        let eps = 0.01;
        let s = vec![
            (1.0, 0.0499 + eps),
            (1.0, 0.0499 - eps),
            (2.0, 1.9873 + eps),
            (2.0, 1.9873 - eps),
        ];
        let f = fit_linear(&s, (1.0, 2.0)).unwrap();
        assert_relative_eq!(f.slope, 1.9374, epsilon = 1e-12);
        assert!(f.r2 < 1.0);
    }

    proptest! {
        #[test]
        fn linear_roundtrip(x in 1.0f64..=2.0) {
            let m = reference_line();
            let v = m.voltage_at_gap(x).unwrap();
            prop_assert!((m.gap_at_voltage(v).unwrap() - x).abs() < 1e-9);
        }

        #[test]
        fn pigment_scales_differences(w in 0.0f64..=1.0, rho in 0.01f64..0.99,
                                      x1 in 1.0f64..2.0, dx in 0.001f64..0.5) {
            let x2 = (x1 + dx).min(2.0);
            let base = reference_line();
            let mix = PigmentMix { white_fraction: w, rho_black: rho };
            let s = scale_by_pigment(&base, &mix, 0.75).unwrap();
            let ratio = reflectance(w, rho) / reflectance(0.75, rho);
            let d0 = base.voltage_at_gap(x2).unwrap() - base.voltage_at_gap(x1).unwrap();
            let d1 = s.voltage_at_gap(x2).unwrap() - s.voltage_at_gap(x1).unwrap();
            prop_assert!((d1 - ratio * d0).abs() < 1e-12);
            prop_assert!(s.voltage_at_gap(x2).unwrap() >= s.voltage_at_gap(x1).unwrap());
        }

        #[test]
        fn fit_recovers_generated(a in 0.1f64..5.0, b in -3.0f64..3.0) {
            let s: Vec<_> = (0..20).map(|i| {
                let x = 1.0 + i as f64 / 19.0;
                (x, a * x + b)
            }).collect();
            let f = fit_linear(&s, (1.0, 2.0)).unwrap();
            prop_assert!((f.slope - a).abs() < 1e-9);
            prop_assert!((f.intercept - b).abs() < 1e-9);
        }
    }
}
