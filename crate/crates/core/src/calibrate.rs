//! Calibration curves (output vs force) and pigment selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;
use crate::optics::{fit_linear, LinearFit};

/// Polynomial output-vs-force relation fitted over a force interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    /// Ascending powers of force: `V = c0 + c1·F + c2·F² + …`.
    pub coefficients: Vec<f64>,
    /// Force interval `[F_min, F_max]` covered by the fit (N).
    pub domain: [f64; 2],
    pub residual_rms: f64,
    /// False when the fitted polynomial is not strictly monotone over `domain`.
    pub monotone: bool,
}

impl CalibrationCurve {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, force: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * force + c)
    }

    /// Output voltages at the two ends of the domain, ordered low to high.
    pub fn image(&self) -> (f64, f64) {
        let (a, b) = (self.eval(self.domain[0]), self.eval(self.domain[1]));
        (a.min(b), a.max(b))
    }

    /// Force whose predicted output is `v`, by bisection over the domain.
    pub fn invert(&self, v: f64) -> Result<f64> {
        if !self.monotone {
            return Err(Error::Parameter(
                "calibration curve is not monotone over its domain".into(),
            ));
        }
        let (lo, hi) = self.image();
        if !(lo..=hi).contains(&v) {
            return Err(Error::Range(format!(
                "output {v} V outside the calibration image [{lo}, {hi}] V"
            )));
        }
        Ok(bisect(
            |f| self.eval(f) - v,
            self.domain[0],
            self.domain[1],
            1e-9,
        ))
    }
}

/// Least-squares polynomial of the given degree through `(force N, output V)` pairs.
pub fn fit_force_voltage(pairs: &[(f64, f64)], degree: usize) -> Result<CalibrationCurve> {
    if degree < 1 {
        return Err(Error::Parameter("degree must be >= 1".into()));
    }
    if pairs.iter().any(|(f, v)| !f.is_finite() || !v.is_finite()) {
        return Err(Error::Data("non-finite calibration sample".into()));
    }
    let mut forces: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    forces.sort_by(f64::total_cmp);
    forces.dedup();
    if forces.len() < degree + 1 {
        return Err(Error::InsufficientData(format!(
            "degree {degree} needs {} distinct forces, got {}",
            degree + 1,
            forces.len()
        )));
    }
    let (f_min, f_max) = (forces[0], forces[forces.len() - 1]);
    // fit in t = (F - center) / half_width to keep the Vandermonde matrix tame
    let center = 0.5 * (f_min + f_max);
    let half = 0.5 * (f_max - f_min);
    let cols = degree + 1;
    let design = DMatrix::from_fn(pairs.len(), cols, |r, c| {
        ((pairs[r].0 - center) / half).powi(c as i32)
    });
    let rhs = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.1));
    let scaled = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Data(format!("least-squares solve failed: {e}")))?;

    // expand p((F - center)/half) into powers of F by Horner composition
    let mut coefficients = vec![0.0; cols];
    for &q in scaled.iter().rev() {
        let mut next = vec![0.0; cols];
        for (k, &a) in coefficients.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            next[k] -= a * center / half;
            if k + 1 < cols {
                next[k + 1] += a / half;
            }
        }
        next[0] += q;
        coefficients = next;
    }

    let mut curve = CalibrationCurve {
        coefficients,
        domain: [f_min, f_max],
        residual_rms: 0.0,
        monotone: true,
    };
    curve.residual_rms = (pairs
        .iter()
        .map(|(f, v)| (v - curve.eval(*f)).powi(2))
        .sum::<f64>()
        / pairs.len() as f64)
        .sqrt();
    curve.monotone = strictly_monotone(&curve);
    Ok(curve)
}

fn strictly_monotone(curve: &CalibrationCurve) -> bool {
    const GRID: usize = 100;
    let [a, b] = curve.domain;
    let vals: Vec<f64> = (0..GRID)
        .map(|i| curve.eval(a + (b - a) * i as f64 / (GRID - 1) as f64))
        .collect();
    vals.windows(2).all(|w| w[1] > w[0]) || vals.windows(2).all(|w| w[1] < w[0])
}

/// Outcome of [`pigment_select`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PigmentSelection {
    pub chosen: usize,
    pub scores: Vec<LinearFit>,
    /// No mix met the linearity threshold; `chosen` is the most linear one.
    pub no_qualifier: bool,
}

/// Picks the most sensitive mix among those linear enough over `range`.
///
/// Sensitivity is the fitted slope, linearity its r². Manufacturability is
/// not scored. Ties resolve to the lower index.
pub fn pigment_select(
    sweeps: &[Vec<(f64, f64)>],
    range: (f64, f64),
    min_r2: f64,
) -> Result<PigmentSelection> {
    if sweeps.is_empty() {
        return Err(Error::Data("no sweeps to choose from".into()));
    }
    let scores = sweeps
        .iter()
        .map(|s| fit_linear(s, range))
        .collect::<Result<Vec<_>>>()?;

    let best_by = |key: &dyn Fn(&LinearFit) -> Option<f64>| {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in scores.iter().enumerate() {
            if let Some(k) = key(s) {
                if best.is_none_or(|(_, b)| k > b) {
                    best = Some((i, k));
                }
            }
        }
        best.map(|b| b.0)
    };
    let qualified = best_by(&|s: &LinearFit| (s.r2 >= min_r2).then_some(s.slope));
    let (chosen, no_qualifier) = match qualified {
        Some(i) => (i, false),
        None => (best_by(&|s: &LinearFit| Some(s.r2)).unwrap_or(0), true),
    };
    Ok(PigmentSelection {
        chosen,
        scores,
        no_qualifier,
    })
}
