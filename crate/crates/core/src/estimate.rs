//! Contact-force estimation from measured voltage.

use crate::calibrate::CalibrationCurve;
use crate::error::{Error, Result};
use crate::mechanics::{axial_force, gap_unchecked, MaterialParams, SensorGeometry};
use crate::numeric::bisect;
use crate::optics::OpticalModel;

/// Quasi-static force estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceEstimate {
    pub force_n: f64,
    pub indent_mm: f64,
    /// The voltage implied a gap wider than at rest; reported as 0 N.
    pub underrange: bool,
}

/// Inverts the forward chain: voltage → gap → indentation → force.
///
/// The rate term is ignored. The indentation recovered is the one seen by the
/// photoreflector, so any displacement lag of the optical path is not undone.
pub fn force_from_voltage(
    v: f64,
    geom: &SensorGeometry,
    mat: &MaterialParams,
    model: &OpticalModel,
) -> Result<ForceEstimate> {
    let gap = model.gap_at_voltage(v)?;
    if gap >= geom.gap0_mm {
        return Ok(ForceEstimate {
            force_n: 0.0,
            indent_mm: 0.0,
            underrange: gap > geom.gap0_mm,
        });
    }
    if gap <= 0.0 {
        return Err(Error::Range(format!("voltage {v} V implies a closed gap")));
    }
    // gap(indent) decreases from gap0 at 0 to 0 at the saturation indent
    let hi = geom.saturation_indent().min(geom.height_mm * (1.0 - 1e-12));
    let indent = bisect(|d| gap_unchecked(d, geom) - gap, 0.0, hi, 1e-10);
    Ok(ForceEstimate {
        force_n: axial_force(indent, 0.0, geom, mat)?,
        indent_mm: indent,
        underrange: false,
    })
}

/// Force from an inverted module output using a fitted calibration curve.
pub fn force_from_curve(v_output: f64, curve: &CalibrationCurve) -> Result<f64> {
    curve.invert(v_output)
}
