//! Digital twin of a photoreflective tactile-sensing module clipped onto the
//! outside of a soft silicone body.
//!
//! Forward chain: indentation → incompressible hyperelastic deformation →
//! lateral bulge closing the optical gap → photoreflector voltage. The inverse
//! chain estimates contact force from voltage. [`experiments`] reproduces the
//! standard characterization runs and [`acceptance`] scores them.

// negated float comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod calibrate;
pub mod config;
pub mod csvio;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod mechanics;
mod numeric;
pub mod optics;
pub mod scenarios;
pub mod signal;

pub use calibrate::{fit_force_voltage, pigment_select, CalibrationCurve, PigmentSelection};
pub use config::{load_config, Config};
pub use error::{Error, Result};
pub use estimate::{force_from_curve, force_from_voltage, ForceEstimate};
pub use mechanics::{
    axial_force, lateral_gap, nominal_stress, strain_energy, DeformationState, DisplacementLag,
    MaterialParams, SensorGeometry,
};
pub use numeric::format_sig9;
pub use optics::{fit_linear, scale_by_pigment, LinearFit, OpticalModel, PigmentMix, RangePolicy};
pub use scenarios::{
    detect_grasp, make_profile, simulate, GraspEvent, GraspKind, HoldLevel, MotionProfile,
    ProfileSpec, SimRecord,
};
pub use signal::{
    dynamic_range, hysteresis_metric, invert_output, moving_average, phase_lag, repeatability,
    sensitivity, TimeSeries, Unit,
};

/// Everything the forward and inverse chains need about one physical sensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorModel {
    pub geometry: SensorGeometry,
    pub material: MaterialParams,
    /// Effective optical model (pigment scaling already applied).
    pub optics: OpticalModel,
    pub range_policy: RangePolicy,
}

impl SensorModel {
    /// Noiseless forward voltage at an indentation, ignoring rate and lag.
    pub fn voltage_at_indent(&self, indent_mm: f64) -> Result<f64> {
        let gap = lateral_gap(indent_mm, &self.geometry)?.gap_mm;
        self.optics.voltage_at_gap(gap)
    }

    pub fn force_from_voltage(&self, v: f64) -> Result<ForceEstimate> {
        force_from_voltage(v, &self.geometry, &self.material, &self.optics)
    }
}
