//! Reduced-order model of the silicone body under vertical indentation.
//!
//! The body is treated as a homogeneous incompressible Mooney–Rivlin block in
//! uniform uniaxial compression. Axial stretch follows directly from the
//! indentation, the transverse stretch from incompressibility, and the side
//! surface facing the photoreflector moves outward by a fraction `kappa` of the
//! ideal uniform bulge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperelastic constants and loss terms of the silicone body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    /// Mooney–Rivlin constant C10 (MPa).
    pub c10: f64,
    /// Mooney–Rivlin constant C01 (MPa).
    pub c01: f64,
    /// Viscous force per unit loading rate (N·s/mm), applied while loading only.
    pub damping_c: f64,
    /// Displacement (mm) by which the optical response trails the indentation.
    ///
    /// Zero disables the lag. See [`DisplacementLag`].
    pub deadzone_delta0: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            c10: -3.335e-5,
            c01: 1.218e-2,
            damping_c: 0.0,
            deadzone_delta0: 0.0,
        }
    }
}

impl MaterialParams {
    /// Small-strain shear modulus, 2·(C10 + C01), in MPa.
    pub fn shear_modulus(&self) -> f64 {
        2.0 * (self.c10 + self.c01)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c10", self.c10),
            ("c01", self.c01),
            ("damping_c", self.damping_c),
            ("deadzone_delta0", self.deadzone_delta0),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, format!("must be finite, got {v}")));
            }
        }
        if self.shear_modulus() <= 0.0 {
            return Err(Error::config(
                "c01",
                format!(
                    "2·(c10 + c01) must be positive, got {}",
                    self.shear_modulus()
                ),
            ));
        }
        if self.damping_c < 0.0 {
            return Err(Error::config(
                "damping_c",
                format!("must be >= 0, got {}", self.damping_c),
            ));
        }
        if self.deadzone_delta0 < 0.0 {
            return Err(Error::config(
                "deadzone_delta0",
                format!("must be >= 0, got {}", self.deadzone_delta0),
            ));
        }
        Ok(())
    }
}

/// Dimensions of the silicone body and placement of the photoreflector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorGeometry {
    pub height_mm: f64,
    pub width_mm: f64,
    pub depth_mm: f64,
    /// Photoreflector-to-silicone distance at rest.
    pub gap0_mm: f64,
    /// Fraction of the uniform lateral bulge that closes the optical gap, in (0, 1].
    pub kappa: f64,
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self {
            height_mm: 20.0,
            width_mm: 22.0,
            depth_mm: 22.0,
            gap0_mm: 2.0,
            kappa: 0.3,
        }
    }
}

impl SensorGeometry {
    /// Undeformed cross-section normal to the indentation axis (mm²).
    pub fn cross_section(&self) -> f64 {
        self.width_mm * self.depth_mm
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("height_mm", self.height_mm),
            ("width_mm", self.width_mm),
            ("depth_mm", self.depth_mm),
            ("gap0_mm", self.gap0_mm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::config(
                "kappa",
                format!("must be in (0, 1], got {}", self.kappa),
            ));
        }
        Ok(())
    }

    /// Indentation at which the bulge would close the optical gap completely.
    pub fn saturation_indent(&self) -> f64 {
        let lambda_t = 1.0 + self.gap0_mm / (self.kappa * self.width_mm / 2.0);
        self.height_mm * (1.0 - lambda_t.powi(-2))
    }

    fn check_indent(&self, indent_mm: f64) -> Result<()> {
        if !indent_mm.is_finite() || indent_mm < 0.0 {
            return Err(Error::Domain(format!(
                "indentation must be finite and >= 0, got {indent_mm} mm"
            )));
        }
        if indent_mm >= self.height_mm {
            return Err(Error::Geometry(format!(
                "indentation {indent_mm} mm reaches the body height {} mm",
                self.height_mm
            )));
        }
        Ok(())
    }
}

/// Kinematic state of the body at one indentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    pub indent_mm: f64,
    /// Axial stretch.
    pub lambda: f64,
    /// Transverse stretch; `lambda * lambda_t²` is 1.
    pub lambda_t: f64,
    pub gap_mm: f64,
}

fn check_stretch(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("stretch must be > 0, got {lambda}")))
    }
}

/// Mooney–Rivlin strain-energy density (MPa) of incompressible uniaxial stretch.
pub fn strain_energy(lambda: f64, mat: &MaterialParams) -> Result<f64> {
    check_stretch(lambda)?;
    // I1 - 3 and I2 - 3 in factored form, exact to rounding near λ = 1
    let u2 = (lambda - 1.0).powi(2);
    let i1_excess = u2 * (lambda + 2.0) / lambda;
    let i2_excess = u2 * (2.0 * lambda + 1.0) / (lambda * lambda);
    Ok(mat.c10 * i1_excess + mat.c01 * i2_excess)
}

/// Nominal (first Piola–Kirchhoff) axial stress in MPa; negative in compression.
pub fn nominal_stress(lambda: f64, mat: &MaterialParams) -> Result<f64> {
    check_stretch(lambda)?;
    Ok(2.0 * (lambda - lambda.powi(-2)) * (mat.c10 + mat.c01 / lambda))
}

/// Magnitude of the compressive reaction force (N) at the given indentation
/// and loading rate. Rate only contributes while loading.
pub fn axial_force(
    indent_mm: f64,
    rate_mm_s: f64,
    geom: &SensorGeometry,
    mat: &MaterialParams,
) -> Result<f64> {
    geom.check_indent(indent_mm)?;
    if !rate_mm_s.is_finite() {
        return Err(Error::Domain(format!(
            "rate must be finite, got {rate_mm_s}"
        )));
    }
    let lambda = (geom.height_mm - indent_mm) / geom.height_mm;
    // MPa × mm² = N
    let elastic = nominal_stress(lambda, mat)?.abs() * geom.cross_section();
    Ok(elastic + mat.damping_c * rate_mm_s.max(0.0))
}

/// Deformation state and optical gap at the given indentation.
pub fn lateral_gap(indent_mm: f64, geom: &SensorGeometry) -> Result<DeformationState> {
    geom.check_indent(indent_mm)?;
    let lambda = (geom.height_mm - indent_mm) / geom.height_mm;
    let lambda_t = lambda.sqrt().recip();
    let gap_mm = gap_unchecked(indent_mm, geom);
    if gap_mm <= 0.0 {
        return Err(Error::Saturation { indent_mm, gap_mm });
    }
    Ok(DeformationState {
        indent_mm,
        lambda,
        lambda_t,
        gap_mm,
    })
}

pub(crate) fn gap_unchecked(indent_mm: f64, geom: &SensorGeometry) -> f64 {
    let lambda = (geom.height_mm - indent_mm) / geom.height_mm;
    let bulge = geom.width_mm / 2.0 * (lambda.sqrt().recip() - 1.0);
    geom.gap0_mm - geom.kappa * bulge
}

/// Rate-independent first-order lag of the surface seen by the photoreflector.
///
/// The tracked displacement relaxes toward the indentation with respect to
/// travelled distance rather than time: `dy/ds = (x - y) / delta0`, where `s`
/// is the accumulated absolute indentation travel. On a ramp of any speed the
/// output settles `delta0` behind the input, i.e. a time lag of `delta0 / speed`.
/// With `delta0 = 0` the filter is an exact pass-through.
#[derive(Debug, Clone)]
pub struct DisplacementLag {
    delta0: f64,
    last_input: Option<f64>,
    state: f64,
}

impl DisplacementLag {
    pub fn new(delta0_mm: f64) -> Self {
        Self {
            delta0: delta0_mm,
            last_input: None,
            state: 0.0,
        }
    }

    pub fn step(&mut self, indent_mm: f64) -> f64 {
        match self.last_input {
            _ if self.delta0 == 0.0 => self.state = indent_mm,
            None => self.state = indent_mm,
            Some(prev) => {
                let decay = (-(indent_mm - prev).abs() / self.delta0).exp();
                self.state = indent_mm + (self.state - indent_mm) * decay;
            }
        }
        self.last_input = Some(indent_mm);
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Independent routes: invariants by hand, central differences, Simpson quadrature.
    fn energy_direct(l: f64, c10: f64, c01: f64) -> f64 {
        let i1 = l.powi(2) + 2.0 * l.recip();
        let i2 = l.powi(-2) + 2.0 * l;
        c10 * (i1 - 3.0) + c01 * (i2 - 3.0)
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn energy_reference_values() {
        let mat = MaterialParams::default();
        assert_eq!(strain_energy(1.0, &mat).unwrap(), 0.0);
        // frozen from direct invariant evaluation
        assert_relative_eq!(
            strain_energy(0.85, &mat).unwrap(),
            1.02161552465398e-3,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            strain_energy(1.1, &mat).unwrap(),
            3.211758388429763e-4,
            max_relative = 1e-12
        );
        for l in [0.85, 1.1] {
            assert_relative_eq!(
                strain_energy(l, &mat).unwrap(),
                energy_direct(l, mat.c10, mat.c01),
                max_relative = 1e-12
            );
            let quad = simpson(|s| nominal_stress(s, &mat).unwrap(), 1.0, l, 2000);
            assert_relative_eq!(strain_energy(l, &mat).unwrap(), quad, max_relative = 1e-9);
        }
    }

    #[test]
    fn stress_matches_energy_derivative() {
        let mat = MaterialParams::default();
        assert_eq!(nominal_stress(1.0, &mat).unwrap(), 0.0);
        let h = 1e-6;
        for (l, frozen) in [(0.85, -1.5270568397109713e-2), (1.1, 6.039725416979718e-3)] {
            let fd = (energy_direct(l + h, mat.c10, mat.c01)
                - energy_direct(l - h, mat.c10, mat.c01))
                / (2.0 * h);
            let p = nominal_stress(l, &mat).unwrap();
            assert_relative_eq!(p, fd, max_relative = 1e-6);
            assert_relative_eq!(p, frozen, max_relative = 1e-12);
        }
    }

    /// Central-difference consistency on the 601-point grid over [0.7, 1.3]
    /// with h = 1e-6. Where the stress vanishes (λ = 1) the difference quotient
    /// carries its own truncation error P''(1)·h²/6, which exceeds a 1e-5
    /// relative bound on a 1e-9 floor; that point is pinned to the truncation
    /// term instead.
    #[test]
    fn energy_stress_consistency_grid() {
        let mat = MaterialParams::default();
        let h = 1e-6;
        for i in 0..=600 {
            let l = 0.7 + i as f64 * 0.6 / 600.0;
            let p = nominal_stress(l, &mat).unwrap();
            let fd = (strain_energy(l + h, &mat).unwrap() - strain_energy(l - h, &mat).unwrap())
                / (2.0 * h);
            if (l - 1.0).abs() > 1e-12 {
                assert!((p - fd).abs() / p.abs().max(1e-9) < 1e-5, "λ = {l}");
            } else {
                // P''(1) = -12·(c10 + 2·c01)
                let p2 = -12.0 * (mat.c10 + 2.0 * mat.c01);
                assert_relative_eq!(fd - p, p2 * h * h / 6.0, max_relative = 1e-3);
            }
        }
    }

    #[test]
    fn stress_sign_follows_stretch() {
        let mat = MaterialParams::default();
        for i in 1..200 {
            let l = 0.5 + i as f64 * 0.005;
            let p = nominal_stress(l, &mat).unwrap();
            if l < 1.0 - 1e-12 {
                assert!(p < 0.0, "{l}");
            } else if l > 1.0 + 1e-12 {
                assert!(p > 0.0, "{l}");
            }
        }
    }

    #[test]
    fn non_positive_stretch_is_domain_error() {
        let mat = MaterialParams::default();
        assert!(matches!(strain_energy(0.0, &mat), Err(Error::Domain(_))));
        assert!(matches!(nominal_stress(-0.5, &mat), Err(Error::Domain(_))));
        assert!(matches!(
            nominal_stress(f64::NAN, &mat),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn force_reference_values() {
        let g = SensorGeometry::default();
        let m = MaterialParams::default();
        assert_eq!(axial_force(0.0, 0.0, &g, &m).unwrap(), 0.0);
        assert_relative_eq!(
            axial_force(3.0, 0.0, &g, &m).unwrap(),
            7.390955104201101,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            axial_force(1.5, 0.0, &g, &m).unwrap(),
            3.0988445035490475,
            max_relative = 1e-12
        );
    }

    #[test]
    fn force_rate_term_superposes() {
        let g = SensorGeometry::default();
        let m = MaterialParams {
            damping_c: 0.25,
            ..Default::default()
        };
        for d in [0.0, 0.7, 2.9] {
            let base = axial_force(d, 0.0, &g, &m).unwrap();
            assert_eq!(axial_force(d, -3.0, &g, &m).unwrap(), base);
            let diff = axial_force(d, 4.0, &g, &m).unwrap() - base;
            assert_relative_eq!(diff, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn force_indent_errors() {
        let g = SensorGeometry::default();
        let m = MaterialParams::default();
        assert!(matches!(
            axial_force(-0.1, 0.0, &g, &m),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            axial_force(20.0, 0.0, &g, &m),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn gap_reference_values() {
        let mut g = SensorGeometry::default();
        let rest = lateral_gap(0.0, &g).unwrap();
        assert_eq!(rest.gap_mm, 2.0);
        assert_eq!(rest.lambda, 1.0);
        assert_eq!(rest.lambda_t, 1.0);
        assert_relative_eq!(
            lateral_gap(3.0, &g).unwrap().gap_mm,
            1.7206474459921732,
            max_relative = 1e-12
        );
        g.kappa = 1.0;
        assert_relative_eq!(
            lateral_gap(3.0, &g).unwrap().gap_mm,
            1.068824819973911,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gap_saturation_is_distinct() {
        let g = SensorGeometry {
            kappa: 1.0,
            ..Default::default()
        };
        let d_sat = g.saturation_indent();
        assert!(matches!(
            lateral_gap(d_sat + 0.01, &g),
            Err(Error::Saturation { .. })
        ));
        assert!(lateral_gap(d_sat - 0.01, &g).is_ok());
        assert!(matches!(lateral_gap(-1.0, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn monotone_on_grid() {
        let g = SensorGeometry::default();
        let m = MaterialParams::default();
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=60 {
            let d = i as f64 * 0.05;
            let f = axial_force(d, 0.0, &g, &m).unwrap();
            let gap = lateral_gap(d, &g).unwrap().gap_mm;
            if let Some((pf, pg)) = prev {
                assert!(f > pf);
                assert!(gap < pg);
            }
            prev = Some((f, gap));
        }
    }

    #[test]
    fn lag_passthrough_and_ramp_offset() {
        let mut off = DisplacementLag::new(0.0);
        for x in [0.0, 0.3, 0.1, 2.0] {
            assert_eq!(off.step(x), x);
        }
        let mut lag = DisplacementLag::new(0.06);
        let mut y = 0.0;
        for i in 0..=3000 {
            y = lag.step(i as f64 * 0.001);
        }
        // settled one lag length behind the input, less half a step
        let q = (-0.001f64 / 0.06).exp();
        assert_relative_eq!(3.0 - y, 0.001 * q / (1.0 - q), max_relative = 1e-9);
        assert_relative_eq!(3.0 - y, 0.06 - 0.0005, max_relative = 1e-4);
        // holding still does not move the state
        assert_eq!(lag.step(3.0), y);
    }

    #[test]
    fn validation_names_fields() {
        let g = SensorGeometry {
            kappa: 1.5,
            ..Default::default()
        };
        match g.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "kappa"),
            other => panic!("{other:?}"),
        }
        let m = MaterialParams {
            c10: -1.0,
            ..Default::default()
        };
        assert!(m.validate().is_err());
    }
}
