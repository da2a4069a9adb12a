//! Transmission physics of the gold nanohole array: Bethe diffraction, SPP
//! grating-coupling resonances and a Fano description of the extraordinary
//! transmission peak.

mod fano;
mod gold;
mod spp;

pub use fano::{fano_from_observables, fano_spectrum, fit_fano, FanoFit, FanoModel, FanoParams, TransmissionSpectrum};
pub use gold::{gold_permittivity, PermittivityTable, HC_EV_NM};
pub use spp::{spp_resonance_wavelength, spp_resonance_wavelengths, Interface, Polarization};

use crate::scalar::{lit, to_f64, Scalar};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpectrumError {
    #[error("wavelength {wavelength} nm outside the tabulated domain [{lo}, {hi}] nm")]
    OutOfDomain { wavelength: f64, lo: f64, hi: f64 },
    #[error("no SPP resonance for order ({i}, {j}) inside the permittivity table domain: {reason}")]
    NoResonance { i: i32, j: i32, reason: String },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("fit needs at least 5 points spanning the peak, got {0}")]
    TooFewPoints(usize),
    #[error("fano fit failed: {0}")]
    FitFailure(String),
}

/// Square lattice of circular holes in a metal film. Lengths in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry<T> {
    pub pitch: T,
    pub hole_diameter: T,
    pub film_thickness: T,
    /// Sidewall taper of milled holes, degrees. Informational only.
    pub taper_angle: T,
}

impl<T: Scalar> ArrayGeometry<T> {
    pub fn new(pitch: T, hole_diameter: T, film_thickness: T, taper_angle: T) -> Result<Self, SpectrumError> {
        let g = Self { pitch, hole_diameter, film_thickness, taper_angle };
        g.validate()?;
        Ok(g)
    }

    /// The fabricated sample: 430 nm pitch, 200 nm holes, 100 nm gold, 17° taper.
    pub fn fabricated() -> Self {
        Self {
            pitch: lit(430.0),
            hole_diameter: lit(200.0),
            film_thickness: lit(100.0),
            taper_angle: lit(17.0),
        }
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        if !(self.hole_diameter > T::zero() && self.hole_diameter < self.pitch) {
            return Err(SpectrumError::Parameter(format!(
                "hole diameter must satisfy 0 < d < p (d = {}, p = {})",
                to_f64(self.hole_diameter),
                to_f64(self.pitch)
            )));
        }
        if !(self.film_thickness > T::zero()) {
            return Err(SpectrumError::Parameter("film thickness must be positive".into()));
        }
        Ok(())
    }

    /// Open-area fraction πr²/p².
    pub fn fill_factor(&self) -> T {
        let r = self.hole_diameter / lit::<T>(2.0);
        T::PI() * r * r / (self.pitch * self.pitch)
    }
}

/// Bethe small-aperture transmission of a single hole, normalized to the
/// flux incident on the hole area: (64 / 27π²)(kr)⁴.
pub fn bethe_hole_transmission<T: Scalar>(hole_diameter: T, wavelength: T) -> T {
    let k = lit::<T>(2.0) * T::PI() / wavelength;
    let kr = k * hole_diameter / lit::<T>(2.0);
    lit::<T>(64.0) / (lit::<T>(27.0) * T::PI() * T::PI()) * kr.powi(4)
}

/// Array transmittance from diffraction alone: single-hole Bethe
/// transmission times the open-area fraction.
pub fn bethe_transmittance<T: Scalar>(geom: &ArrayGeometry<T>, wavelength: T) -> T {
    bethe_hole_transmission(geom.hole_diameter, wavelength) * geom.fill_factor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bethe_at_795_nm() {
        let g = ArrayGeometry::<f64>::fabricated();
        let hole = bethe_hole_transmission(200.0, 795.0);
        let arr = bethe_transmittance(&g, 795.0);
        // (64/27π²)(2π·100/795)⁴ and × π·100²/430²
        let kr: f64 = 2.0 * std::f64::consts::PI * 100.0 / 795.0;
        let expect_hole = 64.0 / (27.0 * std::f64::consts::PI.powi(2)) * kr.powi(4);
        assert_relative_eq!(hole, expect_hole, max_relative = 1e-14);
        assert!((hole - 0.0936).abs() < 1e-3, "{hole}");
        assert!((arr - 0.0159).abs() < 1e-3, "{arr}");
    }

    #[test]
    fn bethe_scaling() {
        let g = ArrayGeometry::<f64>::fabricated();
        let r = bethe_transmittance(&g, 795.0) / bethe_transmittance(&g, 7950.0);
        assert_relative_eq!(r, 1e4, max_relative = 1e-12);
        assert!(bethe_hole_transmission(1e-9, 795.0) < 1e-40);
    }

    #[test]
    fn bethe_monotonicity() {
        let mut prev = 0.0;
        for d in (20..420).step_by(20) {
            let g = ArrayGeometry::new(430.0, d as f64, 100.0, 0.0).unwrap();
            let t = bethe_transmittance(&g, 795.0);
            assert!(t > prev);
            prev = t;
        }
        let g = ArrayGeometry::<f64>::fabricated();
        let mut prev = f64::INFINITY;
        for w in (400..1200).step_by(25) {
            let t = bethe_transmittance(&g, w as f64);
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::new(430.0, 500.0, 100.0, 0.0).is_err());
        assert!(ArrayGeometry::new(430.0, 0.0, 100.0, 0.0).is_err());
        assert!(ArrayGeometry::new(430.0, 200.0, 0.0, 0.0).is_err());
    }
}
