//! Optical constants of gold.
//!
//! Johnson & Christy (Phys. Rev. B 6, 4370, 1972), evaporated gold films,
//! as (photon energy eV, n, k). The table is converted to wavelength and
//! complex permittivity ε = (n + ik)² and interpolated linearly in
//! wavelength.

use num_complex::Complex;

use super::SpectrumError;
use crate::scalar::{lit, Scalar};

/// hc in eV·nm.
pub const HC_EV_NM: f64 = 1_239.841_984;

const JOHNSON_CHRISTY_AU: [(f64, f64, f64); 22] = [
    (0.64, 0.92, 13.78),
    (0.77, 0.56, 11.21),
    (0.89, 0.43, 9.519),
    (1.02, 0.35, 8.145),
    (1.14, 0.27, 7.150),
    (1.26, 0.22, 6.350),
    (1.39, 0.17, 5.663),
    (1.51, 0.16, 5.083),
    (1.64, 0.14, 4.542),
    (1.76, 0.13, 4.103),
    (1.88, 0.14, 3.697),
    (2.01, 0.21, 3.272),
    (2.13, 0.29, 2.863),
    (2.26, 0.43, 2.455),
    (2.38, 0.62, 2.081),
    (2.50, 1.04, 1.833),
    (2.63, 1.31, 1.849),
    (2.75, 1.38, 1.914),
    (2.88, 1.45, 1.948),
    (3.00, 1.46, 1.958),
    (3.12, 1.47, 1.952),
    (3.25, 1.46, 1.933),
];

/// Tabulated complex permittivity on a strictly increasing wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityTable<T> {
    wavelengths: Vec<T>,
    values: Vec<Complex<T>>,
}

impl<T: Scalar> PermittivityTable<T> {
    pub fn new(wavelengths: Vec<T>, values: Vec<Complex<T>>) -> Result<Self, SpectrumError> {
        if wavelengths.len() != values.len() || wavelengths.len() < 2 {
            return Err(SpectrumError::Parameter("permittivity table needs ≥ 2 matching nodes".into()));
        }
        if wavelengths.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectrumError::Parameter("permittivity wavelengths must increase strictly".into()));
        }
        Ok(Self { wavelengths, values })
    }

    pub fn gold() -> Self {
        let mut rows: Vec<(T, Complex<T>)> = JOHNSON_CHRISTY_AU
            .iter()
            .map(|&(ev, n, k)| {
                let nk = Complex::new(lit::<T>(n), lit::<T>(k));
                (lit::<T>(HC_EV_NM / ev), nk * nk)
            })
            .collect();
        rows.reverse();
        let (wavelengths, values) = rows.into_iter().unzip();
        Self { wavelengths, values }
    }

    pub fn domain(&self) -> (T, T) {
        (self.wavelengths[0], *self.wavelengths.last().expect("non-empty"))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (T, Complex<T>)> + '_ {
        self.wavelengths.iter().copied().zip(self.values.iter().copied())
    }

    pub fn eval(&self, wavelength: T) -> Result<Complex<T>, SpectrumError> {
        let (lo, hi) = self.domain();
        if !(wavelength >= lo && wavelength <= hi) {
            return Err(SpectrumError::OutOfDomain {
                wavelength: wavelength.to_f64().unwrap_or(f64::NAN),
                lo: lo.to_f64().unwrap_or(f64::NAN),
                hi: hi.to_f64().unwrap_or(f64::NAN),
            });
        }
        let i = self.wavelengths.partition_point(|&w| w <= wavelength);
        if i == 0 {
            return Ok(self.values[0]);
        }
        if i >= self.wavelengths.len() {
            return Ok(*self.values.last().expect("non-empty"));
        }
        let (w0, w1) = (self.wavelengths[i - 1], self.wavelengths[i]);
        let f = (wavelength - w0) / (w1 - w0);
        Ok(self.values[i - 1] * (T::one() - f) + self.values[i] * f)
    }
}

/// Complex relative permittivity of gold at `wavelength` nm.
pub fn gold_permittivity<T: Scalar>(wavelength: T) -> Result<Complex<T>, SpectrumError> {
    PermittivityTable::gold().eval(wavelength)
}
