//! Fano lineshape for the extraordinary-transmission peak on top of the
//! Bethe diffraction baseline.

use super::{bethe_transmittance, ArrayGeometry, SpectrumError};
use crate::fit::{levenberg_marquardt, FitError, LmOptions};
use crate::scalar::{lit, to_f64, Scalar};

/// Resonance parameters. `fwhm` is the Fano width Γ in nm; for large |q|
/// it approaches the full width of the total peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanoParams<T> {
    pub resonance: T,
    pub peak: T,
    pub fwhm: T,
    pub q: T,
}

impl<T: Scalar> FanoParams<T> {
    pub fn new(resonance: T, peak: T, fwhm: T, q: T) -> Result<Self, SpectrumError> {
        let p = Self { resonance, peak, fwhm, q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        if !(self.peak > T::zero() && self.peak <= T::one()) {
            return Err(SpectrumError::Parameter(format!("peak transmittance must lie in (0, 1], got {}", to_f64(self.peak))));
        }
        if !(self.fwhm > T::zero()) || !self.fwhm.is_finite() {
            return Err(SpectrumError::Parameter(format!("fwhm must be positive, got {}", to_f64(self.fwhm))));
        }
        if !(self.resonance > T::zero()) || !self.resonance.is_finite() {
            return Err(SpectrumError::Parameter(format!("resonance must be positive, got {}", to_f64(self.resonance))));
        }
        if self.q == T::zero() || !self.q.is_finite() {
            return Err(SpectrumError::Parameter("asymmetry q must be finite and nonzero".into()));
        }
        Ok(())
    }

    fn to_vec(self) -> Vec<T> {
        vec![self.resonance, self.peak, self.fwhm, self.q]
    }

    fn from_slice(p: &[T]) -> Self {
        Self { resonance: p[0], peak: p[1], fwhm: p[2], q: p[3] }
    }
}

/// Fano parameters whose total transmittance peaks at `peak_wavelength`
/// with height `peak` and full width `total_fwhm` (nm), for a given q.
/// Solved by fixed-point iteration on λ₀ and Γ.
pub fn fano_from_observables<T: Scalar>(
    geom: &ArrayGeometry<T>,
    peak_wavelength: T,
    peak: T,
    total_fwhm: T,
    q: T,
) -> Result<FanoParams<T>, SpectrumError> {
    let two = lit::<T>(2.0);
    let mut p = FanoParams::new(peak_wavelength - total_fwhm / (two * q), peak, total_fwhm, q)?;
    for _ in 0..200 {
        let m = FanoModel::new(*geom, p)?;
        let width = m
            .total_fwhm()
            .ok_or_else(|| SpectrumError::Parameter("peak has no half-maximum crossings".into()))?;
        let shift = peak_wavelength - m.peak_wavelength();
        let scale = total_fwhm / width;
        p.resonance = p.resonance + shift;
        p.fwhm = p.fwhm * scale;
        p.validate()?;
        let tol = lit::<T>(1e-10).max(T::epsilon() * lit::<T>(16.0));
        if shift.abs() <= tol * peak_wavelength && (scale - T::one()).abs() <= tol {
            return Ok(p);
        }
    }
    Err(SpectrumError::Parameter("no Fano parameters reproduce the requested peak shape".into()))
}

/// Fano profile with its amplitude solved so the resonance maximum of the
/// total transmittance equals `params.peak`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanoModel<T> {
    pub geometry: ArrayGeometry<T>,
    pub params: FanoParams<T>,
    amplitude: T,
}

impl<T: Scalar> FanoModel<T> {
    pub fn new(geometry: ArrayGeometry<T>, params: FanoParams<T>) -> Result<Self, SpectrumError> {
        geometry.validate()?;
        params.validate()?;
        let amplitude = solve_amplitude(&geometry, &params)?;
        Ok(Self { geometry, params, amplitude })
    }

    /// The Fano amplitude A.
    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    /// (q Γ/2 + δ)² / ((Γ/2)² + δ²), with δ = λ − λ₀.
    pub fn profile(&self, wavelength: T) -> T {
        profile(&self.params, wavelength)
    }

    pub fn resonance(&self, wavelength: T) -> T {
        self.amplitude * self.profile(wavelength)
    }

    pub fn diffraction(&self, wavelength: T) -> T {
        bethe_transmittance(&self.geometry, wavelength)
    }

    pub fn total(&self, wavelength: T) -> T {
        self.resonance(wavelength) + self.diffraction(wavelength)
    }

    /// Wavelength of the resonance maximum of the total transmittance.
    pub fn peak_wavelength(&self) -> T {
        argmax_near_resonance(&self.geometry, &self.params, self.amplitude).0
    }

    /// Full width at half maximum of the total transmittance, located by
    /// bisection on either side of the peak.
    pub fn total_fwhm(&self) -> Option<T> {
        let (l_max, t_max) = argmax_near_resonance(&self.geometry, &self.params, self.amplitude);
        let half = t_max / lit::<T>(2.0);
        let reach = self.params.fwhm * lit::<T>(10.0);
        let f = |l: T| self.total(l) - half;
        let left = bisect_crossing(&f, l_max, l_max - reach)?;
        let right = bisect_crossing(&f, l_max, l_max + reach)?;
        Some(right - left)
    }
}

fn profile<T: Scalar>(p: &FanoParams<T>, wavelength: T) -> T {
    let half = p.fwhm / lit::<T>(2.0);
    let d = wavelength - p.resonance;
    let num = p.q * half + d;
    num * num / (half * half + d * d)
}

/// First crossing of f from `inside` (f > 0) to `outside`, or `None` if f
/// stays positive there. Scans in steps before bisecting.
fn bisect_crossing<T: Scalar>(f: &impl Fn(T) -> T, inside: T, outside: T) -> Option<T> {
    let steps = 400;
    let step = (outside - inside) / lit::<T>(steps as f64);
    let mut a = inside;
    for k in 1..=steps {
        let b = inside + step * lit::<T>(k as f64);
        if f(b) <= T::zero() {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..100 {
                let mid = (lo + hi) / lit::<T>(2.0);
                if f(mid) > T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some((lo + hi) / lit::<T>(2.0));
        }
        a = b;
    }
    None
}

/// Golden-section maximum of A·F + B in a window around the profile
/// maximum λ₀ + Γ/(2q). The window stays clear of the profile zero at
/// λ₀ − qΓ/2, which is at least Γ away.
fn argmax_near_resonance<T: Scalar>(geom: &ArrayGeometry<T>, p: &FanoParams<T>, amplitude: T) -> (T, T) {
    let two = lit::<T>(2.0);
    let center = p.resonance + p.fwhm / (two * p.q);
    let gap = p.fwhm * (T::one() + p.q * p.q) / (two * p.q.abs());
    let w = (gap * lit::<T>(0.9)).min(p.fwhm * lit::<T>(3.0));
    let g = |l: T| amplitude * profile(p, l) + bethe_transmittance(geom, l);
    let ratio = (lit::<T>(5.0).sqrt() - T::one()) / two;
    let (mut a, mut b) = (center - w, center + w);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..90 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = g(d);
        }
    }
    let l = (a + b) / two;
    (l, g(l))
}

/// Newton iteration on A for max(A·F + B) = peak; dM/dA = F(λ*).
fn solve_amplitude<T: Scalar>(geom: &ArrayGeometry<T>, p: &FanoParams<T>) -> Result<T, SpectrumError> {
    let two = lit::<T>(2.0);
    let center = p.resonance + p.fwhm / (two * p.q);
    let baseline = bethe_transmittance(geom, center);
    let mut a = (p.peak - baseline) / (T::one() + p.q * p.q);
    if !(a > T::zero()) {
        return Err(SpectrumError::Parameter(format!(
            "peak transmittance {} does not exceed the diffraction baseline {}",
            to_f64(p.peak),
            to_f64(baseline)
        )));
    }
    for _ in 0..50 {
        let (l, m) = argmax_near_resonance(geom, p, a);
        let next = a + (p.peak - m) / profile(p, l);
        if !(next > T::zero()) {
            return Err(SpectrumError::Parameter("peak transmittance is below the diffraction baseline".into()));
        }
        let done = (next - a).abs() <= a * T::epsilon() * lit::<T>(4.0);
        a = next;
        if done {
            break;
        }
    }
    Ok(a)
}

/// Transmittance sampled on a strictly increasing wavelength grid, with
/// the resonance and diffraction parts kept separately.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionSpectrum<T> {
    wavelengths: Vec<T>,
    resonance: Vec<T>,
    diffraction: Vec<T>,
}

impl<T: Scalar> TransmissionSpectrum<T> {
    pub fn new(wavelengths: Vec<T>, resonance: Vec<T>, diffraction: Vec<T>) -> Result<Self, SpectrumError> {
        if wavelengths.is_empty() || wavelengths.len() != resonance.len() || wavelengths.len() != diffraction.len() {
            return Err(SpectrumError::Parameter("spectrum components must be nonempty and of equal length".into()));
        }
        if wavelengths.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectrumError::Parameter("wavelength grid must increase strictly".into()));
        }
        for (r, d) in resonance.iter().zip(&diffraction) {
            let t = *r + *d;
            if !(t >= T::zero() && t <= T::one()) {
                return Err(SpectrumError::Parameter(format!("transmittance {} outside [0, 1]", to_f64(t))));
            }
        }
        Ok(Self { wavelengths, resonance, diffraction })
    }

    pub fn wavelengths(&self) -> &[T] {
        &self.wavelengths
    }

    pub fn resonance(&self) -> &[T] {
        &self.resonance
    }

    pub fn diffraction(&self) -> &[T] {
        &self.diffraction
    }

    pub fn total(&self) -> Vec<T> {
        self.resonance.iter().zip(&self.diffraction).map(|(r, d)| *r + *d).collect()
    }

    pub fn domain(&self) -> (T, T) {
        (self.wavelengths[0], *self.wavelengths.last().expect("nonempty"))
    }

    /// Total transmittance at `wavelength`, linearly interpolated.
    pub fn at(&self, wavelength: T) -> Result<T, SpectrumError> {
        let (lo, hi) = self.domain();
        if !(wavelength >= lo && wavelength <= hi) {
            return Err(SpectrumError::OutOfDomain { wavelength: to_f64(wavelength), lo: to_f64(lo), hi: to_f64(hi) });
        }
        let i = self.wavelengths.partition_point(|&w| w <= wavelength);
        let total = |k: usize| self.resonance[k] + self.diffraction[k];
        if i == 0 {
            return Ok(total(0));
        }
        if i >= self.wavelengths.len() {
            return Ok(total(self.wavelengths.len() - 1));
        }
        let (w0, w1) = (self.wavelengths[i - 1], self.wavelengths[i]);
        let f = (wavelength - w0) / (w1 - w0);
        Ok(total(i - 1) * (T::one() - f) + total(i) * f)
    }
}

/// Evaluates the Fano model on `grid`.
pub fn fano_spectrum<T: Scalar>(
    geom: &ArrayGeometry<T>,
    params: FanoParams<T>,
    grid: &[T],
) -> Result<TransmissionSpectrum<T>, SpectrumError> {
    let model = FanoModel::new(*geom, params)?;
    let resonance = grid.iter().map(|&l| model.resonance(l)).collect();
    let diffraction = grid.iter().map(|&l| model.diffraction(l)).collect();
    TransmissionSpectrum::new(grid.to_vec(), resonance, diffraction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanoFit<T> {
    pub params: FanoParams<T>,
    /// One-standard-deviation errors, scaled by the reduced chi-square.
    pub errors: FanoParams<T>,
    pub residual_norm: T,
    pub iterations: usize,
}

/// Least-squares fit of the Fano model to `(wavelength, transmittance)`
/// points. The Bethe baseline is fixed by `geom`; λ₀, peak, Γ and q float.
/// Without `initial`, several starts with either sign of q are tried and
/// the best converged fit is returned.
pub fn fit_fano<T: Scalar>(
    geom: &ArrayGeometry<T>,
    points: &[(T, T)],
    initial: Option<FanoParams<T>>,
) -> Result<FanoFit<T>, SpectrumError> {
    if points.len() < 5 {
        return Err(SpectrumError::TooFewPoints(points.len()));
    }
    geom.validate()?;
    let residuals = |p: &[T], out: &mut [T]| -> bool {
        let params = FanoParams::from_slice(p);
        if params.validate().is_err() {
            return false;
        }
        let Ok(a) = solve_amplitude(geom, &params) else {
            return false;
        };
        for (o, &(l, t)) in out.iter_mut().zip(points) {
            *o = a * profile(&params, l) + bethe_transmittance(geom, l) - t;
        }
        true
    };

    let starts = match initial {
        Some(p) => vec![p],
        None => initial_guesses(geom, points)?,
    };
    let mut best: Option<FanoFit<T>> = None;
    let mut last_err = String::from("no admissible starting point");
    for start in starts {
        match levenberg_marquardt(residuals, &start.to_vec(), points.len(), LmOptions::default()) {
            Ok(rep) => {
                let fit = FanoFit {
                    params: FanoParams::from_slice(&rep.params),
                    errors: FanoParams::from_slice(&rep.std_errors),
                    residual_norm: rep.residual_norm,
                    iterations: rep.iterations,
                };
                if best.as_ref().map_or(true, |b| fit.residual_norm < b.residual_norm) {
                    best = Some(fit);
                }
            }
            Err(e @ FitError::TooFewPoints { .. }) => return Err(SpectrumError::FitFailure(e.to_string())),
            Err(e) => last_err = e.to_string(),
        }
    }
    best.ok_or(SpectrumError::FitFailure(last_err))
}

fn initial_guesses<T: Scalar>(geom: &ArrayGeometry<T>, points: &[(T, T)]) -> Result<Vec<FanoParams<T>>, SpectrumError> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let (imax, &(l_peak, t_peak)) = sorted
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or(SpectrumError::TooFewPoints(0))?;
    let span = sorted.last().expect("nonempty").0 - sorted[0].0;
    let excess = |k: usize| sorted[k].1 - bethe_transmittance(geom, sorted[k].0);
    let half = excess(imax) / lit::<T>(2.0);
    let left = (0..imax).rev().find(|&k| excess(k) < half).map(|k| sorted[k].0);
    let right = (imax + 1..sorted.len()).find(|&k| excess(k) < half).map(|k| sorted[k].0);
    let width = match (left, right) {
        (Some(a), Some(b)) => b - a,
        (Some(a), None) => (l_peak - a) * lit::<T>(2.0),
        (None, Some(b)) => (b - l_peak) * lit::<T>(2.0),
        (None, None) => span / lit::<T>(2.0),
    };
    let peak = t_peak.min(T::one()).max(lit::<T>(1e-6));
    let guesses = [5.0, -5.0, 2.0, -2.0, 15.0, -15.0]
        .iter()
        .map(|&q| {
            let q = lit::<T>(q);
            FanoParams { resonance: l_peak - width / (lit::<T>(2.0) * q), peak, fwhm: width, q }
        })
        .filter(|p| p.validate().is_ok() && solve_amplitude(geom, p).is_ok())
        .collect::<Vec<_>>();
    if guesses.is_empty() {
        return Err(SpectrumError::FitFailure("data peak does not rise above the diffraction baseline".into()));
    }
    Ok(guesses)
}
