//! Frequency-domain Hong–Ou–Mandel interference between signal and idler.
//!
//! For a real amplitude ψ the coincidence probability at angular detuning Δ
//! and optical delay δ is
//!
//! P_c(Δ, δ) = ½ (1 − ∫ ψ(τ+δ) ψ(δ−τ) cos(Δτ) dτ),
//!
//! with ∫ψ² = 1. The integrand is even in τ, so only the cosine part
//! survives and P_c is even in Δ. Note that P_c is not bounded by ½: when
//! the overlap ψ(τ+δ)ψ(δ−τ) is flat-topped (δ away from the wavepacket
//! peak) its Fourier transform has negative lobes.

use crate::fit::{levenberg_marquardt, FitError, LmOptions};
use crate::model::{BiphotonAmplitude, ModelError};
use crate::quadrature::{integrate_with_breaks, QuadratureError};
use crate::rng::{standard_normal, RngSpec};
use crate::scalar::{lit, Scalar};
use crate::waveform::{cosine_of, TemporalWaveform, WaveformError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HomError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("detuning grids differ")]
    GridMismatch,
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error("coherence-time fit: {0}")]
    Fit(#[from] FitError),
    #[error("need at least two visibility points with distinct delays")]
    DegenerateDelays,
}

/// 2π·f with f in MHz, as rad/ns.
pub fn mhz_to_rad_per_ns<T: Scalar>(mhz: T) -> T {
    lit::<T>(2.0) * T::PI() * mhz * lit::<T>(1e-3)
}

fn tolerance<T: Scalar>() -> T {
    lit::<T>(1e-10).max(T::epsilon() * lit::<T>(64.0))
}

/// ∫ ψ(τ+δ) ψ(δ−τ) cos(Δτ) dτ over the whole line.
fn overlap<T: Scalar>(amp: &BiphotonAmplitude<T>, detuning: T, delay: T) -> Result<T, QuadratureError> {
    let shift = (delay - amp.offset()).abs();
    let reach = shift + amp.support_radius();
    let f = |tau: T| amp.amplitude(tau + delay) * amp.amplitude(delay - tau) * (detuning * tau).cos();
    // Even integrand: integrate [0, reach] and double. Kinks of ψ sit at
    // τ = ±(δ − offset); oscillations get one initial piece per period.
    let mut breaks = vec![T::zero(), reach];
    if shift > T::zero() && shift < reach {
        breaks.push(shift);
    }
    if detuning != T::zero() {
        let period = lit::<T>(2.0) * T::PI() / detuning.abs();
        let pieces = (reach / period).ceil().min(lit::<T>(4000.0));
        let n = pieces.to_usize().unwrap_or(0);
        for k in 1..n {
            breaks.push(reach * lit::<T>(k as f64) / pieces);
        }
    }
    let half = integrate_with_breaks(f, &breaks, tolerance::<T>() / lit::<T>(2.0))?;
    Ok(half.value * lit::<T>(2.0))
}

/// Coincidence probability at angular detuning Δ (rad/ns) and delay δ (ns).
/// An infinite detuning gives exactly ½.
pub fn hom_coincidence<T: Scalar>(amp: &BiphotonAmplitude<T>, detuning: T, delay: T) -> Result<T, HomError> {
    if detuning.is_infinite() {
        return Ok(lit(0.5));
    }
    let half = lit::<T>(0.5);
    Ok(half * (T::one() - overlap(amp, detuning, delay)?))
}

/// Coincidence probability versus detuning at a fixed optical delay.
#[derive(Debug, Clone, PartialEq)]
pub struct HomCurve<T> {
    pub detunings_mhz: Vec<T>,
    pub values: Vec<T>,
    /// ns.
    pub delay: T,
}

pub fn hom_curve<T: Scalar>(amp: &BiphotonAmplitude<T>, detunings_mhz: &[T], delay: T) -> Result<HomCurve<T>, HomError> {
    let values = detunings_mhz
        .iter()
        .map(|&d| hom_coincidence(amp, mhz_to_rad_per_ns(d), delay))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HomCurve { detunings_mhz: detunings_mhz.to_vec(), values, delay })
}

/// V(δ) = 1 − 2 P_c(0, δ).
pub fn hom_visibility<T: Scalar>(amp: &BiphotonAmplitude<T>, delay: T) -> Result<T, HomError> {
    Ok(overlap(amp, T::zero(), delay)?)
}

/// Closed form of the double-exponential visibility,
/// (1 + |δ−offset|/τ₀) exp(−|δ−offset|/τ₀).
pub fn double_exponential_visibility<T: Scalar>(fwhm: T, delay_from_offset: T) -> T {
    let x = delay_from_offset.abs() / (fwhm / (lit::<T>(2.0) * T::LN_2()));
    (T::one() + x) * (-x).exp()
}

/// Cosine similarity of two curves on the same detuning grid.
pub fn hom_similarity<T: Scalar>(a: &HomCurve<T>, b: &HomCurve<T>) -> Result<T, HomError> {
    if a.detunings_mhz != b.detunings_mhz {
        return Err(HomError::GridMismatch);
    }
    Ok(cosine_of(&a.values, &b.values)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityPoint<T> {
    /// ns.
    pub delay: T,
    pub visibility: T,
    pub error: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceFit<T> {
    pub fwhm: T,
    pub error: T,
    pub residual_norm: T,
}

/// Least-squares FWHM such that `hom_visibility` of `template` (shape and
/// offset fixed, width free) matches `points`, weighted by 1/error where
/// errors are positive. The template's own FWHM is the starting value.
pub fn fit_coherence_time<T: Scalar>(points: &[VisibilityPoint<T>], template: &BiphotonAmplitude<T>) -> Result<CoherenceFit<T>, HomError> {
    let distinct = points.iter().any(|p| p.delay != points[0].delay);
    if points.len() < 2 || !distinct {
        return Err(HomError::DegenerateDelays);
    }
    let residuals = |p: &[T], out: &mut [T]| -> bool {
        let Ok(amp) = template.with_fwhm(p[0]) else { return false };
        for (o, pt) in out.iter_mut().zip(points) {
            let Ok(v) = hom_visibility(&amp, pt.delay) else { return false };
            let w = if pt.error > T::zero() { pt.error } else { T::one() };
            *o = (v - pt.visibility) / w;
        }
        true
    };
    let rep = levenberg_marquardt(residuals, &[template.fwhm()], points.len(), LmOptions::default())?;
    Ok(CoherenceFit { fwhm: rep.params[0], error: rep.std_errors[0], residual_norm: rep.residual_norm })
}

/// Visibility implied by a measured waveform w ≈ |ψ|²:
/// Σ √(w(τ+δ) w(δ−τ)) / Σ w, on the waveform's own bin grid with linear
/// interpolation. The error is the standard deviation over `resamples`
/// Gaussian-Poisson redraws of the counts.
pub fn empirical_visibility(w: &TemporalWaveform<f64>, delay: f64, rng: RngSpec, resamples: usize) -> Result<VisibilityPoint<f64>, HomError> {
    let value = waveform_overlap(w, delay)?;
    let mut r = rng.rng();
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let counts: Vec<f64> = w
            .counts()
            .iter()
            .zip(w.errors())
            .map(|(&c, &e)| (c + e * standard_normal(&mut r)).max(0.0))
            .collect();
        let errors = counts.iter().map(|c| c.sqrt()).collect();
        let Ok(ws) = TemporalWaveform::new(w.bin_width(), w.start(), counts, errors) else { continue };
        if let Ok(v) = waveform_overlap(&ws, delay) {
            draws.push(v);
        }
    }
    let error = if draws.len() > 1 {
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        (draws.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (draws.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(VisibilityPoint { delay, visibility: value, error })
}

fn waveform_overlap(w: &TemporalWaveform<f64>, delay: f64) -> Result<f64, HomError> {
    let total = w.total();
    if !(total > 0.0) {
        return Err(HomError::Waveform(WaveformError::ZeroNorm));
    }
    let bw = w.bin_width();
    // density_at is per ns, so Σ √(ab)·bw approximates ∫ √(w w) dτ. The
    // sampling grid is the bin grid shifted so that τ = 0 is a node.
    let reach = (w.start() - delay).abs().max((w.end() - delay).abs());
    let n = (reach / bw).ceil() as i64;
    let mut sum = 0.0;
    for k in -n..=n {
        let tau = k as f64 * bw;
        let a = w.density_at(tau + delay);
        let b = w.density_at(delay - tau);
        sum += (a * b).sqrt();
    }
    Ok(sum * bw / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Shape;
    use approx::assert_relative_eq;

    fn de(fwhm: f64, offset: f64) -> BiphotonAmplitude<f64> {
        BiphotonAmplitude::new(Shape::DoubleExponential, fwhm, offset).unwrap()
    }

    #[test]
    fn perfect_bunching_and_distinguishable_limit() {
        for shape in [Shape::DoubleExponential, Shape::Gaussian] {
            let a = BiphotonAmplitude::new(shape, 50.0, 0.0).unwrap();
            assert!(hom_coincidence(&a, 0.0f64, 0.0).unwrap().abs() < 1e-9);
            assert_eq!(hom_coincidence(&a, f64::INFINITY, 0.0).unwrap(), 0.5);
            assert!((hom_coincidence(&a, 5.0, 0.0).unwrap() - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn double_exponential_visibility_closed_form() {
        for delay in [0.0, 8.0, 20.0, 42.5, 150.0] {
            let v = hom_visibility(&de(50.0, 0.0), delay).unwrap();
            assert!((v - double_exponential_visibility(50.0, delay)).abs() < 1e-9, "δ={delay}");
        }
        // offset shifts the reference point
        let v = hom_visibility(&de(50.0, 10.0), 18.0).unwrap();
        assert!((v - double_exponential_visibility(50.0, 8.0)).abs() < 1e-9);
    }

    #[test]
    fn lorentzian_dip_at_zero_delay() {
        // ∫ e^{−|τ|/τ₀}/(2τ₀) cos Δτ dτ = 1/(1 + (Δτ₀)²)
        let tau0 = 50.0 / (2.0 * std::f64::consts::LN_2);
        for mhz in [0.5, 1.0, 3.0, 10.0] {
            let w = mhz_to_rad_per_ns(mhz);
            let p = hom_coincidence(&de(50.0, 0.0), w, 0.0).unwrap();
            let expect = 0.5 * (1.0 - 1.0 / (1.0 + (w * tau0).powi(2)));
            assert!((p - expect).abs() < 1e-9, "{mhz} MHz");
        }
    }

    #[test]
    fn flat_top_overlap_exceeds_half() {
        // Away from the peak the DE overlap is e^{−δ/τ₀}/(2τ₀) on |τ| < δ plus
        // exponential tails; its transform dips below zero.
        let a = de(50.0, 0.0);
        let max = (1..200)
            .map(|k| hom_coincidence(&a, mhz_to_rad_per_ns(0.05 * k as f64), 42.5).unwrap())
            .fold(0.0, f64::max);
        assert!(max > 0.5 && max < 0.55, "{max}");
    }

    #[test]
    fn detuning_symmetry() {
        let a = BiphotonAmplitude::new(Shape::ExponentialDecay, 40.0, 3.0).unwrap();
        for mhz in [0.3, 2.0, 7.5] {
            let w = mhz_to_rad_per_ns(mhz);
            let p: f64 = hom_coincidence(&a, w, 25.0).unwrap();
            let m: f64 = hom_coincidence(&a, -w, 25.0).unwrap();
            assert!((p - m).abs() < 1e-12);
        }
    }

    #[test]
    fn similarity_and_grid_errors() {
        let grid: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.5).collect();
        let c = hom_curve(&de(50.0, 0.0), &grid, 8.0).unwrap();
        assert_relative_eq!(hom_similarity(&c, &c).unwrap(), 1.0, max_relative = 1e-12);
        let other = hom_curve(&de(50.0, 0.0), &grid[1..], 8.0).unwrap();
        assert_eq!(hom_similarity(&c, &other), Err(HomError::GridMismatch));
        let zero = HomCurve { values: vec![0.0; grid.len()], ..c.clone() };
        assert!(hom_similarity(&c, &zero).is_err());
    }

    #[test]
    fn coherence_fit_round_trip() {
        let truth = de(50.0, 0.0);
        let pts: Vec<VisibilityPoint<f64>> = [5.0, 10.0, 20.0, 30.0, 42.5, 60.0]
            .iter()
            .map(|&d| VisibilityPoint { delay: d, visibility: hom_visibility(&truth, d).unwrap(), error: 0.01 })
            .collect();
        let fit = fit_coherence_time(&pts, &de(30.0, 0.0)).unwrap();
        assert_relative_eq!(fit.fwhm, 50.0, max_relative = 1e-6);
        assert_eq!(fit_coherence_time(&pts[..1], &truth), Err(HomError::DegenerateDelays));
        let same = vec![pts[0]; 3];
        assert_eq!(fit_coherence_time(&same, &truth), Err(HomError::DegenerateDelays));
    }

    #[test]
    fn empirical_visibility_of_exact_waveform() {
        let a = de(50.0, 0.0);
        let w = TemporalWaveform::from_fn(0.25, -600.0, 4800, |t| 1e6 * a.density(t)).unwrap();
        let v = empirical_visibility(&w, 20.0, RngSpec::new(1, 0), 20).unwrap();
        assert!((v.visibility - double_exponential_visibility(50.0, 20.0)).abs() < 1e-3, "{v:?}");
        assert!(v.error > 0.0 && v.error < 0.01);
    }

    #[test]
    fn single_precision() {
        let a = BiphotonAmplitude::<f32>::new(Shape::DoubleExponential, 50.0, 0.0).unwrap();
        let v = hom_visibility(&a, 8.0f32).unwrap();
        assert!((v - double_exponential_visibility(50.0f32, 8.0)).abs() < 1e-4);
    }
}
