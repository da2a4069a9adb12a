//! Binned temporal waveforms and the cosine-similarity fidelity metric.

use crate::fit::{levenberg_marquardt, FitError, LmOptions};
use crate::model::{BiphotonAmplitude, Shape};
use crate::scalar::{lit, to_f64, Scalar};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WaveformError {
    #[error("counts and errors differ in length ({counts} vs {errors})")]
    LengthMismatch { counts: usize, errors: usize },
    #[error("waveform entries must be finite and non-negative (index {0})")]
    Negative(usize),
    #[error("bin width must be positive")]
    BadBinWidth,
    #[error("waveforms are on different bin grids")]
    GridMismatch,
    #[error("cosine similarity undefined for a zero-norm waveform")]
    ZeroNorm,
    #[error("waveform is empty")]
    Empty,
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Histogram of signal-herald delays (ns grid) with Poisson errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalWaveform<T> {
    bin_width: T,
    start: T,
    counts: Vec<T>,
    errors: Vec<T>,
}

impl<T: Scalar> TemporalWaveform<T> {
    pub fn new(bin_width: T, start: T, counts: Vec<T>, errors: Vec<T>) -> Result<Self, WaveformError> {
        if !(bin_width > T::zero()) || !bin_width.is_finite() {
            return Err(WaveformError::BadBinWidth);
        }
        if counts.len() != errors.len() {
            return Err(WaveformError::LengthMismatch { counts: counts.len(), errors: errors.len() });
        }
        if let Some(i) = counts
            .iter()
            .chain(errors.iter())
            .position(|&v| !(v >= T::zero()) || !v.is_finite())
        {
            return Err(WaveformError::Negative(i % counts.len().max(1)));
        }
        Ok(Self { bin_width, start, counts, errors })
    }

    /// Builds a waveform from raw counts with √N errors.
    pub fn from_counts(bin_width: T, start: T, counts: &[u64]) -> Result<Self, WaveformError> {
        let c: Vec<T> = counts.iter().map(|&n| lit::<T>(n as f64)).collect();
        let e: Vec<T> = c.iter().map(|v| v.sqrt()).collect();
        Self::new(bin_width, start, c, e)
    }

    /// Samples `f` at the bin centers (no errors).
    pub fn from_fn(bin_width: T, start: T, n: usize, f: impl Fn(T) -> T) -> Result<Self, WaveformError> {
        let half = lit::<T>(0.5);
        let counts: Vec<T> = (0..n).map(|k| f(start + (lit::<T>(k as f64) + half) * bin_width)).collect();
        let errors = vec![T::zero(); n];
        Self::new(bin_width, start, counts, errors)
    }

    pub fn bin_width(&self) -> T {
        self.bin_width
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn end(&self) -> T {
        self.start + self.bin_width * lit::<T>(self.counts.len() as f64)
    }

    pub fn counts(&self) -> &[T] {
        &self.counts
    }

    pub fn errors(&self) -> &[T] {
        &self.errors
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn center(&self, k: usize) -> T {
        self.start + (lit::<T>(k as f64) + lit::<T>(0.5)) * self.bin_width
    }

    pub fn centers(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.center(k)).collect()
    }

    pub fn total(&self) -> T {
        self.counts.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == T::zero())
    }

    /// Same grid, scaled to unit area (per-ns density).
    pub fn normalized(&self) -> Result<Self, WaveformError> {
        let area = self.total() * self.bin_width;
        if !(area > T::zero()) {
            return Err(WaveformError::ZeroNorm);
        }
        Ok(Self {
            bin_width: self.bin_width,
            start: self.start,
            counts: self.counts.iter().map(|&c| c / area).collect(),
            errors: self.errors.iter().map(|&e| e / area).collect(),
        })
    }

    fn same_grid(&self, other: &Self) -> bool {
        let tol = self.bin_width * lit::<T>(1e-9);
        self.len() == other.len()
            && (self.bin_width - other.bin_width).abs() <= tol
            && (self.start - other.start).abs() <= tol
    }

    /// Count density (per ns) at time `t` by linear interpolation between bin
    /// centers; zero outside the covered range.
    pub fn density_at(&self, t: T) -> T {
        if self.is_empty() || t < self.start || t > self.end() {
            return T::zero();
        }
        let pos = (t - self.start) / self.bin_width - lit::<T>(0.5);
        let n = self.len();
        if pos <= T::zero() {
            return self.counts[0] / self.bin_width;
        }
        let i = pos.floor().to_usize().unwrap_or(0);
        if i + 1 >= n {
            return self.counts[n - 1] / self.bin_width;
        }
        let f = pos - lit::<T>(i as f64);
        (self.counts[i] * (T::one() - f) + self.counts[i + 1] * f) / self.bin_width
    }

    /// Resamples onto a new grid, preserving counts per unit time.
    pub fn resample(&self, start: T, bin_width: T, n: usize) -> Result<Self, WaveformError> {
        if !(bin_width > T::zero()) {
            return Err(WaveformError::BadBinWidth);
        }
        let half = lit::<T>(0.5);
        let counts: Vec<T> = (0..n)
            .map(|k| self.density_at(start + (lit::<T>(k as f64) + half) * bin_width) * bin_width)
            .collect();
        let errors = counts.iter().map(|c| c.sqrt()).collect();
        Self::new(bin_width, start, counts, errors)
    }

    /// Index and value of the largest bin.
    pub fn peak(&self) -> Option<(usize, T)> {
        self.counts
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, c)| match best {
                Some((_, b)) if b >= c => best,
                _ => Some((i, c)),
            })
    }

    /// Full width at half maximum from the outermost half-maximum crossings,
    /// linearly interpolated between bin centers.
    pub fn fwhm_crossing(&self) -> Option<T> {
        let (ip, peak) = self.peak()?;
        if !(peak > T::zero()) {
            return None;
        }
        let half = peak * lit::<T>(0.5);
        let c = &self.counts;
        let left = (0..ip).rev().find(|&i| c[i] < half).map(|i| {
            let f = (half - c[i]) / (c[i + 1] - c[i]);
            self.center(i) + f * self.bin_width
        });
        let right = (ip + 1..c.len()).find(|&i| c[i] < half).map(|i| {
            let f = (c[i - 1] - half) / (c[i - 1] - c[i]);
            self.center(i - 1) + f * self.bin_width
        });
        // A sharp front edge has no left crossing inside the histogram; the
        // edge bin then marks the start.
        let left = left.unwrap_or(self.start + lit::<T>(ip as f64) * self.bin_width);
        Some(right? - left)
    }
}

/// Σ w1ₖ w2ₖ / (‖w1‖ ‖w2‖) on a shared grid.
pub fn cosine_similarity<T: Scalar>(w1: &TemporalWaveform<T>, w2: &TemporalWaveform<T>) -> Result<T, WaveformError> {
    if !w1.same_grid(w2) {
        return Err(WaveformError::GridMismatch);
    }
    cosine_of(w1.counts(), w2.counts())
}

/// Resamples `w2` onto the grid of `w1`, then takes the cosine similarity.
pub fn cosine_similarity_resampled<T: Scalar>(w1: &TemporalWaveform<T>, w2: &TemporalWaveform<T>) -> Result<T, WaveformError> {
    let r = w2.resample(w1.start(), w1.bin_width(), w1.len())?;
    cosine_similarity(w1, &r)
}

/// Cosine of the angle between two equal-length vectors.
pub fn cosine_of<T: Scalar>(a: &[T], b: &[T]) -> Result<T, WaveformError> {
    if a.len() != b.len() {
        return Err(WaveformError::GridMismatch);
    }
    let dot = a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    let na = a.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    let nb = b.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    if !(na > T::zero()) || !(nb > T::zero()) {
        return Err(WaveformError::ZeroNorm);
    }
    Ok((dot / (na * nb)).min(T::one()))
}

/// Result of fitting a wavepacket shape plus flat background to a waveform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFit<T> {
    pub amplitude: BiphotonAmplitude<T>,
    pub fwhm_error: T,
    pub offset_error: T,
    /// Total counts in the wavepacket.
    pub area: T,
    /// Flat background, counts per bin.
    pub background: T,
    pub residual_norm: T,
}

/// Least-squares fit of `area·P(bin) + background` where `P(bin)` is the
/// probability mass of `shape` inside each bin. Bins are weighted by their
/// Poisson errors (floored at one count).
pub fn fit_shape<T: Scalar>(w: &TemporalWaveform<T>, shape: Shape) -> Result<ShapeFit<T>, WaveformError> {
    if w.len() < 5 {
        return Err(FitError::TooFewPoints { needed: 5, got: w.len() }.into());
    }
    let (ip, peak) = w.peak().ok_or(WaveformError::Empty)?;
    if !(peak > T::zero()) {
        return Err(WaveformError::ZeroNorm);
    }
    let fwhm0 = w.fwhm_crossing().unwrap_or(w.bin_width * lit::<T>(5.0)).max(w.bin_width);
    let offset0 = match shape {
        Shape::ExponentialDecay => w.start + lit::<T>(ip as f64) * w.bin_width,
        _ => w.center(ip),
    };
    let edges: Vec<T> = (0..=w.len()).map(|k| w.start + lit::<T>(k as f64) * w.bin_width).collect();
    let weights: Vec<T> = w.errors.iter().map(|&e| T::one() / e.max(T::one())).collect();
    let start = [w.total(), fwhm0, offset0, T::zero()];
    let report = levenberg_marquardt(
        |p: &[T], r: &mut [T]| {
            let amp = match BiphotonAmplitude::new(shape, p[1], p[2]) {
                Ok(a) => a,
                Err(_) => return false,
            };
            let mut lo = amp.cdf(edges[0]);
            for k in 0..w.len() {
                let hi = amp.cdf(edges[k + 1]);
                r[k] = (p[0] * (hi - lo) + p[3] - w.counts[k]) * weights[k];
                lo = hi;
            }
            true
        },
        &start,
        w.len(),
        LmOptions::default(),
    )?;
    let p = &report.params;
    Ok(ShapeFit {
        amplitude: BiphotonAmplitude::new(shape, p[1], p[2]).map_err(|_| FitError::BadStart)?,
        fwhm_error: report.std_errors[1],
        offset_error: report.std_errors[2],
        area: p[0],
        background: p[3],
        residual_norm: report.residual_norm,
    })
}

/// Convenience for reports: fwhm of a fitted shape in f64.
pub fn fitted_fwhm<T: Scalar>(fit: &ShapeFit<T>) -> f64 {
    to_f64(fit.amplitude.fwhm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_waveforms_have_unit_similarity() {
        let w = TemporalWaveform::<f64>::from_counts(1.0, 0.0, &[1, 5, 9, 3]).unwrap();
        assert_relative_eq!(cosine_similarity(&w, &w).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn disjoint_supports_are_orthogonal() {
        let a = TemporalWaveform::<f64>::from_counts(1.0, 0.0, &[3, 4, 0, 0]).unwrap();
        let b = TemporalWaveform::<f64>::from_counts(1.0, 0.0, &[0, 0, 2, 7]).unwrap();
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn zero_norm_and_grid_errors() {
        let a = TemporalWaveform::<f64>::from_counts(1.0, 0.0, &[0, 0]).unwrap();
        let b = TemporalWaveform::<f64>::from_counts(1.0, 0.0, &[1, 0]).unwrap();
        let c = TemporalWaveform::<f64>::from_counts(2.0, 0.0, &[1, 0]).unwrap();
        assert_eq!(cosine_similarity(&a, &b), Err(WaveformError::ZeroNorm));
        assert_eq!(cosine_similarity(&b, &c), Err(WaveformError::GridMismatch));
        assert!(cosine_similarity_resampled(&b, &c).is_ok());
    }

    #[test]
    fn rejects_negative_entries() {
        assert!(TemporalWaveform::new(1.0, 0.0, vec![1.0, -1.0], vec![1.0, 1.0]).is_err());
        assert!(TemporalWaveform::new(1.0, 0.0, vec![1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn fwhm_of_sampled_gaussian() {
        let g = BiphotonAmplitude::new(Shape::Gaussian, 40.0, 0.0).unwrap();
        let w = TemporalWaveform::from_fn(0.5, -150.0, 600, |t| g.density(t)).unwrap();
        assert_relative_eq!(w.fwhm_crossing().unwrap(), 40.0, max_relative = 1e-3);
    }

    #[test]
    fn fit_recovers_noiseless_shape() {
        let de = BiphotonAmplitude::new(Shape::DoubleExponential, 50.0, 4.0).unwrap();
        let counts: Vec<f64> = (0..400)
            .map(|k| {
                let lo = -200.0 + k as f64;
                1e5 * (de.cdf(lo + 1.0) - de.cdf(lo)) + 3.0
            })
            .collect();
        let errs = counts.iter().map(|c| c.sqrt()).collect();
        let w = TemporalWaveform::new(1.0, -200.0, counts, errs).unwrap();
        let fit = fit_shape(&w, Shape::DoubleExponential).unwrap();
        assert_relative_eq!(fit.amplitude.fwhm(), 50.0, max_relative = 1e-6);
        assert_relative_eq!(fit.amplitude.offset(), 4.0, epsilon = 1e-5);
        assert_relative_eq!(fit.background, 3.0, max_relative = 1e-4);
    }
}
