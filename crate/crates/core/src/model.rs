//! Shared domain types: time tags and the biphoton temporal amplitude.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use statrs::function::erf;

use crate::rng::{open01, RngSpec};
use crate::scalar::{lit, to_f64, Scalar};

/// Herald (idler) detector D1.
pub const CH_HERALD: u8 = 0;
/// First reemitted-arm detector D2.
pub const CH_REEMIT_A: u8 = 1;
/// Second reemitted-arm detector D3.
pub const CH_REEMIT_B: u8 = 2;
/// Second idler detector, only present when the idler arm is split.
pub const CH_HERALD_SPLIT: u8 = 3;

/// Picoseconds per nanosecond.
pub const PS_PER_NS: f64 = 1e3;
/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("fwhm must be positive and finite, got {0}")]
    InvalidFwhm(f64),
    #[error("offset must be finite, got {0}")]
    InvalidOffset(f64),
    #[error("tag {index} at {time} ps is earlier than its predecessor")]
    Unsorted { index: usize, time: u64 },
    #[error("tag {index} at {time} ps lies past the stream duration {duration} ps")]
    PastDuration { index: usize, time: u64, duration: u64 },
    #[error("unknown wavepacket shape `{0}`")]
    UnknownShape(String),
}

/// One detection event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeTag {
    /// Picoseconds since the stream origin.
    pub time: u64,
    pub channel: u8,
}

impl TimeTag {
    pub const fn new(time: u64, channel: u8) -> Self {
        Self { time, channel }
    }
}

/// Detection events of one acquisition, sorted by time.
///
/// Ties are ordered by channel so that merged streams have a canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimeTagStream {
    tags: Vec<TimeTag>,
    duration: u64,
}

impl TimeTagStream {
    /// Validates ordering and the duration bound.
    pub fn new(tags: Vec<TimeTag>, duration: u64) -> Result<Self, ModelError> {
        for (i, w) in tags.windows(2).enumerate() {
            if w[1].time < w[0].time {
                return Err(ModelError::Unsorted { index: i + 1, time: w[1].time });
            }
        }
        if let Some((index, t)) = tags.iter().enumerate().find(|(_, t)| t.time > duration) {
            return Err(ModelError::PastDuration { index, time: t.time, duration });
        }
        Ok(Self { tags, duration })
    }

    /// Sorts the tags (time, then channel) and drops any past `duration`.
    pub fn from_unsorted(mut tags: Vec<TimeTag>, duration: u64) -> Self {
        tags.retain(|t| t.time <= duration);
        tags.sort_unstable();
        Self { tags, duration }
    }

    pub fn empty(duration: u64) -> Self {
        Self { tags: Vec::new(), duration }
    }

    /// Merges several streams into one; the duration is the longest input.
    pub fn merge<'a>(streams: impl IntoIterator<Item = &'a TimeTagStream>) -> Self {
        let mut tags = Vec::new();
        let mut duration = 0;
        for s in streams {
            tags.extend_from_slice(&s.tags);
            duration = duration.max(s.duration);
        }
        tags.sort_unstable();
        Self { tags, duration }
    }

    pub fn tags(&self) -> &[TimeTag] {
        &self.tags
    }

    pub fn into_tags(self) -> Vec<TimeTag> {
        self.tags
    }

    pub fn duration(&self) -> u64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn channels(&self) -> BTreeSet<u8> {
        self.tags.iter().map(|t| t.channel).collect()
    }

    /// Sorted times of all tags whose channel is in `channels`.
    pub fn times(&self, channels: &[u8]) -> Vec<u64> {
        self.tags
            .iter()
            .filter(|t| channels.contains(&t.channel))
            .map(|t| t.time)
            .collect()
    }

    pub fn count(&self, channel: u8) -> usize {
        self.tags.iter().filter(|t| t.channel == channel).count()
    }

    /// Same tags observed over a longer acquisition.
    pub fn with_duration(mut self, duration: u64) -> Result<Self, ModelError> {
        if let Some(last) = self.tags.last() {
            if last.time > duration {
                return Err(ModelError::PastDuration {
                    index: self.tags.len() - 1,
                    time: last.time,
                    duration,
                });
            }
        }
        self.duration = duration;
        Ok(self)
    }
}

/// Temporal shape of the signal-idler correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    /// Two-sided exponential, the natural output of the cavity-enhanced source.
    DoubleExponential,
    /// One-sided exponential with a sharp front edge at `offset`.
    ExponentialDecay,
    Gaussian,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::DoubleExponential, Shape::ExponentialDecay, Shape::Gaussian];

    pub fn name(&self) -> &'static str {
        match self {
            Shape::DoubleExponential => "double-exponential",
            Shape::ExponentialDecay => "exponential-decay",
            Shape::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "double-exponential" | "double_exponential" | "de" => Ok(Shape::DoubleExponential),
            "exponential-decay" | "exponential_decay" | "exp" | "ed" => Ok(Shape::ExponentialDecay),
            "gaussian" | "gauss" => Ok(Shape::Gaussian),
            other => Err(ModelError::UnknownShape(other.to_string())),
        }
    }
}

/// Normalized temporal intensity |ψ(τ)|² of the signal photon relative to
/// its herald, parametrized by its FWHM (ns) and position (ns).
///
/// For `DoubleExponential` and `Gaussian` the offset is the center; for
/// `ExponentialDecay` it is the front edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiphotonAmplitude<T> {
    shape: Shape,
    fwhm: T,
    offset: T,
}

impl<T: Scalar> BiphotonAmplitude<T> {
    pub fn new(shape: Shape, fwhm: T, offset: T) -> Result<Self, ModelError> {
        if !(fwhm > T::zero()) || !fwhm.is_finite() {
            return Err(ModelError::InvalidFwhm(to_f64(fwhm)));
        }
        if !offset.is_finite() {
            return Err(ModelError::InvalidOffset(to_f64(offset)));
        }
        Ok(Self { shape, fwhm, offset })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn fwhm(&self) -> T {
        self.fwhm
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn with_fwhm(&self, fwhm: T) -> Result<Self, ModelError> {
        Self::new(self.shape, fwhm, self.offset)
    }

    /// Decay constant τ₀ for the exponential shapes, σ for the Gaussian.
    pub fn width_parameter(&self) -> T {
        let ln2 = T::LN_2();
        match self.shape {
            Shape::DoubleExponential => self.fwhm / (lit::<T>(2.0) * ln2),
            Shape::ExponentialDecay => self.fwhm / ln2,
            Shape::Gaussian => self.fwhm / (lit::<T>(8.0) * ln2).sqrt(),
        }
    }

    /// |ψ(τ)|² in ns⁻¹.
    pub fn density(&self, tau: T) -> T {
        let x = tau - self.offset;
        let w = self.width_parameter();
        match self.shape {
            Shape::DoubleExponential => (-x.abs() / w).exp() / (lit::<T>(2.0) * w),
            Shape::ExponentialDecay => {
                if x < T::zero() {
                    T::zero()
                } else {
                    (-x / w).exp() / w
                }
            }
            Shape::Gaussian => {
                let two_pi = lit::<T>(2.0) * T::PI();
                (-(x * x) / (lit::<T>(2.0) * w * w)).exp() / (w * two_pi.sqrt())
            }
        }
    }

    /// Real amplitude ψ(τ) = √|ψ(τ)|².
    pub fn amplitude(&self, tau: T) -> T {
        self.density(tau).sqrt()
    }

    pub fn cdf(&self, tau: T) -> T {
        let x = tau - self.offset;
        let w = self.width_parameter();
        let half = lit::<T>(0.5);
        match self.shape {
            Shape::DoubleExponential => {
                if x < T::zero() {
                    half * (x / w).exp()
                } else {
                    T::one() - half * (-x / w).exp()
                }
            }
            Shape::ExponentialDecay => {
                if x < T::zero() {
                    T::zero()
                } else {
                    -(-x / w).exp_m1()
                }
            }
            Shape::Gaussian => {
                let z = to_f64(x / (w * T::SQRT_2()));
                lit::<T>(0.5 * (1.0 + erf::erf(z)))
            }
        }
    }

    /// Inverse CDF on (0, 1).
    pub fn quantile(&self, u: T) -> T {
        let w = self.width_parameter();
        let half = lit::<T>(0.5);
        let two = lit::<T>(2.0);
        let x = match self.shape {
            Shape::DoubleExponential => {
                if u < half {
                    w * (two * u).ln()
                } else {
                    -w * (two * (T::one() - u)).ln()
                }
            }
            Shape::ExponentialDecay => -w * (-u).ln_1p(),
            Shape::Gaussian => w * T::SQRT_2() * lit::<T>(erf::erf_inv(to_f64(two * u - T::one()))),
        };
        self.offset + x
    }

    /// Points where the density is not smooth, for quadrature breakpoints.
    pub fn kinks(&self) -> Vec<T> {
        match self.shape {
            Shape::DoubleExponential | Shape::ExponentialDecay => vec![self.offset],
            Shape::Gaussian => Vec::new(),
        }
    }

    /// Half-width beyond which the density is negligible (< 1e-17 relative).
    pub fn support_radius(&self) -> T {
        lit::<T>(30.0) * self.fwhm
    }
}

impl BiphotonAmplitude<f64> {
    /// Inverse CDF evaluated with `libm` so that draws are bit-identical
    /// across platforms.
    pub fn quantile_portable(&self, u: f64) -> f64 {
        let w = self.width_parameter();
        let x = match self.shape {
            Shape::DoubleExponential => {
                if u < 0.5 {
                    w * libm::log(2.0 * u)
                } else {
                    -w * libm::log(2.0 * (1.0 - u))
                }
            }
            Shape::ExponentialDecay => -w * libm::log1p(-u),
            Shape::Gaussian => w * std::f64::consts::SQRT_2 * erf::erf_inv(2.0 * u - 1.0),
        };
        self.offset + x
    }
}

/// Free-function form of [`BiphotonAmplitude::density`].
pub fn evaluate_density<T: Scalar>(amp: &BiphotonAmplitude<T>, tau: T) -> T {
    amp.density(tau)
}

/// Draws one signal-idler delay (ns) by inverse-CDF sampling.
pub fn sample_delay<R: Rng + ?Sized>(amp: &BiphotonAmplitude<f64>, rng: &mut R) -> f64 {
    amp.quantile_portable(open01(rng))
}

/// `n` delays drawn from the stream described by `spec`.
pub fn sample_delays(amp: &BiphotonAmplitude<f64>, spec: RngSpec, n: usize) -> Vec<f64> {
    let mut rng = spec.rng();
    (0..n).map(|_| sample_delay(amp, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn de50() -> BiphotonAmplitude<f64> {
        BiphotonAmplitude::new(Shape::DoubleExponential, 50.0, 0.0).unwrap()
    }

    #[test]
    fn double_exponential_half_maximum_at_half_fwhm() {
        let a = de50();
        assert_relative_eq!(a.density(25.0), 0.5 * a.density(0.0), max_relative = 1e-14);
        assert_relative_eq!(a.density(-25.0), 0.5 * a.density(0.0), max_relative = 1e-14);
    }

    #[test]
    fn double_exponential_peak_value() {
        // 1/(2 τ0), τ0 = 50/(2 ln 2) = 36.067 ns
        assert_relative_eq!(de50().density(0.0), 0.013_862_943_611_198_906, max_relative = 1e-12);
    }

    #[test]
    fn exponential_decay_and_gaussian_fwhm() {
        let ed = BiphotonAmplitude::new(Shape::ExponentialDecay, 20.0, 5.0).unwrap();
        assert_relative_eq!(ed.density(25.0), 0.5 * ed.density(5.0), max_relative = 1e-13);
        assert_eq!(ed.density(4.999), 0.0);
        let g = BiphotonAmplitude::new(Shape::Gaussian, 40.0, -3.0).unwrap();
        assert_relative_eq!(g.density(17.0), 0.5 * g.density(-3.0), max_relative = 1e-13);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for shape in Shape::ALL {
            let a = BiphotonAmplitude::new(shape, 50.0, 3.0).unwrap();
            for &u in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
                let x = a.quantile(u);
                assert_relative_eq!(a.cdf(x), u, max_relative = 1e-9, epsilon = 1e-12);
                assert_relative_eq!(a.quantile_portable(u), x, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let a = BiphotonAmplitude::<f32>::new(Shape::DoubleExponential, 50.0, 0.0).unwrap();
        assert!((a.density(0.0) - 0.013_862_944_f32).abs() < 1e-7);
        assert!((a.cdf(a.quantile(0.25)) - 0.25).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BiphotonAmplitude::new(Shape::Gaussian, 0.0, 0.0).is_err());
        assert!(BiphotonAmplitude::new(Shape::Gaussian, -1.0, 0.0).is_err());
        assert!(BiphotonAmplitude::new(Shape::Gaussian, f64::NAN, 0.0).is_err());
        assert!(BiphotonAmplitude::new(Shape::Gaussian, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn stream_validation() {
        let tags = vec![TimeTag::new(5, 0), TimeTag::new(3, 1)];
        assert_eq!(
            TimeTagStream::new(tags.clone(), 10),
            Err(ModelError::Unsorted { index: 1, time: 3 })
        );
        let s = TimeTagStream::from_unsorted(tags, 10);
        assert_eq!(s.tags()[0], TimeTag::new(3, 1));
        assert!(TimeTagStream::new(vec![TimeTag::new(11, 0)], 10).is_err());
        assert_eq!(s.times(&[0]), vec![5]);
    }

    #[test]
    fn shape_parsing() {
        assert_eq!("gaussian".parse::<Shape>().unwrap(), Shape::Gaussian);
        assert_eq!("DE".parse::<Shape>().unwrap(), Shape::DoubleExponential);
        assert!("square".parse::<Shape>().is_err());
    }
}
