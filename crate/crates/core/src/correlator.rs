//! Time-tag correlation analysis: coincidence histograms, normalized
//! correlation functions, heralded g²(0), the Cauchy–Schwarz parameter and
//! waveform reconstruction.
//!
//! All counting is exact integer arithmetic, so parallel, segmented and
//! sequential evaluation agree bit for bit.

use std::ops::Range;

use rayon::prelude::*;

use crate::model::{TimeTagStream, PS_PER_NS, PS_PER_S};
use crate::waveform::{TemporalWaveform, WaveformError};

pub use crate::waveform::{cosine_similarity, cosine_similarity_resampled};

/// Bins with fewer counts than this are flagged as low-statistics.
pub const LOW_STATISTICS_COUNTS: u64 = 10;

/// Stream sizes above which counting is spread over the rayon pool.
const PARALLEL_THRESHOLD: usize = 1 << 15;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CorrelatorError {
    #[error("bin width must be positive")]
    BadBinWidth,
    #[error("window [{tau_min}, {tau_max}) ps is empty or not a multiple of the {bin_width} ps bin")]
    BadWindow { tau_min: i64, tau_max: i64, bin_width: u64 },
    #[error("normalization undefined: channel set {0} has no counts")]
    UndefinedNormalization(&'static str),
    #[error("undefined statistics: {0}")]
    UndefinedStatistics(String),
    #[error("the herald auto-correlation needs two herald channels (split idler), got {0}")]
    NeedSplitHerald(usize),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// Delay window `[tau_min, tau_max)` in ps, cut into bins of `bin_width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Binning {
    pub bin_width: u64,
    pub tau_min: i64,
    pub tau_max: i64,
}

impl Binning {
    pub fn new(bin_width: u64, tau_min: i64, tau_max: i64) -> Result<Self, CorrelatorError> {
        if bin_width == 0 {
            return Err(CorrelatorError::BadBinWidth);
        }
        let bw = bin_width as i64;
        if tau_max <= tau_min || tau_min % bw != 0 || tau_max % bw != 0 {
            return Err(CorrelatorError::BadWindow { tau_min, tau_max, bin_width });
        }
        Ok(Self { bin_width, tau_min, tau_max })
    }

    /// Symmetric window of `half_width` ps on either side of zero, rounded
    /// out to whole bins.
    pub fn symmetric(bin_width: u64, half_width: u64) -> Result<Self, CorrelatorError> {
        if bin_width == 0 {
            return Err(CorrelatorError::BadBinWidth);
        }
        let n = half_width.div_ceil(bin_width).max(1) as i64;
        Self::new(bin_width, -n * bin_width as i64, n * bin_width as i64)
    }

    pub fn len(&self) -> usize {
        ((self.tau_max - self.tau_min) / self.bin_width as i64) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin centers, ns.
    pub fn centers_ns(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| (self.tau_min as f64 + (k as f64 + 0.5) * self.bin_width as f64) / PS_PER_NS)
            .collect()
    }
}

/// Counts of tag pairs (a ∈ A, b ∈ B) binned by b − a.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationHistogram {
    pub binning: Binning,
    pub counts: Vec<u64>,
    /// Tag counts of the two channel sets over `total_time`.
    pub singles: (u64, u64),
    /// Observation time, ps.
    pub total_time: u64,
}

impl CorrelationHistogram {
    /// Singles rates (s⁻¹) of A and B.
    pub fn singles_rates(&self) -> (f64, f64) {
        if self.total_time == 0 {
            return (0.0, 0.0);
        }
        let t = self.total_time as f64 / PS_PER_S;
        (self.singles.0 as f64 / t, self.singles.1 as f64 / t)
    }

    /// True when either channel set had no tags.
    pub fn has_empty_channel(&self) -> bool {
        self.singles.0 == 0 || self.singles.1 == 0
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds the counts, singles and observation time of a histogram over a
    /// disjoint time segment.
    pub fn merge(&mut self, other: &CorrelationHistogram) -> Result<(), CorrelatorError> {
        if self.binning != other.binning {
            let b = other.binning;
            return Err(CorrelatorError::BadWindow { tau_min: b.tau_min, tau_max: b.tau_max, bin_width: b.bin_width });
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.singles.0 += other.singles.0;
        self.singles.1 += other.singles.1;
        self.total_time += other.total_time;
        Ok(())
    }
}

/// Tag times with their index in the parent stream, for self-pair exclusion.
fn select(stream: &TimeTagStream, channels: &[u8]) -> Vec<(u64, usize)> {
    stream
        .tags()
        .iter()
        .enumerate()
        .filter(|(_, t)| channels.contains(&t.channel))
        .map(|(i, t)| (t.time, i))
        .collect()
}

fn overlaps(a: &[u8], b: &[u8]) -> bool {
    a.iter().any(|c| b.contains(c))
}

/// Sweeps `a` against the sorted `b`, adding pair counts into `counts`.
fn count_into(a: &[(u64, usize)], b: &[(u64, usize)], binning: Binning, exclude_self: bool, counts: &mut [u64]) {
    let Some(&(first, _)) = a.first() else { return };
    let bw = binning.bin_width as i64;
    let lower = |t: u64| t as i64 + binning.tau_min;
    let mut lo = b.partition_point(|&(tb, _)| (tb as i64) < lower(first));
    for &(ta, ia) in a {
        let start = lower(ta);
        while lo < b.len() && (b[lo].0 as i64) < start {
            lo += 1;
        }
        let end = ta as i64 + binning.tau_max;
        for &(tb, ib) in &b[lo..] {
            let tb = tb as i64;
            if tb >= end {
                break;
            }
            if exclude_self && ia == ib {
                continue;
            }
            counts[((tb - start) / bw) as usize] += 1;
        }
    }
}

fn count_pairs(a: &[(u64, usize)], b: &[(u64, usize)], binning: Binning, exclude_self: bool, parallel: bool) -> Vec<u64> {
    let n = binning.len();
    if parallel && a.len() > PARALLEL_THRESHOLD {
        let chunk = a.len().div_ceil(rayon::current_num_threads().max(1) * 4).max(1024);
        a.par_chunks(chunk)
            .map(|part| {
                let mut c = vec![0u64; n];
                count_into(part, b, binning, exclude_self, &mut c);
                c
            })
            .reduce(
                || vec![0u64; n],
                |mut x, y| {
                    x.iter_mut().zip(&y).for_each(|(p, q)| *p += q);
                    x
                },
            )
    } else {
        let mut c = vec![0u64; n];
        count_into(a, b, binning, exclude_self, &mut c);
        c
    }
}

/// Coincidence histogram between channel sets `a` and `b` over the whole
/// stream. When the sets share channels a tag is never paired with itself.
/// An empty channel set yields an all-zero histogram with zero singles.
pub fn coincidence_histogram(stream: &TimeTagStream, a: &[u8], b: &[u8], binning: Binning) -> CorrelationHistogram {
    coincidence_histogram_with(stream, a, b, binning, true)
}

/// As [`coincidence_histogram`], choosing explicitly whether to use the
/// thread pool. Results are identical either way.
pub fn coincidence_histogram_with(stream: &TimeTagStream, a: &[u8], b: &[u8], binning: Binning, parallel: bool) -> CorrelationHistogram {
    let ta = select(stream, a);
    let tb = select(stream, b);
    let counts = count_pairs(&ta, &tb, binning, overlaps(a, b), parallel);
    CorrelationHistogram { binning, counts, singles: (ta.len() as u64, tb.len() as u64), total_time: stream.duration() }
}

/// Histogram of one time segment: pairs whose A tag lies in `span` (any B
/// partner), with singles of both sets counted inside `span` and
/// `total_time` as given. Histograms over the spans of [`segment_spans`]
/// merge to exactly the whole-stream histogram.
pub fn coincidence_histogram_segment(
    stream: &TimeTagStream,
    a: &[u8],
    b: &[u8],
    binning: Binning,
    span: Range<u64>,
    total_time: u64,
) -> CorrelationHistogram {
    let ta: Vec<_> = select(stream, a).into_iter().filter(|(t, _)| span.contains(t)).collect();
    let tb = select(stream, b);
    let singles_b = tb.iter().filter(|(t, _)| span.contains(t)).count() as u64;
    let counts = count_pairs(&ta, &tb, binning, overlaps(a, b), false);
    CorrelationHistogram { binning, counts, singles: (ta.len() as u64, singles_b), total_time }
}

/// Splits `[0, duration]` into `n` half-open tag spans with their
/// observation times; the spans cover every valid tag time once and the
/// times sum to `duration`.
pub fn segment_spans(duration: u64, n: usize) -> Vec<(Range<u64>, u64)> {
    let n = n.max(1) as u64;
    (0..n)
        .map(|k| {
            let lo = duration / n * k;
            let hi = if k + 1 == n { duration } else { duration / n * (k + 1) };
            let end = if k + 1 == n { duration + 1 } else { hi };
            (lo..end, hi - lo)
        })
        .collect()
}

/// Whole-stream histogram assembled from `segments` time slices.
pub fn coincidence_histogram_segmented(
    stream: &TimeTagStream,
    a: &[u8],
    b: &[u8],
    binning: Binning,
    segments: usize,
) -> CorrelationHistogram {
    let parts: Vec<CorrelationHistogram> = segment_spans(stream.duration(), segments)
        .into_par_iter()
        .map(|(span, t)| coincidence_histogram_segment(stream, a, b, binning, span, t))
        .collect();
    let mut total = CorrelationHistogram { binning, counts: vec![0; binning.len()], singles: (0, 0), total_time: 0 };
    for p in &parts {
        total.merge(p).expect("same binning");
    }
    total
}

/// A normalized correlation function g(τ).
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    /// Bin centers, ns.
    pub tau: Vec<f64>,
    pub g: Vec<f64>,
    pub errors: Vec<f64>,
    pub counts: Vec<u64>,
    pub low_statistics: Vec<bool>,
    /// Mean g over the outer quarter of the window on each side, a
    /// long-delay cross-check of the accidental-rate normalization.
    pub baseline: f64,
}

/// g[k] = counts[k] / (r_A r_B Δτ T), errors from √counts.
pub fn normalize(h: &CorrelationHistogram) -> Result<Correlation, CorrelatorError> {
    if h.singles.0 == 0 {
        return Err(CorrelatorError::UndefinedNormalization("A"));
    }
    if h.singles.1 == 0 {
        return Err(CorrelatorError::UndefinedNormalization("B"));
    }
    if h.total_time == 0 {
        return Err(CorrelatorError::UndefinedStatistics("zero observation time".into()));
    }
    let accidental = h.singles.0 as f64 * h.singles.1 as f64 * h.binning.bin_width as f64 / h.total_time as f64;
    let g: Vec<f64> = h.counts.iter().map(|&c| c as f64 / accidental).collect();
    let errors = h.counts.iter().map(|&c| (c as f64).sqrt() / accidental).collect();
    let low_statistics = h.counts.iter().map(|&c| c < LOW_STATISTICS_COUNTS).collect();
    let n = g.len();
    let edge = (n / 4).max(1);
    let outer: Vec<f64> = g[..edge].iter().chain(&g[n - edge..]).copied().collect();
    let baseline = outer.iter().sum::<f64>() / outer.len() as f64;
    Ok(Correlation { tau: h.binning.centers_ns(), g, errors, counts: h.counts.clone(), low_statistics, baseline })
}

/// A ratio estimate with its propagated Poisson error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    /// The raw coincidence count behind the estimate.
    pub counts: u64,
}

/// g(0) between two outputs of one split field: coincidences with
/// |b − a| < window/2 normalized by accidentals.
pub fn auto_g2_zero(stream: &TimeTagStream, a: u8, b: u8, window: u64) -> Result<Estimate, CorrelatorError> {
    if window < 2 {
        return Err(CorrelatorError::BadBinWidth);
    }
    let half = (window / 2) as i64;
    let binning = Binning { bin_width: window, tau_min: -half, tau_max: window as i64 - half };
    let h = coincidence_histogram(stream, &[a], &[b], binning);
    let c = normalize(&h)?;
    Ok(Estimate { value: c.g[0], error: c.errors[0], counts: c.counts[0] })
}

/// Herald-conditioned g²(0) = N₁₂₃ N₁ / (N₁₂ N₁₃).
///
/// N₁ counts herald tags (any channel in `heralds`); N₁₂ and N₁₃ count
/// heralds with at least one tag on `a` (resp. `b`) at a delay in `window`
/// (ps, half-open), and N₁₂₃ heralds with both. With N₁₂₃ = 0 the value is
/// 0 and the error is the one-count scale N₁ / (N₁₂ N₁₃).
pub fn heralded_g2_zero(stream: &TimeTagStream, heralds: &[u8], a: u8, b: u8, window: Range<i64>) -> Result<HeraldedG2, CorrelatorError> {
    if window.end <= window.start {
        return Err(CorrelatorError::BadWindow { tau_min: window.start, tau_max: window.end, bin_width: 0 });
    }
    let h = stream.times(heralds);
    let ta = stream.times(&[a]);
    let tb = stream.times(&[b]);
    let hit = |times: &[u64], t: u64| {
        let lo = t as i64 + window.start;
        let hi = t as i64 + window.end;
        let k = times.partition_point(|&x| (x as i64) < lo);
        k < times.len() && (times[k] as i64) < hi
    };
    let (mut n12, mut n13, mut n123) = (0u64, 0u64, 0u64);
    for &t in &h {
        let x = hit(&ta, t);
        let y = hit(&tb, t);
        n12 += x as u64;
        n13 += y as u64;
        n123 += (x && y) as u64;
    }
    let n1 = h.len() as u64;
    if n12 == 0 || n13 == 0 {
        return Err(CorrelatorError::UndefinedStatistics(format!(
            "no herald-conditioned detections (N12 = {n12}, N13 = {n13})"
        )));
    }
    let scale = n1 as f64 / (n12 as f64 * n13 as f64);
    let value = n123 as f64 * scale;
    let error = if n123 == 0 {
        scale
    } else {
        value * (1.0 / n123 as f64 + 1.0 / n12 as f64 + 1.0 / n13 as f64 + 1.0 / n1 as f64).sqrt()
    };
    Ok(HeraldedG2 { value, error, n1, n12, n13, n123 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldedG2 {
    pub value: f64,
    pub error: f64,
    pub n1: u64,
    pub n12: u64,
    pub n13: u64,
    pub n123: u64,
}

/// Default triple-coincidence window: ±3 FWHM around the wavepacket offset.
pub fn default_herald_window(fwhm_ns: f64, offset_ns: f64) -> Range<i64> {
    let c = offset_ns * PS_PER_NS;
    let r = 3.0 * fwhm_ns * PS_PER_NS;
    (c - r).round() as i64..(c + r).round() as i64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchySchwarzResult {
    pub tau: Vec<f64>,
    /// `None` where the denominator estimate is not positive.
    pub c: Vec<Option<f64>>,
    pub c_errors: Vec<Option<f64>>,
    pub bin_width: u64,
    pub g_ii0: Estimate,
    pub g_rr0: Estimate,
    pub cross: Correlation,
}

impl CauchySchwarzResult {
    pub fn low_statistics(&self) -> &[bool] {
        &self.cross.low_statistics
    }

    /// Largest defined C and its bin index.
    pub fn peak(&self) -> Option<(usize, f64)> {
        self.c
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.map(|c| (k, c)))
            .max_by(|x, y| x.1.total_cmp(&y.1))
    }

    /// Significance (C − 1)/σ per bin.
    pub fn violation_sigma(&self) -> Vec<Option<f64>> {
        self.c
            .iter()
            .zip(&self.c_errors)
            .map(|(c, e)| match (c, e) {
                (Some(c), Some(e)) if *e > 0.0 => Some((c - 1.0) / e),
                _ => None,
            })
            .collect()
    }
}

/// C(τ) = g_ir(τ)² / (g_ii(0) g_rr(0)).
///
/// g_ir correlates all herald channels with the merged reemitted channels.
/// g_ii(0) comes from the two halves of the split idler, g_rr(0) from the
/// two reemitted outputs, both over `auto_window` ps.
pub fn cauchy_schwarz(
    stream: &TimeTagStream,
    heralds: &[u8],
    reemit: [u8; 2],
    binning: Binning,
    auto_window: u64,
) -> Result<CauchySchwarzResult, CorrelatorError> {
    if heralds.len() != 2 {
        return Err(CorrelatorError::NeedSplitHerald(heralds.len()));
    }
    let cross = normalize(&coincidence_histogram(stream, heralds, &reemit, binning))?;
    let g_ii0 = auto_g2_zero(stream, heralds[0], heralds[1], auto_window)?;
    let g_rr0 = auto_g2_zero(stream, reemit[0], reemit[1], auto_window)?;
    let denom = g_ii0.value * g_rr0.value;
    let (c, c_errors) = cross
        .g
        .iter()
        .zip(&cross.errors)
        .map(|(&g, &e)| {
            if !(denom > 0.0) {
                return (None, None);
            }
            let c = g * g / denom;
            let rel_ii = g_ii0.error / g_ii0.value;
            let rel_rr = g_rr0.error / g_rr0.value;
            let rel_g = if g > 0.0 { 2.0 * e / g } else { 0.0 };
            (Some(c), Some(c * (rel_g * rel_g + rel_ii * rel_ii + rel_rr * rel_rr).sqrt()))
        })
        .unzip();
    Ok(CauchySchwarzResult { tau: cross.tau.clone(), c, c_errors, bin_width: binning.bin_width, g_ii0, g_rr0, cross })
}

/// Herald-conditioned delay histogram of `signals` relative to `heralds`,
/// the estimator of the two-photon correlation G²(τ). Bin width and window
/// in ps; the waveform axis is in ns. No signal tags gives an all-zero
/// waveform (see [`TemporalWaveform::is_zero`]).
pub fn reconstruct_waveform(
    stream: &TimeTagStream,
    heralds: &[u8],
    signals: &[u8],
    binning: Binning,
) -> Result<TemporalWaveform<f64>, CorrelatorError> {
    let h = coincidence_histogram(stream, heralds, signals, binning);
    Ok(TemporalWaveform::from_counts(
        binning.bin_width as f64 / PS_PER_NS,
        binning.tau_min as f64 / PS_PER_NS,
        &h.counts,
    )?)
}
