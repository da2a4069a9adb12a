//! The experimental chain between source and time tagger: EOM shaping,
//! plasmonic sample, beam splitter and single-photon detectors.
//!
//! Every stage is a Bernoulli thinning (or routing) of discrete photons.

use crate::model::{BiphotonAmplitude, TimeTag, TimeTagStream, CH_HERALD, CH_HERALD_SPLIT, CH_REEMIT_A, CH_REEMIT_B, PS_PER_NS, PS_PER_S};
use crate::rng::{exponential, open01, standard_normal, RngSpec};
use crate::source::{generate_pairs_segmented, EventKind, PairEvent, SourceConfig, SourceError};
use crate::spectrum::{SpectrumError, TransmissionSpectrum};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OpticsError {
    #[error("modulation: {0}")]
    Modulation(String),
    #[error("{name} must lie in [0, 1], got {value}")]
    Fraction { name: &'static str, value: f64 },
    #[error("{name} must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("sample: {0}")]
    Sample(#[from] SpectrumError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

fn fraction(name: &'static str, value: f64) -> Result<(), OpticsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(OpticsError::Fraction { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), OpticsError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(OpticsError::Negative { name, value })
    }
}

/// Amplitude transmission m(t) of the electro-optic modulator as a function
/// of the time t (ns) elapsed since the herald. Photons survive with
/// probability m(t)².
#[derive(Debug, Clone, PartialEq)]
pub enum ModulationFunction {
    Identity,
    /// Opens at `edge`; closes again after `gate` ns if given.
    Heaviside { edge: f64, gate: Option<f64> },
    /// Gaussian intensity window m² = exp(−(t−center)²/2σ²) of the given FWHM.
    Gaussian { center: f64, fwhm: f64 },
    /// m sampled at `start + k·step`, linearly interpolated. Outside the grid
    /// the nearer edge value applies.
    Tabulated { start: f64, step: f64, values: Vec<f64> },
}

impl ModulationFunction {
    pub fn validate(&self) -> Result<(), OpticsError> {
        let bad = |msg: String| Err(OpticsError::Modulation(msg));
        match self {
            ModulationFunction::Identity => Ok(()),
            ModulationFunction::Heaviside { edge, gate } => {
                if !edge.is_finite() {
                    return bad("Heaviside edge must be finite".into());
                }
                match gate {
                    Some(g) if !(*g > 0.0) => bad(format!("Heaviside gate must be positive, got {g}")),
                    _ => Ok(()),
                }
            }
            ModulationFunction::Gaussian { center, fwhm } => {
                if !center.is_finite() || !(*fwhm > 0.0) || !fwhm.is_finite() {
                    bad(format!("Gaussian window needs finite center and positive fwhm (got {center}, {fwhm})"))
                } else {
                    Ok(())
                }
            }
            ModulationFunction::Tabulated { start, step, values } => {
                if values.is_empty() || !(*step > 0.0) || !start.is_finite() {
                    return bad("tabulated modulation needs values and a positive step".into());
                }
                if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return bad(format!("tabulated amplitude {v} outside [0, 1]"));
                }
                Ok(())
            }
        }
    }

    /// m(t), and whether t fell outside a tabulated grid.
    pub fn amplitude(&self, t: f64) -> (f64, bool) {
        match self {
            ModulationFunction::Identity => (1.0, false),
            ModulationFunction::Heaviside { edge, gate } => {
                let open = t >= *edge && gate.map_or(true, |g| t < edge + g);
                (if open { 1.0 } else { 0.0 }, false)
            }
            ModulationFunction::Gaussian { center, fwhm } => {
                if !t.is_finite() {
                    return (0.0, false);
                }
                let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
                let z = (t - center) / sigma;
                ((-z * z / 4.0).exp(), false)
            }
            ModulationFunction::Tabulated { start, step, values } => {
                let x = (t - start) / step;
                let last = values.len() - 1;
                if !(x >= 0.0) {
                    return (values[0], true);
                }
                if x > last as f64 {
                    return (values[last], true);
                }
                let k = (x.floor() as usize).min(last);
                if k == last {
                    return (values[last], false);
                }
                let f = x - k as f64;
                (values[k] * (1.0 - f) + values[k + 1] * f, false)
            }
        }
    }

    pub fn transmission(&self, t: f64) -> f64 {
        let m = self.amplitude(t).0;
        m * m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationOutcome {
    pub events: Vec<PairEvent>,
    /// Paired signal photons whose delay fell outside a tabulated grid.
    pub out_of_grid: usize,
}

/// Gates every signal photon with probability m(t_rel)². For paired photons
/// t_rel is the delay from their own idler. Unpaired background photons see
/// the modulator as driven by the most recent idler emission before them,
/// or t_rel = +∞ if there is none. Idler photons pass untouched; events
/// left with no photon are removed.
pub fn apply_modulation(events: &[PairEvent], m: &ModulationFunction, rng: RngSpec) -> Result<ModulationOutcome, OpticsError> {
    m.validate()?;
    if *m == ModulationFunction::Identity {
        return Ok(ModulationOutcome { events: events.to_vec(), out_of_grid: 0 });
    }
    let mut idlers: Vec<i64> = events.iter().filter_map(|e| e.idler_time).collect();
    idlers.sort_unstable();
    let mut r = rng.rng();
    let mut out = Vec::with_capacity(events.len());
    let mut out_of_grid = 0;
    for e in events {
        let Some(s) = e.signal_time else {
            out.push(*e);
            continue;
        };
        let t_rel = match e.idler_time {
            Some(i) => (s - i) as f64 / PS_PER_NS,
            None => match idlers.partition_point(|&i| i <= s) {
                0 => f64::INFINITY,
                k => (s - idlers[k - 1]) as f64 / PS_PER_NS,
            },
        };
        let (amp, outside) = m.amplitude(t_rel);
        if outside && e.idler_time.is_some() {
            out_of_grid += 1;
        }
        if open01(&mut r) < amp * amp {
            out.push(*e);
        } else if e.idler_time.is_some() {
            out.push(PairEvent { signal_time: None, ..*e });
        }
    }
    Ok(ModulationOutcome { events: out, out_of_grid })
}

/// Uniform sampling grid for tabulated modulations, ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self, OpticsError> {
        if !(step > 0.0) || len < 2 || !start.is_finite() {
            return Err(OpticsError::Modulation("grid needs a positive step and at least two points".into()));
        }
        Ok(Self { start, step, len })
    }

    /// A grid spanning ±`radius` ns around `center`.
    pub fn around(center: f64, radius: f64, step: f64) -> Result<Self, OpticsError> {
        let len = (2.0 * radius / step).round() as usize + 1;
        Self::new(center - radius, step, len)
    }

    pub fn point(&self, k: usize) -> f64 {
        self.start + self.step * k as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|k| self.point(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedModulation {
    pub function: ModulationFunction,
    /// Largest intensity ratio target/input kept; m² = min(ratio, gain)/gain.
    pub gain: f64,
    /// Fraction of the target mass (on the grid) that the modulator cannot
    /// deliver because it would need m > 1.
    pub clipped_mass: f64,
}

/// Modulation that reshapes `input` into `target`: m(t)² ∝ target/input,
/// scaled so max m = 1. `max_gain` caps the ratio that is honoured; with
/// `None` the cap is the largest ratio on the grid, so only points where the
/// input vanishes are clipped.
pub fn derive_modulation_for_target(
    input: &BiphotonAmplitude<f64>,
    target: &BiphotonAmplitude<f64>,
    grid: TimeGrid,
    max_gain: Option<f64>,
) -> Result<DerivedModulation, OpticsError> {
    let ratios: Vec<Option<f64>> = grid
        .points()
        .map(|t| {
            let i = input.density(t);
            (i > 0.0).then(|| target.density(t) / i)
        })
        .collect();
    let max_ratio = ratios.iter().flatten().copied().fold(0.0, f64::max);
    if !(max_ratio > 0.0) || !max_ratio.is_finite() {
        return Err(OpticsError::Modulation("target and input do not overlap on the grid".into()));
    }
    let gain = match max_gain {
        Some(g) if g > 0.0 => g.min(max_ratio),
        Some(g) => return Err(OpticsError::Modulation(format!("max_gain must be positive, got {g}"))),
        None => max_ratio,
    };
    let values: Vec<f64> = ratios.iter().map(|r| r.map_or(0.0, |r| (r.min(gain) / gain).sqrt())).collect();
    let (mut wanted, mut lost) = (0.0, 0.0);
    for (t, r) in grid.points().zip(&ratios) {
        let want = target.density(t);
        wanted += want;
        lost += match r {
            Some(r) if *r > gain => want - gain * input.density(t),
            Some(_) => 0.0,
            None => want,
        };
    }
    Ok(DerivedModulation {
        function: ModulationFunction::Tabulated { start: grid.start, step: grid.step, values },
        gain,
        clipped_mass: if wanted > 0.0 { lost / wanted } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub efficiency: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Gaussian timing jitter σ, ps.
    pub jitter_sigma: f64,
    /// Non-paralyzable dead time, ps.
    pub dead_time: u64,
}

impl Default for DetectorConfig {
    /// Typical silicon avalanche photodiode.
    fn default() -> Self {
        Self { efficiency: 0.5, dark_rate: 100.0, jitter_sigma: 350.0, dead_time: 50_000 }
    }
}

impl DetectorConfig {
    /// Unit efficiency, no noise, no jitter, no dead time.
    pub fn ideal() -> Self {
        Self { efficiency: 1.0, dark_rate: 0.0, jitter_sigma: 0.0, dead_time: 0 }
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        fraction("efficiency", self.efficiency)?;
        non_negative("dark_rate", self.dark_rate)?;
        non_negative("jitter_sigma", self.jitter_sigma)
    }
}

/// Turns photon arrival times (ps) into detector tags on `channel`.
///
/// Each photon draws its acceptance uniform and its jitter in a fixed order
/// whether or not it is kept, so runs that differ only in efficiency share
/// their per-photon randomness. Photons jittered outside `[0, duration]`
/// are lost. Dark counts come from the child stream 1.
pub fn detect(times: &[i64], d: &DetectorConfig, channel: u8, duration: u64, rng: RngSpec) -> Result<TimeTagStream, OpticsError> {
    d.validate()?;
    let mut r = rng.child(0).rng();
    let mut tags: Vec<TimeTag> = Vec::with_capacity(times.len());
    for &t in times {
        let u = open01(&mut r);
        let jitter = standard_normal(&mut r) * d.jitter_sigma;
        if u >= d.efficiency {
            continue;
        }
        let jt = t + jitter.round() as i64;
        if jt >= 0 && (jt as u64) <= duration {
            tags.push(TimeTag { time: jt as u64, channel });
        }
    }
    if d.dark_rate > 0.0 {
        let mut r = rng.child(1).rng();
        let rate = d.dark_rate / PS_PER_S;
        let mut t = 0.0;
        loop {
            t += exponential(&mut r, rate);
            if t >= duration as f64 {
                break;
            }
            tags.push(TimeTag { time: t as u64, channel });
        }
    }
    tags.sort_unstable();
    if d.dead_time > 0 {
        let mut last: Option<u64> = None;
        tags.retain(|tag| match last {
            Some(l) if tag.time < l + d.dead_time => false,
            _ => {
                last = Some(tag.time);
                true
            }
        });
    }
    Ok(TimeTagStream::from_unsorted(tags, duration))
}

/// Routes each item to the first output with probability `ratio`.
pub fn beamsplit<E: Clone>(items: &[E], ratio: f64, rng: RngSpec) -> Result<(Vec<E>, Vec<E>), OpticsError> {
    fraction("ratio", ratio)?;
    let mut r = rng.rng();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for item in items {
        if open01(&mut r) < ratio {
            a.push(item.clone());
        } else {
            b.push(item.clone());
        }
    }
    Ok((a, b))
}

/// The plasmonic nanohole sample as seen by single photons.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub spectrum: TransmissionSpectrum<f64>,
    /// nm.
    pub photon_wavelength: f64,
    /// Incident → reemitted-and-collected efficiency.
    pub overall_conversion: f64,
    /// Extra survival factor for background photons only, from the finite
    /// bandwidth of the plasmon resonance.
    pub background_suppression: f64,
}

impl SampleConfig {
    pub fn validate(&self) -> Result<(), OpticsError> {
        fraction("overall_conversion", self.overall_conversion)?;
        fraction("background_suppression", self.background_suppression)?;
        self.transmittance().map(|_| ())
    }

    /// Spectrum transmittance at the photon wavelength. Reported alongside
    /// the conversion efficiency but not used for thinning.
    pub fn transmittance(&self) -> Result<f64, OpticsError> {
        Ok(self.spectrum.at(self.photon_wavelength)?)
    }
}

/// Thins the signal arm by the sample conversion. The photon bandwidth is
/// far narrower than the resonance, so the sample acts as a scalar loss.
pub fn apply_sample(events: &[PairEvent], s: &SampleConfig, rng: RngSpec) -> Result<Vec<PairEvent>, OpticsError> {
    s.validate()?;
    let mut r = rng.rng();
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        if e.signal_time.is_none() {
            out.push(*e);
            continue;
        }
        let p = match e.kind {
            EventKind::BackgroundSignal => s.overall_conversion * s.background_suppression,
            _ => s.overall_conversion,
        };
        if open01(&mut r) < p {
            out.push(*e);
        } else if e.idler_time.is_some() {
            out.push(PairEvent { signal_time: None, ..*e });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub modulation: ModulationFunction,
    /// `None` measures the incident photons: the sample is bypassed.
    pub sample: Option<SampleConfig>,
    pub splitter_ratio: f64,
    pub herald_detector: DetectorConfig,
    pub signal_detectors: [DetectorConfig; 2],
    /// Split the idler arm 50:50 onto channels 0 and 3 so that its own
    /// auto-correlation can be measured.
    pub split_herald: bool,
    /// Number of time segments generated independently (each with its own
    /// random stream). Output does not depend on the thread count.
    pub segments: usize,
}

/// Tags of one simulated acquisition plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub stream: TimeTagStream,
    pub emitted_pairs: usize,
    pub out_of_grid: usize,
}

/// Source → modulator → sample → beam splitter → detectors.
///
/// Channels: idler on 0 (and 3 when split), reemitted-arm detectors on 1
/// and 2. Each stage draws from its own child stream of `rng`.
pub fn run_experiment(cfg: &ExperimentConfig, duration: u64, rng: RngSpec, parallel: bool) -> Result<ExperimentRun, OpticsError> {
    fraction("splitter_ratio", cfg.splitter_ratio)?;
    cfg.herald_detector.validate()?;
    for d in &cfg.signal_detectors {
        d.validate()?;
    }
    if let Some(s) = &cfg.sample {
        s.validate()?;
    }
    cfg.modulation.validate()?;

    let events = generate_pairs_segmented(&cfg.source, duration, rng.child(10), cfg.segments, parallel)?;
    let emitted_pairs = events.iter().filter(|e| e.kind == EventKind::TruePair).count();
    let modulated = apply_modulation(&events, &cfg.modulation, rng.child(20))?;
    let after_sample = match &cfg.sample {
        Some(s) => apply_sample(&modulated.events, s, rng.child(30))?,
        None => modulated.events,
    };

    let mut idler: Vec<i64> = after_sample.iter().filter_map(|e| e.idler_time).collect();
    idler.sort_unstable();
    let mut signal: Vec<i64> = after_sample.iter().filter_map(|e| e.signal_time).collect();
    signal.sort_unstable();

    let mut streams = Vec::with_capacity(4);
    if cfg.split_herald {
        let (h0, h3) = beamsplit(&idler, 0.5, rng.child(40))?;
        streams.push(detect(&h0, &cfg.herald_detector, CH_HERALD, duration, rng.child(50))?);
        streams.push(detect(&h3, &cfg.herald_detector, CH_HERALD_SPLIT, duration, rng.child(53))?);
    } else {
        streams.push(detect(&idler, &cfg.herald_detector, CH_HERALD, duration, rng.child(50))?);
    }
    let (a, b) = beamsplit(&signal, cfg.splitter_ratio, rng.child(41))?;
    streams.push(detect(&a, &cfg.signal_detectors[0], CH_REEMIT_A, duration, rng.child(51))?);
    streams.push(detect(&b, &cfg.signal_detectors[1], CH_REEMIT_B, duration, rng.child(52))?);

    let stream = TimeTagStream::merge(streams.iter()).with_duration(duration).expect("tags lie within duration");
    Ok(ExperimentRun { stream, emitted_pairs, out_of_grid: modulated.out_of_grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Shape;

    fn paired(delays_ns: &[f64]) -> Vec<PairEvent> {
        delays_ns
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let i = 1_000_000 * k as i64;
                PairEvent { idler_time: Some(i), signal_time: Some(i + (d * 1e3) as i64), kind: EventKind::TruePair }
            })
            .collect()
    }

    #[test]
    fn identity_is_passthrough() {
        let ev = paired(&[-10.0, 0.0, 30.0]);
        let out = apply_modulation(&ev, &ModulationFunction::Identity, RngSpec::new(1, 0)).unwrap();
        assert_eq!(out.events, ev);
    }

    #[test]
    fn heaviside_blocks_before_edge() {
        let delays: Vec<f64> = (-200..200).map(|k| k as f64 * 0.5).collect();
        let ev = paired(&delays);
        let m = ModulationFunction::Heaviside { edge: 5.0, gate: None };
        let out = apply_modulation(&ev, &m, RngSpec::new(2, 0)).unwrap();
        assert_eq!(out.events.len(), ev.len(), "idlers are kept");
        for e in &out.events {
            if let Some(d) = e.delay_ns() {
                assert!(d >= 5.0);
            }
        }
        let survivors = out.events.iter().filter(|e| e.signal_time.is_some()).count();
        assert_eq!(survivors, delays.iter().filter(|&&d| d >= 5.0).count());
    }

    #[test]
    fn gated_heaviside_blocks_unheralded_background() {
        let mut ev = paired(&[10.0]);
        ev.push(PairEvent { idler_time: None, signal_time: Some(600_000), kind: EventKind::BackgroundSignal });
        ev.push(PairEvent { idler_time: None, signal_time: Some(20_000), kind: EventKind::BackgroundSignal });
        let m = ModulationFunction::Heaviside { edge: 0.0, gate: Some(500.0) };
        let out = apply_modulation(&ev, &m, RngSpec::new(3, 0)).unwrap();
        let bg: Vec<_> = out.events.iter().filter(|e| e.kind == EventKind::BackgroundSignal).collect();
        assert_eq!(bg.len(), 1);
        assert_eq!(bg[0].signal_time, Some(20_000));
    }

    #[test]
    fn tabulated_edges_are_counted() {
        let m = ModulationFunction::Tabulated { start: 0.0, step: 1.0, values: vec![0.2, 1.0, 0.6] };
        assert_eq!(m.amplitude(0.5), (0.6, false));
        assert_eq!(m.amplitude(2.0), (0.6, false));
        assert_eq!(m.amplitude(-1.0), (0.2, true));
        assert_eq!(m.amplitude(9.0), (0.6, true));
        let ev = paired(&[-5.0, 1.0, 7.0]);
        let out = apply_modulation(&ev, &m, RngSpec::new(4, 0)).unwrap();
        assert_eq!(out.out_of_grid, 2);
        assert!(ModulationFunction::Tabulated { start: 0.0, step: 1.0, values: vec![1.5] }.validate().is_err());
    }

    #[test]
    fn derived_identity_modulation() {
        let a = BiphotonAmplitude::new(Shape::DoubleExponential, 50.0, 0.0).unwrap();
        let d = derive_modulation_for_target(&a, &a, TimeGrid::around(0.0, 300.0, 0.5).unwrap(), None).unwrap();
        let ModulationFunction::Tabulated { values, .. } = &d.function else { panic!() };
        assert!(values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(d.clipped_mass.abs() < 1e-15);
    }

    #[test]
    fn derived_modulation_clips_outside_input_support() {
        let input = BiphotonAmplitude::new(Shape::ExponentialDecay, 30.0, 0.0).unwrap();
        let target = BiphotonAmplitude::new(Shape::Gaussian, 40.0, 20.0).unwrap();
        let d = derive_modulation_for_target(&input, &target, TimeGrid::around(20.0, 100.0, 0.5).unwrap(), None).unwrap();
        assert!(d.clipped_mass > 0.0);
        assert_eq!(d.function.amplitude(-10.0).0, 0.0);
        let capped = derive_modulation_for_target(&input, &target, TimeGrid::around(20.0, 100.0, 0.5).unwrap(), Some(0.5)).unwrap();
        assert!(capped.clipped_mass > d.clipped_mass);
    }

    #[test]
    fn sample_thinning() {
        let spec = TransmissionSpectrum::new(vec![700.0, 900.0], vec![0.3, 0.3], vec![0.01, 0.01]).unwrap();
        let mut s = SampleConfig { spectrum: spec, photon_wavelength: 795.0, overall_conversion: 1.0, background_suppression: 1.0 };
        let ev = paired(&vec![0.0; 1000]);
        assert_eq!(apply_sample(&ev, &s, RngSpec::new(5, 0)).unwrap(), ev);
        s.photon_wavelength = 1000.0;
        assert!(matches!(apply_sample(&ev, &s, RngSpec::new(5, 0)), Err(OpticsError::Sample(SpectrumError::OutOfDomain { .. }))));
    }

    #[test]
    fn beamsplit_partitions() {
        let items: Vec<u32> = (0..1000).collect();
        let (a, b) = beamsplit(&items, 0.5, RngSpec::new(6, 0)).unwrap();
        let mut all = a.clone();
        all.extend(&b);
        all.sort();
        assert_eq!(all, items);
        let (a, b) = beamsplit(&items, 1.0, RngSpec::new(6, 0)).unwrap();
        assert_eq!((a.len(), b.len()), (1000, 0));
        assert!(beamsplit(&items, 1.5, RngSpec::new(6, 0)).is_err());
    }

    #[test]
    fn ideal_detector_is_exact() {
        let times = vec![5, 17, 1000, 99_999];
        let s = detect(&times, &DetectorConfig::ideal(), 2, 100_000, RngSpec::new(7, 0)).unwrap();
        assert_eq!(s.times(&[2]), vec![5, 17, 1000, 99_999]);
    }

    #[test]
    fn dead_time_keeps_first_of_close_pair() {
        let d = DetectorConfig { dead_time: 50_000, ..DetectorConfig::ideal() };
        let s = detect(&[1_000_000, 1_010_000], &d, 1, 2_000_000, RngSpec::new(8, 0)).unwrap();
        assert_eq!(s.times(&[1]), vec![1_000_000]);
        let s = detect(&[1_000_000, 1_050_000], &d, 1, 2_000_000, RngSpec::new(8, 0)).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn dark_counts_only() {
        let d = DetectorConfig { dark_rate: 100.0, ..DetectorConfig::ideal() };
        let s = detect(&[], &d, 0, 1_000_000_000_000, RngSpec::new(9, 0)).unwrap();
        assert!((s.len() as f64 - 100.0).abs() < 50.0, "{}", s.len());
    }
}
