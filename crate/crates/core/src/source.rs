//! Monte Carlo emission of time-energy-entangled signal/idler pairs.

use rayon::prelude::*;

use crate::model::{sample_delay, BiphotonAmplitude, Shape, PS_PER_NS, PS_PER_S};
use crate::rng::{exponential, open01, RngSpec};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SourceError {
    #[error("pair_rate must be positive and finite, got {0}")]
    PairRate(f64),
    #[error("multipair_prob must lie in [0, 1), got {0}")]
    MultipairProb(f64),
    #[error("{name} must be non-negative and finite, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    /// Emitted pairs per second.
    pub pair_rate: f64,
    pub amplitude: BiphotonAmplitude<f64>,
    /// Probability that a pair is accompanied by a second, independent pair
    /// inside the same coherence window.
    pub multipair_prob: f64,
    /// Uncorrelated broadband fluorescence on the signal arm, s⁻¹.
    pub background_rate_signal: f64,
    /// Uncorrelated fluorescence on the idler arm, s⁻¹.
    pub background_rate_idler: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            pair_rate: 2000.0,
            amplitude: BiphotonAmplitude::new(Shape::DoubleExponential, 50.0, 0.0).expect("valid default"),
            multipair_prob: 0.0,
            background_rate_signal: 0.0,
            background_rate_idler: 0.0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), SourceError> {
        if !(self.pair_rate > 0.0) || !self.pair_rate.is_finite() {
            return Err(SourceError::PairRate(self.pair_rate));
        }
        if !(0.0..1.0).contains(&self.multipair_prob) {
            return Err(SourceError::MultipairProb(self.multipair_prob));
        }
        for (name, value) in [
            ("background_rate_signal", self.background_rate_signal),
            ("background_rate_idler", self.background_rate_idler),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(SourceError::NegativeRate { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    TruePair,
    MultipairExtra,
    BackgroundSignal,
    BackgroundIdler,
}

/// One emission event. Photon times are in picoseconds; an arm without a
/// photon is `None`. Signal times may fall outside the acquisition window
/// (before 0 or past the end); detection drops those.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairEvent {
    pub idler_time: Option<i64>,
    pub signal_time: Option<i64>,
    pub kind: EventKind,
}

impl PairEvent {
    /// Sort key: the idler time, or the signal time for signal-only events.
    pub fn anchor(&self) -> i64 {
        self.idler_time.or(self.signal_time).unwrap_or(i64::MAX)
    }

    /// Signal delay relative to the idler, ns.
    pub fn delay_ns(&self) -> Option<f64> {
        Some((self.signal_time? - self.idler_time?) as f64 / PS_PER_NS)
    }
}

fn sort_events(events: &mut [PairEvent]) {
    events.sort_by_key(|e| (e.anchor(), e.kind, e.signal_time));
}

/// Emits events in `[start, end)` ps.
fn generate_segment(cfg: &SourceConfig, start: u64, end: u64, rng: RngSpec) -> Vec<PairEvent> {
    let mut events = Vec::new();
    if end <= start {
        return events;
    }
    let amp = &cfg.amplitude;
    let window_ps = amp.fwhm() * PS_PER_NS;

    let mut pairs = rng.child(0).rng();
    let rate_ps = cfg.pair_rate / PS_PER_S;
    let mut t = start as f64;
    loop {
        t += exponential(&mut pairs, rate_ps);
        if t >= end as f64 {
            break;
        }
        let idler = t.floor() as i64;
        let delay = sample_delay(amp, &mut pairs);
        events.push(PairEvent {
            idler_time: Some(idler),
            signal_time: Some(idler + (delay * PS_PER_NS).round() as i64),
            kind: EventKind::TruePair,
        });
        if cfg.multipair_prob > 0.0 && open01(&mut pairs) < cfg.multipair_prob {
            let shift = (2.0 * open01(&mut pairs) - 1.0) * window_ps;
            let extra_idler = idler + shift.round() as i64;
            let extra_delay = sample_delay(amp, &mut pairs);
            if extra_idler >= start as i64 && extra_idler < end as i64 {
                events.push(PairEvent {
                    idler_time: Some(extra_idler),
                    signal_time: Some(extra_idler + (extra_delay * PS_PER_NS).round() as i64),
                    kind: EventKind::MultipairExtra,
                });
            }
        }
    }

    for (label, rate, kind) in [
        (1, cfg.background_rate_signal, EventKind::BackgroundSignal),
        (2, cfg.background_rate_idler, EventKind::BackgroundIdler),
    ] {
        if rate <= 0.0 {
            continue;
        }
        let mut r = rng.child(label).rng();
        let rate_ps = rate / PS_PER_S;
        let mut t = start as f64;
        loop {
            t += exponential(&mut r, rate_ps);
            if t >= end as f64 {
                break;
            }
            let time = Some(t.floor() as i64);
            events.push(match kind {
                EventKind::BackgroundSignal => PairEvent { idler_time: None, signal_time: time, kind },
                _ => PairEvent { idler_time: time, signal_time: None, kind },
            });
        }
    }

    sort_events(&mut events);
    events
}

/// Generates all emission events over `[0, duration)` ps, sorted by idler
/// time (signal time for signal-only background).
///
/// Idler emission times form a homogeneous Poisson process at `pair_rate`;
/// each pair's signal is delayed by a draw from `amplitude`. Background
/// photons are independent Poisson processes on each arm.
pub fn generate_pairs(cfg: &SourceConfig, duration: u64, rng: RngSpec) -> Result<Vec<PairEvent>, SourceError> {
    cfg.validate()?;
    Ok(generate_segment(cfg, 0, duration, rng))
}

/// Splits `[0, duration)` into `segments` equal time slices, each generated
/// from its own stream `rng.child(1 + k)`, and concatenates them. With
/// `parallel` the slices are generated on the rayon pool; the output is
/// identical either way.
pub fn generate_pairs_segmented(
    cfg: &SourceConfig,
    duration: u64,
    rng: RngSpec,
    segments: usize,
    parallel: bool,
) -> Result<Vec<PairEvent>, SourceError> {
    cfg.validate()?;
    let segments = segments.max(1) as u64;
    let bounds: Vec<(u64, u64, RngSpec)> = (0..segments)
        .map(|k| {
            let lo = duration / segments * k;
            let hi = if k + 1 == segments { duration } else { duration / segments * (k + 1) };
            (lo, hi, rng.child(1 + k))
        })
        .collect();
    let parts: Vec<Vec<PairEvent>> = if parallel {
        bounds.par_iter().map(|&(lo, hi, r)| generate_segment(cfg, lo, hi, r)).collect()
    } else {
        bounds.iter().map(|&(lo, hi, r)| generate_segment(cfg, lo, hi, r)).collect()
    };
    let mut events: Vec<PairEvent> = parts.into_iter().flatten().collect();
    // Multipair extras near a slice boundary can break global order.
    sort_events(&mut events);
    Ok(events)
}

/// Tally of event kinds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindCounts {
    pub true_pairs: usize,
    pub multipair_extra: usize,
    pub background_signal: usize,
    pub background_idler: usize,
}

pub fn count_kinds(events: &[PairEvent]) -> KindCounts {
    let mut c = KindCounts::default();
    for e in events {
        match e.kind {
            EventKind::TruePair => c.true_pairs += 1,
            EventKind::MultipairExtra => c.multipair_extra += 1,
            EventKind::BackgroundSignal => c.background_signal += 1,
            EventKind::BackgroundIdler => c.background_idler += 1,
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    const SECOND: u64 = 1_000_000_000_000;

    #[test]
    fn zero_duration_is_empty() {
        let ev = generate_pairs(&SourceConfig::default(), 0, RngSpec::new(1, 0)).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn pair_count_matches_rate() {
        let ev = generate_pairs(&SourceConfig::default(), SECOND, RngSpec::new(3, 0)).unwrap();
        let n = count_kinds(&ev).true_pairs as f64;
        assert!((n - 2000.0).abs() < 5.0 * 2000f64.sqrt(), "n = {n}");
    }

    #[test]
    fn one_signal_per_idler_without_noise() {
        let ev = generate_pairs(&SourceConfig::default(), SECOND / 10, RngSpec::new(4, 0)).unwrap();
        assert!(ev.iter().all(|e| e.kind == EventKind::TruePair && e.idler_time.is_some() && e.signal_time.is_some()));
        assert!(ev.windows(2).all(|w| w[0].anchor() <= w[1].anchor()));
    }

    #[test]
    fn kinds_partition_output() {
        let cfg = SourceConfig {
            multipair_prob: 0.1,
            background_rate_signal: 5000.0,
            background_rate_idler: 1000.0,
            ..SourceConfig::default()
        };
        let ev = generate_pairs(&cfg, SECOND, RngSpec::new(5, 0)).unwrap();
        let c = count_kinds(&ev);
        assert_eq!(c.true_pairs + c.multipair_extra + c.background_signal + c.background_idler, ev.len());
        let within = |n: usize, mean: f64| (n as f64 - mean).abs() < 5.0 * mean.sqrt();
        assert!(within(c.multipair_extra, 200.0), "{c:?}");
        assert!(within(c.background_signal, 5000.0), "{c:?}");
        assert!(within(c.background_idler, 1000.0), "{c:?}");
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SourceConfig { pair_rate: -1.0, ..SourceConfig::default() };
        assert_eq!(generate_pairs(&cfg, 1, RngSpec::default()), Err(SourceError::PairRate(-1.0)));
        cfg = SourceConfig { multipair_prob: 1.0, ..SourceConfig::default() };
        assert!(cfg.validate().is_err());
        cfg = SourceConfig { background_rate_idler: f64::NAN, ..SourceConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn segmented_parallel_equals_sequential() {
        let cfg = SourceConfig { multipair_prob: 0.2, background_rate_signal: 3000.0, ..SourceConfig::default() };
        let a = generate_pairs_segmented(&cfg, SECOND / 5, RngSpec::new(9, 2), 7, true).unwrap();
        let b = generate_pairs_segmented(&cfg, SECOND / 5, RngSpec::new(9, 2), 7, false).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }
}
