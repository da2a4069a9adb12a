//! Flat `section.key = value` configuration.
//!
//! Every key has a default, so an empty file is a complete configuration.
//! `#` starts a comment. Durations take a unit suffix (`ps`, `ns`, `us`,
//! `ms`, `s`); other times are plain numbers in ns. [`Config::to_text`]
//! writes every key and parses back to an identical value.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use crate::correlator::{default_herald_window, Binning};
use crate::model::{BiphotonAmplitude, Shape, PS_PER_NS};
use crate::optics::{derive_modulation_for_target, DetectorConfig, ExperimentConfig, ModulationFunction, SampleConfig, TimeGrid};
use crate::source::SourceConfig;
use crate::spectrum::{fano_from_observables, fano_spectrum, ArrayGeometry};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigErrorKind {
    #[error("expected `section.key = value`, got `{0}`")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` already set on line {first}")]
    Duplicate { key: String, first: usize },
    #[error("`{key}`: expected {expected}, got `{value}`")]
    Type { key: String, expected: &'static str, value: String },
    #[error("`{key}`: {message}")]
    Constraint { key: String, message: String },
}

/// A configuration error, located at a line of the input when the key
/// responsible was given there.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{kind}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub kind: ConfigErrorKind,
}

impl ConfigError {
    fn constraint(key: &str, message: impl Into<String>) -> Self {
        Self { line: None, kind: ConfigErrorKind::Constraint { key: key.to_string(), message: message.into() } }
    }

    /// Key that the error concerns, if any.
    pub fn key(&self) -> Option<&str> {
        match &self.kind {
            ConfigErrorKind::Syntax(_) => None,
            ConfigErrorKind::UnknownKey(k) => Some(k),
            ConfigErrorKind::Duplicate { key, .. }
            | ConfigErrorKind::Type { key, .. }
            | ConfigErrorKind::Constraint { key, .. } => Some(key),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationKind {
    None,
    Heaviside,
    Gaussian,
    /// Reshape the emitted waveform into `target_shape`.
    Target,
}

impl ModulationKind {
    fn name(self) -> &'static str {
        match self {
            ModulationKind::None => "none",
            ModulationKind::Heaviside => "heaviside",
            ModulationKind::Gaussian => "gaussian",
            ModulationKind::Target => "target",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [ModulationKind::None, ModulationKind::Heaviside, ModulationKind::Gaussian, ModulationKind::Target]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// Modulator settings. Only the keys of the selected kind are used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSettings {
    pub kind: ModulationKind,
    pub edge: f64,
    pub gate: Option<f64>,
    pub center: f64,
    pub fwhm: f64,
    pub target_shape: Shape,
    pub target_fwhm: f64,
    pub target_offset: f64,
    pub grid_step: f64,
    pub max_gain: Option<f64>,
}

impl Default for ModulationSettings {
    fn default() -> Self {
        Self {
            kind: ModulationKind::None,
            edge: 0.0,
            gate: None,
            center: 0.0,
            fwhm: 40.0,
            target_shape: Shape::Gaussian,
            target_fwhm: 40.0,
            target_offset: 0.0,
            grid_step: 0.25,
            max_gain: None,
        }
    }
}

/// The nanohole sample: array geometry, the observed resonance peak and the
/// photon conversion efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSettings {
    /// `false` bypasses the sample: the incident photons are measured.
    pub enabled: bool,
    pub geometry: ArrayGeometry<f64>,
    pub peak_wavelength: f64,
    pub peak_transmittance: f64,
    pub resonance_fwhm: f64,
    pub q: f64,
    pub photon_wavelength: f64,
    pub conversion: f64,
    pub background_suppression: f64,
}

impl Default for SampleSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            geometry: ArrayGeometry::fabricated(),
            peak_wavelength: 805.0,
            peak_transmittance: 0.36,
            resonance_fwhm: 96.0,
            q: 8.0,
            photon_wavelength: 795.0,
            conversion: 0.44,
            background_suppression: 0.77,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    /// Histogram bin width, ps.
    pub bin_width: u64,
    /// Half-width of the Cauchy–Schwarz delay axis, ps.
    pub cs_window: u64,
    /// Coincidence window for the zero-delay auto-correlations, ps.
    pub auto_window: u64,
    /// Half-width of the heralded g² window around the amplitude offset, ps.
    /// `None` uses three amplitude FWHMs.
    pub herald_window: Option<u64>,
    /// Half-width of the reconstructed waveform axis, ps.
    pub waveform_window: u64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            bin_width: 1_000,
            cs_window: 300_000,
            auto_window: 50_000_000,
            herald_window: None,
            waveform_window: 300_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    /// Acquisition time, ps.
    pub duration: u64,
    pub segments: usize,
    pub source: SourceConfig,
    pub modulation: ModulationSettings,
    pub sample: SampleSettings,
    pub splitter_ratio: f64,
    pub split_herald: bool,
    /// Detectors on the herald arm (both halves when split) and on the two
    /// reemitted-arm outputs.
    pub herald_detector: DetectorConfig,
    pub signal_detectors: [DetectorConfig; 2],
    pub analysis: AnalysisSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            duration: 60_000_000_000_000,
            segments: 16,
            source: SourceConfig {
                multipair_prob: 5e-4,
                background_rate_signal: 20_000.0,
                background_rate_idler: 200.0,
                ..SourceConfig::default()
            },
            modulation: ModulationSettings::default(),
            sample: SampleSettings::default(),
            splitter_ratio: 0.5,
            split_herald: true,
            herald_detector: DetectorConfig::default(),
            signal_detectors: [DetectorConfig::default(); 2],
            analysis: AnalysisSettings::default(),
        }
    }
}

const UNITS: [(&str, u64); 5] = [("s", 1_000_000_000_000), ("ms", 1_000_000_000), ("us", 1_000_000), ("ns", 1_000), ("ps", 1)];

/// Parses `60s`, `1.5ms`, `300 ns` into ps. A unit is required.
pub fn parse_duration(s: &str) -> Option<u64> {
    let s = s.trim();
    let split = s.find(|c: char| c.is_ascii_alphabetic())?;
    let (num, unit) = (s[..split].trim(), s[split..].trim());
    let scale = UNITS.iter().find(|(u, _)| *u == unit)?.1;
    if num.chars().all(|c| c.is_ascii_digit()) && !num.is_empty() {
        return num.parse::<u64>().ok()?.checked_mul(scale);
    }
    let x: f64 = num.parse().ok()?;
    let ps = (x * scale as f64).round();
    (x.is_finite() && x >= 0.0 && ps < u64::MAX as f64).then_some(ps as u64)
}

/// Shortest exact rendering of a ps count in the largest unit dividing it.
pub fn format_duration(ps: u64) -> String {
    if ps == 0 {
        return "0s".into();
    }
    let (unit, scale) = UNITS.iter().find(|(_, s)| ps % s == 0).copied().unwrap_or(("ps", 1));
    format!("{}{unit}", ps / scale)
}

fn type_err(key: &str, expected: &'static str, value: &str) -> ConfigErrorKind {
    ConfigErrorKind::Type { key: key.to_string(), expected, value: value.to_string() }
}

fn p_f64(key: &str, v: &str) -> Result<f64, ConfigErrorKind> {
    v.parse::<f64>().map_err(|_| type_err(key, "a number", v))
}

fn p_opt_f64(key: &str, v: &str) -> Result<Option<f64>, ConfigErrorKind> {
    if v == "none" {
        Ok(None)
    } else {
        v.parse::<f64>().map(Some).map_err(|_| type_err(key, "a number or `none`", v))
    }
}

fn p_u64(key: &str, v: &str) -> Result<u64, ConfigErrorKind> {
    v.parse::<u64>().map_err(|_| type_err(key, "a non-negative integer", v))
}

fn p_bool(key: &str, v: &str) -> Result<bool, ConfigErrorKind> {
    v.parse::<bool>().map_err(|_| type_err(key, "`true` or `false`", v))
}

fn p_dur(key: &str, v: &str) -> Result<u64, ConfigErrorKind> {
    parse_duration(v).ok_or_else(|| type_err(key, "a duration with unit (ps, ns, us, ms, s)", v))
}

fn p_shape(key: &str, v: &str) -> Result<Shape, ConfigErrorKind> {
    v.parse::<Shape>().map_err(|_| type_err(key, "a shape (double-exponential, exponential-decay, gaussian)", v))
}

fn opt_str(x: Option<f64>) -> String {
    x.map_or("none".into(), |v| v.to_string())
}

/// (key, value, description) for every key, in file order.
type Entry = (&'static str, String, &'static str);

impl Config {
    fn entries(&self) -> Vec<Entry> {
        let s = &self.source;
        let m = &self.modulation;
        let sa = &self.sample;
        let a = &self.analysis;
        let mut e: Vec<Entry> = vec![
            ("run.seed", self.seed.to_string(), "random seed"),
            ("run.duration", format_duration(self.duration), "acquisition time"),
            ("run.segments", self.segments.to_string(), "independently generated time slices"),
            ("source.pair_rate", s.pair_rate.to_string(), "emitted pairs per second"),
            ("source.shape", s.amplitude.shape().to_string(), "biphoton waveform shape"),
            ("source.fwhm", s.amplitude.fwhm().to_string(), "waveform FWHM, ns"),
            ("source.offset", s.amplitude.offset().to_string(), "waveform offset, ns"),
            ("source.multipair_prob", s.multipair_prob.to_string(), "probability of an accompanying second pair"),
            ("source.background_signal", s.background_rate_signal.to_string(), "uncorrelated signal-arm photons per second"),
            ("source.background_idler", s.background_rate_idler.to_string(), "uncorrelated idler-arm photons per second"),
            ("modulation.kind", m.kind.name().into(), "none, heaviside, gaussian or target"),
            ("modulation.edge", m.edge.to_string(), "heaviside: opening time after the herald, ns"),
            ("modulation.gate", opt_str(m.gate), "heaviside: open time in ns, or none"),
            ("modulation.center", m.center.to_string(), "gaussian: window centre, ns"),
            ("modulation.fwhm", m.fwhm.to_string(), "gaussian: intensity window FWHM, ns"),
            ("modulation.target_shape", m.target_shape.to_string(), "target: waveform to imprint"),
            ("modulation.target_fwhm", m.target_fwhm.to_string(), "target: FWHM, ns"),
            ("modulation.target_offset", m.target_offset.to_string(), "target: offset, ns"),
            ("modulation.grid_step", m.grid_step.to_string(), "target: tabulation step, ns"),
            ("modulation.max_gain", opt_str(m.max_gain), "target: largest honoured intensity ratio, or none"),
            ("sample.enabled", sa.enabled.to_string(), "false measures the incident photons"),
            ("sample.pitch", sa.geometry.pitch.to_string(), "hole array period, nm"),
            ("sample.hole_diameter", sa.geometry.hole_diameter.to_string(), "hole diameter, nm"),
            ("sample.film_thickness", sa.geometry.film_thickness.to_string(), "gold film thickness, nm"),
            ("sample.taper_angle", sa.geometry.taper_angle.to_string(), "hole sidewall taper, degrees"),
            ("sample.peak_wavelength", sa.peak_wavelength.to_string(), "transmission peak position, nm"),
            ("sample.peak_transmittance", sa.peak_transmittance.to_string(), "transmission at the peak"),
            ("sample.resonance_fwhm", sa.resonance_fwhm.to_string(), "full width of the transmission peak, nm"),
            ("sample.q", sa.q.to_string(), "Fano asymmetry parameter"),
            ("sample.photon_wavelength", sa.photon_wavelength.to_string(), "single-photon wavelength, nm"),
            ("sample.conversion", sa.conversion.to_string(), "photon to plasmon to photon efficiency"),
            ("sample.background_suppression", sa.background_suppression.to_string(), "extra survival of background photons"),
            ("optics.splitter_ratio", self.splitter_ratio.to_string(), "reemitted-arm fraction sent to detector A"),
            ("optics.split_herald", self.split_herald.to_string(), "split the idler arm onto a second detector"),
        ];
        for (name, d) in [
            ("herald", &self.herald_detector),
            ("reemit_a", &self.signal_detectors[0]),
            ("reemit_b", &self.signal_detectors[1]),
        ] {
            let keys: [&'static str; 4] = match name {
                "herald" => ["detector.herald.efficiency", "detector.herald.dark_rate", "detector.herald.jitter", "detector.herald.dead_time"],
                "reemit_a" => ["detector.reemit_a.efficiency", "detector.reemit_a.dark_rate", "detector.reemit_a.jitter", "detector.reemit_a.dead_time"],
                _ => ["detector.reemit_b.efficiency", "detector.reemit_b.dark_rate", "detector.reemit_b.jitter", "detector.reemit_b.dead_time"],
            };
            e.push((keys[0], d.efficiency.to_string(), "detection efficiency"));
            e.push((keys[1], d.dark_rate.to_string(), "dark counts per second"));
            e.push((keys[2], format_duration(d.jitter_sigma.round() as u64), "Gaussian timing jitter sigma"));
            e.push((keys[3], format_duration(d.dead_time), "dead time"));
        }
        e.extend([
            ("analysis.bin_width", format_duration(a.bin_width), "histogram bin width"),
            ("analysis.cs_window", format_duration(a.cs_window), "half-width of the Cauchy-Schwarz delay axis"),
            ("analysis.auto_window", format_duration(a.auto_window), "zero-delay window of the auto-correlations"),
            ("analysis.herald_window", a.herald_window.map_or("auto".into(), format_duration), "heralded g2 half-window, or auto for three FWHMs"),
            ("analysis.waveform_window", format_duration(a.waveform_window), "half-width of reconstructed waveforms"),
        ]);
        e
    }

    /// Every key, in file order.
    pub fn keys() -> Vec<&'static str> {
        Config::default().entries().into_iter().map(|(k, _, _)| k).collect()
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigErrorKind> {
        let amp = self.source.amplitude;
        let rebuild = |shape: Shape, fwhm: f64, offset: f64| {
            BiphotonAmplitude::new(shape, fwhm, offset)
                .map_err(|e| ConfigErrorKind::Constraint { key: key.to_string(), message: e.to_string() })
        };
        match key {
            "run.seed" => self.seed = p_u64(key, v)?,
            "run.duration" => self.duration = p_dur(key, v)?,
            "run.segments" => self.segments = p_u64(key, v)? as usize,
            "source.pair_rate" => self.source.pair_rate = p_f64(key, v)?,
            "source.shape" => self.source.amplitude = rebuild(p_shape(key, v)?, amp.fwhm(), amp.offset())?,
            "source.fwhm" => self.source.amplitude = rebuild(amp.shape(), p_f64(key, v)?, amp.offset())?,
            "source.offset" => self.source.amplitude = rebuild(amp.shape(), amp.fwhm(), p_f64(key, v)?)?,
            "source.multipair_prob" => self.source.multipair_prob = p_f64(key, v)?,
            "source.background_signal" => self.source.background_rate_signal = p_f64(key, v)?,
            "source.background_idler" => self.source.background_rate_idler = p_f64(key, v)?,
            "modulation.kind" => {
                self.modulation.kind =
                    ModulationKind::parse(v).ok_or_else(|| type_err(key, "none, heaviside, gaussian or target", v))?
            }
            "modulation.edge" => self.modulation.edge = p_f64(key, v)?,
            "modulation.gate" => self.modulation.gate = p_opt_f64(key, v)?,
            "modulation.center" => self.modulation.center = p_f64(key, v)?,
            "modulation.fwhm" => self.modulation.fwhm = p_f64(key, v)?,
            "modulation.target_shape" => self.modulation.target_shape = p_shape(key, v)?,
            "modulation.target_fwhm" => self.modulation.target_fwhm = p_f64(key, v)?,
            "modulation.target_offset" => self.modulation.target_offset = p_f64(key, v)?,
            "modulation.grid_step" => self.modulation.grid_step = p_f64(key, v)?,
            "modulation.max_gain" => self.modulation.max_gain = p_opt_f64(key, v)?,
            "sample.enabled" => self.sample.enabled = p_bool(key, v)?,
            "sample.pitch" => self.sample.geometry.pitch = p_f64(key, v)?,
            "sample.hole_diameter" => self.sample.geometry.hole_diameter = p_f64(key, v)?,
            "sample.film_thickness" => self.sample.geometry.film_thickness = p_f64(key, v)?,
            "sample.taper_angle" => self.sample.geometry.taper_angle = p_f64(key, v)?,
            "sample.peak_wavelength" => self.sample.peak_wavelength = p_f64(key, v)?,
            "sample.peak_transmittance" => self.sample.peak_transmittance = p_f64(key, v)?,
            "sample.resonance_fwhm" => self.sample.resonance_fwhm = p_f64(key, v)?,
            "sample.q" => self.sample.q = p_f64(key, v)?,
            "sample.photon_wavelength" => self.sample.photon_wavelength = p_f64(key, v)?,
            "sample.conversion" => self.sample.conversion = p_f64(key, v)?,
            "sample.background_suppression" => self.sample.background_suppression = p_f64(key, v)?,
            "optics.splitter_ratio" => self.splitter_ratio = p_f64(key, v)?,
            "optics.split_herald" => self.split_herald = p_bool(key, v)?,
            "analysis.bin_width" => self.analysis.bin_width = p_dur(key, v)?,
            "analysis.cs_window" => self.analysis.cs_window = p_dur(key, v)?,
            "analysis.auto_window" => self.analysis.auto_window = p_dur(key, v)?,
            "analysis.herald_window" => {
                self.analysis.herald_window = if v == "auto" { None } else { Some(p_dur(key, v)?) }
            }
            "analysis.waveform_window" => self.analysis.waveform_window = p_dur(key, v)?,
            _ => {
                let Some(rest) = key.strip_prefix("detector.") else {
                    return Err(ConfigErrorKind::UnknownKey(key.to_string()));
                };
                let (name, field) = rest.split_once('.').ok_or_else(|| ConfigErrorKind::UnknownKey(key.to_string()))?;
                let d = match name {
                    "herald" => &mut self.herald_detector,
                    "reemit_a" => &mut self.signal_detectors[0],
                    "reemit_b" => &mut self.signal_detectors[1],
                    _ => return Err(ConfigErrorKind::UnknownKey(key.to_string())),
                };
                match field {
                    "efficiency" => d.efficiency = p_f64(key, v)?,
                    "dark_rate" => d.dark_rate = p_f64(key, v)?,
                    "jitter" => d.jitter_sigma = p_dur(key, v)? as f64,
                    "dead_time" => d.dead_time = p_dur(key, v)?,
                    _ => return Err(ConfigErrorKind::UnknownKey(key.to_string())),
                }
            }
        }
        Ok(())
    }

    /// Parses configuration text. Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let at = |kind| ConfigError { line: Some(line), kind };
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, v)| !k.is_empty() && !v.is_empty() && k.contains('.'))
                .ok_or_else(|| at(ConfigErrorKind::Syntax(content.to_string())))?;
            if let Some(&first) = seen.get(key) {
                return Err(at(ConfigErrorKind::Duplicate { key: key.to_string(), first }));
            }
            cfg.set(key, value).map_err(at)?;
            seen.insert(key.to_string(), line);
        }
        cfg.validate().map_err(|mut e| {
            e.line = e.key().and_then(|k| seen.get(k).copied());
            e
        })?;
        Ok(cfg)
    }

    /// Checks every value and cross-key constraint, and that the sample and
    /// modulation can be built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn c(key: &str, message: impl Into<String>) -> ConfigError {
            ConfigError::constraint(key, message)
        }
        if self.duration == 0 {
            return Err(c("run.duration", "must be positive"));
        }
        if self.segments == 0 {
            return Err(c("run.segments", "must be at least 1"));
        }
        if let Err(e) = self.source.validate() {
            let key = match e {
                crate::source::SourceError::PairRate(_) => "source.pair_rate",
                crate::source::SourceError::MultipairProb(_) => "source.multipair_prob",
                crate::source::SourceError::NegativeRate { name: "background_rate_signal", .. } => "source.background_signal",
                crate::source::SourceError::NegativeRate { .. } => "source.background_idler",
            };
            return Err(c(key, e.to_string()));
        }
        let finite_pos = |key: &str, x: f64| if x > 0.0 && x.is_finite() { Ok(()) } else { Err(c(key, format!("must be positive, got {x}"))) };
        let fraction = |key: &str, x: f64| if (0.0..=1.0).contains(&x) { Ok(()) } else { Err(c(key, format!("must lie in [0, 1], got {x}"))) };
        let finite = |key: &str, x: f64| if x.is_finite() { Ok(()) } else { Err(c(key, format!("must be finite, got {x}"))) };

        let m = &self.modulation;
        finite("modulation.edge", m.edge)?;
        if let Some(g) = m.gate {
            finite_pos("modulation.gate", g)?;
        }
        finite("modulation.center", m.center)?;
        finite_pos("modulation.fwhm", m.fwhm)?;
        finite_pos("modulation.target_fwhm", m.target_fwhm)?;
        finite("modulation.target_offset", m.target_offset)?;
        finite_pos("modulation.grid_step", m.grid_step)?;
        if let Some(g) = m.max_gain {
            finite_pos("modulation.max_gain", g)?;
        }

        let sa = &self.sample;
        finite_pos("sample.pitch", sa.geometry.pitch)?;
        finite_pos("sample.hole_diameter", sa.geometry.hole_diameter)?;
        if sa.geometry.hole_diameter >= sa.geometry.pitch {
            return Err(c("sample.hole_diameter", "must be smaller than sample.pitch"));
        }
        finite_pos("sample.film_thickness", sa.geometry.film_thickness)?;
        finite("sample.taper_angle", sa.geometry.taper_angle)?;
        finite_pos("sample.peak_wavelength", sa.peak_wavelength)?;
        if !(sa.peak_transmittance > 0.0 && sa.peak_transmittance <= 1.0) {
            return Err(c("sample.peak_transmittance", format!("must lie in (0, 1], got {}", sa.peak_transmittance)));
        }
        finite_pos("sample.resonance_fwhm", sa.resonance_fwhm)?;
        if !(sa.q.is_finite() && sa.q != 0.0) {
            return Err(c("sample.q", format!("must be finite and nonzero, got {}", sa.q)));
        }
        finite_pos("sample.photon_wavelength", sa.photon_wavelength)?;
        fraction("sample.conversion", sa.conversion)?;
        fraction("sample.background_suppression", sa.background_suppression)?;
        fraction("optics.splitter_ratio", self.splitter_ratio)?;

        for (name, d) in [("herald", &self.herald_detector), ("reemit_a", &self.signal_detectors[0]), ("reemit_b", &self.signal_detectors[1])] {
            fraction(&format!("detector.{name}.efficiency"), d.efficiency)?;
            if !(d.dark_rate >= 0.0 && d.dark_rate.is_finite()) {
                return Err(c(&format!("detector.{name}.dark_rate"), format!("must be non-negative, got {}", d.dark_rate)));
            }
        }

        let a = &self.analysis;
        if a.bin_width == 0 {
            return Err(c("analysis.bin_width", "must be positive"));
        }
        for (key, w) in [("analysis.cs_window", a.cs_window), ("analysis.auto_window", a.auto_window), ("analysis.waveform_window", a.waveform_window)] {
            if w == 0 {
                return Err(c(key, "must be positive"));
            }
        }
        if a.herald_window == Some(0) {
            return Err(c("analysis.herald_window", "must be positive"));
        }

        self.sample_config()?;
        self.modulation_function()?;
        Ok(())
    }

    /// The modulator as a function of time since the herald.
    pub fn modulation_function(&self) -> Result<ModulationFunction, ConfigError> {
        let m = &self.modulation;
        Ok(match m.kind {
            ModulationKind::None => ModulationFunction::Identity,
            ModulationKind::Heaviside => ModulationFunction::Heaviside { edge: m.edge, gate: m.gate },
            ModulationKind::Gaussian => ModulationFunction::Gaussian { center: m.center, fwhm: m.fwhm },
            ModulationKind::Target => {
                let target = BiphotonAmplitude::new(m.target_shape, m.target_fwhm, m.target_offset)
                    .map_err(|e| ConfigError::constraint("modulation.target_fwhm", e.to_string()))?;
                let input = &self.source.amplitude;
                let lo = input.quantile_portable(1e-9).min(target.quantile_portable(1e-9));
                let hi = input.quantile_portable(1.0 - 1e-9).max(target.quantile_portable(1.0 - 1e-9));
                let len = ((hi - lo) / m.grid_step).ceil() as usize + 1;
                let grid = TimeGrid::new(lo, m.grid_step, len).map_err(|e| ConfigError::constraint("modulation.grid_step", e.to_string()))?;
                derive_modulation_for_target(input, &target, grid, m.max_gain)
                    .map_err(|e| ConfigError::constraint("modulation.target_shape", e.to_string()))?
                    .function
            }
        })
    }

    /// The sample, or `None` when it is bypassed.
    pub fn sample_config(&self) -> Result<Option<SampleConfig>, ConfigError> {
        if !self.sample.enabled {
            return Ok(None);
        }
        let sa = &self.sample;
        let bad = |e: crate::spectrum::SpectrumError| ConfigError::constraint("sample.resonance_fwhm", e.to_string());
        let params = fano_from_observables(&sa.geometry, sa.peak_wavelength, sa.peak_transmittance, sa.resonance_fwhm, sa.q).map_err(bad)?;
        let lo = (sa.photon_wavelength.min(sa.peak_wavelength) - 4.0 * sa.resonance_fwhm).max(1.0).floor();
        let hi = (sa.photon_wavelength.max(sa.peak_wavelength) + 4.0 * sa.resonance_fwhm).ceil();
        let grid: Vec<f64> = (0..=((hi - lo) as usize)).map(|k| lo + k as f64).collect();
        let spectrum = fano_spectrum(&sa.geometry, params, &grid).map_err(bad)?;
        Ok(Some(SampleConfig {
            spectrum,
            photon_wavelength: sa.photon_wavelength,
            overall_conversion: sa.conversion,
            background_suppression: sa.background_suppression,
        }))
    }

    /// The simulation chain described by this configuration.
    pub fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        Ok(ExperimentConfig {
            source: self.source,
            modulation: self.modulation_function()?,
            sample: self.sample_config()?,
            splitter_ratio: self.splitter_ratio,
            herald_detector: self.herald_detector,
            signal_detectors: self.signal_detectors,
            split_herald: self.split_herald,
            segments: self.segments,
        })
    }

    /// Heralded g² window relative to the herald, ps.
    pub fn herald_window(&self) -> Range<i64> {
        let amp = &self.source.amplitude;
        match self.analysis.herald_window {
            None => default_herald_window(amp.fwhm(), amp.offset()),
            Some(h) => {
                let c = (amp.offset() * PS_PER_NS).round() as i64;
                c - h as i64..c + h as i64
            }
        }
    }

    /// Symmetric histogram axis of the given half-width at `bin_width`.
    pub fn binning(&self, bin_width: u64, half_width: u64) -> Binning {
        Binning::symmetric(bin_width, half_width).expect("validated widths")
    }

    /// Canonical text form listing every key with its description.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (key, value, doc) in self.entries() {
            let s = key.split('.').next().unwrap_or("");
            if s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = s;
            }
            out.push_str(&format!("# {doc}\n{key} = {value}\n"));
        }
        out
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.source.pair_rate, 2000.0);
        assert_eq!(c.source.amplitude.fwhm(), 50.0);
        assert_eq!(c.sample.conversion, 0.44);
        assert_eq!(c.duration, 60 * 1_000_000_000_000);
    }

    #[test]
    fn round_trip_default_and_modified() {
        let d = Config::default();
        assert_eq!(Config::parse(&d.to_text()).unwrap(), d);
        let text = "run.seed = 7\nsource.shape = gaussian\nsource.fwhm = 40.5\nmodulation.kind = heaviside\nmodulation.gate = 12.25\n\
                    detector.reemit_b.jitter = 1ns\nanalysis.herald_window = 150ns\nsample.enabled = false\n";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.source.amplitude.shape(), Shape::Gaussian);
        assert_eq!(c.modulation.gate, Some(12.25));
        assert_eq!(c.signal_detectors[1].jitter_sigma, 1000.0);
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
        assert_eq!(Config::parse(&c.to_text()).unwrap().to_text(), c.to_text());
    }

    #[test]
    fn every_key_is_settable() {
        let d = Config::default();
        for (key, value, _) in d.entries() {
            let mut c = Config::default();
            c.set(key, &value).unwrap_or_else(|e| panic!("{key}: {e}"));
            assert_eq!(c, d, "{key}");
        }
    }

    #[test]
    fn negative_rate_is_constraint_error_with_line() {
        let e = Config::parse("# comment\n\nsource.pair_rate = -1\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(matches!(&e.kind, ConfigErrorKind::Constraint { key, .. } if key == "source.pair_rate"), "{e}");
        assert!(e.to_string().contains("source.pair_rate"));
    }

    #[test]
    fn error_kinds() {
        let unknown = Config::parse("source.colour = red").unwrap_err();
        assert_eq!(unknown.line, Some(1));
        assert!(matches!(unknown.kind, ConfigErrorKind::UnknownKey(_)));
        assert!(matches!(Config::parse("detector.third.efficiency = 1").unwrap_err().kind, ConfigErrorKind::UnknownKey(_)));
        let ty = Config::parse("\nsource.pair_rate = fast").unwrap_err();
        assert_eq!(ty.line, Some(2));
        assert!(matches!(ty.kind, ConfigErrorKind::Type { .. }));
        assert!(matches!(Config::parse("run.duration = 60").unwrap_err().kind, ConfigErrorKind::Type { .. }));
        assert!(matches!(Config::parse("just words").unwrap_err().kind, ConfigErrorKind::Syntax(_)));
        let dup = Config::parse("run.seed = 1\nrun.seed = 2").unwrap_err();
        assert_eq!(dup.line, Some(2));
        assert!(matches!(dup.kind, ConfigErrorKind::Duplicate { first: 1, .. }));
        let cross = Config::parse("sample.pitch = 150").unwrap_err();
        assert_eq!(cross.key(), Some("sample.hole_diameter"));
        assert_eq!(cross.line, None);
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration("60s"), Some(60_000_000_000_000));
        assert_eq!(parse_duration("1.5ms"), Some(1_500_000_000));
        assert_eq!(parse_duration("300 ns"), Some(300_000));
        assert_eq!(parse_duration("7ps"), Some(7));
        assert_eq!(parse_duration("2us"), Some(2_000_000));
        assert_eq!(parse_duration("5"), None);
        assert_eq!(parse_duration("-1s"), None);
        assert_eq!(parse_duration("1h"), None);
        for ps in [0, 1, 999, 1000, 1500, 1_000_000, 60_000_000_000_000, 123_456_789] {
            assert_eq!(parse_duration(&format_duration(ps)), Some(ps));
        }
        assert_eq!(format_duration(50_000), "50ns");
    }

    #[test]
    fn builds_experiment() {
        let mut c = Config::default();
        let e = c.experiment().unwrap();
        let t = e.sample.unwrap().transmittance().unwrap();
        assert!((t - 0.34).abs() < 0.02, "{t}");
        c.modulation.kind = ModulationKind::Target;
        assert!(matches!(c.experiment().unwrap().modulation, ModulationFunction::Tabulated { .. }));
        c.sample.enabled = false;
        assert!(c.experiment().unwrap().sample.is_none());
        assert_eq!(Config::default().herald_window(), -150_000..150_000);
    }
}
