//! End-to-end recipes: simulate an acquisition from a [`Config`] and run
//! the analyses behind each reproduced table and figure. Every recipe is a
//! pure function of its configuration and seed.

use crate::config::{Config, ConfigError, ModulationKind};
use crate::correlator::{
    cauchy_schwarz, coincidence_histogram, heralded_g2_zero, CauchySchwarzResult, CorrelationHistogram, CorrelatorError,
    HeraldedG2,
};
use crate::hom::{empirical_visibility, fit_coherence_time, hom_curve, hom_similarity, CoherenceFit, HomCurve, HomError, VisibilityPoint};
use crate::io::{fmt_f64, CsvTable};
use crate::model::{Shape, TimeTagStream, CH_HERALD, CH_HERALD_SPLIT, CH_REEMIT_A, CH_REEMIT_B, PS_PER_NS};
use crate::optics::{detect, run_experiment, ExperimentRun, OpticsError};
use crate::rng::{exponential, RngSpec};
use crate::spectrum::SpectrumError;
use crate::waveform::{cosine_similarity, fit_shape, ShapeFit, TemporalWaveform, WaveformError};

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Correlator(#[from] CorrelatorError),
    #[error(transparent)]
    Hom(#[from] HomError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

pub type Result<T> = std::result::Result<T, WorkflowError>;

/// Which photons reach the reemitted-arm detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// Sample bypassed.
    Incident,
    /// After photon → plasmon → photon conversion.
    Reemitted,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Incident => "incident",
            Arm::Reemitted => "reemitted",
        }
    }
}

pub fn with_arm(cfg: &Config, arm: Arm) -> Config {
    let mut c = cfg.clone();
    c.sample.enabled = arm == Arm::Reemitted;
    c
}

/// Heaviside shaping: the modulator opens at the waveform offset and stays
/// open for three FWHMs, which turns a double exponential into an
/// exponential decay.
pub fn with_heaviside(cfg: &Config) -> Config {
    let mut c = cfg.clone();
    let amp = cfg.source.amplitude;
    c.modulation.kind = ModulationKind::Heaviside;
    c.modulation.edge = amp.offset();
    c.modulation.gate = Some(3.0 * amp.fwhm());
    c
}

/// Modulation that reshapes the emitted waveform into `shape` of `fwhm`.
pub fn with_target(cfg: &Config, shape: Shape, fwhm: f64) -> Config {
    let mut c = cfg.clone();
    c.modulation.kind = ModulationKind::Target;
    c.modulation.target_shape = shape;
    c.modulation.target_fwhm = fwhm;
    c.modulation.target_offset = cfg.source.amplitude.offset();
    c
}

/// Herald channels present in runs of `cfg`.
pub fn herald_channels(cfg: &Config) -> Vec<u8> {
    if cfg.split_herald {
        vec![CH_HERALD, CH_HERALD_SPLIT]
    } else {
        vec![CH_HERALD]
    }
}

/// One acquisition of `cfg.duration`.
pub fn simulate(cfg: &Config, rng: RngSpec) -> Result<ExperimentRun> {
    Ok(run_experiment(&cfg.experiment()?, cfg.duration, rng, true)?)
}

/// One acquisition with the seed taken from the configuration.
pub fn simulate_seeded(cfg: &Config) -> Result<ExperimentRun> {
    simulate(cfg, RngSpec::new(cfg.seed, 0))
}

pub fn measure_g2(stream: &TimeTagStream, cfg: &Config) -> Result<HeraldedG2> {
    Ok(heralded_g2_zero(stream, &herald_channels(cfg), CH_REEMIT_A, CH_REEMIT_B, cfg.herald_window())?)
}

pub fn measure_cs(stream: &TimeTagStream, cfg: &Config, bin_width: u64) -> Result<CauchySchwarzResult> {
    let binning = cfg.binning(bin_width, cfg.analysis.cs_window);
    Ok(cauchy_schwarz(stream, &herald_channels(cfg), [CH_REEMIT_A, CH_REEMIT_B], binning, cfg.analysis.auto_window)?)
}

/// Herald-to-signal delay histogram on the configured waveform axis.
pub fn waveform_histogram(stream: &TimeTagStream, cfg: &Config) -> CorrelationHistogram {
    let binning = cfg.binning(cfg.analysis.bin_width, cfg.analysis.waveform_window);
    coincidence_histogram(stream, &herald_channels(cfg), &[CH_REEMIT_A, CH_REEMIT_B], binning)
}

pub fn histogram_waveform(h: &CorrelationHistogram) -> Result<TemporalWaveform<f64>> {
    Ok(TemporalWaveform::from_counts(
        h.binning.bin_width as f64 / PS_PER_NS,
        h.binning.tau_min as f64 / PS_PER_NS,
        &h.counts,
    )?)
}

/// Waveform histogram accumulated over `chunks` independent acquisitions of
/// `cfg.duration`, which bounds memory for long integrations. Returns the
/// histogram and the number of herald tags.
pub fn accumulate_waveform(cfg: &Config, rng: RngSpec, chunks: usize) -> Result<(CorrelationHistogram, u64)> {
    let binning = cfg.binning(cfg.analysis.bin_width, cfg.analysis.waveform_window);
    let mut total = CorrelationHistogram { binning, counts: vec![0; binning.len()], singles: (0, 0), total_time: 0 };
    for k in 0..chunks.max(1) {
        let run = simulate(cfg, rng.child(k as u64))?;
        total.merge(&waveform_histogram(&run.stream, cfg))?;
    }
    let heralds = total.singles.0;
    Ok((total, heralds))
}

/// Detector tags of two mutually independent Poisson fields, one per arm,
/// at the given photon rates (s⁻¹) before the detectors. A classical
/// control for the Cauchy–Schwarz test.
pub fn classical_control(cfg: &Config, idler_rate: f64, signal_rate: f64, rng: RngSpec) -> Result<TimeTagStream> {
    let poisson = |rate: f64, r: RngSpec| -> Vec<i64> {
        let mut g = r.rng();
        let rate_ps = rate / crate::model::PS_PER_S;
        let mut t = 0.0;
        let mut out = Vec::new();
        loop {
            t += exponential(&mut g, rate_ps);
            if t >= cfg.duration as f64 {
                return out;
            }
            out.push(t.floor() as i64);
        }
    };
    let d = cfg.duration;
    let streams = [
        detect(&poisson(idler_rate / 2.0, rng.child(0)), &cfg.herald_detector, CH_HERALD, d, rng.child(10))?,
        detect(&poisson(idler_rate / 2.0, rng.child(1)), &cfg.herald_detector, CH_HERALD_SPLIT, d, rng.child(11))?,
        detect(&poisson(signal_rate / 2.0, rng.child(2)), &cfg.signal_detectors[0], CH_REEMIT_A, d, rng.child(12))?,
        detect(&poisson(signal_rate / 2.0, rng.child(3)), &cfg.signal_detectors[1], CH_REEMIT_B, d, rng.child(13))?,
    ];
    Ok(TimeTagStream::merge(streams.iter()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    /// `unshaped` (emitted waveform) or `shaped` (Heaviside).
    pub waveform: &'static str,
    pub arm: Arm,
    pub g2: HeraldedG2,
}

/// Heralded g²(0) of unshaped and Heaviside-shaped photons, before and
/// after the sample. Each of the four runs has its own random stream.
pub fn table1(cfg: &Config) -> Result<Vec<Table1Row>> {
    let root = RngSpec::new(cfg.seed, 0);
    let mut rows = Vec::with_capacity(4);
    for (k, (waveform, base)) in [("unshaped", cfg.clone()), ("shaped", with_heaviside(cfg))].into_iter().enumerate() {
        for (j, arm) in [Arm::Incident, Arm::Reemitted].into_iter().enumerate() {
            let c = with_arm(&base, arm);
            let run = simulate(&c, root.child((2 * k + j) as u64))?;
            rows.push(Table1Row { waveform, arm, g2: measure_g2(&run.stream, &c)? });
        }
    }
    Ok(rows)
}

pub fn table1_csv(rows: &[Table1Row]) -> CsvTable {
    let mut t = CsvTable::new(["waveform", "arm", "g2", "error", "n1", "n12", "n13", "n123"]);
    for r in rows {
        let g = &r.g2;
        t.push([
            r.waveform.to_string(),
            r.arm.name().to_string(),
            fmt_f64(g.value),
            fmt_f64(g.error),
            g.n1.to_string(),
            g.n12.to_string(),
            g.n13.to_string(),
            g.n123.to_string(),
        ]);
    }
    t
}

/// Cauchy–Schwarz parameter of one reemitted-arm acquisition, analysed at
/// each bin width (ps).
pub fn fig3(cfg: &Config, bin_widths: &[u64]) -> Result<Vec<CauchySchwarzResult>> {
    let run = simulate_seeded(cfg)?;
    bin_widths.iter().map(|&b| measure_cs(&run.stream, cfg, b)).collect()
}

pub fn cs_csv(r: &CauchySchwarzResult) -> CsvTable {
    let mut t = CsvTable::new(["tau_ns", "value", "error"]);
    for ((tau, c), e) in r.tau.iter().zip(&r.c).zip(&r.c_errors) {
        t.push_f64(&[*tau, c.unwrap_or(f64::NAN), e.unwrap_or(f64::NAN)]);
    }
    t
}

/// Largest C within `half_window` ns of `center` ns, with its error.
pub fn cs_peak_near(r: &CauchySchwarzResult, center: f64, half_window: f64) -> Option<(f64, f64, f64)> {
    r.tau
        .iter()
        .zip(&r.c)
        .zip(&r.c_errors)
        .filter(|((t, _), _)| (**t - center).abs() <= half_window)
        .filter_map(|((t, c), e)| Some((*t, (*c)?, (*e)?)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

pub fn fig3_summary_csv(results: &[CauchySchwarzResult], center: f64) -> CsvTable {
    let mut t = CsvTable::new(["bin_ns", "peak_tau_ns", "peak_c", "error", "g_ii0", "g_rr0"]);
    for r in results {
        let (tau, c, e) = cs_peak_near(r, center, 25.0).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        t.push_f64(&[r.bin_width as f64 / PS_PER_NS, tau, c, e, r.g_ii0.value, r.g_rr0.value]);
    }
    t
}

/// Incident and reemitted waveforms of one shaping condition.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformPair {
    pub label: &'static str,
    pub incident: TemporalWaveform<f64>,
    pub reemitted: TemporalWaveform<f64>,
    pub heralds: (u64, u64),
    pub similarity: f64,
}

/// Simulation length per chunk in [`fig4`].
pub const FIG4_CHUNK: u64 = 50 * 1_000_000_000_000;

/// The three waveform-imprinting conditions.
pub fn fig4_conditions(cfg: &Config) -> Vec<(&'static str, Config)> {
    vec![
        ("double-exponential", cfg.clone()),
        ("heaviside", with_heaviside(cfg)),
        ("gaussian", with_target(cfg, Shape::Gaussian, 40.0)),
    ]
}

/// Incident and reemitted waveforms of each shaping condition, integrated
/// until the incident arm has collected at least `min_heralds` heralds.
/// The reemitted arm runs for the same number of chunks.
pub fn fig4(cfg: &Config, min_heralds: u64) -> Result<Vec<WaveformPair>> {
    let root = RngSpec::new(cfg.seed, 4);
    let mut out = Vec::new();
    for (k, (label, base)) in fig4_conditions(cfg).into_iter().enumerate() {
        let mut base = base;
        base.duration = FIG4_CHUNK.min(cfg.duration.max(1));
        let cond = root.child(k as u64);
        let inc_cfg = with_arm(&base, Arm::Incident);
        let rem_cfg = with_arm(&base, Arm::Reemitted);
        let binning = base.binning(base.analysis.bin_width, base.analysis.waveform_window);
        let empty = || CorrelationHistogram { binning, counts: vec![0; binning.len()], singles: (0, 0), total_time: 0 };
        let (mut inc, mut rem) = (empty(), empty());
        let mut chunk = 0u64;
        while inc.singles.0 < min_heralds.max(1) {
            let a = simulate(&inc_cfg, cond.child(2 * chunk))?;
            inc.merge(&waveform_histogram(&a.stream, &inc_cfg))?;
            let b = simulate(&rem_cfg, cond.child(2 * chunk + 1))?;
            rem.merge(&waveform_histogram(&b.stream, &rem_cfg))?;
            chunk += 1;
        }
        let incident = histogram_waveform(&inc)?;
        let reemitted = histogram_waveform(&rem)?;
        let similarity = cosine_similarity(&incident, &reemitted)?;
        out.push(WaveformPair { label, incident, reemitted, heralds: (inc.singles.0, rem.singles.0), similarity });
    }
    Ok(out)
}

pub fn waveform_csv(w: &TemporalWaveform<f64>) -> CsvTable {
    CsvTable::curve(&w.centers(), w.counts(), w.errors())
}

/// Detunings (MHz) of the HOM curves.
pub fn fig5_detunings() -> Vec<f64> {
    (-120..=120).map(|k| k as f64 * 0.25).collect()
}

/// Optical delays (ns) of the visibility-versus-delay panel.
pub const FIG5_DELAYS: [f64; 8] = [0.0, 8.0, 16.0, 25.0, 42.5, 60.0, 80.0, 100.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Fig5 {
    pub theory: Vec<HomCurve<f64>>,
    pub incident: Vec<HomCurve<f64>>,
    pub reemitted: Vec<HomCurve<f64>>,
    pub incident_fit: ShapeFit<f64>,
    pub reemitted_fit: ShapeFit<f64>,
    /// Cosine similarity of the incident and reemitted model curves at each
    /// delay.
    pub similarity: Vec<f64>,
    pub incident_visibility: Vec<VisibilityPoint<f64>>,
    pub reemitted_visibility: Vec<VisibilityPoint<f64>>,
    pub incident_coherence: CoherenceFit<f64>,
    pub reemitted_coherence: CoherenceFit<f64>,
}

/// Frequency-domain HOM: model curves from the source amplitude and from
/// double-exponential fits to the measured incident and reemitted
/// waveforms, plus visibilities against optical delay from the measured
/// waveforms with fitted coherence times.
pub fn fig5(cfg: &Config, delays: &[f64], min_heralds: u64) -> Result<Fig5> {
    let pair = fig4(&fig5_config(cfg), min_heralds)?.remove(0);
    let shape = cfg.source.amplitude.shape();
    let incident_fit = fit_shape(&pair.incident, shape)?;
    let reemitted_fit = fit_shape(&pair.reemitted, shape)?;
    let mhz = fig5_detunings();
    let curves = |amp: &crate::model::BiphotonAmplitude<f64>| -> Result<Vec<HomCurve<f64>>> {
        delays.iter().map(|&d| Ok(hom_curve(amp, &mhz, d)?)).collect()
    };
    let theory = curves(&cfg.source.amplitude)?;
    let incident = curves(&incident_fit.amplitude)?;
    let reemitted = curves(&reemitted_fit.amplitude)?;
    let similarity = incident.iter().zip(&reemitted).map(|(a, b)| hom_similarity(a, b)).collect::<std::result::Result<_, _>>()?;
    let root = RngSpec::new(cfg.seed, 5);
    let vis = |w: &TemporalWaveform<f64>, label: u64| -> Result<Vec<VisibilityPoint<f64>>> {
        delays
            .iter()
            .enumerate()
            .map(|(k, &d)| Ok(empirical_visibility(w, d, root.child(label).child(k as u64), 200)?))
            .collect()
    };
    let incident_visibility = vis(&pair.incident, 0)?;
    let reemitted_visibility = vis(&pair.reemitted, 1)?;
    let incident_coherence = fit_coherence_time(&incident_visibility, &cfg.source.amplitude)?;
    let reemitted_coherence = fit_coherence_time(&reemitted_visibility, &cfg.source.amplitude)?;
    Ok(Fig5 {
        theory,
        incident,
        reemitted,
        incident_fit,
        reemitted_fit,
        similarity,
        incident_visibility,
        reemitted_visibility,
        incident_coherence,
        reemitted_coherence,
    })
}

fn fig5_config(cfg: &Config) -> Config {
    let mut c = cfg.clone();
    c.modulation.kind = ModulationKind::None;
    c
}

/// Curve table with one `value` column per curve: `detuning_mhz`,
/// `theory`, `incident`, `reemitted`.
pub fn hom_curves_csv(theory: &HomCurve<f64>, incident: &HomCurve<f64>, reemitted: &HomCurve<f64>) -> CsvTable {
    let mut t = CsvTable::new(["detuning_mhz", "theory", "incident", "reemitted"]);
    for k in 0..theory.values.len() {
        t.push_f64(&[theory.detunings_mhz[k], theory.values[k], incident.values[k], reemitted.values[k]]);
    }
    t
}

pub fn visibility_csv(incident: &[VisibilityPoint<f64>], reemitted: &[VisibilityPoint<f64>], template: &crate::model::BiphotonAmplitude<f64>) -> Result<CsvTable> {
    let mut t = CsvTable::new(["delay_ns", "incident", "incident_error", "reemitted", "reemitted_error", "theory"]);
    for (a, b) in incident.iter().zip(reemitted) {
        let th = crate::hom::hom_visibility(template, a.delay)?;
        t.push_f64(&[a.delay, a.visibility, a.error, b.visibility, b.error, th]);
    }
    Ok(t)
}
