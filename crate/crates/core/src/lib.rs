//! Simulation and analysis of single photons converted to single surface
//! plasmons and back by a gold nanohole array.
//!
//! The crate models the emitted biphoton waveform, the optical chain
//! (electro-optic shaping, sample, beam splitter, detectors), time-tag
//! correlation analysis (heralded g², Cauchy–Schwarz, waveform
//! reconstruction), frequency-domain Hong–Ou–Mandel interference and the
//! nanohole transmission spectrum.
//!
//! Analytic models are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices. Monte Carlo and time-tag code use
//! `f64` and integer picoseconds.

pub mod config;
pub mod correlator;
pub mod fit;
pub mod hom;
pub mod io;
pub mod model;
pub mod optics;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod source;
pub mod spectrum;
pub mod waveform;
pub mod workflow;

pub use config::{Config, ConfigError};
pub use correlator::{Binning, CorrelationHistogram};
pub use model::{BiphotonAmplitude, Shape, TimeTag, TimeTagStream};
pub use optics::{DetectorConfig, ExperimentConfig, ModulationFunction, SampleConfig};
pub use rng::RngSpec;
pub use scalar::Scalar;
pub use source::SourceConfig;
pub use spectrum::{ArrayGeometry, FanoParams, TransmissionSpectrum};
pub use waveform::TemporalWaveform;

pub type Amplitude = BiphotonAmplitude<f64>;
pub type Amplitude32 = BiphotonAmplitude<f32>;
pub type Waveform = TemporalWaveform<f64>;
pub type Waveform32 = TemporalWaveform<f32>;
pub type Geometry = ArrayGeometry<f64>;
pub type Geometry32 = ArrayGeometry<f32>;
pub type Spectrum = TransmissionSpectrum<f64>;
pub type Spectrum32 = TransmissionSpectrum<f32>;
pub type Fano = FanoParams<f64>;
pub type Fano32 = FanoParams<f32>;
