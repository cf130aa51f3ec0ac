//! Frame-level prosodic features and reduction-prediction baselines for
//! two-channel dialog audio.
//!
//! The pipeline runs bottom-up: [`signal_io`] loads audio and manifests,
//! [`base_signals`] computes per-frame pitch, intensity, cepstra, tilt,
//! speech and creak tracks, [`midlevel`] turns them into 85-value
//! context vectors, [`annotations`] reads region labels, [`stats`]
//! correlates and tests, and [`models`] trains and evaluates the
//! linear and nearest-neighbor predictors. [`synth`] writes a small
//! deterministic corpus with planted label dependencies.

pub mod annotations;
pub mod base_signals;
pub mod error;
pub mod midlevel;
pub mod models;
pub mod signal_io;
pub mod stats;
pub mod synth;
pub mod util;

pub use annotations::{FrameLabels, FunctionRegion, FunctionTag, ReductionRegion};
pub use base_signals::{BaseSignals, SpeakerBaseline};
pub use error::{Error, Result};
pub use midlevel::{ContextSpan, FeatureKind, FeatureVector, FEATURE_DIM};
pub use models::{EvalReport, KnnModel, LinearModel, Standardizer};
pub use signal_io::{AudioRecording, Channel, FrameClock, Manifest, ManifestEntry};
