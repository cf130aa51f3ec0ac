//! Mid-level prosodic features over frame windows, and the 85-value
//! per-frame context vectors (17 feature kinds x 5 context spans).
//!
//! Every feature is evaluated over the frames of a window that qualify
//! for it (voiced frames for pitch features, speech frames for loudness,
//! and so on). The fraction of the window's nominal frames that
//! qualified is reported as coverage; a window where nothing qualifies
//! yields value 0 with coverage 0. Windows that run past the ends of the
//! channel are clipped, and the clipped frames count against coverage.
//!
//! Per-kind definitions, with speaker percentiles and statistics from
//! [`SpeakerBaseline`]:
//!
//! | kind | qualifying frames | value |
//! |------|-------------------|-------|
//! | tl | voiced | mean `clamp01((p25 - f0) / (p25 - p10))` |
//! | th | voiced | mean `clamp01((f0 - p75) / (p90 - p75))` |
//! | vo | speech | `(mean dB - speaker mean) / speaker sd` |
//! | np | voiced (>= 2) | `clamp01(1 - window IQR / speaker IQR)` |
//! | wp | voiced (>= 2) | `max(window IQR / speaker IQR - 1, 0)` |
//! | cr | voiced | mean creak score |
//! | vf | speech | voiced / speech frames |
//! | re | voiced | mean `exp(-d / median d)`, d = distance to mean cepstrum |
//! | en | voiced | mean `max(d / median d - 1, 0)` |
//! | le | voiced after voiced | mean `1 / (1 + flux / median flux)` |
//! | sr | speech after speech | mean absolute intensity step |
//! | sf | all | speech / window frames |
//! | pd | voiced | frame distance of pitch peak to intensity peak / window frames |
//! | st | speech with tilt | mean tilt |
//! | tr | speech with tilt | max tilt - min tilt |
//! | tf | speech with tilt | mean `max((tilt - median) / IQR, 0)` |
//! | tm | speech with tilt | mean `clamp01(1 - abs(tilt - median) / IQR)` |

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::base_signals::{build_baseline, BaseSignals, SpeakerBaseline};
use crate::error::{Error, Result};
use crate::signal_io::{first_frame_at_or_after, AudioRecording, Channel};
use crate::util::{clamp0, clamp01, euclidean, fmt6, percentile};

/// Floor for the speaker's pitch interquartile range.
pub const MIN_PITCH_IQR_HZ: f64 = 1.0;
/// Floor for the speaker's intensity standard deviation.
pub const MIN_INTENSITY_SD_DB: f64 = 1.0;
/// Floor for the speaker's tilt interquartile range.
pub const MIN_TILT_IQR: f64 = 0.1;
const MIN_SCALE: f64 = 1e-12;

pub const KIND_COUNT: usize = 17;
pub const SPAN_COUNT: usize = 5;
pub const FEATURE_DIM: usize = KIND_COUNT * SPAN_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Tl,
    Th,
    Vo,
    Np,
    Wp,
    Cr,
    Vf,
    Re,
    En,
    Le,
    Sr,
    Sf,
    Pd,
    St,
    Tr,
    Tf,
    Tm,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; KIND_COUNT] = [
        FeatureKind::Tl,
        FeatureKind::Th,
        FeatureKind::Vo,
        FeatureKind::Np,
        FeatureKind::Wp,
        FeatureKind::Cr,
        FeatureKind::Vf,
        FeatureKind::Re,
        FeatureKind::En,
        FeatureKind::Le,
        FeatureKind::Sr,
        FeatureKind::Sf,
        FeatureKind::Pd,
        FeatureKind::St,
        FeatureKind::Tr,
        FeatureKind::Tf,
        FeatureKind::Tm,
    ];

    pub fn code(self) -> &'static str {
        match self {
            FeatureKind::Tl => "tl",
            FeatureKind::Th => "th",
            FeatureKind::Vo => "vo",
            FeatureKind::Np => "np",
            FeatureKind::Wp => "wp",
            FeatureKind::Cr => "cr",
            FeatureKind::Vf => "vf",
            FeatureKind::Re => "re",
            FeatureKind::En => "en",
            FeatureKind::Le => "le",
            FeatureKind::Sr => "sr",
            FeatureKind::Sf => "sf",
            FeatureKind::Pd => "pd",
            FeatureKind::St => "st",
            FeatureKind::Tr => "tr",
            FeatureKind::Tf => "tf",
            FeatureKind::Tm => "tm",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.code() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature kind {s:?}")))
    }
}

/// Context spans around the predicted frame (frame 0 covers 0-10 ms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextSpan {
    /// -250 to -100 ms
    A,
    /// -100 to -20 ms
    B,
    /// -20 to 20 ms
    C,
    /// 20 to 100 ms
    D,
    /// 100 to 250 ms
    E,
}

impl ContextSpan {
    pub const ALL: [ContextSpan; SPAN_COUNT] = [
        ContextSpan::A,
        ContextSpan::B,
        ContextSpan::C,
        ContextSpan::D,
        ContextSpan::E,
    ];

    /// Offsets in milliseconds relative to the frame's start.
    pub fn offsets_ms(self) -> (i64, i64) {
        match self {
            ContextSpan::A => (-250, -100),
            ContextSpan::B => (-100, -20),
            ContextSpan::C => (-20, 20),
            ContextSpan::D => (20, 100),
            ContextSpan::E => (100, 250),
        }
    }

    /// Offsets in whole frames (milliseconds floored to 10 ms).
    pub fn offsets_frames(self) -> (i64, i64) {
        let (a, b) = self.offsets_ms();
        (a.div_euclid(10), b.div_euclid(10))
    }

    /// Half-open frame window for the predicted frame `frame`.
    pub fn window(self, frame: usize) -> FrameWindow {
        let (a, b) = self.offsets_frames();
        FrameWindow {
            start: frame as i64 + a,
            end: frame as i64 + b,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            ContextSpan::A => "A",
            ContextSpan::B => "B",
            ContextSpan::C => "C",
            ContextSpan::D => "D",
            ContextSpan::E => "E",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ContextSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ContextSpan {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ContextSpan::ALL
            .into_iter()
            .find(|k| k.code() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown span {s:?}")))
    }
}

/// Position of a (kind, span) cell in the 85-value vector.
pub fn feature_index(kind: FeatureKind, span: ContextSpan) -> usize {
    kind.index() * SPAN_COUNT + span.index()
}

/// Column names in vector order: `tl_A, tl_B, ..., tm_E`.
pub fn feature_names() -> Vec<String> {
    FeatureKind::ALL
        .iter()
        .flat_map(|k| ContextSpan::ALL.iter().map(move |s| format!("{k}_{s}")))
        .collect()
}

/// Short digest of the column order, stored with models and checked
/// when feature files are read back.
pub fn column_checksum(names: &[String]) -> String {
    let digest = Sha256::digest(names.join(",").as_bytes());
    hex::encode(&digest[..8])
}

/// A half-open frame interval that may extend beyond the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameWindow {
    pub start: i64,
    pub end: i64,
}

impl FrameWindow {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidArgument(format!(
                "empty frame window {start}..{end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn nominal_len(&self) -> usize {
        (self.end - self.start).max(0) as usize
    }

    fn clip(&self, frame_count: usize) -> Range<usize> {
        let lo = self.start.clamp(0, frame_count as i64) as usize;
        let hi = self.end.clamp(0, frame_count as i64) as usize;
        lo..hi.max(lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureValue {
    pub value: f64,
    pub coverage: f64,
}

impl FeatureValue {
    const EMPTY: FeatureValue = FeatureValue {
        value: 0.0,
        coverage: 0.0,
    };
}

fn ramp01(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        clamp01(num / den)
    } else if num > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn mean_over(frames: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    frames.iter().map(|&i| f(i)).sum::<f64>() / frames.len() as f64
}

/// Evaluates one feature kind over a frame window.
pub fn feature_over_window(
    kind: FeatureKind,
    window: FrameWindow,
    signals: &BaseSignals,
    baseline: &SpeakerBaseline,
) -> FeatureValue {
    let nominal = window.nominal_len();
    let range = window.clip(signals.frame_count());
    if nominal == 0 || range.is_empty() {
        return FeatureValue::EMPTY;
    }
    let s = signals;
    let voiced: Vec<usize> = range.clone().filter(|&f| s.voiced[f]).collect();
    let speech = || -> Vec<usize> { range.clone().filter(|&f| s.speech[f]).collect() };
    let tilted = || -> Vec<usize> {
        range
            .clone()
            .filter(|&f| s.speech[f] && s.tilt[f].is_some())
            .collect()
    };
    let pitch = |f: usize| s.pitch[f].expect("voiced frames carry pitch");
    let tilt = |f: usize| s.tilt[f].expect("filtered on tilt");

    let (value, qualifying) = match kind {
        FeatureKind::Tl => {
            let den = baseline.p25() - baseline.p10();
            (
                (!voiced.is_empty())
                    .then(|| mean_over(&voiced, |f| ramp01(baseline.p25() - pitch(f), den))),
                voiced.len(),
            )
        }
        FeatureKind::Th => {
            let den = baseline.p90() - baseline.p75();
            (
                (!voiced.is_empty())
                    .then(|| mean_over(&voiced, |f| ramp01(pitch(f) - baseline.p75(), den))),
                voiced.len(),
            )
        }
        FeatureKind::Vo => {
            let sp = speech();
            let sd = baseline.intensity_sd_db.max(MIN_INTENSITY_SD_DB);
            (
                (!sp.is_empty()).then(|| {
                    (mean_over(&sp, |f| s.intensity[f]) - baseline.intensity_mean_db) / sd
                }),
                sp.len(),
            )
        }
        FeatureKind::Np | FeatureKind::Wp => {
            if voiced.len() < 2 {
                (None, 0)
            } else {
                let p: Vec<f64> = voiced.iter().map(|&f| pitch(f)).collect();
                let iqr = percentile(&p, 75.0).unwrap() - percentile(&p, 25.0).unwrap();
                let speaker = (baseline.p75() - baseline.p25()).max(MIN_PITCH_IQR_HZ);
                let ratio = iqr / speaker;
                let v = if kind == FeatureKind::Np {
                    clamp01(1.0 - ratio)
                } else {
                    clamp0(ratio - 1.0)
                };
                (Some(v), voiced.len())
            }
        }
        FeatureKind::Cr => (
            (!voiced.is_empty()).then(|| mean_over(&voiced, |f| s.creak[f])),
            voiced.len(),
        ),
        FeatureKind::Vf => {
            let sp = speech();
            (
                (!sp.is_empty()).then(|| voiced.len() as f64 / sp.len() as f64),
                sp.len(),
            )
        }
        FeatureKind::Re | FeatureKind::En => {
            let delta = baseline.cepstral_distance_median.max(MIN_SCALE);
            let d = |f: usize| euclidean(&s.cepstrum[f], &baseline.mean_cepstrum) / delta;
            let v = (!voiced.is_empty()).then(|| {
                if kind == FeatureKind::Re {
                    mean_over(&voiced, |f| (-d(f)).exp())
                } else {
                    mean_over(&voiced, |f| clamp0(d(f) - 1.0))
                }
            });
            (v, voiced.len())
        }
        FeatureKind::Le => {
            let phi = baseline.flux_median.max(MIN_SCALE);
            let q: Vec<usize> = voiced
                .iter()
                .copied()
                .filter(|&f| f > 0 && s.voiced[f - 1] && s.flux[f].is_some())
                .collect();
            (
                (!q.is_empty())
                    .then(|| mean_over(&q, |f| 1.0 / (1.0 + s.flux[f].unwrap() / phi))),
                q.len(),
            )
        }
        FeatureKind::Sr => {
            let q: Vec<usize> = range
                .clone()
                .filter(|&f| f > 0 && s.speech[f] && s.speech[f - 1])
                .collect();
            (
                (!q.is_empty())
                    .then(|| mean_over(&q, |f| (s.intensity[f] - s.intensity[f - 1]).abs())),
                q.len(),
            )
        }
        FeatureKind::Sf => {
            let sp = speech();
            (Some(sp.len() as f64 / range.len() as f64), range.len())
        }
        FeatureKind::Pd => {
            if voiced.is_empty() {
                (None, 0)
            } else {
                let sp = speech();
                let peak_pitch = argmax_first(&voiced, pitch);
                let peak_level = argmax_first(&sp, |f| s.intensity[f]);
                let dist = peak_pitch.abs_diff(peak_level) as f64;
                (Some(dist / range.len() as f64), voiced.len())
            }
        }
        FeatureKind::St | FeatureKind::Tr | FeatureKind::Tf | FeatureKind::Tm => {
            let q = tilted();
            let iqr = baseline.tilt_iqr.max(MIN_TILT_IQR);
            let med = baseline.tilt_median;
            let v = (!q.is_empty()).then(|| match kind {
                FeatureKind::St => mean_over(&q, tilt),
                FeatureKind::Tr => {
                    let (lo, hi) = q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &f| {
                        (acc.0.min(tilt(f)), acc.1.max(tilt(f)))
                    });
                    hi - lo
                }
                FeatureKind::Tf => mean_over(&q, |f| clamp0((tilt(f) - med) / iqr)),
                _ => mean_over(&q, |f| clamp01(1.0 - (tilt(f) - med).abs() / iqr)),
            });
            (v, q.len())
        }
    };
    match value {
        Some(v) if qualifying > 0 => FeatureValue {
            value: v,
            coverage: qualifying as f64 / nominal as f64,
        },
        _ => FeatureValue::EMPTY,
    }
}

fn argmax_first(frames: &[usize], key: impl Fn(usize) -> f64) -> usize {
    let mut best = frames[0];
    for &f in &frames[1..] {
        if key(f) > key(best) {
            best = f;
        }
    }
    best
}

/// The 85 feature values (kind-major, span-minor) for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub frame: usize,
    pub channel: Channel,
    pub values: [f64; FEATURE_DIM],
    pub coverage: [f64; FEATURE_DIM],
    /// The speaker baseline behind these values was flagged unreliable.
    pub unreliable: bool,
}

impl FeatureVector {
    pub fn get(&self, kind: FeatureKind, span: ContextSpan) -> FeatureValue {
        let i = feature_index(kind, span);
        FeatureValue {
            value: self.values[i],
            coverage: self.coverage[i],
        }
    }

    pub fn coverage_min(&self) -> f64 {
        self.coverage.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn assemble_vector(
    frame: usize,
    channel: Channel,
    signals: &BaseSignals,
    baseline: &SpeakerBaseline,
) -> FeatureVector {
    let mut values = [0.0; FEATURE_DIM];
    let mut coverage = [0.0; FEATURE_DIM];
    for kind in FeatureKind::ALL {
        for span in ContextSpan::ALL {
            let v = feature_over_window(kind, span.window(frame), signals, baseline);
            let i = feature_index(kind, span);
            values[i] = v.value;
            coverage[i] = v.coverage;
        }
    }
    FeatureVector {
        frame,
        channel,
        values,
        coverage,
        unreliable: baseline.unreliable,
    }
}

/// Base signals and baseline of one channel.
#[derive(Debug, Clone)]
pub struct ChannelAnalysis {
    pub channel: Channel,
    pub signals: BaseSignals,
    pub baseline: SpeakerBaseline,
}

impl ChannelAnalysis {
    pub fn compute(recording: &AudioRecording, channel: Channel) -> Self {
        let signals = BaseSignals::compute(recording.channel(channel), recording.sample_rate());
        let baseline = build_baseline(&signals);
        Self {
            channel,
            signals,
            baseline,
        }
    }
}

/// Feature vectors for consecutive frames of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub conversation: String,
    pub channel: Channel,
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "conversation,channel,frame")?;
        for name in feature_names() {
            write!(out, ",{name}")?;
        }
        writeln!(out, ",coverage_min")?;
        for row in &self.rows {
            write!(out, "{},{},{}", self.conversation, self.channel, row.frame)?;
            for v in &row.values {
                write!(out, ",{}", fmt6(*v))?;
            }
            writeln!(out, ",{}", fmt6(row.coverage_min()))?;
        }
        Ok(())
    }
}

/// Feature rows for the frames in `frames`.
pub fn feature_matrix(
    conversation: &str,
    analysis: &ChannelAnalysis,
    frames: Range<usize>,
) -> Result<FeatureMatrix> {
    let n = analysis.signals.frame_count();
    if frames.end > n || frames.start > frames.end {
        return Err(Error::RangeOutsideRecording {
            start_ms: frames.start as u64 * 10,
            end_ms: frames.end as u64 * 10,
            length_ms: n as u64 * 10,
        });
    }
    let rows = frames
        .into_par_iter()
        .map(|f| assemble_vector(f, analysis.channel, &analysis.signals, &analysis.baseline))
        .collect();
    Ok(FeatureMatrix {
        conversation: conversation.to_string(),
        channel: analysis.channel,
        rows,
    })
}

/// Feature rows for every frame whose start lies in
/// `[start_ms, end_ms)`.
pub fn feature_matrix_for_range(
    recording: &AudioRecording,
    channel: Channel,
    start_ms: u64,
    end_ms: u64,
) -> Result<FeatureMatrix> {
    let length_ms = recording.clock().frame_count as u64 * 10;
    if start_ms >= end_ms || end_ms > length_ms {
        return Err(Error::RangeOutsideRecording {
            start_ms,
            end_ms,
            length_ms,
        });
    }
    let analysis = ChannelAnalysis::compute(recording, channel);
    feature_matrix(
        &recording.conversation_id,
        &analysis,
        first_frame_at_or_after(start_ms)..first_frame_at_or_after(end_ms),
    )
}

/// A feature-matrix CSV read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub conversation: String,
    pub channel: Channel,
    pub frames: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub coverage_min: Vec<f64>,
}

impl FeatureTable {
    pub fn read<R: BufRead>(input: R, source: &str) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let expected: Vec<String> = ["conversation", "channel", "frame"]
            .into_iter()
            .map(String::from)
            .chain(feature_names())
            .chain(std::iter::once("coverage_min".to_string()))
            .collect();
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::io(source, e))?,
            None => return Err(Error::parse(source, 1, "missing header")),
        };
        let found: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if found != expected {
            return Err(Error::SchemaMismatch {
                expected: column_checksum(&expected),
                found: column_checksum(&found),
            });
        }
        let mut table = FeatureTable {
            conversation: String::new(),
            channel: Channel::Left,
            frames: Vec::new(),
            rows: Vec::new(),
            coverage_min: Vec::new(),
        };
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected.len() {
                return Err(Error::parse(
                    source,
                    i + 1,
                    format!("expected {} fields, found {}", expected.len(), fields.len()),
                ));
            }
            let conv = fields[0].to_string();
            let channel: Channel = fields[1]
                .parse()
                .map_err(|e: Error| Error::parse(source, i + 1, e.to_string()))?;
            if table.frames.is_empty() {
                table.conversation = conv;
                table.channel = channel;
            } else if table.conversation != conv || table.channel != channel {
                return Err(Error::parse(source, i + 1, "mixed conversations or channels"));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(source, i + 1, format!("bad number {s:?}")))
            };
            let frame = fields[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(source, i + 1, "bad frame index"))?;
            let row = fields[3..3 + FEATURE_DIM]
                .iter()
                .map(|s| num(s))
                .collect::<Result<Vec<f64>>>()?;
            table.frames.push(frame);
            table.rows.push(row);
            table.coverage_min.push(num(fields[3 + FEATURE_DIM])?);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_signals::{build_baseline, CEPSTRUM_ORDER};
    use crate::synth;

    /// Hand-built signals: every frame speech and voiced at 200 Hz.
    fn flat_signals(n: usize) -> BaseSignals {
        BaseSignals {
            sample_rate: 16000,
            pitch: vec![Some(200.0); n],
            voiced: vec![true; n],
            intensity: vec![-20.0; n],
            cepstrum: vec![[0.0; CEPSTRUM_ORDER]; n],
            flux: (0..n).map(|f| (f > 0).then_some(0.0)).collect(),
            tilt: vec![Some(-6.0); n],
            speech: vec![true; n],
            creak: vec![0.0; n],
            speech_threshold_db: -45.0,
        }
    }

    #[test]
    fn span_geometry_matches_table() {
        let w = |s: ContextSpan| {
            let w = s.window(100);
            (w.start, w.end)
        };
        assert_eq!(w(ContextSpan::A), (75, 90));
        assert_eq!(w(ContextSpan::B), (90, 98));
        assert_eq!(w(ContextSpan::C), (98, 102));
        assert_eq!(w(ContextSpan::D), (102, 110));
        assert_eq!(w(ContextSpan::E), (110, 125));
    }

    #[test]
    fn names_are_kind_major() {
        let names = feature_names();
        assert_eq!(names.len(), FEATURE_DIM);
        assert_eq!(names[0], "tl_A");
        assert_eq!(names[4], "tl_E");
        assert_eq!(names[5], "th_A");
        assert_eq!(names[84], "tm_E");
        assert_eq!(feature_index(FeatureKind::Vo, ContextSpan::C), 12);
    }

    #[test]
    fn voicing_fraction_of_fully_voiced_window() {
        let s = flat_signals(50);
        let b = build_baseline(&s);
        let v = feature_over_window(FeatureKind::Vf, FrameWindow::new(10, 20).unwrap(), &s, &b);
        assert_eq!(v.value, 1.0);
        assert_eq!(v.coverage, 1.0);
    }

    #[test]
    fn speaking_fraction_of_silence() {
        let mut s = flat_signals(50);
        for f in 0..50 {
            s.speech[f] = false;
            s.voiced[f] = false;
            s.pitch[f] = None;
        }
        let b = build_baseline(&s);
        let w = FrameWindow::new(10, 20).unwrap();
        let v = feature_over_window(FeatureKind::Sf, w, &s, &b);
        assert_eq!((v.value, v.coverage), (0.0, 1.0));
        let v = feature_over_window(FeatureKind::Vo, w, &s, &b);
        assert_eq!((v.value, v.coverage), (0.0, 0.0));
    }

    #[test]
    fn tilt_mean_and_range() {
        let mut s = flat_signals(3);
        s.tilt = vec![Some(-6.0), Some(-4.0), Some(-2.0)];
        let b = build_baseline(&s);
        let w = FrameWindow::new(0, 3).unwrap();
        assert!((feature_over_window(FeatureKind::St, w, &s, &b).value + 4.0).abs() < 1e-12);
        assert!((feature_over_window(FeatureKind::Tr, w, &s, &b).value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn window_clipped_at_edges() {
        let s = flat_signals(40);
        let b = build_baseline(&s);
        let v = assemble_vector(0, Channel::Left, &s, &b);
        for kind in FeatureKind::ALL {
            for span in [ContextSpan::A, ContextSpan::B] {
                assert_eq!(v.get(kind, span), FeatureValue::EMPTY);
            }
        }
        // span C at frame 0 covers frames 0..2 of a nominal 4
        assert_eq!(v.get(FeatureKind::Sf, ContextSpan::C).coverage, 0.5);
    }

    #[test]
    fn pitch_range_features() {
        let mut s = flat_signals(200);
        // speaker: pitch spread uniformly 100..299 Hz
        for f in 0..200 {
            s.pitch[f] = Some(100.0 + f as f64);
        }
        let b = build_baseline(&s);
        // a window of 10 frames has a narrow range
        let w = FrameWindow::new(50, 60).unwrap();
        let np = feature_over_window(FeatureKind::Np, w, &s, &b).value;
        let wp = feature_over_window(FeatureKind::Wp, w, &s, &b).value;
        assert!(np > 0.9 && wp == 0.0);
        // the whole channel has exactly the speaker's range
        let w = FrameWindow::new(0, 200).unwrap();
        assert!(feature_over_window(FeatureKind::Np, w, &s, &b).value.abs() < 1e-12);
        // low frames are "low" in the speaker's range
        let tl = feature_over_window(FeatureKind::Tl, FrameWindow::new(0, 5).unwrap(), &s, &b);
        assert_eq!(tl.value, 1.0);
        let th = feature_over_window(FeatureKind::Th, FrameWindow::new(195, 200).unwrap(), &s, &b);
        assert_eq!(th.value, 1.0);
    }

    #[test]
    fn peak_disalignment() {
        let mut s = flat_signals(10);
        s.pitch[2] = Some(250.0);
        s.intensity[7] = -10.0;
        let b = build_baseline(&s);
        let v = feature_over_window(FeatureKind::Pd, FrameWindow::new(0, 10).unwrap(), &s, &b);
        assert!((v.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn steady_tone_spans_a_and_e_agree() {
        let sr = 16000;
        let x = synth::harmonic_complex(160.0, 0.3, 3.0, sr, 10, 1);
        let s = BaseSignals::compute(&x, sr);
        let b = build_baseline(&s);
        let v = assemble_vector(150, Channel::Left, &s, &b);
        // peak positions wander on a steady tone, so pd is left out
        for kind in FeatureKind::ALL.into_iter().filter(|k| *k != FeatureKind::Pd) {
            let a = v.get(kind, ContextSpan::A);
            let e = v.get(kind, ContextSpan::E);
            assert!((a.value - e.value).abs() < 1e-3, "{kind}: {} vs {}", a.value, e.value);
            assert_eq!(a.coverage, e.coverage, "{kind}");
        }
    }

    #[test]
    fn csv_round_trip_and_schema_check() {
        let sr = 16000;
        let x = synth::speechlike_channel(sr, 3.0, 150.0, 2);
        let rec = AudioRecording::new("T1", sr, x.clone(), x).unwrap();
        let m = feature_matrix_for_range(&rec, Channel::Right, 1000, 1500).unwrap();
        assert_eq!(m.rows.len(), 50);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let t = FeatureTable::read(buf.as_slice(), "mem").unwrap();
        assert_eq!(t.frames, (100..150).collect::<Vec<_>>());
        assert_eq!(t.channel, Channel::Right);
        for (row, vec) in t.rows.iter().zip(&m.rows) {
            for (a, b) in row.iter().zip(&vec.values) {
                assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-6));
            }
        }
        let bad = String::from_utf8(buf).unwrap().replacen("tl_A", "tl_X", 1);
        assert!(matches!(
            FeatureTable::read(bad.as_bytes(), "mem"),
            Err(Error::SchemaMismatch { .. })
        ));
        assert!(feature_matrix_for_range(&rec, Channel::Left, 0, 4000).is_err());
    }
}
