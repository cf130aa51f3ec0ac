//! Conversation audio, the 10 ms frame clock, and the corpus manifest.
//!
//! Every recording is held as two equal-length tracks (left and right
//! speaker) of samples normalized to `[-1, 1]`. Frame `i` covers the
//! half-open interval `[10 i, 10 (i + 1))` ms; analysis windows are
//! centered on the middle of the frame.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Frame hop in milliseconds.
pub const HOP_MS: u64 = 10;
/// Default analysis window in milliseconds.
pub const ANALYSIS_WINDOW_MS: f64 = 25.0;
/// Lowest accepted sample rate.
pub const MIN_SAMPLE_RATE: u32 = 8000;

/// One of the two speaker tracks of a conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Left,
    Right,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Left, Channel::Right];

    pub fn index(self) -> usize {
        match self {
            Channel::Left => 0,
            Channel::Right => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Left => "left",
            Channel::Right => "right",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Channel::Left),
            "right" | "r" => Ok(Channel::Right),
            other => Err(Error::InvalidArgument(format!("unknown channel {other:?}"))),
        }
    }
}

/// A two-track conversation recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioRecording {
    pub conversation_id: String,
    sample_rate: u32,
    channels: [Vec<f64>; 2],
    /// Set when the source file was mono and its track was duplicated.
    pub duplicated_mono: bool,
}

impl AudioRecording {
    pub fn new(
        conversation_id: impl Into<String>,
        sample_rate: u32,
        left: Vec<f64>,
        right: Vec<f64>,
    ) -> Result<Self> {
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(Error::InvalidRecording(format!(
                "sample rate {sample_rate} Hz is below {MIN_SAMPLE_RATE} Hz"
            )));
        }
        if left.len() != right.len() {
            return Err(Error::InvalidRecording(format!(
                "channel lengths differ ({} vs {})",
                left.len(),
                right.len()
            )));
        }
        if left
            .iter()
            .chain(&right)
            .any(|s| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(Error::InvalidRecording(
                "samples must be finite and within [-1, 1]".into(),
            ));
        }
        Ok(Self {
            conversation_id: conversation_id.into(),
            sample_rate,
            channels: [left, right],
            duplicated_mono: false,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, ch: Channel) -> &[f64] {
        &self.channels[ch.index()]
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_ms(&self) -> u64 {
        self.len() as u64 * 1000 / self.sample_rate as u64
    }

    pub fn clock(&self) -> FrameClock {
        FrameClock::new(self.sample_rate, self.len())
    }
}

/// Maps frames to sample positions for one recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameClock {
    pub sample_rate: u32,
    pub frame_count: usize,
}

impl FrameClock {
    pub fn new(sample_rate: u32, samples: usize) -> Self {
        Self {
            sample_rate,
            frame_count: (samples as u64 * 100 / sample_rate as u64) as usize,
        }
    }

    /// Sample position (fractional) of the middle of frame `i`.
    pub fn center_sample(&self, frame: usize) -> f64 {
        (frame as f64 + 0.5) * self.sample_rate as f64 / 100.0
    }

    /// Number of samples in a window of `ms` milliseconds.
    pub fn window_len(&self, ms: f64) -> usize {
        ((ms * self.sample_rate as f64 / 1000.0).round() as usize).max(1)
    }

    /// First sample of a window of `len` samples centered on frame `i`.
    /// May be negative near the start of the recording.
    pub fn window_start(&self, frame: usize, len: usize) -> isize {
        (self.center_sample(frame) - len as f64 / 2.0).round() as isize
    }
}

/// Maps a time in milliseconds to the frame containing it.
pub fn time_to_frame(t_ms: f64) -> Result<usize> {
    if t_ms.is_nan() || t_ms < 0.0 {
        return Err(Error::NegativeTime(t_ms));
    }
    Ok((t_ms / HOP_MS as f64).floor() as usize)
}

/// Start time of frame `i` in milliseconds.
pub fn frame_start_ms(frame: usize) -> u64 {
    frame as u64 * HOP_MS
}

/// Index of the first frame whose start time is at or after `t_ms`.
pub(crate) fn first_frame_at_or_after(t_ms: u64) -> usize {
    t_ms.div_ceil(HOP_MS) as usize
}

/// Loads a RIFF WAVE file (PCM16 or float32, mono or stereo).
pub fn load_recording(path: impl AsRef<Path>) -> Result<AudioRecording> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|source| match source {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::Wav {
            path: path.to_path_buf(),
            source: other,
        },
    })?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels (expected 1 or 2)",
            spec.channels
        )));
    }
    if spec.sample_rate < MIN_SAMPLE_RATE {
        return Err(Error::UnsupportedFormat(format!(
            "sample rate {} Hz is below {MIN_SAMPLE_RATE} Hz",
            spec.sample_rate
        )));
    }
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "{bits}-bit {fmt:?} samples (expected 16-bit PCM or 32-bit float)"
            )))
        }
    };
    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(Error::UnsupportedFormat("non-finite float samples".into()));
    }
    if interleaved.is_empty() {
        return Err(Error::EmptyAudio(path.to_path_buf()));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if spec.channels == 1 {
        let mut rec = AudioRecording::new(id, spec.sample_rate, interleaved.clone(), interleaved)?;
        rec.duplicated_mono = true;
        Ok(rec)
    } else {
        let left = interleaved.iter().step_by(2).copied().collect();
        let right = interleaved.iter().skip(1).step_by(2).copied().collect();
        AudioRecording::new(id, spec.sample_rate, left, right)
    }
}

/// Quantizes a sample to 16-bit PCM using the same 1/32768 scale the
/// loader applies.
pub fn quantize_pcm16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes a stereo 16-bit PCM WAVE file.
pub fn write_wav_pcm16(
    path: impl AsRef<Path>,
    sample_rate: u32,
    left: &[f64],
    right: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    if left.len() != right.len() {
        return Err(Error::InvalidRecording("channel lengths differ".into()));
    }
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for (l, r) in left.iter().zip(right) {
        w.write_sample(quantize_pcm16(*l)).map_err(wav_err)?;
        w.write_sample(quantize_pcm16(*r)).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

/// One conversation listed in a corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub conversation_id: String,
    pub wav_path: PathBuf,
    pub annotated_start_ms: u64,
    pub annotated_end_ms: u64,
}

impl ManifestEntry {
    pub fn annotated_ms(&self) -> u64 {
        self.annotated_end_ms - self.annotated_start_ms
    }

    /// Frames whose start time lies in the annotated range.
    pub fn frame_range(&self) -> std::ops::Range<usize> {
        first_frame_at_or_after(self.annotated_start_ms)
            ..first_frame_at_or_after(self.annotated_end_ms)
    }
}

/// Corpus manifest: `conversation_id, wav_path, annotated_start_ms,
/// annotated_end_ms`, one conversation per line. Blank lines, `#`
/// comments and a header line are ignored. Relative paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn parse(text: &str, base_dir: &Path, source_name: &str) -> Result<Self> {
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields[0] == "conversation_id" {
                continue;
            }
            if fields.len() != 4 {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("expected 4 fields, found {}", fields.len()),
                ));
            }
            let ms = |s: &str, what: &str| {
                s.parse::<u64>().map_err(|_| {
                    Error::parse(source_name, line_no, format!("bad {what} {s:?}"))
                })
            };
            let start = ms(fields[2], "annotated_start_ms")?;
            let end = ms(fields[3], "annotated_end_ms")?;
            if start >= end {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("annotated range {start}..{end} is empty"),
                ));
            }
            let id = fields[0].to_string();
            if entries.iter().any(|e| e.conversation_id == id) {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("duplicate conversation id {id:?}"),
                ));
            }
            let wav = PathBuf::from(fields[1]);
            let wav_path = if wav.is_relative() {
                base_dir.join(wav)
            } else {
                wav
            };
            entries.push(ManifestEntry {
                conversation_id: id,
                wav_path,
                annotated_start_ms: start,
                annotated_end_ms: end,
            });
        }
        Ok(Self { entries })
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.conversation_id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.conversation_id.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_to_frame_uses_half_open_frames() {
        assert_eq!(time_to_frame(0.0).unwrap(), 0);
        assert_eq!(time_to_frame(25.0).unwrap(), 2);
        assert_eq!(time_to_frame(20.0).unwrap(), 2);
        assert_eq!(time_to_frame(19.999).unwrap(), 1);
        assert!(matches!(time_to_frame(-1.0), Err(Error::NegativeTime(_))));
        assert!(time_to_frame(f64::NAN).is_err());
    }

    #[test]
    fn frame_count_from_length() {
        assert_eq!(FrameClock::new(48000, 480000).frame_count, 1000);
        assert_eq!(FrameClock::new(16000, 159).frame_count, 0);
        assert_eq!(FrameClock::new(16000, 160).frame_count, 1);
        assert_eq!(FrameClock::new(44100, 44100).frame_count, 100);
    }

    #[test]
    fn frame_time_round_trip() {
        for i in 0..5000 {
            assert_eq!(time_to_frame(frame_start_ms(i) as f64).unwrap(), i);
        }
    }

    #[test]
    fn recording_invariants_enforced() {
        assert!(AudioRecording::new("x", 16000, vec![0.0; 3], vec![0.0; 4]).is_err());
        assert!(AudioRecording::new("x", 4000, vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(AudioRecording::new("x", 16000, vec![1.5], vec![0.0]).is_err());
        assert!(AudioRecording::new("x", 16000, vec![f64::NAN], vec![0.0]).is_err());
        assert!(AudioRecording::new("x", 16000, vec![0.5], vec![-1.0]).is_ok());
    }

    #[test]
    fn manifest_parses_and_resolves_paths() {
        let text = "# corpus\nconversation_id,wav_path,annotated_start_ms,annotated_end_ms\n\
                    EN_006, audio/EN_006.wav, 0, 664000\n\nEN_007,/abs/EN_007.wav,0,253000\n";
        let m = Manifest::parse(text, Path::new("/data"), "m.csv").unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].wav_path, PathBuf::from("/data/audio/EN_006.wav"));
        assert_eq!(m.entries[1].wav_path, PathBuf::from("/abs/EN_007.wav"));
        assert_eq!(m.entries[0].frame_range(), 0..66400);
    }

    #[test]
    fn manifest_rejects_bad_lines() {
        let err = Manifest::parse("a,b,10,5\n", Path::new(""), "m").unwrap_err();
        assert!(err.to_string().contains("m:1"));
        assert!(Manifest::parse("a,b,0\n", Path::new(""), "m").is_err());
        assert!(Manifest::parse("a,b,0,x\n", Path::new(""), "m").is_err());
        assert!(Manifest::parse("a,b,0,5\na,c,0,5\n", Path::new(""), "m").is_err());
    }
}
