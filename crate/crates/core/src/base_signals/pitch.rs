//! Normalized-autocorrelation pitch tracking.
//!
//! Each frame is analysed over a 40 ms window centered on the frame.
//! The autocorrelation is computed through an FFT, then normalized per
//! lag by the energies of the two overlapping segments, so a perfectly
//! periodic signal scores 1 at its period regardless of level.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{intensity::track_intensity, speech::detect_speech};
use crate::signal_io::FrameClock;

pub const PITCH_MIN_HZ: f64 = 50.0;
pub const PITCH_MAX_HZ: f64 = 500.0;
pub const PITCH_WINDOW_MS: f64 = 40.0;
/// Minimum normalized autocorrelation peak for a voiced decision.
pub const VOICING_THRESHOLD: f64 = 0.45;
/// Candidate peaks within this fraction of the best peak are preferred
/// at the shortest lag, which guards against octave-down errors.
const OCTAVE_PREFERENCE: f64 = 0.85;

/// Per-frame pitch and voicing decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    /// Pitch in Hz, present only for voiced frames.
    pub pitch: Vec<Option<f64>>,
    pub voiced: Vec<bool>,
    /// Best normalized autocorrelation peak per frame, in `[-1, 1]`.
    pub clarity: Vec<f64>,
}

/// Tracks pitch with voicing gated by the channel's own speech decision.
pub fn track_pitch(samples: &[f64], sample_rate: u32) -> PitchTrack {
    let intensity = track_intensity(samples, sample_rate);
    let speech = detect_speech(&intensity);
    track_pitch_gated(samples, sample_rate, &speech.flags)
}

/// Tracks pitch; a frame is voiced only where `speech` is true.
pub fn track_pitch_gated(samples: &[f64], sample_rate: u32, speech: &[bool]) -> PitchTrack {
    let clock = FrameClock::new(sample_rate, samples.len());
    let mut analyzer = Autocorrelator::new(sample_rate);
    let n = clock.frame_count;
    let mut track = PitchTrack {
        pitch: vec![None; n],
        voiced: vec![false; n],
        clarity: vec![0.0; n],
    };
    for f in 0..n {
        let start = clock.window_start(f, analyzer.window);
        let Some((lag, clarity)) = analyzer.best_lag(samples, start) else {
            continue;
        };
        track.clarity[f] = clarity;
        if clarity >= VOICING_THRESHOLD && speech.get(f).copied().unwrap_or(false) {
            let hz = (sample_rate as f64 / lag).clamp(PITCH_MIN_HZ, PITCH_MAX_HZ);
            track.pitch[f] = Some(hz);
            track.voiced[f] = true;
        }
    }
    track
}

struct Autocorrelator {
    window: usize,
    lag_min: usize,
    lag_max: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    frame: Vec<f64>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    energy: Vec<f64>,
    r: Vec<f64>,
}

impl Autocorrelator {
    fn new(sample_rate: u32) -> Self {
        let sr = sample_rate as f64;
        let window = (PITCH_WINDOW_MS * sr / 1000.0).round() as usize;
        let lag_min = (sr / PITCH_MAX_HZ).ceil() as usize;
        let lag_max = (sr / PITCH_MIN_HZ).floor() as usize;
        let size = (2 * window).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        let ifft = planner.plan_fft_inverse(size);
        let scratch_len = fft
            .get_inplace_scratch_len()
            .max(ifft.get_inplace_scratch_len());
        Self {
            window,
            lag_min,
            lag_max,
            fft,
            ifft,
            frame: vec![0.0; window],
            buf: vec![Complex::default(); size],
            scratch: vec![Complex::default(); scratch_len],
            energy: vec![0.0; window + 1],
            r: vec![0.0; lag_max + 2],
        }
    }

    /// Returns the refined best lag (in samples) and its normalized
    /// autocorrelation, or `None` for a window without energy or peaks.
    fn best_lag(&mut self, samples: &[f64], start: isize) -> Option<(f64, f64)> {
        let w = self.window;
        for (i, v) in self.frame.iter_mut().enumerate() {
            let idx = start + i as isize;
            *v = if idx >= 0 && (idx as usize) < samples.len() {
                samples[idx as usize]
            } else {
                0.0
            };
        }
        let mean = self.frame.iter().sum::<f64>() / w as f64;
        self.frame.iter_mut().for_each(|v| *v -= mean);

        self.energy[0] = 0.0;
        for i in 0..w {
            self.energy[i + 1] = self.energy[i] + self.frame[i] * self.frame[i];
        }
        let total = self.energy[w];
        if total <= f64::MIN_POSITIVE {
            return None;
        }

        for (i, c) in self.buf.iter_mut().enumerate() {
            *c = Complex::new(self.frame.get(i).copied().unwrap_or(0.0), 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for c in self.buf.iter_mut() {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        self.ifft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / self.buf.len() as f64;

        let lo = self.lag_min.saturating_sub(1).max(1);
        let hi = (self.lag_max + 1).min(w - 1);
        for lag in lo..=hi {
            let head = self.energy[w - lag];
            let tail = total - self.energy[lag];
            let denom = (head * tail).sqrt();
            self.r[lag] = if denom > 0.0 {
                (self.buf[lag].re * scale / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
        }

        let mut peaks: Vec<usize> = Vec::new();
        for lag in self.lag_min.max(lo + 1)..=self.lag_max.min(hi - 1) {
            if self.r[lag] > self.r[lag - 1] && self.r[lag] >= self.r[lag + 1] {
                peaks.push(lag);
            }
        }
        let best = peaks
            .iter()
            .map(|&l| self.r[l])
            .fold(f64::NEG_INFINITY, f64::max);
        if !(best.is_finite() && best > 0.0) {
            return None;
        }
        let lag = *peaks
            .iter()
            .find(|&&l| self.r[l] >= OCTAVE_PREFERENCE * best)
            .expect("best peak qualifies");

        let (a, b, c) = (self.r[lag - 1], self.r[lag], self.r[lag + 1]);
        let curvature = a - 2.0 * b + c;
        let offset = if curvature < 0.0 {
            (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        Some((lag as f64 + offset, b))
    }
}
