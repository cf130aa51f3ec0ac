//! Creakiness score.
//!
//! A stand-in measure built from two cues, each clamped to `[0, 1]` and
//! then averaged:
//!
//! * period irregularity: glottal-pulse-like peaks are picked from the
//!   waveform over frames `f-2..=f+2`, and the mean absolute difference
//!   between consecutive periods, relative to their mean, is scaled so
//!   that 20% irregularity saturates;
//! * low pitch: how far the frame's pitch lies below the speaker's 10th
//!   percentile, in octaves.
//!
//! Unvoiced frames score 0.

use super::pitch::{PitchTrack, PITCH_MAX_HZ};
use crate::signal_io::FrameClock;
use crate::util::{clamp01, percentile};

/// Relative period irregularity at which the jitter cue saturates.
pub const JITTER_SATURATION: f64 = 0.2;
/// Pulse candidates must reach this fraction of the segment's peak.
const PULSE_PEAK_FRACTION: f64 = 0.5;
/// Frames on either side of the scored frame used for period analysis.
const CONTEXT_FRAMES: usize = 2;

pub fn compute_creak(samples: &[f64], sample_rate: u32, pitch: &PitchTrack) -> Vec<f64> {
    let voiced_pitch: Vec<f64> = pitch.pitch.iter().flatten().copied().collect();
    let Some(p10) = percentile(&voiced_pitch, 10.0) else {
        return vec![0.0; pitch.pitch.len()];
    };
    let clock = FrameClock::new(sample_rate, samples.len());
    let hop = sample_rate as f64 / 100.0;
    let min_gap = sample_rate as f64 / PITCH_MAX_HZ;

    pitch
        .pitch
        .iter()
        .enumerate()
        .map(|(f, p)| {
            let Some(hz) = *p else { return 0.0 };
            let first = f.saturating_sub(CONTEXT_FRAMES);
            let last = (f + CONTEXT_FRAMES + 1).min(clock.frame_count);
            let lo = ((first as f64 * hop).round() as usize).min(samples.len());
            let hi = ((last as f64 * hop).round() as usize).min(samples.len());
            let jitter = period_jitter(&samples[lo..hi], min_gap);
            let jitter_cue = clamp01(jitter / JITTER_SATURATION);
            let low_cue = clamp01((p10 / hz).log2());
            0.5 * (jitter_cue + low_cue)
        })
        .collect()
}

/// Mean absolute relative difference between consecutive pulse periods
/// in `segment`, or 0 when fewer than two periods are found.
pub fn period_jitter(segment: &[f64], min_gap: f64) -> f64 {
    let pulses = pick_pulses(segment, min_gap);
    let periods: Vec<f64> = pulses.windows(2).map(|w| w[1] - w[0]).collect();
    if periods.len() < 2 {
        return 0.0;
    }
    let sum: f64 = periods
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / (0.5 * (w[0] + w[1])))
        .sum();
    sum / (periods.len() - 1) as f64
}

/// Positive waveform peaks at least `min_gap` samples apart, strongest
/// first, returned in time order with parabolic sub-sample refinement.
fn pick_pulses(x: &[f64], min_gap: f64) -> Vec<f64> {
    let top = x.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 || x.len() < 3 {
        return Vec::new();
    }
    let mut cands: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] >= PULSE_PEAK_FRACTION * top)
        .collect();
    cands.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in cands {
        if kept.iter().all(|&k| (k.abs_diff(c) as f64) >= min_gap) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept.into_iter()
        .map(|i| {
            let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
            let curv = a - 2.0 * b + c;
            let off = if curv < 0.0 {
                (0.5 * (a - c) / curv).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            i as f64 + off
        })
        .collect()
}
