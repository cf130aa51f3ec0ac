//! Low-level per-frame signals for one channel and the per-speaker
//! baselines used to normalize them.

mod baseline;
mod cepstrum;
mod creak;
mod intensity;
mod pitch;
mod speech;
mod tilt;

use std::io::Write;

pub use baseline::{build_baseline, SpeakerBaseline, MIN_BASELINE_FRAMES};
pub use cepstrum::{cepstral_flux, track_cepstrum, Cepstrum, CEPSTRUM_ORDER};
pub use creak::{compute_creak, period_jitter, JITTER_SATURATION};
pub use intensity::{track_intensity, INTENSITY_FLOOR_DB};
pub use pitch::{
    track_pitch, track_pitch_gated, PitchTrack, PITCH_MAX_HZ, PITCH_MIN_HZ, PITCH_WINDOW_MS,
    VOICING_THRESHOLD,
};
pub use speech::{detect_speech, SpeechDecision, SPEECH_MARGIN_DB};
pub use tilt::{
    band_centers, tilt_from_band_levels, track_tilt, TiltAnalyzer, MIN_LIVE_BANDS,
};

use crate::util::fmt6;

/// All per-frame base signals of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSignals {
    pub sample_rate: u32,
    /// Hz; present exactly on voiced frames.
    pub pitch: Vec<Option<f64>>,
    pub voiced: Vec<bool>,
    pub intensity: Vec<f64>,
    pub cepstrum: Vec<Cepstrum>,
    pub flux: Vec<Option<f64>>,
    /// dB per octave; absent with fewer than six live bands.
    pub tilt: Vec<Option<f64>>,
    pub speech: Vec<bool>,
    pub creak: Vec<f64>,
    pub speech_threshold_db: f64,
}

impl BaseSignals {
    pub fn compute(samples: &[f64], sample_rate: u32) -> Self {
        let intensity = track_intensity(samples, sample_rate);
        let speech = detect_speech(&intensity);
        let pitch = track_pitch_gated(samples, sample_rate, &speech.flags);
        let creak = compute_creak(samples, sample_rate, &pitch);
        let cepstrum = track_cepstrum(samples, sample_rate);
        let flux = cepstral_flux(&cepstrum);
        let tilt = track_tilt(samples, sample_rate);
        Self {
            sample_rate,
            pitch: pitch.pitch,
            voiced: pitch.voiced,
            intensity,
            cepstrum,
            flux,
            tilt,
            speech: speech.flags,
            creak,
            speech_threshold_db: speech.threshold_db,
        }
    }

    pub fn frame_count(&self) -> usize {
        self.intensity.len()
    }

    /// Writes the per-frame dump:
    /// `frame,pitch_hz,voiced,intensity_db,tilt_db_per_oct,speech,creak,c1..c12`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "frame,pitch_hz,voiced,intensity_db,tilt_db_per_oct,speech,creak")?;
        for k in 1..=CEPSTRUM_ORDER {
            write!(out, ",c{k}")?;
        }
        writeln!(out)?;
        let opt = |v: Option<f64>| v.map(fmt6).unwrap_or_else(|| "NA".into());
        for f in 0..self.frame_count() {
            write!(
                out,
                "{f},{},{},{},{},{},{}",
                opt(self.pitch[f]),
                u8::from(self.voiced[f]),
                fmt6(self.intensity[f]),
                opt(self.tilt[f]),
                u8::from(self.speech[f]),
                fmt6(self.creak[f]),
            )?;
            for c in &self.cepstrum[f] {
                write!(out, ",{}", fmt6(*c))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn invariants_hold_on_speechlike_audio() {
        let sr = 16000;
        let x = synth::speechlike_channel(sr, 8.0, 130.0, 4);
        let s = BaseSignals::compute(&x, sr);
        let n = s.frame_count();
        assert_eq!(n, 800);
        for v in [s.pitch.len(), s.voiced.len(), s.cepstrum.len(), s.tilt.len(), s.creak.len()] {
            assert_eq!(v, n);
        }
        for f in 0..n {
            assert_eq!(s.voiced[f], s.pitch[f].is_some());
            if !s.speech[f] {
                assert!(!s.voiced[f]);
            }
            if let Some(p) = s.pitch[f] {
                assert!((PITCH_MIN_HZ..=PITCH_MAX_HZ).contains(&p));
            }
            assert!((0.0..=1.0).contains(&s.creak[f]));
            assert!(s.flux[f].is_none_or(|v| v >= 0.0));
        }
    }

    #[test]
    fn deterministic() {
        let sr = 16000;
        let x = synth::speechlike_channel(sr, 3.0, 180.0, 9);
        assert_eq!(BaseSignals::compute(&x, sr), BaseSignals::compute(&x, sr));
    }

    #[test]
    fn gain_shifts_intensity_only() {
        let sr = 16000;
        let x = synth::speechlike_channel(sr, 4.0, 150.0, 5);
        let g = 0.5;
        let y: Vec<f64> = x.iter().map(|v| v * g).collect();
        let a = BaseSignals::compute(&x, sr);
        let b = BaseSignals::compute(&y, sr);
        let shift = 20.0 * g.log10();
        for f in 0..a.frame_count() {
            if a.intensity[f] > INTENSITY_FLOOR_DB - shift {
                assert!((b.intensity[f] - a.intensity[f] - shift).abs() < 1e-9);
            }
            assert_eq!(a.voiced[f], b.voiced[f], "frame {f}");
            match (a.pitch[f], b.pitch[f]) {
                (Some(p), Some(q)) => assert!((p - q).abs() < 1e-6),
                (None, None) => {}
                _ => panic!("pitch presence differs at frame {f}"),
            }
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let s = BaseSignals::compute(&synth::sine(200.0, 0.5, 0.2, 16000), 16000);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("frame,pitch_hz,voiced,intensity_db,tilt_db_per_oct,speech,creak,c1,"));
        assert!(header.ends_with(",c12"));
        assert_eq!(lines.count(), s.frame_count());
    }
}
