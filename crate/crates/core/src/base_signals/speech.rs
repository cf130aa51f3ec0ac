use super::intensity::INTENSITY_FLOOR_DB;
use crate::util::percentile;

/// Margin below the channel's 95th-percentile intensity that still
/// counts as speech.
pub const SPEECH_MARGIN_DB: f64 = 25.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechDecision {
    pub flags: Vec<bool>,
    pub threshold_db: f64,
}

/// Speech iff intensity is at least `p95 - 25 dB` and above the silence
/// floor. The floor condition keeps an all-silent channel all-silent.
pub fn detect_speech(intensity: &[f64]) -> SpeechDecision {
    let threshold_db = percentile(intensity, 95.0).unwrap_or(INTENSITY_FLOOR_DB) - SPEECH_MARGIN_DB;
    let flags = intensity
        .iter()
        .map(|&db| db >= threshold_db && db > INTENSITY_FLOOR_DB)
        .collect();
    SpeechDecision {
        flags,
        threshold_db,
    }
}
