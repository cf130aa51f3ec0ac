use super::cepstrum::{Cepstrum, CEPSTRUM_ORDER};
use super::BaseSignals;
use crate::util::{euclidean, mean, median, percentile_sorted, sample_sd};

/// Below this many qualifying frames a baseline is flagged unreliable.
pub const MIN_BASELINE_FRAMES: usize = 100;

/// Per-speaker normalization statistics for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerBaseline {
    /// Pitch percentiles (Hz) over voiced frames: p10, p25, p50, p75, p90.
    pub pitch_percentiles: [f64; 5],
    pub intensity_mean_db: f64,
    pub intensity_sd_db: f64,
    pub mean_cepstrum: Cepstrum,
    /// Median distance of voiced-frame cepstra to `mean_cepstrum`.
    pub cepstral_distance_median: f64,
    /// Median cepstral flux between consecutive voiced frames.
    pub flux_median: f64,
    pub tilt_median: f64,
    pub tilt_iqr: f64,
    pub speech_threshold_db: f64,
    pub voiced_frames: usize,
    pub speech_frames: usize,
    pub unreliable: bool,
}

impl SpeakerBaseline {
    pub fn p10(&self) -> f64 {
        self.pitch_percentiles[0]
    }
    pub fn p25(&self) -> f64 {
        self.pitch_percentiles[1]
    }
    pub fn p50(&self) -> f64 {
        self.pitch_percentiles[2]
    }
    pub fn p75(&self) -> f64 {
        self.pitch_percentiles[3]
    }
    pub fn p90(&self) -> f64 {
        self.pitch_percentiles[4]
    }
}

pub fn build_baseline(signals: &BaseSignals) -> SpeakerBaseline {
    let n = signals.frame_count();
    let voiced: Vec<usize> = (0..n).filter(|&f| signals.voiced[f]).collect();
    let speech: Vec<usize> = (0..n).filter(|&f| signals.speech[f]).collect();

    let mut pitch: Vec<f64> = voiced.iter().filter_map(|&f| signals.pitch[f]).collect();
    pitch.sort_by(f64::total_cmp);
    let mut pitch_percentiles = [0.0; 5];
    for (slot, q) in pitch_percentiles.iter_mut().zip([10.0, 25.0, 50.0, 75.0, 90.0]) {
        *slot = percentile_sorted(&pitch, q).unwrap_or(0.0);
    }

    let intensity: Vec<f64> = speech.iter().map(|&f| signals.intensity[f]).collect();

    let mut mean_cepstrum = [0.0; CEPSTRUM_ORDER];
    if !voiced.is_empty() {
        for &f in &voiced {
            for (m, c) in mean_cepstrum.iter_mut().zip(&signals.cepstrum[f]) {
                *m += c;
            }
        }
        mean_cepstrum.iter_mut().for_each(|m| *m /= voiced.len() as f64);
    }
    let distances: Vec<f64> = voiced
        .iter()
        .map(|&f| euclidean(&signals.cepstrum[f], &mean_cepstrum))
        .collect();
    let fluxes: Vec<f64> = voiced
        .iter()
        .filter(|&&f| f > 0 && signals.voiced[f - 1])
        .filter_map(|&f| signals.flux[f])
        .collect();

    let mut tilts: Vec<f64> = speech.iter().filter_map(|&f| signals.tilt[f]).collect();
    tilts.sort_by(f64::total_cmp);
    let tilt_iqr = match (percentile_sorted(&tilts, 25.0), percentile_sorted(&tilts, 75.0)) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };

    SpeakerBaseline {
        pitch_percentiles,
        intensity_mean_db: mean(&intensity).unwrap_or(0.0),
        intensity_sd_db: sample_sd(&intensity).unwrap_or(0.0),
        mean_cepstrum,
        cepstral_distance_median: median(&distances).unwrap_or(0.0),
        flux_median: median(&fluxes).unwrap_or(0.0),
        tilt_median: percentile_sorted(&tilts, 50.0).unwrap_or(0.0),
        tilt_iqr,
        speech_threshold_db: signals.speech_threshold_db,
        voiced_frames: voiced.len(),
        speech_frames: speech.len(),
        unreliable: voiced.len() < MIN_BASELINE_FRAMES || speech.len() < MIN_BASELINE_FRAMES,
    }
}
