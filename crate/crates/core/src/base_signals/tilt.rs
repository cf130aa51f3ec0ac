//! Spectral tilt from 1/3-octave band levels.
//!
//! Band `k` is centered at `100 * 2^(k/3)` Hz, for every center up to
//! 90% of Nyquist. Each band level is measured with its own Hann-windowed
//! complex kernel whose length scales inversely with the center frequency
//! (constant Q), so every band has the same shape on a log-frequency
//! axis. The kernel length is chosen so that the two neighbouring band
//! centers fall on nulls of the window's spectrum. Bands whose kernel is
//! shorter than the 25 ms analysis window average their power over
//! overlapping kernel positions tiling that window.
//!
//! Tilt is the least-squares slope of band level (dB) against band
//! position in octaves, i.e. dB per octave.

use crate::base_signals::intensity::{power_db, INTENSITY_FLOOR_DB};
use crate::signal_io::{FrameClock, ANALYSIS_WINDOW_MS};

pub const LOWEST_BAND_HZ: f64 = 100.0;
/// Highest band center as a fraction of Nyquist.
pub const BAND_CEILING: f64 = 0.9;
/// A tilt estimate needs at least this many bands above the floor.
pub const MIN_LIVE_BANDS: usize = 6;
/// Kernel length in periods of the band center. With a Hann window this
/// places the neighbouring band centers 4 and 5 bins away, on window nulls.
const KERNEL_PERIODS: f64 = 19.39;

/// Centers of the 1/3-octave bands analysed at `sample_rate`.
pub fn band_centers(sample_rate: u32) -> Vec<f64> {
    let ceiling = BAND_CEILING * sample_rate as f64 / 2.0;
    (0..)
        .map(|k| LOWEST_BAND_HZ * 2f64.powf(k as f64 / 3.0))
        .take_while(|&fc| fc <= ceiling)
        .collect()
}

/// Least-squares slope (dB per octave) of band levels against band
/// index / 3. Bands given as `None` are at the floor and are left out.
/// Returns `None` with fewer than [`MIN_LIVE_BANDS`] live bands.
pub fn tilt_from_band_levels(levels_db: &[Option<f64>]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = levels_db
        .iter()
        .enumerate()
        .filter_map(|(k, l)| l.map(|db| (k as f64 / 3.0, db)))
        .collect();
    if pts.len() < MIN_LIVE_BANDS {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

struct BandKernel {
    cos: Vec<f64>,
    sin: Vec<f64>,
    /// Converts |sum|^2 into the mean-square power of a sinusoid at the
    /// band center.
    norm: f64,
}

impl BandKernel {
    fn new(center_hz: f64, sample_rate: u32) -> Self {
        let sr = sample_rate as f64;
        let len = ((KERNEL_PERIODS * sr / center_hz).round() as usize).max(4);
        let mut cos = Vec::with_capacity(len);
        let mut sin = Vec::with_capacity(len);
        let mut wsum = 0.0;
        let tau = 2.0 * std::f64::consts::PI;
        for n in 0..len {
            let w = 0.5 - 0.5 * (tau * (n as f64 + 0.5) / len as f64).cos();
            let phase = tau * center_hz * n as f64 / sr;
            cos.push(w * phase.cos());
            sin.push(w * phase.sin());
            wsum += w;
        }
        Self {
            cos,
            sin,
            norm: 2.0 / (wsum * wsum),
        }
    }

    fn len(&self) -> usize {
        self.cos.len()
    }

    fn power_at(&self, samples: &[f64], start: isize) -> f64 {
        let len = self.len() as isize;
        let lo = (-start).clamp(0, len) as usize;
        let hi = (samples.len() as isize - start).clamp(0, len) as usize;
        if hi <= lo {
            return 0.0;
        }
        let base = (start + lo as isize) as usize;
        let seg = &samples[base..base + (hi - lo)];
        let (mut re, mut im) = (0.0, 0.0);
        for ((x, c), s) in seg.iter().zip(&self.cos[lo..hi]).zip(&self.sin[lo..hi]) {
            re += x * c;
            im += x * s;
        }
        (re * re + im * im) * self.norm
    }
}

/// Reusable band analyzer for one sample rate.
pub struct TiltAnalyzer {
    sample_rate: u32,
    kernels: Vec<BandKernel>,
}

impl TiltAnalyzer {
    pub fn new(sample_rate: u32) -> Self {
        let kernels = band_centers(sample_rate)
            .into_iter()
            .map(|fc| BandKernel::new(fc, sample_rate))
            .collect();
        Self {
            sample_rate,
            kernels,
        }
    }

    pub fn band_count(&self) -> usize {
        self.kernels.len()
    }

    /// Band levels in dB for the window centered on `center` (a sample
    /// position); `None` marks a band at the -96 dB floor.
    pub fn band_levels(&self, samples: &[f64], center: f64) -> Vec<Option<f64>> {
        let span = ANALYSIS_WINDOW_MS * self.sample_rate as f64 / 1000.0;
        self.kernels
            .iter()
            .map(|k| {
                let len = k.len() as f64;
                let power = if len >= span {
                    k.power_at(samples, (center - len / 2.0).round() as isize)
                } else {
                    let hop = len / 2.0;
                    let positions = ((span - len) / hop).ceil() as usize + 1;
                    let first = center - span / 2.0;
                    let step = (span - len) / (positions - 1) as f64;
                    (0..positions)
                        .map(|i| k.power_at(samples, (first + i as f64 * step).round() as isize))
                        .sum::<f64>()
                        / positions as f64
                };
                let db = power_db(power);
                (db > INTENSITY_FLOOR_DB).then_some(db)
            })
            .collect()
    }

    pub fn track(&self, samples: &[f64]) -> Vec<Option<f64>> {
        let clock = FrameClock::new(self.sample_rate, samples.len());
        (0..clock.frame_count)
            .map(|f| tilt_from_band_levels(&self.band_levels(samples, clock.center_sample(f))))
            .collect()
    }
}

/// Per-frame spectral tilt in dB per octave.
pub fn track_tilt(samples: &[f64], sample_rate: u32) -> Vec<Option<f64>> {
    TiltAnalyzer::new(sample_rate).track(samples)
}
