use crate::signal_io::{FrameClock, ANALYSIS_WINDOW_MS};

/// Level assigned to windows without energy, in dB re full scale.
pub const INTENSITY_FLOOR_DB: f64 = -96.0;

/// Per-frame intensity: `10 log10` of the mean squared amplitude over a
/// 25 ms window centered on the frame, floored at -96 dB. Windows that
/// run past either end of the signal average over the samples present.
pub fn track_intensity(samples: &[f64], sample_rate: u32) -> Vec<f64> {
    let clock = FrameClock::new(sample_rate, samples.len());
    let len = clock.window_len(ANALYSIS_WINDOW_MS);
    // prefix sums keep this linear in the signal length
    let mut cumsum = Vec::with_capacity(samples.len() + 1);
    cumsum.push(0.0);
    let mut acc = 0.0;
    for s in samples {
        acc += s * s;
        cumsum.push(acc);
    }
    (0..clock.frame_count)
        .map(|f| {
            let start = clock.window_start(f, len).max(0) as usize;
            let end = (clock.window_start(f, len) + len as isize).clamp(0, samples.len() as isize)
                as usize;
            if end <= start {
                return INTENSITY_FLOOR_DB;
            }
            let ms = (cumsum[end] - cumsum[start]).max(0.0) / (end - start) as f64;
            power_db(ms)
        })
        .collect()
}

pub(crate) fn power_db(power: f64) -> f64 {
    if power > 0.0 {
        (10.0 * power.log10()).max(INTENSITY_FLOOR_DB)
    } else {
        INTENSITY_FLOOR_DB
    }
}
