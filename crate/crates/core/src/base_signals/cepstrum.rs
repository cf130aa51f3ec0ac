use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::intensity::INTENSITY_FLOOR_DB;
use crate::signal_io::{FrameClock, ANALYSIS_WINDOW_MS};
use crate::util::{euclidean, hamming};

/// Cepstral coefficients kept per frame (c1..c12; c0 is loudness and is
/// dropped).
pub const CEPSTRUM_ORDER: usize = 12;

pub type Cepstrum = [f64; CEPSTRUM_ORDER];

/// Real cepstrum c1..c12 of the 25 ms Hamming-windowed frame. The log
/// magnitude spectrum is floored at -96 dB re a full-scale sinusoid.
pub fn track_cepstrum(samples: &[f64], sample_rate: u32) -> Vec<Cepstrum> {
    let clock = FrameClock::new(sample_rate, samples.len());
    let len = clock.window_len(ANALYSIS_WINDOW_MS);
    let size = len.next_power_of_two();
    let window = hamming(len);
    let gain = 2.0 / window.iter().sum::<f64>();
    let floor = 10f64.powf(INTENSITY_FLOOR_DB / 20.0);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);
    let mut buf = vec![Complex::default(); size];
    let mut scratch =
        vec![Complex::default(); fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len())];

    (0..clock.frame_count)
        .map(|f| {
            let start = clock.window_start(f, len);
            for (i, c) in buf.iter_mut().enumerate() {
                let idx = start + i as isize;
                let x = if i < len && idx >= 0 && (idx as usize) < samples.len() {
                    samples[idx as usize] * window[i]
                } else {
                    0.0
                };
                *c = Complex::new(x, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for c in buf.iter_mut() {
                *c = Complex::new((c.norm() * gain).max(floor).ln(), 0.0);
            }
            ifft.process_with_scratch(&mut buf, &mut scratch);
            let mut out = [0.0; CEPSTRUM_ORDER];
            for (k, o) in out.iter_mut().enumerate() {
                *o = buf[k + 1].re / size as f64;
            }
            out
        })
        .collect()
}

/// Cepstral flux: distance of each frame's cepstrum to the previous
/// frame's. Frame 0 has no predecessor.
pub fn cepstral_flux(cepstra: &[Cepstrum]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(cepstra.len());
    if !cepstra.is_empty() {
        out.push(None);
    }
    out.extend(cepstra.windows(2).map(|w| Some(euclidean(&w[1], &w[0]))));
    out
}
