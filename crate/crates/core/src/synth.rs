//! Deterministic synthetic audio and annotation fixtures.
//!
//! The waveform generators (tones, noise, pulse trains, per-band tone
//! complexes) back the unit tests. [`write_corpus`] builds a small dialog
//! corpus whose reduction labels drive the acoustics through a planted
//! linear relation, so that trained models have a known best-case
//! correlation with the labels.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::annotations::{FunctionTag, ReductionRegion};
use crate::base_signals::band_centers;
use crate::error::{Error, Result};
use crate::signal_io::{write_wav_pcm16, Channel};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn n_samples(secs: f64, sample_rate: u32) -> usize {
    (secs * sample_rate as f64).round() as usize
}

pub fn sine(freq: f64, amp: f64, secs: f64, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    (0..n_samples(secs, sample_rate))
        .map(|i| amp * (2.0 * PI * freq * i as f64 / sr).sin())
        .collect()
}

/// Gaussian white noise with standard deviation `sd`, clipped to `[-1, 1]`.
pub fn white_noise(sd: f64, secs: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 1);
    let normal = Normal::new(0.0, sd).expect("finite sd");
    (0..n_samples(secs, sample_rate))
        .map(|_| normal.sample(&mut rng).clamp(-1.0, 1.0))
        .collect()
}

/// Steady harmonic complex: `harmonics` partials of `f0` with 1/h
/// amplitudes and seeded random phases, scaled so the peak cannot
/// exceed `amp`.
pub fn harmonic_complex(
    f0: f64,
    amp: f64,
    secs: f64,
    sample_rate: u32,
    harmonics: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = rng_for(seed, 2);
    let sr = sample_rate as f64;
    let parts: Vec<(f64, f64, f64)> = (1..=harmonics)
        .map(|h| h as f64)
        .filter(|h| h * f0 < 0.45 * sr)
        .map(|h| (h * f0, 1.0 / h, rng.random::<f64>() * 2.0 * PI))
        .collect();
    let norm: f64 = parts.iter().map(|p| p.1).sum();
    (0..n_samples(secs, sample_rate))
        .map(|i| {
            let t = i as f64 / sr;
            parts
                .iter()
                .map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                .sum::<f64>()
                * amp
                / norm
        })
        .collect()
}

/// Alternating tone and digital silence, starting with the tone.
pub fn duty_cycle(
    freq: f64,
    amp: f64,
    on_secs: f64,
    off_secs: f64,
    cycles: usize,
    sample_rate: u32,
) -> Vec<f64> {
    let on = sine(freq, amp, on_secs, sample_rate);
    let off = vec![0.0; n_samples(off_secs, sample_rate)];
    let mut out = Vec::new();
    for _ in 0..cycles {
        out.extend_from_slice(&on);
        out.extend_from_slice(&off);
    }
    out
}

/// Train of 1 ms raised-cosine pulses whose spacing cycles through
/// `periods` (seconds).
pub fn pulse_train(periods: &[f64], amp: f64, secs: f64, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let n = n_samples(secs, sample_rate);
    let width = ((0.001 * sr).round() as usize).max(3);
    let mut out = vec![0.0; n];
    let mut t = 0.0;
    let mut k = 0;
    loop {
        let start = (t * sr).round() as usize;
        if start >= n {
            break;
        }
        for j in 0..width {
            if start + j < n {
                out[start + j] += amp * 0.5 * (1.0 - (2.0 * PI * j as f64 / width as f64).cos());
            }
        }
        t += periods[k % periods.len()];
        k += 1;
    }
    out
}

/// One sinusoid at every 1/3-octave band center, with levels falling
/// (or rising) by `slope_db_per_octave`. Amplitudes are scaled so the
/// peak stays below 0.9.
pub fn band_tones(slope_db_per_octave: f64, secs: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 3);
    let sr = sample_rate as f64;
    let centers = band_centers(sample_rate);
    let parts: Vec<(f64, f64, f64)> = centers
        .iter()
        .enumerate()
        .map(|(k, &fc)| {
            let level = slope_db_per_octave * k as f64 / 3.0;
            (fc, 10f64.powf(level / 20.0), rng.random::<f64>() * 2.0 * PI)
        })
        .collect();
    let scale = 0.9 / parts.iter().map(|p| p.1).sum::<f64>();
    (0..n_samples(secs, sample_rate))
        .map(|i| {
            let t = i as f64 / sr;
            parts
                .iter()
                .map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                .sum::<f64>()
                * scale
        })
        .collect()
}

/// Consecutive [`band_tones`] segments, one per slope.
pub fn tilt_segments(slopes: &[f64], seg_secs: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    slopes
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| band_tones(s, seg_secs, sample_rate, seed.wrapping_add(i as u64)))
        .collect()
}

/// Pitch shift per unit of the latent reduction parameter.
pub const SEMITONES_PER_UNIT: f64 = 2.0;
/// Level change per unit of the latent reduction parameter.
pub const DB_PER_UNIT: f64 = 2.0;
/// Sound level of a speech region at the mid latent value.
pub const REFERENCE_LEVEL_DB: f64 = -20.0;
/// Standard deviation of the labels (uniform over 0..=3).
pub const LABEL_SD: f64 = 1.118_033_988_749_895;
/// Signal-to-noise standard-deviation ratio of the planted relation.
pub const SIGNAL_NOISE_RATIO: f64 = 2.0;

/// Correlation between a perfect reader of the latent parameter and the
/// labels: `sd_s / sqrt(sd_s^2 + sd_n^2)` with `sd_s / sd_n = 2`.
pub fn expected_correlation() -> f64 {
    SIGNAL_NOISE_RATIO / (SIGNAL_NOISE_RATIO * SIGNAL_NOISE_RATIO + 1.0).sqrt()
}

/// A speech region planned for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRegion {
    pub start_ms: u64,
    pub end_ms: u64,
    pub level: u8,
    /// Level plus Gaussian noise; this drives pitch and loudness.
    pub latent: f64,
}

/// Lays out alternating speech regions (0.8-2.0 s) and pauses (0.2-0.6 s).
pub fn plan_channel(secs: f64, seed: u64, stream: u64) -> Vec<PlannedRegion> {
    let mut rng = rng_for(seed, stream);
    let noise = Normal::new(0.0, LABEL_SD / SIGNAL_NOISE_RATIO).expect("finite sd");
    let total_ms = (secs * 1000.0) as u64;
    let mut t = rng.random_range(200..600u64);
    let mut out = Vec::new();
    loop {
        let len = rng.random_range(800..2000u64);
        if t + len + 100 > total_ms {
            break;
        }
        let level = rng.random_range(0..4u8);
        out.push(PlannedRegion {
            start_ms: t,
            end_ms: t + len,
            level,
            latent: level as f64 + noise.sample(&mut rng),
        });
        t += len + rng.random_range(200..600u64);
    }
    out
}

/// Renders planned regions as harmonic vowel-like sound over a quiet
/// noise floor (-70 dB).
pub fn render_channel(
    plan: &[PlannedRegion],
    secs: f64,
    f0_base: f64,
    sample_rate: u32,
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let sr = sample_rate as f64;
    let mut rng = rng_for(seed, stream);
    let floor = Normal::new(0.0, 10f64.powf(-70.0 / 20.0)).expect("finite sd");
    let mut out: Vec<f64> = (0..n_samples(secs, sample_rate))
        .map(|_| floor.sample(&mut rng))
        .collect();
    let ramp = 0.02 * sr;
    for region in plan {
        let centered = region.latent - 1.5;
        let f0 = f0_base * 2f64.powf(centered * SEMITONES_PER_UNIT / 12.0);
        let amp = 10f64.powf((REFERENCE_LEVEL_DB + centered * DB_PER_UNIT) / 20.0) * 2f64.sqrt();
        let harmonics = ((0.45 * sr / f0).floor() as usize).min(20);
        let phases: Vec<f64> = (0..harmonics).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        let gains: Vec<f64> = (1..=harmonics).map(|h| 1.0 / h as f64).collect();
        let norm = gains.iter().map(|g| g * g).sum::<f64>().sqrt();
        let start = (region.start_ms as f64 * sr / 1000.0) as usize;
        let end = ((region.end_ms as f64 * sr / 1000.0) as usize).min(out.len());
        let len = (end - start) as f64;
        let mut phase = 0.0;
        for (j, i) in (start..end).enumerate() {
            let pos = j as f64 / len;
            // one semitone of declination across the region
            let f = f0 * 2f64.powf((0.5 - pos) / 12.0);
            phase += 2.0 * PI * f / sr;
            let env = (j as f64 / ramp).min((len - j as f64) / ramp).min(1.0);
            let v: f64 = gains
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(h, (g, ph))| g * ((h + 1) as f64 * phase + ph).sin())
                .sum();
            out[i] += amp * env * v / norm;
        }
    }
    out.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    out
}

/// Test signal for speech/silence decisions and pitch: a channel of
/// random-level vowel-like regions.
pub fn speechlike_channel(sample_rate: u32, secs: f64, f0_base: f64, seed: u64) -> Vec<f64> {
    let plan = plan_channel(secs, seed, 10);
    render_channel(&plan, secs, f0_base, sample_rate, seed, 11)
}

/// Layout of a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub sample_rate: u32,
    /// Conversation ids and durations in seconds.
    pub conversations: Vec<(String, f64)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            sample_rate: 16000,
            conversations: vec![
                ("SYN_001".into(), 180.0),
                ("SYN_002".into(), 150.0),
                ("SYN_003".into(), 150.0),
                ("SYN_004".into(), 120.0),
            ],
        }
    }
}

/// Paths and facts about a written corpus.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub truth: PathBuf,
    /// Conversation that should be held out for evaluation (the last one).
    pub holdout: String,
    pub total_secs: f64,
}

const SPEAKER_F0: [f64; 2] = [120.0, 200.0];
/// Probability that a speech region also receives a pragmatic-function tag.
const FUNCTION_RATE: f64 = 0.35;
/// Slopes of the tilt fixture segments, dB per octave.
pub const FIXTURE_TILT_SLOPES: [f64; 5] = [-12.0, -6.0, -3.0, 0.0, 3.0];
pub const FIXTURE_TILT_SEGMENT_SECS: f64 = 1.0;

/// Writes the corpus under `root`: `audio/`, `labels/` (first
/// annotator), `labels_b/` (second annotator, same segmentation),
/// `functions/`, `fixtures/`, `manifest.csv` and the `truth.txt`
/// sidecar of generator parameters.
pub fn write_corpus(root: &Path, cfg: &SynthConfig) -> Result<SynthCorpus> {
    for dir in ["audio", "labels", "labels_b", "functions", "fixtures"] {
        fs::create_dir_all(root.join(dir)).map_err(|e| Error::io(root.join(dir), e))?;
    }
    let sr = cfg.sample_rate;

    let results: Vec<Result<()>> = cfg
        .conversations
        .par_iter()
        .enumerate()
        .map(|(ci, (id, secs))| {
            let mut regions = Vec::new();
            let mut rendered = Vec::new();
            for ch in Channel::BOTH {
                let stream = 100 + 10 * ci as u64 + ch.index() as u64 * 2;
                let plan = plan_channel(*secs, cfg.seed, stream);
                rendered.push(render_channel(
                    &plan,
                    *secs,
                    SPEAKER_F0[ch.index()],
                    sr,
                    cfg.seed,
                    stream + 1,
                ));
                regions.push((ch, plan));
            }
            write_wav_pcm16(root.join(format!("audio/{id}.wav")), sr, &rendered[0], &rendered[1])?;
            write_conversation_labels(root, id, &regions, cfg.seed, ci as u64)
        })
        .collect();
    results.into_iter().collect::<Result<()>>()?;

    write_fixtures(&root.join("fixtures"), sr, cfg.seed)?;

    let manifest = root.join("manifest.csv");
    let mut m = String::from("conversation_id,wav_path,annotated_start_ms,annotated_end_ms\n");
    for (id, secs) in &cfg.conversations {
        m.push_str(&format!("{id},audio/{id}.wav,0,{}\n", (secs * 1000.0) as u64));
    }
    write_text(&manifest, &m)?;

    let holdout = cfg
        .conversations
        .last()
        .map(|c| c.0.clone())
        .ok_or_else(|| Error::InvalidArgument("corpus needs at least one conversation".into()))?;
    let truth = root.join("truth.txt");
    let mut t = String::new();
    t.push_str(&format!("seed={}\nsample_rate={}\n", cfg.seed, sr));
    t.push_str("label_distribution=uniform:0,1,2,3\n");
    t.push_str(&format!("label_sd={LABEL_SD}\n"));
    t.push_str(&format!("latent_noise_sd={}\n", LABEL_SD / SIGNAL_NOISE_RATIO));
    t.push_str(&format!("signal_noise_sd_ratio={SIGNAL_NOISE_RATIO}\n"));
    t.push_str(&format!("expected_correlation={}\n", expected_correlation()));
    t.push_str("latent_center=1.5\n");
    t.push_str(&format!("weight_pitch_semitones_per_unit={SEMITONES_PER_UNIT}\n"));
    t.push_str(&format!("weight_level_db_per_unit={DB_PER_UNIT}\n"));
    t.push_str(&format!("reference_level_db={REFERENCE_LEVEL_DB}\n"));
    t.push_str(&format!(
        "speaker_f0_hz=left:{},right:{}\n",
        SPEAKER_F0[0], SPEAKER_F0[1]
    ));
    t.push_str(&format!("holdout={holdout}\n"));
    t.push_str("fixture_tilt_file=fixtures/tilt_segments.wav\n");
    t.push_str(&format!(
        "fixture_tilt_slopes={}\n",
        FIXTURE_TILT_SLOPES.map(|s| s.to_string()).join(",")
    ));
    t.push_str(&format!("fixture_tilt_segment_secs={FIXTURE_TILT_SEGMENT_SECS}\n"));
    write_text(&truth, &t)?;

    Ok(SynthCorpus {
        root: root.to_path_buf(),
        manifest,
        truth,
        holdout,
        total_secs: cfg.conversations.iter().map(|c| c.1).sum(),
    })
}

fn write_conversation_labels(
    root: &Path,
    id: &str,
    regions: &[(Channel, Vec<PlannedRegion>)],
    seed: u64,
    ci: u64,
) -> Result<()> {
    let mut rng = rng_for(seed, 5000 + ci);
    let disagreement = Normal::new(0.0, 0.7).expect("finite sd");
    let mut a = String::from("channel,start_ms,end_ms,label\n");
    let mut b = a.clone();
    let mut funcs = String::from("channel,start_ms,end_ms,tag\n");
    for (ch, plan) in regions {
        for r in plan {
            let region = ReductionRegion {
                channel: *ch,
                start_ms: r.start_ms,
                end_ms: r.end_ms,
                level: r.level,
            };
            a.push_str(&format!("{},{},{},{}\n", ch, region.start_ms, region.end_ms, region.level));
            let lb = (r.level as f64 + disagreement.sample(&mut rng)).round().clamp(0.0, 3.0) as u8;
            b.push_str(&format!("{},{},{},{}\n", ch, r.start_ms, r.end_ms, lb));
            if rng.random::<f64>() < FUNCTION_RATE {
                // uncertainty markers are planted on reduced speech
                let tag = if r.level >= 2 && rng.random::<f64>() < 0.5 {
                    FunctionTag::UC
                } else {
                    FunctionTag::ALL[rng.random_range(0..FunctionTag::ALL.len())]
                };
                funcs.push_str(&format!("{},{},{},{}\n", ch, r.start_ms, r.end_ms, tag));
            }
        }
    }
    write_text(&root.join(format!("labels/{id}.csv")), &a)?;
    write_text(&root.join(format!("labels_b/{id}.csv")), &b)?;
    write_text(&root.join(format!("functions/{id}.csv")), &funcs)
}

fn write_fixtures(dir: &Path, sr: u32, seed: u64) -> Result<()> {
    let mono = |name: &str, x: Vec<f64>| write_wav_pcm16(dir.join(name), sr, &x, &x);
    mono("tone200.wav", sine(200.0, 0.5, 2.0, sr))?;
    mono("tone350.wav", sine(350.0, 0.5, 2.0, sr))?;
    mono("noise.wav", white_noise(0.25, 2.0, sr, seed))?;
    mono("creak_pulses.wav", pulse_train(&[0.008, 0.012], 0.6, 2.0, sr))?;
    mono("duty_cycle.wav", duty_cycle(220.0, 0.5, 1.0, 1.0, 4, sr))?;
    mono(
        "tilt_segments.wav",
        tilt_segments(&FIXTURE_TILT_SLOPES, FIXTURE_TILT_SEGMENT_SECS, sr, seed),
    )
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
