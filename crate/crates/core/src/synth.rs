//! Seeded synthetic EEG: SSVEP harmonics over a white + 1/f background, and
//! labeled satisfaction data for the decoder.
//!
//! Every generator is a pure function of its spec and seed.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::eeg::{EegWindow, MONTAGE_62, OCCIPITAL_CHANNELS};
use crate::error::{domain, Result};
use crate::features::{de_features, BandSet, FEATURE_DIM};
use crate::gbdt::{LabeledFeatureSet, LabeledRow};
use crate::stimulus::FlickerTag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Informational; the tag passed to [`synth_ssvep`] drives the signal.
    pub target: Option<usize>,
    pub duration: f64,
    pub sampling_rate: f64,
    pub n_channels: usize,
    pub n_harmonics: usize,
    pub harmonic_amplitudes: Vec<f64>,
    /// Ratio of signal to noise power in dB. `+inf` disables noise.
    pub snr_db: f64,
    /// Fraction of noise power that is white; the rest is 1/f.
    pub noise_mix: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::new(None, 1.0, 250.0, 9, 5)
    }
}

impl SynthSpec {
    /// Spec with `1/n` harmonic decay, no noise and seed 0.
    pub fn new(
        target: Option<usize>,
        duration: f64,
        sampling_rate: f64,
        n_channels: usize,
        n_harmonics: usize,
    ) -> Self {
        Self {
            target,
            duration,
            sampling_rate,
            n_channels,
            n_harmonics,
            harmonic_amplitudes: (1..=n_harmonics).map(|n| 1.0 / n as f64).collect(),
            snr_db: f64::INFINITY,
            noise_mix: 0.5,
            seed: 0,
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_samples(&self) -> usize {
        (self.duration * self.sampling_rate).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(domain(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.sampling_rate > 0.0) {
            return Err(domain("sampling rate must be positive"));
        }
        if self.n_samples() == 0 {
            return Err(domain("duration shorter than one sample"));
        }
        if self.n_channels == 0 {
            return Err(domain("need at least one channel"));
        }
        if self.n_harmonics == 0 {
            return Err(domain("need at least one harmonic"));
        }
        if self.harmonic_amplitudes.len() != self.n_harmonics {
            return Err(domain(format!(
                "{} harmonic amplitudes for {} harmonics",
                self.harmonic_amplitudes.len(),
                self.n_harmonics
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_mix) {
            return Err(domain("noise_mix must lie in [0, 1]"));
        }
        if self.snr_db.is_nan() {
            return Err(domain("snr_db is NaN"));
        }
        Ok(())
    }
}

/// Default channel labels for a channel count.
pub fn channel_labels(n_channels: usize) -> Vec<String> {
    match n_channels {
        9 => OCCIPITAL_CHANNELS.iter().map(|s| s.to_string()).collect(),
        62 => MONTAGE_62.iter().map(|s| s.to_string()).collect(),
        n => (1..=n).map(|i| format!("ch{i}")).collect(),
    }
}

/// SSVEP gain per channel: strongest over the occipital set, weak elsewhere.
fn channel_gains(labels: &[String]) -> Vec<f64> {
    let occipital_hits = labels
        .iter()
        .filter(|l| OCCIPITAL_CHANNELS.iter().any(|o| o.eq_ignore_ascii_case(l)))
        .count();
    if occipital_hits == 0 {
        let n = labels.len().max(2) as f64 - 1.0;
        return (0..labels.len()).map(|i| 1.0 - 0.5 * i as f64 / n).collect();
    }
    labels
        .iter()
        .map(|l| {
            match OCCIPITAL_CHANNELS.iter().position(|o| o.eq_ignore_ascii_case(l)) {
                // O1/Oz/O2 sit at the end of the list and respond the most
                Some(i) => 0.6 + 0.4 * i as f64 / 8.0,
                None => 0.05,
            }
        })
        .collect()
}

fn mean_square(rows: &[Vec<f64>]) -> f64 {
    let n: usize = rows.iter().map(Vec::len).sum();
    rows.iter().flatten().map(|v| v * v).sum::<f64>() / n as f64
}

/// Zero-mean Gaussian noise with a 1/f power spectrum, unit mean-square.
pub(crate) fn pink_noise(rng: &mut ChaCha8Rng, n: usize, fft: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    fft.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, bin) in buf.iter_mut().enumerate().skip(1) {
        let freq_index = k.min(n - k) as f64;
        *bin /= freq_index.sqrt();
    }
    fft.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re / n as f64).collect();
    normalize_power(&mut out, 1.0);
    out
}

pub(crate) fn white_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    normalize_power(&mut out, 1.0);
    out
}

fn normalize_power(x: &mut [f64], target: f64) {
    let p = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    if p > 0.0 {
        let g = (target / p).sqrt();
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Background noise matrix with total mean-square `power`.
fn noise_matrix(spec: &SynthSpec, rng: &mut ChaCha8Rng, power: f64) -> Vec<Vec<f64>> {
    let n = spec.n_samples();
    let mut planner = FftPlanner::new();
    let (w_gain, p_gain) = (spec.noise_mix.sqrt(), (1.0 - spec.noise_mix).sqrt());
    let mut rows: Vec<Vec<f64>> = (0..spec.n_channels)
        .map(|_| {
            let white = white_noise(rng, n);
            let pink = if n > 1 { pink_noise(rng, n, &mut planner) } else { vec![0.0; n] };
            white
                .iter()
                .zip(&pink)
                .map(|(w, p)| w_gain * w + p_gain * p)
                .collect()
        })
        .collect();
    let realized = mean_square(&rows);
    if realized > 0.0 {
        let g = (power / realized).sqrt();
        rows.iter_mut().flatten().for_each(|v| *v *= g);
    }
    rows
}

/// Noise-free harmonic SSVEP component, one row per channel.
pub fn ssvep_signal(spec: &SynthSpec, tag: &FlickerTag) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let nyquist = spec.sampling_rate / 2.0;
    let top = spec.n_harmonics as f64 * tag.f;
    if top >= nyquist {
        return Err(domain(format!(
            "harmonic {} of {} Hz ({top} Hz) at or above Nyquist {nyquist} Hz",
            spec.n_harmonics, tag.f
        )));
    }
    let n = spec.n_samples();
    let base: Vec<f64> = (1..=n)
        .map(|i| {
            let t = i as f64 / spec.sampling_rate;
            spec.harmonic_amplitudes
                .iter()
                .enumerate()
                .map(|(h, a)| {
                    let order = (h + 1) as f64;
                    a * (TAU * order * tag.f * t + order * tag.phi).sin()
                })
                .sum()
        })
        .collect();
    let gains = channel_gains(&channel_labels(spec.n_channels));
    Ok(gains
        .iter()
        .map(|g| base.iter().map(|v| g * v).collect())
        .collect())
}

/// SSVEP response to `tag` plus background noise at `spec.snr_db`.
pub fn synth_ssvep(spec: &SynthSpec, tag: &FlickerTag) -> Result<EegWindow> {
    let signal = ssvep_signal(spec, tag)?;
    let samples = if spec.snr_db.is_infinite() && spec.snr_db > 0.0 {
        signal
    } else {
        let noise_power = mean_square(&signal) / 10f64.powf(spec.snr_db / 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = noise_matrix(spec, &mut rng, noise_power);
        signal
            .iter()
            .zip(&noise)
            .map(|(s, z)| s.iter().zip(z).map(|(a, b)| a + b).collect())
            .collect()
    };
    EegWindow::new(channel_labels(spec.n_channels), spec.sampling_rate, samples)
}

/// The noise component [`synth_ssvep`] adds for the same spec, on its own.
pub fn ssvep_noise(spec: &SynthSpec, tag: &FlickerTag) -> Result<Vec<Vec<f64>>> {
    let signal = ssvep_signal(spec, tag)?;
    let noise_power = mean_square(&signal) / 10f64.powf(spec.snr_db / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(noise_matrix(spec, &mut rng, noise_power))
}

/// Unit-power white + 1/f background with no stimulus response.
pub fn synth_background(spec: &SynthSpec) -> Result<EegWindow> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = noise_matrix(spec, &mut rng, 1.0);
    EegWindow::new(channel_labels(spec.n_channels), spec.sampling_rate, samples)
}

/// Gaussian class-conditional feature vectors with per-participant offsets.
///
/// Every tenth feature is informative: the two classes sit `separation`
/// standard deviations apart along it. Each participant shares a random
/// offset across both classes.
pub fn synth_satisfaction_dataset(
    n_participants: usize,
    n_trials: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledFeatureSet> {
    if !(separation >= 0.0) {
        return Err(domain(format!("separation must be non-negative, got {separation}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_participants * n_trials);
    for p in 0..n_participants {
        let offset: Vec<f64> = (0..FEATURE_DIM)
            .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for trial in 0..n_trials {
            let label = (trial % 2) as u8;
            let shift = if label == 1 { 0.5 * separation } else { -0.5 * separation };
            let values = (0..FEATURE_DIM)
                .map(|j| {
                    let noise: f64 = rng.sample(StandardNormal);
                    let mean = if j % 10 == 0 { shift } else { 0.0 };
                    offset[j] + mean + noise
                })
                .collect();
            rows.push(LabeledRow {
                participant: format!("p{:02}", p + 1),
                label,
                values,
            });
        }
    }
    Ok(LabeledFeatureSet::new(rows))
}

/// 62-channel background whose posterior alpha rhythm depends on the
/// satisfaction state; the closed-loop stand-in for landing-page EEG.
pub fn synth_satisfaction_eeg(satisfied: bool, duration: f64, sampling_rate: f64, seed: u64) -> Result<EegWindow> {
    let spec = SynthSpec::new(None, duration, sampling_rate, 62, 1).with_seed(seed);
    let mut window = synth_background(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a71_5fac);
    let amplitude = if satisfied { 1.5 } else { 0.4 };
    let phase = rng.random::<f64>() * TAU;
    let gains = channel_gains(&window.channel_labels);
    for (row, g) in window.samples.iter_mut().zip(gains) {
        for (i, v) in row.iter_mut().enumerate() {
            let t = (i + 1) as f64 / sampling_rate;
            *v += g * amplitude * (TAU * 10.0 * t + phase).sin();
        }
    }
    Ok(window)
}

/// Labeled DE features from [`synth_satisfaction_eeg`] windows, balanced.
pub fn synth_satisfaction_eeg_dataset(n_windows: usize, sampling_rate: f64, seed: u64) -> Result<LabeledFeatureSet> {
    let bands = BandSet::default();
    let rows = (0..n_windows)
        .map(|i| {
            let label = (i % 2) as u8;
            let w = synth_satisfaction_eeg(label == 1, 1.0, sampling_rate, seed.wrapping_add(i as u64))?;
            Ok(LabeledRow {
                participant: "synthetic".to_string(),
                label,
                values: de_features(&w, &bands)?.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledFeatureSet::new(rows))
}
