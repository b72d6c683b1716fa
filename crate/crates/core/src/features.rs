//! Differential-entropy band features from STFT power spectra.

use std::f64::consts::{E, PI};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::eeg::EegWindow;
use crate::error::{domain, Result};

pub const N_FEATURE_CHANNELS: usize = 62;
pub const N_BANDS: usize = 5;
pub const FEATURE_DIM: usize = N_FEATURE_CHANNELS * N_BANDS;

/// Band power floor; keeps DE finite for silent bands.
pub const POWER_FLOOR: f64 = 1e-12;

pub const DEFAULT_FRAME_S: f64 = 0.5;
pub const DEFAULT_HOP_S: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// Frequency bands, each half-open `[lo, hi)`, in fixed delta→gamma order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    pub bands: Vec<Band>,
}

impl Default for BandSet {
    fn default() -> Self {
        let b = |name: &str, lo, hi| Band {
            name: name.to_string(),
            lo,
            hi,
        };
        Self {
            bands: vec![
                b("delta", 0.5, 4.0),
                b("theta", 4.0, 8.0),
                b("alpha", 8.0, 13.0),
                b("beta", 14.0, 30.0),
                b("gamma", 30.0, 50.0),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Channel-major: all bands of channel 1, then channel 2, ...
    pub values: Vec<f64>,
    pub channel_labels: Vec<String>,
}

/// One-sided averaged periodogram for every channel of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub bin_hz: f64,
    /// `[channel][bin]`, bins `0..=frame_len/2`.
    pub power: Vec<Vec<f64>>,
}

impl Psd {
    pub fn bin_freq(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    fn bins_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        let n_bins = self.power.first().map_or(0, Vec::len);
        (0..n_bins).filter(move |&b| {
            let f = self.bin_freq(b);
            f >= lo && f < hi
        })
    }

    /// Total power of `channel` in `[lo, hi)`.
    pub fn band_power(&self, channel: usize, lo: f64, hi: f64) -> f64 {
        self.bins_in(lo, hi).map(|b| self.power[channel][b]).sum()
    }

    /// Mean per-bin power of `channel` in `[lo, hi)`; zero for an empty band.
    pub fn band_mean(&self, channel: usize, lo: f64, hi: f64) -> f64 {
        let (sum, count) = self
            .bins_in(lo, hi)
            .fold((0.0, 0usize), |(s, c), b| (s + self.power[channel][b], c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    pub fn total_power(&self, channel: usize) -> f64 {
        self.power[channel].iter().sum()
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    // periodic Hann
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed STFT power averaged over frames.
///
/// Scaled so the one-sided spectrum sums to the mean-square of the
/// windowed frames: a unit-amplitude sinusoid totals 0.5.
pub fn stft_psd(window: &EegWindow, frame_s: f64, hop_s: f64) -> Result<Psd> {
    window.validate()?;
    let fs = window.sampling_rate;
    if fs < 100.0 {
        return Err(domain(format!("sampling rate {fs} Hz too low for the gamma band")));
    }
    let frame = (frame_s * fs).round() as usize;
    let hop = ((hop_s * fs).round() as usize).max(1);
    if frame < 2 {
        return Err(domain("STFT frame shorter than two samples"));
    }
    let n = window.n_samples();
    if n < frame {
        return Err(domain(format!(
            "window of {n} samples shorter than one {frame}-sample frame"
        )));
    }
    let taper = hann(frame);
    let taper_energy: f64 = taper.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame);
    let n_frames = (n - frame) / hop + 1;
    let half = frame / 2;
    let scale = 1.0 / (frame as f64 * taper_energy * n_frames as f64);

    let mut buf = vec![Complex::new(0.0, 0.0); frame];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let power = window
        .samples
        .iter()
        .map(|row| {
            let mut acc = vec![0.0; half + 1];
            for start in (0..n_frames).map(|i| i * hop) {
                for (slot, (x, w)) in buf.iter_mut().zip(row[start..start + frame].iter().zip(&taper)) {
                    *slot = Complex::new(x * w, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (k, a) in acc.iter_mut().enumerate() {
                    let two_sided = buf[k].norm_sqr() * scale;
                    let mirrored = k != 0 && !(frame % 2 == 0 && k == half);
                    *a += if mirrored { 2.0 * two_sided } else { two_sided };
                }
            }
            acc
        })
        .collect();
    Ok(Psd {
        bin_hz: fs / frame as f64,
        power,
    })
}

/// ½·ln(2πe·P) with `P` floored at [`POWER_FLOOR`].
pub fn differential_entropy(power: f64) -> f64 {
    0.5 * (2.0 * PI * E * power.max(POWER_FLOOR)).ln()
}

/// 310 DE values (62 channels × 5 bands) for a 62-channel window of ≥ 1 s.
pub fn de_features(window: &EegWindow, bands: &BandSet) -> Result<FeatureVector> {
    if window.n_channels() != N_FEATURE_CHANNELS {
        return Err(domain(format!(
            "expected {N_FEATURE_CHANNELS} channels, got {}",
            window.n_channels()
        )));
    }
    if window.duration_s() + 1e-9 < 1.0 {
        return Err(domain(format!(
            "window of {:.3} s shorter than 1 s",
            window.duration_s()
        )));
    }
    let psd = stft_psd(window, DEFAULT_FRAME_S, DEFAULT_HOP_S)?;
    let values = (0..window.n_channels())
        .flat_map(|c| {
            let psd = &psd;
            bands
                .bands
                .iter()
                .map(move |b| differential_entropy(psd.band_mean(c, b.lo, b.hi)))
        })
        .collect();
    Ok(FeatureVector {
        values,
        channel_labels: window.channel_labels.clone(),
    })
}
