//! Multichannel EEG sample blocks and their on-disk/on-wire encodings.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, parse_err, Error, Result};

/// Parietal and occipital channels carrying the SSVEP response.
pub const OCCIPITAL_CHANNELS: [&str; 9] =
    ["PZ", "PO3", "PO5", "PO4", "PO6", "POZ", "O1", "OZ", "O2"];

/// 62-channel montage (64-channel cap minus the two mastoid references).
pub const MONTAGE_62: [&str; 62] = [
    "FP1", "FPZ", "FP2", "AF3", "AF4", "F7", "F5", "F3", "F1", "FZ", "F2", "F4", "F6", "F8", "FT7",
    "FC5", "FC3", "FC1", "FCZ", "FC2", "FC4", "FC6", "FT8", "T7", "C5", "C3", "C1", "CZ", "C2",
    "C4", "C6", "T8", "TP7", "CP5", "CP3", "CP1", "CPZ", "CP2", "CP4", "CP6", "TP8", "P7", "P5",
    "P3", "P1", "PZ", "P2", "P4", "P6", "P8", "PO7", "PO5", "PO3", "POZ", "PO4", "PO6", "PO8",
    "CB1", "O1", "OZ", "O2", "CB2",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegWindow {
    pub channel_labels: Vec<String>,
    pub sampling_rate: f64,
    /// One row per channel, all rows the same length.
    pub samples: Vec<Vec<f64>>,
}

impl EegWindow {
    pub fn new(channel_labels: Vec<String>, sampling_rate: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        let window = Self {
            channel_labels,
            sampling_rate,
            samples,
        };
        window.validate()?;
        Ok(window)
    }

    /// Window with generic labels `ch1..chN`.
    pub fn unlabeled(sampling_rate: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (1..=samples.len()).map(|i| format!("ch{i}")).collect();
        Self::new(labels, sampling_rate, samples)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate > 0.0) || !self.sampling_rate.is_finite() {
            return Err(domain(format!("sampling rate must be positive, got {}", self.sampling_rate)));
        }
        if self.samples.is_empty() {
            return Err(domain("window has no channels"));
        }
        if self.channel_labels.len() != self.samples.len() {
            return Err(domain(format!(
                "{} channel labels for {} channels",
                self.channel_labels.len(),
                self.samples.len()
            )));
        }
        let n = self.samples[0].len();
        if n == 0 {
            return Err(domain("window has no samples"));
        }
        if let Some(row) = self.samples.iter().position(|r| r.len() != n) {
            return Err(domain(format!(
                "channel {row} has {} samples, expected {n}",
                self.samples[row].len()
            )));
        }
        if self.samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(domain("window contains non-finite samples"));
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate
    }

    /// Selects channels by label (case-insensitive), in the requested order.
    pub fn select(&self, labels: &[&str]) -> Result<EegWindow> {
        let mut rows = Vec::with_capacity(labels.len());
        for want in labels {
            let idx = self
                .channel_labels
                .iter()
                .position(|l| l.eq_ignore_ascii_case(want))
                .ok_or_else(|| domain(format!("channel {want} not present")))?;
            rows.push(self.samples[idx].clone());
        }
        Ok(EegWindow {
            channel_labels: labels.iter().map(|l| l.to_string()).collect(),
            sampling_rate: self.sampling_rate,
            samples: rows,
        })
    }

    /// The nine occipital channels: selected by label when present, otherwise
    /// a 9-channel window is taken as already restricted.
    pub fn occipital(&self) -> Result<EegWindow> {
        match self.select(&OCCIPITAL_CHANNELS) {
            Ok(w) => Ok(w),
            Err(_) if self.n_channels() == OCCIPITAL_CHANNELS.len() => Ok(self.clone()),
            Err(e) => Err(e),
        }
    }

    /// Leading `n` samples of every channel.
    pub fn head(&self, n: usize) -> Result<EegWindow> {
        if n == 0 || n > self.n_samples() {
            return Err(domain(format!("cannot take {n} of {} samples", self.n_samples())));
        }
        Ok(EegWindow {
            channel_labels: self.channel_labels.clone(),
            sampling_rate: self.sampling_rate,
            samples: self.samples.iter().map(|r| r[..n].to_vec()).collect(),
        })
    }

    /// Flat binary encoding: a text header line `n_channels N_s F_s` followed
    /// by little-endian f32 samples, row-major.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.n_channels(), self.n_samples(), self.sampling_rate)?;
        let mut buf = Vec::with_capacity(self.n_channels() * self.n_samples() * 4);
        for v in self.samples.iter().flatten() {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut input: R) -> Result<EegWindow> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(1, format!("expected `n_channels N_s F_s`, got {header:?}")));
        }
        let n_channels: usize = fields[0].parse().map_err(|_| parse_err(1, "bad n_channels"))?;
        let n_samples: usize = fields[1].parse().map_err(|_| parse_err(1, "bad N_s"))?;
        let fs: f64 = fields[2].parse().map_err(|_| parse_err(1, "bad F_s"))?;
        let total = n_channels
            .checked_mul(n_samples)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| parse_err(1, "dimensions overflow"))?;
        let mut body = vec![0u8; total];
        input
            .read_exact(&mut body)
            .map_err(|e| parse_err(2, format!("truncated sample block: {e}")))?;
        let mut values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        let samples = (0..n_channels)
            .map(|_| values.by_ref().take(n_samples).collect())
            .collect();
        EegWindow::unlabeled(fs, samples)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<EegWindow> {
        Self::read_binary(bytes)
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        parse_err(err.line(), err.to_string())
    }
}
