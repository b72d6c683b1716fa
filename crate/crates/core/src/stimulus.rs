//! Joint frequency-phase flicker coding for the 33-key speller.
//!
//! Target `k` (1-based) flickers at `f0 + (k-1)·Δf` with phase
//! `φ0 + (k-1)·Δφ`. Each display frame `i` gets the grayscale value
//! `½(1 + sin(2π f i / refresh + φ))`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Lowest and highest stimulation frequency that evokes a retinal response.
pub const RETINAL_RANGE_HZ: (f64, f64) = (3.5, 75.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusConfig {
    pub refresh_rate: f64,
    pub f0: f64,
    pub phi0: f64,
    pub delta_f: f64,
    pub delta_phi: f64,
    pub n_targets: usize,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self {
            refresh_rate: 60.0,
            f0: 8.0,
            phi0: 0.0,
            delta_f: 0.24,
            delta_phi: 0.5 * PI,
            n_targets: 33,
        }
    }
}

impl StimulusConfig {
    /// Checks that every target frequency lies in the retinal response range.
    pub fn validate(&self) -> Result<()> {
        if self.n_targets == 0 {
            return Err(domain("n_targets must be positive"));
        }
        let (lo, hi) = RETINAL_RANGE_HZ;
        let top = self.f0 + (self.n_targets - 1) as f64 * self.delta_f;
        if self.f0 < lo || top > hi || self.delta_f <= 0.0 {
            return Err(Error::Config(format!(
                "target frequencies {:.2}..{:.2} Hz outside [{lo}, {hi}] Hz",
                self.f0, top
            )));
        }
        Ok(())
    }

    /// All target frequencies in index order.
    pub fn frequencies(&self) -> Vec<f64> {
        (1..=self.n_targets)
            .map(|k| self.f0 + (k - 1) as f64 * self.delta_f)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlickerTag {
    pub f: f64,
    /// Phase in `[0, 2π)`.
    pub phi: f64,
}

impl FlickerTag {
    pub fn new(f: f64, phi: f64) -> Result<Self> {
        if !(f > 0.0) || !f.is_finite() {
            return Err(domain(format!("flicker frequency must be positive, got {f}")));
        }
        Ok(Self {
            f,
            phi: wrap_phase(phi),
        })
    }
}

pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let wrapped = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

pub fn tag_for_target(k: usize, cfg: &StimulusConfig) -> Result<FlickerTag> {
    if k == 0 || k > cfg.n_targets {
        return Err(domain(format!(
            "target index {k} outside 1..={}",
            cfg.n_targets
        )));
    }
    let step = (k - 1) as f64;
    FlickerTag::new(cfg.f0 + step * cfg.delta_f, cfg.phi0 + step * cfg.delta_phi)
}

/// Grayscale value of `tag` at frame `frame`, in `[0, 1]`.
pub fn luminance(tag: &FlickerTag, frame: u64, refresh_rate: f64) -> Result<f64> {
    if !(refresh_rate > 2.0 * tag.f) {
        return Err(Error::Config(format!(
            "refresh rate {refresh_rate} fps cannot render {} Hz without aliasing",
            tag.f
        )));
    }
    let t = frame as f64 / refresh_rate;
    let value = 0.5 * (1.0 + (TAU * tag.f * t + tag.phi).sin());
    Ok(value.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum KeyLabel {
    /// Candidate selection digit, 1..=5.
    Digit(u8),
    /// Uppercase ASCII letter.
    Letter(char),
    Delete,
    Search,
}

impl fmt::Display for KeyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyLabel::Digit(d) => write!(f, "{d}"),
            KeyLabel::Letter(c) => write!(f, "{c}"),
            KeyLabel::Delete => f.write_str("DELETE"),
            KeyLabel::Search => f.write_str("SEARCH"),
        }
    }
}

impl std::str::FromStr for KeyLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DELETE" => Ok(KeyLabel::Delete),
            "SEARCH" => Ok(KeyLabel::Search),
            other => {
                let mut chars = other.chars();
                match (chars.next(), chars.next()) {
                    (Some(c @ '1'..='5'), None) => Ok(KeyLabel::Digit(c as u8 - b'0')),
                    (Some(c @ 'A'..='Z'), None) => Ok(KeyLabel::Letter(c)),
                    _ => Err(domain(format!("unknown key label {s:?}"))),
                }
            }
        }
    }
}

impl From<KeyLabel> for String {
    fn from(label: KeyLabel) -> Self {
        label.to_string()
    }
}

impl TryFrom<String> for KeyLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyTarget {
    pub k: usize,
    pub label: KeyLabel,
    pub row: usize,
    pub col: usize,
}

/// Row-major key order: digits, three QWERTY rows, then the function keys.
pub const KEY_ROWS: [&[&str]; 5] = [
    &["1", "2", "3", "4", "5"],
    &["Q", "W", "E", "R", "T", "Y", "U", "I", "O", "P"],
    &["A", "S", "D", "F", "G", "H", "J", "K", "L"],
    &["Z", "X", "C", "V", "B", "N", "M"],
    &["DELETE", "SEARCH"],
];

pub fn keyboard_layout(cfg: &StimulusConfig) -> Result<Vec<(KeyTarget, FlickerTag)>> {
    let mut out = Vec::with_capacity(33);
    let mut k = 0;
    for (row, keys) in KEY_ROWS.iter().enumerate() {
        for (col, name) in keys.iter().enumerate() {
            k += 1;
            let target = KeyTarget {
                k,
                label: name.parse()?,
                row: row + 1,
                col: col + 1,
            };
            out.push((target, tag_for_target(k, cfg)?));
        }
    }
    Ok(out)
}

/// Target index of a key label in the fixed layout.
pub fn target_index(label: KeyLabel) -> usize {
    let name = label.to_string();
    KEY_ROWS
        .iter()
        .flat_map(|row| row.iter())
        .position(|n| *n == name)
        .map(|p| p + 1)
        .expect("every KeyLabel variant constructible by FromStr is in the layout")
}

pub fn label_for_index(k: usize) -> Option<KeyLabel> {
    KEY_ROWS
        .iter()
        .flat_map(|row| row.iter())
        .nth(k.checked_sub(1)?)
        .and_then(|n| n.parse().ok())
}

/// Tab-separated layout table with a header row.
pub fn layout_tsv(cfg: &StimulusConfig) -> Result<String> {
    let mut out = String::from("key\tk\trow\tcol\tf\tphi\n");
    for (key, tag) in keyboard_layout(cfg)? {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.2}\t{:.6}\n",
            key.label, key.k, key.row, key.col, tag.f, tag.phi
        ));
    }
    Ok(out)
}
