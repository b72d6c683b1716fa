use serde::{Deserialize, Serialize};

use crate::cca::DEFAULT_HARMONICS;
use crate::error::{domain, Result};
use crate::serp::DEFAULT_SATISFACTION_THRESHOLD;
use crate::stimulus::StimulusConfig;
use crate::suggest::Strategy;

/// Runtime knobs shared by the decoders and the session state machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub sampling_rate: f64,
    pub refresh_rate: f64,
    pub n_harmonics: usize,
    /// Decode window for SSVEP recognition, seconds.
    pub window_s: f64,
    /// Longer window a client should send after a no-decision.
    pub retry_window_s: f64,
    /// Minimum best-minus-second correlation margin; `0` always decides.
    pub min_confidence: f64,
    pub satisfaction_threshold: f64,
    /// Satisfaction samples pooled before a landing page verdict is issued.
    pub landing_exam_windows: usize,
    pub strategy: Strategy,
    /// Results per SERP viewport (and number of click blocks).
    pub viewport: usize,
    /// Gaze-shift time added to each selection when computing ITR.
    pub gaze_shift_s: f64,
    /// A single decode slower than this is counted as a budget violation.
    pub violation_ms: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            sampling_rate: 250.0,
            refresh_rate: 60.0,
            n_harmonics: DEFAULT_HARMONICS,
            window_s: 1.0,
            retry_window_s: 1.5,
            min_confidence: 0.0,
            satisfaction_threshold: DEFAULT_SATISFACTION_THRESHOLD,
            landing_exam_windows: 2,
            strategy: Strategy::FirstLetter,
            viewport: 5,
            gaze_shift_s: 0.5,
            violation_ms: 1000.0,
        }
    }
}

impl SystemConfig {
    pub fn stimulus(&self) -> StimulusConfig {
        StimulusConfig {
            refresh_rate: self.refresh_rate,
            ..StimulusConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let stim = self.stimulus();
        stim.validate()?;
        if !(self.refresh_rate > 2.0 * stim.frequencies().last().copied().unwrap_or(0.0)) {
            return Err(domain(format!("refresh rate {} too low for the stimulus grid", self.refresh_rate)));
        }
        if !(self.window_s > 0.0 && self.retry_window_s > 0.0) {
            return Err(domain("decode windows must be positive"));
        }
        if self.landing_exam_windows == 0 || self.viewport == 0 || self.n_harmonics == 0 {
            return Err(domain("landing_exam_windows, viewport and n_harmonics must be positive"));
        }
        if !(0.0..=1.0).contains(&self.satisfaction_threshold) {
            return Err(domain("satisfaction threshold outside [0, 1]"));
        }
        if self.viewport + 2 > stim.n_targets {
            return Err(domain("not enough flicker tags for the SERP interaction blocks"));
        }
        Ok(())
    }
}
