use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eeg::EegWindow;
use crate::error::{domain, Result};
use crate::features::{de_features, BandSet};
use crate::gbdt::SatisfactionModel;

/// Information transfer rate in bits/minute for an `n_targets`-way selection
/// made with accuracy `p` every `seconds_per_selection` seconds.
pub fn itr(n_targets: usize, accuracy: f64, seconds_per_selection: f64) -> Result<f64> {
    if n_targets < 2 {
        return Err(domain("ITR needs at least two targets"));
    }
    if !(seconds_per_selection > 0.0) {
        return Err(domain("selection time must be positive"));
    }
    let n = n_targets as f64;
    let chance = 1.0 / n;
    if !(accuracy <= 1.0) || accuracy < chance - 1e-12 {
        return Err(domain(format!("accuracy {accuracy} outside [1/{n_targets}, 1]")));
    }
    let p = accuracy.max(chance);
    let mut bits = n.log2();
    if p < 1.0 {
        bits += p * p.log2() + (1.0 - p) * ((1.0 - p) / (n - 1.0)).log2();
    }
    Ok((60.0 / seconds_per_selection) * bits.max(0.0))
}

/// Wall time of DE extraction plus satisfaction prediction for one window.
pub fn decode_latency_budget_check(window: &EegWindow, model: &SatisfactionModel) -> Result<f64> {
    let bands = BandSet::default();
    let start = Instant::now();
    let features = de_features(window, &bands)?;
    let p = model.predict(&features.values)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    std::hint::black_box(p);
    Ok(elapsed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub n: usize,
    pub mean_ms: f64,
    pub max_ms: f64,
    pub violations: usize,
}

impl LatencyReport {
    pub fn from_samples(samples: &[f64], violation_ms: f64) -> Self {
        let n = samples.len();
        Self {
            n,
            mean_ms: if n == 0 { 0.0 } else { samples.iter().sum::<f64>() / n as f64 },
            max_ms: samples.iter().copied().fold(0.0, f64::max),
            violations: samples.iter().filter(|s| **s > violation_ms).count(),
        }
    }
}

/// Counters shared by concurrent sessions.
#[derive(Debug, Default)]
pub struct Metrics {
    decodes: AtomicU64,
    no_decisions: AtomicU64,
    errors: AtomicU64,
    total_decode_us: AtomicU64,
    max_decode_us: AtomicU64,
    budget_violations: AtomicU64,
    labeled: AtomicU64,
    correct: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub decodes: u64,
    pub no_decisions: u64,
    pub errors: u64,
    pub mean_decode_ms: f64,
    pub max_decode_ms: f64,
    pub budget_violations: u64,
    pub labeled: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
}

impl Metrics {
    pub fn record_decode(&self, elapsed_ms: f64, violation_ms: f64) {
        let us = (elapsed_ms * 1e3).round() as u64;
        self.decodes.fetch_add(1, Ordering::Relaxed);
        self.total_decode_us.fetch_add(us, Ordering::Relaxed);
        self.max_decode_us.fetch_max(us, Ordering::Relaxed);
        if elapsed_ms > violation_ms {
            self.budget_violations.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn record_no_decision(&self) {
        self.no_decisions.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_error(&self) {
        self.errors.fetch_add(1, Ordering::Relaxed);
    }

    /// Ground truth supplied with a simulated window.
    pub fn record_labeled(&self, correct: bool) {
        self.labeled.fetch_add(1, Ordering::Relaxed);
        if correct {
            self.correct.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        let decodes = self.decodes.load(Ordering::Relaxed);
        let labeled = self.labeled.load(Ordering::Relaxed);
        let correct = self.correct.load(Ordering::Relaxed);
        MetricsSnapshot {
            decodes,
            no_decisions: self.no_decisions.load(Ordering::Relaxed),
            errors: self.errors.load(Ordering::Relaxed),
            mean_decode_ms: if decodes == 0 {
                0.0
            } else {
                self.total_decode_us.load(Ordering::Relaxed) as f64 / 1e3 / decodes as f64
            },
            max_decode_ms: self.max_decode_us.load(Ordering::Relaxed) as f64 / 1e3,
            budget_violations: self.budget_violations.load(Ordering::Relaxed),
            labeled,
            correct,
            accuracy: (labeled > 0).then(|| correct as f64 / labeled as f64),
        }
    }
}
