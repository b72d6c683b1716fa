//! Offline speller benchmark over synthetic EEG.

use std::time::Instant;

use bmsi_core::cca::{build_reference_bank, recognize};
use bmsi_core::session::itr;
use bmsi_core::stimulus::tag_for_target;
use bmsi_core::synth::{synth_ssvep, SynthSpec};
use bmsi_core::{Result, SystemConfig};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpellerBenchRow {
    pub snr_db: f64,
    pub window_s: f64,
    pub accuracy: f64,
    pub mean_decode_ms: f64,
    pub itr_bits_per_min: f64,
}

/// Recognition accuracy for every (SNR, window length) pair, `trials`
/// synthetic windows per target. Selection time for ITR is the window plus
/// the configured gaze shift.
pub fn bench_speller(config: &SystemConfig, snrs: &[f64], windows: &[f64], trials: usize, seed: u64) -> Result<Vec<SpellerBenchRow>> {
    let stim = config.stimulus();
    let n_targets = stim.n_targets;
    let mut rows = Vec::new();
    for &snr_db in snrs {
        for &window_s in windows {
            let spec = SynthSpec::new(None, window_s, config.sampling_rate, 9, config.n_harmonics);
            let bank = build_reference_bank(config.sampling_rate, spec.n_samples(), config.n_harmonics, &stim.frequencies())?;
            let (mut correct, mut total, mut decode_s) = (0usize, 0usize, 0.0);
            for k in 1..=n_targets {
                let tag = tag_for_target(k, &stim)?;
                for t in 0..trials {
                    let spec = SynthSpec {
                        target: Some(k),
                        ..spec.clone()
                    }
                    .with_snr(snr_db)
                    .with_seed(seed ^ ((k as u64) << 32) ^ t as u64);
                    let window = synth_ssvep(&spec, &tag)?;
                    let start = Instant::now();
                    let result = recognize(&window, &bank, None)?;
                    decode_s += start.elapsed().as_secs_f64();
                    correct += usize::from(result.best_k == k);
                    total += 1;
                }
            }
            let accuracy = correct as f64 / total.max(1) as f64;
            // below chance carries no information
            let itr_bits_per_min = if accuracy * n_targets as f64 <= 1.0 {
                0.0
            } else {
                itr(n_targets, accuracy, window_s + config.gaze_shift_s)?
            };
            rows.push(SpellerBenchRow {
                snr_db,
                window_s,
                accuracy,
                mean_decode_ms: 1e3 * decode_s / total.max(1) as f64,
                itr_bits_per_min,
            });
        }
    }
    Ok(rows)
}

pub fn format_table(rows: &[SpellerBenchRow]) -> String {
    let mut out = String::from("snr_db\twindow_s\taccuracy\tmean_decode_ms\titr_bits_per_min\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.4}\t{:.3}\t{:.2}\n",
            r.snr_db, r.window_s, r.accuracy, r.mean_decode_ms, r.itr_bits_per_min
        ));
    }
    out
}
