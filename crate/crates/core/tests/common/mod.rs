#![allow(dead_code)]

use std::sync::Arc;

use bmsi_core::cca::reference_matrix;
use bmsi_core::gbdt::{train, GbdtParams, SatisfactionModel};
use bmsi_core::session::{step, Decoder, Event, Phase, SearchContext, SessionState};
use bmsi_core::stimulus::{tag_for_target, target_index, KeyLabel};
use bmsi_core::synth::{synth_satisfaction_eeg, synth_satisfaction_eeg_dataset, synth_ssvep, SynthSpec};
use bmsi_core::{EegWindow, Result, SystemConfig};
use nalgebra::{DMatrix, DVector};

/// Multiple correlation of one signal with the span of the reference rows,
/// from the least-squares residual. Both sides are centered first.
pub fn ls_projection_rho(signal: &[f64], freq: f64, fs: f64, n_harmonics: usize) -> f64 {
    let n = signal.len();
    let refs = reference_matrix(freq, fs, n, n_harmonics);
    let mean = signal.iter().sum::<f64>() / n as f64;
    let s = DVector::from_iterator(n, signal.iter().map(|v| v - mean));
    let mut a = DMatrix::<f64>::zeros(n, refs.nrows());
    for (j, row) in refs.row_iter().enumerate() {
        let m = row.mean();
        for i in 0..n {
            a[(i, j)] = row[i] - m;
        }
    }
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&s, 1e-12)
        .expect("least-squares solve");
    let resid = &s - a * coef;
    (1.0 - resid.norm_squared() / s.norm_squared()).max(0.0).sqrt()
}

pub fn noise_free_window(k: usize, duration: f64, config: &SystemConfig) -> Result<EegWindow> {
    let tag = tag_for_target(k, &config.stimulus())?;
    let spec = SynthSpec::new(Some(k), duration, config.sampling_rate, 9, config.n_harmonics);
    synth_ssvep(&spec, &tag)
}

pub fn satisfaction_model(seed: u64) -> Result<SatisfactionModel> {
    let data = synth_satisfaction_eeg_dataset(40, 250.0, seed)?;
    let params = GbdtParams {
        n_estimators: 30,
        ..GbdtParams::default()
    };
    train(&data, &params, seed)
}

/// Drives a session from synthetic EEG alone: gazes at each key in turn,
/// then examines the landing page with the given satisfaction state.
pub fn closed_loop(
    ctx: &SearchContext,
    decoder: &Decoder,
    keys: &[KeyLabel],
    satisfied: bool,
    seed: u64,
) -> Result<SessionState> {
    let config = &ctx.config;
    let mut state = SessionState::default();
    let mut ts = 0;
    let mut apply = |state: &SessionState, window: &EegWindow| -> Result<SessionState> {
        let outcome = decoder.decode(state.phase, window)?;
        ts += 100;
        Ok(step(state, ctx, outcome.event, ts)?.0)
    };
    for key in keys {
        let window = noise_free_window(target_index(*key), config.window_s, config)?;
        state = apply(&state, &window)?;
    }
    let mut i = 0;
    while state.phase == Phase::LandingExam {
        let window = synth_satisfaction_eeg(satisfied, 1.0, config.sampling_rate, seed + i)?;
        state = apply(&state, &window)?;
        i += 1;
    }
    Ok(state)
}

pub fn decoder(config: &SystemConfig, seed: u64) -> Result<Decoder> {
    Ok(Decoder::new(config.clone(), Arc::new(satisfaction_model(seed)?)))
}

pub fn keys(labels: &[&str]) -> Vec<KeyLabel> {
    labels.iter().map(|l| l.parse().expect("key label")).collect()
}

pub fn key_event(label: &str) -> Event {
    Event::Key(label.parse().expect("key label"))
}
