use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Event, Interaction, Phase};
use crate::cca::{build_reference_bank, recognize, ReferenceBank};
use crate::config::SystemConfig;
use crate::eeg::{EegWindow, MONTAGE_62};
use crate::error::{domain, Error, Result};
use crate::features::{de_features, BandSet, N_FEATURE_CHANNELS};
use crate::gbdt::SatisfactionModel;
use crate::stimulus::{label_for_index, tag_for_target, FlickerTag};

/// A flickering control next to the SERP viewport.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionBlock {
    pub k: usize,
    pub action: Interaction,
    pub tag: FlickerTag,
}

/// Click blocks `1..=viewport`, then scroll up, then scroll down, tagged
/// with the speller's first `viewport + 2` codes.
pub fn interaction_blocks(config: &SystemConfig) -> Result<Vec<InteractionBlock>> {
    let stim = config.stimulus();
    let n = config.viewport + 2;
    (1..=n)
        .map(|k| {
            let action = match k {
                k if k <= config.viewport => Interaction::Click(k as u8),
                k if k == config.viewport + 1 => Interaction::ScrollUp,
                _ => Interaction::ScrollDown,
            };
            Ok(InteractionBlock {
                k,
                action,
                tag: tag_for_target(k, &stim)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum BankKind {
    Speller,
    Blocks,
}

/// What one EEG window decoded to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub event: Event,
    pub best_k: Option<usize>,
    pub confidence: Option<f64>,
    pub probability: Option<f64>,
    pub elapsed_ms: f64,
}

/// Routes windows to the SSVEP recognizer or the satisfaction model by
/// session phase. Shareable across sessions; reference banks are built once
/// per window geometry.
pub struct Decoder {
    config: SystemConfig,
    model: Arc<SatisfactionModel>,
    bands: BandSet,
    banks: RwLock<HashMap<(BankKind, usize, u64), Arc<ReferenceBank>>>,
}

impl Decoder {
    pub fn new(config: SystemConfig, model: Arc<SatisfactionModel>) -> Self {
        Self {
            config,
            model,
            bands: BandSet::default(),
            banks: RwLock::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn model(&self) -> &SatisfactionModel {
        &self.model
    }

    fn bank(&self, kind: BankKind, n_samples: usize, fs: f64) -> Result<Arc<ReferenceBank>> {
        let key = (kind, n_samples, fs.to_bits());
        if let Some(bank) = self.banks.read().expect("bank cache poisoned").get(&key) {
            return Ok(bank.clone());
        }
        let freqs = self.config.stimulus().frequencies();
        let freqs = match kind {
            BankKind::Speller => freqs,
            BankKind::Blocks => freqs[..self.config.viewport + 2].to_vec(),
        };
        let bank = Arc::new(build_reference_bank(fs, n_samples, self.config.n_harmonics, &freqs)?);
        self.banks
            .write()
            .expect("bank cache poisoned")
            .insert(key, bank.clone());
        Ok(bank)
    }

    fn threshold(&self) -> Option<f64> {
        (self.config.min_confidence > 0.0).then_some(self.config.min_confidence)
    }

    /// Satisfaction probability for a 62-channel window.
    pub fn satisfaction(&self, window: &EegWindow) -> Result<f64> {
        let window = match window.select(&MONTAGE_62) {
            Ok(w) => w,
            Err(_) if window.n_channels() == N_FEATURE_CHANNELS => window.clone(),
            Err(e) => return Err(e),
        };
        let features = de_features(&window, &self.bands)?;
        self.model.predict(&features.values)
    }

    pub fn decode(&self, phase: Phase, window: &EegWindow) -> Result<DecodeOutcome> {
        window.validate()?;
        let start = Instant::now();
        let mut outcome = DecodeOutcome {
            event: Event::End,
            best_k: None,
            confidence: None,
            probability: None,
            elapsed_ms: 0.0,
        };
        match phase {
            Phase::Spelling | Phase::CandidateSelect | Phase::SerpBrowse => {
                let occipital = window.occipital()?;
                let kind = if phase == Phase::SerpBrowse {
                    BankKind::Blocks
                } else {
                    BankKind::Speller
                };
                let bank = self.bank(kind, occipital.n_samples(), occipital.sampling_rate)?;
                let result = recognize(&occipital, &bank, self.threshold())?;
                outcome.best_k = Some(result.best_k);
                outcome.confidence = Some(result.confidence);
                outcome.event = if kind == BankKind::Speller {
                    Event::Key(label_for_index(result.best_k).ok_or_else(|| domain("recognized index outside layout"))?)
                } else {
                    let blocks = interaction_blocks(&self.config)?;
                    Event::Interaction(blocks[result.best_k - 1].action)
                };
            }
            Phase::LandingExam => {
                let p = self.satisfaction(window)?;
                outcome.probability = Some(p);
                outcome.event = Event::SatisfactionSample(p);
            }
            Phase::Done => {
                return Err(Error::PhaseMismatch {
                    phase,
                    event: "eeg window".into(),
                })
            }
        }
        outcome.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(outcome)
    }
}
