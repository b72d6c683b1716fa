//! Loading configuration, models and corpora from disk.

use std::path::Path;

use anyhow::Context;
use bmsi_core::assets;
use bmsi_core::gbdt::{train, GbdtParams, SatisfactionModel};
use bmsi_core::serp::SerpCorpus;
use bmsi_core::session::SearchContext;
use bmsi_core::suggest::{PinyinDict, QueryLog};
use bmsi_core::synth::synth_satisfaction_eeg_dataset;
use bmsi_core::SystemConfig;
use tracing::info;

pub fn load_config(path: Option<&Path>) -> anyhow::Result<SystemConfig> {
    let config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => SystemConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Search backend from the given files, falling back to the bundled corpus
/// for any that are not given.
pub fn search_context(
    config: SystemConfig,
    log: Option<&Path>,
    dict: Option<&Path>,
    corpus: Option<&Path>,
) -> anyhow::Result<SearchContext> {
    let log = match log {
        Some(p) => QueryLog::parse(&read(p)?)?,
        None => assets::query_log()?,
    };
    let dict = match dict {
        Some(p) => PinyinDict::parse(&read(p)?)?,
        None => assets::pinyin_dict()?,
    };
    let corpus = match corpus {
        Some(p) => SerpCorpus::parse(&read(p)?)?,
        None => assets::serp_corpus()?,
    };
    Ok(SearchContext::new(config, &log, &dict, corpus))
}

/// Model trained on synthetic satisfaction EEG, for running without a
/// trained model file.
pub fn synthetic_model(sampling_rate: f64, seed: u64) -> anyhow::Result<SatisfactionModel> {
    let data = synth_satisfaction_eeg_dataset(60, sampling_rate, seed)?;
    let params = GbdtParams {
        n_estimators: 50,
        ..GbdtParams::default()
    };
    Ok(train(&data, &params, seed)?)
}

pub fn load_model(path: Option<&Path>, sampling_rate: f64, seed: u64) -> anyhow::Result<SatisfactionModel> {
    match path {
        Some(p) => Ok(SatisfactionModel::from_text(&read(p)?)?),
        None => {
            info!(seed, "no model file given; training on synthetic satisfaction EEG");
            synthetic_model(sampling_rate, seed)
        }
    }
}
