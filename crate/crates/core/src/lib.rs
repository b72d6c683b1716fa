//! Core of a brain-machine search interface: SSVEP speller coding and
//! recognition, EEG satisfaction decoding, PinYin query suggestion,
//! satisfaction-driven SERP re-ranking and the closed-loop session.

pub mod assets;
pub mod cca;
pub mod config;
pub mod eeg;
pub mod error;
pub mod features;
pub mod gbdt;
pub mod serp;
pub mod session;
pub mod stimulus;
pub mod suggest;
pub mod synth;

pub use config::SystemConfig;
pub use eeg::EegWindow;
pub use error::{Error, Result};
