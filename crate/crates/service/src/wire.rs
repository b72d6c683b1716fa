//! JSON shapes exchanged with clients.

use bmsi_core::serp::{SatisfactionFeedback, SearchResult, Verdict};
use bmsi_core::session::{Action, DecodeOutcome, Interaction, Phase, SessionState};
use bmsi_core::stimulus::KeyLabel;
use bmsi_core::{EegWindow, SystemConfig};
use serde::{Deserialize, Serialize};

/// One EEG window as posted by a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub sampling_rate: f64,
    pub channel_labels: Vec<String>,
    /// One row per channel.
    pub samples: Vec<Vec<f64>>,
    /// Target index the simulated gaze aimed at; feeds the accuracy counters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intended_k: Option<usize>,
}

impl EegMessage {
    pub fn from_window(window: EegWindow) -> Self {
        Self {
            session_id: None,
            sampling_rate: window.sampling_rate,
            channel_labels: window.channel_labels,
            samples: window.samples,
            intended_k: None,
        }
    }

    pub fn into_window(self) -> bmsi_core::Result<EegWindow> {
        EegWindow::new(self.channel_labels, self.sampling_rate, self.samples)
    }
}

/// Client-facing snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub phase: Phase,
    pub typed_keys: String,
    pub candidates: Vec<String>,
    pub selected: Option<usize>,
    pub query: String,
    pub landing: Option<SearchResult>,
    pub feedback: Option<SatisfactionFeedback>,
    pub exam_samples: usize,
    pub viewport_offset: usize,
    /// Results currently in view.
    pub viewport: Vec<SearchResult>,
    /// Full result order.
    pub serp: Vec<String>,
    pub n_events: usize,
}

impl SessionView {
    pub fn new(session_id: &str, state: &SessionState, config: &SystemConfig) -> Self {
        Self {
            session_id: session_id.to_string(),
            phase: state.phase,
            typed_keys: state.typed_keys.clone(),
            candidates: state.candidates.clone(),
            selected: state.selected,
            query: state.query.clone(),
            landing: state.landing.clone(),
            feedback: state.feedback,
            exam_samples: state.exam_samples.len(),
            viewport_offset: state.viewport_offset,
            viewport: state.viewport(config).to_vec(),
            serp: state
                .serp
                .as_ref()
                .map(|s| s.ids().into_iter().map(str::to_string).collect())
                .unwrap_or_default(),
            n_events: state.event_log.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecodeResponse {
    /// The decoded event was applied.
    Accepted {
        decoded: DecodeOutcome,
        actions: Vec<Action>,
        state: SessionView,
    },
    /// Decoding worked but the event does not apply in the current phase.
    Rejected {
        decoded: DecodeOutcome,
        reason: String,
        state: SessionView,
    },
    /// Recognition margin too small; send a longer window.
    NoDecision {
        confidence: f64,
        threshold: f64,
        retry_window_s: f64,
        state: SessionView,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub actions: Vec<Action>,
    pub state: SessionView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub state: SessionView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutKey {
    pub key: KeyLabel,
    pub k: usize,
    pub row: usize,
    pub col: usize,
    pub f: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutBlock {
    pub k: usize,
    pub action: Interaction,
    pub f: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub refresh_rate: f64,
    pub keys: Vec<LayoutKey>,
    /// Flicker blocks beside the SERP viewport.
    pub blocks: Vec<LayoutBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LuminanceRow {
    pub k: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LuminanceTable {
    pub refresh_rate: f64,
    pub frames: u64,
    pub keys: Vec<LuminanceRow>,
}

/// Server-side synthesis for simulated gaze and simulated satisfaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthRequest {
    Ssvep {
        /// Target index; alternatively give `key`.
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        key: Option<KeyLabel>,
        #[serde(default)]
        duration_s: Option<f64>,
        /// Omitted means noise-free.
        #[serde(default)]
        snr_db: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    Satisfaction {
        satisfied: bool,
        #[serde(default)]
        duration_s: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
}
