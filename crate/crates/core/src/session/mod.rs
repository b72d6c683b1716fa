//! Closed-loop search session: an event-sourced state machine driven by
//! decoded speller keys, SERP interaction blocks and satisfaction feedback.

mod decoder;
mod log;
mod metrics;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use decoder::{interaction_blocks, DecodeOutcome, Decoder, InteractionBlock};
pub use log::{replay, replay_file, LogLine, Replay, SessionLog};
pub use metrics::{decode_latency_budget_check, itr, LatencyReport, Metrics, MetricsSnapshot};

use crate::config::SystemConfig;
use crate::error::{domain, Error, Result};
use crate::serp::{rerank, top_ranked_page, FeedbackSource, SatisfactionFeedback, SearchResult, Serp, SerpCorpus};
use crate::stimulus::KeyLabel;
use crate::suggest::{PinyinDict, QueryLog, Suggester, MAX_CANDIDATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Spelling,
    CandidateSelect,
    LandingExam,
    SerpBrowse,
    Done,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Spelling,
        Phase::CandidateSelect,
        Phase::LandingExam,
        Phase::SerpBrowse,
        Phase::Done,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    /// Open the n-th result of the viewport, 1-based.
    Click(u8),
    ScrollUp,
    ScrollDown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Key(KeyLabel),
    Interaction(Interaction),
    /// One decoded satisfaction probability during a landing-page exam.
    SatisfactionSample(f64),
    Feedback(SatisfactionFeedback),
    End,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Key(k) => write!(f, "key {k}"),
            Event::Interaction(i) => write!(f, "interaction {i:?}"),
            Event::SatisfactionSample(p) => write!(f, "satisfaction sample {p:.3}"),
            Event::Feedback(fb) => write!(f, "feedback {:?}", fb.verdict),
            Event::End => f.write_str("end"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub ts_ms: u64,
    pub event: Event,
}

/// Observable effects of one transition, for the UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    TypedKeys { typed: String, candidates: Vec<String> },
    CandidateSelected { index: usize, query: String },
    Submitted { query: String },
    ShowLanding { result_id: String },
    SampleRecorded { pooled: usize },
    Reranked { order: Vec<String> },
    ViewportMoved { offset: usize },
    Ended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub typed_keys: String,
    pub candidates: Vec<String>,
    /// Candidate picked with a digit key, 0-based.
    pub selected: Option<usize>,
    pub query: String,
    pub serp: Option<Serp>,
    pub landing: Option<SearchResult>,
    pub feedback: Option<SatisfactionFeedback>,
    /// Satisfaction probabilities pooled for the current landing page.
    pub exam_samples: Vec<f64>,
    pub viewport_offset: usize,
    pub event_log: Vec<LoggedEvent>,
}

impl Default for SessionState {
    fn default() -> Self {
        Self {
            phase: Phase::Spelling,
            typed_keys: String::new(),
            candidates: Vec::new(),
            selected: None,
            query: String::new(),
            serp: None,
            landing: None,
            feedback: None,
            exam_samples: Vec::new(),
            viewport_offset: 0,
            event_log: Vec::new(),
        }
    }
}

impl SessionState {
    pub fn last_ts(&self) -> Option<u64> {
        self.event_log.last().map(|e| e.ts_ms)
    }

    /// Results currently in view.
    pub fn viewport<'a>(&'a self, config: &SystemConfig) -> &'a [SearchResult] {
        match &self.serp {
            Some(serp) => {
                let end = (self.viewport_offset + config.viewport).min(serp.len());
                &serp.results[self.viewport_offset.min(end)..end]
            }
            None => &[],
        }
    }
}

/// Read-only search backend a session runs against.
#[derive(Debug, Clone)]
pub struct SearchContext {
    pub config: SystemConfig,
    pub suggester: Suggester,
    pub corpus: SerpCorpus,
}

impl SearchContext {
    pub fn new(config: SystemConfig, log: &QueryLog, dict: &PinyinDict, corpus: SerpCorpus) -> Self {
        let suggester = Suggester::new(log, dict, config.strategy);
        Self {
            config,
            suggester,
            corpus,
        }
    }
}

fn mismatch(phase: Phase, event: &Event) -> Error {
    Error::PhaseMismatch {
        phase,
        event: event.to_string(),
    }
}

/// Applies one event. On error the input state is untouched and nothing is
/// logged; accepted events are logged with a strictly increasing timestamp.
/// No-op events (DELETE on empty input, scrolling past an edge) are accepted
/// but not logged.
pub fn step(state: &SessionState, ctx: &SearchContext, event: Event, ts_ms: u64) -> Result<(SessionState, Vec<Action>)> {
    let mut next = state.clone();
    let mut actions = Vec::new();
    let changed = apply(&mut next, ctx, &event, &mut actions)?;
    if !changed {
        return Ok((state.clone(), actions));
    }
    let ts_ms = match state.last_ts() {
        Some(last) if ts_ms <= last => last + 1,
        _ => ts_ms,
    };
    next.event_log.push(LoggedEvent { ts_ms, event });
    Ok((next, actions))
}

fn refresh_candidates(state: &mut SessionState, ctx: &SearchContext, actions: &mut Vec<Action>) {
    state.candidates = ctx.suggester.suggest(&state.typed_keys, MAX_CANDIDATES);
    state.selected = None;
    state.phase = if state.candidates.is_empty() {
        Phase::Spelling
    } else {
        Phase::CandidateSelect
    };
    actions.push(Action::TypedKeys {
        typed: state.typed_keys.clone(),
        candidates: state.candidates.clone(),
    });
}

fn open_landing(state: &mut SessionState, landing: SearchResult, actions: &mut Vec<Action>) {
    actions.push(Action::ShowLanding {
        result_id: landing.id.clone(),
    });
    state.landing = Some(landing);
    state.feedback = None;
    state.exam_samples.clear();
    state.phase = Phase::LandingExam;
}

fn apply_feedback(state: &mut SessionState, feedback: SatisfactionFeedback, actions: &mut Vec<Action>) {
    let serp = state.serp.as_ref().expect("landing exam always has a SERP");
    let landing = state.landing.as_ref().expect("landing exam always has a landing page");
    let reranked = rerank(serp, landing, feedback.verdict);
    actions.push(Action::Reranked {
        order: reranked.ids().into_iter().map(str::to_string).collect(),
    });
    state.serp = Some(reranked);
    state.feedback = Some(feedback);
    state.exam_samples.clear();
    state.viewport_offset = 0;
    state.phase = Phase::SerpBrowse;
}

/// Mutates `state`; returns whether anything changed.
fn apply(state: &mut SessionState, ctx: &SearchContext, event: &Event, actions: &mut Vec<Action>) -> Result<bool> {
    use Phase::*;
    let phase = state.phase;
    match (phase, event) {
        (Done, _) => Err(mismatch(phase, event)),
        (_, Event::End) => {
            state.phase = Done;
            actions.push(Action::Ended);
            Ok(true)
        }

        (Spelling | CandidateSelect, Event::Key(KeyLabel::Letter(c))) => {
            state.typed_keys.push(c.to_ascii_lowercase());
            refresh_candidates(state, ctx, actions);
            Ok(true)
        }
        (Spelling | CandidateSelect, Event::Key(KeyLabel::Delete)) => {
            if state.typed_keys.pop().is_none() {
                return Ok(false);
            }
            refresh_candidates(state, ctx, actions);
            Ok(true)
        }
        (CandidateSelect, Event::Key(KeyLabel::Digit(d))) => {
            let index = usize::from(*d).saturating_sub(1);
            let query = state
                .candidates
                .get(index)
                .ok_or_else(|| domain(format!("no candidate {d} among {}", state.candidates.len())))?
                .clone();
            state.selected = Some(index);
            actions.push(Action::CandidateSelected { index, query });
            Ok(true)
        }
        (CandidateSelect, Event::Key(KeyLabel::Search)) => {
            let query = state.candidates[state.selected.unwrap_or(0)].clone();
            let serp = ctx.corpus.lookup(&query)?.clone();
            let landing = top_ranked_page(&serp)?.clone();
            actions.push(Action::Submitted { query: query.clone() });
            state.query = query;
            state.serp = Some(serp);
            state.viewport_offset = 0;
            open_landing(state, landing, actions);
            Ok(true)
        }

        (LandingExam, Event::SatisfactionSample(p)) => {
            if !(0.0..=1.0).contains(p) {
                return Err(domain(format!("probability {p} outside [0, 1]")));
            }
            state.exam_samples.push(*p);
            actions.push(Action::SampleRecorded {
                pooled: state.exam_samples.len(),
            });
            if state.exam_samples.len() >= ctx.config.landing_exam_windows {
                let mean = state.exam_samples.iter().sum::<f64>() / state.exam_samples.len() as f64;
                let feedback = SatisfactionFeedback::from_probability(
                    mean.clamp(0.0, 1.0),
                    ctx.config.satisfaction_threshold,
                    FeedbackSource::Decoded,
                )?;
                apply_feedback(state, feedback, actions);
            }
            Ok(true)
        }
        (LandingExam, Event::Feedback(feedback)) => {
            if !(0.0..=1.0).contains(&feedback.probability) {
                return Err(domain("feedback probability outside [0, 1]"));
            }
            apply_feedback(state, *feedback, actions);
            Ok(true)
        }

        (SerpBrowse, Event::Interaction(action)) => {
            let len = state.serp.as_ref().map_or(0, Serp::len);
            let viewport = ctx.config.viewport;
            match action {
                Interaction::Click(n) => {
                    let n = usize::from(*n);
                    if n == 0 || n > viewport {
                        return Err(domain(format!("click block {n} outside 1..={viewport}")));
                    }
                    let idx = state.viewport_offset + n - 1;
                    let landing = state
                        .serp
                        .as_ref()
                        .and_then(|s| s.results.get(idx))
                        .cloned()
                        .ok_or_else(|| domain(format!("no result at position {}", idx + 1)))?;
                    open_landing(state, landing, actions);
                    Ok(true)
                }
                Interaction::ScrollDown => {
                    if state.viewport_offset + viewport >= len {
                        return Ok(false);
                    }
                    state.viewport_offset += viewport;
                    actions.push(Action::ViewportMoved {
                        offset: state.viewport_offset,
                    });
                    Ok(true)
                }
                Interaction::ScrollUp => {
                    if state.viewport_offset == 0 {
                        return Ok(false);
                    }
                    state.viewport_offset = state.viewport_offset.saturating_sub(viewport);
                    actions.push(Action::ViewportMoved {
                        offset: state.viewport_offset,
                    });
                    Ok(true)
                }
            }
        }

        _ => Err(mismatch(phase, event)),
    }
}
