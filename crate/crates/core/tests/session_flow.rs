mod common;

use bmsi_core::assets::{bundled_context, pinyin_dict};
use bmsi_core::serp::{rerank, SatisfactionFeedback, Verdict};
use bmsi_core::session::{replay, step, Event, Interaction, LogLine, Phase, SearchContext, SessionState};
use bmsi_core::stimulus::KeyLabel;
use bmsi_core::suggest::{pinyin_encode, MAX_CANDIDATES};
use bmsi_core::{Error, SystemConfig};
use common::{closed_loop, decoder, key_event, keys};
use proptest::prelude::*;

fn ctx() -> SearchContext {
    bundled_context(SystemConfig::default()).unwrap()
}

fn run(ctx: &SearchContext, events: &[Event]) -> SessionState {
    let mut state = SessionState::default();
    for (i, e) in events.iter().enumerate() {
        state = step(&state, ctx, e.clone(), 10 * (i as u64 + 1)).unwrap().0;
    }
    state
}

fn state_in(phase: Phase, ctx: &SearchContext) -> SessionState {
    let satisfied = Event::Feedback(SatisfactionFeedback::manual(Verdict::Satisfied));
    let events = match phase {
        Phase::Spelling => vec![],
        Phase::CandidateSelect => vec![key_event("L"), key_event("B")],
        Phase::LandingExam => vec![key_event("L"), key_event("B"), key_event("SEARCH")],
        Phase::SerpBrowse => vec![key_event("L"), key_event("B"), key_event("SEARCH"), satisfied],
        Phase::Done => vec![Event::End],
    };
    let state = run(ctx, &events);
    assert_eq!(state.phase, phase);
    state
}

fn event_kinds() -> Vec<(&'static str, Event)> {
    vec![
        ("letter", key_event("Q")),
        ("digit", key_event("1")),
        ("delete", key_event("DELETE")),
        ("search", key_event("SEARCH")),
        ("click", Event::Interaction(Interaction::Click(1))),
        ("scroll_up", Event::Interaction(Interaction::ScrollUp)),
        ("scroll_down", Event::Interaction(Interaction::ScrollDown)),
        ("sample", Event::SatisfactionSample(0.7)),
        ("feedback", Event::Feedback(SatisfactionFeedback::manual(Verdict::Unsatisfied))),
        ("end", Event::End),
    ]
}

fn accepted(phase: Phase, kind: &str) -> bool {
    match phase {
        Phase::Spelling => matches!(kind, "letter" | "delete" | "end"),
        Phase::CandidateSelect => matches!(kind, "letter" | "digit" | "delete" | "search" | "end"),
        Phase::LandingExam => matches!(kind, "sample" | "feedback" | "end"),
        Phase::SerpBrowse => matches!(kind, "click" | "scroll_up" | "scroll_down" | "end"),
        Phase::Done => false,
    }
}

#[test]
fn transition_table_is_total() {
    let ctx = ctx();
    for phase in Phase::ALL {
        let state = state_in(phase, &ctx);
        for (kind, event) in event_kinds() {
            let result = step(&state, &ctx, event, 1_000_000);
            if accepted(phase, kind) {
                let (next, _) = result.unwrap_or_else(|e| panic!("{phase:?} x {kind}: {e}"));
                assert!(next.event_log.len() <= state.event_log.len() + 1);
                assert!(next.event_log.windows(2).all(|w| w[0].ts_ms < w[1].ts_ms));
            } else {
                match result {
                    Err(Error::PhaseMismatch { phase: p, .. }) => assert_eq!(p, phase),
                    other => panic!("{phase:?} x {kind}: expected phase mismatch, got {other:?}"),
                }
            }
        }
    }
}

#[test]
fn satisfied_feedback_matches_direct_rerank() {
    let ctx = ctx();
    let exam = state_in(Phase::LandingExam, &ctx);
    let expected = rerank(exam.serp.as_ref().unwrap(), exam.landing.as_ref().unwrap(), Verdict::Satisfied);
    let fb = Event::Feedback(SatisfactionFeedback::manual(Verdict::Satisfied));
    let (next, _) = step(&exam, &ctx, fb, 1_000).unwrap();
    assert_eq!(next.phase, Phase::SerpBrowse);
    assert_eq!(next.serp.unwrap(), expected);
}

#[test]
fn scrolling_moves_by_viewport_and_stops_at_edges() {
    let ctx = ctx();
    let browse = state_in(Phase::SerpBrowse, &ctx);
    let up = step(&browse, &ctx, Event::Interaction(Interaction::ScrollUp), 1_000).unwrap().0;
    assert_eq!(up, browse);
    let down = step(&browse, &ctx, Event::Interaction(Interaction::ScrollDown), 1_000).unwrap().0;
    assert_eq!(down.viewport_offset, 5);
    assert_eq!(down.viewport(&ctx.config).len(), 3);
    let again = step(&down, &ctx, Event::Interaction(Interaction::ScrollDown), 1_001).unwrap().0;
    assert_eq!(again, down);
    let click = step(&down, &ctx, Event::Interaction(Interaction::Click(2)), 1_002).unwrap().0;
    assert_eq!(click.phase, Phase::LandingExam);
    assert_eq!(click.landing.as_ref().unwrap().id, down.serp.as_ref().unwrap().results[6].id);
}

/// Keys that spell `query` until it appears among the candidates, then pick it.
fn key_plan(ctx: &SearchContext, query: &str) -> Vec<KeyLabel> {
    let code = pinyin_encode(query, ctx.config.strategy, &pinyin_dict().unwrap()).unwrap();
    for n in 1..=code.len() {
        let candidates = ctx.suggester.suggest(&code[..n], MAX_CANDIDATES);
        if let Some(rank) = candidates.iter().position(|c| c == query) {
            let mut plan: Vec<KeyLabel> = code[..n]
                .chars()
                .map(|c| KeyLabel::Letter(c.to_ascii_uppercase()))
                .collect();
            if rank > 0 {
                plan.push(KeyLabel::Digit(rank as u8 + 1));
            }
            plan.push(KeyLabel::Search);
            return plan;
        }
    }
    panic!("{query} is not reachable by typing");
}

#[test]
fn noise_free_loop_reaches_every_corpus_query() {
    let config = SystemConfig::default();
    let ctx = bundled_context(config.clone()).unwrap();
    let dec = decoder(&config, 8).unwrap();
    let queries: Vec<String> = ctx.corpus.queries().map(str::to_string).collect();
    assert!(queries.len() >= 6);
    for (i, query) in queries.iter().enumerate() {
        let plan = key_plan(&ctx, query);
        let state = closed_loop(&ctx, &dec, &plan, i % 2 == 0, 100 * i as u64).unwrap();
        assert_eq!(&state.query, query);
        assert_eq!(state.phase, Phase::SerpBrowse, "{query}");
        let expected = if i % 2 == 0 { Verdict::Satisfied } else { Verdict::Unsatisfied };
        assert_eq!(state.feedback.unwrap().verdict, expected, "{query}");
    }
}

#[test]
fn paris_demo_via_decoded_eeg() {
    let config = SystemConfig::default();
    let ctx = bundled_context(config.clone()).unwrap();
    let dec = decoder(&config, 8).unwrap();
    let state = closed_loop(&ctx, &dec, &keys(&["B", "L", "2", "SEARCH"]), false, 77).unwrap();
    assert_eq!(state.query, "巴黎");
    assert_eq!(state.landing.as_ref().unwrap().id, "bl1");
    assert_eq!(state.feedback.unwrap().verdict, Verdict::Unsatisfied);
    assert_eq!(
        state.serp.unwrap().ids(),
        ["bl3", "bl4", "bl6", "bl7", "bl8", "bl1", "bl2", "bl5"]
    );
}

fn any_event() -> impl Strategy<Value = Event> {
    prop_oneof![
        4 => prop::sample::select(vec!["L", "B", "S", "J", "Y", "O", "DELETE", "SEARCH", "1", "2", "3"])
            .prop_map(key_event),
        2 => prop_oneof![
            (1u8..=5).prop_map(Interaction::Click),
            Just(Interaction::ScrollUp),
            Just(Interaction::ScrollDown),
        ]
        .prop_map(Event::Interaction),
        2 => (0.0..=1.0f64).prop_map(Event::SatisfactionSample),
        1 => prop::bool::ANY.prop_map(|s| Event::Feedback(SatisfactionFeedback::manual(
            if s { Verdict::Satisfied } else { Verdict::Unsatisfied }
        ))),
        1 => Just(Event::End),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn any_recorded_session_replays_identically(events in prop::collection::vec(any_event(), 0..60)) {
        let ctx = ctx();
        let mut state = SessionState::default();
        for (i, event) in events.into_iter().enumerate() {
            if let Ok((next, _)) = step(&state, &ctx, event, 5 * i as u64 + 1) {
                state = next;
            }
        }
        let text: String = state
            .event_log
            .iter()
            .map(|e| LogLine { ts: e.ts_ms, session: "p".into(), event: e.event.clone() }.to_json() + "\n")
            .collect();
        let replayed = replay(&text, &ctx).unwrap();
        prop_assert!(replayed.warnings.is_empty());
        prop_assert_eq!(replayed.state, state);
    }
}
