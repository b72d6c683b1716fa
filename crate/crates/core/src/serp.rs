//! Result pages with subtopic annotations and satisfaction-driven re-ranking.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{domain, parse_err, Error, Result};

pub const DEFAULT_SATISFACTION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub id: String,
    pub title: String,
    pub url: String,
    pub snippet: String,
    #[serde(default)]
    pub subtopics: BTreeSet<String>,
}

impl SearchResult {
    pub fn new(id: &str, subtopics: &[&str]) -> Self {
        Self {
            id: id.to_string(),
            title: id.to_string(),
            url: format!("https://example.org/{id}"),
            snippet: String::new(),
            subtopics: subtopics.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn overlaps(&self, landing: &SearchResult) -> bool {
        self.id == landing.id || !self.subtopics.is_disjoint(&landing.subtopics)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Serp {
    pub query: String,
    pub results: Vec<SearchResult>,
}

impl Serp {
    pub fn new(query: &str, results: Vec<SearchResult>) -> Result<Self> {
        let mut ids = HashSet::new();
        for r in &results {
            if !ids.insert(r.id.as_str()) {
                return Err(domain(format!("duplicate result id {:?} in SERP for {query:?}", r.id)));
            }
        }
        Ok(Self {
            query: query.to_string(),
            results,
        })
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.results.iter().map(|r| r.id.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Unsatisfied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    Decoded,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionFeedback {
    pub verdict: Verdict,
    pub probability: f64,
    pub source: FeedbackSource,
}

impl SatisfactionFeedback {
    /// Verdict is `Satisfied` iff `probability >= threshold`.
    pub fn from_probability(probability: f64, threshold: f64, source: FeedbackSource) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(domain(format!("probability {probability} outside [0, 1]")));
        }
        let verdict = if probability >= threshold {
            Verdict::Satisfied
        } else {
            Verdict::Unsatisfied
        };
        Ok(Self {
            verdict,
            probability,
            source,
        })
    }

    /// Manual verdict with probability 1 or 0.
    pub fn manual(verdict: Verdict) -> Self {
        Self {
            verdict,
            probability: match verdict {
                Verdict::Satisfied => 1.0,
                Verdict::Unsatisfied => 0.0,
            },
            source: FeedbackSource::Manual,
        }
    }
}

/// The landing page shown right after submission: the first result.
pub fn top_ranked_page(serp: &Serp) -> Result<&SearchResult> {
    serp.results
        .first()
        .ok_or_else(|| domain(format!("empty SERP for {:?}", serp.query)))
}

/// Stable partition around the landing page's subtopics. Results sharing a
/// subtopic with the landing page (and the landing page itself) move to the
/// front when satisfied and to the back when unsatisfied.
pub fn rerank(serp: &Serp, landing: &SearchResult, verdict: Verdict) -> Serp {
    let (overlap, rest): (Vec<SearchResult>, Vec<SearchResult>) =
        serp.results.iter().cloned().partition(|r| r.overlaps(landing));
    let results = match verdict {
        Verdict::Satisfied => overlap.into_iter().chain(rest).collect(),
        Verdict::Unsatisfied => rest.into_iter().chain(overlap).collect(),
    };
    Serp {
        query: serp.query.clone(),
        results,
    }
}

/// Offline search engine: one JSON object per line,
/// `{"query": ..., "results": [{"id", "title", "url", "snippet", "subtopics"}]}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SerpCorpus {
    pub serps: Vec<Serp>,
}

impl SerpCorpus {
    pub fn parse(text: &str) -> Result<Self> {
        let mut serps: Vec<Serp> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: Serp = serde_json::from_str(line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            let serp = Serp::new(&raw.query, raw.results).map_err(|e| parse_err(i + 1, e.to_string()))?;
            if serps.iter().any(|s| s.query == serp.query) {
                return Err(parse_err(i + 1, format!("duplicate query {:?}", serp.query)));
            }
            serps.push(serp);
        }
        Ok(Self { serps })
    }

    pub fn to_text(&self) -> String {
        self.serps
            .iter()
            .map(|s| serde_json::to_string(s).expect("SERP serializes") + "\n")
            .collect()
    }

    pub fn lookup(&self, query: &str) -> Result<&Serp> {
        self.serps
            .iter()
            .find(|s| s.query == query)
            .ok_or_else(|| Error::NotFound(format!("no SERP for query {query:?}")))
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.serps.iter().map(|s| s.query.as_str())
    }
}
