//! PinYin-keyed query suggestion over a local query log, and the typing
//! simulation that scores it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, parse_err, Error, Result};

/// Number of candidates the five digit keys can select.
pub const MAX_CANDIDATES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Initial letter of each syllable.
    FirstLetter,
    /// Complete romanization of each character.
    FullLetter,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::FirstLetter => "first_letter",
            Strategy::FullLetter => "full_letter",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_letter" | "first" => Ok(Strategy::FirstLetter),
            "full_letter" | "full" => Ok(Strategy::FullLetter),
            other => Err(domain(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Character → pinyin. Text form: `char \t pinyin` per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PinyinDict {
    map: BTreeMap<char, String>,
}

impl PinyinDict {
    pub fn insert(&mut self, ch: char, pinyin: &str) -> Result<()> {
        let pinyin = pinyin.trim().to_ascii_lowercase();
        if pinyin.is_empty() || !pinyin.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(domain(format!("pinyin for {ch:?} must be non-empty ASCII letters, got {pinyin:?}")));
        }
        self.map.insert(ch, pinyin);
        Ok(())
    }

    pub fn get(&self, ch: char) -> Option<&str> {
        self.map.get(&ch).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dict = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (ch, py) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(i + 1, "expected `char \\t pinyin`"))?;
            let mut chars = ch.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(parse_err(i + 1, format!("expected a single character, got {ch:?}")));
            };
            dict.insert(c, py).map_err(|e| parse_err(i + 1, e.to_string()))?;
        }
        Ok(dict)
    }
}

impl<const N: usize> TryFrom<[(char, &str); N]> for PinyinDict {
    type Error = Error;

    fn try_from(entries: [(char, &str); N]) -> Result<Self> {
        let mut dict = Self::default();
        for (c, py) in entries {
            dict.insert(c, py)?;
        }
        Ok(dict)
    }
}

fn is_han(c: char) -> bool {
    matches!(c as u32, 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}

/// Key sequence typed for `query`. Whitespace is dropped (the speller has no
/// space key); other non-Han characters pass through lowercased.
pub fn pinyin_encode(query: &str, strategy: Strategy, dict: &PinyinDict) -> Result<String> {
    let mut out = String::with_capacity(query.len());
    for c in query.chars() {
        if c.is_whitespace() {
            continue;
        }
        match dict.get(c) {
            Some(py) => match strategy {
                Strategy::FirstLetter => out.push(py.chars().next().expect("pinyin is non-empty")),
                Strategy::FullLetter => out.push_str(py),
            },
            None if is_han(c) => return Err(Error::Encoding(c)),
            None => out.extend(c.to_lowercase()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEntry {
    pub query: String,
    pub pageviews: u64,
    pub intent_id: Option<String>,
}

impl QueryEntry {
    pub fn new(query: &str, pageviews: u64) -> Self {
        Self {
            query: query.to_string(),
            pageviews,
            intent_id: None,
        }
    }

    pub fn with_intent(mut self, intent: &str) -> Self {
        self.intent_id = Some(intent.to_string());
        self
    }
}

/// Text form: `query \t pageviews \t intent_id?` per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryLog {
    pub entries: Vec<QueryEntry>,
}

impl QueryLog {
    pub fn new(entries: Vec<QueryEntry>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.query.as_str()) {
                return Err(domain(format!("duplicate query {:?}", e.query)));
            }
        }
        Ok(Self { entries })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(parse_err(i + 1, "expected `query \\t pageviews [\\t intent_id]`"));
            }
            let pageviews = fields[1]
                .trim()
                .parse()
                .map_err(|_| parse_err(i + 1, format!("bad pageviews {:?}", fields[1])))?;
            let intent_id = fields
                .get(2)
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(str::to_string);
            entries.push(QueryEntry {
                query: fields[0].to_string(),
                pageviews,
                intent_id,
            });
        }
        Self::new(entries).map_err(|e| parse_err(0, e.to_string()))
    }

    pub fn get(&self, query: &str) -> Option<&QueryEntry> {
        self.entries.iter().find(|e| e.query == query)
    }
}

/// Query log with encodings precomputed for one strategy. Queries the
/// dictionary cannot encode are never suggested.
#[derive(Debug, Clone)]
pub struct Suggester {
    strategy: Strategy,
    /// `(encoding, entry)` in ranking order: pageviews desc, then query.
    ranked: Vec<(String, QueryEntry)>,
}

impl Suggester {
    pub fn new(log: &QueryLog, dict: &PinyinDict, strategy: Strategy) -> Self {
        let mut ranked: Vec<(String, QueryEntry)> = log
            .entries
            .iter()
            .filter_map(|e| {
                pinyin_encode(&e.query, strategy, dict)
                    .ok()
                    .map(|code| (code, e.clone()))
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.1.pageviews
                .cmp(&a.1.pageviews)
                .then_with(|| a.1.query.cmp(&b.1.query))
        });
        Self { strategy, ranked }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Up to `k` entries whose encoding starts with `typed`.
    pub fn suggest_entries(&self, typed: &str, k: usize) -> Vec<&QueryEntry> {
        let typed = typed.to_ascii_lowercase();
        if typed.is_empty() {
            return Vec::new();
        }
        self.ranked
            .iter()
            .filter(|(code, _)| code.starts_with(&typed))
            .take(k)
            .map(|(_, e)| e)
            .collect()
    }

    pub fn suggest(&self, typed: &str, k: usize) -> Vec<String> {
        self.suggest_entries(typed, k)
            .into_iter()
            .map(|e| e.query.clone())
            .collect()
    }
}

pub fn suggest(typed_keys: &str, strategy: Strategy, log: &QueryLog, dict: &PinyinDict, k: usize) -> Vec<String> {
    Suggester::new(log, dict, strategy).suggest(typed_keys, k)
}

/// Candidate satisfies the intended query: identical, a refinement (the
/// intended query is its prefix), or tagged with the same intent.
pub fn match_success(candidate: &QueryEntry, intended: &QueryEntry) -> bool {
    candidate.query == intended.query
        || candidate.query.starts_with(&intended.query)
        || matches!((&candidate.intent_id, &intended.intent_id), (Some(a), Some(b)) if a == b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuggestionBench {
    pub strategy: Strategy,
    pub n_queries: usize,
    pub n_matched: usize,
    pub match_ratio: f64,
    pub keys_per_char: f64,
}

/// Typing outcome for one logged query.
#[derive(Debug, Clone, PartialEq)]
pub struct TypingTrace {
    pub query: String,
    /// `(keys typed, rank of first matching candidate)` when matched.
    pub matched_at: Option<(usize, usize)>,
    /// Keys including the digit press for a non-top candidate.
    pub keys_used: Option<usize>,
}

pub fn trace_query(suggester: &Suggester, dict: &PinyinDict, entry: &QueryEntry) -> TypingTrace {
    let mut trace = TypingTrace {
        query: entry.query.clone(),
        matched_at: None,
        keys_used: None,
    };
    let Ok(code) = pinyin_encode(&entry.query, suggester.strategy(), dict) else {
        return trace;
    };
    for n in 1..=code.len() {
        let candidates = suggester.suggest_entries(&code[..n], MAX_CANDIDATES);
        if let Some(rank) = candidates.iter().position(|c| match_success(c, entry)) {
            trace.matched_at = Some((n, rank + 1));
            trace.keys_used = Some(n + usize::from(rank > 0));
            break;
        }
    }
    trace
}

/// Simulates typing every logged query key by key.
///
/// `match_ratio` is the fraction of queries for which some candidate ever
/// matched; `keys_per_char` averages, over matched queries, the keys used
/// (plus one digit press when the match was not ranked first) divided by
/// the query's character count.
pub fn bench_suggestion(log: &QueryLog, dict: &PinyinDict, strategy: Strategy) -> Result<SuggestionBench> {
    if log.entries.is_empty() {
        return Err(domain("empty query log"));
    }
    let suggester = Suggester::new(log, dict, strategy);
    let mut n_matched = 0;
    let mut kpc_sum = 0.0;
    for entry in &log.entries {
        if let Some(keys) = trace_query(&suggester, dict, entry).keys_used {
            n_matched += 1;
            kpc_sum += keys as f64 / entry.query.chars().count() as f64;
        }
    }
    Ok(SuggestionBench {
        strategy,
        n_queries: log.entries.len(),
        n_matched,
        match_ratio: n_matched as f64 / log.entries.len() as f64,
        keys_per_char: if n_matched == 0 { 0.0 } else { kpc_sum / n_matched as f64 },
    })
}
