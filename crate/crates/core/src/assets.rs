//! Small bundled corpus: pinyin dictionary, query log and offline SERPs.

use crate::config::SystemConfig;
use crate::error::Result;
use crate::serp::SerpCorpus;
use crate::session::SearchContext;
use crate::suggest::{PinyinDict, QueryLog};

pub const PINYIN_TSV: &str = include_str!("../assets/pinyin.tsv");
pub const QUERY_LOG_TSV: &str = include_str!("../assets/query_log.tsv");
pub const SERP_CORPUS_JSONL: &str = include_str!("../assets/serp_corpus.jsonl");

pub fn pinyin_dict() -> Result<PinyinDict> {
    PinyinDict::parse(PINYIN_TSV)
}

pub fn query_log() -> Result<QueryLog> {
    QueryLog::parse(QUERY_LOG_TSV)
}

pub fn serp_corpus() -> Result<SerpCorpus> {
    SerpCorpus::parse(SERP_CORPUS_JSONL)
}

pub fn bundled_context(config: SystemConfig) -> Result<SearchContext> {
    Ok(SearchContext::new(config, &query_log()?, &pinyin_dict()?, serp_corpus()?))
}
