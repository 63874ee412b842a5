//! Statement attribution and relevance judges.

use std::collections::HashSet;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::embed::tokenize;
use crate::error::{Error, Result};
use crate::llm::ChatModel;
use crate::types::GenerationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    Llm,
    Lexical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementSplitter {
    Llm,
    Sentence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeConfig {
    pub kind: JudgeKind,
    /// Chat endpoint for the llm judge; unused by the lexical judge.
    pub endpoint: Option<String>,
    pub model_id: Option<String>,
    /// Content-token recall needed for lexical attribution.
    pub overlap_threshold: f64,
    pub statement_splitter: StatementSplitter,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            kind: JudgeKind::Lexical,
            endpoint: None,
            model_id: None,
            overlap_threshold: 0.6,
            statement_splitter: StatementSplitter::Sentence,
        }
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "judge overlap_threshold must be in (0, 1], got {}",
                self.overlap_threshold
            )));
        }
        if self.kind == JudgeKind::Lexical && self.statement_splitter == StatementSplitter::Llm {
            return Err(Error::InvalidConfig(
                "the lexical judge cannot use the llm statement splitter".into(),
            ));
        }
        if self.kind == JudgeKind::Llm && self.endpoint.is_none() {
            return Err(Error::InvalidConfig("the llm judge needs an endpoint".into()));
        }
        Ok(())
    }

    /// `llm` is required for the llm judge and ignored otherwise.
    pub fn build(&self, llm: Option<Arc<dyn ChatModel>>) -> Result<Box<dyn Judge>> {
        self.validate()?;
        match self.kind {
            JudgeKind::Lexical => Ok(Box::new(LexicalJudge::new(self.overlap_threshold)?)),
            JudgeKind::Llm => {
                let llm = llm.ok_or_else(|| {
                    Error::InvalidConfig("the llm judge needs a chat model".into())
                })?;
                Ok(Box::new(LlmJudge::new(llm, self.statement_splitter)))
            }
        }
    }
}

/// Decisions the metrics delegate.
pub trait Judge: Send + Sync {
    fn kind(&self) -> JudgeKind;

    fn split_statements(&self, text: &str) -> Result<Vec<String>>;

    /// Whether `statement` can be attributed to `evidence`.
    fn is_supported(&self, statement: &str, evidence: &str) -> Result<bool>;

    /// Whether a retrieved context helps produce the ground truth.
    fn is_context_relevant(&self, question: &str, context: &str, ground_truth: &str)
        -> Result<bool>;

    /// Questions the answer would respond to, or `None` when the judge cannot
    /// generate them (lexical fallback).
    fn generate_questions(&self, answer: &str, m: usize) -> Result<Option<Vec<String>>>;
}

static SENTENCE_END_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?]+\s+").unwrap());

pub const MIN_STATEMENT_TOKENS: usize = 3;

/// Splits on terminal punctuation followed by whitespace and drops fragments
/// under three whitespace tokens. If every fragment is dropped, the whole
/// text is one statement.
pub fn split_sentences(text: &str) -> Result<Vec<String>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::EmptyText);
    }
    let mut out = Vec::new();
    let mut last = 0;
    for m in SENTENCE_END_RE.find_iter(text) {
        let end = m.start() + m.as_str().trim_end().len();
        out.push(text[last..end].trim().to_string());
        last = m.end();
    }
    out.push(text[last..].trim().to_string());
    out.retain(|s| s.split_whitespace().count() >= MIN_STATEMENT_TOKENS);
    if out.is_empty() {
        out.push(text.to_string());
    }
    Ok(out)
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "been", "but", "by", "did", "do", "does", "for",
    "from", "had", "has", "have", "he", "her", "his", "i", "in", "into", "is", "it", "its", "of",
    "on", "or", "our", "she", "so", "than", "that", "the", "their", "them", "then", "there",
    "these", "they", "this", "those", "to", "was", "we", "were", "what", "when", "where", "which",
    "who", "whom", "why", "will", "with", "would", "you", "your",
];

/// Distinct lowercase alphanumeric tokens minus English stopwords. Falls back
/// to all tokens when only stopwords remain.
pub fn content_tokens(text: &str) -> HashSet<String> {
    let all: HashSet<String> = tokenize(text).into_iter().collect();
    let content: HashSet<String> = all
        .iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .cloned()
        .collect();
    if content.is_empty() {
        all
    } else {
        content
    }
}

/// Fraction of the statement's content tokens present in the evidence.
pub fn token_recall(statement: &str, evidence: &str) -> f64 {
    let s = content_tokens(statement);
    if s.is_empty() {
        return 0.0;
    }
    let e: HashSet<String> = tokenize(evidence).into_iter().collect();
    s.iter().filter(|t| e.contains(*t)).count() as f64 / s.len() as f64
}

/// Offline judge based on content-token overlap.
#[derive(Debug, Clone)]
pub struct LexicalJudge {
    threshold: f64,
}

impl LexicalJudge {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "overlap threshold must be in (0, 1], got {threshold}"
            )));
        }
        Ok(LexicalJudge { threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Judge for LexicalJudge {
    fn kind(&self) -> JudgeKind {
        JudgeKind::Lexical
    }

    fn split_statements(&self, text: &str) -> Result<Vec<String>> {
        split_sentences(text)
    }

    fn is_supported(&self, statement: &str, evidence: &str) -> Result<bool> {
        Ok(token_recall(statement, evidence) >= self.threshold)
    }

    fn is_context_relevant(&self, _question: &str, context: &str, ground_truth: &str) -> Result<bool> {
        for s in split_sentences(ground_truth)? {
            if self.is_supported(&s, context)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn generate_questions(&self, _answer: &str, _m: usize) -> Result<Option<Vec<String>>> {
        Ok(None)
    }
}

static LIST_MARKER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:[-*•]|\d+[.)])\s*").unwrap());

fn list_lines(raw: &str) -> Vec<String> {
    raw.lines()
        .map(|l| LIST_MARKER_RE.replace(l, "").trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

fn is_yes(raw: &str) -> bool {
    raw.trim_start()
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_ascii_lowercase()
        .starts_with("yes")
}

/// Judge that asks a chat model for each decision.
pub struct LlmJudge {
    llm: Arc<dyn ChatModel>,
    splitter: StatementSplitter,
    params: GenerationParams,
}

impl LlmJudge {
    pub fn new(llm: Arc<dyn ChatModel>, splitter: StatementSplitter) -> Self {
        LlmJudge {
            llm,
            splitter,
            params: GenerationParams {
                max_new_tokens: 256,
                temperature: 0.0,
            },
        }
    }

    fn ask(&self, prompt: &str) -> Result<String> {
        self.llm.complete(prompt, &self.params)
    }
}

impl Judge for LlmJudge {
    fn kind(&self) -> JudgeKind {
        JudgeKind::Llm
    }

    fn split_statements(&self, text: &str) -> Result<Vec<String>> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        if self.splitter == StatementSplitter::Sentence {
            return split_sentences(text);
        }
        let raw = self.ask(&format!(
            "Break the following text into short, self-contained factual statements. \
             Write one statement per line with no numbering and no other text.\n\nText:\n{}\n",
            text.trim()
        ))?;
        let lines = list_lines(&raw);
        if lines.is_empty() {
            split_sentences(text)
        } else {
            Ok(lines)
        }
    }

    fn is_supported(&self, statement: &str, evidence: &str) -> Result<bool> {
        let raw = self.ask(&format!(
            "Context:\n{evidence}\n\nStatement:\n{statement}\n\n\
             Can the statement be directly inferred from the context? Reply with only Yes or No.\n"
        ))?;
        Ok(is_yes(&raw))
    }

    fn is_context_relevant(&self, question: &str, context: &str, ground_truth: &str) -> Result<bool> {
        let raw = self.ask(&format!(
            "Question:\n{question}\n\nReference answer:\n{ground_truth}\n\nRetrieved context:\n{context}\n\n\
             Was this context useful in arriving at the reference answer? Reply with only Yes or No.\n"
        ))?;
        Ok(is_yes(&raw))
    }

    fn generate_questions(&self, answer: &str, m: usize) -> Result<Option<Vec<String>>> {
        let raw = self.ask(&format!(
            "Write {m} different questions that the following answer responds to. \
             One question per line, no numbering, no other text.\n\nAnswer:\n{answer}\n"
        ))?;
        let mut qs = list_lines(&raw);
        qs.truncate(m);
        Ok((!qs.is_empty()).then_some(qs))
    }
}
