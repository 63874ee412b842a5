//! Self-Instruct QA-pair generation.
//!
//! Each transcript is sent to a chat model with instructions to produce a
//! fixed number of numbered `Q:`/`A:` blocks. Responses are parsed leniently
//! (malformed blocks are dropped and counted), pairs are de-duplicated by
//! normalized question text, and the result is written as Alpaca JSONL.

use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::ChatModel;
use crate::types::{Document, GenerationParams, Language, QAPair};

pub const PROMPT_VERSION: &str = "selfinstruct-qa/1";
pub const DEFAULT_TARGET_PAIRS: usize = 10;
pub const MAX_TARGET_PAIRS: usize = 50;
pub const DEDUP_RULE: &str = "lowercase, strip punctuation, collapse whitespace; first occurrence wins";

static QUESTION_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:\d+\s*[.)]\s*)?(?:\*\*)?(?:Q|Question)\s*(?:\*\*)?\s*:\s*(?:\*\*)?\s*(.*)$")
        .unwrap()
});
static ANSWER_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:\*\*)?(?:A|Answer)\s*(?:\*\*)?\s*:\s*(?:\*\*)?\s*(.*)$").unwrap()
});

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationJob {
    pub document: Document,
    pub target_pairs: usize,
    pub prompt_version: String,
    pub model_id: String,
}

impl GenerationJob {
    pub fn validate(&self) -> Result<()> {
        if self.target_pairs == 0 {
            return Err(Error::InvalidConfig("target_pairs must be positive".into()));
        }
        if self.target_pairs > MAX_TARGET_PAIRS {
            return Err(Error::TooManyPairs(self.target_pairs));
        }
        if self.document.page_content.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(())
    }
}

fn language_name(code: &str) -> &'static str {
    Language::from_code(code).map_or("the transcript's language", Language::name)
}

/// Builds the generation prompt. Pure function of the content, language and `n`.
pub fn build_selfinstruct_prompt(doc: &Document, n: usize) -> String {
    let lang = language_name(&doc.metadata.language);
    format!(
        "You are preparing instruction-tuning data from a broadcast news transcript.\n\
         Write exactly {n} question and answer pairs about the transcript below.\n\
         \n\
         Requirements:\n\
         - Every question must be answerable from the transcript alone.\n\
         - Answers must be detailed and conversational, the way a news reporter would explain the story to a viewer.\n\
         - Together the {n} pairs must give comprehensive coverage of the transcript without repetition: no two questions may ask about the same fact.\n\
         - Write both questions and answers in {lang}.\n\
         \n\
         Output format: exactly {n} numbered blocks and nothing else. Each block is a question line followed by an answer line:\n\
         1. Q: <question>\n\
         A: <answer>\n\
         \n\
         Transcript:\n\
         \"\"\"\n\
         {content}\n\
         \"\"\"\n",
        content = doc.page_content
    )
}

/// Parsed model output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPairs {
    pub pairs: Vec<QAPair>,
    /// Blocks that started with a question but never produced a usable answer.
    pub dropped: usize,
}

#[derive(Default)]
struct Block {
    question: Vec<String>,
    answer: Option<Vec<String>>,
}

impl Block {
    fn finish(self, doc: &Document, out: &mut ParsedPairs) {
        let question = self.question.join(" ").trim().to_string();
        let answer = self
            .answer
            .map(|a| a.join("\n").trim().to_string())
            .unwrap_or_default();
        if question.is_empty() || answer.is_empty() {
            out.dropped += 1;
            return;
        }
        out.pairs.push(QAPair {
            instruction: question,
            input: String::new(),
            output: answer,
            language: doc.metadata.language.clone(),
            source_recording_id: Some(doc.metadata.recording_id.clone()),
        });
    }
}

/// Extracts numbered `Q:`/`A:` blocks. Text before the first question is
/// ignored; lines after a `Q:` or `A:` continue that field.
pub fn parse_qa_response(raw: &str, doc: &Document) -> Result<ParsedPairs> {
    let mut out = ParsedPairs {
        pairs: Vec::new(),
        dropped: 0,
    };
    let mut current: Option<Block> = None;
    for line in raw.lines() {
        if let Some(c) = QUESTION_RE.captures(line) {
            if let Some(b) = current.take() {
                b.finish(doc, &mut out);
            }
            current = Some(Block {
                question: vec![c[1].trim().to_string()],
                answer: None,
            });
            continue;
        }
        let Some(block) = current.as_mut() else {
            continue;
        };
        if block.answer.is_none() {
            if let Some(c) = ANSWER_RE.captures(line) {
                block.answer = Some(vec![c[1].trim().to_string()]);
                continue;
            }
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match block.answer.as_mut() {
            Some(a) => a.push(line.to_string()),
            None => block.question.push(line.to_string()),
        }
    }
    if let Some(b) = current {
        b.finish(doc, &mut out);
    }
    if out.pairs.is_empty() {
        return Err(Error::NoPairsFound);
    }
    Ok(out)
}

/// Renders pairs in the response grammar `parse_qa_response` reads.
pub fn render_qa_grammar(pairs: &[QAPair]) -> String {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{}. Q: {}\nA: {}\n", i + 1, p.instruction, p.output))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Lowercase, punctuation removed, whitespace collapsed.
pub fn normalize_instruction(s: &str) -> String {
    s.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Drops pairs whose normalized instruction was already seen. Stable.
pub fn dedup_pairs(pairs: Vec<QAPair>) -> Vec<QAPair> {
    let mut seen = HashSet::new();
    pairs
        .into_iter()
        .filter(|p| seen.insert(normalize_instruction(&p.instruction)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaGenConfig {
    pub target_pairs: usize,
    /// Documents in flight at once.
    pub concurrency: usize,
    /// Recordings starting at or after this instant go to the evaluation split.
    pub eval_from: Option<DateTime<Utc>>,
    pub generation: GenerationParams,
}

impl Default for QaGenConfig {
    fn default() -> Self {
        QaGenConfig {
            target_pairs: DEFAULT_TARGET_PAIRS,
            concurrency: 4,
            eval_from: None,
            generation: GenerationParams {
                max_new_tokens: 2048,
                temperature: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentFailure {
    pub doc_id: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub fine_tune: Vec<QAPair>,
    pub evaluation: Vec<QAPair>,
    pub failures: Vec<DocumentFailure>,
    pub dropped_blocks: usize,
    pub duplicates_removed: usize,
    pub manifest: DatasetManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub language: Language,
    pub fine_tune: usize,
    pub evaluation: usize,
}

pub const DATASET_COLUMNS: [&str; 3] = ["language", "fine_tune", "evaluation"];

/// Per-language pair counts plus the settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub columns: Vec<String>,
    pub rows: Vec<DatasetRow>,
    pub prompt_version: String,
    pub model_id: String,
    pub target_pairs: usize,
    pub dedup_rule: String,
}

impl DatasetManifest {
    pub fn from_splits(
        fine_tune: &[QAPair],
        evaluation: &[QAPair],
        model_id: &str,
        target_pairs: usize,
    ) -> Self {
        let mut counts: BTreeMap<Language, (usize, usize)> = BTreeMap::new();
        for p in fine_tune {
            if let Some(l) = Language::from_code(&p.language) {
                counts.entry(l).or_default().0 += 1;
            }
        }
        for p in evaluation {
            if let Some(l) = Language::from_code(&p.language) {
                counts.entry(l).or_default().1 += 1;
            }
        }
        // English, French, Spanish, German, Portuguese
        let order = [Language::En, Language::Fr, Language::Es, Language::De, Language::Pt];
        DatasetManifest {
            columns: DATASET_COLUMNS.iter().map(|c| c.to_string()).collect(),
            rows: order
                .into_iter()
                .filter_map(|l| {
                    counts.get(&l).map(|&(f, e)| DatasetRow {
                        language: l,
                        fine_tune: f,
                        evaluation: e,
                    })
                })
                .collect(),
            prompt_version: PROMPT_VERSION.into(),
            model_id: model_id.into(),
            target_pairs,
            dedup_rule: DEDUP_RULE.into(),
        }
    }
}

/// Generates pairs for one document.
pub fn generate_for_job(
    job: &GenerationJob,
    llm: &dyn ChatModel,
    params: &GenerationParams,
) -> Result<ParsedPairs> {
    job.validate()?;
    let prompt = build_selfinstruct_prompt(&job.document, job.target_pairs);
    let raw = llm.complete(&prompt, params)?;
    parse_qa_response(&raw, &job.document)
}

/// Runs generation over a corpus. Per-document failures are recorded and the
/// run continues.
pub fn generate_corpus(
    docs: &[Document],
    llm: &dyn ChatModel,
    cfg: &QaGenConfig,
) -> Result<GenerationReport> {
    if cfg.target_pairs == 0 || cfg.target_pairs > MAX_TARGET_PAIRS {
        return Err(Error::TooManyPairs(cfg.target_pairs));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let results: Vec<Result<ParsedPairs>> = pool.install(|| {
        docs.par_iter()
            .map(|doc| {
                let job = GenerationJob {
                    document: doc.clone(),
                    target_pairs: cfg.target_pairs,
                    prompt_version: PROMPT_VERSION.into(),
                    model_id: llm.model_id().into(),
                };
                generate_for_job(&job, llm, &cfg.generation)
            })
            .collect()
    });

    let mut fine_tune = Vec::new();
    let mut evaluation = Vec::new();
    let mut failures = Vec::new();
    let mut dropped_blocks = 0;
    for (doc, result) in docs.iter().zip(results) {
        match result {
            Ok(parsed) => {
                dropped_blocks += parsed.dropped;
                let held_out = cfg.eval_from.is_some_and(|t| doc.metadata.start_time >= t);
                if held_out {
                    evaluation.extend(parsed.pairs);
                } else {
                    fine_tune.extend(parsed.pairs);
                }
            }
            Err(e) => {
                tracing::warn!(doc_id = %doc.doc_id, code = e.code(), error = %e, "generation failed");
                failures.push(DocumentFailure {
                    doc_id: doc.doc_id.clone(),
                    code: e.code().into(),
                    message: e.to_string(),
                });
            }
        }
    }
    let before = fine_tune.len() + evaluation.len();
    let fine_tune = dedup_pairs(fine_tune);
    // a question already in the fine-tune split must not leak into evaluation
    let seen: HashSet<String> = fine_tune
        .iter()
        .map(|p| normalize_instruction(&p.instruction))
        .collect();
    let evaluation: Vec<QAPair> = dedup_pairs(evaluation)
        .into_iter()
        .filter(|p| !seen.contains(&normalize_instruction(&p.instruction)))
        .collect();
    let duplicates_removed = before - fine_tune.len() - evaluation.len();

    Ok(GenerationReport {
        manifest: DatasetManifest::from_splits(
            &fine_tune,
            &evaluation,
            llm.model_id(),
            cfg.target_pairs,
        ),
        fine_tune,
        evaluation,
        failures,
        dropped_blocks,
        duplicates_removed,
    })
}
