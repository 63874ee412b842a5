//! Context recall, context precision, answer correctness and answer relevance.
//!
//! All four land in `[0, 1]`; negative cosines are clipped to zero.

use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::index::cosine_similarity;

use super::judge::Judge;

pub const DEFAULT_ANSWER_WEIGHT: f64 = 0.75;
pub const DEFAULT_GENERATED_QUESTIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSample {
    pub question: String,
    pub ground_truth: String,
    /// Rank order.
    pub retrieved_contexts: Vec<String>,
    pub generated_answer: String,
}

/// Share of ground-truth statements attributable to at least one context.
/// No contexts means nothing is recalled.
pub fn context_recall(sample: &EvalSample, judge: &dyn Judge) -> Result<f64> {
    if sample.ground_truth.trim().is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    if sample.retrieved_contexts.is_empty() {
        return Ok(0.0);
    }
    let statements = judge.split_statements(&sample.ground_truth)?;
    let mut attributed = 0usize;
    for s in &statements {
        for ctx in &sample.retrieved_contexts {
            if judge.is_supported(s, ctx)? {
                attributed += 1;
                break;
            }
        }
    }
    Ok(attributed as f64 / statements.len() as f64)
}

/// `sum_k(P@k * v_k) / max(1, sum_k v_k)` with `P@k = (sum_{i<=k} v_i) / k`.
pub fn context_precision_from_flags(flags: &[bool]) -> f64 {
    let mut relevant = 0usize;
    let mut acc = 0.0;
    for (i, &v) in flags.iter().enumerate() {
        if v {
            relevant += 1;
            acc += relevant as f64 / (i + 1) as f64;
        }
    }
    acc / relevant.max(1) as f64
}

/// Rank-weighted share of relevant contexts.
pub fn context_precision(sample: &EvalSample, judge: &dyn Judge) -> Result<f64> {
    if sample.ground_truth.trim().is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let flags = sample
        .retrieved_contexts
        .iter()
        .map(|c| judge.is_context_relevant(&sample.question, c, &sample.ground_truth))
        .collect::<Result<Vec<_>>>()?;
    Ok(context_precision_from_flags(&flags))
}

/// Statement-level counts behind answer correctness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl StatementCounts {
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

/// `w * F1 + (1 - w) * max(0, semantic)`.
pub fn answer_correctness_from_parts(counts: StatementCounts, semantic: f64, w: f64) -> f64 {
    (w * counts.f1() + (1.0 - w) * semantic.max(0.0)).clamp(0.0, 1.0)
}

pub fn statement_counts(sample: &EvalSample, judge: &dyn Judge) -> Result<StatementCounts> {
    let answer = judge.split_statements(&sample.generated_answer)?;
    let truth = judge.split_statements(&sample.ground_truth)?;
    let mut tp = 0;
    for s in &answer {
        if judge.is_supported(s, &sample.ground_truth)? {
            tp += 1;
        }
    }
    let mut fn_ = 0;
    for s in &truth {
        if !judge.is_supported(s, &sample.generated_answer)? {
            fn_ += 1;
        }
    }
    Ok(StatementCounts {
        tp,
        fp: answer.len() - tp,
        fn_,
    })
}

pub fn answer_correctness(
    sample: &EvalSample,
    judge: &dyn Judge,
    embedder: &dyn Embedder,
    w: f64,
) -> Result<f64> {
    if sample.generated_answer.trim().is_empty() || sample.ground_truth.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let counts = statement_counts(sample, judge)?;
    let semantic = cosine_similarity(
        &embedder.embed_text(&sample.generated_answer)?,
        &embedder.embed_text(&sample.ground_truth)?,
    )?;
    Ok(answer_correctness_from_parts(counts, semantic, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relevance {
    pub score: f64,
    /// Computed from answer/question similarity because the judge could not
    /// generate questions.
    pub degraded: bool,
}

/// Mean clipped cosine between the question and `m` questions generated from
/// the answer; falls back to question/answer cosine for the lexical judge.
pub fn answer_relevance(
    sample: &EvalSample,
    judge: &dyn Judge,
    embedder: &dyn Embedder,
    m: usize,
) -> Result<Relevance> {
    if sample.generated_answer.trim().is_empty() {
        return Err(Error::EmptyAnswer);
    }
    let q = embedder.embed_text(&sample.question)?;
    match judge.generate_questions(&sample.generated_answer, m.max(1))? {
        Some(questions) => {
            let mut total = 0.0;
            for gq in &questions {
                total += cosine_similarity(&q, &embedder.embed_text(gq)?)?.max(0.0);
            }
            Ok(Relevance {
                score: total / questions.len() as f64,
                degraded: false,
            })
        }
        None => Ok(Relevance {
            score: cosine_similarity(&q, &embedder.embed_text(&sample.generated_answer)?)?
                .max(0.0),
            degraded: true,
        }),
    }
}
