//! Runs an evaluation set through a responder and scores every sample.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chunker::ChunkPolicy;
use crate::embed::Embedder;
use crate::engine::Responder;
use crate::error::{Error, Result};
use crate::types::QAPair;

use super::judge::{Judge, JudgeKind};
use super::metrics::{
    answer_correctness, answer_relevance, context_precision, context_recall, EvalSample,
    DEFAULT_ANSWER_WEIGHT, DEFAULT_GENERATED_QUESTIONS,
};

pub const REPORT_COLUMNS: [&str; 6] = ["model", "setting", "CR", "CP", "AC", "AR"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub answer_weight: f64,
    pub generated_questions: usize,
    pub judge_model_id: Option<String>,
    pub overlap_threshold: f64,
    /// Recorded in the report only.
    pub chunk_policy: Option<ChunkPolicy>,
    pub k: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            answer_weight: DEFAULT_ANSWER_WEIGHT,
            generated_questions: DEFAULT_GENERATED_QUESTIONS,
            judge_model_id: None,
            overlap_threshold: 0.6,
            chunk_policy: None,
            k: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.answer_weight) {
            return Err(Error::InvalidConfig(format!(
                "answer_weight must be in [0, 1], got {}",
                self.answer_weight
            )));
        }
        if self.generated_questions == 0 {
            return Err(Error::InvalidConfig("generated_questions must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub judge_kind: JudgeKind,
    pub judge_model_id: Option<String>,
    pub overlap_threshold: f64,
    pub answer_weight: f64,
    pub generated_questions: usize,
    pub embedder_model: String,
    pub template_version: Option<String>,
    pub chunk_policy: Option<ChunkPolicy>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScores {
    pub cr: Option<f64>,
    pub cp: Option<f64>,
    pub ac: f64,
    pub ar: f64,
    pub ar_degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub index: usize,
    pub model: String,
    pub setting: String,
    pub question: String,
    pub ground_truth: String,
    pub generated_answer: Option<String>,
    pub retrieved_contexts: Vec<String>,
    pub scores: Option<SampleScores>,
    pub error: Option<SampleError>,
}

/// One table row: corpus means over the samples that scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub setting: String,
    #[serde(rename = "CR")]
    pub cr: Option<f64>,
    #[serde(rename = "CP")]
    pub cp: Option<f64>,
    #[serde(rename = "AC")]
    pub ac: Option<f64>,
    #[serde(rename = "AR")]
    pub ar: Option<f64>,
    pub samples: usize,
    pub failed: usize,
    pub ar_degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<SummaryRow>,
    pub samples: Vec<SampleResult>,
}

impl EvalReport {
    /// Appends the rows and samples of another run (e.g. the no-rag setting).
    pub fn merge(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
        self.samples.extend(other.samples);
    }

    /// Plain-text table in column order; null cells print as `-`.
    pub fn render_table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.model.clone(),
                    r.setting.clone(),
                    cell(r.cr),
                    cell(r.cp),
                    cell(r.ac),
                    cell(r.ar),
                ]
            })
            .collect();
        let mut widths = REPORT_COLUMNS.map(str::len);
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", parts.join(" | ").trim_end());
        };
        line(&mut out, &REPORT_COLUMNS);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "{}", rule.join("-|-"));
        for row in &body {
            let cells: Vec<&str> = row.iter().map(String::as_str).collect();
            line(&mut out, &cells);
        }
        out
    }
}

/// Question text for an evaluation pair: the instruction, plus the input when present.
pub fn pair_question(pair: &QAPair) -> String {
    if pair.input.trim().is_empty() {
        pair.instruction.clone()
    } else {
        format!("{}\n{}", pair.instruction, pair.input)
    }
}

pub fn score_sample(
    sample: &EvalSample,
    with_context: bool,
    judge: &dyn Judge,
    embedder: &dyn Embedder,
    cfg: &EvalConfig,
) -> Result<SampleScores> {
    let (cr, cp) = if with_context {
        (
            Some(context_recall(sample, judge)?),
            Some(context_precision(sample, judge)?),
        )
    } else {
        (None, None)
    };
    let ac = answer_correctness(sample, judge, embedder, cfg.answer_weight)?;
    let rel = answer_relevance(sample, judge, embedder, cfg.generated_questions)?;
    Ok(SampleScores {
        cr,
        cp,
        ac,
        ar: rel.score,
        ar_degraded: rel.degraded,
    })
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Answers every pair with `responder` and scores it. Per-sample failures are
/// recorded and the run continues.
pub fn run_eval(
    eval_set: &[QAPair],
    responder: &dyn Responder,
    judge: &dyn Judge,
    embedder: &dyn Embedder,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if eval_set.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    cfg.validate()?;
    let with_context = responder.uses_retrieval();
    let model = responder.model_id().to_string();
    let setting = responder.setting().to_string();

    let results: Vec<(SampleResult, Option<String>)> = eval_set
        .par_iter()
        .enumerate()
        .map(|(index, pair)| {
            let question = pair_question(pair);
            let mut result = SampleResult {
                index,
                model: model.clone(),
                setting: setting.clone(),
                question: question.clone(),
                ground_truth: pair.output.clone(),
                generated_answer: None,
                retrieved_contexts: Vec::new(),
                scores: None,
                error: None,
            };
            let outcome = responder.respond(&question).and_then(|resp| {
                let sample = EvalSample {
                    question: question.clone(),
                    ground_truth: pair.output.clone(),
                    retrieved_contexts: resp.contexts.iter().map(|c| c.text.clone()).collect(),
                    generated_answer: resp.answer.text.clone(),
                };
                result.generated_answer = Some(sample.generated_answer.clone());
                result.retrieved_contexts = sample.retrieved_contexts.clone();
                let scores = score_sample(&sample, with_context, judge, embedder, cfg)?;
                Ok((scores, resp.answer.template_version))
            });
            match outcome {
                Ok((scores, tv)) => {
                    result.scores = Some(scores);
                    (result, Some(tv))
                }
                Err(e) => {
                    tracing::warn!(index, code = e.code(), error = %e, "sample failed");
                    result.error = Some(SampleError {
                        code: e.code().into(),
                        message: e.to_string(),
                    });
                    (result, None)
                }
            }
        })
        .collect();

    let template_version = results.iter().find_map(|(_, tv)| tv.clone());
    let samples: Vec<SampleResult> = results.into_iter().map(|(r, _)| r).collect();
    let scored: Vec<&SampleScores> = samples.iter().filter_map(|s| s.scores.as_ref()).collect();
    let row = SummaryRow {
        model,
        setting,
        cr: mean(scored.iter().map(|s| s.cr)),
        cp: mean(scored.iter().map(|s| s.cp)),
        ac: mean(scored.iter().map(|s| Some(s.ac))),
        ar: mean(scored.iter().map(|s| Some(s.ar))),
        samples: samples.len(),
        failed: samples.len() - scored.len(),
        ar_degraded: scored.iter().any(|s| s.ar_degraded),
    };

    Ok(EvalReport {
        provenance: Provenance {
            judge_kind: judge.kind(),
            judge_model_id: cfg.judge_model_id.clone(),
            overlap_threshold: cfg.overlap_threshold,
            answer_weight: cfg.answer_weight,
            generated_questions: cfg.generated_questions,
            embedder_model: embedder.model_name().to_string(),
            template_version,
            chunk_policy: cfg.chunk_policy,
            k: cfg.k,
        },
        columns: REPORT_COLUMNS.iter().map(|c| c.to_string()).collect(),
        rows: vec![row],
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::DeterministicEmbedder;
    use crate::engine::Response;
    use crate::eval::judge::LexicalJudge;
    use crate::types::{Answer, DocumentChunk, GenerationParams, RecordingMetadata};

    /// Answers with the ground truth and hands it back as the only context.
    struct Oracle {
        truths: Vec<(String, String)>,
        rag: bool,
    }

    fn chunk(text: &str) -> DocumentChunk {
        let t = chrono::DateTime::parse_from_rfc3339("2016-01-01T00:00:00Z")
            .unwrap()
            .with_timezone(&chrono::Utc);
        DocumentChunk {
            chunk_id: "r#0".into(),
            doc_id: "r".into(),
            ordinal: 0,
            text: text.into(),
            char_span: (0, text.chars().count()),
            metadata: RecordingMetadata {
                recording_id: "r".into(),
                language: "en".into(),
                source: "s".into(),
                duration_s: 1.0,
                resolution: None,
                collection: None,
                start_time: t,
                end_time: t + chrono::Duration::seconds(1),
            },
        }
    }

    impl Responder for Oracle {
        fn respond(&self, question: &str) -> Result<Response> {
            let gt = self
                .truths
                .iter()
                .find(|(q, _)| q == question)
                .map(|(_, a)| a.clone())
                .ok_or(Error::EmptyAnswer)?;
            Ok(Response {
                answer: Answer {
                    text: gt.clone(),
                    sources: vec![],
                    query: question.into(),
                    model_id: "oracle".into(),
                    template_version: "t/1".into(),
                    generation: GenerationParams::default(),
                },
                contexts: if self.rag { vec![chunk(&gt)] } else { vec![] },
            })
        }
        fn model_id(&self) -> &str {
            "oracle"
        }
        fn setting(&self) -> &str {
            if self.rag {
                "rag"
            } else {
                "no rag"
            }
        }
        fn uses_retrieval(&self) -> bool {
            self.rag
        }
    }

    fn pair(q: &str, a: &str) -> QAPair {
        QAPair {
            instruction: q.into(),
            input: String::new(),
            output: a.into(),
            language: "en".into(),
            source_recording_id: None,
        }
    }

    fn set() -> (Vec<QAPair>, Vec<(String, String)>) {
        let pairs = vec![
            pair("Who won the Ohio primary?", "Senator Adams won the Ohio primary comfortably."),
            pair("What closed the bridge?", "Heavy flooding closed the river bridge overnight."),
        ];
        let truths = pairs.iter().map(|p| (p.instruction.clone(), p.output.clone())).collect();
        (pairs, truths)
    }

    #[test]
    fn perfect_oracle_scores_one() {
        let (pairs, truths) = set();
        let e = DeterministicEmbedder::new(128).unwrap();
        let j = LexicalJudge::new(0.6).unwrap();
        let r = run_eval(&pairs, &Oracle { truths, rag: true }, &j, &e, &EvalConfig::default())
            .unwrap();
        let row = &r.rows[0];
        assert_eq!((row.cr, row.cp, row.ac), (Some(1.0), Some(1.0), Some(1.0)));
        assert_eq!(row.failed, 0);
        assert!(row.ar_degraded);
        assert_eq!(r.columns, REPORT_COLUMNS);
        assert_eq!(r.provenance.template_version.as_deref(), Some("t/1"));
    }

    #[test]
    fn no_rag_leaves_context_metrics_null() {
        let (pairs, truths) = set();
        let e = DeterministicEmbedder::new(128).unwrap();
        let j = LexicalJudge::new(0.6).unwrap();
        let r = run_eval(&pairs, &Oracle { truths, rag: false }, &j, &e, &EvalConfig::default())
            .unwrap();
        assert_eq!((r.rows[0].cr, r.rows[0].cp), (None, None));
        let json = serde_json::to_value(&r.rows[0]).unwrap();
        assert!(json["CR"].is_null() && json["CP"].is_null());
        let table = r.render_table();
        let last = table.lines().last().unwrap();
        let cells: Vec<&str> = last.split('|').map(str::trim).collect();
        assert_eq!(cells[..4], ["oracle", "no rag", "-", "-"]);
        assert!(table.starts_with("model"));
    }

    #[test]
    fn failures_are_recorded() {
        let (mut pairs, truths) = set();
        pairs.push(pair("Unknown?", "Nobody knows the answer here."));
        let e = DeterministicEmbedder::new(128).unwrap();
        let j = LexicalJudge::new(0.6).unwrap();
        let r = run_eval(&pairs, &Oracle { truths, rag: true }, &j, &e, &EvalConfig::default())
            .unwrap();
        assert_eq!(r.rows[0].failed, 1);
        assert_eq!(r.samples[2].error.as_ref().unwrap().code, "EMPTY_ANSWER");
        assert_eq!(r.rows[0].ac, Some(1.0));
    }

    #[test]
    fn single_sample_mean_is_that_sample() {
        let (pairs, truths) = set();
        let e = DeterministicEmbedder::new(128).unwrap();
        let j = LexicalJudge::new(0.6).unwrap();
        let r = run_eval(&pairs[..1], &Oracle { truths, rag: true }, &j, &e, &EvalConfig::default())
            .unwrap();
        let s = r.samples[0].scores.as_ref().unwrap();
        assert_eq!(r.rows[0].ar, Some(s.ar));
        assert_eq!(r.rows[0].ac, Some(s.ac));
    }

    #[test]
    fn empty_set_is_rejected() {
        let e = DeterministicEmbedder::new(8).unwrap();
        let j = LexicalJudge::new(0.6).unwrap();
        let o = Oracle { truths: vec![], rag: true };
        assert!(matches!(
            run_eval(&[], &o, &j, &e, &EvalConfig::default()),
            Err(Error::EmptyEvalSet)
        ));
    }
}
