//! Retrieval and answer quality metrics.

pub mod judge;
pub mod metrics;
pub mod runner;

pub use judge::{
    split_sentences, Judge, JudgeConfig, JudgeKind, LexicalJudge, LlmJudge, StatementSplitter,
};
pub use metrics::{
    answer_correctness, answer_correctness_from_parts, answer_relevance, context_precision,
    context_precision_from_flags, context_recall, statement_counts, EvalSample, Relevance,
    StatementCounts, DEFAULT_ANSWER_WEIGHT, DEFAULT_GENERATED_QUESTIONS,
};
pub use runner::{
    pair_question, run_eval, score_sample, EvalConfig, EvalReport, Provenance, SampleError,
    SampleResult, SampleScores, SummaryRow, REPORT_COLUMNS,
};
