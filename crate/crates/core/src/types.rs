//! Shared domain types.
//!
//! Everything here is an immutable value object with a canonical snake_case
//! JSON encoding; the file formats and the HTTP API are built from these
//! encodings directly.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five transcript languages the corpus keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Es,
    Fr,
    De,
    Pt,
}

impl Language {
    /// Reporting order: English, Spanish, French, German, Portuguese.
    pub const ALL: [Language; 5] = [
        Language::En,
        Language::Es,
        Language::Fr,
        Language::De,
        Language::Pt,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Es => "es",
            Language::Fr => "fr",
            Language::De => "de",
            Language::Pt => "pt",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::En => "English",
            Language::Es => "Spanish",
            Language::Fr => "French",
            Language::De => "German",
            Language::Pt => "Portuguese",
        }
    }

    pub fn from_code(code: &str) -> Option<Language> {
        Language::ALL
            .into_iter()
            .find(|l| l.code().eq_ignore_ascii_case(code.trim()))
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Language::from_code(s)
            .ok_or_else(|| Error::InvalidConfig(format!("unsupported language {s:?}")))
    }
}

/// Provenance record for one broadcast recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMetadata {
    pub recording_id: String,
    /// ISO-639-1 code. Kept as a string so unsupported codes can be reported
    /// by [`validate_metadata`] instead of failing deserialization.
    pub language: String,
    pub source: String,
    pub duration_s: f64,
    #[serde(default)]
    pub resolution: Option<String>,
    #[serde(default)]
    pub collection: Option<String>,
    pub start_time: DateTime<Utc>,
    pub end_time: DateTime<Utc>,
}

impl RecordingMetadata {
    pub fn language(&self) -> Option<Language> {
        Language::from_code(&self.language)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    EmptyId,
    UnsupportedLanguage,
    EndBeforeStart,
    InvalidDuration,
    DurationMismatch,
    DuplicateId,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptyId => "EMPTY_ID",
            ViolationCode::UnsupportedLanguage => "UNSUPPORTED_LANGUAGE",
            ViolationCode::EndBeforeStart => "END_BEFORE_START",
            ViolationCode::InvalidDuration => "INVALID_DURATION",
            ViolationCode::DurationMismatch => "DURATION_MISMATCH",
            ViolationCode::DuplicateId => "DUPLICATE_ID",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Violation {
            code,
            message: message.into(),
        }
    }
}

/// Allowed gap between `duration_s` and the timestamp span.
pub const DURATION_TOLERANCE_S: f64 = 1.0;

/// Checks every per-record invariant and reports all violations at once.
pub fn validate_metadata(m: &RecordingMetadata) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if m.recording_id.trim().is_empty() {
        violations.push(Violation::new(
            ViolationCode::EmptyId,
            "recording_id is empty",
        ));
    }
    if m.language().is_none() {
        violations.push(Violation::new(
            ViolationCode::UnsupportedLanguage,
            format!("language {:?} is not one of en, es, fr, de, pt", m.language),
        ));
    }
    if m.end_time < m.start_time {
        violations.push(Violation::new(
            ViolationCode::EndBeforeStart,
            format!("end_time {} precedes start_time {}", m.end_time, m.start_time),
        ));
    }
    if !m.duration_s.is_finite() || m.duration_s < 0.0 {
        violations.push(Violation::new(
            ViolationCode::InvalidDuration,
            format!("duration_s {} is not a non-negative number", m.duration_s),
        ));
    } else if m.end_time >= m.start_time {
        let span = (m.end_time - m.start_time).num_milliseconds() as f64 / 1000.0;
        if (span - m.duration_s).abs() > DURATION_TOLERANCE_S {
            violations.push(Violation::new(
                ViolationCode::DurationMismatch,
                format!("duration_s {} differs from timestamp span {span}s", m.duration_s),
            ));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Corpus-level check: recording ids must be unique.
pub fn validate_corpus<'a>(
    records: impl IntoIterator<Item = &'a RecordingMetadata>,
) -> Vec<Violation> {
    let mut seen = HashSet::new();
    let mut violations = Vec::new();
    for m in records {
        if !seen.insert(m.recording_id.as_str()) {
            violations.push(Violation::new(
                ViolationCode::DuplicateId,
                format!("recording_id {:?} appears more than once", m.recording_id),
            ));
        }
    }
    violations
}

/// One transcript: cleaned text plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub page_content: String,
    pub metadata: RecordingMetadata,
}

/// Formats `{doc_id}#{ordinal}`.
pub fn format_chunk_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}#{ordinal}")
}

/// Inverse of [`format_chunk_id`]; splits on the last `#`.
pub fn parse_chunk_id(chunk_id: &str) -> Result<(&str, usize)> {
    let bad = || Error::InvalidChunkId(chunk_id.to_string());
    let (doc, ord) = chunk_id.rsplit_once('#').ok_or_else(bad)?;
    if ord.is_empty() || !ord.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    Ok((doc, ord.parse().map_err(|_| bad())?))
}

/// A contiguous slice of a document's text, the unit of embedding and retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    /// Half-open `(start, end)` offsets into the parent `page_content`,
    /// counted in Unicode scalar values.
    pub char_span: (usize, usize),
    pub metadata: RecordingMetadata,
}

/// Dense embedding. The dimension is the length of `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVector", into = "RawVector")]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct RawVector {
    values: Vec<f32>,
    dim: usize,
}

impl TryFrom<RawVector> for EmbeddingVector {
    type Error = String;

    fn try_from(raw: RawVector) -> std::result::Result<Self, String> {
        if raw.values.len() != raw.dim {
            return Err(format!(
                "dim {} does not match {} values",
                raw.dim,
                raw.values.len()
            ));
        }
        EmbeddingVector::new(raw.values).map_err(|e| e.to_string())
    }
}

impl From<EmbeddingVector> for RawVector {
    fn from(v: EmbeddingVector) -> Self {
        RawVector {
            dim: v.values.len(),
            values: v.values,
        }
    }
}

impl EmbeddingVector {
    /// Rejects empty and non-finite input. All-zero vectors are representable;
    /// they are rejected where similarity is computed.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteVector);
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Multiplies every component by `c`.
    pub fn scaled(&self, c: f32) -> Result<Self> {
        EmbeddingVector::new(self.values.iter().map(|v| v * c).collect())
    }
}

/// Alpaca-style instruction record with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub instruction: String,
    #[serde(default)]
    pub input: String,
    pub output: String,
    pub language: String,
    #[serde(default)]
    pub source_recording_id: Option<String>,
}

impl QAPair {
    pub fn validate(&self) -> Result<()> {
        if self.instruction.trim().is_empty() {
            return Err(Error::EmptyQuestion);
        }
        if self.output.trim().is_empty() {
            return Err(Error::EmptyAnswer);
        }
        if Language::from_code(&self.language).is_none() {
            return Err(Error::InvalidConfig(format!(
                "unsupported language {:?}",
                self.language
            )));
        }
        Ok(())
    }
}

/// One retrieved chunk with its cosine score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Decoding parameters sent with every chat request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_new_tokens: u32,
    pub temperature: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            max_new_tokens: 512,
            temperature: 0.0,
        }
    }
}

/// A generated answer together with the chunks it was conditioned on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub sources: Vec<SearchHit>,
    pub query: String,
    pub model_id: String,
    pub template_version: String,
    pub generation: GenerationParams,
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn meta(id: &str, lang: &str, dur: f64, span_s: i64) -> RecordingMetadata {
        let start = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
        RecordingMetadata {
            recording_id: id.into(),
            language: lang.into(),
            source: "CNN".into(),
            duration_s: dur,
            resolution: None,
            collection: None,
            start_time: start,
            end_time: start + chrono::Duration::seconds(span_s),
        }
    }

    fn codes(r: Result<(), Vec<Violation>>) -> Vec<ViolationCode> {
        r.err()
            .unwrap_or_default()
            .into_iter()
            .map(|v| v.code)
            .collect()
    }

    #[test]
    fn zero_duration_is_legal() {
        assert!(validate_metadata(&meta("r1", "en", 0.0, 0)).is_ok());
    }

    #[test]
    fn empty_id_is_reported() {
        assert_eq!(
            codes(validate_metadata(&meta("", "en", 0.0, 0))),
            vec![ViolationCode::EmptyId]
        );
    }

    #[test]
    fn italian_is_unsupported() {
        assert_eq!(
            codes(validate_metadata(&meta("r1", "it", 0.0, 0))),
            vec![ViolationCode::UnsupportedLanguage]
        );
    }

    #[test]
    fn all_violations_are_collected() {
        let mut m = meta("", "xx", 5.0, 10);
        m.end_time = m.start_time - chrono::Duration::seconds(1);
        let got = codes(validate_metadata(&m));
        assert_eq!(
            got,
            vec![
                ViolationCode::EmptyId,
                ViolationCode::UnsupportedLanguage,
                ViolationCode::EndBeforeStart
            ]
        );
    }

    #[test]
    fn duration_tolerance_is_one_second() {
        assert!(validate_metadata(&meta("r", "fr", 60.9, 60)).is_ok());
        assert_eq!(
            codes(validate_metadata(&meta("r", "fr", 62.5, 60))),
            vec![ViolationCode::DurationMismatch]
        );
        assert_eq!(
            codes(validate_metadata(&meta("r", "fr", -1.0, 0))),
            vec![ViolationCode::InvalidDuration]
        );
    }

    #[test]
    fn corpus_duplicates() {
        let a = meta("a", "en", 0.0, 0);
        let b = meta("b", "en", 0.0, 0);
        let v = validate_corpus([&a, &b, &a]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::DuplicateId);
    }

    #[test]
    fn violation_codes_serialize_screaming() {
        let json = serde_json::to_string(&ViolationCode::UnsupportedLanguage).unwrap();
        assert_eq!(json, "\"UNSUPPORTED_LANGUAGE\"");
    }

    #[test]
    fn chunk_id_rejects_garbage() {
        assert!(parse_chunk_id("nohash").is_err());
        assert!(parse_chunk_id("doc#").is_err());
        assert!(parse_chunk_id("doc#-1").is_err());
        assert_eq!(parse_chunk_id("a#b#3").unwrap(), ("a#b", 3));
    }

    #[test]
    fn embedding_json_carries_dim() {
        let v = EmbeddingVector::new(vec![1.0, 2.0]).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"values":[1.0,2.0],"dim":2}"#);
        assert!(serde_json::from_str::<EmbeddingVector>(r#"{"values":[1.0],"dim":2}"#).is_err());
        assert!(EmbeddingVector::new(vec![f32::NAN]).is_err());
    }

    #[test]
    fn metadata_json_is_snake_case() {
        let json = serde_json::to_value(meta("r1", "en", 0.0, 0)).unwrap();
        for key in [
            "recording_id",
            "language",
            "source",
            "duration_s",
            "resolution",
            "collection",
            "start_time",
            "end_time",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    fn arb_text() -> impl Strategy<Value = String> {
        "[ -~]{0,40}"
    }

    fn arb_meta() -> impl Strategy<Value = RecordingMetadata> {
        (
            arb_text(),
            prop::sample::select(vec!["en", "es", "fr", "de", "pt", "it"]),
            arb_text(),
            0u32..100_000,
            proptest::option::of(arb_text()),
            proptest::option::of(arb_text()),
            0i64..2_000_000_000,
            0i64..100_000,
        )
            .prop_map(|(id, lang, src, dur, res, col, start, span)| {
                let start_time = Utc.timestamp_opt(start, 0).unwrap();
                RecordingMetadata {
                    recording_id: id,
                    language: lang.into(),
                    source: src,
                    duration_s: dur as f64 / 4.0,
                    resolution: res,
                    collection: col,
                    start_time,
                    end_time: start_time + chrono::Duration::seconds(span),
                }
            })
    }

    proptest! {
        #[test]
        fn chunk_id_round_trip(doc in "[^#]{0,30}", ord in 0usize..1_000_000) {
            let id = format_chunk_id(&doc, ord);
            let (d, o) = parse_chunk_id(&id).unwrap();
            prop_assert_eq!(d, doc.as_str());
            prop_assert_eq!(o, ord);
        }

        #[test]
        fn types_round_trip_through_json(
            m in arb_meta(),
            text in arb_text(),
            vals in prop::collection::vec(-1e6f32..1e6, 1..16),
            score in -1.0f64..1.0,
        ) {
            let doc = Document { doc_id: m.recording_id.clone(), page_content: text.clone(), metadata: m.clone() };
            let back: Document = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
            prop_assert_eq!(&back, &doc);

            let chunk = DocumentChunk {
                chunk_id: format_chunk_id(&doc.doc_id, 3),
                doc_id: doc.doc_id.clone(),
                ordinal: 3,
                text: text.clone(),
                char_span: (1, 1 + text.chars().count()),
                metadata: m.clone(),
            };
            let back: DocumentChunk = serde_json::from_str(&serde_json::to_string(&chunk).unwrap()).unwrap();
            prop_assert_eq!(&back, &chunk);

            let v = EmbeddingVector::new(vals).unwrap();
            let back: EmbeddingVector = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
            prop_assert_eq!(&back, &v);

            let pair = QAPair {
                instruction: text.clone(),
                input: String::new(),
                output: m.source.clone(),
                language: m.language.clone(),
                source_recording_id: Some(m.recording_id.clone()),
            };
            let back: QAPair = serde_json::from_str(&serde_json::to_string(&pair).unwrap()).unwrap();
            prop_assert_eq!(&back, &pair);

            let answer = Answer {
                text,
                sources: vec![SearchHit { chunk_id: chunk.chunk_id.clone(), score, rank: 1 }],
                query: m.recording_id.clone(),
                model_id: "m".into(),
                template_version: "t".into(),
                generation: GenerationParams::default(),
            };
            let back: Answer = serde_json::from_str(&serde_json::to_string(&answer).unwrap()).unwrap();
            prop_assert_eq!(&back, &answer);
        }
    }
}
