//! Character-based chunking with overlap.
//!
//! Sizes and spans are counted in Unicode scalar values. Each chunk is cut at
//! the latest sentence end that fits the window, else after the latest
//! whitespace, else hard at `max_chars`. Chunks tile the document exactly:
//! the next chunk starts `overlap_chars` before the previous cut.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{format_chunk_id, Document, DocumentChunk};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkPolicy {
    pub max_chars: usize,
    pub overlap_chars: usize,
}

impl Default for ChunkPolicy {
    fn default() -> Self {
        ChunkPolicy {
            max_chars: 1000,
            overlap_chars: 200,
        }
    }
}

impl ChunkPolicy {
    pub fn new(max_chars: usize, overlap_chars: usize) -> Result<Self> {
        let p = ChunkPolicy {
            max_chars,
            overlap_chars,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_chars == 0 {
            return Err(Error::InvalidPolicy("max_chars must be positive".into()));
        }
        if self.overlap_chars >= self.max_chars {
            return Err(Error::InvalidPolicy(format!(
                "overlap_chars {} must be smaller than max_chars {}",
                self.overlap_chars, self.max_chars
            )));
        }
        Ok(())
    }
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Chooses the exclusive end of the chunk starting at `start`.
fn cut_point(chars: &[char], start: usize, policy: &ChunkPolicy) -> usize {
    let n = chars.len();
    let window_end = start + policy.max_chars;
    // The cut must leave room for the overlap so the next chunk advances.
    let min_cut = start + policy.overlap_chars + 1;

    let sentence = (min_cut..=window_end).rev().find(|&p| {
        is_sentence_end(chars[p - 1]) && (p == n || chars[p].is_whitespace())
    });
    if let Some(mut p) = sentence {
        // absorb trailing whitespace so the next chunk starts on a word
        while p < window_end && p < n && chars[p].is_whitespace() {
            p += 1;
        }
        return p;
    }
    if let Some(p) = (min_cut..=window_end)
        .rev()
        .find(|&p| chars[p - 1].is_whitespace())
    {
        return p;
    }
    window_end
}

/// Returns the half-open char spans of the chunks for `text`.
pub fn chunk_spans(text: &str, policy: &ChunkPolicy) -> Result<Vec<(usize, usize)>> {
    policy.validate()?;
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Err(Error::EmptyText);
    }
    let mut spans = Vec::new();
    let mut start = 0;
    loop {
        if n - start <= policy.max_chars {
            spans.push((start, n));
            return Ok(spans);
        }
        let cut = cut_point(&chars, start, policy);
        spans.push((start, cut));
        start = cut - policy.overlap_chars;
    }
}

/// Splits a document into ordered chunks that inherit its metadata.
pub fn split(doc: &Document, policy: &ChunkPolicy) -> Result<Vec<DocumentChunk>> {
    if doc.page_content.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let spans = chunk_spans(&doc.page_content, policy)?;
    // char offset -> byte offset
    let mut byte_at: Vec<usize> = doc.page_content.char_indices().map(|(b, _)| b).collect();
    byte_at.push(doc.page_content.len());

    Ok(spans
        .into_iter()
        .enumerate()
        .map(|(ordinal, (s, e))| DocumentChunk {
            chunk_id: format_chunk_id(&doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            ordinal,
            text: doc.page_content[byte_at[s]..byte_at[e]].to_string(),
            char_span: (s, e),
            metadata: doc.metadata.clone(),
        })
        .collect())
}

/// Rebuilds the parent text from its chunks by dropping each chunk's overlap
/// with its predecessor.
pub fn reconstruct(chunks: &[DocumentChunk]) -> String {
    let mut out = String::new();
    let mut covered: usize = 0;
    for c in chunks {
        let skip = covered.saturating_sub(c.char_span.0);
        out.extend(c.text.chars().skip(skip));
        covered = covered.max(c.char_span.1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RecordingMetadata;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn doc(text: &str) -> Document {
        let t = Utc.with_ymd_and_hms(2016, 3, 1, 12, 0, 0).unwrap();
        Document {
            doc_id: "rec".into(),
            page_content: text.into(),
            metadata: RecordingMetadata {
                recording_id: "rec".into(),
                language: "en".into(),
                source: "CNN".into(),
                duration_s: 0.0,
                resolution: Some("720p".into()),
                collection: None,
                start_time: t,
                end_time: t,
            },
        }
    }

    #[test]
    fn short_document_is_one_chunk() {
        let text = "x".repeat(500);
        let chunks = split(&doc(&text), &ChunkPolicy::default()).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].char_span, (0, 500));
        assert_eq!(chunks[0].chunk_id, "rec#0");
    }

    #[test]
    fn sentence_boundaries_win() {
        let chunks = split(&doc("A. B. C."), &ChunkPolicy::new(3, 0).unwrap()).unwrap();
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.trim()).collect();
        assert_eq!(texts, ["A.", "B.", "C."]);
        let spans: Vec<_> = chunks.iter().map(|c| c.char_span).collect();
        assert_eq!(spans, [(0, 3), (3, 6), (6, 8)]);
    }

    #[test]
    fn whitespace_then_hard_cut() {
        let spans = chunk_spans("aaa bbb", &ChunkPolicy::new(5, 0).unwrap()).unwrap();
        assert_eq!(spans, [(0, 4), (4, 7)]);
        let spans = chunk_spans("abcdefghij", &ChunkPolicy::new(4, 1).unwrap()).unwrap();
        assert_eq!(spans, [(0, 4), (3, 7), (6, 10)]);
    }

    #[test]
    fn overlap_is_exact_between_cut_chunks() {
        let text = "one two three four five six seven eight nine ten eleven twelve";
        let spans = chunk_spans(text, &ChunkPolicy::new(20, 5).unwrap()).unwrap();
        for w in spans.windows(2) {
            assert_eq!(w[0].1 - w[1].0, 5);
        }
    }

    #[test]
    fn invalid_policy() {
        assert!(matches!(
            ChunkPolicy::new(10, 10),
            Err(Error::InvalidPolicy(_))
        ));
        assert!(matches!(ChunkPolicy::new(0, 0), Err(Error::InvalidPolicy(_))));
        let bad = ChunkPolicy {
            max_chars: 5,
            overlap_chars: 9,
        };
        assert!(matches!(split(&doc("abc"), &bad), Err(Error::InvalidPolicy(_))));
    }

    #[test]
    fn multibyte_text_uses_char_offsets() {
        let text = "Überraschung für München. Ça va très bien.";
        let chunks = split(&doc(text), &ChunkPolicy::new(12, 3).unwrap()).unwrap();
        for c in &chunks {
            let expect: String = text
                .chars()
                .skip(c.char_span.0)
                .take(c.char_span.1 - c.char_span.0)
                .collect();
            assert_eq!(c.text, expect);
        }
        assert_eq!(reconstruct(&chunks), text);
    }

    fn arb_text() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop_oneof![
                4 => "[a-zA-Zé]{1,9}",
                1 => Just(". ".to_string()),
                1 => Just("! ".to_string()),
                2 => Just(" ".to_string()),
                1 => Just("\n".to_string()),
            ],
            1..200,
        )
        .prop_map(|parts| parts.concat())
        .prop_filter("non-blank", |s| !s.trim().is_empty())
    }

    fn arb_policy() -> impl Strategy<Value = ChunkPolicy> {
        (1usize..120)
            .prop_flat_map(|max| (Just(max), 0..max))
            .prop_map(|(max_chars, overlap_chars)| ChunkPolicy {
                max_chars,
                overlap_chars,
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn chunks_tile_and_reconstruct(text in arb_text(), policy in arb_policy()) {
            let d = doc(&text);
            let chunks = split(&d, &policy).unwrap();
            let n = text.chars().count();
            prop_assert!(!chunks.is_empty());
            prop_assert_eq!(chunks[0].char_span.0, 0);
            prop_assert_eq!(chunks.last().unwrap().char_span.1, n);
            for (i, c) in chunks.iter().enumerate() {
                prop_assert_eq!(c.ordinal, i);
                prop_assert!(c.char_span.1 > c.char_span.0);
                prop_assert!(c.char_span.1 - c.char_span.0 <= policy.max_chars);
                prop_assert_eq!(&c.metadata, &d.metadata);
            }
            for w in chunks.windows(2) {
                // no gaps, bounded overlap, forward progress
                prop_assert!(w[1].char_span.0 <= w[0].char_span.1);
                prop_assert!(w[0].char_span.1 - w[1].char_span.0 <= policy.overlap_chars);
                prop_assert!(w[1].char_span.0 > w[0].char_span.0);
                prop_assert!(w[1].char_span.1 > w[0].char_span.1);
            }
            prop_assert_eq!(reconstruct(&chunks), text.clone());
            prop_assert_eq!(split(&d, &policy).unwrap(), chunks);
        }
    }
}
