//! Synthetic corpora shared by the benchmarks.

use chrono::{Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use newsrag::index::{IndexedChunk, VectorIndex};
use newsrag::{format_chunk_id, Document, DocumentChunk, EmbeddingVector, RecordingMetadata};

const WORDS: &[&str] = &[
    "the", "senator", "said", "tonight", "storm", "market", "shares", "fell", "police", "report",
    "county", "election", "voters", "weather", "rain", "study", "drug", "patients", "officials",
    "announced", "bridge", "closed", "traffic", "morning", "president", "campaign", "court",
];

pub fn metadata(recording_id: &str, language: &str, hour: i64) -> RecordingMetadata {
    let start = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap() + Duration::hours(hour);
    RecordingMetadata {
        recording_id: recording_id.into(),
        language: language.into(),
        source: "CNN".into(),
        duration_s: 3600.0,
        resolution: None,
        collection: None,
        start_time: start,
        end_time: start + Duration::hours(1),
    }
}

/// Caption-like text of roughly `chars` characters.
pub fn transcript_text(rng: &mut StdRng, chars: usize) -> String {
    let mut s = String::with_capacity(chars + 16);
    while s.len() < chars {
        let n = rng.gen_range(6..18);
        for i in 0..n {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(WORDS[rng.gen_range(0..WORDS.len())]);
        }
        s.push_str(". ");
    }
    s.truncate(s.trim_end().len());
    s
}

pub fn document(seed: u64, chars: usize) -> Document {
    let mut rng = StdRng::seed_from_u64(seed);
    Document {
        doc_id: format!("rec-{seed}"),
        page_content: transcript_text(&mut rng, chars),
        metadata: metadata(&format!("rec-{seed}"), "en", seed as i64),
    }
}

pub fn random_vector(rng: &mut StdRng, dim: usize) -> EmbeddingVector {
    EmbeddingVector::new((0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
        .expect("finite and non-empty")
}

/// `n` random unit-free vectors; every tenth recording is French.
pub fn random_index(n: usize, dim: usize, seed: u64) -> VectorIndex {
    let mut rng = StdRng::seed_from_u64(seed);
    let index = VectorIndex::new(dim).expect("positive dim");
    let items = (0..n)
        .map(|i| {
            let doc = format!("rec-{:06}", i / 8);
            let lang = if (i / 8) % 10 == 0 { "fr" } else { "en" };
            IndexedChunk {
                chunk: DocumentChunk {
                    chunk_id: format_chunk_id(&doc, i % 8),
                    doc_id: doc.clone(),
                    ordinal: i % 8,
                    text: String::new(),
                    char_span: (0, 0),
                    metadata: metadata(&doc, lang, (i / 8) as i64),
                },
                vector: random_vector(&mut rng, dim),
            }
        })
        .collect();
    index.upsert(items).expect("valid synthetic items");
    index
}
