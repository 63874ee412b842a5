//! Exact cosine-similarity vector index.
//!
//! Vectors live in one contiguous `Vec<f32>` and every search scans all of
//! them. Norms are computed once at insert time, so a query costs one dot
//! product per stored chunk. The index is guarded by a reader-writer lock:
//! searches run concurrently and an upsert batch becomes visible all at once.

mod similarity;
pub mod snapshot;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

pub use similarity::{cosine_similarity, cosine_slices, dot, norm};
use similarity::{checked_sq_norm, cosine_from_parts};

use crate::error::{Error, Result};
use crate::types::{DocumentChunk, EmbeddingVector, SearchHit};

/// Number of chunks handed to the generator as context.
pub const DEFAULT_TOP_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedChunk {
    pub chunk: DocumentChunk,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

/// Metadata predicates applied before ranking. Empty filter matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchFilter {
    pub language: Option<String>,
    pub source: Option<String>,
    /// Keeps chunks whose recording overlaps the range.
    pub time_range: Option<TimeRange>,
}

impl SearchFilter {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = &self.time_range {
            if r.start > r.end {
                return Err(Error::InvalidFilter(format!(
                    "time_range start {} is after end {}",
                    r.start, r.end
                )));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.language.is_none() && self.source.is_none() && self.time_range.is_none()
    }

    pub fn matches(&self, chunk: &DocumentChunk) -> bool {
        let m = &chunk.metadata;
        self.language
            .as_deref()
            .is_none_or(|l| l.eq_ignore_ascii_case(&m.language))
            && self
                .source
                .as_deref()
                .is_none_or(|s| s.eq_ignore_ascii_case(&m.source))
            && self
                .time_range
                .is_none_or(|r| m.start_time <= r.end && m.end_time >= r.start)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpsertStats {
    pub inserted: usize,
    pub replaced: usize,
}

#[derive(Default)]
struct Store {
    vectors: Vec<f32>,
    /// Squared L2 norms.
    norms: Vec<f64>,
    chunks: Vec<DocumentChunk>,
    slots: HashMap<String, usize>,
}

pub struct VectorIndex {
    dim: usize,
    store: RwLock<Store>,
}

/// Score descending, then chunk id ascending.
pub fn hit_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

impl VectorIndex {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("index dim must be positive".into()));
        }
        Ok(VectorIndex {
            dim,
            store: RwLock::new(Store::default()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.store.read().chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, chunk_id: &str) -> Option<DocumentChunk> {
        let store = self.store.read();
        store.slots.get(chunk_id).map(|&i| store.chunks[i].clone())
    }

    /// Inserts or replaces by `chunk_id`. The whole batch is validated first;
    /// any bad item rejects the call and leaves the index untouched.
    pub fn upsert(&self, items: Vec<IndexedChunk>) -> Result<UpsertStats> {
        let mut norms = Vec::with_capacity(items.len());
        for item in &items {
            if item.vector.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: item.vector.dim(),
                });
            }
            norms.push(checked_sq_norm(item.vector.values())?);
        }

        let mut store = self.store.write();
        let mut stats = UpsertStats::default();
        for (item, n) in items.into_iter().zip(norms) {
            let IndexedChunk { chunk, vector } = item;
            match store.slots.get(&chunk.chunk_id).copied() {
                Some(slot) => {
                    let at = slot * self.dim;
                    store.vectors[at..at + self.dim].copy_from_slice(vector.values());
                    store.norms[slot] = n;
                    store.chunks[slot] = chunk;
                    stats.replaced += 1;
                }
                None => {
                    let slot = store.chunks.len();
                    store.vectors.extend_from_slice(vector.values());
                    store.norms.push(n);
                    store.slots.insert(chunk.chunk_id.clone(), slot);
                    store.chunks.push(chunk);
                    stats.inserted += 1;
                }
            }
        }
        Ok(stats)
    }

    /// Top-`k` chunks by cosine similarity among those passing `filter`.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: &SearchFilter,
    ) -> Result<Vec<SearchHit>> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        filter.validate()?;
        let q = query.values();
        let q_norm = checked_sq_norm(q)?;

        let store = self.store.read();
        let unfiltered = filter.is_empty();
        let mut scored: Vec<(f64, usize)> = store
            .vectors
            .chunks_exact(self.dim)
            .zip(&store.norms)
            .enumerate()
            .filter(|(i, _)| unfiltered || filter.matches(&store.chunks[*i]))
            .map(|(i, (v, n))| (cosine_from_parts(dot(q, v), q_norm, *n), i))
            .collect();

        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            hit_order(
                (a.0, &store.chunks[a.1].chunk_id),
                (b.0, &store.chunks[b.1].chunk_id),
            )
        };
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);

        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(r, (score, i))| SearchHit {
                chunk_id: store.chunks[i].chunk_id.clone(),
                score,
                rank: r + 1,
            })
            .collect())
    }

    /// Copies out every entry in insertion order.
    pub fn items(&self) -> Vec<IndexedChunk> {
        let store = self.store.read();
        store
            .chunks
            .iter()
            .zip(store.vectors.chunks_exact(self.dim))
            .map(|(c, v)| IndexedChunk {
                chunk: c.clone(),
                vector: EmbeddingVector::new(v.to_vec()).expect("stored vectors are finite"),
            })
            .collect()
    }

    /// Writes one `{"chunk": ..., "vector": [...]}` object per line.
    pub fn export_jsonl(&self, path: &Path) -> Result<usize> {
        #[derive(Serialize)]
        struct Line<'a> {
            chunk: &'a DocumentChunk,
            vector: &'a [f32],
        }
        let store = self.store.read();
        crate::jsonl::write(
            path,
            store
                .chunks
                .iter()
                .zip(store.vectors.chunks_exact(self.dim))
                .map(|(chunk, vector)| Line { chunk, vector }),
        )
    }

    /// Reads a JSONL export. `dim` is required only when the file may be empty.
    pub fn import_jsonl(path: &Path, dim: Option<usize>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Line {
            chunk: DocumentChunk,
            vector: Vec<f32>,
        }
        let lines: Vec<Line> = crate::jsonl::read(path)?;
        let dim = match (dim, lines.first()) {
            (Some(d), _) => d,
            (None, Some(l)) => l.vector.len(),
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "cannot infer dimension from an empty export".into(),
                ))
            }
        };
        let index = VectorIndex::new(dim)?;
        let items = lines
            .into_iter()
            .map(|l| {
                Ok(IndexedChunk {
                    chunk: l.chunk,
                    vector: EmbeddingVector::new(l.vector)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        index.upsert(items)?;
        Ok(index)
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let bytes = snapshot::encode(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        snapshot::decode(&bytes)
    }

    /// Calls `f` with the stored vectors and chunks while holding the read lock.
    pub(crate) fn with_entries<R>(&self, f: impl FnOnce(&[f32], &[DocumentChunk]) -> R) -> R {
        let store = self.store.read();
        f(&store.vectors, &store.chunks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RecordingMetadata;
    use chrono::TimeZone;

    fn chunk(id: &str, lang: &str, src: &str, day: u32) -> DocumentChunk {
        let t = Utc.with_ymd_and_hms(2016, 1, day, 0, 0, 0).unwrap();
        DocumentChunk {
            chunk_id: format!("{id}#0"),
            doc_id: id.into(),
            ordinal: 0,
            text: id.into(),
            char_span: (0, id.len()),
            metadata: RecordingMetadata {
                recording_id: id.into(),
                language: lang.into(),
                source: src.into(),
                duration_s: 3600.0,
                resolution: None,
                collection: None,
                start_time: t,
                end_time: t + chrono::Duration::hours(1),
            },
        }
    }

    fn item(id: &str, v: &[f32]) -> IndexedChunk {
        IndexedChunk {
            chunk: chunk(id, "en", "CNN", 1),
            vector: EmbeddingVector::new(v.to_vec()).unwrap(),
        }
    }

    fn q(v: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn upsert_replaces_by_key() {
        let idx = VectorIndex::new(2).unwrap();
        let s = idx.upsert(vec![item("a", &[1.0, 0.0])]).unwrap();
        assert_eq!(s, UpsertStats { inserted: 1, replaced: 0 });
        let s = idx.upsert(vec![item("a", &[0.0, 1.0])]).unwrap();
        assert_eq!(s, UpsertStats { inserted: 0, replaced: 1 });
        assert_eq!(idx.len(), 1);
        let hits = idx.search(&q(&[0.0, 1.0]), 4, &SearchFilter::default()).unwrap();
        assert_eq!(hits[0].score, 1.0);
    }

    #[test]
    fn bad_item_rejects_whole_batch() {
        let idx = VectorIndex::new(2).unwrap();
        let err = idx
            .upsert(vec![item("a", &[1.0, 0.0]), item("b", &[1.0, 0.0, 0.0])])
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 3 }));
        assert!(idx.is_empty());
        let err = idx
            .upsert(vec![item("a", &[1.0, 0.0]), item("z", &[0.0, 0.0])])
            .unwrap_err();
        assert!(matches!(err, Error::ZeroVector));
        assert!(idx.is_empty());
    }

    #[test]
    fn single_chunk_single_hit() {
        let idx = VectorIndex::new(2).unwrap();
        idx.upsert(vec![item("a", &[1.0, 1.0])]).unwrap();
        let hits = idx.search(&q(&[1.0, 0.0]), DEFAULT_TOP_K, &SearchFilter::default()).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].rank, 1);
        assert_eq!(hits[0].chunk_id, "a#0");
    }

    #[test]
    fn ties_break_on_chunk_id() {
        let idx = VectorIndex::new(2).unwrap();
        idx.upsert(vec![
            item("c", &[1.0, 0.0]),
            item("a", &[2.0, 0.0]),
            item("b", &[0.5, 0.0]),
            item("d", &[0.0, 1.0]),
        ])
        .unwrap();
        let hits = idx.search(&q(&[1.0, 0.0]), 3, &SearchFilter::default()).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.chunk_id.as_str()).collect();
        assert_eq!(ids, ["a#0", "b#0", "c#0"]);
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn search_errors() {
        let idx = VectorIndex::new(2).unwrap();
        assert!(matches!(
            idx.search(&q(&[0.0, 0.0]), 1, &SearchFilter::default()),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            idx.search(&q(&[1.0]), 1, &SearchFilter::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(idx.search(&q(&[1.0, 0.0]), 0, &SearchFilter::default()).is_err());
        let bad = SearchFilter {
            time_range: Some(TimeRange {
                start: Utc.with_ymd_and_hms(2016, 2, 1, 0, 0, 0).unwrap(),
                end: Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap(),
            }),
            ..Default::default()
        };
        assert!(matches!(
            idx.search(&q(&[1.0, 0.0]), 1, &bad),
            Err(Error::InvalidFilter(_))
        ));
    }

    #[test]
    fn filters() {
        let idx = VectorIndex::new(2).unwrap();
        let mk = |id: &str, lang, src, day, v: [f32; 2]| IndexedChunk {
            chunk: chunk(id, lang, src, day),
            vector: EmbeddingVector::new(v.to_vec()).unwrap(),
        };
        idx.upsert(vec![
            mk("en-cnn", "en", "CNN", 1, [1.0, 0.0]),
            mk("en-fox", "en", "FOX", 5, [0.9, 0.1]),
            mk("fr-tf1", "fr", "TF1", 10, [1.0, 0.01]),
        ])
        .unwrap();
        let run = |f: SearchFilter| -> Vec<String> {
            idx.search(&q(&[1.0, 0.0]), 4, &f)
                .unwrap()
                .into_iter()
                .map(|h| h.chunk_id)
                .collect()
        };
        assert_eq!(run(SearchFilter::default()).len(), 3);
        assert_eq!(
            run(SearchFilter {
                language: Some("EN".into()),
                ..Default::default()
            }),
            ["en-cnn#0", "en-fox#0"]
        );
        assert_eq!(
            run(SearchFilter {
                source: Some("tf1".into()),
                ..Default::default()
            }),
            ["fr-tf1#0"]
        );
        let range = |a, b| TimeRange {
            start: Utc.with_ymd_and_hms(2016, 1, a, 0, 30, 0).unwrap(),
            end: Utc.with_ymd_and_hms(2016, 1, b, 0, 0, 0).unwrap(),
        };
        assert_eq!(
            run(SearchFilter {
                time_range: Some(range(1, 6)),
                ..Default::default()
            }),
            ["en-cnn#0", "en-fox#0"]
        );
        assert!(run(SearchFilter {
            time_range: Some(range(2, 3)),
            ..Default::default()
        })
        .is_empty());
    }

    #[test]
    fn jsonl_export_import() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.jsonl");
        let idx = VectorIndex::new(3).unwrap();
        idx.upsert(vec![
            item("a", &[0.1, 0.2, 0.3]),
            item("b", &[-1.5, 1e-7, 3.25]),
        ])
        .unwrap();
        assert_eq!(idx.export_jsonl(&path).unwrap(), 2);
        let line = std::fs::read_to_string(&path).unwrap();
        let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        assert!(first.get("chunk").is_some() && first["vector"].is_array());
        let back = VectorIndex::import_jsonl(&path, None).unwrap();
        assert_eq!(back.items(), idx.items());

        std::fs::write(&path, "").unwrap();
        assert!(VectorIndex::import_jsonl(&path, None).is_err());
        assert!(VectorIndex::import_jsonl(&path, Some(3)).unwrap().is_empty());
    }
}
