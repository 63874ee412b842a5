//! Transcript ingestion.
//!
//! A transcript file is a block of `KEY: value` header lines followed by
//! caption lines of the form `HH:MM:SS.mmm|HH:MM:SS.mmm|text`, where the
//! timestamps are offsets from the header `START` time. Blank lines are
//! ignored anywhere. Recognised header keys (case-insensitive, long aliases
//! accepted):
//!
//! | key     | alias          | meaning                           |
//! |---------|----------------|-----------------------------------|
//! | `ID`    | `RECORDING_ID` | recording id (required)           |
//! | `LAN`   | `LANGUAGE`     | ISO-639-1 code (required)         |
//! | `SRC`   | `SOURCE`       | channel name (required)           |
//! | `START` | `START_TIME`   | RFC 3339 UTC timestamp (required) |
//! | `END`   | `END_TIME`     | RFC 3339 UTC timestamp            |
//! | `DUR`   | `DURATION`     | seconds                           |
//! | `RES`   | `RESOLUTION`   | e.g. `720p`                       |
//! | `COL`   | `COLLECTION`   | archive collection name           |
//!
//! Unknown header keys are ignored.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use chrono::{DateTime, Duration, Utc};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{validate_metadata, Document, Language, RecordingMetadata};

static HEADER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Za-z][A-Za-z0-9_-]*)\s*:\s?(.*)$").unwrap());
static CAPTION_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\d{2,}):([0-5]\d):([0-5]\d)\.(\d{3})\|(\d{2,}):([0-5]\d):([0-5]\d)\.(\d{3})\|(.*)$")
        .unwrap()
});
// Stage directions such as [APPLAUSE] or [CROSSTALK]: no lowercase inside.
static STAGE_DIRECTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[[^\[\]a-z]*\]").unwrap());
static SPEAKER_MARK_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r">{2,}").unwrap());
static WHITESPACE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

#[derive(Debug, Clone, PartialEq)]
struct Caption {
    start_ms: u64,
    end_ms: u64,
    text: String,
}

/// Removes caption noise: speaker change markers, all-caps bracketed stage
/// directions and repeated whitespace.
pub fn clean_caption_text(raw: &str) -> String {
    let text = STAGE_DIRECTION_RE.replace_all(raw, " ");
    let text = SPEAKER_MARK_RE.replace_all(&text, " ");
    WHITESPACE_RE.replace_all(text.trim(), " ").into_owned()
}

fn offset_ms(caps: &regex::Captures<'_>, first: usize) -> u64 {
    let field = |i: usize| caps[first + i].parse::<u64>().unwrap_or(0);
    ((field(0) * 60 + field(1)) * 60 + field(2)) * 1000 + field(3)
}

#[derive(Default)]
struct Header {
    recording_id: Option<String>,
    language: Option<String>,
    source: Option<String>,
    start_time: Option<DateTime<Utc>>,
    end_time: Option<DateTime<Utc>>,
    duration_s: Option<f64>,
    resolution: Option<String>,
    collection: Option<String>,
}

fn parse_timestamp(line: usize, field: &'static str, value: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(value)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::InvalidHeaderValue {
            line,
            field,
            message: e.to_string(),
        })
}

impl Header {
    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let text = || (!value.is_empty()).then(|| value.to_string());
        match key.to_ascii_uppercase().as_str() {
            "ID" | "RECORDING_ID" => self.recording_id = Some(value.to_string()),
            "LAN" | "LANGUAGE" => self.language = Some(value.to_ascii_lowercase()),
            "SRC" | "SOURCE" => self.source = Some(value.to_string()),
            "START" | "START_TIME" => self.start_time = Some(parse_timestamp(line, "START", value)?),
            "END" | "END_TIME" => self.end_time = Some(parse_timestamp(line, "END", value)?),
            "DUR" | "DURATION" => {
                let d = value.parse::<f64>().map_err(|e| Error::InvalidHeaderValue {
                    line,
                    field: "DUR",
                    message: e.to_string(),
                })?;
                self.duration_s = Some(d);
            }
            "RES" | "RESOLUTION" => self.resolution = text(),
            "COL" | "COLLECTION" => self.collection = text(),
            _ => {}
        }
        Ok(())
    }
}

/// Parses one transcript into a [`Document`] whose `doc_id` is the recording id.
///
/// Captions are ordered by `(start, end, text)` so the output does not depend
/// on line order in the file.
pub fn parse_transcript(raw: &[u8]) -> Result<Document> {
    let text = std::str::from_utf8(raw).map_err(|e| Error::InvalidUtf8 {
        offset: e.valid_up_to(),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut header = Header::default();
    let mut captions = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(caps) = CAPTION_RE.captures(line) {
            let start_ms = offset_ms(&caps, 1);
            let end_ms = offset_ms(&caps, 5);
            if end_ms < start_ms {
                return Err(Error::MalformedLine { line: line_no });
            }
            captions.push(Caption {
                start_ms,
                end_ms,
                text: clean_caption_text(&caps[9]),
            });
        } else if let Some(caps) = HEADER_RE.captures(line) {
            if !captions.is_empty() {
                // header lines must precede all captions
                return Err(Error::MalformedLine { line: line_no });
            }
            header.set(line_no, &caps[1], &caps[2])?;
        } else {
            return Err(Error::MalformedLine { line: line_no });
        }
    }

    let recording_id = header
        .recording_id
        .ok_or(Error::MissingHeaderField("ID"))?;
    let language = header.language.ok_or(Error::MissingHeaderField("LAN"))?;
    let source = header.source.ok_or(Error::MissingHeaderField("SRC"))?;
    let start_time = header.start_time.ok_or(Error::MissingHeaderField("START"))?;

    captions.sort_by(|a, b| {
        (a.start_ms, a.end_ms, &a.text).cmp(&(b.start_ms, b.end_ms, &b.text))
    });
    let last_end_ms = captions.iter().map(|c| c.end_ms).max().unwrap_or(0);
    let page_content = captions
        .iter()
        .map(|c| c.text.as_str())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    if page_content.is_empty() {
        return Err(Error::EmptyTranscript);
    }

    let end_time = header
        .end_time
        .unwrap_or_else(|| start_time + Duration::milliseconds(last_end_ms as i64));
    let duration_s = header
        .duration_s
        .unwrap_or_else(|| (end_time - start_time).num_milliseconds().max(0) as f64 / 1000.0);

    let metadata = RecordingMetadata {
        recording_id: recording_id.clone(),
        language,
        source,
        duration_s,
        resolution: header.resolution,
        collection: header.collection,
        start_time,
        end_time,
    };
    validate_metadata(&metadata).map_err(Error::InvalidMetadata)?;
    Ok(Document {
        doc_id: recording_id,
        page_content,
        metadata,
    })
}

/// One row of the corpus manifest: language, distinct channels, recordings
/// and summed hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub language: Language,
    pub channels: usize,
    pub recordings: usize,
    pub hours: f64,
}

pub const MANIFEST_COLUMNS: [&str; 4] = ["language", "channels", "recordings", "hours"];
pub const HOURS_DEFINITION: &str = "sum of recording duration_s / 3600";

/// Raw-data statistics table for an ingested corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub columns: Vec<String>,
    pub hours_definition: String,
    pub rows: Vec<ManifestRow>,
}

impl CorpusManifest {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut per_lang: BTreeMap<Language, (BTreeSet<&str>, usize, f64)> = BTreeMap::new();
        for doc in docs {
            let Some(lang) = doc.metadata.language() else {
                continue;
            };
            let entry = per_lang.entry(lang).or_default();
            entry.0.insert(doc.metadata.source.as_str());
            entry.1 += 1;
            entry.2 += doc.metadata.duration_s;
        }
        let rows = Language::ALL
            .into_iter()
            .filter_map(|lang| {
                per_lang.get(&lang).map(|(channels, n, secs)| ManifestRow {
                    language: lang,
                    channels: channels.len(),
                    recordings: *n,
                    hours: secs / 3600.0,
                })
            })
            .collect();
        CorpusManifest {
            columns: MANIFEST_COLUMNS.iter().map(|c| c.to_string()).collect(),
            hours_definition: HOURS_DEFINITION.to_string(),
            rows,
        }
    }

    pub fn recordings(&self, lang: Language) -> usize {
        self.rows
            .iter()
            .find(|r| r.language == lang)
            .map_or(0, |r| r.recordings)
    }
}

/// A file that could not be ingested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files_scanned: usize,
    pub documents: Vec<Document>,
    pub manifest: CorpusManifest,
    pub errors: Vec<IngestFailure>,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub language: Option<Language>,
    /// File extensions considered transcripts (case-insensitive).
    pub extensions: Vec<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            language: None,
            extensions: vec!["txt".into()],
        }
    }
}

/// Walks `root`, parses every transcript in parallel and aggregates the
/// results in path order. Per-file failures are recorded and skipped; only
/// a missing or unreadable root is an error.
pub fn ingest_directory(root: &Path, opts: &IngestOptions) -> Result<IngestReport> {
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }

    let mut paths = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) if e.depth() == 0 => {
                return Err(Error::io(root, e.into_io_error().unwrap_or_else(|| {
                    std::io::Error::other("walk failed")
                })))
            }
            Err(e) => {
                tracing::warn!(error = %e, "skipping unreadable entry");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let matches_ext = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|ext| opts.extensions.iter().any(|x| x.eq_ignore_ascii_case(ext)));
        if matches_ext {
            paths.push(entry.into_path());
        }
    }

    let parsed: Vec<(PathBuf, Result<Document>)> = paths
        .par_iter()
        .map(|path| {
            let doc = std::fs::read(path)
                .map_err(|e| Error::io(path, e))
                .and_then(|raw| parse_transcript(&raw));
            (path.clone(), doc)
        })
        .collect();

    let mut documents = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (path, result) in parsed {
        let result = result.and_then(|doc| {
            if seen.insert(doc.doc_id.clone()) {
                Ok(doc)
            } else {
                Err(Error::DuplicateRecording(doc.doc_id))
            }
        });
        match result {
            Ok(doc) => {
                if opts.language.is_none_or(|l| doc.metadata.language() == Some(l)) {
                    documents.push(doc);
                }
            }
            Err(e) => {
                let line = match &e {
                    Error::MalformedLine { line } | Error::InvalidHeaderValue { line, .. } => {
                        Some(*line)
                    }
                    _ => None,
                };
                tracing::warn!(path = %path.display(), code = e.code(), error = %e, "transcript rejected");
                errors.push(IngestFailure {
                    path,
                    line,
                    code: e.code().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }

    Ok(IngestReport {
        files_scanned: paths.len(),
        manifest: CorpusManifest::from_documents(&documents),
        documents,
        errors,
    })
}
