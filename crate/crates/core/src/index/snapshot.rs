//! Binary snapshot format, all integers little-endian:
//!
//! ```text
//! magic    4 bytes  "NRVI"
//! version  u32      1
//! dim      u32
//! count    u64
//! count x record:
//!   len     u32     byte length of the chunk JSON
//!   chunk   len     canonical JSON of the DocumentChunk
//!   vector  dim x f32
//! crc32    u32      CRC-32 (IEEE) of every preceding byte
//! ```

use crate::error::{Error, Result};
use crate::types::{DocumentChunk, EmbeddingVector};

use super::{IndexedChunk, VectorIndex};

pub const MAGIC: &[u8; 4] = b"NRVI";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;
const CHECKSUM_LEN: usize = 4;

pub fn encode(index: &VectorIndex) -> Result<Vec<u8>> {
    let dim = index.dim();
    let dim_u32 = u32::try_from(dim)
        .map_err(|_| Error::InvalidConfig(format!("dimension {dim} too large for snapshot")))?;
    index.with_entries(|vectors, chunks| {
        let mut out = Vec::with_capacity(HEADER_LEN + chunks.len() * (dim * 4 + 512));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&dim_u32.to_le_bytes());
        out.extend_from_slice(&(chunks.len() as u64).to_le_bytes());
        for (chunk, vector) in chunks.iter().zip(vectors.chunks_exact(dim)) {
            let json = serde_json::to_vec(chunk).map_err(|e| Error::json("snapshot chunk", e))?;
            let len = u32::try_from(json.len())
                .map_err(|_| Error::InvalidConfig("chunk payload exceeds 4 GiB".into()))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(&json);
            for x in vector {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptSnapshot(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<VectorIndex> {
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(Error::CorruptSnapshot(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::CorruptSnapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let (body, tail) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::CorruptSnapshot(format!(
            "checksum mismatch (stored {stored:08x}, computed {actual:08x})"
        )));
    }

    let mut r = Reader { buf: body, pos: 8 };
    let dim = r.u32()? as usize;
    let count = r.u64()?;
    if dim == 0 {
        return Err(Error::CorruptSnapshot("zero dimension".into()));
    }
    // each record needs at least its length prefix and vector
    let min_record = 4 + dim * 4;
    if count > (body.len() / min_record) as u64 {
        return Err(Error::CorruptSnapshot(format!(
            "count {count} does not fit in {} bytes",
            body.len()
        )));
    }

    let mut items = Vec::with_capacity(count as usize);
    for i in 0..count {
        let len = r.u32()? as usize;
        let chunk: DocumentChunk = serde_json::from_slice(r.take(len)?)
            .map_err(|e| Error::CorruptSnapshot(format!("record {i}: {e}")))?;
        let values = r
            .take(dim * 4)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let vector = EmbeddingVector::new(values)
            .map_err(|e| Error::CorruptSnapshot(format!("record {i}: {e}")))?;
        items.push(IndexedChunk { chunk, vector });
    }
    if r.pos != body.len() {
        return Err(Error::CorruptSnapshot(format!(
            "{} trailing bytes",
            body.len() - r.pos
        )));
    }

    let index = VectorIndex::new(dim)?;
    index.upsert(items).map_err(|e| match e {
        Error::ZeroVector | Error::DimensionMismatch { .. } => {
            Error::CorruptSnapshot(e.to_string())
        }
        other => other,
    })?;
    if index.len() as u64 != count {
        return Err(Error::CorruptSnapshot("duplicate chunk ids".into()));
    }
    Ok(index)
}
