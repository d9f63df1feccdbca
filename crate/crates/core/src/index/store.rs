//! Binary index file.
//!
//! Layout (little endian):
//!
//! ```text
//! b"ENIX" | u32 header_len | header JSON | entries...
//! entry := u32 id_len | id bytes | dim x f64 values
//! ```
//!
//! The header is `{format_version, embedder_id, dim, count, dtype}`. Values
//! are widened to `f64`, which is exact for both supported dtypes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, EmbeddedIndexEntry, EmbeddingVector, Index, IndexError};
use crate::scalar::Scalar;

pub const INDEX_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"ENIX";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    embedder_id: String,
    dim: usize,
    count: usize,
    dtype: String,
}

pub(super) fn save<T: Scalar>(index: &Index<T>, path: &Path) -> Result<(), IndexError> {
    let io = |e| IndexError::io(path, e);
    let header = Header {
        format_version: INDEX_FORMAT_VERSION,
        embedder_id: index.embedder_id.clone(),
        dim: index.dim,
        count: index.entries.len(),
        dtype: T::DTYPE.to_string(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");

    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&(header.len() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&header).map_err(io)?;
    for e in &index.entries {
        out.write_all(&(e.article_id.len() as u32).to_le_bytes()).map_err(io)?;
        out.write_all(e.article_id.as_bytes()).map_err(io)?;
        for v in e.vector.values() {
            out.write_all(&v.as_f64().to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32, IndexError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| truncated(path, e))?;
    Ok(u32::from_le_bytes(buf))
}

fn truncated(path: &Path, e: std::io::Error) -> IndexError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        IndexError::Format(format!("{}: truncated index file", path.display()))
    } else {
        IndexError::io(path, e)
    }
}

pub(super) fn load<T: Scalar>(path: &Path, corpus: &Corpus) -> Result<Index<T>, IndexError> {
    let mut r = BufReader::new(File::open(path).map_err(|e| IndexError::io(path, e))?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| truncated(path, e))?;
    if &magic != MAGIC {
        return Err(IndexError::Format(format!("{}: not an index file", path.display())));
    }
    let header_len = read_u32(&mut r, path)? as usize;
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header).map_err(|e| truncated(path, e))?;
    let header: Header =
        serde_json::from_slice(&header).map_err(|e| IndexError::Format(format!("bad index header: {e}")))?;
    if header.format_version != INDEX_FORMAT_VERSION {
        return Err(IndexError::Format(format!("unsupported index version {}", header.format_version)));
    }
    if header.dtype != T::DTYPE {
        return Err(IndexError::Format(format!("index dtype {} does not match {}", header.dtype, T::DTYPE)));
    }

    let mut entries = Vec::with_capacity(header.count);
    let mut buf = [0u8; 8];
    for _ in 0..header.count {
        let id_len = read_u32(&mut r, path)? as usize;
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id).map_err(|e| truncated(path, e))?;
        let article_id = String::from_utf8(id).map_err(|_| IndexError::Format("article id is not UTF-8".into()))?;
        let mut values = Vec::with_capacity(header.dim);
        for _ in 0..header.dim {
            r.read_exact(&mut buf).map_err(|e| truncated(path, e))?;
            values.push(T::from_f64_lossy(f64::from_le_bytes(buf)));
        }
        let vector = EmbeddingVector::from_unit(values)?;
        entries.push(EmbeddedIndexEntry { article_id, vector });
    }
    if r.read(&mut buf).map_err(|e| IndexError::io(path, e))? != 0 {
        return Err(IndexError::Format(format!("{}: trailing bytes after last entry", path.display())));
    }
    Index::from_entries(header.embedder_id, header.dim, entries, corpus)
}
