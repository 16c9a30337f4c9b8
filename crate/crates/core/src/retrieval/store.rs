//! JSON Lines persistence for [`UserMemory`].
//!
//! ```text
//! {"format":"exact-index","version":1,"user_id":"u1","dim":64,"library_hash":"…","entries":2}
//! {"prompt":"…","embedding":[…],"attributes":[1,2],"gains":[1.0,0.9],"objective":1.9,"seq":0,"pair_ids":["p1"]}
//! …
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::memory::{IndexEntry, UserMemory};
use super::RetrievalError;
use crate::attribute::{AttributeId, AttributeSubset};

pub const INDEX_FORMAT: &str = "exact-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    user_id: String,
    dim: usize,
    library_hash: Option<String>,
    entries: usize,
}

#[derive(Serialize, Deserialize)]
struct EntryLine {
    prompt: String,
    embedding: Vec<f32>,
    attributes: Vec<AttributeId>,
    #[serde(default)]
    gains: Vec<f64>,
    objective: f64,
    seq: u64,
    #[serde(default)]
    pair_ids: Vec<String>,
}

fn corrupt(line: usize, reason: impl Into<String>) -> RetrievalError {
    RetrievalError::CorruptIndex { line, reason: reason.into() }
}

pub fn write_memory<W: Write>(memory: &UserMemory, mut out: W) -> Result<(), RetrievalError> {
    let header = Header {
        format: INDEX_FORMAT.into(),
        version: INDEX_VERSION,
        user_id: memory.user_id.clone(),
        dim: memory.dim,
        library_hash: memory.library_hash.clone(),
        entries: memory.len(),
    };
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for e in memory.entries() {
        let line = EntryLine {
            prompt: e.prompt.clone(),
            embedding: e.embedding.clone(),
            attributes: e.subset.members.clone(),
            gains: e.subset.gains.clone(),
            objective: e.objective,
            seq: e.seq,
            pair_ids: e.pair_ids.clone(),
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_memory<R: Read>(input: R) -> Result<UserMemory, RetrievalError> {
    let mut reader = BufReader::new(input);
    let mut buf = String::new();
    let mut line_no = 0;
    let mut next_line = |buf: &mut String| -> Result<Option<usize>, RetrievalError> {
        buf.clear();
        line_no += 1;
        if reader.read_line(buf)? == 0 {
            return Ok(None);
        }
        if !buf.ends_with('\n') {
            return Err(corrupt(line_no, "line is not newline-terminated (truncated file?)"));
        }
        Ok(Some(line_no))
    };

    let Some(first) = next_line(&mut buf)? else {
        return Err(corrupt(1, "missing header"));
    };
    let header: Header = serde_json::from_str(&buf).map_err(|e| corrupt(first, format!("bad header: {e}")))?;
    if header.format != INDEX_FORMAT {
        return Err(corrupt(first, format!("unknown format {:?}", header.format)));
    }
    if header.version != INDEX_VERSION {
        return Err(corrupt(first, format!("unsupported version {}", header.version)));
    }

    let mut entries = Vec::with_capacity(header.entries);
    while let Some(n) = next_line(&mut buf)? {
        let line: EntryLine = serde_json::from_str(&buf).map_err(|e| corrupt(n, e.to_string()))?;
        if line.embedding.len() != header.dim {
            return Err(corrupt(
                n,
                format!("embedding has {} dimensions, header says {}", line.embedding.len(), header.dim),
            ));
        }
        entries.push((
            n,
            IndexEntry {
                prompt: line.prompt,
                embedding: line.embedding,
                subset: AttributeSubset { members: line.attributes, gains: line.gains },
                objective: line.objective,
                seq: line.seq,
                pair_ids: line.pair_ids,
            },
        ));
    }
    if entries.len() != header.entries {
        return Err(corrupt(
            first,
            format!("header announces {} entries, file holds {}", header.entries, entries.len()),
        ));
    }
    let lines: Vec<usize> = entries.iter().map(|(n, _)| *n).collect();
    let memory = UserMemory::from_entries_unchecked(
        header.user_id,
        header.dim,
        header.library_hash,
        entries.into_iter().map(|(_, e)| e).collect(),
    );
    memory
        .validate()
        .map_err(|(i, reason)| corrupt(lines.get(i).copied().unwrap_or(first), reason))?;
    Ok(memory)
}

/// Writes via a temporary file in the target directory and renames it into place.
pub fn save_memory(memory: &UserMemory, path: &Path) -> Result<(), RetrievalError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write_memory(memory, std::io::BufWriter::new(tmp.as_file_mut()))?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| RetrievalError::Io(e.error))?;
    Ok(())
}

pub fn load_memory(path: &Path) -> Result<UserMemory, RetrievalError> {
    read_memory(fs::File::open(path)?)
}
