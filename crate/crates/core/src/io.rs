//! Little-endian binary helpers shared by the cache and checkpoint formats.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: bad magic, expected {expected:?}, found {found:?}")]
    BadMagic {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: truncated, expected {expected} bytes, found {actual}")]
    Truncated {
        path: String,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FormatError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|e| FormatError::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| FormatError::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

/// Cursor over a byte buffer that reports truncation against the total
/// size the header promised.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    label: String,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], label: impl Into<String>) -> Self {
        ByteReader {
            buf,
            pos: 0,
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<(), FormatError> {
        if self.buf.len() < 4 {
            return Err(self.truncated(4));
        }
        let found = &self.buf[..4];
        if found != magic {
            return Err(FormatError::BadMagic {
                path: self.label.clone(),
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        self.pos = 4;
        Ok(())
    }

    fn truncated(&self, expected: usize) -> FormatError {
        FormatError::Truncated {
            path: self.label.clone(),
            expected,
            actual: self.buf.len(),
        }
    }

    /// Fails unless `n` more bytes are available.
    pub fn require(&self, n: usize) -> Result<(), FormatError> {
        let need = self.pos.saturating_add(n);
        if need > self.buf.len() {
            Err(self.truncated(need))
        } else {
            Ok(())
        }
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        self.require(n)?;
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f32(&mut self) -> Result<f32, FormatError> {
        let b = self.bytes(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>, FormatError> {
        let b = self.bytes(n.checked_mul(4).ok_or_else(|| self.invalid("size overflow"))?)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn invalid(&self, msg: impl Into<String>) -> FormatError {
        FormatError::Invalid {
            path: self.label.clone(),
            msg: msg.into(),
        }
    }

    /// Fails if unread bytes remain.
    pub fn finish(self) -> Result<(), FormatError> {
        if self.pos != self.buf.len() {
            return Err(FormatError::Invalid {
                path: self.label,
                msg: format!(
                    "{} trailing bytes after payload",
                    self.buf.len() - self.pos
                ),
            });
        }
        Ok(())
    }
}

#[derive(Default)]
pub struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn magic(&mut self, m: &[u8; 4]) {
        self.buf.extend_from_slice(m);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32s(&mut self, vs: &[f32]) {
        self.buf.reserve(vs.len() * 4);
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
}

pub(crate) fn label_of(path: &Path) -> String {
    path.display().to_string()
}

/// `dir/stem.ext`
pub fn cache_path(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}

pub(crate) fn u32_len(n: usize, what: &str) -> Result<u32, FormatError> {
    u32::try_from(n).map_err(|_| FormatError::Invalid {
        path: String::new(),
        msg: format!("{what} {n} does not fit in u32"),
    })
}

/// Reads a JSON sidecar (vocabularies, model metadata).
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| FormatError::Invalid {
        path: label_of(path),
        msg: e.to_string(),
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| FormatError::Invalid {
        path: label_of(path),
        msg: e.to_string(),
    })?;
    s.push('\n');
    write_file(path, s.as_bytes())
}
