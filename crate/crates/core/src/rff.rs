//! RFF1 feature files.
//!
//! ```text
//! "RFF1"            4 bytes magic
//! header_len        u32 little-endian
//! header            UTF-8 JSON, `header_len` bytes
//! payload           n_samples × n_features values, row-major, little-endian
//!                   f32 or f64 as declared by `dtype`
//! crc32             u32 little-endian, CRC-32 (IEEE) of every preceding byte
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub const MAGIC: &[u8; 4] = b"RFF1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// A named contiguous run of columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpan {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffHeader {
    pub version: u32,
    pub n_samples: usize,
    pub n_features: usize,
    pub dtype: Dtype,
    pub ids: Vec<String>,
    /// Free-form description of what produced the rows.
    pub extractor: String,
    #[serde(default)]
    pub group_layout: Vec<GroupSpan>,
}

/// In-memory contents of an RFF1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub ids: Vec<String>,
    pub extractor: String,
    pub group_layout: Vec<GroupSpan>,
    pub dtype: Dtype,
    pub matrix: FeatureMatrix,
}

impl FeatureFile {
    pub fn new(ids: Vec<String>, matrix: FeatureMatrix, extractor: impl Into<String>) -> Self {
        Self {
            ids,
            extractor: extractor.into(),
            group_layout: Vec::new(),
            dtype: Dtype::F64,
            matrix,
        }
    }

    pub fn with_layout(mut self, layout: Vec<GroupSpan>) -> Self {
        self.group_layout = layout;
        self
    }

    pub fn with_dtype(mut self, dtype: Dtype) -> Self {
        self.dtype = dtype;
        self
    }

    /// Map from sample id to row index.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.ids.len() != self.matrix.rows {
            return Err(format!(
                "{} ids for {} rows",
                self.ids.len(),
                self.matrix.rows
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &self.ids {
            if !seen.insert(id) {
                return Err(format!("duplicate id `{id}`"));
            }
        }
        for g in &self.group_layout {
            if g.offset + g.len > self.matrix.cols {
                return Err(format!("group `{}` exceeds {} columns", g.name, self.matrix.cols));
            }
        }
        Ok(())
    }
}

pub fn write_rff(path: impl AsRef<Path>, file: &FeatureFile) -> Result<()> {
    let path = path.as_ref();
    file.validate().map_err(Error::arg)?;
    let header = RffHeader {
        version: FORMAT_VERSION,
        n_samples: file.matrix.rows,
        n_features: file.matrix.cols,
        dtype: file.dtype,
        ids: file.ids.clone(),
        extractor: file.extractor.clone(),
        group_layout: file.group_layout.clone(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let header_len = u32::try_from(header_json.len())
        .map_err(|_| Error::arg("RFF1 header larger than 4 GiB"))?;

    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
    let mut crc = crc32fast::Hasher::new();
    let mut put = |bytes: &[u8]| -> std::io::Result<()> {
        crc.update(bytes);
        out.write_all(bytes)
    };
    put(MAGIC).map_err(io)?;
    put(&header_len.to_le_bytes()).map_err(io)?;
    put(&header_json).map_err(io)?;
    match file.dtype {
        Dtype::F64 => {
            for v in &file.matrix.data {
                put(&v.to_le_bytes()).map_err(io)?;
            }
        }
        Dtype::F32 => {
            for v in &file.matrix.data {
                put(&(*v as f32).to_le_bytes()).map_err(io)?;
            }
        }
    }
    let checksum = crc.finalize();
    out.write_all(&checksum.to_le_bytes()).map_err(io)?;
    out.flush().map_err(io)?;
    Ok(())
}

pub fn read_rff(path: impl AsRef<Path>) -> Result<FeatureFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(malformed("missing RFF1 magic".into()));
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    if crc32fast::hash(&bytes[..body_len]) != stored {
        return Err(Error::Checksum(path.display().to_string()));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if 8 + header_len > body_len {
        return Err(malformed("header length exceeds file size".into()));
    }
    let header: RffHeader = serde_json::from_slice(&bytes[8..8 + header_len])
        .map_err(|e| malformed(format!("header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Version {
            what: "RFF",
            found: header.version,
            expected: FORMAT_VERSION,
        });
    }
    let payload = &bytes[8 + header_len..body_len];
    let expected = header.n_samples * header.n_features * header.dtype.size();
    if payload.len() != expected {
        return Err(malformed(format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let data: Vec<f64> = match header.dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    let file = FeatureFile {
        ids: header.ids,
        extractor: header.extractor,
        group_layout: header.group_layout,
        dtype: header.dtype,
        matrix: FeatureMatrix::from_vec(header.n_samples, header.n_features, data)?,
    };
    file.validate().map_err(malformed)?;
    Ok(file)
}
