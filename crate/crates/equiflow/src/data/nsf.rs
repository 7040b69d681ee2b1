//! NSF sample container: a small binary framing for named arrays.
//!
//! Layout: magic "NSRF" (4 bytes), version u32 LE, header_len u64 LE, UTF-8
//! JSON header { fields: [{name, dtype, shape}], meta }, then the raw arrays
//! little-endian row-major in header order. Declared byte lengths must match
//! the payload exactly and reads round-trip bitwise.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

pub const NSF_MAGIC: [u8; 4] = *b"NSRF";
pub const NSF_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum NsfData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I64(Vec<i64>),
}

impl NsfData {
    pub fn dtype(&self) -> &'static str {
        match self {
            NsfData::F32(_) => "f32",
            NsfData::F64(_) => "f64",
            NsfData::I64(_) => "i64",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            NsfData::F32(v) => v.len(),
            NsfData::F64(v) => v.len(),
            NsfData::I64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte_len(&self) -> usize {
        match self {
            NsfData::F32(v) => v.len() * 4,
            NsfData::F64(v) => v.len() * 8,
            NsfData::I64(v) => v.len() * 8,
        }
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            NsfData::F32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            NsfData::F64(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            NsfData::I64(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsfField {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: NsfData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsfFile {
    pub fields: Vec<NsfField>,
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct HeaderField {
    name: String,
    dtype: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    fields: Vec<HeaderField>,
    meta: serde_json::Value,
}

impl NsfFile {
    pub fn field(&self, name: &str) -> Option<&NsfField> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, DataError> {
        for f in &self.fields {
            let expect: usize = f.shape.iter().product();
            if expect != f.data.len() {
                return Err(DataError::ShapeMismatch {
                    what: f.name.clone(),
                    expected: expect,
                    got: f.data.len(),
                });
            }
        }
        let header = Header {
            fields: self
                .fields
                .iter()
                .map(|f| HeaderField {
                    name: f.name.clone(),
                    dtype: f.data.dtype().to_string(),
                    shape: f.shape.clone(),
                })
                .collect(),
            meta: self.meta.clone(),
        };
        let header_json = serde_json::to_vec(&header).map_err(DataError::Json)?;
        let mut out = Vec::new();
        out.extend_from_slice(&NSF_MAGIC);
        out.extend_from_slice(&NSF_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_json);
        for f in &self.fields {
            f.data.write_to(&mut out);
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        let bytes = self.to_bytes()?;
        let mut file = std::fs::File::create(path)?;
        file.write_all(&bytes)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<NsfFile, DataError> {
        if bytes.len() < 16 {
            return Err(DataError::TruncatedPayload { needed: 16, got: bytes.len() });
        }
        if bytes[0..4] != NSF_MAGIC {
            return Err(DataError::BadMagic(bytes[0..4].to_vec()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != NSF_VERSION {
            return Err(DataError::VersionUnsupported(version));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if bytes.len() < 16 + header_len {
            return Err(DataError::TruncatedPayload { needed: 16 + header_len, got: bytes.len() });
        }
        let header: Header = serde_json::from_slice(&bytes[16..16 + header_len])
            .map_err(DataError::Json)?;
        let mut offset = 16 + header_len;
        let mut fields = Vec::with_capacity(header.fields.len());
        for hf in &header.fields {
            let n: usize = hf.shape.iter().product();
            let width = match hf.dtype.as_str() {
                "f32" => 4,
                "f64" | "i64" => 8,
                other => return Err(DataError::UnknownDtype(other.to_string())),
            };
            let need = n * width;
            if bytes.len() < offset + need {
                return Err(DataError::TruncatedPayload {
                    needed: offset + need,
                    got: bytes.len(),
                });
            }
            let raw = &bytes[offset..offset + need];
            let data = match hf.dtype.as_str() {
                "f32" => NsfData::F32(
                    raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
                ),
                "f64" => NsfData::F64(
                    raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
                ),
                _ => NsfData::I64(
                    raw.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect(),
                ),
            };
            fields.push(NsfField { name: hf.name.clone(), shape: hf.shape.clone(), data });
            offset += need;
        }
        if offset != bytes.len() {
            return Err(DataError::ShapeMismatch {
                what: "trailing bytes after declared payload".into(),
                expected: offset,
                got: bytes.len(),
            });
        }
        Ok(NsfFile { fields, meta: header.meta })
    }

    pub fn read(path: &Path) -> Result<NsfFile, DataError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        NsfFile::from_bytes(&bytes)
    }
}
