//! Named flat-array checkpoints.
//!
//! Two encodings share one logical layout (a JSON header with `meta` and a
//! list of named, shaped sections):
//!
//! * binary: the 8-byte magic `CRSIRLB1`, a little-endian `u64` header
//!   length, the header JSON, then every section's values as little-endian
//!   `f32`, concatenated in section order;
//! * JSON: one document whose sections carry their `values` inline (exact
//!   `f64`), meant for small worlds.
//!
//! [`NamedArrays::load`] accepts either.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

const MAGIC: &[u8; 8] = b"CRSIRLB1";
const BINARY_FORMAT: &str = "crsirl-flat-f32";
const JSON_FORMAT: &str = "crsirl-flat-json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Binary,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

impl Section {
    pub fn new(name: &str, shape: Vec<usize>, values: Vec<f64>) -> Self {
        Section { name: name.to_string(), shape, values }
    }

    fn expected_len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArrays {
    pub meta: Value,
    pub sections: Vec<Section>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    meta: Value,
    sections: Vec<Section>,
}

impl NamedArrays {
    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections.iter().find(|s| s.name == name).ok_or_else(|| Error::Format(format!("missing section {name:?}")))
    }

    pub fn encode(&self, encoding: Encoding) -> Result<Vec<u8>> {
        for s in &self.sections {
            if s.values.len() != s.expected_len() {
                return Err(Error::Format(format!("section {} has wrong length", s.name)));
            }
        }
        match encoding {
            Encoding::Json => {
                let header =
                    Header { format: JSON_FORMAT.into(), meta: self.meta.clone(), sections: self.sections.clone() };
                Ok(serde_json::to_vec(&header)?)
            }
            Encoding::Binary => {
                let header = Header {
                    format: BINARY_FORMAT.into(),
                    meta: self.meta.clone(),
                    sections: self
                        .sections
                        .iter()
                        .map(|s| Section::new(&s.name, s.shape.clone(), Vec::new()))
                        .collect(),
                };
                let head = serde_json::to_vec(&header)?;
                let n: usize = self.sections.iter().map(|s| s.values.len()).sum();
                let mut out = Vec::with_capacity(16 + head.len() + 4 * n);
                out.extend_from_slice(MAGIC);
                out.extend_from_slice(&(head.len() as u64).to_le_bytes());
                out.extend_from_slice(&head);
                for s in &self.sections {
                    for v in &s.values {
                        out.extend_from_slice(&(*v as f32).to_le_bytes());
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(MAGIC) {
            let len_bytes: [u8; 8] = bytes
                .get(8..16)
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| Error::Format("truncated header length".into()))?;
            let head_len = u64::from_le_bytes(len_bytes) as usize;
            let head_end = 16usize
                .checked_add(head_len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| Error::Format("truncated header".into()))?;
            let header: Header = serde_json::from_slice(&bytes[16..head_end])?;
            if header.format != BINARY_FORMAT {
                return Err(Error::Format(format!("unexpected format {:?}", header.format)));
            }
            let mut body = bytes[head_end..].chunks_exact(4);
            let mut sections = Vec::with_capacity(header.sections.len());
            for s in header.sections {
                let n = s.expected_len();
                let mut values = Vec::with_capacity(n);
                for _ in 0..n {
                    let c = body.next().ok_or_else(|| Error::Format(format!("section {} truncated", s.name)))?;
                    values.push(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
                }
                sections.push(Section { values, ..s });
            }
            if body.next().is_some() || !body.remainder().is_empty() {
                return Err(Error::Format("trailing bytes after last section".into()));
            }
            Ok(NamedArrays { meta: header.meta, sections })
        } else {
            let header: Header = serde_json::from_slice(bytes)?;
            if header.format != JSON_FORMAT {
                return Err(Error::Format(format!("unexpected format {:?}", header.format)));
            }
            for s in &header.sections {
                if s.values.len() != s.expected_len() {
                    return Err(Error::Format(format!("section {} has wrong length", s.name)));
                }
            }
            Ok(NamedArrays { meta: header.meta, sections: header.sections })
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        NamedArrays::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(values: Vec<f64>) -> NamedArrays {
        let n = values.len();
        NamedArrays {
            meta: serde_json::json!({"dim": n}),
            sections: vec![Section::new("a", vec![n], values), Section::new("b", vec![1, 1], vec![2.5])],
        }
    }

    proptest! {
        #[test]
        fn both_encodings_decode(values in proptest::collection::vec(-1e3f64..1e3, 0..40)) {
            let a = sample(values.clone());
            let json = NamedArrays::decode(&a.encode(Encoding::Json).unwrap()).unwrap();
            prop_assert_eq!(&json, &a);
            let bin = NamedArrays::decode(&a.encode(Encoding::Binary).unwrap()).unwrap();
            for (x, y) in bin.section("a").unwrap().values.iter().zip(&values) {
                prop_assert_eq!(*x, *y as f32 as f64);
            }
        }
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let bytes = sample(vec![1.0, 2.0]).encode(Encoding::Binary).unwrap();
        assert!(NamedArrays::decode(&bytes[..bytes.len() - 2]).is_err());
        assert!(NamedArrays::decode(&bytes[..12]).is_err());
    }
}
