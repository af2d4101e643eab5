//! Named parameter layouts over flat vectors.

use crate::checkpoint::{NamedArrays, Section};
use crate::error::{Error, Result};
use serde_json::Value;

/// Name and shape of one parameter block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamBlock {
    pub fn new(name: &str, shape: &[usize]) -> Self {
        ParamBlock { name: name.to_string(), shape: shape.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits `values` into named sections following `blocks`.
pub fn to_arrays(blocks: &[ParamBlock], values: &[f64], meta: Value) -> NamedArrays {
    let mut offset = 0;
    let sections = blocks
        .iter()
        .map(|b| {
            let s = Section::new(&b.name, b.shape.clone(), values[offset..offset + b.len()].to_vec());
            offset += b.len();
            s
        })
        .collect();
    NamedArrays { meta, sections }
}

/// Reassembles a flat vector, checking every block's name and shape.
pub fn from_arrays(blocks: &[ParamBlock], arrays: &NamedArrays) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(blocks.iter().map(ParamBlock::len).sum());
    for b in blocks {
        let s = arrays.section(&b.name)?;
        if s.shape != b.shape {
            return Err(Error::Format(format!("section {} has shape {:?}, expected {:?}", b.name, s.shape, b.shape)));
        }
        out.extend_from_slice(&s.values);
    }
    if !out.iter().all(|x| x.is_finite()) {
        return Err(Error::Numeric("non-finite parameter in checkpoint".into()));
    }
    Ok(out)
}
