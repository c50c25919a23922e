//! Field files: an 8-byte magic, a little-endian `u64` header length, a JSON
//! header describing the grid, then the node values as little-endian `f64`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{ReducedGrid, SymmetryConfig};

pub const FIELD_MAGIC: &[u8; 8] = b"NSFIELD\x01";
pub const FIELD_SCHEMA: &str = "normsol.field/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub schema: String,
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "M")]
    pub block: usize,
    pub sector: crate::grid::Sector,
    pub n: Vec<usize>,
    #[serde(rename = "L")]
    pub len: f64,
}

impl FieldHeader {
    pub fn of(grid: &ReducedGrid) -> Self {
        Self {
            schema: FIELD_SCHEMA.to_string(),
            dim: grid.config.dim,
            block: grid.config.block,
            sector: grid.config.sector,
            n: grid.shape(),
            len: grid.len,
        }
    }

    pub fn grid(&self) -> Result<ReducedGrid> {
        let config = SymmetryConfig {
            dim: self.dim,
            block: self.block,
            sector: self.sector,
        };
        config.validate()?;
        ReducedGrid::new(config, &self.n, self.len)
    }
}

pub fn field_to_bytes(u: &Field) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&FieldHeader::of(u.grid()))?;
    let mut out = Vec::with_capacity(16 + header.len() + 8 * u.values().len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<Field> {
    let bad = |msg: &str| Error::Format(msg.to_string());
    if bytes.len() < 16 || &bytes[..8] != FIELD_MAGIC {
        return Err(bad("not a field file"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..).ok_or_else(|| bad("truncated header"))?;
    if body.len() < hlen {
        return Err(bad("truncated header"));
    }
    let header: FieldHeader = serde_json::from_slice(&body[..hlen])?;
    if header.schema != FIELD_SCHEMA {
        return Err(Error::Format(format!("unsupported field schema '{}'", header.schema)));
    }
    let grid = Arc::new(header.grid()?);
    let data = &body[hlen..];
    if data.len() != 8 * grid.len_nodes() {
        return Err(Error::Format(format!(
            "expected {} values, found {} bytes",
            grid.len_nodes(),
            data.len()
        )));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Field::new(grid, values)
}

pub fn write_field(path: impl AsRef<Path>, u: &Field) -> Result<()> {
    fs::write(path, field_to_bytes(u)?)?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    field_from_bytes(&fs::read(path)?)
}
