//! Snapshot files: one JSON header line, then the cell values as
//! little-endian `f64` in row-major order (x fastest).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{GridSpec, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    pub t: f64,
    pub field_name: String,
}

impl SnapshotHeader {
    pub fn grid(&self) -> Result<GridSpec> {
        match (self.dim, self.n.as_slice(), self.l.as_slice()) {
            (1, [n], [l]) => GridSpec::new_1d(*n, *l),
            (2, [nx, ny], [lx, ly]) => GridSpec::new_2d(*nx, *ny, *lx, *ly),
            _ => Err(Error::Format(format!(
                "header dim {} inconsistent with N {:?} and L {:?}",
                self.dim, self.n, self.l
            ))),
        }
    }
}

pub fn write_snapshot<W: Write>(out: &mut W, field: &ScalarField, t: f64, field_name: &str) -> Result<()> {
    let g = field.grid();
    let d = g.dim();
    let header = SnapshotHeader {
        dim: d,
        n: g.shape()[..d].to_vec(),
        l: g.lengths()[..d].to_vec(),
        t,
        field_name: field_name.to_string(),
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

pub fn read_snapshot<R: BufRead>(input: &mut R) -> Result<(SnapshotHeader, ScalarField)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: SnapshotHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("header: {e}")))?;
    let grid = header.grid()?;
    let mut bytes = vec![0u8; 8 * grid.len()];
    input
        .read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("expected {} values after the header", grid.len())))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let field = ScalarField::from_vec(grid, values)?;
    Ok((header, field))
}
