//! Per-column sample positions: the irregular sampling of column space.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing real z-positions `L(0..Z-1)` of one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub x: usize,
    pub y: usize,
    positions: Vec<f64>,
}

impl ColumnMapping {
    pub fn new(x: usize, y: usize, positions: Vec<f64>) -> Result<Self> {
        validate_mapping(&positions)?;
        Ok(Self { x, y, positions })
    }

    /// The regular grid `L(k) = k`.
    pub fn equidistant(x: usize, y: usize, levels: usize) -> Self {
        Self {
            x,
            y,
            positions: (0..levels).map(|k| k as f64).collect(),
        }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn levels(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.positions[k]
    }
}

/// Checks that positions are finite and strictly increasing.
pub fn validate_mapping(positions: &[f64]) -> Result<()> {
    if let Some((index, &value)) = positions.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteValue { index, value });
    }
    match positions.windows(2).position(|w| w[1] <= w[0]) {
        Some(i) => Err(Error::NonMonotoneMapping { index: i + 1 }),
        None => Ok(()),
    }
}

/// Equidistant mappings for every column of an `X x Y` grid, x-major.
pub fn equidistant_mappings(x_dim: usize, y_dim: usize, levels: usize) -> Vec<ColumnMapping> {
    let mut out = Vec::with_capacity(x_dim * y_dim);
    for x in 0..x_dim {
        for y in 0..y_dim {
            out.push(ColumnMapping::equidistant(x, y, levels));
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct MappingRow {
    x: usize,
    y: usize,
    k: usize,
    position: f64,
}

/// Writes mappings as CSV with header `x,y,k,position`.
pub fn write_mappings_csv(path: impl AsRef<Path>, mappings: &[ColumnMapping]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for m in mappings {
        for (k, &position) in m.positions.iter().enumerate() {
            w.serialize(MappingRow {
                x: m.x,
                y: m.y,
                k,
                position,
            })
            .map_err(|e| Error::format(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads mappings for an `X x Y` grid. Every column must list `k = 0..Z-1`.
pub fn read_mappings_csv(path: impl AsRef<Path>, dims: [usize; 3]) -> Result<Vec<ColumnMapping>> {
    let path = path.as_ref();
    let [nx, ny, nz] = dims;
    let mut grid = vec![vec![f64::NAN; nz]; nx * ny];
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    for row in r.deserialize::<MappingRow>() {
        let row = row.map_err(|e| Error::format(path, e))?;
        if row.x >= nx || row.y >= ny || row.k >= nz {
            return Err(Error::format(
                path,
                format!("row ({}, {}, {}) outside dims {dims:?}", row.x, row.y, row.k),
            ));
        }
        grid[row.x * ny + row.y][row.k] = row.position;
    }
    grid.into_iter()
        .enumerate()
        .map(|(a, positions)| {
            if positions.iter().any(|p| p.is_nan()) {
                return Err(Error::format(path, format!("column {a} is incomplete")));
            }
            ColumnMapping::new(a / ny, a % ny, positions)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_examples() {
        assert!(validate_mapping(&[0.0, 1.0, 2.5]).is_ok());
        assert!(matches!(
            validate_mapping(&[0.0, 0.0, 1.0]),
            Err(Error::NonMonotoneMapping { index: 1 })
        ));
        let regular: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert!(validate_mapping(&regular).is_ok());
        assert!(matches!(
            validate_mapping(&[0.0, f64::INFINITY]),
            Err(Error::NonFiniteValue { index: 1, .. })
        ));
        assert!(matches!(
            validate_mapping(&[0.0, 2.0, 1.0, 3.0]),
            Err(Error::NonMonotoneMapping { index: 2 })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let maps = vec![
            ColumnMapping::new(0, 0, vec![0.1, 1.0, 2.4]).unwrap(),
            ColumnMapping::new(0, 1, vec![-0.3, 0.9, 2.0]).unwrap(),
        ];
        write_mappings_csv(&path, &maps).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,k,position\n"));
        assert_eq!(read_mappings_csv(&path, [1, 2, 3]).unwrap(), maps);
    }
}
